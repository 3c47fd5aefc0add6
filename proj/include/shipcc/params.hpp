#pragma once

#include <array>
#include <string>

namespace shipcc {

/// Component order used for every per-component array: N2, CO2, MEA, H2O.
enum Component : int { kN2 = 0, kCO2 = 1, kMEA = 2, kH2O = 3 };
inline constexpr int kComponents = 4;

/// Universal gas constant in kPa·m³/(kmol·K).
inline constexpr double kGasConstant = 8.314462618;

/// Ship engines, waste-heat recovery and the auxiliary diesel gas turbine.
struct EngineParams {
    double Q_E = 10800.0;        // kW per engine at full load
    double W_SFOC = 0.1775;      // kg/kWh
    double q_fuel_C = 0.8486;    // carbon fraction of fuel
    double r_C = 12.01;          // kg/kmol
    double r_CO2 = 44.01;        // kg/kmol
    double q_flue_CO2 = 0.05462;
    double rho_flue = 1.0;       // kg/m³
    double cp_flue = 1.1;        // kJ/(kg·K)
    double T_rec_in = 633.15;    // K
    double T_rec_out = 423.15;   // K
    double eta_fuel = 42700.0;   // kJ/kg
    double h_steam = 2763.0;     // kJ/kg, saturated steam at 6 barG
    double h_water = 697.0;      // kJ/kg, saturated water at 6 barG
};

enum class ColumnKind { absorber, desorber };

/// Packed column geometry. The state layout fixes five layers per column.
struct ColumnParams {
    ColumnKind kind = ColumnKind::absorber;
    double D_c = 4.2;       // m
    double length = 12.5;   // m
    double a_I = 143.9;     // m²/m³
    int n_layers = 5;
    std::array<double, kComponents> cp_liquid{29.1, 37.1, 160.0, 75.3};  // kJ/(kmol·K)
    std::array<double, kComponents> cp_gas{29.1, 37.1, 100.0, 33.6};     // kJ/(kmol·K)
    double pressure = 101.325;  // kPa

    double area() const;
    double layer_height() const { return length / n_layers; }
};

/// Constants of the surrogate transfer correlations. The first four fields are the
/// ones the imperfect model perturbs; everything else is shared by both variants.
struct ClosureParams {
    double k_G_const = 5.23;
    double k_L_const = 0.0051;
    double h_int_scale = 1.0;
    double E_des_scale = 1.0;

    // k_G = k_G_const·kG_unit·(v_G/v_G_ref)^gas_exponent, likewise for the liquid film.
    double kG_unit = 1.1e-3;       // m/s
    double kL_unit = 1.1;          // m/s, chemical enhancement lumped in
    double v_G_ref = 2.4;          // m/s superficial
    double v_L_ref = 2.17e-3;      // m/s superficial
    double gas_exponent = 0.7;
    double liquid_exponent = 0.5;

    double h0 = 0.02;              // kW/(m²·K) interfacial heat transfer
    double heat_of_absorption = 20000.0;  // kJ/kmol CO2, released into the liquid
    double E0 = 3.0;               // desorber enhancement factor

    // CO2 equilibrium partial pressure over loaded MEA:
    //   p* = eq_K0·exp(-eq_E_over_R·(1/T - 1/eq_T_ref))·α²·exp(eq_shape·α)   [kPa]
    double eq_K0 = 0.0184;         // kPa
    double eq_E_over_R = 9500.0;   // K
    double eq_T_ref = 313.15;      // K
    double eq_shape = 16.0;
};

/// Lean-rich and seawater heat exchangers.
struct HxParams {
    double V_tube = 0.0155;     // m³
    double V_shell = 0.4172;    // m³
    double U = 1899.949;        // kW/K
    double T_sw_in = 308.0;     // K
    double T_sw_out = 323.0;    // K
    double cp_sw = 4.18;        // kJ/(kg·K)
    double cp_sol = 3.9;        // kJ/(kg·K)
    double rho_sw = 1000.0;     // kg/m³
    double rho_sol = 1000.0;    // kg/m³
};

/// Reboiler holdup, affine enthalpy model and constant-relative-volatility flash.
struct ReboilerParams {
    double V_reb = 0.145;       // m³
    double rho_reb = 45.0;      // kmol/m³
    double cp_reb = 85.0;       // kJ/(kmol·K), holdup heat capacity
    double cp_liquid = 85.0;    // kJ/(kmol·K), slope of H_L and H_V
    double T_enthalpy_ref = 298.15;
    double latent_heat = 40000.0;  // kJ/kmol, H_V - H_L
    double pressure = 101.325;     // kPa

    // Vapor fraction q_reb = q_max / (1 + exp(-(T - T_mid)/width)).
    double q_max = 0.6;
    double T_mid = 401.4;       // K
    double width = 24.7;        // K

    // Relative volatilities (H2O = 1) of the flash at the 120 °C reference.
    std::array<double, kComponents> volatility{1.0e4, 3.5, 0.05, 1.0};
    // Fraction of each vaporized component returned as condenser reflux.
    std::array<double, kComponents> reflux{0.0, 0.0, 1.0, 1.0};
};

/// Boundary streams: flue gas entering the absorber and the initial solvent charge.
struct FeedParams {
    double T_flue_gas = 313.15;     // K, after the flue gas cooler
    double y_H2O_flue = 0.08;       // mole fraction of water in the flue gas
    double solvent_MEA = 4.96;      // kmol/m³, 30 wt% MEA
    double solvent_H2O = 39.2;      // kmol/m³
    double initial_loading = 0.25;  // mol CO2 / mol MEA
    double T_initial = 330.0;       // K
};

struct PlantParameters {
    std::string variant = "truth";
    EngineParams engine;
    ColumnParams absorber;
    ColumnParams desorber;
    ClosureParams closure;
    HxParams hx;
    ReboilerParams reboiler;
    FeedParams feed;

    /// The high-fidelity simulator.
    static PlantParameters truth();
    /// Same plant with the four perturbed closure constants.
    static PlantParameters imperfect();
    /// Truth with the four perturbations applied at a fraction `scale` of their full
    /// size (0 gives truth, 1 gives the imperfect set).
    static PlantParameters mismatch_scaled(double scale);
    static PlantParameters by_name(const std::string& name);

    /// Every field as `name=value;` text with round-trip precision, for hashing.
    std::string canonical() const;
};

}  // namespace shipcc
