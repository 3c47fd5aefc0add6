#pragma once

#include <array>
#include <functional>
#include <span>

#include <Eigen/Core>

#include "shipcc/params.hpp"

namespace shipcc {

inline constexpr int kNx = 103;
inline constexpr int kNz = 7;
inline constexpr int kNu = 3;
inline constexpr int kNy = 2;
inline constexpr int kLayers = 5;
inline constexpr int kColumnStates = 50;

using StateVector = Eigen::Matrix<double, kNx, 1>;
using AlgebraicVector = Eigen::Matrix<double, kNz, 1>;

/// Differential-state layout (0-based). Layer 0 is the top of a column.
namespace layout {
inline constexpr int kAbsorber = 0;
inline constexpr int kDesorber = 50;
constexpr int liquid_conc(int column, int comp, int layer) { return column + comp * kLayers + layer; }
constexpr int liquid_temp(int column, int layer) { return column + 20 + layer; }
constexpr int gas_conc(int column, int comp, int layer) { return column + 25 + comp * kLayers + layer; }
constexpr int gas_temp(int column, int layer) { return column + 45 + layer; }
inline constexpr int kTubeTemp = 100;
inline constexpr int kShellTemp = 101;
inline constexpr int kReboilerTemp = 102;

constexpr bool is_temperature(int i) {
    if (i >= 100) return true;
    const int local = i % kColumnStates;
    return (local >= 20 && local < 25) || local >= 45;
}
}  // namespace layout

/// Algebraic-state layout: reboiler liquid concentrations, vapor fraction,
/// liquid CO2 mole fraction and vapor volumetric flow.
namespace alg {
inline constexpr int kLiquidConc = 0;  // 0..3, component order
inline constexpr int kVaporFraction = 4;
inline constexpr int kCO2MoleFraction = 5;
inline constexpr int kVaporFlow = 6;
}  // namespace alg

struct ControlInput {
    double F_L = 0.03;      // m³/s solvent
    double F_fuel = 0.2635; // kg/s gas-turbine fuel
    double F_sw = 0.03;     // m³/s seawater

    double operator[](int i) const { return i == 0 ? F_L : (i == 1 ? F_fuel : F_sw); }
    double& operator[](int i) { return i == 0 ? F_L : (i == 1 ? F_fuel : F_sw); }
    bool operator==(const ControlInput&) const = default;
};

struct InputBox {
    ControlInput lower{0.02, 0.194, 0.02};
    ControlInput upper{0.04, 0.333, 0.04};

    bool contains(const ControlInput& u) const;
    ControlInput clip(const ControlInput& u) const;
    ControlInput midpoint() const;
};

struct Disturbance {
    double phi_E = 0.55;
};

struct PlantOutput {
    double F_CO2_out = 0.0;  // kg/s
    double T_reb = 0.0;      // K
};

// ---------------------------------------------------------------------------
// Ship engine side.

struct FlueGasRates {
    double co2_rate = 0.0;  // kg/s
    double F_G = 0.0;       // m³/s
};

FlueGasRates flue_gas_rates(double phi_E, const EngineParams& ep);

struct HeatSupply {
    double Q_rec = 0.0;      // kW
    double Q_turbine = 0.0;  // kW
    double Q_reb = 0.0;      // kW
};

HeatSupply heat_supply(double F_G, double F_fuel, const EngineParams& ep);

// ---------------------------------------------------------------------------
// Packed columns.

struct LayerState {
    std::array<double, kComponents> C_L{};
    std::array<double, kComponents> C_G{};
    double T_L = 0.0;
    double T_G = 0.0;
};

/// Interfacial fluxes. N > 0 moves a component from gas into liquid.
struct TransferRates {
    std::array<double, kComponents> N{};  // kmol/(m²·s)
    double Q_L = 0.0;                     // kW/m² into the liquid
    double Q_G = 0.0;                     // kW/m² into the gas
    double Q_reaction = 0.0;              // kW/m² of absorption heat into the liquid
};

/// CO2 partial pressure in equilibrium with the liquid, in kPa.
double co2_equilibrium_pressure(double C_L_CO2, double C_L_MEA, double T_L, const ClosureParams& cp);

TransferRates transfer_closures(const LayerState& layer, const ClosureParams& cp, const ColumnParams& col,
                                double F_L, double F_G);

struct Stream {
    std::array<double, kComponents> C{};
    double T = 0.0;
};

using TransferFn = std::function<TransferRates(const LayerState&)>;

/// Time derivatives of one 5-layer column section laid out like a 50-state block of
/// the plant vector. Liquid enters layer 0 and gas enters layer 4.
void column_derivatives(const ColumnParams& col, std::span<const double, kColumnStates> states,
                        const Stream& liquid_inlet, const Stream& gas_inlet, double F_L, double F_G,
                        const ClosureParams& cp, std::span<double, kColumnStates> out);

/// Same balances with a caller-supplied transfer model.
void column_derivatives(const ColumnParams& col, std::span<const double, kColumnStates> states,
                        const Stream& liquid_inlet, const Stream& gas_inlet, double F_L, double F_G,
                        const TransferFn& transfer, std::span<double, kColumnStates> out);

// ---------------------------------------------------------------------------
// Heat exchangers.

double seawater_hx_outlet(double T_sol_in, double F_sw, double F_L, const HxParams& hx);

struct HxDerivatives {
    double dT_tube = 0.0;
    double dT_shell = 0.0;
};

/// Two well-mixed volumes: the rich (cold) stream flows through the tube side and
/// the lean (hot) stream through the shell side.
HxDerivatives lean_rich_hx_derivatives(double T_tube, double T_shell, double T_rich_in, double F_rich,
                                       double T_lean_in, double F_lean, const HxParams& hx);

// ---------------------------------------------------------------------------
// Reboiler.

/// Vapor mole fractions of the constant-relative-volatility flash for a liquid of
/// the given concentrations.
std::array<double, kComponents> flash_vapor_fractions(const std::array<double, kComponents>& C_liquid,
                                                      const ReboilerParams& rp);

double reboiler_vapor_fraction(double T_reb, const ReboilerParams& rp);

struct ReboilerBalance {
    std::array<double, kComponents> dM_dt{};  // kmol/s, component order
    double dT_dt = 0.0;                       // K/s
    std::array<double, kNz> g{};
};

ReboilerBalance reboiler_residuals(double T_reb, const AlgebraicVector& z, const Stream& inflow, double F_L,
                                   double Q_reb, const ReboilerParams& rp);

// ---------------------------------------------------------------------------
// Whole plant.

struct PlantDerivatives {
    StateVector xdot;
    AlgebraicVector g;
};

PlantDerivatives plant_dae(const StateVector& x, const AlgebraicVector& z, const ControlInput& u,
                           const Disturbance& p, const PlantParameters& params);

/// Allocation-free form used by the integrator. `xdot` has kNx entries, `g` kNz.
void plant_dae(const double* x, const double* z, const ControlInput& u, const Disturbance& p,
               const PlantParameters& params, double* xdot, double* g);

PlantOutput outputs(const StateVector& x, const Disturbance& p, const EngineParams& ep);
double capture_rate(const PlantOutput& y, const Disturbance& p, const EngineParams& ep);

/// Absorber gas inlet (flue gas after cooling).
Stream flue_gas_inlet(const PlantParameters& params);

/// Uniform start: both columns full of lean solvent at `feed.initial_loading`.
StateVector initial_state(const PlantParameters& params);

/// Physically plausible algebraic guess derived from the desorber bottom layer.
AlgebraicVector algebraic_guess(const StateVector& x, const ControlInput& u, const PlantParameters& params);

/// True when every temperature lies in (273, 473) K and every concentration is finite.
bool state_in_range(const StateVector& x);

}  // namespace shipcc
