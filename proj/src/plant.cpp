#include "shipcc/plant.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "shipcc/errors.hpp"

namespace shipcc {

namespace {

constexpr double kMinFlow = 1e-9;

double superficial_velocity(double flow, double diameter) {
    return 4.0 * flow / (std::numbers::pi * diameter * diameter);
}

LayerState read_layer(std::span<const double, kColumnStates> s, int n) {
    LayerState layer;
    for (int i = 0; i < kComponents; ++i) {
        layer.C_L[i] = s[layout::liquid_conc(0, i, n)];
        layer.C_G[i] = s[layout::gas_conc(0, i, n)];
    }
    layer.T_L = s[layout::liquid_temp(0, n)];
    layer.T_G = s[layout::gas_temp(0, n)];
    return layer;
}

template <class Transfer>
void column_balances(const ColumnParams& col, std::span<const double, kColumnStates> s,
                     const Stream& liquid_inlet, const Stream& gas_inlet, double F_L, double F_G,
                     Transfer&& transfer, std::span<double, kColumnStates> out) {
    const double dl = col.layer_height();
    const double vL = superficial_velocity(F_L, col.D_c) / dl;
    const double vG = superficial_velocity(F_G, col.D_c) / dl;
    const double a = col.a_I;

    for (int n = 0; n < kLayers; ++n) {
        const LayerState layer = read_layer(s, n);
        const TransferRates r = transfer(layer);

        // Liquid comes from the layer above, gas from the layer below.
        const bool top = n == 0;
        const bool bottom = n == kLayers - 1;
        double heat_cap_L = 0.0;
        double heat_cap_G = 0.0;
        for (int i = 0; i < kComponents; ++i) {
            const double CL_up = top ? liquid_inlet.C[i] : s[layout::liquid_conc(0, i, n - 1)];
            const double CG_up = bottom ? gas_inlet.C[i] : s[layout::gas_conc(0, i, n + 1)];
            out[layout::liquid_conc(0, i, n)] = vL * (CL_up - layer.C_L[i]) + r.N[i] * a;
            out[layout::gas_conc(0, i, n)] = vG * (CG_up - layer.C_G[i]) - r.N[i] * a;
            heat_cap_L += std::max(layer.C_L[i], 0.0) * col.cp_liquid[i];
            heat_cap_G += std::max(layer.C_G[i], 0.0) * col.cp_gas[i];
        }
        const double TL_up = top ? liquid_inlet.T : s[layout::liquid_temp(0, n - 1)];
        const double TG_up = bottom ? gas_inlet.T : s[layout::gas_temp(0, n + 1)];
        heat_cap_L = std::max(heat_cap_L, 1e-9);
        heat_cap_G = std::max(heat_cap_G, 1e-9);
        out[layout::liquid_temp(0, n)] = vL * (TL_up - layer.T_L) + (r.Q_L + r.Q_reaction) * a / heat_cap_L;
        out[layout::gas_temp(0, n)] = vG * (TG_up - layer.T_G) + r.Q_G * a / heat_cap_G;
    }
}

double sum4(const std::array<double, kComponents>& v) { return v[0] + v[1] + v[2] + v[3]; }

}  // namespace

bool InputBox::contains(const ControlInput& u) const {
    for (int i = 0; i < kNu; ++i)
        if (!(u[i] >= lower[i] && u[i] <= upper[i])) return false;
    return true;
}

ControlInput InputBox::clip(const ControlInput& u) const {
    ControlInput c;
    for (int i = 0; i < kNu; ++i) c[i] = std::clamp(u[i], lower[i], upper[i]);
    return c;
}

ControlInput InputBox::midpoint() const {
    ControlInput c;
    for (int i = 0; i < kNu; ++i) c[i] = 0.5 * (lower[i] + upper[i]);
    return c;
}

FlueGasRates flue_gas_rates(double phi_E, const EngineParams& ep) {
    if (!std::isfinite(phi_E) || phi_E < 0.0 || phi_E > 1.0)
        throw InputDomainError("engine load ratio must lie in [0, 1]");
    FlueGasRates r;
    r.co2_rate = ep.r_CO2 / (3600.0 * ep.r_C) * ep.q_fuel_C * phi_E * 2.0 * ep.Q_E * ep.W_SFOC;
    r.F_G = r.co2_rate / (ep.q_flue_CO2 * ep.rho_flue);
    return r;
}

HeatSupply heat_supply(double F_G, double F_fuel, const EngineParams& ep) {
    if (!std::isfinite(F_G) || !std::isfinite(F_fuel) || F_G < 0.0 || F_fuel < 0.0)
        throw InputDomainError("flows must be non-negative");
    HeatSupply h;
    h.Q_rec = ep.rho_flue * ep.cp_flue * F_G * (ep.T_rec_in - ep.T_rec_out);
    h.Q_turbine = ep.eta_fuel * F_fuel * (ep.h_steam - ep.h_water) / ep.h_steam;
    h.Q_reb = h.Q_rec + h.Q_turbine;
    return h;
}

double co2_equilibrium_pressure(double C_L_CO2, double C_L_MEA, double T_L, const ClosureParams& cp) {
    const double loading = std::clamp(std::max(C_L_CO2, 0.0) / std::max(C_L_MEA, 1e-12), 0.0, 1.0);
    return cp.eq_K0 * std::exp(-cp.eq_E_over_R * (1.0 / T_L - 1.0 / cp.eq_T_ref)) * loading * loading *
           std::exp(cp.eq_shape * loading);
}

TransferRates transfer_closures(const LayerState& layer, const ClosureParams& cp, const ColumnParams& col,
                                double F_L, double F_G) {
    TransferRates r;
    const double vG = superficial_velocity(std::max(F_G, kMinFlow), col.D_c);
    const double vL = superficial_velocity(std::max(F_L, kMinFlow), col.D_c);
    const double kG = cp.k_G_const * cp.kG_unit * std::pow(vG / cp.v_G_ref, cp.gas_exponent);
    const double kL = cp.k_L_const * cp.kL_unit * std::pow(vL / cp.v_L_ref, cp.liquid_exponent);
    const double K = (kG > 0.0 && kL > 0.0) ? 1.0 / (1.0 / kG + 1.0 / kL) : 0.0;

    const double p_star = co2_equilibrium_pressure(layer.C_L[kCO2], layer.C_L[kMEA], layer.T_L, cp);
    const double C_star = p_star / (kGasConstant * layer.T_L);
    const double E = col.kind == ColumnKind::desorber ? cp.E_des_scale * cp.E0 : 1.0;
    r.N[kCO2] = E * K * (layer.C_G[kCO2] - C_star);

    r.Q_reaction = cp.heat_of_absorption * r.N[kCO2];
    r.Q_L = cp.h_int_scale * cp.h0 * (layer.T_G - layer.T_L);
    r.Q_G = -r.Q_L;
    return r;
}

void column_derivatives(const ColumnParams& col, std::span<const double, kColumnStates> states,
                        const Stream& liquid_inlet, const Stream& gas_inlet, double F_L, double F_G,
                        const ClosureParams& cp, std::span<double, kColumnStates> out) {
    column_balances(col, states, liquid_inlet, gas_inlet, F_L, F_G,
                    [&](const LayerState& l) { return transfer_closures(l, cp, col, F_L, F_G); }, out);
}

void column_derivatives(const ColumnParams& col, std::span<const double, kColumnStates> states,
                        const Stream& liquid_inlet, const Stream& gas_inlet, double F_L, double F_G,
                        const TransferFn& transfer, std::span<double, kColumnStates> out) {
    column_balances(col, states, liquid_inlet, gas_inlet, F_L, F_G, transfer, out);
}

double seawater_hx_outlet(double T_sol_in, double F_sw, double F_L, const HxParams& hx) {
    if (!(F_L > 0.0)) throw SingularInputError("seawater exchanger needs a positive solvent flow");
    return T_sol_in + (hx.rho_sw * F_sw * hx.cp_sw) / (hx.rho_sol * F_L * hx.cp_sol) * (hx.T_sw_in - hx.T_sw_out);
}

HxDerivatives lean_rich_hx_derivatives(double T_tube, double T_shell, double T_rich_in, double F_rich,
                                       double T_lean_in, double F_lean, const HxParams& hx) {
    const double rc = hx.rho_sol * hx.cp_sol;
    const double exchange = hx.U * (T_shell - T_tube);
    HxDerivatives d;
    d.dT_tube = (rc * F_rich * (T_rich_in - T_tube) + exchange) / (rc * hx.V_tube);
    d.dT_shell = (rc * F_lean * (T_lean_in - T_shell) - exchange) / (rc * hx.V_shell);
    return d;
}

std::array<double, kComponents> flash_vapor_fractions(const std::array<double, kComponents>& C_liquid,
                                                      const ReboilerParams& rp) {
    std::array<double, kComponents> y{};
    double denom = 0.0;
    for (int i = 0; i < kComponents; ++i) {
        y[i] = rp.volatility[i] * std::max(C_liquid[i], 0.0);
        denom += y[i];
    }
    if (denom <= 0.0) return y;
    for (double& v : y) v /= denom;
    return y;
}

double reboiler_vapor_fraction(double T_reb, const ReboilerParams& rp) {
    return rp.q_max / (1.0 + std::exp(-(T_reb - rp.T_mid) / rp.width));
}

ReboilerBalance reboiler_residuals(double T_reb, const AlgebraicVector& z, const Stream& inflow, double F_L,
                                   double Q_reb, const ReboilerParams& rp) {
    ReboilerBalance b;
    std::array<double, kComponents> C_out{};
    for (int i = 0; i < kComponents; ++i) C_out[i] = z[alg::kLiquidConc + i];
    const double q = z[alg::kVaporFraction];
    const double F_in_molar = F_L * sum4(inflow.C);
    const double F_vapor = q * F_in_molar;
    const auto y = flash_vapor_fractions(C_out, rp);

    for (int i = 0; i < kComponents; ++i) {
        b.dM_dt[i] = F_L * inflow.C[i] - F_vapor * y[i] * (1.0 - rp.reflux[i]) - F_L * C_out[i];
        b.g[i] = b.dM_dt[i];
    }
    b.g[alg::kVaporFraction] = q - reboiler_vapor_fraction(T_reb, rp);
    const double total_out = sum4(C_out);
    b.g[alg::kCO2MoleFraction] =
        z[alg::kCO2MoleFraction] - (total_out > 0.0 ? C_out[kCO2] / total_out : 0.0);
    b.g[alg::kVaporFlow] = z[alg::kVaporFlow] * rp.pressure / (kGasConstant * T_reb) - F_vapor;

    // Refluxed vapor returns as liquid at the reboiler temperature, so only the
    // feed's sensible heat and the latent heat of the boil-up remain.
    b.dT_dt = (F_in_molar * rp.cp_liquid * (inflow.T - T_reb) - F_vapor * rp.latent_heat + Q_reb) /
              (rp.rho_reb * rp.cp_reb * rp.V_reb);
    return b;
}

Stream flue_gas_inlet(const PlantParameters& params) {
    const auto& ep = params.engine;
    const auto& fp = params.feed;
    Stream s;
    s.T = fp.T_flue_gas;
    const double total = params.absorber.pressure / (kGasConstant * fp.T_flue_gas);
    // CO2 concentration consistent with F_G·C·r_CO2 = co2_rate.
    s.C[kCO2] = ep.rho_flue * ep.q_flue_CO2 / ep.r_CO2;
    s.C[kH2O] = fp.y_H2O_flue * total;
    s.C[kMEA] = 0.0;
    s.C[kN2] = std::max(total - s.C[kCO2] - s.C[kH2O], 0.0);
    return s;
}

void plant_dae(const double* x, const double* z, const ControlInput& u, const Disturbance& p,
               const PlantParameters& params, double* xdot, double* g) {
    using namespace layout;
    const FlueGasRates flue = flue_gas_rates(p.phi_E, params.engine);
    const HeatSupply heat = heat_supply(flue.F_G, u.F_fuel, params.engine);
    const double F_L = u.F_L;
    const Eigen::Map<const AlgebraicVector> zv(z);

    const double T_tube = x[kTubeTemp];
    const double T_shell = x[kShellTemp];
    const double T_reb = x[kReboilerTemp];

    // Absorber: lean solvent from the seawater cooler, flue gas from below.
    Stream abs_liquid;
    for (int i = 0; i < kComponents; ++i) abs_liquid.C[i] = z[alg::kLiquidConc + i];
    abs_liquid.T = seawater_hx_outlet(T_shell, u.F_sw, F_L, params.hx);
    const Stream abs_gas = flue_gas_inlet(params);
    column_derivatives(params.absorber, std::span<const double, kColumnStates>(x + kAbsorber, kColumnStates),
                       abs_liquid, abs_gas, F_L, flue.F_G, params.closure,
                       std::span<double, kColumnStates>(xdot + kAbsorber, kColumnStates));

    // Desorber: rich solvent after the lean-rich exchanger, reboiler vapor from below.
    Stream rich;
    for (int i = 0; i < kComponents; ++i) rich.C[i] = x[liquid_conc(kAbsorber, i, kLayers - 1)];
    rich.T = x[liquid_temp(kAbsorber, kLayers - 1)];
    Stream des_liquid = rich;
    des_liquid.T = T_tube;

    std::array<double, kComponents> C_reb{};
    for (int i = 0; i < kComponents; ++i) C_reb[i] = z[alg::kLiquidConc + i];
    const auto y = flash_vapor_fractions(C_reb, params.reboiler);
    Stream des_gas;
    const double vapor_total = params.reboiler.pressure / (kGasConstant * T_reb);
    for (int i = 0; i < kComponents; ++i) des_gas.C[i] = y[i] * vapor_total;
    des_gas.T = T_reb;
    const double F_vapor = std::max(z[alg::kVaporFlow], 0.0);
    column_derivatives(params.desorber, std::span<const double, kColumnStates>(x + kDesorber, kColumnStates),
                       des_liquid, des_gas, F_L, F_vapor, params.closure,
                       std::span<double, kColumnStates>(xdot + kDesorber, kColumnStates));

    const HxDerivatives hx = lean_rich_hx_derivatives(T_tube, T_shell, rich.T, F_L, T_reb, F_L, params.hx);
    xdot[kTubeTemp] = hx.dT_tube;
    xdot[kShellTemp] = hx.dT_shell;

    Stream reb_in;
    for (int i = 0; i < kComponents; ++i) reb_in.C[i] = x[liquid_conc(kDesorber, i, kLayers - 1)];
    reb_in.T = x[liquid_temp(kDesorber, kLayers - 1)];
    const ReboilerBalance rb = reboiler_residuals(T_reb, zv, reb_in, F_L, heat.Q_reb, params.reboiler);
    xdot[kReboilerTemp] = rb.dT_dt;
    for (int i = 0; i < kNz; ++i) g[i] = rb.g[i];
}

PlantDerivatives plant_dae(const StateVector& x, const AlgebraicVector& z, const ControlInput& u,
                           const Disturbance& p, const PlantParameters& params) {
    PlantDerivatives d;
    plant_dae(x.data(), z.data(), u, p, params, d.xdot.data(), d.g.data());
    return d;
}

PlantOutput outputs(const StateVector& x, const Disturbance& p, const EngineParams& ep) {
    const FlueGasRates flue = flue_gas_rates(p.phi_E, ep);
    PlantOutput y;
    y.F_CO2_out = ep.r_CO2 * std::max(x[layout::gas_conc(layout::kAbsorber, kCO2, 0)], 0.0) * flue.F_G;
    y.T_reb = x[layout::kReboilerTemp];
    return y;
}

double capture_rate(const PlantOutput& y, const Disturbance& p, const EngineParams& ep) {
    const double inlet = flue_gas_rates(p.phi_E, ep).co2_rate;
    if (!(inlet > 0.0)) throw UndefinedRateError("capture rate is undefined at zero inlet CO2");
    return (inlet - y.F_CO2_out) / inlet;
}

StateVector initial_state(const PlantParameters& params) {
    using namespace layout;
    const auto& fp = params.feed;
    StateVector x = StateVector::Zero();
    const Stream flue = flue_gas_inlet(params);
    const std::array<double, kComponents> lean{0.0, fp.initial_loading * fp.solvent_MEA, fp.solvent_MEA,
                                               fp.solvent_H2O};
    const double steam = params.desorber.pressure / (kGasConstant * fp.T_initial);
    for (int n = 0; n < kLayers; ++n) {
        for (int i = 0; i < kComponents; ++i) {
            x[liquid_conc(kAbsorber, i, n)] = lean[i];
            x[liquid_conc(kDesorber, i, n)] = lean[i];
            x[gas_conc(kAbsorber, i, n)] = flue.C[i];
            x[gas_conc(kDesorber, i, n)] = i == kH2O ? steam : 0.0;
        }
        x[liquid_temp(kAbsorber, n)] = fp.T_initial;
        x[liquid_temp(kDesorber, n)] = fp.T_initial;
        x[gas_temp(kAbsorber, n)] = fp.T_flue_gas;
        x[gas_temp(kDesorber, n)] = fp.T_initial;
    }
    x[kTubeTemp] = fp.T_initial;
    x[kShellTemp] = fp.T_initial;
    x[kReboilerTemp] = fp.T_initial;
    return x;
}

AlgebraicVector algebraic_guess(const StateVector& x, const ControlInput& u, const PlantParameters& params) {
    using namespace layout;
    const auto& rp = params.reboiler;
    AlgebraicVector z;
    double total = 0.0;
    for (int i = 0; i < kComponents; ++i) {
        z[alg::kLiquidConc + i] = std::max(x[liquid_conc(kDesorber, i, kLayers - 1)], 0.0);
        total += z[alg::kLiquidConc + i];
    }
    const double T = x[kReboilerTemp];
    const double q = reboiler_vapor_fraction(T, rp);
    z[alg::kVaporFraction] = q;
    z[alg::kCO2MoleFraction] = total > 0.0 ? z[alg::kLiquidConc + kCO2] / total : 0.0;
    z[alg::kVaporFlow] = q * u.F_L * total * kGasConstant * T / rp.pressure;
    return z;
}

bool state_in_range(const StateVector& x) {
    for (int i = 0; i < kNx; ++i) {
        if (!std::isfinite(x[i])) return false;
        if (layout::is_temperature(i) && !(x[i] > 273.0 && x[i] < 473.0)) return false;
    }
    return true;
}

}  // namespace shipcc
