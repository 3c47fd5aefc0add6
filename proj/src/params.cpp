#include "shipcc/params.hpp"

#include <charconv>
#include <cmath>
#include <sstream>
#include <numbers>

#include "shipcc/errors.hpp"

namespace shipcc {

double ColumnParams::area() const { return std::numbers::pi * D_c * D_c / 4.0; }

PlantParameters PlantParameters::truth() {
    PlantParameters p;
    p.variant = "truth";
    p.absorber.kind = ColumnKind::absorber;
    p.absorber.D_c = 4.2;
    p.desorber.kind = ColumnKind::desorber;
    p.desorber.D_c = 4.9;
    return p;
}

PlantParameters PlantParameters::mismatch_scaled(double scale) {
    if (!std::isfinite(scale) || scale < 0.0) throw InputDomainError("mismatch scale must be non-negative");
    PlantParameters p = truth();
    auto lerp = [scale](double a, double b) { return a + scale * (b - a); };
    p.closure.k_G_const = lerp(5.23, 3.08);
    p.closure.k_L_const = lerp(0.0051, 0.0031);
    p.closure.h_int_scale = lerp(1.0, 0.8);
    p.closure.E_des_scale = lerp(1.0, 1.05);
    p.variant = scale == 0.0 ? "truth" : (scale == 1.0 ? "imperfect" : "mismatch");
    return p;
}

PlantParameters PlantParameters::imperfect() { return mismatch_scaled(1.0); }

PlantParameters PlantParameters::by_name(const std::string& name) {
    if (name == "truth") return truth();
    if (name == "imperfect") return imperfect();
    throw ConfigError("unknown parameter set: " + name);
}

namespace {

class Canon {
public:
    Canon& operator()(const char* name, double v) {
        char buf[32];
        const auto r = std::to_chars(buf, buf + sizeof buf, v);
        os_ << name << '=' << std::string_view(buf, static_cast<std::size_t>(r.ptr - buf)) << ';';
        return *this;
    }
    Canon& operator()(const char* name, const std::array<double, kComponents>& v) {
        for (int i = 0; i < kComponents; ++i) (*this)((std::string(name) + std::to_string(i)).c_str(), v[i]);
        return *this;
    }
    Canon& column(const char* prefix, const ColumnParams& c) {
        os_ << prefix << ".kind=" << (c.kind == ColumnKind::absorber ? "absorber" : "desorber") << ';';
        const std::string p(prefix);
        (*this)((p + ".D_c").c_str(), c.D_c)((p + ".length").c_str(), c.length)((p + ".a_I").c_str(), c.a_I);
        (*this)((p + ".n_layers").c_str(), c.n_layers)((p + ".pressure").c_str(), c.pressure);
        (*this)((p + ".cp_liquid").c_str(), c.cp_liquid)((p + ".cp_gas").c_str(), c.cp_gas);
        return *this;
    }
    std::string str() const { return os_.str(); }

private:
    std::ostringstream os_;
};

}  // namespace

std::string PlantParameters::canonical() const {
    Canon c;
    const auto& e = engine;
    c("Q_E", e.Q_E)("W_SFOC", e.W_SFOC)("q_fuel_C", e.q_fuel_C)("r_C", e.r_C)("r_CO2", e.r_CO2);
    c("q_flue_CO2", e.q_flue_CO2)("rho_flue", e.rho_flue)("cp_flue", e.cp_flue)("T_rec_in", e.T_rec_in);
    c("T_rec_out", e.T_rec_out)("eta_fuel", e.eta_fuel)("h_steam", e.h_steam)("h_water", e.h_water);
    c.column("absorber", absorber).column("desorber", desorber);
    const auto& k = closure;
    c("k_G_const", k.k_G_const)("k_L_const", k.k_L_const)("h_int_scale", k.h_int_scale);
    c("E_des_scale", k.E_des_scale)("kG_unit", k.kG_unit)("kL_unit", k.kL_unit)("v_G_ref", k.v_G_ref);
    c("v_L_ref", k.v_L_ref)("gas_exponent", k.gas_exponent)("liquid_exponent", k.liquid_exponent);
    c("h0", k.h0)("heat_of_absorption", k.heat_of_absorption)("E0", k.E0)("eq_K0", k.eq_K0);
    c("eq_E_over_R", k.eq_E_over_R)("eq_T_ref", k.eq_T_ref)("eq_shape", k.eq_shape);
    const auto& h = hx;
    c("V_tube", h.V_tube)("V_shell", h.V_shell)("U", h.U)("T_sw_in", h.T_sw_in)("T_sw_out", h.T_sw_out);
    c("cp_sw", h.cp_sw)("cp_sol", h.cp_sol)("rho_sw", h.rho_sw)("rho_sol", h.rho_sol);
    const auto& r = reboiler;
    c("V_reb", r.V_reb)("rho_reb", r.rho_reb)("cp_reb", r.cp_reb)("reb.cp_liquid", r.cp_liquid);
    c("T_enthalpy_ref", r.T_enthalpy_ref)("latent_heat", r.latent_heat)("reb.pressure", r.pressure);
    c("q_max", r.q_max)("T_mid", r.T_mid)("width", r.width)("volatility", r.volatility)("reflux", r.reflux);
    const auto& f = feed;
    c("T_flue_gas", f.T_flue_gas)("y_H2O_flue", f.y_H2O_flue)("solvent_MEA", f.solvent_MEA);
    c("solvent_H2O", f.solvent_H2O)("initial_loading", f.initial_loading)("T_initial", f.T_initial);
    return c.str();
}

}  // namespace shipcc
