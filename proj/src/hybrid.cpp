#include "shipcc/hybrid.hpp"

#include <algorithm>
#include <sstream>

#include "shipcc/errors.hpp"
#include "shipcc/trajectory_io.hpp"

namespace shipcc {

namespace {

Eigen::MatrixXd column(const ControlInput& u) {
    Eigen::MatrixXd m(kNu, 1);
    m << u.F_L, u.F_fuel, u.F_sw;
    return m;
}

Eigen::MatrixXd column(const Disturbance& p) { return Eigen::MatrixXd::Constant(1, 1, p.phi_E); }

void check_lengths(const std::vector<ControlInput>& u, const std::vector<Disturbance>& p, long N) {
    if (N < 0) throw InputDomainError("rollout length must be non-negative");
    if (static_cast<long>(u.size()) < N || static_cast<long>(p.size()) < N)
        throw ShapeError("input or load sequence shorter than the rollout");
}

void fill_outputs(Rollout& r, const std::vector<Disturbance>& p, const EngineParams& ep) {
    const long N = r.steps();
    r.Y.resize(N + 1, kNy);
    for (long k = 0; k <= N; ++k) {
        const Disturbance pk = p.empty() ? Disturbance{} : p[static_cast<std::size_t>(std::min(k, N > 0 ? N - 1 : 0))];
        const PlantOutput y = outputs(r.X.row(k).transpose(), pk, ep);
        r.Y(k, 0) = y.F_CO2_out;
        r.Y(k, 1) = y.T_reb;
    }
}

const ControlInput& held(const std::vector<ControlInput>& u, long k, long N) {
    return u[static_cast<std::size_t>(std::min(k, N - 1))];
}
const Disturbance& held(const std::vector<Disturbance>& p, long k, long N) {
    return p[static_cast<std::size_t>(std::min(k, N - 1))];
}

}  // namespace

void HybridModel::validate() const {
    if (inference.sizes().empty() || inference.input_dim() != kNx + kNu + 1 || inference.output_dim() != kNz)
        throw ShapeError("inference network must map 107 inputs to 7 outputs");
    if (!zero_compensation &&
        (compensation.sizes().empty() || compensation.input_dim() != kNx + kNz + kNu + 1 ||
         compensation.output_dim() != kNx))
        throw ShapeError("compensation network must map 114 inputs to 103 outputs");
    if (stats.x.dim() != kNx || stats.z.dim() != kNz || stats.u.dim() != kNu || stats.p.dim() != 1 ||
        stats.x_err.dim() != kNx)
        throw ShapeError("normalization statistics do not match the plant layout");
}

void clip_algebraic(AlgebraicVector& z) {
    for (int i = 0; i < kComponents; ++i) z[alg::kLiquidConc + i] = std::max(z[alg::kLiquidConc + i], 0.0);
    z[alg::kVaporFraction] = std::clamp(z[alg::kVaporFraction], 0.0, 1.0);
    z[alg::kCO2MoleFraction] = std::clamp(z[alg::kCO2MoleFraction], 0.0, 1.0);
    z[alg::kVaporFlow] = std::max(z[alg::kVaporFlow], 0.0);
}

void clip_state(StateVector& x) {
    for (int i = 0; i < kNx; ++i) {
        if (layout::is_temperature(i))
            x[i] = std::clamp(x[i], 274.0, 472.0);
        else
            x[i] = std::max(x[i], 0.0);
    }
}

AlgebraicVector infer_algebraic(const HybridModel& m, const StateVector& x, const ControlInput& u,
                                const Disturbance& p) {
    const Eigen::MatrixXd f = inference_features(m.stats, Eigen::MatrixXd(x), column(u), column(p));
    AlgebraicVector z = m.stats.z.denormalize(m.inference.forward(f)).col(0);
    clip_algebraic(z);
    return z;
}

StateVector compensation_term(const HybridModel& m, const StateVector& x, const AlgebraicVector& z,
                              const ControlInput& u, const Disturbance& p) {
    if (m.zero_compensation) return StateVector::Zero();
    const Eigen::MatrixXd f = state_features(m.stats, Eigen::MatrixXd(x), Eigen::MatrixXd(z), column(u), column(p));
    return m.stats.x_err.denormalize(m.compensation.forward(f)).col(0);
}

StateVector hybrid_step(const HybridModel& m, const StateVector& x, const ControlInput& u, const Disturbance& p) {
    const AlgebraicVector z = infer_algebraic(m, x, u, p);
    const StateVector fp = dae_step(x, z, u, p, m.params, m.integrator).x;
    if (m.zero_compensation) return fp;
    return fp + compensation_term(m, x, z, u, p);
}

Rollout hybrid_rollout(const HybridModel& m, const StateVector& x0, const std::vector<ControlInput>& u_seq,
                       const std::vector<Disturbance>& p_seq, long N) {
    check_lengths(u_seq, p_seq, N);
    if (N == 0) throw InputDomainError("hybrid rollout needs at least one step");
    Rollout r;
    r.X.resize(N + 1, kNx);
    r.Z.resize(N + 1, kNz);
    StateVector x = x0;
    r.X.row(0) = x.transpose();
    for (long k = 0; k < N; ++k) {
        const auto& u = u_seq[static_cast<std::size_t>(k)];
        const auto& p = p_seq[static_cast<std::size_t>(k)];
        const AlgebraicVector z = infer_algebraic(m, x, u, p);
        r.Z.row(k) = z.transpose();
        StateVector next;
        try {
            next = dae_step(x, z, u, p, m.params, m.integrator).x;
        } catch (const StepFailure& e) {
            throw StepFailure(std::string("hybrid rollout: ") + e.what(), k);
        }
        if (!m.zero_compensation) next += compensation_term(m, x, z, u, p);
        clip_state(next);
        x = next;
        r.X.row(k + 1) = x.transpose();
    }
    r.Z.row(N) = infer_algebraic(m, x, held(u_seq, N, N), held(p_seq, N, N)).transpose();
    fill_outputs(r, p_seq, m.params.engine);
    return r;
}

std::pair<StateVector, AlgebraicVector> blackbox_step(const BlackboxModel& m, const StateVector& x,
                                                      const AlgebraicVector& z, const ControlInput& u,
                                                      const Disturbance& p) {
    const Eigen::MatrixXd f = state_features(m.stats, Eigen::MatrixXd(x), Eigen::MatrixXd(z), column(u), column(p));
    const Eigen::VectorXd out = m.net.forward(f).col(0);
    const StateVector xn = m.stats.x.denormalize(Eigen::MatrixXd(out.head(kNx))).col(0);
    const AlgebraicVector zn = m.stats.z.denormalize(Eigen::MatrixXd(out.tail(kNz))).col(0);
    return {xn, zn};
}

Rollout blackbox_rollout(const BlackboxModel& m, const StateVector& x0, const AlgebraicVector& z0,
                         const std::vector<ControlInput>& u_seq, const std::vector<Disturbance>& p_seq, long N) {
    check_lengths(u_seq, p_seq, N);
    if (m.net.input_dim() != kNx + kNz + kNu + 1 || m.net.output_dim() != kNx + kNz)
        throw ShapeError("black-box network must map 114 inputs to 110 outputs");
    Rollout r;
    r.X.resize(N + 1, kNx);
    r.Z.resize(N + 1, kNz);
    StateVector x = x0;
    AlgebraicVector z = z0;
    r.X.row(0) = x.transpose();
    r.Z.row(0) = z.transpose();
    for (long k = 0; k < N; ++k) {
        auto [xn, zn] = blackbox_step(m, x, z, u_seq[static_cast<std::size_t>(k)], p_seq[static_cast<std::size_t>(k)]);
        clip_state(xn);
        clip_algebraic(zn);
        x = xn;
        z = zn;
        r.X.row(k + 1) = x.transpose();
        r.Z.row(k + 1) = z.transpose();
    }
    fill_outputs(r, p_seq, PlantParameters::truth().engine);
    return r;
}

Rollout physics_rollout(const PlantParameters& params, const StateVector& x0, const std::vector<ControlInput>& u_seq,
                        const std::vector<Disturbance>& p_seq, long N, const IntegratorConfig& cfg) {
    check_lengths(u_seq, p_seq, N);
    const std::vector<ControlInput> u(u_seq.begin(), u_seq.begin() + N);
    const std::vector<Disturbance> p(p_seq.begin(), p_seq.begin() + N);
    const Trajectory t = simulate_open_loop(x0, u, p, params, cfg);
    return Rollout{t.X, t.Z, t.Y};
}

RolloutWindow rollout_window(const Trajectory& t, long begin, long N) {
    if (begin < 0 || N < 1 || begin + N > t.steps()) throw ShapeError("rollout window exceeds the trajectory");
    RolloutWindow w;
    w.x0 = t.X.row(begin).transpose();
    w.z0 = t.Z.row(begin).transpose();
    for (long k = 0; k < N; ++k) {
        const long i = begin + k;
        w.u.push_back(ControlInput{t.U(i, 0), t.U(i, 1), t.U(i, 2)});
        w.p.push_back(Disturbance{t.P[i]});
    }
    w.X = t.X.middleRows(begin, N + 1);
    w.Z = t.Z.middleRows(begin, N + 1);
    return w;
}

RolloutError rollout_error(const NormalizationStats& s, const RolloutWindow& w, const Rollout& r) {
    const long N = static_cast<long>(w.u.size());
    if (r.steps() != N) throw ShapeError("rollout length does not match the window");
    RolloutError e;
    e.points = N;
    const Eigen::MatrixXd tx = s.x.normalize(w.X.bottomRows(N).transpose());
    const Eigen::MatrixXd px = s.x.normalize(r.X.bottomRows(N).transpose());
    const Eigen::MatrixXd tz = s.z.normalize(w.Z.bottomRows(N).transpose());
    const Eigen::MatrixXd pz = s.z.normalize(r.Z.bottomRows(N).transpose());
    e.x_mse = evaluate_mse(tx, px);
    e.z_mse = evaluate_mse(tz, pz);
    return e;
}

RolloutError pool(const std::vector<RolloutError>& parts) {
    RolloutError out;
    for (const auto& e : parts) {
        out.x_mse += e.x_mse * static_cast<double>(e.points);
        out.z_mse += e.z_mse * static_cast<double>(e.points);
        out.points += e.points;
    }
    if (out.points == 0) throw InputDomainError("no rollout errors to pool");
    out.x_mse /= static_cast<double>(out.points);
    out.z_mse /= static_cast<double>(out.points);
    return out;
}

std::string rollout_comparison_csv(const RolloutWindow& w, const std::map<std::string, Rollout>& models) {
    const long N = static_cast<long>(w.u.size());
    for (const auto& [name, r] : models)
        if (r.steps() != N) throw ShapeError("rollout " + name + " does not match the window length");
    std::ostringstream os;
    os << "step,variable,truth";
    for (const auto& [name, r] : models) os << ',' << name;
    os << '\n';
    for (long k = 0; k <= N; ++k) {
        for (int i = 0; i < kNx + kNz; ++i) {
            const bool is_x = i < kNx;
            const int j = is_x ? i : i - kNx;
            os << k << ',' << (is_x ? "x" : "z") << (j + 1) << ','
               << format_double(is_x ? w.X(k, j) : w.Z(k, j));
            for (const auto& [name, r] : models) os << ',' << format_double(is_x ? r.X(k, j) : r.Z(k, j));
            os << '\n';
        }
    }
    return os.str();
}

}  // namespace shipcc
