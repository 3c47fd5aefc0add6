#include "shipcc/control.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "shipcc/errors.hpp"
#include "shipcc/trajectory_io.hpp"

namespace shipcc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::uint64_t call_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t v = seed ^ (index + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
    v = (v ^ (v >> 30)) * 0xbf58476d1ce4e5b9ULL;
    v = (v ^ (v >> 27)) * 0x94d049bb133111ebULL;
    return v ^ (v >> 31);
}

std::vector<ControlInput> to_sequence(const Eigen::MatrixXd& m) {
    std::vector<ControlInput> seq(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index j = 0; j < m.rows(); ++j) seq[static_cast<std::size_t>(j)] = {m(j, 0), m(j, 1), m(j, 2)};
    return seq;
}

}  // namespace

void EconomicConfig::validate() const {
    if (!(alpha >= 0.0 && beta >= 0.0 && y_limit >= 0.0)) throw ConfigError("economic weights must be non-negative");
}

void TrackingConfig::validate() const {
    for (double q : Q)
        if (!(q >= 0.0)) throw ConfigError("tracking output weights must be non-negative");
    for (double r : R)
        if (!(r >= 0.0)) throw ConfigError("tracking input weights must be non-negative");
}

bool OutputBox::contains(const PlantOutput& y) const {
    return y.F_CO2_out >= F_CO2_lo && y.F_CO2_out <= F_CO2_hi && y.T_reb >= T_reb_lo && y.T_reb <= T_reb_hi;
}

double economic_cost(const PlantOutput& y, const ControlInput& u, const EconomicConfig& ec) {
    return ec.alpha * std::max(y.F_CO2_out - ec.y_limit, 0.0) + ec.beta * u.F_fuel;
}

double tracking_cost(const PlantOutput& y, const ControlInput& u, const TrackingConfig& tc) {
    const double e0 = tc.y_s.F_CO2_out - y.F_CO2_out;
    const double e1 = tc.y_s.T_reb - y.T_reb;
    double c = tc.Q[0] * e0 * e0 + tc.Q[1] * e1 * e1;
    for (int i = 0; i < kNu; ++i) {
        const double d = tc.u_s[i] - u[i];
        c += tc.R[static_cast<std::size_t>(i)] * d * d;
    }
    return c;
}

double constraint_distance(const PlantOutput& y, const OutputBox& box) {
    const double d0 = y.F_CO2_out - std::clamp(y.F_CO2_out, box.F_CO2_lo, box.F_CO2_hi);
    const double d1 = y.T_reb - std::clamp(y.T_reb, box.T_reb_lo, box.T_reb_hi);
    return std::hypot(d0, d1);
}

// ---------------------------------------------------------------------------

PlantOutput PredictionModel::output(const StateVector& x, const Disturbance& p) const {
    return outputs(x, p, EngineParams{});
}

HybridPredictor::HybridPredictor(HybridModel m) : m_(std::move(m)) { m_.validate(); }

StateVector HybridPredictor::step(const StateVector& x, const ControlInput& u, const Disturbance& p) const {
    StateVector next = hybrid_step(m_, x, u, p);
    clip_state(next);
    return next;
}

PhysicsPredictor::PhysicsPredictor(PlantParameters params, IntegratorConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
    cfg_.validate();
}

StateVector PhysicsPredictor::step(const StateVector& x, const ControlInput& u, const Disturbance& p) const {
    const AlgebraicVector z = consistent_initialize(x, u, p, params_, cfg_);
    return dae_step(x, z, u, p, params_, cfg_).x;
}

HorizonResult objective_over_horizon(const PredictionModel& model, const StateVector& x,
                                     const std::vector<ControlInput>& u_seq, const Disturbance& p,
                                     const StageCost& cost, const OutputBox& box) {
    if (u_seq.empty()) throw InputDomainError("control sequence is empty");
    HorizonResult r;
    StateVector xj = x;
    try {
        for (const auto& u : u_seq) {
            xj = model.step(xj, u, p);
            if (!xj.allFinite()) throw StepFailure("non-finite prediction");
            const PlantOutput y = model.output(xj, p);
            const double l = cost(y, u);
            const double d = constraint_distance(y, box);
            r.y.push_back(y);
            r.stage.push_back(l);
            r.J += l;
            r.d_max = std::max(r.d_max, d);
            if (!box.contains(y)) r.feasible = false;
        }
    } catch (const Error&) {
        r.J = kInf;
        r.d_max = kInf;
        r.feasible = false;
    }
    return r;
}

// ---------------------------------------------------------------------------

SamplingDistribution SamplingDistribution::initial(int horizon, const ControlInput& mu0, double nu0) {
    if (horizon < 1) throw InputDomainError("horizon must be at least 1");
    SamplingDistribution d;
    d.mu.resize(horizon, kNu);
    for (int j = 0; j < horizon; ++j)
        for (int i = 0; i < kNu; ++i) d.mu(j, i) = mu0[i];
    d.nu = Eigen::MatrixXd::Constant(horizon, kNu, nu0);
    return d;
}

SamplingDistribution SamplingDistribution::shifted(const ControlInput& tail, double nu0) const {
    SamplingDistribution d;
    const int n = horizon();
    d.mu.resize(n, kNu);
    if (n > 1) d.mu.topRows(n - 1) = mu.bottomRows(n - 1);
    for (int i = 0; i < kNu; ++i) d.mu(n - 1, i) = tail[i];
    d.nu = Eigen::MatrixXd::Constant(n, kNu, nu0);
    return d;
}

void CeConfig::validate() const {
    if (iterations < 1) throw ConfigError("CE needs at least one iteration");
    if (samples < 1) throw ConfigError("CE needs at least one sample");
    if (elites < 1 || elites > samples) throw ConfigError("CE elite count must lie in [1, samples]");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("CE lambda must lie in [0, 1]");
    if (!(nu_min > 0.0)) throw ConfigError("CE nu_min must be positive");
    if (horizon < 1) throw ConfigError("CE horizon must be at least 1");
    if (!(nu0 > 0.0)) throw ConfigError("CE initial variance must be positive");
}

SamplingDistribution fit_elite(const std::vector<Eigen::MatrixXd>& elites) {
    if (elites.empty()) throw InputDomainError("elite set is empty");
    SamplingDistribution d;
    d.mu = Eigen::MatrixXd::Zero(elites.front().rows(), elites.front().cols());
    for (const auto& e : elites) d.mu += e;
    d.mu /= static_cast<double>(elites.size());
    d.nu = Eigen::MatrixXd::Zero(d.mu.rows(), d.mu.cols());
    for (const auto& e : elites) d.nu.array() += (e - d.mu).array().square();
    d.nu /= static_cast<double>(elites.size());
    return d;
}

SamplingDistribution blend(const SamplingDistribution& previous, const SamplingDistribution& elite, double lambda,
                           double nu_min) {
    SamplingDistribution d;
    d.mu = (1.0 - lambda) * elite.mu + lambda * previous.mu;
    d.nu = (1.0 - lambda) * elite.nu + lambda * previous.nu;
    d.nu = d.nu.cwiseMax(nu_min);
    return d;
}

CeResult ce_solve(const SequenceEvaluator& evaluate, const CeConfig& cfg, const SamplingDistribution& start,
                  std::uint64_t seed) {
    cfg.validate();
    if (start.horizon() != cfg.horizon || start.mu.cols() != kNu || start.nu.rows() != start.mu.rows() ||
        start.nu.cols() != kNu)
        throw ShapeError("sampling distribution does not match the CE horizon");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01(0.0, 1.0);
    SamplingDistribution dist = start;
    dist.nu = dist.nu.cwiseMax(cfg.nu_min);
    CeResult res;
    const auto S = static_cast<std::size_t>(cfg.samples);
    std::vector<Eigen::MatrixXd> samples(S);
    std::vector<HorizonResult> results(S);
    std::vector<std::size_t> order(S);

    for (int it = 0; it < cfg.iterations; ++it) {
        for (auto& s : samples) {
            s.resize(cfg.horizon, kNu);
            for (int j = 0; j < cfg.horizon; ++j)
                for (int i = 0; i < kNu; ++i) {
                    const double v = dist.mu(j, i) + std::sqrt(dist.nu(j, i)) * n01(rng);
                    s(j, i) = std::clamp(v, cfg.input_box.lower[i], cfg.input_box.upper[i]);
                }
        }
        parallel_for(cfg.samples, cfg.workers,
                     [&](int s) { results[static_cast<std::size_t>(s)] = evaluate(to_sequence(samples[s])); });

        std::iota(order.begin(), order.end(), std::size_t{0});
        int feasible = 0;
        for (const auto& r : results) feasible += r.feasible ? 1 : 0;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const auto& ra = results[a];
            const auto& rb = results[b];
            if (ra.feasible != rb.feasible) return ra.feasible;
            if (ra.feasible) return ra.J < rb.J;
            return ra.d_max < rb.d_max;
        });

        std::vector<Eigen::MatrixXd> elite;
        for (int e = 0; e < cfg.elites; ++e) elite.push_back(samples[order[static_cast<std::size_t>(e)]]);
        dist = blend(dist, fit_elite(elite), cfg.lambda, cfg.nu_min);

        const auto& best = results[order[0]];
        res.history.push_back({feasible, best.J, best.d_max, dist.nu.maxCoeff()});
        res.best = best;
        res.sequence = to_sequence(samples[order[0]]);
        if (dist.nu.maxCoeff() <= cfg.nu_min) break;
    }
    res.u = cfg.input_box.clip(res.sequence.front());
    res.distribution = dist;
    return res;
}

CeResult ce_solve(const PredictionModel& model, const StateVector& x, const Disturbance& p, const StageCost& cost,
                  const CeConfig& cfg, const SamplingDistribution& start, std::uint64_t seed) {
    return ce_solve(
        [&](const std::vector<ControlInput>& seq) {
            return objective_over_horizon(model, x, seq, p, cost, cfg.output_box);
        },
        cfg, start, seed);
}

// ---------------------------------------------------------------------------

Setpoint compute_setpoint(const PredictionModel& model, const StateVector& x0, const Disturbance& p,
                          const EconomicConfig& ec, const InputBox& inputs, const OutputBox& outputs,
                          const SetpointConfig& cfg) {
    if (cfg.levels < 2) throw ConfigError("setpoint grid needs at least two levels per input");
    if (cfg.settle_samples < 1) throw ConfigError("setpoint settling needs at least one sample");

    struct Candidate {
        ControlInput u;
        bool ok = false;
        Setpoint sp;
    };
    auto evaluate = [&](Candidate& c) {
        StateVector x = x0;
        try {
            for (int k = 0; k < cfg.settle_samples; ++k) x = model.step(x, c.u, p);
            const StateVector next = model.step(x, c.u, p);
            c.sp.residual = (next - x).lpNorm<Eigen::Infinity>();
        } catch (const Error&) {
            return;
        }
        c.sp.x_s = x;
        c.sp.u_s = c.u;
        c.sp.y_s = model.output(x, p);
        c.sp.cost = economic_cost(c.sp.y_s, c.u, ec);
        c.ok = c.sp.residual <= cfg.steady_tol && outputs.contains(c.sp.y_s) && std::isfinite(c.sp.cost);
    };

    std::array<double, kNu> lo{}, hi{};
    for (int i = 0; i < kNu; ++i) {
        lo[static_cast<std::size_t>(i)] = inputs.lower[i];
        hi[static_cast<std::size_t>(i)] = inputs.upper[i];
    }
    const Setpoint* incumbent = nullptr;
    Setpoint best;
    for (int round = 0; round <= cfg.refinements; ++round) {
        std::vector<Candidate> grid;
        const int L = cfg.levels;
        for (int a = 0; a < L; ++a)
            for (int b = 0; b < L; ++b)
                for (int c = 0; c < L; ++c) {
                    Candidate cand;
                    const int idx[3] = {a, b, c};
                    for (int i = 0; i < kNu; ++i) {
                        const auto s = static_cast<std::size_t>(i);
                        cand.u[i] = lo[s] + (hi[s] - lo[s]) * idx[i] / (L - 1);
                    }
                    cand.u = inputs.clip(cand.u);
                    grid.push_back(cand);
                }
        parallel_for(static_cast<int>(grid.size()), cfg.workers, [&](int i) { evaluate(grid[static_cast<std::size_t>(i)]); });
        for (const auto& c : grid)
            if (c.ok && (!incumbent || c.sp.cost < best.cost)) {
                best = c.sp;
                incumbent = &best;
            }
        if (!incumbent) break;
        for (int i = 0; i < kNu; ++i) {
            const auto s = static_cast<std::size_t>(i);
            const double half = 0.5 * (hi[s] - lo[s]) / (L - 1);
            lo[s] = std::max(inputs.lower[i], best.u_s[i] - half * (L - 1) / 2.0);
            hi[s] = std::min(inputs.upper[i], best.u_s[i] + half * (L - 1) / 2.0);
        }
    }
    if (!incumbent) throw SetpointFailure("no settled grid point satisfies the output constraints");
    return best;
}

std::string to_string(ControllerKind k) { return k == ControllerKind::empc ? "EMPC" : "MPC"; }

double ClosedLoopTrace::average_cost() const {
    if (cost_rate.empty()) return 0.0;
    return std::accumulate(cost_rate.begin(), cost_rate.end(), 0.0) / static_cast<double>(cost_rate.size());
}

double ClosedLoopTrace::average_capture() const {
    if (capture.empty()) return 0.0;
    return std::accumulate(capture.begin(), capture.end(), 0.0) / static_cast<double>(capture.size());
}

double ClosedLoopTrace::predicted_feasible_fraction() const {
    if (predicted_feasible.empty()) return 0.0;
    const auto n = std::count(predicted_feasible.begin(), predicted_feasible.end(), true);
    return static_cast<double>(n) / static_cast<double>(predicted_feasible.size());
}

double ClosedLoopTrace::plant_violation_fraction(const OutputBox& box) const {
    if (y.empty()) return 0.0;
    const auto n = std::count_if(y.begin(), y.end(), [&](const PlantOutput& v) { return !box.contains(v); });
    return static_cast<double>(n) / static_cast<double>(y.size());
}

ClosedLoopTrace closed_loop_run(const PlantParameters& truth, const PredictionModel& model, ControllerKind kind,
                                const TrackingConfig* tracking, const StateVector& x0, const AlgebraicVector& z0,
                                const std::vector<Disturbance>& profile, const ClosedLoopConfig& cfg) {
    cfg.ce.validate();
    cfg.economic.validate();
    if (cfg.control_interval < 1 || cfg.control_steps < 1) throw ConfigError("control interval and steps must be positive");
    const long total = static_cast<long>(cfg.control_interval) * cfg.control_steps;
    if (static_cast<long>(profile.size()) < total) throw ShapeError("load profile shorter than the closed-loop run");
    if (kind == ControllerKind::mpc && !tracking) throw ConfigError("tracking MPC needs a set-point");
    if (tracking) tracking->validate();

    StageCost cost;
    if (kind == ControllerKind::empc)
        cost = [ec = cfg.economic](const PlantOutput& y, const ControlInput& u) { return economic_cost(y, u, ec); };
    else
        cost = [tc = *tracking](const PlantOutput& y, const ControlInput& u) { return tracking_cost(y, u, tc); };

    ClosedLoopTrace t;
    t.controller = to_string(kind);
    t.model = model.name();
    StateVector x = x0;
    AlgebraicVector z = z0;
    SamplingDistribution start = SamplingDistribution::initial(cfg.ce.horizon, cfg.ce.mu0, cfg.ce.nu0);
    const ControlInput tail = cfg.ce.input_box.midpoint();
    for (int c = 0; c < cfg.control_steps; ++c) {
        const long k0 = static_cast<long>(c) * cfg.control_interval;
        const Disturbance p_meas = profile[static_cast<std::size_t>(k0)];
        const auto t0 = std::chrono::steady_clock::now();
        const CeResult sol = ce_solve(model, x, p_meas, cost, cfg.ce, start, call_seed(cfg.seed, static_cast<std::uint64_t>(c)));
        t.solve_seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        t.predicted_J.push_back(sol.best.J);
        const ControlInput u = cfg.ce.input_box.clip(sol.u);

        SamplingDistribution prev;
        prev.mu.resize(cfg.ce.horizon, kNu);
        for (int j = 0; j < cfg.ce.horizon; ++j)
            for (int i = 0; i < kNu; ++i) prev.mu(j, i) = sol.sequence[static_cast<std::size_t>(j)][i];
        prev.nu = Eigen::MatrixXd::Constant(cfg.ce.horizon, kNu, cfg.ce.nu0);
        start = prev.shifted(tail, cfg.ce.nu0);

        for (int s = 0; s < cfg.control_interval; ++s) {
            const long k = k0 + s;
            const Disturbance p = profile[static_cast<std::size_t>(k)];
            try {
                const StepResult r = dae_step(x, z, u, p, truth, cfg.integrator);
                if (!state_in_range(r.x)) throw StepFailure("plant state left its physical range");
                x = r.x;
                z = r.z;
            } catch (const StepFailure& e) {
                throw StepFailure(std::string("closed loop ") + t.controller + "/" + t.model + ": " + e.what(), k);
            }
            const PlantOutput y = outputs(x, p, truth.engine);
            t.u.push_back(u);
            t.p.push_back(p);
            t.y.push_back(y);
            t.cost_rate.push_back(economic_cost(y, u, cfg.economic));
            t.capture.push_back(capture_rate(y, p, truth.engine));
            t.predicted_feasible.push_back(sol.best.feasible);
        }
    }
    return t;
}

std::string closed_loop_csv(const ClosedLoopTrace& t, double sample_period) {
    std::ostringstream os;
    os << "k,t_end,phi_E,F_L,F_fuel,F_sw,F_CO2_out,T_reb,cost_rate,capture_rate,predicted_feasible\n";
    for (long k = 0; k < t.samples(); ++k) {
        const auto i = static_cast<std::size_t>(k);
        os << k << ',' << format_double(static_cast<double>(k + 1) * sample_period) << ','
           << format_double(t.p[i].phi_E) << ',' << format_double(t.u[i].F_L) << ','
           << format_double(t.u[i].F_fuel) << ',' << format_double(t.u[i].F_sw) << ','
           << format_double(t.y[i].F_CO2_out) << ',' << format_double(t.y[i].T_reb) << ','
           << format_double(t.cost_rate[i]) << ',' << format_double(t.capture[i]) << ','
           << (t.predicted_feasible[i] ? 1 : 0) << '\n';
    }
    return os.str();
}

}  // namespace shipcc
