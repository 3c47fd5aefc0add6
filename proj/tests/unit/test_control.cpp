#include <cmath>
#include <mutex>

#include "doctest.h"
#include "support/gen.hpp"

#include "shipcc/control.hpp"
#include "shipcc/errors.hpp"

using namespace shipcc;

namespace {

constexpr int kCO2Top = layout::gas_conc(layout::kAbsorber, kCO2, 0);

// First-order lag toward an input-dependent target: more fuel heats the reboiler,
// more solvent lowers the released CO2.
class LagModel final : public PredictionModel {
public:
    StateVector step(const StateVector& x, const ControlInput& u, const Disturbance&) const override {
        StateVector n = x;
        const double T_target = 389.0 + 100.0 * (u.F_fuel - 0.2635);
        const double c_target = 4e-4 * (1.0 - 20.0 * (u.F_L - 0.02)) + 1e-4 * (u.F_sw - 0.02) / 0.02;
        n[layout::kReboilerTemp] += 0.5 * (T_target - x[layout::kReboilerTemp]);
        n[kCO2Top] += 0.5 * (c_target - x[kCO2Top]);
        return n;
    }
    std::string name() const override { return "lag"; }
};

StateVector lag_start() {
    StateVector x = StateVector::Constant(1.0);
    x[layout::kReboilerTemp] = 389.0;
    x[kCO2Top] = 3e-4;
    return x;
}

}  // namespace

TEST_CASE("stage costs") {
    const EconomicConfig ec;
    PlantOutput y;
    ControlInput u;
    u.F_fuel = 0.25;
    y.F_CO2_out = 0.4;
    CHECK(economic_cost(y, u, ec) == doctest::Approx(0.3213).epsilon(1e-12));
    y.F_CO2_out = 0.6;
    CHECK(economic_cost(y, u, ec) == doctest::Approx(0.3263).epsilon(1e-12));

    TrackingConfig tc;
    tc.y_s = {0.8, 390.0};
    tc.u_s = {0.03, 0.26, 0.03};
    CHECK(tracking_cost(tc.y_s, tc.u_s, tc) == 0.0);
    CHECK(tracking_cost({0.8, 391.0}, tc.u_s, tc) == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(tracking_cost({1.8, 390.0}, tc.u_s, tc) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(tracking_cost(tc.y_s, {1.03, 1.26, 1.03}, tc) == doctest::Approx(0.24).epsilon(1e-12));

    const OutputBox box;
    CHECK(constraint_distance({1.0, 390.0}, box) == 0.0);
    CHECK(constraint_distance({1.0, 395.15}, box) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(constraint_distance({1.0, 380.15}, box) == doctest::Approx(5.0).epsilon(1e-12));

    gen::Rng r(1);
    for (int t = 0; t < 100; ++t) {
        const PlantOutput yy{r.uniform(0, 3), r.uniform(370, 400)};
        CHECK(economic_cost(yy, gen::input(r), ec) >= 0.0);
        CHECK(tracking_cost(yy, gen::input(r), tc) >= 0.0);
    }
}

TEST_CASE("horizon objective") {
    const LagModel m;
    const StateVector x = lag_start();
    const EconomicConfig ec;
    const StageCost cost = [&](const PlantOutput& y, const ControlInput& u) { return economic_cost(y, u, ec); };
    const Disturbance p{0.55};
    const OutputBox box;

    const std::vector<ControlInput> one{{0.03, 0.26, 0.03}};
    const HorizonResult r1 = objective_over_horizon(m, x, one, p, cost, box);
    CHECK(r1.J == cost(m.output(m.step(x, one[0], p), p), one[0]));

    std::vector<ControlInput> a(5, ControlInput{0.04, 0.25, 0.03});
    std::vector<ControlInput> b = a;
    b[4].F_fuel = 0.27;
    const HorizonResult ra = objective_over_horizon(m, x, a, p, cost, box);
    const HorizonResult rb = objective_over_horizon(m, x, b, p, cost, box);
    for (const auto& y : ra.y) REQUIRE(y.F_CO2_out < ec.y_limit);
    CHECK(rb.J - ra.J == doctest::Approx(ec.beta * 0.02).epsilon(1e-9));
    double sum = 0.0;
    for (double s : ra.stage) sum += s;
    CHECK(ra.J == sum);

    // High fuel drives T_reb above the box.
    std::vector<ControlInput> hot(5, ControlInput{0.03, 0.333, 0.03});
    const HorizonResult rh = objective_over_horizon(m, x, hot, p, cost, box);
    CHECK_FALSE(rh.feasible);
    double dmax = 0.0;
    for (const auto& y : rh.y) dmax = std::max(dmax, constraint_distance(y, box));
    CHECK(rh.d_max == dmax);
    for (const auto& y : ra.y) CHECK(box.contains(y) == ra.feasible);
}

TEST_CASE("blend identities") {
    gen::Rng r(2);
    SamplingDistribution prev, elite;
    prev.mu = Eigen::MatrixXd::Random(4, 3);
    prev.nu = Eigen::MatrixXd::Random(4, 3).cwiseAbs();
    elite.mu = Eigen::MatrixXd::Random(4, 3);
    elite.nu = Eigen::MatrixXd::Random(4, 3).cwiseAbs();
    const SamplingDistribution zero = blend(prev, elite, 0.0, 0.0);
    CHECK(zero.mu == elite.mu);
    CHECK(zero.nu == elite.nu);
    const SamplingDistribution one = blend(prev, elite, 1.0, 0.0);
    CHECK(one.mu == prev.mu);
    CHECK(one.nu == prev.nu);
    const SamplingDistribution floored = blend(prev, elite, 0.0, 10.0);
    CHECK(floored.nu.minCoeff() == 10.0);

    std::vector<Eigen::MatrixXd> samples;
    for (int i = 0; i < 5; ++i) samples.push_back(Eigen::MatrixXd::Constant(2, 3, i));
    const SamplingDistribution fit = fit_elite(samples);
    CHECK(fit.mu.cwiseAbs().maxCoeff() == 2.0);
    CHECK(fit.nu(0, 0) == doctest::Approx(2.0));  // population variance of 0..4
}

TEST_CASE("cross-entropy on a convex quadratic") {
    CeConfig cfg;
    cfg.horizon = 3;
    const ControlInput target{0.027, 0.301, 0.036};
    const SequenceEvaluator quad = [&](const std::vector<ControlInput>& seq) {
        HorizonResult r;
        for (const auto& u : seq)
            for (int i = 0; i < kNu; ++i) r.J += (u[i] - target[i]) * (u[i] - target[i]);
        return r;
    };
    const CeResult res = ce_solve(quad, cfg, SamplingDistribution::initial(cfg.horizon, cfg.mu0), 99);
    CHECK(static_cast<int>(res.history.size()) <= 20);
    for (int i = 0; i < kNu; ++i) CHECK(std::abs(res.u[i] - target[i]) < 1e-3);
    CHECK(cfg.input_box.contains(res.u));

    SUBCASE("deterministic and independent of worker count") {
        CeConfig par = cfg;
        par.workers = 3;
        const CeResult again = ce_solve(quad, par, SamplingDistribution::initial(cfg.horizon, cfg.mu0), 99);
        CHECK(again.u == res.u);
        CHECK(again.best.J == res.best.J);
    }
}

TEST_CASE("cross-entropy with no feasible sample") {
    CeConfig cfg;
    cfg.iterations = 3;
    cfg.samples = 50;
    cfg.elites = 5;
    cfg.horizon = 2;
    std::vector<std::pair<std::vector<ControlInput>, double>> seen;
    const SequenceEvaluator impossible = [&](const std::vector<ControlInput>& seq) {
        HorizonResult r;
        r.feasible = false;
        r.J = 1.0 - seq[0].F_L;
        r.d_max = std::abs(seq[0].F_fuel - 0.3) + 1.0;
        seen.emplace_back(seq, r.d_max);
        return r;
    };
    const CeResult res = ce_solve(impossible, cfg, SamplingDistribution::initial(cfg.horizon, cfg.mu0), 5);
    REQUIRE(seen.size() == static_cast<std::size_t>(cfg.samples * static_cast<int>(res.history.size())));
    const auto last = seen.end() - cfg.samples;
    const auto best = std::min_element(last, seen.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
    CHECK(res.u == best->first.front());
    for (const auto& h : res.history) CHECK(h.feasible == 0);
}

TEST_CASE("cross-entropy with the lag model") {
    const LagModel m;
    const EconomicConfig ec;
    CeConfig cfg;
    cfg.iterations = 8;
    cfg.samples = 100;
    cfg.elites = 10;
    const StageCost cost = [&](const PlantOutput& y, const ControlInput& u) { return economic_cost(y, u, ec); };
    const CeResult res = ce_solve(m, lag_start(), {0.55}, cost, cfg, SamplingDistribution::initial(5, cfg.mu0), 3);
    CHECK(cfg.input_box.contains(res.u));
    CHECK(res.best.feasible);
    for (const auto& y : res.best.y) CHECK(cfg.output_box.contains(y));
    // Fuel is the only cost that depends on the move; the first move uses the least.
    CHECK(res.u.F_fuel < 0.2635);
}

TEST_CASE("setpoint search") {
    const LagModel m;
    const EconomicConfig ec;
    SetpointConfig sc;
    sc.settle_samples = 60;
    sc.steady_tol = 1e-6;
    const Setpoint a = compute_setpoint(m, lag_start(), {0.55}, ec, InputBox{}, OutputBox{}, sc);
    CHECK(InputBox{}.contains(a.u_s));
    CHECK(OutputBox{}.contains(a.y_s));
    sc.levels = 5;
    sc.refinements = 3;
    const Setpoint b = compute_setpoint(m, lag_start(), {0.55}, ec, InputBox{}, OutputBox{}, sc);
    CHECK(b.cost <= a.cost);
    CHECK(std::abs(b.cost - a.cost) / a.cost < 0.05);
    sc.levels = 9;
    const Setpoint c = compute_setpoint(m, lag_start(), {0.55}, ec, InputBox{}, OutputBox{}, sc);
    CHECK(std::abs(c.cost - b.cost) / b.cost < 0.01);

    OutputBox impossible;
    impossible.T_reb_lo = 460.0;
    impossible.T_reb_hi = 461.0;
    CHECK_THROWS_AS(compute_setpoint(m, lag_start(), {0.55}, ec, InputBox{}, impossible, sc), SetpointFailure);
}

TEST_CASE("closed loop on the plant") {
    const PlantParameters truth = PlantParameters::truth();
    const SteadyState s = nominal_steady_state(truth);
    const PhysicsPredictor model(PlantParameters::imperfect());
    ClosedLoopConfig cfg;
    cfg.control_interval = 3;
    cfg.control_steps = 2;
    cfg.ce.iterations = 2;
    cfg.ce.samples = 8;
    cfg.ce.elites = 3;
    cfg.ce.horizon = 2;
    cfg.seed = 4;
    const auto profile = make_disturbance_profile(1, 6, 11, 400);
    const ClosedLoopTrace a = closed_loop_run(truth, model, ControllerKind::empc, nullptr, s.x, s.z, profile, cfg);
    const ClosedLoopTrace b = closed_loop_run(truth, model, ControllerKind::empc, nullptr, s.x, s.z, profile, cfg);
    CHECK(a.samples() == 6);
    CHECK(a.solve_seconds.size() == 2);
    for (const auto& u : a.u) CHECK(cfg.ce.input_box.contains(u));
    for (int k = 1; k < 3; ++k) CHECK(a.u[static_cast<std::size_t>(k)] == a.u[0]);
    CHECK(closed_loop_csv(a, 40.0) == closed_loop_csv(b, 40.0));
    CHECK(a.average_cost() > 0.0);

    CHECK_THROWS_AS(closed_loop_run(truth, model, ControllerKind::mpc, nullptr, s.x, s.z, profile, cfg), Error);
}
