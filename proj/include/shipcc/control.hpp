#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "shipcc/hybrid.hpp"
#include "shipcc/integrator.hpp"

namespace shipcc {

struct EconomicConfig {
    double alpha = 0.05;     // $/kg carbon tax
    double beta = 1.2852;    // $/kg fuel
    double y_limit = 0.5;    // kg/s released CO2 before tax applies

    void validate() const;
};

struct TrackingConfig {
    PlantOutput y_s;
    ControlInput u_s;
    std::array<double, kNy> Q{3.0, 10.0};
    std::array<double, kNu> R{0.08, 0.08, 0.08};

    void validate() const;
};

/// Output constraint box; F_CO2_out is unconstrained by default.
struct OutputBox {
    double F_CO2_lo = -std::numeric_limits<double>::infinity();
    double F_CO2_hi = std::numeric_limits<double>::infinity();
    double T_reb_lo = 385.15;
    double T_reb_hi = 393.15;

    bool contains(const PlantOutput& y) const;
};

double economic_cost(const PlantOutput& y, const ControlInput& u, const EconomicConfig& ec);
double tracking_cost(const PlantOutput& y, const ControlInput& u, const TrackingConfig& tc);
double constraint_distance(const PlantOutput& y, const OutputBox& box);

using StageCost = std::function<double(const PlantOutput&, const ControlInput&)>;

/// One-step predictor used inside the controller. Implementations are immutable and
/// safe to call from several threads.
class PredictionModel {
public:
    virtual ~PredictionModel() = default;
    virtual StateVector step(const StateVector& x, const ControlInput& u, const Disturbance& p) const = 0;
    virtual PlantOutput output(const StateVector& x, const Disturbance& p) const;
    virtual std::string name() const = 0;
};

class HybridPredictor final : public PredictionModel {
public:
    explicit HybridPredictor(HybridModel m);
    StateVector step(const StateVector& x, const ControlInput& u, const Disturbance& p) const override;
    std::string name() const override { return "hybrid"; }
    const HybridModel& model() const { return m_; }

private:
    HybridModel m_;
};

/// First-principles predictor: consistent initialization at x, then one dae_step.
class PhysicsPredictor final : public PredictionModel {
public:
    PhysicsPredictor(PlantParameters params, IntegratorConfig cfg = {});
    StateVector step(const StateVector& x, const ControlInput& u, const Disturbance& p) const override;
    std::string name() const override { return params_.variant; }

private:
    PlantParameters params_;
    IntegratorConfig cfg_;
};

struct HorizonResult {
    double J = 0.0;
    bool feasible = true;
    double d_max = 0.0;
    std::vector<PlantOutput> y;     // ŷ_1..ŷ_Nc
    std::vector<double> stage;      // ℓ(ŷ_{j+1}, u_j)
};

/// Rolls the model over the sequence with the load held at `p`. Stage j pairs u_j
/// with the output at the end of its hold interval. A failed rollout is reported as
/// infeasible with infinite J and d_max.
HorizonResult objective_over_horizon(const PredictionModel& model, const StateVector& x,
                                     const std::vector<ControlInput>& u_seq, const Disturbance& p,
                                     const StageCost& cost, const OutputBox& box);

/// Per-step Gaussian parameters; rows are horizon steps, columns inputs. Only the
/// diagonal variances are kept.
struct SamplingDistribution {
    Eigen::MatrixXd mu;
    Eigen::MatrixXd nu;

    static SamplingDistribution initial(int horizon, const ControlInput& mu0, double nu0 = 1.0);
    /// Previous mean shifted one step ahead, tail filled with `tail`; variances reset to nu0.
    SamplingDistribution shifted(const ControlInput& tail, double nu0 = 1.0) const;
    int horizon() const { return static_cast<int>(mu.rows()); }
};

struct CeConfig {
    int iterations = 20;
    int samples = 400;
    int elites = 20;
    double lambda = 0.01;
    double nu_min = 1e-8;
    int horizon = 5;
    double nu0 = 1.0;
    ControlInput mu0;
    InputBox input_box;
    OutputBox output_box;
    int workers = 1;

    void validate() const;
};

/// Elite moments: per-coordinate mean and population variance.
SamplingDistribution fit_elite(const std::vector<Eigen::MatrixXd>& elites);
/// Moving-average update μ ← (1−λ)μ_elite + λμ, ν ← (1−λ)ν_elite + λν, variances floored at nu_min.
SamplingDistribution blend(const SamplingDistribution& previous, const SamplingDistribution& elite, double lambda,
                           double nu_min);

using SequenceEvaluator = std::function<HorizonResult(const std::vector<ControlInput>&)>;

struct CeIteration {
    int feasible = 0;
    double best_J = 0.0;
    double best_d = 0.0;
    double max_nu = 0.0;
};

struct CeResult {
    ControlInput u;
    std::vector<ControlInput> sequence;
    HorizonResult best;
    SamplingDistribution distribution;
    std::vector<CeIteration> history;
};

/// Constrained cross-entropy search. Samples for an iteration are drawn up-front from
/// a generator seeded with `seed`; ranking is a stable sort on (J or d_max, index).
/// When fewer than N_K samples are feasible, the elite set is completed with the
/// infeasible samples of smallest constraint distance.
CeResult ce_solve(const SequenceEvaluator& evaluate, const CeConfig& cfg, const SamplingDistribution& start,
                  std::uint64_t seed);

CeResult ce_solve(const PredictionModel& model, const StateVector& x, const Disturbance& p, const StageCost& cost,
                  const CeConfig& cfg, const SamplingDistribution& start, std::uint64_t seed);

struct SetpointConfig {
    int levels = 3;          // grid points per input
    int refinements = 1;     // grid halvings around the incumbent
    int settle_samples = 1500;
    double steady_tol = 5e-3;  // ‖x̂⁺ − x‖∞ after settling
    int workers = 1;
};

struct Setpoint {
    PlantOutput y_s;
    ControlInput u_s;
    StateVector x_s;
    double cost = 0.0;
    double residual = 0.0;
};

/// Grid search over steady states of the model. Throws SetpointFailure when no grid
/// point both settles and satisfies the output box.
Setpoint compute_setpoint(const PredictionModel& model, const StateVector& x0, const Disturbance& p,
                          const EconomicConfig& ec, const InputBox& inputs, const OutputBox& outputs,
                          const SetpointConfig& cfg = {});

enum class ControllerKind { empc, mpc };
std::string to_string(ControllerKind k);

struct ClosedLoopConfig {
    int control_interval = 10;
    int control_steps = 200;
    CeConfig ce;
    EconomicConfig economic;
    IntegratorConfig integrator;
    std::uint64_t seed = 0;
};

struct ClosedLoopTrace {
    std::string controller;
    std::string model;
    std::vector<ControlInput> u;         // applied over [k, k+1)
    std::vector<Disturbance> p;
    std::vector<PlantOutput> y;          // plant output at k+1
    std::vector<double> cost_rate;       // ℓ(y_{k+1}, u_k)
    std::vector<double> capture;         // capture rate at k+1
    std::vector<bool> predicted_feasible;  // governing CE solution satisfied the box
    std::vector<double> solve_seconds;   // per control call
    std::vector<double> predicted_J;     // per control call

    long samples() const { return static_cast<long>(u.size()); }
    double average_cost() const;
    double average_capture() const;
    double predicted_feasible_fraction() const;
    double plant_violation_fraction(const OutputBox& box) const;
};

/// Runs the truth plant from (x0, z0) under receding-horizon control. Every
/// `control_interval` samples the current truth state is handed to ce_solve.
/// `tracking` is required for ControllerKind::mpc.
ClosedLoopTrace closed_loop_run(const PlantParameters& truth, const PredictionModel& model, ControllerKind kind,
                                const TrackingConfig* tracking, const StateVector& x0, const AlgebraicVector& z0,
                                const std::vector<Disturbance>& profile, const ClosedLoopConfig& cfg);

std::string closed_loop_csv(const ClosedLoopTrace& t, double sample_period);

}  // namespace shipcc
