#pragma once

#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "shipcc/plant.hpp"

namespace shipcc {

struct IntegratorConfig {
    double sample_period = 40.0;  // s
    int substeps = 10;
    double newton_tol = 1e-8;
    int newton_max_iters = 40;

    void validate() const;
};

struct StepResult {
    StateVector x;
    AlgebraicVector z;
};

/// Solves g(x, z, u, p) = 0 for z by damped Newton, starting from `warm_start`
/// (or from algebraic_guess when none is given).
AlgebraicVector consistent_initialize(const StateVector& x, const ControlInput& u, const Disturbance& p,
                                      const PlantParameters& params, const IntegratorConfig& cfg = {});
AlgebraicVector consistent_initialize(const StateVector& x, const AlgebraicVector& warm_start,
                                      const ControlInput& u, const Disturbance& p,
                                      const PlantParameters& params, const IntegratorConfig& cfg = {});

/// Advances one sample period with `cfg.substeps` implicit-Euler stages. Each stage
/// solves the coupled (x, z) system by Newton with a finite-difference Jacobian that
/// is built at entry and refreshed only when convergence stalls. Pure: the result
/// depends on the arguments only.
StepResult dae_step(const StateVector& x, const AlgebraicVector& z, const ControlInput& u,
                    const Disturbance& p, const PlantParameters& params, const IntegratorConfig& cfg = {});

/// Fixed-step implicit Euler for a generic semi-explicit DAE, used by tests with
/// small analytic systems. `rhs(x, z, xdot, g)` fills both residual blocks.
struct GenericDae {
    int nx = 0;
    int nz = 0;
    std::function<void(const Eigen::VectorXd&, const Eigen::VectorXd&, Eigen::VectorXd&, Eigen::VectorXd&)> rhs;
};

void generic_dae_step(const GenericDae& dae, Eigen::VectorXd& x, Eigen::VectorXd& z, double period,
                      int substeps, double tol = 1e-10, int max_iters = 50);

struct Trajectory {
    Eigen::MatrixXd X;  // (N+1) × 103, row k is x_k
    Eigen::MatrixXd Z;  // (N+1) × 7
    Eigen::MatrixXd U;  // N × 3, u_k applied over [k, k+1)
    Eigen::VectorXd P;  // N
    Eigen::MatrixXd Y;  // (N+1) × 2
    double sample_period = 40.0;

    long steps() const { return static_cast<long>(U.rows()); }
};

/// Consistent initialization once, then one dae_step per sample. A failure is
/// reported as StepFailure carrying the sample index.
Trajectory simulate_open_loop(const StateVector& x0, const std::vector<ControlInput>& u_seq,
                              const std::vector<Disturbance>& p_seq, const PlantParameters& params,
                              const IntegratorConfig& cfg = {});

struct SteadyState {
    StateVector x;
    AlgebraicVector z;
    ControlInput u;
    Disturbance p;
    double max_rate = 0.0;  // ‖xdot‖∞ at the returned point
};

/// Nominal operating point: box-midpoint inputs, load 0.55, simulated for `samples`
/// periods from the uniform initial charge. With a non-empty `cache_dir` the result
/// is stored there and reused on later calls with identical parameters.
SteadyState nominal_steady_state(const PlantParameters& params, const IntegratorConfig& cfg = {},
                                 const std::filesystem::path& cache_dir = {}, int samples = 5000);

/// Steady state for arbitrary constant (u, p), starting from `x0`.
SteadyState settle(const StateVector& x0, const ControlInput& u, const Disturbance& p,
                   const PlantParameters& params, const IntegratorConfig& cfg, int samples);

}  // namespace shipcc
