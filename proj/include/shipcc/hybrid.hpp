#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "shipcc/datagen.hpp"
#include "shipcc/integrator.hpp"
#include "shipcc/mlp.hpp"
#include "shipcc/training.hpp"

namespace shipcc {

/// Imperfect one-step physics plus a learned additive state correction, with the
/// algebraic states supplied by an inference network.
struct HybridModel {
    PlantParameters params = PlantParameters::imperfect();
    Mlp inference;
    Mlp compensation;
    NormalizationStats stats;
    IntegratorConfig integrator;
    bool zero_compensation = false;  // override: correction term forced to zero

    void validate() const;
};

struct BlackboxModel {
    Mlp net;
    NormalizationStats stats;
    BlackboxVariant variant = BlackboxVariant::nn2;
};

/// Clamps algebraic states into their physical ranges: concentrations and vapor
/// flow non-negative, vapor fraction and CO2 mole fraction in [0, 1].
void clip_algebraic(AlgebraicVector& z);
/// Concentrations non-negative, temperatures in [274, 472] K.
void clip_state(StateVector& x);

AlgebraicVector infer_algebraic(const HybridModel& m, const StateVector& x, const ControlInput& u,
                                const Disturbance& p);

/// Inferred-ẑ one-step prediction; the corrected state is not clipped.
StateVector hybrid_step(const HybridModel& m, const StateVector& x, const ControlInput& u, const Disturbance& p);

/// Correction term alone, denormalized.
StateVector compensation_term(const HybridModel& m, const StateVector& x, const AlgebraicVector& z,
                              const ControlInput& u, const Disturbance& p);

/// Predicted trajectory: rows 0..N. Row k of Z is the model's algebraic state at x̂_k
/// (inferred for the hybrid model) and Y holds the plant output map.
struct Rollout {
    Eigen::MatrixXd X;
    Eigen::MatrixXd Z;
    Eigen::MatrixXd Y;
    long steps() const { return X.rows() - 1; }
};

Rollout hybrid_rollout(const HybridModel& m, const StateVector& x0, const std::vector<ControlInput>& u_seq,
                       const std::vector<Disturbance>& p_seq, long N);

std::pair<StateVector, AlgebraicVector> blackbox_step(const BlackboxModel& m, const StateVector& x,
                                                      const AlgebraicVector& z, const ControlInput& u,
                                                      const Disturbance& p);

Rollout blackbox_rollout(const BlackboxModel& m, const StateVector& x0, const AlgebraicVector& z0,
                         const std::vector<ControlInput>& u_seq, const std::vector<Disturbance>& p_seq, long N);

/// Open-loop simulation of a first-principles parameter set.
Rollout physics_rollout(const PlantParameters& params, const StateVector& x0, const std::vector<ControlInput>& u_seq,
                        const std::vector<Disturbance>& p_seq, long N, const IntegratorConfig& cfg = {});

/// Inputs, loads and ground truth of a window [begin, begin + N] of a trajectory.
struct RolloutWindow {
    StateVector x0;
    AlgebraicVector z0;
    std::vector<ControlInput> u;
    std::vector<Disturbance> p;
    Eigen::MatrixXd X;  // (N+1) × 103
    Eigen::MatrixXd Z;  // (N+1) × 7
};

RolloutWindow rollout_window(const Trajectory& t, long begin, long N);

struct RolloutError {
    double x_mse = 0.0;
    double z_mse = 0.0;
    long points = 0;  // predicted steps compared
};

/// MSE of predicted rows 1..N against the window in normalized units.
RolloutError rollout_error(const NormalizationStats& s, const RolloutWindow& w, const Rollout& r);

/// Pools several windows into one MSE weighted by the number of compared steps.
RolloutError pool(const std::vector<RolloutError>& parts);

/// Long-format comparison table: step, variable, truth, then one column per model.
std::string rollout_comparison_csv(const RolloutWindow& w, const std::map<std::string, Rollout>& models);

}  // namespace shipcc
