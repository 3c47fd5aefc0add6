#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "shipcc/datagen.hpp"
#include "shipcc/mlp.hpp"

namespace shipcc {

struct TrainConfig {
    int batch_size = 200;
    int epochs = 300;
    int patience = 50;  // stop after this many epochs without a validation improvement
    AdamConfig adam;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Per-epoch full-set MSE; entry 0 is the untrained network.
struct TrainingCurve {
    std::vector<double> train_mse;
    std::vector<double> val_mse;
    int best_epoch = 0;
    double best_val = 0.0;
};

struct TrainResult {
    Mlp net;
    TrainingCurve curve;
};

/// Minibatch Adam on the element-mean squared error. Returns the parameters with the
/// lowest validation MSE (training MSE when no validation data is given).
/// Throws TrainingDivergence on a non-finite loss.
TrainResult train_regression(Mlp init, const Eigen::MatrixXd& X_train, const Eigen::MatrixXd& Y_train,
                             const Eigen::MatrixXd& X_val, const Eigen::MatrixXd& Y_val, const TrainConfig& cfg);

enum class BlackboxVariant { nn1, nn2 };

std::vector<int> inference_layers();
std::vector<int> compensation_layers();
std::vector<int> blackbox_layers(BlackboxVariant v);
std::string to_string(BlackboxVariant v);

/// Normalized network inputs: [x; u; p] (107 rows) and [x; z; u; p] (114 rows).
Eigen::MatrixXd inference_features(const NormalizationStats& s, const Eigen::MatrixXd& X, const Eigen::MatrixXd& U,
                                   const Eigen::MatrixXd& P);
Eigen::MatrixXd state_features(const NormalizationStats& s, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z,
                               const Eigen::MatrixXd& U, const Eigen::MatrixXd& P);

TrainResult train_inference_net(const Dataset& d, const TrainConfig& cfg);
TrainResult train_compensation_net(const Dataset& d, const TrainConfig& cfg);
TrainResult train_blackbox_net(const Dataset& d, BlackboxVariant v, const TrainConfig& cfg);

/// (1/(N_dim·N_data))·Σ‖r − r̂‖² over matching matrices.
double evaluate_mse(const Eigen::MatrixXd& reference, const Eigen::MatrixXd& predicted);

}  // namespace shipcc
