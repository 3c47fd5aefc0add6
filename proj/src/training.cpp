#include "shipcc/training.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>

#include "shipcc/errors.hpp"

namespace shipcc {

void TrainConfig::validate() const {
    if (batch_size < 1) throw ConfigError("batch size must be positive");
    if (epochs < 0) throw ConfigError("epochs must be non-negative");
    if (patience < 1) throw ConfigError("patience must be positive");
    if (!(adam.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0))
        throw ConfigError("Adam moment constants must lie in [0, 1)");
}

namespace {

double full_mse(const Mlp& net, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) {
    constexpr Eigen::Index kChunk = 4096;
    double sum = 0.0;
    for (Eigen::Index c = 0; c < X.cols(); c += kChunk) {
        const Eigen::Index n = std::min(kChunk, X.cols() - c);
        sum += (net.forward(Eigen::MatrixXd(X.middleCols(c, n))) - Y.middleCols(c, n)).squaredNorm();
    }
    return sum / static_cast<double>(Y.size());
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    std::array<std::uint32_t, 2> out{};
    seq.generate(out.begin(), out.end());
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

}  // namespace

TrainResult train_regression(Mlp init, const Eigen::MatrixXd& X_train, const Eigen::MatrixXd& Y_train,
                             const Eigen::MatrixXd& X_val, const Eigen::MatrixXd& Y_val, const TrainConfig& cfg) {
    cfg.validate();
    const Eigen::Index n = X_train.cols();
    if (n == 0) throw InputDomainError("training set is empty");
    if (X_train.rows() != init.input_dim() || Y_train.rows() != init.output_dim() || Y_train.cols() != n)
        throw ShapeError("training data does not match the network shape");
    const bool has_val = X_val.cols() > 0;
    if (has_val && (X_val.rows() != init.input_dim() || Y_val.rows() != init.output_dim() ||
                    Y_val.cols() != X_val.cols()))
        throw ShapeError("validation data does not match the network shape");

    TrainResult res{init, {}};
    Mlp net = std::move(init);
    Adam adam(net, cfg.adam);
    std::mt19937_64 rng(stream_seed(cfg.seed, 7));
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    const Eigen::Index batch = std::min<Eigen::Index>(cfg.batch_size, n);

    auto record = [&](int epoch) {
        const double tr = full_mse(net, X_train, Y_train);
        const double va = has_val ? full_mse(net, X_val, Y_val) : tr;
        if (!std::isfinite(tr) || !std::isfinite(va))
            throw TrainingDivergence("non-finite loss at epoch " + std::to_string(epoch));
        res.curve.train_mse.push_back(tr);
        res.curve.val_mse.push_back(va);
        if (epoch == 0 || va < res.curve.best_val) {
            res.curve.best_val = va;
            res.curve.best_epoch = epoch;
            res.net = net;
        }
    };
    record(0);

    Eigen::MatrixXd xb(X_train.rows(), batch), yb(Y_train.rows(), batch);
    Gradients grad;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (Eigen::Index start = 0; start < n; start += batch) {
            const Eigen::Index m = std::min(batch, n - start);
            if (m != xb.cols()) {
                xb.resize(X_train.rows(), m);
                yb.resize(Y_train.rows(), m);
            }
            for (Eigen::Index j = 0; j < m; ++j) {
                xb.col(j) = X_train.col(order[static_cast<std::size_t>(start + j)]);
                yb.col(j) = Y_train.col(order[static_cast<std::size_t>(start + j)]);
            }
            const double loss = mlp_backprop(net, xb, yb, grad);
            if (!std::isfinite(loss))
                throw TrainingDivergence("non-finite batch loss at epoch " + std::to_string(epoch));
            adam.step(net, grad);
            if (m != batch) {
                xb.resize(X_train.rows(), batch);
                yb.resize(Y_train.rows(), batch);
            }
        }
        record(epoch);
        if (epoch - res.curve.best_epoch >= cfg.patience) break;
    }
    return res;
}

std::vector<int> inference_layers() { return {kNx + kNu + 1, 150, kNz}; }
std::vector<int> compensation_layers() { return {kNx + kNz + kNu + 1, 600, kNx}; }
std::vector<int> blackbox_layers(BlackboxVariant v) {
    return {kNx + kNz + kNu + 1, v == BlackboxVariant::nn1 ? 500 : 150, kNx + kNz};
}
std::string to_string(BlackboxVariant v) { return v == BlackboxVariant::nn1 ? "NN1" : "NN2"; }

Eigen::MatrixXd inference_features(const NormalizationStats& s, const Eigen::MatrixXd& X, const Eigen::MatrixXd& U,
                                   const Eigen::MatrixXd& P) {
    Eigen::MatrixXd f(kNx + kNu + 1, X.cols());
    f << s.x.normalize(X), s.u.normalize(U), s.p.normalize(P);
    return f;
}

Eigen::MatrixXd state_features(const NormalizationStats& s, const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z,
                               const Eigen::MatrixXd& U, const Eigen::MatrixXd& P) {
    Eigen::MatrixXd f(kNx + kNz + kNu + 1, X.cols());
    f << s.x.normalize(X), s.z.normalize(Z), s.u.normalize(U), s.p.normalize(P);
    return f;
}

namespace {

void require(const RecordSet& rs, const char* what) {
    if (rs.size() == 0) throw InputDomainError(std::string("no ") + what + " records");
}

}  // namespace

TrainResult train_inference_net(const Dataset& d, const TrainConfig& cfg) {
    const RecordSet tr = d.records(Split::train), va = d.records(Split::val);
    require(tr, "training");
    const auto& s = d.stats;
    return train_regression(Mlp::glorot(inference_layers(), stream_seed(cfg.seed, 1)),
                            inference_features(s, tr.X, tr.U, tr.P), s.z.normalize(tr.Z),
                            inference_features(s, va.X, va.U, va.P), s.z.normalize(va.Z), cfg);
}

TrainResult train_compensation_net(const Dataset& d, const TrainConfig& cfg) {
    const RecordSet tr = d.records(Split::train), va = d.records(Split::val);
    require(tr, "training");
    const auto& s = d.stats;
    return train_regression(Mlp::glorot(compensation_layers(), stream_seed(cfg.seed, 2)),
                            state_features(s, tr.X, tr.Z, tr.U, tr.P), s.x_err.normalize(tr.X_err),
                            state_features(s, va.X, va.Z, va.U, va.P), s.x_err.normalize(va.X_err), cfg);
}

TrainResult train_blackbox_net(const Dataset& d, BlackboxVariant v, const TrainConfig& cfg) {
    const RecordSet tr = d.records(Split::train), va = d.records(Split::val);
    require(tr, "training");
    const auto& s = d.stats;
    auto target = [&](const RecordSet& rs) {
        Eigen::MatrixXd y(kNx + kNz, rs.size());
        y << s.x.normalize(rs.X_next), s.z.normalize(rs.Z_next);
        return y;
    };
    return train_regression(Mlp::glorot(blackbox_layers(v), stream_seed(cfg.seed, v == BlackboxVariant::nn1 ? 3 : 4)),
                            state_features(s, tr.X, tr.Z, tr.U, tr.P), target(tr),
                            state_features(s, va.X, va.Z, va.U, va.P), target(va), cfg);
}

double evaluate_mse(const Eigen::MatrixXd& reference, const Eigen::MatrixXd& predicted) {
    if (reference.size() == 0) throw InputDomainError("cannot evaluate MSE on empty data");
    if (reference.rows() != predicted.rows() || reference.cols() != predicted.cols())
        throw ShapeError("MSE operands differ in shape");
    return (reference - predicted).squaredNorm() / static_cast<double>(reference.size());
}

}  // namespace shipcc
