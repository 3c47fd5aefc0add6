#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include <Eigen/Core>

namespace shipcc {

/// Dense network: tanh on the input, then per hidden layer affine + tanh, then an
/// affine output. Inputs and outputs are columns of a features × batch matrix.
class Mlp {
public:
    Mlp() = default;
    explicit Mlp(std::vector<int> sizes);

    /// Uniform ±sqrt(6 / (fan_in + fan_out)) weights, zero biases.
    static Mlp glorot(std::vector<int> sizes, std::uint64_t seed);
    static Mlp zeros(std::vector<int> sizes);

    const std::vector<int>& sizes() const { return sizes_; }
    int input_dim() const { return sizes_.front(); }
    int output_dim() const { return sizes_.back(); }
    int layers() const { return static_cast<int>(W_.size()); }
    long parameter_count() const;

    Eigen::MatrixXd& weight(int l) { return W_[static_cast<std::size_t>(l)]; }
    const Eigen::MatrixXd& weight(int l) const { return W_[static_cast<std::size_t>(l)]; }
    Eigen::VectorXd& bias(int l) { return b_[static_cast<std::size_t>(l)]; }
    const Eigen::VectorXd& bias(int l) const { return b_[static_cast<std::size_t>(l)]; }

    Eigen::MatrixXd forward(const Eigen::MatrixXd& input) const;
    Eigen::VectorXd forward(const Eigen::VectorXd& input) const;

    /// Flat parameter view: per layer W (column-major) then b.
    Eigen::VectorXd flatten() const;
    void unflatten(const Eigen::VectorXd& theta);

    bool finite() const;
    bool operator==(const Mlp& other) const;

private:
    std::vector<int> sizes_;
    std::vector<Eigen::MatrixXd> W_;
    std::vector<Eigen::VectorXd> b_;
};

struct Gradients {
    std::vector<Eigen::MatrixXd> dW;
    std::vector<Eigen::VectorXd> db;

    Eigen::VectorXd flatten() const;
};

/// Mean squared error over every element of the batch, (1/(n·d))·Σ(ŷ − y)².
double mse_loss(const Mlp& net, const Eigen::MatrixXd& input, const Eigen::MatrixXd& target);

/// Loss and its exact gradient with respect to every parameter, scaled by `loss_scale`.
double mlp_backprop(const Mlp& net, const Eigen::MatrixXd& input, const Eigen::MatrixXd& target, Gradients& grad,
                    double loss_scale = 1.0);

struct AdamConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

class Adam {
public:
    Adam() = default;
    Adam(const Mlp& net, AdamConfig cfg);

    void step(Mlp& net, const Gradients& grad);
    long steps() const { return t_; }

private:
    AdamConfig cfg_;
    long t_ = 0;
    std::vector<Eigen::MatrixXd> mW_, vW_;
    std::vector<Eigen::VectorXd> mb_, vb_;
};

/// Versioned binary checkpoint: layer sizes then parameters.
void save_mlp(const std::filesystem::path& file, const Mlp& net);
Mlp load_mlp(const std::filesystem::path& file);

}  // namespace shipcc
