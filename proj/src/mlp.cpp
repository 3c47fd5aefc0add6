#include "shipcc/mlp.hpp"

#include <cmath>
#include <string>

#include "shipcc/errors.hpp"
#include "shipcc/trajectory_io.hpp"

namespace shipcc {

Mlp::Mlp(std::vector<int> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw ShapeError("a network needs at least input and output sizes");
    for (int s : sizes_)
        if (s <= 0) throw ShapeError("layer sizes must be positive");
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        W_.emplace_back(Eigen::MatrixXd::Zero(sizes_[l + 1], sizes_[l]));
        b_.emplace_back(Eigen::VectorXd::Zero(sizes_[l + 1]));
    }
}

Mlp Mlp::zeros(std::vector<int> sizes) { return Mlp(std::move(sizes)); }

Mlp Mlp::glorot(std::vector<int> sizes, std::uint64_t seed) {
    Mlp net(std::move(sizes));
    std::mt19937_64 rng(seed);
    for (int l = 0; l < net.layers(); ++l) {
        auto& W = net.weight(l);
        const double a = std::sqrt(6.0 / static_cast<double>(W.rows() + W.cols()));
        std::uniform_real_distribution<double> dist(-a, a);
        for (Eigen::Index j = 0; j < W.cols(); ++j)
            for (Eigen::Index i = 0; i < W.rows(); ++i) W(i, j) = dist(rng);
    }
    return net;
}

long Mlp::parameter_count() const {
    long n = 0;
    for (int l = 0; l < layers(); ++l) n += weight(l).size() + bias(l).size();
    return n;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& input) const {
    if (sizes_.empty()) throw ShapeError("network has no layers");
    if (input.rows() != input_dim())
        throw ShapeError("network expects " + std::to_string(input_dim()) + " inputs, got " +
                         std::to_string(input.rows()));
    Eigen::MatrixXd a = input.array().tanh().matrix();
    for (int l = 0; l < layers(); ++l) {
        Eigen::MatrixXd pre = (W_[l] * a).colwise() + b_[l];
        if (l + 1 < layers())
            a = pre.array().tanh().matrix();
        else
            a = std::move(pre);
    }
    return a;
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& input) const {
    return forward(Eigen::MatrixXd(input)).col(0);
}

Eigen::VectorXd Mlp::flatten() const {
    Eigen::VectorXd theta(parameter_count());
    long k = 0;
    for (int l = 0; l < layers(); ++l) {
        theta.segment(k, W_[l].size()) = Eigen::Map<const Eigen::VectorXd>(W_[l].data(), W_[l].size());
        k += W_[l].size();
        theta.segment(k, b_[l].size()) = b_[l];
        k += b_[l].size();
    }
    return theta;
}

void Mlp::unflatten(const Eigen::VectorXd& theta) {
    if (theta.size() != parameter_count()) throw ShapeError("parameter vector length mismatch");
    long k = 0;
    for (int l = 0; l < layers(); ++l) {
        Eigen::Map<Eigen::VectorXd>(W_[l].data(), W_[l].size()) = theta.segment(k, W_[l].size());
        k += W_[l].size();
        b_[l] = theta.segment(k, b_[l].size());
        k += b_[l].size();
    }
}

bool Mlp::finite() const {
    for (int l = 0; l < layers(); ++l)
        if (!W_[l].allFinite() || !b_[l].allFinite()) return false;
    return true;
}

bool Mlp::operator==(const Mlp& other) const {
    if (sizes_ != other.sizes_) return false;
    for (int l = 0; l < layers(); ++l)
        if (W_[l] != other.W_[l] || b_[l] != other.b_[l]) return false;
    return true;
}

Eigen::VectorXd Gradients::flatten() const {
    long n = 0;
    for (std::size_t l = 0; l < dW.size(); ++l) n += dW[l].size() + db[l].size();
    Eigen::VectorXd g(n);
    long k = 0;
    for (std::size_t l = 0; l < dW.size(); ++l) {
        g.segment(k, dW[l].size()) = Eigen::Map<const Eigen::VectorXd>(dW[l].data(), dW[l].size());
        k += dW[l].size();
        g.segment(k, db[l].size()) = db[l];
        k += db[l].size();
    }
    return g;
}

double mse_loss(const Mlp& net, const Eigen::MatrixXd& input, const Eigen::MatrixXd& target) {
    if (input.cols() == 0) throw ShapeError("empty batch");
    const Eigen::MatrixXd out = net.forward(input);
    if (out.rows() != target.rows() || out.cols() != target.cols()) throw ShapeError("target shape mismatch");
    return (out - target).squaredNorm() / static_cast<double>(out.size());
}

double mlp_backprop(const Mlp& net, const Eigen::MatrixXd& input, const Eigen::MatrixXd& target, Gradients& grad,
                    double loss_scale) {
    if (input.cols() == 0) throw ShapeError("empty batch");
    if (input.rows() != net.input_dim()) throw ShapeError("input dimension mismatch");
    if (target.rows() != net.output_dim() || target.cols() != input.cols())
        throw ShapeError("target shape mismatch");
    const int L = net.layers();
    std::vector<Eigen::MatrixXd> act(static_cast<std::size_t>(L) + 1);
    act[0] = input.array().tanh().matrix();
    for (int l = 0; l < L; ++l) {
        Eigen::MatrixXd pre = (net.weight(l) * act[l]).colwise() + net.bias(l);
        act[l + 1] = l + 1 < L ? Eigen::MatrixXd(pre.array().tanh().matrix()) : std::move(pre);
    }
    const double n = static_cast<double>(target.size());
    Eigen::MatrixXd delta = act[L] - target;
    const double loss = loss_scale * delta.squaredNorm() / n;
    delta *= 2.0 * loss_scale / n;

    grad.dW.resize(static_cast<std::size_t>(L));
    grad.db.resize(static_cast<std::size_t>(L));
    for (int l = L - 1; l >= 0; --l) {
        grad.dW[l].noalias() = delta * act[l].transpose();
        grad.db[l] = delta.rowwise().sum();
        if (l > 0) {
            Eigen::MatrixXd back = net.weight(l).transpose() * delta;
            delta = back.array() * (1.0 - act[l].array().square());
        }
    }
    return loss;
}

Adam::Adam(const Mlp& net, AdamConfig cfg) : cfg_(cfg) {
    if (!(cfg.learning_rate > 0.0)) throw InputDomainError("learning rate must be positive");
    for (int l = 0; l < net.layers(); ++l) {
        mW_.emplace_back(Eigen::MatrixXd::Zero(net.weight(l).rows(), net.weight(l).cols()));
        vW_.emplace_back(Eigen::MatrixXd::Zero(net.weight(l).rows(), net.weight(l).cols()));
        mb_.emplace_back(Eigen::VectorXd::Zero(net.bias(l).size()));
        vb_.emplace_back(Eigen::VectorXd::Zero(net.bias(l).size()));
    }
}

void Adam::step(Mlp& net, const Gradients& grad) {
    if (grad.dW.size() != mW_.size()) throw ShapeError("gradient layout does not match optimizer state");
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const double b1 = cfg_.beta1, b2 = cfg_.beta2, lr = cfg_.learning_rate, eps = cfg_.epsilon;
    auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
        param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    };
    for (std::size_t l = 0; l < mW_.size(); ++l) {
        update(net.weight(static_cast<int>(l)), mW_[l], vW_[l], grad.dW[l]);
        update(net.bias(static_cast<int>(l)), mb_[l], vb_[l], grad.db[l]);
    }
}

void save_mlp(const std::filesystem::path& file, const Mlp& net) {
    MatrixBundle b;
    Eigen::MatrixXd sizes(1, static_cast<Eigen::Index>(net.sizes().size()));
    for (std::size_t i = 0; i < net.sizes().size(); ++i) sizes(0, static_cast<Eigen::Index>(i)) = net.sizes()[i];
    b["sizes"] = sizes;
    for (int l = 0; l < net.layers(); ++l) {
        b["W" + std::to_string(l)] = net.weight(l);
        b["b" + std::to_string(l)] = net.bias(l);
    }
    write_bundle(file, b);
}

Mlp load_mlp(const std::filesystem::path& file) {
    MatrixBundle b = read_bundle(file);
    if (!b.count("sizes")) throw IoError("checkpoint lacks layer sizes: " + file.string());
    std::vector<int> sizes;
    for (Eigen::Index i = 0; i < b["sizes"].cols(); ++i) sizes.push_back(static_cast<int>(b["sizes"](0, i)));
    Mlp net(sizes);
    for (int l = 0; l < net.layers(); ++l) {
        const auto& W = b["W" + std::to_string(l)];
        const auto& bias = b["b" + std::to_string(l)];
        if (W.rows() != net.weight(l).rows() || W.cols() != net.weight(l).cols() || bias.size() != net.bias(l).size())
            throw IoError("checkpoint parameter shapes do not match its layer sizes");
        net.weight(l) = W;
        net.bias(l) = bias.col(0);
    }
    return net;
}

}  // namespace shipcc
