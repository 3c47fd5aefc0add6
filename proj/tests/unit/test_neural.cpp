#include <cmath>

#include "doctest.h"
#include "support/gen.hpp"

#include "shipcc/errors.hpp"
#include "shipcc/mlp.hpp"
#include "shipcc/training.hpp"

using namespace shipcc;

namespace {

Eigen::MatrixXd random_matrix(gen::Rng& r, int rows, int cols, double scale = 1.0) {
    Eigen::MatrixXd m(rows, cols);
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i) m(i, j) = scale * r.normal();
    return m;
}

double max_rel_gradient_error(const Mlp& net, const Eigen::MatrixXd& in, const Eigen::MatrixXd& target) {
    Gradients g;
    mlp_backprop(net, in, target, g);
    const Eigen::VectorXd analytic = g.flatten();
    Eigen::VectorXd theta = net.flatten();
    Mlp probe = net;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        const double h = 1e-5 * std::max(1.0, std::abs(theta[i]));
        const double keep = theta[i];
        theta[i] = keep + h;
        probe.unflatten(theta);
        const double up = mse_loss(probe, in, target);
        theta[i] = keep - h;
        probe.unflatten(theta);
        const double down = mse_loss(probe, in, target);
        theta[i] = keep;
        const double fd = (up - down) / (2 * h);
        const double scale = std::max(std::abs(fd), std::max(std::abs(analytic[i]), 1e-6));
        worst = std::max(worst, std::abs(fd - analytic[i]) / scale);
    }
    return worst;
}

}  // namespace

TEST_CASE("forward pass") {
    const Mlp z = Mlp::zeros({4, 6, 3});
    gen::Rng r(1);
    CHECK(z.forward(random_matrix(r, 4, 9)).cwiseAbs().maxCoeff() == 0.0);

    Mlp one({1, 1, 1});
    one.weight(0)(0, 0) = 1.0;
    one.weight(1)(0, 0) = 1.0;
    Eigen::VectorXd v(1);
    v << 0.7;
    CHECK(one.forward(v)[0] == doctest::Approx(std::tanh(std::tanh(0.7))).epsilon(1e-15));
    one.bias(1)[0] = 0.25;
    one.weight(1)(0, 0) = -2.0;
    CHECK(one.forward(v)[0] == doctest::Approx(-2.0 * std::tanh(std::tanh(0.7)) + 0.25).epsilon(1e-15));

    const Mlp net = Mlp::glorot({5, 7, 3}, 4);
    const Eigen::MatrixXd in = random_matrix(r, 5, 11);
    const Eigen::MatrixXd out = net.forward(in);
    for (int j = 0; j < in.cols(); ++j) {
        const Eigen::VectorXd col = in.col(j);
        CHECK((net.forward(col) - out.col(j)).cwiseAbs().maxCoeff() < 1e-14);
    }
}

TEST_CASE("glorot initialization") {
    const Mlp a = Mlp::glorot({10, 20, 5}, 9);
    const Mlp b = Mlp::glorot({10, 20, 5}, 9);
    const Mlp c = Mlp::glorot({10, 20, 5}, 10);
    CHECK(a == b);
    CHECK_FALSE(a == c);
    const double limit = std::sqrt(6.0 / 30.0);
    CHECK(a.weight(0).cwiseAbs().maxCoeff() <= limit);
    CHECK(a.bias(0).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.parameter_count() == 10 * 20 + 20 + 20 * 5 + 5);
}

TEST_CASE("backprop matches central differences on random nets") {
    gen::Rng r(2024);
    for (int t = 0; t < 20; ++t) {
        std::vector<int> sizes{r.integer(1, 6)};
        const int hidden = r.integer(1, 2);
        for (int h = 0; h < hidden; ++h) sizes.push_back(r.integer(2, 7));
        sizes.push_back(r.integer(1, 4));
        Mlp net = Mlp::glorot(sizes, 100 + t);
        for (int l = 0; l < net.layers(); ++l) net.bias(l) = random_matrix(r, net.bias(l).size(), 1, 0.3);
        const int batch = r.integer(1, 6);
        const Eigen::MatrixXd in = random_matrix(r, sizes.front(), batch);
        const Eigen::MatrixXd target = random_matrix(r, sizes.back(), batch);
        CHECK(max_rel_gradient_error(net, in, target) < 1e-5);
    }
}

TEST_CASE("backprop identities") {
    gen::Rng r(5);
    const Mlp net = Mlp::glorot({5, 3, 2}, 3);
    const Eigen::MatrixXd in = random_matrix(r, 5, 4);
    Gradients g, g2;
    const double loss = mlp_backprop(net, in, net.forward(in), g);
    CHECK(loss == 0.0);
    CHECK(g.flatten().cwiseAbs().maxCoeff() == 0.0);

    const Eigen::MatrixXd target = random_matrix(r, 2, 4);
    mlp_backprop(net, in, target, g);
    mlp_backprop(net, in, target, g2, 2.0);
    CHECK((g2.flatten() - 2.0 * g.flatten()).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(mlp_backprop(net, in, target, g) == doctest::Approx(mse_loss(net, in, target)).epsilon(1e-15));
}

TEST_CASE("adam") {
    AdamConfig cfg;
    cfg.learning_rate = 1e-3;
    Mlp net = Mlp::glorot({2, 3, 1}, 1);
    const Eigen::VectorXd theta0 = net.flatten();

    SUBCASE("zero gradient leaves parameters unchanged") {
        Adam adam(net, cfg);
        Gradients g;
        gen::Rng r(1);
        mlp_backprop(net, random_matrix(r, 2, 3), net.forward(random_matrix(r, 2, 3)), g, 0.0);
        adam.step(net, g);
        CHECK(net.flatten() == theta0);
    }
    SUBCASE("first step is lr·g/(|g| + ε') after bias correction") {
        Adam adam(net, cfg);
        gen::Rng r(2);
        Gradients g;
        mlp_backprop(net, random_matrix(r, 2, 5), random_matrix(r, 1, 5), g);
        const Eigen::VectorXd grad = g.flatten();
        adam.step(net, g);
        const Eigen::VectorXd delta = net.flatten() - theta0;
        for (Eigen::Index i = 0; i < grad.size(); ++i) {
            // m̂ = g, v̂ = g², so Δ = −lr·g/(|g| + ε).
            const double expect = -cfg.learning_rate * grad[i] / (std::abs(grad[i]) + cfg.epsilon);
            CHECK(delta[i] == doctest::Approx(expect).epsilon(1e-12));
        }
    }
    SUBCASE("converges on a one-dimensional quadratic") {
        // Output bias b with zero weights: loss (b − 3)², minimizer b = 3.
        Mlp q = Mlp::zeros({1, 1, 1});
        AdamConfig c;
        c.learning_rate = 0.01;
        Adam adam(q, c);
        Eigen::MatrixXd in = Eigen::MatrixXd::Zero(1, 1), target = Eigen::MatrixXd::Constant(1, 1, 3.0);
        Gradients g;
        int steps = 0;
        while (steps < 5000 && std::abs(q.bias(1)[0] - 3.0) > 1e-6) {
            mlp_backprop(q, in, target, g);
            adam.step(q, g);
            ++steps;
        }
        CHECK(std::abs(q.bias(1)[0] - 3.0) <= 1e-6);
        CHECK(steps <= 5000);
    }
}

TEST_CASE("training") {
    gen::Rng r(77);
    const int n = 600;
    const Eigen::MatrixXd X = random_matrix(r, 4, n, 0.5);
    const Eigen::MatrixXd A = random_matrix(r, 2, 4, 0.3);
    const Eigen::MatrixXd Y = A * X;
    const Eigen::MatrixXd Xv = random_matrix(r, 4, 100, 0.5);
    const Eigen::MatrixXd Yv = A * Xv;
    TrainConfig cfg;
    cfg.epochs = 150;
    cfg.batch_size = 32;
    cfg.adam.learning_rate = 3e-3;
    cfg.seed = 5;

    SUBCASE("linear target is learned") {
        const TrainResult res = train_regression(Mlp::glorot({4, 16, 2}, 1), X, Y, Xv, Yv, cfg);
        const double var = (Yv.array() - Yv.mean()).square().mean();
        CHECK(res.curve.best_val < 0.02 * var);
        CHECK(res.curve.train_mse[static_cast<std::size_t>(res.curve.best_epoch)] <= res.curve.train_mse.front());
        for (double v : res.curve.train_mse) CHECK(std::isfinite(v));
    }
    SUBCASE("zero target") {
        const TrainResult res =
            train_regression(Mlp::glorot({4, 16, 2}, 1), X, Eigen::MatrixXd::Zero(2, n), Xv, Eigen::MatrixXd::Zero(2, 100), cfg);
        CHECK(res.curve.best_val < 1e-4);
    }
    SUBCASE("determinism and seed sensitivity") {
        cfg.epochs = 5;
        const TrainResult a = train_regression(Mlp::glorot({4, 8, 2}, 1), X, Y, Xv, Yv, cfg);
        const TrainResult b = train_regression(Mlp::glorot({4, 8, 2}, 1), X, Y, Xv, Yv, cfg);
        CHECK(a.net == b.net);
        cfg.seed = 6;
        const TrainResult c = train_regression(Mlp::glorot({4, 8, 2}, 1), X, Y, Xv, Yv, cfg);
        CHECK_FALSE(a.net == c.net);
    }
    SUBCASE("batch larger than the data is clamped") {
        cfg.epochs = 2;
        cfg.batch_size = 5000;
        CHECK_NOTHROW(train_regression(Mlp::glorot({4, 8, 2}, 1), X, Y, Xv, Yv, cfg));
    }
    SUBCASE("divergence is reported") {
        Eigen::MatrixXd bad = Y;
        bad(0, 3) = std::numeric_limits<double>::infinity();
        CHECK_THROWS_AS(train_regression(Mlp::glorot({4, 8, 2}, 1), X, bad, Xv, Yv, cfg), TrainingDivergence);
    }
    SUBCASE("early stopping") {
        cfg.patience = 3;
        cfg.epochs = 1000;
        const TrainResult res = train_regression(Mlp::glorot({4, 8, 2}, 1), X, Eigen::MatrixXd::Zero(2, n), Xv,
                                                 Eigen::MatrixXd::Zero(2, 100), cfg);
        CHECK(res.curve.train_mse.size() < 1001);
    }
}

TEST_CASE("evaluate_mse") {
    gen::Rng r(3);
    const Eigen::MatrixXd a = random_matrix(r, 5, 40);
    CHECK(evaluate_mse(a, a) == 0.0);
    CHECK(evaluate_mse(a, a.array() + 0.3) == doctest::Approx(0.09).epsilon(1e-12));
}

TEST_CASE("layer sizes") {
    CHECK(inference_layers() == std::vector<int>{107, 150, 7});
    CHECK(compensation_layers() == std::vector<int>{114, 600, 103});
    CHECK(blackbox_layers(BlackboxVariant::nn1) == std::vector<int>{114, 500, 110});
    CHECK(blackbox_layers(BlackboxVariant::nn2) == std::vector<int>{114, 150, 110});
}

TEST_CASE("checkpoint round trip") {
    const Mlp net = Mlp::glorot({3, 4, 2}, 8);
    const auto file = std::filesystem::temp_directory_path() / "shipcc_unit_net.bin";
    save_mlp(file, net);
    CHECK(load_mlp(file) == net);
    std::filesystem::remove(file);
}
