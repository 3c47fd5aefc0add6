#include "shipcc/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/LU>

#include "shipcc/errors.hpp"
#include "shipcc/hash.hpp"
#include "shipcc/trajectory_io.hpp"

namespace shipcc {

namespace {

constexpr int kNw = kNx + kNz;

using WVector = Eigen::Matrix<double, kNw, 1>;

// Column groups that share no Jacobian row, found once by probing the plant at two
// generic interior points.
struct JacobianColoring {
    std::vector<std::vector<int>> groups;
    std::vector<std::vector<int>> rows;  // nonzero rows per column
};

void probe_point(StateVector& x, AlgebraicVector& z, int variant) {
    const PlantParameters params = PlantParameters::truth();
    x = initial_state(params);
    for (int i = 0; i < kNx; ++i) {
        const double bump = 1.0 + 0.013 * ((i * 7 + variant * 3) % 11) / 11.0;
        x[i] = std::max(x[i], 0.01) * bump;
    }
    for (int n = 0; n < kLayers; ++n) {
        x[layout::gas_temp(layout::kAbsorber, n)] = 318.0 + n + variant;
        x[layout::gas_temp(layout::kDesorber, n)] = 371.0 - n + variant;
    }
    x[layout::kReboilerTemp] = 387.0 + variant;
    ControlInput u;
    z = algebraic_guess(x, u, params);
    z[alg::kLiquidConc + kN2] = 0.01;
}

const JacobianColoring& coloring() {
    static const JacobianColoring c = [] {
        const PlantParameters params = PlantParameters::truth();
        const ControlInput u;
        const Disturbance p;
        std::vector<std::vector<bool>> pattern(kNw, std::vector<bool>(kNw, false));
        for (int variant = 0; variant < 2; ++variant) {
            StateVector x;
            AlgebraicVector z;
            probe_point(x, z, variant);
            WVector w;
            w << x, z;
            WVector f0, f1;
            plant_dae(w.data(), w.data() + kNx, u, p, params, f0.data(), f0.data() + kNx);
            for (int j = 0; j < kNw; ++j) {
                WVector wp = w;
                wp[j] += 1e-4 * std::max(std::abs(w[j]), 1e-2);
                plant_dae(wp.data(), wp.data() + kNx, u, p, params, f1.data(), f1.data() + kNx);
                for (int i = 0; i < kNw; ++i)
                    if (f1[i] != f0[i]) pattern[i][j] = true;
            }
        }
        for (int j = 0; j < kNx; ++j) pattern[j][j] = true;

        JacobianColoring out;
        out.rows.resize(kNw);
        for (int j = 0; j < kNw; ++j)
            for (int i = 0; i < kNw; ++i)
                if (pattern[i][j]) out.rows[j].push_back(i);
        std::vector<std::vector<bool>> used;
        for (int j = 0; j < kNw; ++j) {
            std::size_t color = 0;
            for (; color < used.size(); ++color) {
                bool clash = false;
                for (int r : out.rows[j])
                    if (used[color][r]) {
                        clash = true;
                        break;
                    }
                if (!clash) break;
            }
            if (color == used.size()) {
                used.emplace_back(kNw, false);
                out.groups.emplace_back();
            }
            for (int r : out.rows[j]) used[color][r] = true;
            out.groups[color].push_back(j);
        }
        return out;
    }();
    return c;
}

class StageSolver {
public:
    StageSolver(const ControlInput& u, const Disturbance& p, const PlantParameters& params, double h,
                const IntegratorConfig& cfg)
        : u_(u), p_(p), params_(params), h_(h), cfg_(cfg), J_(kNw, kNw) {}

    void residual(const WVector& w, const StateVector& x_prev, WVector& r) const {
        plant_dae(w.data(), w.data() + kNx, u_, p_, params_, r.data(), r.data() + kNx);
        for (int i = 0; i < kNx; ++i) r[i] = w[i] - x_prev[i] - h_ * r[i];
    }

    double norm(const WVector& w, const WVector& r) const {
        double m = 0.0;
        for (int i = 0; i < kNx; ++i) m = std::max(m, std::abs(r[i]) / std::max(1.0, std::abs(w[i])));
        for (int i = kNx; i < kNw; ++i) m = std::max(m, std::abs(r[i]));
        return std::isfinite(m) ? m : std::numeric_limits<double>::infinity();
    }

    void refresh(const WVector& w, const StateVector& x_prev, const WVector& r0) {
        const auto& c = coloring();
        J_.setZero();
        WVector wp, r1, delta = WVector::Zero();
        for (const auto& group : c.groups) {
            wp = w;
            for (int j : group) {
                delta[j] = 1e-7 * std::max(std::abs(w[j]), 1e-2);
                wp[j] += delta[j];
            }
            residual(wp, x_prev, r1);
            for (int j : group)
                for (int i : c.rows[j]) J_(i, j) = (r1[i] - r0[i]) / delta[j];
        }
        lu_.compute(J_);
        ++refreshes_;
        age_ = 0;
    }

    // Solves one implicit-Euler stage in place. Returns false on failure.
    bool solve(WVector& w, const StateVector& x_prev) {
        WVector r, trial, rt;
        residual(w, x_prev, r);
        double rn = norm(w, r);
        if (!have_jacobian_) {
            refresh(w, x_prev, r);
            have_jacobian_ = true;
        }
        for (int it = 0; it < cfg_.newton_max_iters; ++it) {
            if (rn <= cfg_.newton_tol) return true;
            const WVector step = lu_.solve(r);
            double lambda = 1.0;
            double tn = std::numeric_limits<double>::infinity();
            for (int ls = 0; ls < (age_ == 0 ? 8 : 1); ++ls) {
                trial = w - lambda * step;
                residual(trial, x_prev, rt);
                tn = norm(trial, rt);
                if (tn < rn) break;
                lambda *= 0.5;
            }
            if (tn < rn) {
                const bool slow = tn > 0.3 * rn;
                w = trial;
                r = rt;
                rn = tn;
                ++age_;
                if (slow && rn > cfg_.newton_tol) refresh(w, x_prev, r);
            } else if (age_ > 0) {
                refresh(w, x_prev, r);
            } else {
                return false;
            }
        }
        return rn <= cfg_.newton_tol;
    }

    int refreshes() const { return refreshes_; }

private:
    ControlInput u_;
    Disturbance p_;
    const PlantParameters& params_;
    double h_;
    IntegratorConfig cfg_;
    Eigen::MatrixXd J_;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
    bool have_jacobian_ = false;
    int age_ = 0;
    int refreshes_ = 0;
};

double g_norm(const StateVector& x, const AlgebraicVector& z, const ControlInput& u, const Disturbance& p,
              const PlantParameters& params, AlgebraicVector& g) {
    StateVector xdot;
    plant_dae(x.data(), z.data(), u, p, params, xdot.data(), g.data());
    const double n = g.cwiseAbs().maxCoeff();
    return std::isfinite(n) ? n : std::numeric_limits<double>::infinity();
}

}  // namespace

void IntegratorConfig::validate() const {
    if (!(sample_period > 0.0)) throw ConfigError("sample_period must be positive");
    if (substeps < 1) throw ConfigError("substeps must be at least 1");
    if (!(newton_tol > 0.0)) throw ConfigError("newton_tol must be positive");
    if (newton_max_iters < 1) throw ConfigError("newton_max_iters must be at least 1");
}

AlgebraicVector consistent_initialize(const StateVector& x, const ControlInput& u, const Disturbance& p,
                                      const PlantParameters& params, const IntegratorConfig& cfg) {
    return consistent_initialize(x, algebraic_guess(x, u, params), u, p, params, cfg);
}

AlgebraicVector consistent_initialize(const StateVector& x, const AlgebraicVector& warm_start,
                                      const ControlInput& u, const Disturbance& p,
                                      const PlantParameters& params, const IntegratorConfig& cfg) {
    AlgebraicVector z = warm_start;
    AlgebraicVector g, gp;
    double gn = g_norm(x, z, u, p, params, g);
    using Mat7 = Eigen::Matrix<double, kNz, kNz>;
    for (int it = 0; it < cfg.newton_max_iters && gn > cfg.newton_tol; ++it) {
        Mat7 J;
        for (int j = 0; j < kNz; ++j) {
            AlgebraicVector zp = z;
            const double d = 1e-7 * std::max(std::abs(z[j]), 1e-2);
            zp[j] += d;
            g_norm(x, zp, u, p, params, gp);
            J.col(j) = (gp - g) / d;
        }
        const AlgebraicVector step = J.partialPivLu().solve(g);
        double lambda = 1.0;
        bool improved = false;
        for (int ls = 0; ls < 30; ++ls) {
            const AlgebraicVector trial = z - lambda * step;
            const double tn = g_norm(x, trial, u, p, params, gp);
            if (tn < gn) {
                z = trial;
                g = gp;
                gn = tn;
                improved = true;
                break;
            }
            lambda *= 0.5;
        }
        if (!improved) break;
    }
    if (!(gn <= cfg.newton_tol))
        throw InitializationError("algebraic states did not converge", gn);
    return z;
}

StepResult dae_step(const StateVector& x, const AlgebraicVector& z, const ControlInput& u,
                    const Disturbance& p, const PlantParameters& params, const IntegratorConfig& cfg) {
    const double h = cfg.sample_period / cfg.substeps;
    StageSolver solver(u, p, params, h, cfg);
    WVector w;
    w << x, z;
    StateVector x_prev = x;
    for (int s = 0; s < cfg.substeps; ++s) {
        if (!solver.solve(w, x_prev)) throw StepFailure("implicit Euler stage did not converge");
        x_prev = w.head<kNx>();
    }
    StepResult out{w.head<kNx>(), w.tail<kNz>()};
    if (!state_in_range(out.x)) throw StepFailure("state left the physical range");
    return out;
}

void generic_dae_step(const GenericDae& dae, Eigen::VectorXd& x, Eigen::VectorXd& z, double period,
                      int substeps, double tol, int max_iters) {
    const int n = dae.nx + dae.nz;
    const double h = period / substeps;
    Eigen::VectorXd w(n), r(n), rp(n), xd(dae.nx), g(dae.nz);
    auto residual = [&](const Eigen::VectorXd& wv, const Eigen::VectorXd& x_prev, Eigen::VectorXd& out) {
        dae.rhs(wv.head(dae.nx), wv.tail(dae.nz), xd, g);
        out.head(dae.nx) = wv.head(dae.nx) - x_prev - h * xd;
        out.tail(dae.nz) = g;
    };
    w << x, z;
    for (int s = 0; s < substeps; ++s) {
        const Eigen::VectorXd x_prev = w.head(dae.nx);
        residual(w, x_prev, r);
        int it = 0;
        for (; it < max_iters && r.cwiseAbs().maxCoeff() > tol; ++it) {
            Eigen::MatrixXd J(n, n);
            for (int j = 0; j < n; ++j) {
                Eigen::VectorXd wp = w;
                const double d = 1e-7 * std::max(std::abs(w[j]), 1.0);
                wp[j] += d;
                residual(wp, x_prev, rp);
                J.col(j) = (rp - r) / d;
            }
            w -= J.partialPivLu().solve(r);
            residual(w, x_prev, r);
        }
        if (r.cwiseAbs().maxCoeff() > tol) throw StepFailure("implicit Euler stage did not converge");
    }
    x = w.head(dae.nx);
    z = w.tail(dae.nz);
}

Trajectory simulate_open_loop(const StateVector& x0, const std::vector<ControlInput>& u_seq,
                              const std::vector<Disturbance>& p_seq, const PlantParameters& params,
                              const IntegratorConfig& cfg) {
    if (u_seq.size() != p_seq.size()) throw ShapeError("input and disturbance sequences differ in length");
    cfg.validate();
    const long N = static_cast<long>(u_seq.size());
    Trajectory t;
    t.sample_period = cfg.sample_period;
    t.X.resize(N + 1, kNx);
    t.Z.resize(N + 1, kNz);
    t.U.resize(N, kNu);
    t.P.resize(N);
    t.Y.resize(N + 1, kNy);

    const ControlInput& u0 = N > 0 ? u_seq[0] : ControlInput{};
    const Disturbance& p0 = N > 0 ? p_seq[0] : Disturbance{};
    StateVector x = x0;
    AlgebraicVector z = consistent_initialize(x, u0, p0, params, cfg);
    auto record = [&](long k, const Disturbance& p) {
        t.X.row(k) = x.transpose();
        t.Z.row(k) = z.transpose();
        const PlantOutput y = outputs(x, p, params.engine);
        t.Y(k, 0) = y.F_CO2_out;
        t.Y(k, 1) = y.T_reb;
    };
    record(0, p0);
    for (long k = 0; k < N; ++k) {
        for (int i = 0; i < kNu; ++i) t.U(k, i) = u_seq[k][i];
        t.P[k] = p_seq[k].phi_E;
        try {
            const StepResult r = dae_step(x, z, u_seq[k], p_seq[k], params, cfg);
            x = r.x;
            z = r.z;
        } catch (const StepFailure& e) {
            throw StepFailure(e.what(), k);
        } catch (const InputDomainError& e) {
            throw InputDomainError(std::string(e.what()) + " (sample " + std::to_string(k) + ")");
        }
        record(k + 1, p_seq[k]);
    }
    return t;
}

SteadyState settle(const StateVector& x0, const ControlInput& u, const Disturbance& p,
                   const PlantParameters& params, const IntegratorConfig& cfg, int samples) {
    SteadyState s;
    s.u = u;
    s.p = p;
    s.x = x0;
    s.z = consistent_initialize(x0, u, p, params, cfg);
    for (int k = 0; k < samples; ++k) {
        StepResult r = dae_step(s.x, s.z, u, p, params, cfg);
        s.x = r.x;
        s.z = r.z;
    }
    const PlantDerivatives d = plant_dae(s.x, s.z, u, p, params);
    s.max_rate = d.xdot.cwiseAbs().maxCoeff();
    return s;
}

SteadyState nominal_steady_state(const PlantParameters& params, const IntegratorConfig& cfg,
                                 const std::filesystem::path& cache_dir, int samples) {
    const ControlInput u = InputBox{}.midpoint();
    const Disturbance p{0.55};
    std::filesystem::path file;
    if (!cache_dir.empty()) {
        std::ostringstream key;
        key << params.canonical() << "|" << cfg.sample_period << "|" << cfg.substeps << "|" << cfg.newton_tol
            << "|" << samples;
        file = cache_dir / ("steady_" + hex_digest(key.str()) + ".bin");
        if (std::filesystem::exists(file)) {
            const Eigen::MatrixXd m = read_matrix(file);
            if (m.rows() == kNx + kNz + 1 && m.cols() == 1) {
                SteadyState s;
                s.u = u;
                s.p = p;
                s.x = m.col(0).head<kNx>();
                s.z = m.col(0).segment<kNz>(kNx);
                s.max_rate = m(kNx + kNz, 0);
                return s;
            }
        }
    }
    SteadyState s = settle(initial_state(params), u, p, params, cfg, samples);
    if (!file.empty()) {
        std::filesystem::create_directories(cache_dir);
        Eigen::MatrixXd m(kNx + kNz + 1, 1);
        m.col(0) << s.x, s.z, s.max_rate;
        write_matrix(file, m);
    }
    return s;
}

}  // namespace shipcc
