#include "shipcc/datagen.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include "shipcc/errors.hpp"
#include "shipcc/trajectory_io.hpp"

namespace shipcc {

namespace {

constexpr double kConstantStd = 1e-8;

// floor(fraction·n), tolerant of fractions like 0.7 + 0.1
long split_point(double fraction, long n) {
    return static_cast<long>(std::floor(fraction * static_cast<double>(n) + 1e-9));
}

std::uint64_t mix64(std::uint64_t v) {
    v += 0x9e3779b97f4a7c15ULL;
    v = (v ^ (v >> 30)) * 0xbf58476d1ce4e5b9ULL;
    v = (v ^ (v >> 27)) * 0x94d049bb133111ebULL;
    return v ^ (v >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t purpose) {
    return mix64(mix64(seed) ^ mix64(stream * 0x100000001b3ULL + purpose));
}

void check_condition(int c) {
    if (c < 1 || c > 3) throw InputDomainError("operational condition must be 1, 2 or 3");
}

}  // namespace

LoadRange condition_range(int condition) {
    check_condition(condition);
    switch (condition) {
        case 1: return {0.4, 0.7};
        case 2: return {0.8, 1.0};
        default: return {0.1, 0.3};
    }
}

LoadSampler LoadSampler::for_condition(int condition, double std) {
    LoadSampler s;
    s.range = condition_range(condition);
    s.mean = s.range.mid();
    s.std = std;
    return s;
}

double LoadSampler::draw_unclipped(std::mt19937_64& rng) const {
    std::normal_distribution<double> dist(mean, std);
    return dist(rng);
}

double LoadSampler::draw(std::mt19937_64& rng) const {
    return std::clamp(draw_unclipped(rng), range.lo, range.hi);
}

Scenario Scenario::case_one() { return Scenario{}; }

Scenario Scenario::case_two() {
    Scenario s;
    s.name = "case2";
    s.mix = {{1, 1.0}};
    s.test_only_conditions = {2, 3};
    return s;
}

void Scenario::validate() const {
    if (mix.empty()) throw ConfigError("scenario needs at least one condition share");
    double total = 0.0;
    for (const auto& share : mix) {
        check_condition(share.condition);
        if (!(share.fraction > 0.0)) throw ConfigError("condition fractions must be positive");
        total += share.fraction;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("condition fractions must sum to 1");
    for (int c : test_only_conditions) check_condition(c);
    if (load_hold < 1 || input_hold < 1) throw ConfigError("hold lengths must be positive");
    if (!(load_std >= 0.0)) throw ConfigError("load std must be non-negative");
    if (!(train_fraction > 0.0) || !(val_fraction >= 0.0) || train_fraction + val_fraction >= 1.0)
        throw ConfigError("split fractions must leave a non-empty test block");
}

std::vector<Disturbance> make_disturbance_profile(const LoadSampler& sampler, long length, std::uint64_t seed,
                                                  int hold) {
    if (length <= 0) throw InputDomainError("profile length must be positive");
    if (hold <= 0) throw InputDomainError("hold length must be positive");
    std::mt19937_64 rng(seed);
    std::vector<Disturbance> out(static_cast<std::size_t>(length));
    double value = 0.0;
    for (long k = 0; k < length; ++k) {
        if (k % hold == 0) value = sampler.draw(rng);
        out[static_cast<std::size_t>(k)].phi_E = value;
    }
    return out;
}

std::vector<Disturbance> make_disturbance_profile(int condition, long length, std::uint64_t seed, int hold,
                                                  double std) {
    return make_disturbance_profile(LoadSampler::for_condition(condition, std), length, seed, hold);
}

std::vector<ControlInput> make_excitation(const InputBox& bounds, long length, std::uint64_t seed, int hold) {
    if (length <= 0) throw InputDomainError("excitation length must be positive");
    if (hold <= 0) throw InputDomainError("hold length must be positive");
    std::mt19937_64 rng(seed);
    std::vector<ControlInput> out(static_cast<std::size_t>(length));
    ControlInput u;
    for (long k = 0; k < length; ++k) {
        if (k % hold == 0) {
            for (int i = 0; i < kNu; ++i) {
                std::uniform_real_distribution<double> dist(bounds.lower[i], bounds.upper[i]);
                u[i] = dist(rng);
            }
        }
        out[static_cast<std::size_t>(k)] = u;
    }
    return out;
}

// ---------------------------------------------------------------------------

Normalizer Normalizer::fit(const Eigen::MatrixXd& data) {
    if (data.cols() == 0) throw ShapeError("cannot fit statistics on an empty set");
    Normalizer n;
    n.mean = data.rowwise().mean();
    const Eigen::MatrixXd centered = data.colwise() - n.mean;
    n.std = (centered.rowwise().squaredNorm() / static_cast<double>(data.cols())).cwiseSqrt();
    n.constant.assign(static_cast<std::size_t>(data.rows()), false);
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        if (!(n.std[i] >= kConstantStd)) {
            n.std[i] = kConstantStd;
            n.constant[static_cast<std::size_t>(i)] = true;
        }
    }
    return n;
}

Normalizer Normalizer::fit_scale(const Eigen::MatrixXd& data) {
    if (data.cols() == 0) throw ShapeError("cannot fit statistics on an empty set");
    Normalizer n;
    n.mean = Eigen::VectorXd::Zero(data.rows());
    n.std = (data.rowwise().squaredNorm() / static_cast<double>(data.cols())).cwiseSqrt();
    n.constant.assign(static_cast<std::size_t>(data.rows()), false);
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
        if (!(n.std[i] >= kConstantStd)) {
            n.std[i] = kConstantStd;
            n.constant[static_cast<std::size_t>(i)] = true;
        }
    }
    return n;
}

Normalizer Normalizer::identity(int dim) {
    Normalizer n;
    n.mean = Eigen::VectorXd::Zero(dim);
    n.std = Eigen::VectorXd::Ones(dim);
    n.constant.assign(static_cast<std::size_t>(dim), false);
    return n;
}

Eigen::MatrixXd Normalizer::normalize(const Eigen::MatrixXd& data) const {
    if (data.rows() != mean.size()) throw ShapeError("normalizer dimension mismatch");
    Eigen::MatrixXd out = (data.colwise() - mean).array().colwise() / std.array();
    for (std::size_t i = 0; i < constant.size(); ++i)
        if (constant[i]) out.row(static_cast<Eigen::Index>(i)).setZero();
    return out;
}

Eigen::MatrixXd Normalizer::denormalize(const Eigen::MatrixXd& data) const {
    if (data.rows() != mean.size()) throw ShapeError("normalizer dimension mismatch");
    Eigen::MatrixXd out = (data.array().colwise() * std.array()).matrix().colwise() + mean;
    for (std::size_t i = 0; i < constant.size(); ++i)
        if (constant[i]) out.row(static_cast<Eigen::Index>(i)).setConstant(mean[static_cast<Eigen::Index>(i)]);
    return out;
}

// ---------------------------------------------------------------------------

std::pair<long, long> Segment::range(Split s) const {
    switch (s) {
        case Split::train: return {0, train_used < 0 ? train_end : train_used};
        case Split::val: return {train_end, val_used < 0 ? val_end : train_end + val_used};
        default: return {val_end, records()};
    }
}

namespace {

void append_records(RecordSet& rs, const Segment& seg, long begin, long end) {
    const long n = end - begin;
    if (n <= 0) return;
    const long off = rs.size();
    auto grow = [&](Eigen::MatrixXd& m, int rows) { m.conservativeResize(rows, off + n); };
    grow(rs.X, kNx);
    grow(rs.Z, kNz);
    grow(rs.U, kNu);
    grow(rs.P, 1);
    grow(rs.X_next, kNx);
    grow(rs.Z_next, kNz);
    grow(rs.X_err, kNx);
    const auto& t = seg.traj;
    rs.X.middleCols(off, n) = t.X.middleRows(begin, n).transpose();
    rs.Z.middleCols(off, n) = t.Z.middleRows(begin, n).transpose();
    rs.U.middleCols(off, n) = t.U.middleRows(begin, n).transpose();
    rs.P.middleCols(off, n) = t.P.segment(begin, n).transpose();
    rs.X_next.middleCols(off, n) = t.X.middleRows(begin + 1, n).transpose();
    rs.Z_next.middleCols(off, n) = t.Z.middleRows(begin + 1, n).transpose();
    rs.X_err.middleCols(off, n) = (t.X.middleRows(begin + 1, n) - seg.X_fp.middleRows(begin, n)).transpose();
}

RecordSet empty_records() {
    RecordSet rs;
    rs.X.resize(kNx, 0);
    rs.Z.resize(kNz, 0);
    rs.U.resize(kNu, 0);
    rs.P.resize(1, 0);
    rs.X_next.resize(kNx, 0);
    rs.Z_next.resize(kNz, 0);
    rs.X_err.resize(kNx, 0);
    return rs;
}

}  // namespace

RecordSet Dataset::records(Split split, bool include_test_only) const {
    RecordSet rs = empty_records();
    for (const auto& seg : segments) {
        if (seg.test_only && !include_test_only) continue;
        const auto [b, e] = seg.range(split);
        append_records(rs, seg, b, e);
    }
    return rs;
}

RecordSet Dataset::records(Split split, int condition) const {
    RecordSet rs = empty_records();
    for (const auto& seg : segments) {
        if (seg.condition != condition) continue;
        const auto [b, e] = seg.range(split);
        append_records(rs, seg, b, e);
    }
    return rs;
}

long Dataset::total_records() const {
    long n = 0;
    for (const auto& seg : segments) n += seg.records();
    return n;
}

NormalizationStats fit_statistics(const RecordSet& train) {
    NormalizationStats s;
    s.x = Normalizer::fit(train.X);
    s.z = Normalizer::fit(train.Z);
    s.u = Normalizer::fit(train.U);
    s.p = Normalizer::fit(train.P);
    s.x_err = Normalizer::fit_scale(train.X_err);
    return s;
}

void split_and_normalize(Dataset& d) {
    if (d.segments.empty()) throw InputDomainError("dataset is empty");
    for (auto& seg : d.segments) {
        const long n = seg.records();
        if (seg.test_only) {
            seg.train_end = seg.val_end = 0;
            seg.train_used = seg.val_used = -1;
            continue;
        }
        seg.train_end = split_point(d.scenario.train_fraction, n);
        seg.val_end = split_point(d.scenario.train_fraction + d.scenario.val_fraction, n);
        seg.train_used = seg.val_used = -1;
    }
    d.stats = fit_statistics(d.records(Split::train));
}

Dataset Dataset::with_training_fraction(double fraction) const {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw InputDomainError("training fraction must lie in (0, 1]");
    Dataset out = *this;
    for (auto& seg : out.segments) {
        if (seg.test_only) continue;
        seg.train_used = split_point(fraction, seg.train_end);
        seg.val_used = split_point(fraction, seg.val_end - seg.train_end);
    }
    out.stats = fit_statistics(out.records(Split::train));
    return out;
}

// ---------------------------------------------------------------------------

void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
    if (n <= 0) return;
    const int threads = std::clamp(workers, 1, n);
    if (threads == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::mutex err_mutex;
    int err_index = n;
    std::exception_ptr err;
    auto worker = [&] {
        for (int i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(err_mutex);
                if (i < err_index) {
                    err_index = i;
                    err = std::current_exception();
                }
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads - 1));
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

namespace {

Eigen::MatrixXd one_step_predictions(const Trajectory& t, const PlantParameters& params,
                                     const IntegratorConfig& cfg, int workers) {
    const long n = t.steps();
    Eigen::MatrixXd out(n, kNx);
    constexpr long kChunk = 256;
    const int chunks = static_cast<int>((n + kChunk - 1) / kChunk);
    parallel_for(chunks, workers, [&](int c) {
        const long begin = c * kChunk;
        const long end = std::min(n, begin + kChunk);
        for (long k = begin; k < end; ++k) {
            const StateVector x = t.X.row(k).transpose();
            const AlgebraicVector z = t.Z.row(k).transpose();
            const ControlInput u{t.U(k, 0), t.U(k, 1), t.U(k, 2)};
            try {
                out.row(k) = dae_step(x, z, u, Disturbance{t.P[k]}, params, cfg).x.transpose();
            } catch (const StepFailure& e) {
                throw StepFailure(std::string("mismatch labelling failed: ") + e.what(), k);
            }
        }
    });
    return out;
}

}  // namespace

Dataset build_dataset(const Scenario& scenario, long n_samples, std::uint64_t seed, const PlantParameters& truth,
                      const PlantParameters& imperfect, const DatagenConfig& cfg) {
    if (n_samples <= 0) throw InputDomainError("n_samples must be positive");
    scenario.validate();
    cfg.integrator.validate();

    struct Plan {
        int condition;
        bool test_only;
        long length;
    };
    std::vector<Plan> plans;
    long assigned = 0;
    for (std::size_t i = 0; i < scenario.mix.size(); ++i) {
        const bool last = i + 1 == scenario.mix.size();
        const long len = last ? n_samples - assigned
                              : std::lround(scenario.mix[i].fraction * static_cast<double>(n_samples));
        assigned += len;
        if (len <= 0) throw InputDomainError("n_samples too small for the condition mix");
        plans.push_back({scenario.mix[i].condition, false, len});
    }
    const double test_fraction = 1.0 - scenario.train_fraction - scenario.val_fraction;
    for (int c : scenario.test_only_conditions) {
        const long len = std::max(1L, std::lround(test_fraction * static_cast<double>(n_samples)));
        plans.push_back({c, true, len});
    }

    const SteadyState start = nominal_steady_state(truth, cfg.integrator, cfg.cache_dir, cfg.settle_samples);

    Dataset d;
    d.scenario = scenario;
    d.seed = seed;
    d.segments.resize(plans.size());
    for (std::size_t i = 0; i < plans.size(); ++i) {
        const auto& plan = plans[i];
        auto& seg = d.segments[i];
        seg.condition = plan.condition;
        seg.test_only = plan.test_only;
        const auto loads = make_disturbance_profile(LoadSampler::for_condition(plan.condition, scenario.load_std),
                                                    plan.length, derive_seed(seed, i, 1), scenario.load_hold);
        const auto inputs =
            make_excitation(scenario.bounds, plan.length, derive_seed(seed, i, 2), scenario.input_hold);
        seg.traj = simulate_open_loop(start.x, inputs, loads, truth, cfg.integrator);
        seg.X_fp = one_step_predictions(seg.traj, imperfect, cfg.integrator, cfg.workers);
    }
    split_and_normalize(d);
    return d;
}

// ---------------------------------------------------------------------------

void save_dataset(const std::filesystem::path& file, const Dataset& d) {
    MatrixBundle b;
    const auto& s = d.scenario;
    Eigen::MatrixXd meta(1, 8);
    meta << static_cast<double>(d.segments.size()), static_cast<double>(s.load_hold),
        static_cast<double>(s.input_hold), s.load_std, s.train_fraction, s.val_fraction,
        static_cast<double>(d.seed >> 32), static_cast<double>(d.seed & 0xffffffffULL);
    b["meta"] = meta;
    Eigen::MatrixXd mix(static_cast<Eigen::Index>(s.mix.size()), 2);
    for (std::size_t i = 0; i < s.mix.size(); ++i)
        mix.row(static_cast<Eigen::Index>(i)) << s.mix[i].condition, s.mix[i].fraction;
    b["mix"] = mix;
    Eigen::MatrixXd bounds(2, kNu);
    for (int i = 0; i < kNu; ++i) {
        bounds(0, i) = s.bounds.lower[i];
        bounds(1, i) = s.bounds.upper[i];
    }
    b["bounds"] = bounds;
    for (std::size_t i = 0; i < d.segments.size(); ++i) {
        const auto& seg = d.segments[i];
        const std::string p = "seg" + std::to_string(i) + ".";
        Eigen::MatrixXd info(1, 7);
        info << seg.condition, seg.test_only ? 1.0 : 0.0, static_cast<double>(seg.train_end),
            static_cast<double>(seg.val_end), seg.traj.sample_period, static_cast<double>(seg.train_used),
            static_cast<double>(seg.val_used);
        b[p + "info"] = info;
        b[p + "X"] = seg.traj.X;
        b[p + "Z"] = seg.traj.Z;
        b[p + "U"] = seg.traj.U;
        b[p + "P"] = seg.traj.P;
        b[p + "Y"] = seg.traj.Y;
        b[p + "X_fp"] = seg.X_fp;
    }
    write_bundle(file, b);
}

Dataset load_dataset(const std::filesystem::path& file) {
    MatrixBundle b = read_bundle(file);
    auto take = [&](const std::string& key) -> const Eigen::MatrixXd& {
        auto it = b.find(key);
        if (it == b.end()) throw IoError("dataset file lacks " + key + ": " + file.string());
        return it->second;
    };
    const auto& meta = take("meta");
    Dataset d;
    auto& s = d.scenario;
    s.load_hold = static_cast<int>(meta(0, 1));
    s.input_hold = static_cast<int>(meta(0, 2));
    s.load_std = meta(0, 3);
    s.train_fraction = meta(0, 4);
    s.val_fraction = meta(0, 5);
    d.seed = (static_cast<std::uint64_t>(meta(0, 6)) << 32) | static_cast<std::uint64_t>(meta(0, 7));
    const auto& mix = take("mix");
    s.mix.clear();
    for (Eigen::Index i = 0; i < mix.rows(); ++i) s.mix.push_back({static_cast<int>(mix(i, 0)), mix(i, 1)});
    const auto& bounds = take("bounds");
    for (int i = 0; i < kNu; ++i) {
        s.bounds.lower[i] = bounds(0, i);
        s.bounds.upper[i] = bounds(1, i);
    }
    const auto count = static_cast<std::size_t>(meta(0, 0));
    s.test_only_conditions.clear();
    for (std::size_t i = 0; i < count; ++i) {
        const std::string p = "seg" + std::to_string(i) + ".";
        Segment seg;
        const auto& info = take(p + "info");
        seg.condition = static_cast<int>(info(0, 0));
        seg.test_only = info(0, 1) != 0.0;
        seg.train_end = static_cast<long>(info(0, 2));
        seg.val_end = static_cast<long>(info(0, 3));
        seg.train_used = static_cast<long>(info(0, 5));
        seg.val_used = static_cast<long>(info(0, 6));
        seg.traj.sample_period = info(0, 4);
        seg.traj.X = take(p + "X");
        seg.traj.Z = take(p + "Z");
        seg.traj.U = take(p + "U");
        seg.traj.P = take(p + "P").col(0);
        seg.traj.Y = take(p + "Y");
        seg.X_fp = take(p + "X_fp");
        if (seg.test_only) s.test_only_conditions.push_back(seg.condition);
        d.segments.push_back(std::move(seg));
    }
    s.name = s.test_only_conditions.empty() ? "case1" : "case2";
    d.stats = fit_statistics(d.records(Split::train));
    return d;
}

}  // namespace shipcc
