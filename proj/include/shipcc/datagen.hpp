#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "shipcc/integrator.hpp"

namespace shipcc {

/// Ship operational conditions and their engine-load ranges.
struct LoadRange {
    double lo = 0.0;
    double hi = 1.0;
    double mid() const { return 0.5 * (lo + hi); }
    bool contains(double v) const { return v >= lo && v <= hi; }
};

/// Condition 1 slow steaming, 2 maneuvering, 3 low engine load.
LoadRange condition_range(int condition);

/// Gaussian load draws clipped to a range. The mean defaults to the range midpoint,
/// which is 0.55 for slow steaming.
struct LoadSampler {
    LoadRange range;
    double mean = 0.55;
    double std = 0.065;

    static LoadSampler for_condition(int condition, double std = 0.065);
    double draw_unclipped(std::mt19937_64& rng) const;
    double draw(std::mt19937_64& rng) const;
};

struct ConditionShare {
    int condition = 1;
    double fraction = 1.0;
};

struct Scenario {
    std::string name = "case1";
    std::vector<ConditionShare> mix{{1, 0.6}, {2, 0.15}, {3, 0.25}};
    /// Conditions simulated only for testing (generalization studies).
    std::vector<int> test_only_conditions;
    int load_hold = 1000;
    int input_hold = 200;
    double load_std = 0.065;
    double train_fraction = 0.7;
    double val_fraction = 0.1;
    InputBox bounds;

    static Scenario case_one();
    static Scenario case_two();
    void validate() const;
};

std::vector<Disturbance> make_disturbance_profile(const LoadSampler& sampler, long length, std::uint64_t seed,
                                                  int hold = 1000);
std::vector<Disturbance> make_disturbance_profile(int condition, long length, std::uint64_t seed,
                                                  int hold = 1000, double std = 0.065);
std::vector<ControlInput> make_excitation(const InputBox& bounds, long length, std::uint64_t seed, int hold = 200);

/// Per-dimension z-score statistics. Dimensions with std below 1e-8 are flagged
/// constant: their std is floored, they normalize to 0 and denormalize to the mean.
struct Normalizer {
    Eigen::VectorXd mean;
    Eigen::VectorXd std;
    std::vector<bool> constant;

    static Normalizer fit(const Eigen::MatrixXd& data);  // features × records
    /// Zero mean, root-mean-square scale. Used for residual targets so that a zero
    /// network output maps to a zero correction.
    static Normalizer fit_scale(const Eigen::MatrixXd& data);
    static Normalizer identity(int dim);
    int dim() const { return static_cast<int>(mean.size()); }
    Eigen::MatrixXd normalize(const Eigen::MatrixXd& data) const;
    Eigen::MatrixXd denormalize(const Eigen::MatrixXd& data) const;
};

enum class Split { train, val, test };

/// One simulated trajectory together with its one-step imperfect-model predictions.
struct Segment {
    int condition = 1;
    bool test_only = false;
    Trajectory traj;
    Eigen::MatrixXd X_fp;  // N × 103, imperfect one-step prediction from record k
    long train_end = 0;    // records [0, train_end) are training
    long val_end = 0;      // [train_end, val_end) validation, [val_end, N) test
    long train_used = -1;  // when ≥ 0, only the leading records of each block are used
    long val_used = -1;

    long records() const { return traj.steps(); }
    std::pair<long, long> range(Split s) const;
};

/// Records stacked column-wise (features × records).
struct RecordSet {
    Eigen::MatrixXd X, Z, U, P, X_next, Z_next, X_err;
    long size() const { return X.cols(); }
};

struct NormalizationStats {
    Normalizer x, z, u, p, x_err;
};

struct Dataset {
    Scenario scenario;
    std::uint64_t seed = 0;
    std::vector<Segment> segments;
    NormalizationStats stats;

    RecordSet records(Split split, bool include_test_only = false) const;
    /// Records of one split restricted to segments of a single condition.
    RecordSet records(Split split, int condition) const;
    long total_records() const;
    /// Keeps the leading `fraction` of every training and validation block and leaves
    /// test blocks untouched; statistics are refit on the reduced training split.
    Dataset with_training_fraction(double fraction) const;
};

struct DatagenConfig {
    IntegratorConfig integrator;
    int workers = 1;
    int settle_samples = 5000;
    std::filesystem::path cache_dir;
};

/// Simulates the truth plant per condition share, labels every record with the
/// imperfect-model one-step mismatch, splits contiguously and fits statistics.
/// `n_samples` counts records over all splits of the mixed conditions; test-only
/// conditions get (1 − train − val)·n_samples records each. Every segment starts
/// from the nominal truth steady state.
Dataset build_dataset(const Scenario& scenario, long n_samples, std::uint64_t seed,
                      const PlantParameters& truth, const PlantParameters& imperfect,
                      const DatagenConfig& cfg = {});

/// Recomputes split boundaries and refits statistics on the training split.
void split_and_normalize(Dataset& dataset);

NormalizationStats fit_statistics(const RecordSet& train);

void save_dataset(const std::filesystem::path& file, const Dataset& d);
Dataset load_dataset(const std::filesystem::path& file);

/// Runs `fn(i)` for i in [0, n) on up to `workers` threads; order of results is the
/// caller's responsibility (write into slot i).
void parallel_for(int n, int workers, const std::function<void(int)>& fn);

}  // namespace shipcc
