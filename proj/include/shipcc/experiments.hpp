#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "shipcc/config.hpp"
#include "shipcc/control.hpp"
#include "shipcc/datagen.hpp"
#include "shipcc/hybrid.hpp"

namespace shipcc {

using Logger = std::function<void(const std::string&)>;

/// Writes files into a run directory. Rewriting a file with different content is an
/// error; identical content is accepted silently.
class ArtifactWriter {
public:
    explicit ArtifactWriter(std::filesystem::path dir);
    const std::filesystem::path& dir() const { return dir_; }
    std::filesystem::path write(const std::string& name, const std::string& content) const;

private:
    std::filesystem::path dir_;
};

/// <output_dir>/<command>-<config hash>
std::filesystem::path run_directory(const RunConfig& cfg, const std::string& command);

/// Dataset for (scenario, n, seed), reused from the cache directory when present.
Dataset obtain_dataset(const RunConfig& cfg, const Scenario& scenario, long n_samples, std::uint64_t seed,
                       const Logger& log = {});

struct TrainedHybrid {
    HybridModel model;
    TrainingCurve inference_curve;
    TrainingCurve compensation_curve;
};

TrainedHybrid obtain_hybrid(const RunConfig& cfg, const Dataset& d, const std::string& data_key,
                            std::uint64_t seed, const Logger& log = {});
BlackboxModel obtain_blackbox(const RunConfig& cfg, const Dataset& d, const std::string& data_key,
                              BlackboxVariant v, std::uint64_t seed, TrainingCurve* curve = nullptr,
                              const Logger& log = {});

/// Identifies a dataset for cache keys.
std::string dataset_key(const RunConfig& cfg, const Scenario& scenario, long n_samples, std::uint64_t seed);

struct ModelScore {
    std::uint64_t seed = 0;
    long train_samples = 0;
    int condition = 0;  // 0 pools all conditions
    std::string model;
    RolloutError error;
};

struct EvaluationModels {
    const HybridModel* hybrid = nullptr;
    std::map<std::string, const BlackboxModel*> blackbox;
    const PlantParameters* imperfect = nullptr;
};

/// Open-loop rollouts from the start of every test block (length capped by
/// `rollout_steps`), scored in the units of `reference`. A rollout that fails is
/// scored as infinite.
std::vector<ModelScore> score_models(const Dataset& d, const NormalizationStats& reference,
                                     const EvaluationModels& models, const RunConfig& cfg, std::uint64_t seed,
                                     long train_samples, const ArtifactWriter* comparison_out = nullptr);

struct ModelingReport {
    std::filesystem::path dir;
    std::vector<ModelScore> rows;

    /// Seed-averaged score of `model` trained on `train_samples` (0: any size).
    double mean_x(const std::string& model, int condition, long train_samples = 0) const;
    double mean_z(const std::string& model, int condition, long train_samples = 0) const;
};

ModelingReport run_case_one(const RunConfig& cfg, const Logger& log = {});
ModelingReport run_case_two(const RunConfig& cfg, const Logger& log = {});
ModelingReport run_data_efficiency(const RunConfig& cfg, const Logger& log = {});

struct ControlScore {
    std::string controller;
    std::string model;
    double average_cost = 0.0;
    double average_capture = 0.0;
    double predicted_feasible = 0.0;
    double plant_violation = 0.0;
    double mean_solve_seconds = 0.0;
    bool inputs_in_box = true;
    long samples = 0;
};

struct ControlReport {
    std::filesystem::path dir;
    std::vector<ControlScore> rows;
    std::map<std::string, Setpoint> setpoints;

    const ControlScore* find(const std::string& controller, const std::string& model) const;
};

ControlReport run_control_comparison(const RunConfig& cfg, const Logger& log = {});

/// Single-purpose commands.
std::filesystem::path cmd_simulate(const RunConfig& cfg, const Logger& log = {});
std::filesystem::path cmd_gen_data(const RunConfig& cfg, const Logger& log = {});
std::filesystem::path cmd_train(const RunConfig& cfg, const Logger& log = {});
ModelingReport cmd_evaluate(const RunConfig& cfg, const Logger& log = {});

/// Dispatches on the experiment name.
std::filesystem::path cmd_experiment(const RunConfig& cfg, const std::string& which, const Logger& log = {});

}  // namespace shipcc
