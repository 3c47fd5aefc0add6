#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "shipcc/control.hpp"
#include "shipcc/datagen.hpp"
#include "shipcc/integrator.hpp"
#include "shipcc/training.hpp"

namespace shipcc {

struct SimulateSection {
    long samples = 1000;
    bool excitation = true;      // random piecewise-constant inputs, else `inputs` held
    ControlInput inputs;
    int condition = 1;           // load profile drawn from this condition's range
    bool from_steady_state = true;
};

struct DataSection {
    Scenario scenario = Scenario::case_one();
    long n_samples = 20000;
    double mismatch_scale = 1.0;  // size of the imperfect-model perturbation
};

struct EvaluationSection {
    long rollout_steps = 1800;
};

struct EfficiencySection {
    std::vector<long> sizes{5000, 10000, 15000, 20000};
};

struct ProfileSection {
    int condition = 1;
    int hold = 400;
    double std = 0.065;
    std::uint64_t seed = 11;
};

struct ControlSection {
    std::vector<std::string> controllers{"EMPC/hybrid", "MPC/hybrid", "EMPC/imperfect", "MPC/imperfect"};
    ClosedLoopConfig loop;
    ProfileSection profile;
    std::array<double, kNy> Q{3.0, 10.0};
    std::array<double, kNu> R{0.08, 0.08, 0.08};
    SetpointConfig setpoint;
    long train_samples = 20000;  // data used to fit the hybrid model for control
};

struct RunConfig {
    std::string experiment;  // caseI-modeling | caseII-modeling | data-efficiency | control-comparison
    std::uint64_t seed = 1;
    std::vector<std::uint64_t> seeds{1, 2, 3};
    std::string param_set = "truth";
    int workers = 1;
    std::filesystem::path output_dir = "runs";
    std::filesystem::path cache_dir;  // empty: <output_dir>/cache
    IntegratorConfig integrator;
    int settle_samples = 5000;
    SimulateSection simulate;
    DataSection data;
    TrainConfig training;
    EvaluationSection evaluation;
    EfficiencySection efficiency;
    ControlSection control;

    void validate() const;
    std::filesystem::path resolved_cache_dir() const;
};

RunConfig parse_config(const std::string& yaml_text);
RunConfig load_config(const std::filesystem::path& file);

/// Canonical YAML of every field that affects results. Worker count and directories
/// are only written with `include_runtime`, so they never change the hash.
std::string dump_config(const RunConfig& cfg, bool include_runtime = false);
std::string config_hash(const RunConfig& cfg);

}  // namespace shipcc
