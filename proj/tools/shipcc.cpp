#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "shipcc/config.hpp"
#include "shipcc/errors.hpp"
#include "shipcc/experiments.hpp"

namespace {

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> param_set;
    std::optional<int> workers;
    std::optional<std::string> out;
    bool quiet = false;
};

shipcc::RunConfig resolve(const Overrides& o) {
    shipcc::RunConfig cfg = shipcc::load_config(o.config);
    if (o.seed) {
        cfg.seed = *o.seed;
        cfg.seeds = {*o.seed};
    }
    if (o.param_set) cfg.param_set = *o.param_set;
    if (o.workers) cfg.workers = *o.workers;
    if (o.out) cfg.output_dir = *o.out;
    cfg.validate();
    return cfg;
}

shipcc::Logger make_logger(bool quiet) {
    if (quiet) return {};
    const auto t0 = std::chrono::steady_clock::now();
    return [t0](const std::string& msg) {
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::fprintf(stderr, "[%8.1fs] %s\n", s, msg.c_str());
    };
}

void print_modeling(const shipcc::ModelingReport& r) {
    std::cout << "condition,model,train_samples,x_mse,z_mse\n";
    std::map<std::tuple<int, std::string, long>, bool> seen;
    for (const auto& row : r.rows) {
        auto key = std::make_tuple(row.condition, row.model, row.train_samples);
        if (seen[key]) continue;
        seen[key] = true;
        std::cout << row.condition << ',' << row.model << ',' << row.train_samples << ','
                  << r.mean_x(row.model, row.condition, row.train_samples) << ','
                  << r.mean_z(row.model, row.condition, row.train_samples) << '\n';
    }
    std::cout << "artifacts: " << r.dir.string() << '\n';
}

void print_control(const shipcc::ControlReport& r) {
    std::cout << "controller,model,average_cost_rate,average_capture_rate,predicted_feasible_fraction\n";
    for (const auto& row : r.rows)
        std::cout << row.controller << ',' << row.model << ',' << row.average_cost << ',' << row.average_capture
                  << ',' << row.predicted_feasible << '\n';
    std::cout << "artifacts: " << r.dir.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Ship carbon-capture simulation, hybrid modeling and economic MPC"};
    app.require_subcommand(1);
    Overrides o;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "YAML run configuration")->required();
        sub->add_option("--seed", o.seed, "Override the seed (and the seed list of multi-seed experiments)");
        sub->add_option("--param-set", o.param_set, "Plant parameters for simulate")
            ->check(CLI::IsMember({"truth", "imperfect"}));
        sub->add_option("--workers", o.workers, "Worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--out", o.out, "Output directory");
        sub->add_flag("--quiet", o.quiet, "No progress messages");
    };

    auto* simulate = app.add_subcommand("simulate", "Open-loop simulation to trajectory CSV/binary");
    auto* gen = app.add_subcommand("gen-data", "Generate and split a training dataset");
    auto* train = app.add_subcommand("train", "Train the hybrid and black-box networks");
    auto* evaluate = app.add_subcommand("evaluate", "Open-loop rollout MSE on the test split");
    auto* control = app.add_subcommand("control", "Closed-loop controller comparison");
    auto* experiment = app.add_subcommand("experiment", "Run a named study");
    std::string which;
    experiment->add_option("which", which,
                           "caseI-modeling | caseII-modeling | data-efficiency | control-comparison (default: "
                           "the config's experiment key)");
    for (auto* sub : {simulate, gen, train, evaluate, control, experiment}) add_common(sub);

    CLI11_PARSE(app, argc, argv);

    try {
        const shipcc::RunConfig cfg = resolve(o);
        const auto log = make_logger(o.quiet);
        if (simulate->parsed()) {
            std::cout << "artifacts: " << shipcc::cmd_simulate(cfg, log).string() << '\n';
        } else if (gen->parsed()) {
            std::cout << "artifacts: " << shipcc::cmd_gen_data(cfg, log).string() << '\n';
        } else if (train->parsed()) {
            std::cout << "artifacts: " << shipcc::cmd_train(cfg, log).string() << '\n';
        } else if (evaluate->parsed()) {
            print_modeling(shipcc::cmd_evaluate(cfg, log));
        } else if (control->parsed()) {
            print_control(shipcc::run_control_comparison(cfg, log));
        } else {
            if (which.empty()) which = cfg.experiment;
            if (which.empty()) throw shipcc::ConfigError("no experiment named on the command line or in the config");
            if (which == "control-comparison")
                print_control(shipcc::run_control_comparison(cfg, log));
            else if (which == "caseI-modeling")
                print_modeling(shipcc::run_case_one(cfg, log));
            else if (which == "caseII-modeling")
                print_modeling(shipcc::run_case_two(cfg, log));
            else if (which == "data-efficiency")
                print_modeling(shipcc::run_data_efficiency(cfg, log));
            else
                shipcc::cmd_experiment(cfg, which, log);
        }
    } catch (const shipcc::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
