#include "shipcc/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "shipcc/errors.hpp"
#include "shipcc/hash.hpp"
#include "shipcc/trajectory_io.hpp"

namespace shipcc {

using nlohmann::json;

namespace {

void say(const Logger& log, const std::string& msg) {
    if (log) log(msg);
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    if (!is) throw IoError("cannot read " + p.string());
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

// Runs one pipeline stage and prefixes any failure with its name and seed.
template <class F>
auto stage(const std::string& name, std::uint64_t seed, F&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const StepFailure& e) {
        throw StepFailure("stage " + name + " (seed " + std::to_string(seed) + "): " + e.what(), e.index());
    } catch (const Error& e) {
        throw Error("stage " + name + " (seed " + std::to_string(seed) + "): " + e.what());
    }
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string manifest(const RunConfig& cfg, const std::string& command, const std::vector<std::uint64_t>& seeds,
                     json extra = json::object()) {
    json m;
    m["command"] = command;
    m["config_hash"] = config_hash(cfg);
    m["seeds"] = seeds;
    m["config"] = dump_config(cfg);
    for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
    return m.dump(2) + "\n";
}

PlantParameters imperfect_params(const RunConfig& cfg) {
    return PlantParameters::mismatch_scaled(cfg.data.mismatch_scale);
}

DatagenConfig datagen_config(const RunConfig& cfg) {
    DatagenConfig dc;
    dc.integrator = cfg.integrator;
    dc.workers = cfg.workers;
    dc.settle_samples = cfg.settle_samples;
    dc.cache_dir = cfg.resolved_cache_dir();
    return dc;
}

std::string scenario_key(const Scenario& s) {
    std::ostringstream os;
    os << s.name << ";mix=";
    for (const auto& m : s.mix) os << m.condition << ':' << format_double(m.fraction) << ',';
    os << ";test=";
    for (int c : s.test_only_conditions) os << c << ',';
    os << ";hold=" << s.load_hold << ',' << s.input_hold << ";std=" << format_double(s.load_std)
       << ";split=" << format_double(s.train_fraction) << ',' << format_double(s.val_fraction) << ";box=";
    for (int i = 0; i < kNu; ++i) os << format_double(s.bounds.lower[i]) << ',' << format_double(s.bounds.upper[i]) << ',';
    return os.str();
}

std::string training_key(const TrainConfig& t) {
    std::ostringstream os;
    os << "batch=" << t.batch_size << ";epochs=" << t.epochs << ";patience=" << t.patience
       << ";lr=" << format_double(t.adam.learning_rate) << ";b1=" << format_double(t.adam.beta1)
       << ";b2=" << format_double(t.adam.beta2) << ";eps=" << format_double(t.adam.epsilon) << ";seed=" << t.seed;
    return os.str();
}

void put_net(MatrixBundle& b, const std::string& prefix, const Mlp& net) {
    Eigen::MatrixXd sizes(1, static_cast<Eigen::Index>(net.sizes().size()));
    for (std::size_t i = 0; i < net.sizes().size(); ++i) sizes(0, static_cast<Eigen::Index>(i)) = net.sizes()[i];
    b[prefix + ".sizes"] = sizes;
    for (int l = 0; l < net.layers(); ++l) {
        b[prefix + ".W" + std::to_string(l)] = net.weight(l);
        b[prefix + ".b" + std::to_string(l)] = net.bias(l);
    }
}

Mlp get_net(MatrixBundle& b, const std::string& prefix) {
    const auto& sz = b.at(prefix + ".sizes");
    std::vector<int> sizes;
    for (Eigen::Index i = 0; i < sz.cols(); ++i) sizes.push_back(static_cast<int>(sz(0, i)));
    Mlp net(sizes);
    for (int l = 0; l < net.layers(); ++l) {
        net.weight(l) = b.at(prefix + ".W" + std::to_string(l));
        net.bias(l) = b.at(prefix + ".b" + std::to_string(l)).col(0);
    }
    return net;
}

void put_curve(MatrixBundle& b, const std::string& prefix, const TrainingCurve& c) {
    const auto n = static_cast<Eigen::Index>(c.train_mse.size());
    Eigen::MatrixXd m(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        m(i, 0) = c.train_mse[static_cast<std::size_t>(i)];
        m(i, 1) = c.val_mse[static_cast<std::size_t>(i)];
    }
    b[prefix + ".curve"] = m;
    b[prefix + ".best"] = (Eigen::MatrixXd(1, 2) << c.best_epoch, c.best_val).finished();
}

TrainingCurve get_curve(MatrixBundle& b, const std::string& prefix) {
    TrainingCurve c;
    const auto& m = b.at(prefix + ".curve");
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        c.train_mse.push_back(m(i, 0));
        c.val_mse.push_back(m(i, 1));
    }
    const auto& best = b.at(prefix + ".best");
    c.best_epoch = static_cast<int>(best(0, 0));
    c.best_val = best(0, 1);
    return c;
}

std::string curves_csv(const std::vector<std::pair<std::string, const TrainingCurve*>>& curves) {
    std::ostringstream os;
    os << "epoch";
    std::size_t rows = 0;
    for (const auto& [name, c] : curves) {
        os << ',' << name << "_train," << name << "_val";
        rows = std::max(rows, c->train_mse.size());
    }
    os << '\n';
    for (std::size_t e = 0; e < rows; ++e) {
        os << e;
        for (const auto& [name, c] : curves) {
            if (e < c->train_mse.size())
                os << ',' << format_double(c->train_mse[e]) << ',' << format_double(c->val_mse[e]);
            else
                os << ",,";
        }
        os << '\n';
    }
    return os.str();
}

std::string scores_csv(const std::vector<ModelScore>& rows) {
    std::ostringstream os;
    os << "seed,train_samples,condition,model,x_mse,z_mse,steps\n";
    for (const auto& r : rows)
        os << r.seed << ',' << r.train_samples << ',' << r.condition << ',' << r.model << ','
           << format_double(r.error.x_mse) << ',' << format_double(r.error.z_mse) << ',' << r.error.points << '\n';
    return os.str();
}

Scenario forced_scenario(const RunConfig& cfg, const Scenario& preset) {
    Scenario s = cfg.data.scenario;
    s.name = preset.name;
    s.mix = preset.mix;
    s.test_only_conditions = preset.test_only_conditions;
    return s;
}

json report_json(const ModelingReport& r, const std::vector<std::string>& models, const std::vector<int>& conditions,
                 const std::vector<long>& sizes) {
    json table = json::array();
    for (long n : sizes)
        for (const auto& m : models)
            for (int c : conditions) {
                json row;
                row["model"] = m;
                row["condition"] = c;
                row["train_samples"] = n;
                row["x_mse"] = finite_or_null(r.mean_x(m, c, n));
                row["z_mse"] = finite_or_null(r.mean_z(m, c, n));
                table.push_back(row);
            }
    return table;
}

}  // namespace

// ---------------------------------------------------------------------------

ArtifactWriter::ArtifactWriter(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
}

std::filesystem::path ArtifactWriter::write(const std::string& name, const std::string& content) const {
    const auto path = dir_ / name;
    if (std::filesystem::exists(path)) {
        if (read_file(path) == content) return path;
        throw IoError("refusing to overwrite " + path.string() + " with different content for the same config hash");
    }
    const auto tmp = dir_ / (name + ".partial");
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw IoError("cannot write " + tmp.string());
        os << content;
    }
    std::filesystem::rename(tmp, path);
    return path;
}

std::filesystem::path run_directory(const RunConfig& cfg, const std::string& command) {
    return cfg.output_dir / (command + "-" + config_hash(cfg));
}

std::string dataset_key(const RunConfig& cfg, const Scenario& scenario, long n_samples, std::uint64_t seed) {
    std::ostringstream os;
    os << PlantParameters::truth().canonical() << '|' << imperfect_params(cfg).canonical() << '|'
       << scenario_key(scenario) << "|n=" << n_samples << "|seed=" << seed << "|dt="
       << format_double(cfg.integrator.sample_period) << ',' << cfg.integrator.substeps << ','
       << format_double(cfg.integrator.newton_tol) << ',' << cfg.integrator.newton_max_iters
       << "|settle=" << cfg.settle_samples;
    return os.str();
}

Dataset obtain_dataset(const RunConfig& cfg, const Scenario& scenario, long n_samples, std::uint64_t seed,
                       const Logger& log) {
    const auto dir = cfg.resolved_cache_dir();
    const auto file = dir / ("dataset_" + hex_digest(dataset_key(cfg, scenario, n_samples, seed)) + ".bin");
    if (std::filesystem::exists(file)) {
        say(log, "dataset cache hit: " + file.filename().string());
        Dataset d = load_dataset(file);
        d.scenario.name = scenario.name;
        return d;
    }
    say(log, "simulating " + scenario.name + " dataset: " + std::to_string(n_samples) + " samples, seed " +
                 std::to_string(seed));
    Dataset d = build_dataset(scenario, n_samples, seed, PlantParameters::truth(), imperfect_params(cfg),
                              datagen_config(cfg));
    std::filesystem::create_directories(dir);
    const auto tmp = dir / (file.filename().string() + ".partial");
    save_dataset(tmp, d);
    std::filesystem::rename(tmp, file);
    return d;
}

TrainedHybrid obtain_hybrid(const RunConfig& cfg, const Dataset& d, const std::string& data_key, std::uint64_t seed,
                            const Logger& log) {
    TrainConfig tc = cfg.training;
    tc.seed = seed;
    const auto file = cfg.resolved_cache_dir() / ("hybrid_" + hex_digest(data_key + "|hybrid|" + training_key(tc)) + ".bin");
    TrainedHybrid out;
    out.model.params = imperfect_params(cfg);
    out.model.integrator = cfg.integrator;
    out.model.stats = d.stats;
    if (std::filesystem::exists(file)) {
        say(log, "hybrid model cache hit: " + file.filename().string());
        MatrixBundle b = read_bundle(file);
        out.model.inference = get_net(b, "inference");
        out.model.compensation = get_net(b, "compensation");
        out.inference_curve = get_curve(b, "inference");
        out.compensation_curve = get_curve(b, "compensation");
        return out;
    }
    say(log, "training algebraic-state inference net (" + std::to_string(d.records(Split::train).size()) +
                 " records)");
    TrainResult inf = train_inference_net(d, tc);
    say(log, "training state compensation net");
    TrainResult comp = train_compensation_net(d, tc);
    out.model.inference = inf.net;
    out.model.compensation = comp.net;
    out.inference_curve = inf.curve;
    out.compensation_curve = comp.curve;
    MatrixBundle b;
    put_net(b, "inference", inf.net);
    put_net(b, "compensation", comp.net);
    put_curve(b, "inference", inf.curve);
    put_curve(b, "compensation", comp.curve);
    std::filesystem::create_directories(file.parent_path());
    const auto tmp = file.parent_path() / (file.filename().string() + ".partial");
    write_bundle(tmp, b);
    std::filesystem::rename(tmp, file);
    return out;
}

BlackboxModel obtain_blackbox(const RunConfig& cfg, const Dataset& d, const std::string& data_key, BlackboxVariant v,
                              std::uint64_t seed, TrainingCurve* curve, const Logger& log) {
    TrainConfig tc = cfg.training;
    tc.seed = seed;
    const auto file = cfg.resolved_cache_dir() /
                      ("blackbox_" + hex_digest(data_key + "|" + to_string(v) + "|" + training_key(tc)) + ".bin");
    BlackboxModel out;
    out.variant = v;
    out.stats = d.stats;
    if (std::filesystem::exists(file)) {
        say(log, to_string(v) + " cache hit: " + file.filename().string());
        MatrixBundle b = read_bundle(file);
        out.net = get_net(b, "net");
        if (curve) *curve = get_curve(b, "net");
        return out;
    }
    say(log, "training black-box " + to_string(v));
    TrainResult r = train_blackbox_net(d, v, tc);
    out.net = r.net;
    if (curve) *curve = r.curve;
    MatrixBundle b;
    put_net(b, "net", r.net);
    put_curve(b, "net", r.curve);
    std::filesystem::create_directories(file.parent_path());
    const auto tmp = file.parent_path() / (file.filename().string() + ".partial");
    write_bundle(tmp, b);
    std::filesystem::rename(tmp, file);
    return out;
}

// ---------------------------------------------------------------------------

std::vector<ModelScore> score_models(const Dataset& d, const NormalizationStats& reference,
                                     const EvaluationModels& models, const RunConfig& cfg, std::uint64_t seed,
                                     long train_samples, const ArtifactWriter* comparison_out) {
    std::map<std::string, std::map<int, std::vector<RolloutError>>> parts;
    for (const auto& seg : d.segments) {
        const long begin = seg.val_end;
        const long N = std::min(cfg.evaluation.rollout_steps, seg.records() - begin);
        if (N < 1) continue;
        const RolloutWindow w = rollout_window(seg.traj, begin, N);
        std::map<std::string, Rollout> rollouts;
        auto run = [&](const std::string& name, auto&& fn) {
            try {
                Rollout r = fn();
                parts[name][seg.condition].push_back(rollout_error(reference, w, r));
                rollouts[name] = std::move(r);
            } catch (const Error&) {
                RolloutError failed;
                failed.x_mse = failed.z_mse = std::numeric_limits<double>::infinity();
                failed.points = N;
                parts[name][seg.condition].push_back(failed);
            }
        };
        if (models.hybrid) run("hybrid", [&] { return hybrid_rollout(*models.hybrid, w.x0, w.u, w.p, N); });
        if (models.imperfect)
            run("imperfect-FP", [&] { return physics_rollout(*models.imperfect, w.x0, w.u, w.p, N, cfg.integrator); });
        for (const auto& [name, bb] : models.blackbox)
            run(name, [&] { return blackbox_rollout(*bb, w.x0, w.z0, w.u, w.p, N); });
        if (comparison_out)
            comparison_out->write("rollout_seed" + std::to_string(seed) + "_n" + std::to_string(train_samples) +
                                      "_condition" + std::to_string(seg.condition) + ".csv",
                                  rollout_comparison_csv(w, rollouts));
    }
    std::vector<ModelScore> rows;
    for (const auto& [name, by_cond] : parts) {
        std::vector<RolloutError> all;
        for (const auto& [cond, errs] : by_cond) {
            rows.push_back({seed, train_samples, cond, name, pool(errs)});
            all.insert(all.end(), errs.begin(), errs.end());
        }
        rows.push_back({seed, train_samples, 0, name, pool(all)});
    }
    return rows;
}

namespace {

double mean_of(const std::vector<ModelScore>& rows, const std::string& model, int condition, long n, bool x) {
    double sum = 0.0;
    int count = 0;
    for (const auto& r : rows) {
        if (r.model != model || r.condition != condition || (n != 0 && r.train_samples != n)) continue;
        sum += x ? r.error.x_mse : r.error.z_mse;
        ++count;
    }
    return count ? sum / count : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

double ModelingReport::mean_x(const std::string& model, int condition, long n) const {
    return mean_of(rows, model, condition, n, true);
}

double ModelingReport::mean_z(const std::string& model, int condition, long n) const {
    return mean_of(rows, model, condition, n, false);
}

ModelingReport run_case_one(const RunConfig& cfg, const Logger& log) {
    ModelingReport rep;
    rep.dir = run_directory(cfg, "caseI-modeling");
    ArtifactWriter out(rep.dir);
    const Scenario sc = forced_scenario(cfg, Scenario::case_one());
    const PlantParameters imperfect = imperfect_params(cfg);
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
        const auto seed = cfg.seeds[i];
        const Dataset d = stage("datagen", seed, [&] { return obtain_dataset(cfg, sc, cfg.data.n_samples, seed, log); });
        const std::string key = dataset_key(cfg, sc, cfg.data.n_samples, seed);
        const TrainedHybrid h = stage("train", seed, [&] { return obtain_hybrid(cfg, d, key, seed, log); });
        out.write("curves_seed" + std::to_string(seed) + ".csv",
                  curves_csv({{"inference", &h.inference_curve}, {"compensation", &h.compensation_curve}}));
        EvaluationModels m;
        m.hybrid = &h.model;
        m.imperfect = &imperfect;
        auto rows = stage("evaluate", seed, [&] {
            return score_models(d, d.stats, m, cfg, seed, cfg.data.n_samples, i == 0 ? &out : nullptr);
        });
        rep.rows.insert(rep.rows.end(), rows.begin(), rows.end());
    }
    out.write("mse.csv", scores_csv(rep.rows));
    json summary;
    summary["table"] = report_json(rep, {"hybrid", "imperfect-FP"}, {0, 1, 2, 3}, {cfg.data.n_samples});
    out.write("summary.json", summary.dump(2) + "\n");
    out.write("manifest.json", manifest(cfg, "caseI-modeling", cfg.seeds));
    return rep;
}

ModelingReport run_case_two(const RunConfig& cfg, const Logger& log) {
    ModelingReport rep;
    rep.dir = run_directory(cfg, "caseII-modeling");
    ArtifactWriter out(rep.dir);
    const Scenario sc = forced_scenario(cfg, Scenario::case_two());
    const PlantParameters imperfect = imperfect_params(cfg);
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
        const auto seed = cfg.seeds[i];
        const Dataset d = stage("datagen", seed, [&] { return obtain_dataset(cfg, sc, cfg.data.n_samples, seed, log); });
        const std::string key = dataset_key(cfg, sc, cfg.data.n_samples, seed);
        const TrainedHybrid h = stage("train", seed, [&] { return obtain_hybrid(cfg, d, key, seed, log); });
        TrainingCurve c1, c2;
        const BlackboxModel nn1 =
            stage("train", seed, [&] { return obtain_blackbox(cfg, d, key, BlackboxVariant::nn1, seed, &c1, log); });
        const BlackboxModel nn2 =
            stage("train", seed, [&] { return obtain_blackbox(cfg, d, key, BlackboxVariant::nn2, seed, &c2, log); });
        out.write("curves_seed" + std::to_string(seed) + ".csv",
                  curves_csv({{"inference", &h.inference_curve},
                              {"compensation", &h.compensation_curve},
                              {"NN1", &c1},
                              {"NN2", &c2}}));
        EvaluationModels m;
        m.hybrid = &h.model;
        m.imperfect = &imperfect;
        m.blackbox["NN1"] = &nn1;
        m.blackbox["NN2"] = &nn2;
        auto rows = stage("evaluate", seed, [&] {
            return score_models(d, d.stats, m, cfg, seed, cfg.data.n_samples, i == 0 ? &out : nullptr);
        });
        rep.rows.insert(rep.rows.end(), rows.begin(), rows.end());
    }
    out.write("mse.csv", scores_csv(rep.rows));
    json summary;
    summary["table"] = report_json(rep, {"hybrid", "imperfect-FP", "NN1", "NN2"}, {1, 2, 3}, {cfg.data.n_samples});
    out.write("summary.json", summary.dump(2) + "\n");
    out.write("manifest.json", manifest(cfg, "caseII-modeling", cfg.seeds));
    return rep;
}

ModelingReport run_data_efficiency(const RunConfig& cfg, const Logger& log) {
    ModelingReport rep;
    rep.dir = run_directory(cfg, "data-efficiency");
    ArtifactWriter out(rep.dir);
    const Scenario sc = forced_scenario(cfg, Scenario::case_one());
    const long n_max = *std::max_element(cfg.efficiency.sizes.begin(), cfg.efficiency.sizes.end());
    for (const auto seed : cfg.seeds) {
        const Dataset full = stage("datagen", seed, [&] { return obtain_dataset(cfg, sc, n_max, seed, log); });
        const std::string base_key = dataset_key(cfg, sc, n_max, seed);
        for (long n : cfg.efficiency.sizes) {
            const double fraction = static_cast<double>(n) / static_cast<double>(n_max);
            const Dataset sub = n == n_max ? full : full.with_training_fraction(fraction);
            const std::string key = n == n_max ? base_key : base_key + "|fraction=" + format_double(fraction);
            say(log, "data size " + std::to_string(n));
            const TrainedHybrid h = stage("train", seed, [&] { return obtain_hybrid(cfg, sub, key, seed, log); });
            TrainingCurve c2;
            const BlackboxModel nn2 =
                stage("train", seed, [&] { return obtain_blackbox(cfg, sub, key, BlackboxVariant::nn2, seed, &c2, log); });
            out.write("curves_seed" + std::to_string(seed) + "_n" + std::to_string(n) + ".csv",
                      curves_csv({{"inference", &h.inference_curve}, {"compensation", &h.compensation_curve}, {"NN2", &c2}}));
            EvaluationModels m;
            m.hybrid = &h.model;
            m.blackbox["NN2"] = &nn2;
            auto rows = stage("evaluate", seed, [&] { return score_models(full, full.stats, m, cfg, seed, n); });
            rep.rows.insert(rep.rows.end(), rows.begin(), rows.end());
        }
    }
    out.write("mse.csv", scores_csv(rep.rows));
    json summary;
    summary["table"] = report_json(rep, {"hybrid", "NN2"}, {0}, cfg.efficiency.sizes);
    out.write("summary.json", summary.dump(2) + "\n");
    out.write("manifest.json", manifest(cfg, "data-efficiency", cfg.seeds));
    return rep;
}

// ---------------------------------------------------------------------------

const ControlScore* ControlReport::find(const std::string& controller, const std::string& model) const {
    for (const auto& r : rows)
        if (r.controller == controller && r.model == model) return &r;
    return nullptr;
}

ControlReport run_control_comparison(const RunConfig& cfg, const Logger& log) {
    ControlReport rep;
    rep.dir = run_directory(cfg, "control-comparison");
    ArtifactWriter out(rep.dir);
    const auto seed = cfg.seed;
    const auto& ctl = cfg.control;
    const Scenario sc = forced_scenario(cfg, Scenario::case_one());
    const PlantParameters truth = PlantParameters::truth();

    bool need_hybrid = false;
    for (const auto& c : ctl.controllers) need_hybrid |= c.ends_with("/hybrid");
    std::optional<TrainedHybrid> h;
    if (need_hybrid) {
        const Dataset d = stage("datagen", seed, [&] { return obtain_dataset(cfg, sc, ctl.train_samples, seed, log); });
        const std::string key = dataset_key(cfg, sc, ctl.train_samples, seed);
        h = stage("train", seed, [&] { return obtain_hybrid(cfg, d, key, seed, log); });
    }
    const SteadyState start = stage("steady-state", seed, [&] {
        return nominal_steady_state(truth, cfg.integrator, cfg.resolved_cache_dir(), cfg.settle_samples);
    });
    const long total = static_cast<long>(ctl.loop.control_steps) * ctl.loop.control_interval;
    LoadSampler sampler = LoadSampler::for_condition(ctl.profile.condition, ctl.profile.std);
    const auto profile = make_disturbance_profile(sampler, total, ctl.profile.seed, ctl.profile.hold);
    {
        std::ostringstream os;
        os << "k,phi_E\n";
        for (long k = 0; k < total; ++k) os << k << ',' << format_double(profile[static_cast<std::size_t>(k)].phi_E) << '\n';
        out.write("load_profile.csv", os.str());
    }

    std::unique_ptr<PredictionModel> hybrid_pred, imperfect_pred;
    if (h) hybrid_pred = std::make_unique<HybridPredictor>(h->model);
    imperfect_pred = std::make_unique<PhysicsPredictor>(imperfect_params(cfg), cfg.integrator);

    ClosedLoopConfig loop = ctl.loop;
    loop.integrator = cfg.integrator;
    loop.ce.workers = cfg.workers;
    SetpointConfig spc = ctl.setpoint;
    spc.workers = cfg.workers;

    json summary = json::array();
    std::ostringstream table;
    table << "controller,model,average_cost_rate,average_capture_rate,predicted_feasible_fraction,"
             "plant_violation_fraction,inputs_in_box,samples\n";
    for (const auto& name : ctl.controllers) {
        const auto slash = name.find('/');
        const std::string kind_name = name.substr(0, slash);
        const std::string model_name = name.substr(slash + 1);
        const ControllerKind kind = kind_name == "EMPC" ? ControllerKind::empc : ControllerKind::mpc;
        const PredictionModel& model = model_name == "hybrid" ? *hybrid_pred : *imperfect_pred;

        std::optional<TrackingConfig> tracking;
        if (kind == ControllerKind::mpc) {
            if (!rep.setpoints.count(model_name)) {
                say(log, "steady-state optimization for the " + model_name + " model");
                rep.setpoints[model_name] = stage("setpoint", seed, [&] {
                    return compute_setpoint(model, start.x, Disturbance{sampler.mean}, loop.economic,
                                            loop.ce.input_box, loop.ce.output_box, spc);
                });
            }
            const Setpoint& sp = rep.setpoints.at(model_name);
            TrackingConfig tc;
            tc.y_s = sp.y_s;
            tc.u_s = sp.u_s;
            tc.Q = ctl.Q;
            tc.R = ctl.R;
            tracking = tc;
        }
        say(log, "closed loop " + name + " (" + std::to_string(loop.control_steps) + " control steps)");
        const ClosedLoopTrace t = stage("control " + name, seed, [&] {
            return closed_loop_run(truth, model, kind, tracking ? &*tracking : nullptr, start.x, start.z, profile, loop);
        });
        std::string file = "closed_loop_" + kind_name + "_" + model_name + ".csv";
        out.write(file, closed_loop_csv(t, cfg.integrator.sample_period));

        ControlScore s;
        s.controller = kind_name;
        s.model = model_name == "hybrid" ? "hybrid" : "imperfect-FP";
        s.average_cost = t.average_cost();
        s.average_capture = t.average_capture();
        s.predicted_feasible = t.predicted_feasible_fraction();
        s.plant_violation = t.plant_violation_fraction(loop.ce.output_box);
        s.samples = t.samples();
        s.inputs_in_box = std::all_of(t.u.begin(), t.u.end(), [&](const ControlInput& u) { return loop.ce.input_box.contains(u); });
        s.mean_solve_seconds = t.solve_seconds.empty() ? 0.0
                                   : std::accumulate(t.solve_seconds.begin(), t.solve_seconds.end(), 0.0) /
                                         static_cast<double>(t.solve_seconds.size());
        rep.rows.push_back(s);
        table << s.controller << ',' << s.model << ',' << format_double(s.average_cost) << ','
              << format_double(s.average_capture) << ',' << format_double(s.predicted_feasible) << ','
              << format_double(s.plant_violation) << ',' << (s.inputs_in_box ? 1 : 0) << ',' << s.samples << '\n';
        json row;
        row["controller"] = s.controller;
        row["model"] = s.model;
        row["average_cost_rate"] = s.average_cost;
        row["average_capture_rate"] = s.average_capture;
        row["predicted_feasible_fraction"] = s.predicted_feasible;
        row["plant_violation_fraction"] = s.plant_violation;
        row["inputs_in_box"] = s.inputs_in_box;
        row["mean_solve_seconds"] = s.mean_solve_seconds;
        row["solve_seconds"] = t.solve_seconds;
        summary.push_back(row);
    }
    out.write("summary.csv", table.str());
    json setpoints = json::object();
    for (const auto& [model, sp] : rep.setpoints)
        setpoints[model] = {{"F_L", sp.u_s.F_L},       {"F_fuel", sp.u_s.F_fuel}, {"F_sw", sp.u_s.F_sw},
                            {"F_CO2_out", sp.y_s.F_CO2_out}, {"T_reb", sp.y_s.T_reb}, {"cost_rate", sp.cost},
                            {"steady_residual", sp.residual}};
    // Solver wall times vary between runs, so they live in a file that is rewritten.
    {
        json timing;
        timing["controllers"] = summary;
        std::ofstream os(rep.dir / "timing.json");
        os << timing.dump(2) << "\n";
    }
    json man;
    man["setpoints"] = setpoints;
    out.write("manifest.json", manifest(cfg, "control-comparison", {seed, ctl.loop.seed, ctl.profile.seed}, man));
    return rep;
}

// ---------------------------------------------------------------------------

std::filesystem::path cmd_simulate(const RunConfig& cfg, const Logger& log) {
    const auto dir = run_directory(cfg, "simulate");
    ArtifactWriter out(dir);
    const PlantParameters params = PlantParameters::by_name(cfg.param_set);
    const auto& s = cfg.simulate;
    StateVector x0 = initial_state(params);
    if (s.from_steady_state)
        x0 = stage("steady-state", cfg.seed, [&] {
                 return nominal_steady_state(params, cfg.integrator, cfg.resolved_cache_dir(), cfg.settle_samples);
             }).x;
    std::vector<ControlInput> u =
        s.excitation ? make_excitation(cfg.data.scenario.bounds, s.samples, cfg.seed, cfg.data.scenario.input_hold)
                     : std::vector<ControlInput>(static_cast<std::size_t>(s.samples), s.inputs);
    const auto p = make_disturbance_profile(LoadSampler::for_condition(s.condition, cfg.data.scenario.load_std),
                                            s.samples, cfg.seed + 1, cfg.data.scenario.load_hold);
    say(log, "simulating " + std::to_string(s.samples) + " samples with the " + params.variant + " plant");
    const Trajectory t = stage("simulate", cfg.seed, [&] { return simulate_open_loop(x0, u, p, params, cfg.integrator); });
    const auto tmp = std::filesystem::temp_directory_path() / ("shipcc_sim_" + config_hash(cfg));
    std::filesystem::create_directories(tmp);
    write_trajectory_csv(tmp / "trajectory.csv", t);
    write_trajectory(tmp / "trajectory.bin", t);
    out.write("trajectory.csv", read_file(tmp / "trajectory.csv"));
    out.write("trajectory.bin", read_file(tmp / "trajectory.bin"));
    std::filesystem::remove_all(tmp);
    out.write("manifest.json", manifest(cfg, "simulate", {cfg.seed}, {{"param_set", params.variant}, {"samples", s.samples}}));
    return dir;
}

std::filesystem::path cmd_gen_data(const RunConfig& cfg, const Logger& log) {
    const auto dir = run_directory(cfg, "gen-data");
    ArtifactWriter out(dir);
    const Dataset d = stage("datagen", cfg.seed, [&] {
        return obtain_dataset(cfg, cfg.data.scenario, cfg.data.n_samples, cfg.seed, log);
    });
    const auto tmp = std::filesystem::temp_directory_path() / ("shipcc_data_" + config_hash(cfg) + ".bin");
    save_dataset(tmp, d);
    out.write("dataset.bin", read_file(tmp));
    std::filesystem::remove(tmp);

    std::ostringstream stats;
    stats << "group,index,mean,std,constant\n";
    auto dump = [&](const char* g, const Normalizer& n) {
        for (int i = 0; i < n.dim(); ++i)
            stats << g << ',' << i + 1 << ',' << format_double(n.mean[i]) << ',' << format_double(n.std[i]) << ','
                  << (n.constant[static_cast<std::size_t>(i)] ? 1 : 0) << '\n';
    };
    dump("x", d.stats.x);
    dump("z", d.stats.z);
    dump("u", d.stats.u);
    dump("p", d.stats.p);
    dump("x_err", d.stats.x_err);
    out.write("normalization.csv", stats.str());

    json segs = json::array();
    for (const auto& seg : d.segments)
        segs.push_back({{"condition", seg.condition},
                        {"test_only", seg.test_only},
                        {"records", seg.records()},
                        {"train", seg.range(Split::train).second - seg.range(Split::train).first},
                        {"val", seg.range(Split::val).second - seg.range(Split::val).first},
                        {"test", seg.range(Split::test).second - seg.range(Split::test).first}});
    json extra;
    extra["scenario"] = d.scenario.name;
    extra["n_samples"] = cfg.data.n_samples;
    extra["segments"] = segs;
    extra["normalization"] = "normalization.csv";
    out.write("manifest.json", manifest(cfg, "gen-data", {cfg.seed}, extra));
    return dir;
}

std::filesystem::path cmd_train(const RunConfig& cfg, const Logger& log) {
    const auto dir = run_directory(cfg, "train");
    ArtifactWriter out(dir);
    const Dataset d = stage("datagen", cfg.seed, [&] {
        return obtain_dataset(cfg, cfg.data.scenario, cfg.data.n_samples, cfg.seed, log);
    });
    const std::string key = dataset_key(cfg, cfg.data.scenario, cfg.data.n_samples, cfg.seed);
    const TrainedHybrid h = stage("train", cfg.seed, [&] { return obtain_hybrid(cfg, d, key, cfg.seed, log); });
    TrainingCurve c1, c2;
    const BlackboxModel nn1 =
        stage("train", cfg.seed, [&] { return obtain_blackbox(cfg, d, key, BlackboxVariant::nn1, cfg.seed, &c1, log); });
    const BlackboxModel nn2 =
        stage("train", cfg.seed, [&] { return obtain_blackbox(cfg, d, key, BlackboxVariant::nn2, cfg.seed, &c2, log); });
    const auto tmp = std::filesystem::temp_directory_path() / ("shipcc_train_" + config_hash(cfg));
    std::filesystem::create_directories(tmp);
    const std::pair<const char*, const Mlp*> nets[] = {{"inference.bin", &h.model.inference},
                                                        {"compensation.bin", &h.model.compensation},
                                                        {"nn1.bin", &nn1.net},
                                                        {"nn2.bin", &nn2.net}};
    for (const auto& [name, net] : nets) {
        save_mlp(tmp / name, *net);
        out.write(name, read_file(tmp / name));
    }
    std::filesystem::remove_all(tmp);
    out.write("curves.csv", curves_csv({{"inference", &h.inference_curve},
                                        {"compensation", &h.compensation_curve},
                                        {"NN1", &c1},
                                        {"NN2", &c2}}));
    json metrics;
    metrics["inference_best_val"] = h.inference_curve.best_val;
    metrics["compensation_best_val"] = h.compensation_curve.best_val;
    metrics["nn1_best_val"] = c1.best_val;
    metrics["nn2_best_val"] = c2.best_val;
    out.write("manifest.json", manifest(cfg, "train", {cfg.seed}, {{"metrics", metrics}}));
    return dir;
}

ModelingReport cmd_evaluate(const RunConfig& cfg, const Logger& log) {
    ModelingReport rep;
    rep.dir = run_directory(cfg, "evaluate");
    ArtifactWriter out(rep.dir);
    const auto seed = cfg.seed;
    const Dataset d = stage("datagen", seed, [&] {
        return obtain_dataset(cfg, cfg.data.scenario, cfg.data.n_samples, seed, log);
    });
    const std::string key = dataset_key(cfg, cfg.data.scenario, cfg.data.n_samples, seed);
    const TrainedHybrid h = stage("train", seed, [&] { return obtain_hybrid(cfg, d, key, seed, log); });
    const BlackboxModel nn1 =
        stage("train", seed, [&] { return obtain_blackbox(cfg, d, key, BlackboxVariant::nn1, seed, nullptr, log); });
    const BlackboxModel nn2 =
        stage("train", seed, [&] { return obtain_blackbox(cfg, d, key, BlackboxVariant::nn2, seed, nullptr, log); });
    const PlantParameters imperfect = imperfect_params(cfg);
    EvaluationModels m;
    m.hybrid = &h.model;
    m.imperfect = &imperfect;
    m.blackbox["NN1"] = &nn1;
    m.blackbox["NN2"] = &nn2;
    rep.rows = stage("evaluate", seed, [&] { return score_models(d, d.stats, m, cfg, seed, cfg.data.n_samples, &out); });
    out.write("mse.csv", scores_csv(rep.rows));
    out.write("manifest.json", manifest(cfg, "evaluate", {seed}));
    return rep;
}

std::filesystem::path cmd_experiment(const RunConfig& cfg, const std::string& which, const Logger& log) {
    if (which == "caseI-modeling") return run_case_one(cfg, log).dir;
    if (which == "caseII-modeling") return run_case_two(cfg, log).dir;
    if (which == "data-efficiency") return run_data_efficiency(cfg, log).dir;
    if (which == "control-comparison") return run_control_comparison(cfg, log).dir;
    throw ConfigError("unknown experiment: " + which +
                      " (expected caseI-modeling, caseII-modeling, data-efficiency or control-comparison)");
}

}  // namespace shipcc
