#include "shipcc/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "shipcc/errors.hpp"
#include "shipcc/hash.hpp"
#include "shipcc/trajectory_io.hpp"

namespace shipcc {

namespace {

// Reads a mapping and rejects keys nobody asked for.
class Section {
public:
    Section(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
        if (node_ && !node_.IsNull() && !node_.IsMap()) throw ConfigError(path_ + " must be a mapping");
    }

    template <class T>
    void get(const std::string& key, T& out) {
        seen_.insert(key);
        if (!node_ || node_.IsNull() || !node_[key]) return;
        try {
            out = node_[key].as<T>();
        } catch (const YAML::Exception& e) {
            throw ConfigError(where(key) + ": " + e.msg);
        }
    }

    template <class T, std::size_t N>
    void get_array(const std::string& key, std::array<T, N>& out) {
        std::vector<T> v(out.begin(), out.end());
        get(key, v);
        if (v.size() != N) throw ConfigError(where(key) + " must have " + std::to_string(N) + " entries");
        std::copy(v.begin(), v.end(), out.begin());
    }

    void get_path(const std::string& key, std::filesystem::path& out) {
        std::string s = out.string();
        get(key, s);
        out = s;
    }

    void get_inputs(const std::string& key, ControlInput& u) {
        Section s = sub(key);
        s.get("F_L", u.F_L);
        s.get("F_fuel", u.F_fuel);
        s.get("F_sw", u.F_sw);
        s.finish();
    }

    Section sub(const std::string& key) {
        seen_.insert(key);
        YAML::Node child = (node_ && node_.IsMap()) ? node_[key] : YAML::Node();
        return Section(child, path_.empty() ? key : path_ + "." + key);
    }

    YAML::Node raw(const std::string& key) {
        seen_.insert(key);
        return (node_ && node_.IsMap()) ? node_[key] : YAML::Node();
    }

    void finish() const {
        if (!node_ || !node_.IsMap()) return;
        for (const auto& kv : node_) {
            const auto key = kv.first.as<std::string>();
            if (!seen_.count(key)) throw ConfigError("unknown config key: " + where(key));
        }
    }

private:
    std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    YAML::Node node_;
    std::string path_;
    std::set<std::string> seen_;
};

Scenario scenario_from(Section& s) {
    std::string name = "case1";
    s.get("scenario", name);
    Scenario sc;
    if (name == "case1")
        sc = Scenario::case_one();
    else if (name == "case2")
        sc = Scenario::case_two();
    else if (name == "custom")
        sc.name = "custom";
    else
        throw ConfigError("data.scenario must be case1, case2 or custom, got " + name);
    if (YAML::Node mix = s.raw("mix"); mix && !mix.IsNull()) {
        if (!mix.IsSequence()) throw ConfigError("data.mix must be a list");
        sc.mix.clear();
        for (std::size_t i = 0; i < mix.size(); ++i) {
            Section item(mix[i], "data.mix[" + std::to_string(i) + "]");
            ConditionShare share;
            item.get("condition", share.condition);
            item.get("fraction", share.fraction);
            item.finish();
            sc.mix.push_back(share);
        }
    }
    s.get("test_only_conditions", sc.test_only_conditions);
    s.get("load_hold", sc.load_hold);
    s.get("input_hold", sc.input_hold);
    s.get("load_std", sc.load_std);
    s.get("train_fraction", sc.train_fraction);
    s.get("val_fraction", sc.val_fraction);
    return sc;
}

}  // namespace

void RunConfig::validate() const {
    static const std::set<std::string> experiments{"", "caseI-modeling", "caseII-modeling", "data-efficiency",
                                                   "control-comparison"};
    if (!experiments.count(experiment)) throw ConfigError("unknown experiment: " + experiment);
    if (param_set != "truth" && param_set != "imperfect") throw ConfigError("param_set must be truth or imperfect");
    if (workers < 1) throw ConfigError("workers must be at least 1");
    if (seeds.empty()) throw ConfigError("seeds must not be empty");
    if (settle_samples < 1) throw ConfigError("settle_samples must be positive");
    integrator.validate();
    if (simulate.samples < 1) throw ConfigError("simulate.samples must be positive");
    data.scenario.validate();
    if (data.n_samples < 1) throw ConfigError("data.n_samples must be positive");
    if (!(data.mismatch_scale >= 0.0)) throw ConfigError("data.mismatch_scale must be non-negative");
    training.validate();
    if (evaluation.rollout_steps < 1) throw ConfigError("evaluation.rollout_steps must be positive");
    for (long n : efficiency.sizes)
        if (n < 1) throw ConfigError("efficiency.sizes entries must be positive");
    control.loop.ce.validate();
    control.loop.economic.validate();
    if (control.loop.control_interval < 1 || control.loop.control_steps < 1)
        throw ConfigError("control interval and steps must be positive");
    static const std::set<std::string> controllers{"EMPC/hybrid", "MPC/hybrid", "EMPC/imperfect", "MPC/imperfect"};
    for (const auto& c : control.controllers)
        if (!controllers.count(c)) throw ConfigError("unknown controller: " + c);
    if (control.profile.hold < 1) throw ConfigError("control.profile.hold must be positive");
    if (control.train_samples < 1) throw ConfigError("control.train_samples must be positive");
}

std::filesystem::path RunConfig::resolved_cache_dir() const {
    return cache_dir.empty() ? output_dir / "cache" : cache_dir;
}

RunConfig parse_config(const std::string& yaml_text) {
    YAML::Node root;
    try {
        root = YAML::Load(yaml_text);
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("malformed YAML: ") + e.what());
    }
    RunConfig c;
    Section top(root, "");
    top.get("experiment", c.experiment);
    top.get("seed", c.seed);
    top.get("seeds", c.seeds);
    top.get("param_set", c.param_set);
    top.get("workers", c.workers);
    top.get_path("output_dir", c.output_dir);
    top.get_path("cache_dir", c.cache_dir);
    top.get("settle_samples", c.settle_samples);
    {
        Section s = top.sub("integrator");
        s.get("sample_period", c.integrator.sample_period);
        s.get("substeps", c.integrator.substeps);
        s.get("newton_tol", c.integrator.newton_tol);
        s.get("newton_max_iters", c.integrator.newton_max_iters);
        s.finish();
    }
    {
        Section s = top.sub("simulate");
        s.get("samples", c.simulate.samples);
        s.get("excitation", c.simulate.excitation);
        s.get_inputs("inputs", c.simulate.inputs);
        s.get("condition", c.simulate.condition);
        s.get("from_steady_state", c.simulate.from_steady_state);
        s.finish();
    }
    {
        Section s = top.sub("data");
        c.data.scenario = scenario_from(s);
        s.get("n_samples", c.data.n_samples);
        s.get("mismatch_scale", c.data.mismatch_scale);
        s.finish();
    }
    {
        Section s = top.sub("training");
        s.get("batch_size", c.training.batch_size);
        s.get("epochs", c.training.epochs);
        s.get("patience", c.training.patience);
        s.get("learning_rate", c.training.adam.learning_rate);
        s.get("beta1", c.training.adam.beta1);
        s.get("beta2", c.training.adam.beta2);
        s.get("epsilon", c.training.adam.epsilon);
        s.finish();
    }
    {
        Section s = top.sub("evaluation");
        s.get("rollout_steps", c.evaluation.rollout_steps);
        s.finish();
    }
    {
        Section s = top.sub("efficiency");
        s.get("sizes", c.efficiency.sizes);
        s.finish();
    }
    {
        Section s = top.sub("control");
        auto& ctl = c.control;
        s.get("controllers", ctl.controllers);
        s.get("control_interval", ctl.loop.control_interval);
        s.get("control_steps", ctl.loop.control_steps);
        s.get("seed", ctl.loop.seed);
        s.get("train_samples", ctl.train_samples);
        {
            Section ce = s.sub("ce");
            auto& k = ctl.loop.ce;
            ce.get("iterations", k.iterations);
            ce.get("samples", k.samples);
            ce.get("elites", k.elites);
            ce.get("lambda", k.lambda);
            ce.get("nu_min", k.nu_min);
            ce.get("horizon", k.horizon);
            ce.get("nu0", k.nu0);
            ce.get_inputs("mu0", k.mu0);
            ce.get("T_reb_lo", k.output_box.T_reb_lo);
            ce.get("T_reb_hi", k.output_box.T_reb_hi);
            ce.finish();
        }
        {
            Section e = s.sub("economic");
            e.get("alpha", ctl.loop.economic.alpha);
            e.get("beta", ctl.loop.economic.beta);
            e.get("y_limit", ctl.loop.economic.y_limit);
            e.finish();
        }
        {
            Section t = s.sub("tracking");
            t.get_array("Q", ctl.Q);
            t.get_array("R", ctl.R);
            t.finish();
        }
        {
            Section p = s.sub("profile");
            p.get("condition", ctl.profile.condition);
            p.get("hold", ctl.profile.hold);
            p.get("std", ctl.profile.std);
            p.get("seed", ctl.profile.seed);
            p.finish();
        }
        {
            Section sp = s.sub("setpoint");
            sp.get("levels", ctl.setpoint.levels);
            sp.get("refinements", ctl.setpoint.refinements);
            sp.get("settle_samples", ctl.setpoint.settle_samples);
            sp.get("steady_tol", ctl.setpoint.steady_tol);
            sp.finish();
        }
        s.finish();
    }
    top.finish();
    c.control.loop.integrator = c.integrator;
    c.validate();
    return c;
}

RunConfig load_config(const std::filesystem::path& file) {
    std::ifstream is(file);
    if (!is) throw ConfigError("cannot read config file " + file.string());
    std::stringstream ss;
    ss << is.rdbuf();
    try {
        return parse_config(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(file.string() + ": " + e.what());
    }
}

namespace {

struct Num {
    double v;
};

YAML::Emitter& operator<<(YAML::Emitter& out, Num n) { return out << format_double(n.v); }

void emit_inputs(YAML::Emitter& out, const char* key, const ControlInput& u) {
    out << YAML::Key << key << YAML::Value << YAML::Flow << YAML::BeginMap;
    out << YAML::Key << "F_L" << YAML::Value << Num{u.F_L};
    out << YAML::Key << "F_fuel" << YAML::Value << Num{u.F_fuel};
    out << YAML::Key << "F_sw" << YAML::Value << Num{u.F_sw};
    out << YAML::EndMap;
}

template <class Seq>
void emit_numbers(YAML::Emitter& out, const char* key, const Seq& seq) {
    out << YAML::Key << key << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (const auto& v : seq) out << Num{static_cast<double>(v)};
    out << YAML::EndSeq;
}

template <class Seq>
void emit_integers(YAML::Emitter& out, const char* key, const Seq& seq) {
    out << YAML::Key << key << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (const auto& v : seq) out << v;
    out << YAML::EndSeq;
}

}  // namespace

std::string dump_config(const RunConfig& c, bool include_runtime) {
    YAML::Emitter out;
    auto kv = [&out](const char* key, const auto& value) { out << YAML::Key << key << YAML::Value << value; };
    out << YAML::BeginMap;
    kv("experiment", c.experiment);
    kv("seed", c.seed);
    emit_integers(out, "seeds", c.seeds);
    kv("param_set", c.param_set);
    if (include_runtime) {
        kv("workers", c.workers);
        kv("output_dir", c.output_dir.string());
        kv("cache_dir", c.cache_dir.string());
    }
    kv("settle_samples", c.settle_samples);

    out << YAML::Key << "integrator" << YAML::Value << YAML::BeginMap;
    kv("sample_period", Num{c.integrator.sample_period});
    kv("substeps", c.integrator.substeps);
    kv("newton_tol", Num{c.integrator.newton_tol});
    kv("newton_max_iters", c.integrator.newton_max_iters);
    out << YAML::EndMap;

    out << YAML::Key << "simulate" << YAML::Value << YAML::BeginMap;
    kv("samples", c.simulate.samples);
    kv("excitation", c.simulate.excitation);
    emit_inputs(out, "inputs", c.simulate.inputs);
    kv("condition", c.simulate.condition);
    kv("from_steady_state", c.simulate.from_steady_state);
    out << YAML::EndMap;

    const auto& sc = c.data.scenario;
    out << YAML::Key << "data" << YAML::Value << YAML::BeginMap;
    kv("scenario", sc.name);
    out << YAML::Key << "mix" << YAML::Value << YAML::BeginSeq;
    for (const auto& m : sc.mix) {
        out << YAML::Flow << YAML::BeginMap;
        kv("condition", m.condition);
        kv("fraction", Num{m.fraction});
        out << YAML::EndMap;
    }
    out << YAML::EndSeq;
    emit_integers(out, "test_only_conditions", sc.test_only_conditions);
    kv("load_hold", sc.load_hold);
    kv("input_hold", sc.input_hold);
    kv("load_std", Num{sc.load_std});
    kv("train_fraction", Num{sc.train_fraction});
    kv("val_fraction", Num{sc.val_fraction});
    kv("n_samples", c.data.n_samples);
    kv("mismatch_scale", Num{c.data.mismatch_scale});
    out << YAML::EndMap;

    out << YAML::Key << "training" << YAML::Value << YAML::BeginMap;
    kv("batch_size", c.training.batch_size);
    kv("epochs", c.training.epochs);
    kv("patience", c.training.patience);
    kv("learning_rate", Num{c.training.adam.learning_rate});
    kv("beta1", Num{c.training.adam.beta1});
    kv("beta2", Num{c.training.adam.beta2});
    kv("epsilon", Num{c.training.adam.epsilon});
    out << YAML::EndMap;

    out << YAML::Key << "evaluation" << YAML::Value << YAML::BeginMap;
    kv("rollout_steps", c.evaluation.rollout_steps);
    out << YAML::EndMap;

    out << YAML::Key << "efficiency" << YAML::Value << YAML::BeginMap;
    emit_integers(out, "sizes", c.efficiency.sizes);
    out << YAML::EndMap;

    const auto& ctl = c.control;
    out << YAML::Key << "control" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "controllers" << YAML::Value << YAML::Flow << ctl.controllers;
    kv("control_interval", ctl.loop.control_interval);
    kv("control_steps", ctl.loop.control_steps);
    kv("seed", ctl.loop.seed);
    kv("train_samples", ctl.train_samples);
    out << YAML::Key << "ce" << YAML::Value << YAML::BeginMap;
    const auto& k = ctl.loop.ce;
    kv("iterations", k.iterations);
    kv("samples", k.samples);
    kv("elites", k.elites);
    kv("lambda", Num{k.lambda});
    kv("nu_min", Num{k.nu_min});
    kv("horizon", k.horizon);
    kv("nu0", Num{k.nu0});
    emit_inputs(out, "mu0", k.mu0);
    kv("T_reb_lo", Num{k.output_box.T_reb_lo});
    kv("T_reb_hi", Num{k.output_box.T_reb_hi});
    out << YAML::EndMap;
    out << YAML::Key << "economic" << YAML::Value << YAML::BeginMap;
    kv("alpha", Num{ctl.loop.economic.alpha});
    kv("beta", Num{ctl.loop.economic.beta});
    kv("y_limit", Num{ctl.loop.economic.y_limit});
    out << YAML::EndMap;
    out << YAML::Key << "tracking" << YAML::Value << YAML::BeginMap;
    emit_numbers(out, "Q", ctl.Q);
    emit_numbers(out, "R", ctl.R);
    out << YAML::EndMap;
    out << YAML::Key << "profile" << YAML::Value << YAML::BeginMap;
    kv("condition", ctl.profile.condition);
    kv("hold", ctl.profile.hold);
    kv("std", Num{ctl.profile.std});
    kv("seed", ctl.profile.seed);
    out << YAML::EndMap;
    out << YAML::Key << "setpoint" << YAML::Value << YAML::BeginMap;
    kv("levels", ctl.setpoint.levels);
    kv("refinements", ctl.setpoint.refinements);
    kv("settle_samples", ctl.setpoint.settle_samples);
    kv("steady_tol", Num{ctl.setpoint.steady_tol});
    out << YAML::EndMap;
    out << YAML::EndMap;

    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

std::string config_hash(const RunConfig& cfg) { return hex_digest(dump_config(cfg, false)); }

}  // namespace shipcc
