#include <pybind11/eigen.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>

#include "shipcc/config.hpp"
#include "shipcc/control.hpp"
#include "shipcc/errors.hpp"
#include "shipcc/experiments.hpp"
#include "shipcc/integrator.hpp"
#include "shipcc/plant.hpp"

namespace py = pybind11;
using namespace shipcc;

namespace {

Logger logger(bool verbose) {
    if (!verbose) return {};
    return [](const std::string& msg) {
        py::gil_scoped_acquire gil;
        py::print(msg, py::arg("file") = py::module_::import("sys").attr("stderr"));
    };
}

template <typename Fn>
auto command(Fn fn) {
    return [fn](const RunConfig& cfg, bool verbose) {
        const Logger log = logger(verbose);
        py::gil_scoped_release release;
        return fn(cfg, log).string();
    };
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Ship carbon-capture plant, integrator, hybrid models and controllers";
    m.attr("NX") = kNx;
    m.attr("NZ") = kNz;
    m.attr("NU") = kNu;
    m.attr("NY") = kNy;

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<InputDomainError>(m, "InputDomainError", base.ptr());
    py::register_exception<StepFailure>(m, "StepFailure", base.ptr());

    py::class_<ControlInput>(m, "ControlInput")
        .def(py::init<>())
        .def(py::init([](double F_L, double F_fuel, double F_sw) { return ControlInput{F_L, F_fuel, F_sw}; }),
             py::arg("F_L"), py::arg("F_fuel"), py::arg("F_sw"))
        .def_readwrite("F_L", &ControlInput::F_L)
        .def_readwrite("F_fuel", &ControlInput::F_fuel)
        .def_readwrite("F_sw", &ControlInput::F_sw)
        .def(py::self == py::self)
        .def("__repr__", [](const ControlInput& u) {
            return "ControlInput(F_L=" + std::to_string(u.F_L) + ", F_fuel=" + std::to_string(u.F_fuel) +
                   ", F_sw=" + std::to_string(u.F_sw) + ")";
        });

    py::class_<Disturbance>(m, "Disturbance")
        .def(py::init<>())
        .def(py::init([](double phi) { return Disturbance{phi}; }), py::arg("phi_E"))
        .def_readwrite("phi_E", &Disturbance::phi_E);

    py::class_<PlantOutput>(m, "PlantOutput")
        .def(py::init<>())
        .def(py::init([](double f, double t) { return PlantOutput{f, t}; }), py::arg("F_CO2_out"), py::arg("T_reb"))
        .def_readwrite("F_CO2_out", &PlantOutput::F_CO2_out)
        .def_readwrite("T_reb", &PlantOutput::T_reb);

    py::class_<InputBox>(m, "InputBox")
        .def(py::init<>())
        .def_readwrite("lower", &InputBox::lower)
        .def_readwrite("upper", &InputBox::upper)
        .def("contains", &InputBox::contains)
        .def("clip", &InputBox::clip);

    py::class_<PlantParameters>(m, "PlantParameters")
        .def_static("truth", &PlantParameters::truth)
        .def_static("imperfect", &PlantParameters::imperfect)
        .def_static("mismatch_scaled", &PlantParameters::mismatch_scaled, py::arg("scale"))
        .def_static("by_name", &PlantParameters::by_name, py::arg("name"))
        .def_readonly("variant", &PlantParameters::variant)
        .def("canonical", &PlantParameters::canonical);

    py::class_<IntegratorConfig>(m, "IntegratorConfig")
        .def(py::init<>())
        .def_readwrite("sample_period", &IntegratorConfig::sample_period)
        .def_readwrite("substeps", &IntegratorConfig::substeps)
        .def_readwrite("newton_tol", &IntegratorConfig::newton_tol)
        .def_readwrite("newton_max_iters", &IntegratorConfig::newton_max_iters);

    py::class_<EconomicConfig>(m, "EconomicConfig")
        .def(py::init<>())
        .def_readwrite("alpha", &EconomicConfig::alpha)
        .def_readwrite("beta", &EconomicConfig::beta)
        .def_readwrite("y_limit", &EconomicConfig::y_limit);

    py::class_<TrackingConfig>(m, "TrackingConfig")
        .def(py::init<>())
        .def_readwrite("y_s", &TrackingConfig::y_s)
        .def_readwrite("u_s", &TrackingConfig::u_s)
        .def_readwrite("Q", &TrackingConfig::Q)
        .def_readwrite("R", &TrackingConfig::R);

    py::class_<SteadyState>(m, "SteadyState")
        .def_readonly("x", &SteadyState::x)
        .def_readonly("z", &SteadyState::z)
        .def_readonly("u", &SteadyState::u)
        .def_readonly("p", &SteadyState::p)
        .def_readonly("max_rate", &SteadyState::max_rate);

    py::class_<Trajectory>(m, "Trajectory")
        .def_readonly("X", &Trajectory::X)
        .def_readonly("Z", &Trajectory::Z)
        .def_readonly("U", &Trajectory::U)
        .def_readonly("P", &Trajectory::P)
        .def_readonly("Y", &Trajectory::Y)
        .def_readonly("sample_period", &Trajectory::sample_period)
        .def("steps", &Trajectory::steps);

    py::class_<RunConfig>(m, "RunConfig")
        .def_readwrite("seed", &RunConfig::seed)
        .def_readwrite("seeds", &RunConfig::seeds)
        .def_readwrite("workers", &RunConfig::workers)
        .def_readwrite("output_dir", &RunConfig::output_dir)
        .def_readwrite("cache_dir", &RunConfig::cache_dir)
        .def_readwrite("experiment", &RunConfig::experiment)
        .def("hash", [](const RunConfig& c) { return config_hash(c); })
        .def("dump", [](const RunConfig& c) { return dump_config(c); });

    m.def("load_config", &load_config, py::arg("path"));
    m.def("parse_config", &parse_config, py::arg("text"));

    m.def(
        "flue_gas_rates",
        [](double phi, const PlantParameters& params) {
            const FlueGasRates r = flue_gas_rates(phi, params.engine);
            return py::make_tuple(r.co2_rate, r.F_G);
        },
        py::arg("phi_E"), py::arg("params") = PlantParameters::truth(),
        "(CO2 mass flow in kg/s, flue-gas volumetric flow in m³/s)");
    m.def(
        "heat_supply",
        [](double F_G, double F_fuel, const PlantParameters& params) {
            const HeatSupply h = heat_supply(F_G, F_fuel, params.engine);
            return py::make_tuple(h.Q_rec, h.Q_turbine, h.Q_reb);
        },
        py::arg("F_G"), py::arg("F_fuel"), py::arg("params") = PlantParameters::truth(), "(Q_rec, Q_turbine, Q_reb) in kW");
    m.def(
        "seawater_outlet_temperature",
        [](double T_in, double F_sw, double F_L, const PlantParameters& params) {
            return seawater_hx_outlet(T_in, F_sw, F_L, params.hx);
        },
        py::arg("T_sol_in"), py::arg("F_sw"), py::arg("F_L"), py::arg("params") = PlantParameters::truth());
    m.def(
        "plant_dae",
        [](const StateVector& x, const AlgebraicVector& z, const ControlInput& u, const Disturbance& p,
           const PlantParameters& params) {
            const PlantDerivatives d = plant_dae(x, z, u, p, params);
            return py::make_tuple(d.xdot, d.g);
        },
        py::arg("x"), py::arg("z"), py::arg("u"), py::arg("p"), py::arg("params"));
    m.def(
        "outputs",
        [](const StateVector& x, const Disturbance& p, const PlantParameters& params) {
            return outputs(x, p, params.engine);
        },
        py::arg("x"), py::arg("p"), py::arg("params") = PlantParameters::truth());
    m.def(
        "capture_rate",
        [](const PlantOutput& y, const Disturbance& p, const PlantParameters& params) {
            return capture_rate(y, p, params.engine);
        },
        py::arg("y"), py::arg("p"), py::arg("params") = PlantParameters::truth());

    m.def(
        "consistent_initialize",
        [](const StateVector& x, const ControlInput& u, const Disturbance& p, const PlantParameters& params,
           const IntegratorConfig& cfg) { return consistent_initialize(x, u, p, params, cfg); },
        py::arg("x"), py::arg("u"), py::arg("p"), py::arg("params"), py::arg("cfg") = IntegratorConfig{});
    m.def(
        "dae_step",
        [](const StateVector& x, const AlgebraicVector& z, const ControlInput& u, const Disturbance& p,
           const PlantParameters& params, const IntegratorConfig& cfg) {
            const StepResult r = dae_step(x, z, u, p, params, cfg);
            return py::make_tuple(r.x, r.z);
        },
        py::arg("x"), py::arg("z"), py::arg("u"), py::arg("p"), py::arg("params"), py::arg("cfg") = IntegratorConfig{});
    m.def("simulate_open_loop", &simulate_open_loop, py::arg("x0"), py::arg("u"), py::arg("p"), py::arg("params"),
          py::arg("cfg") = IntegratorConfig{}, py::call_guard<py::gil_scoped_release>());
    m.def(
        "nominal_steady_state",
        [](const PlantParameters& params, const IntegratorConfig& cfg, const std::optional<std::filesystem::path>& cache_dir,
           int samples) { return nominal_steady_state(params, cfg, cache_dir.value_or(std::filesystem::path{}), samples); },
        py::arg("params"), py::arg("cfg") = IntegratorConfig{}, py::arg("cache_dir") = py::none(),
        py::arg("samples") = 5000, py::call_guard<py::gil_scoped_release>());

    m.def("economic_cost", &economic_cost, py::arg("y"), py::arg("u"), py::arg("ec") = EconomicConfig{});
    m.def("tracking_cost", &tracking_cost, py::arg("y"), py::arg("u"), py::arg("tc"));

    m.def("simulate", command(cmd_simulate), py::arg("config"), py::arg("verbose") = false,
          "Open-loop simulation; returns the run directory.");
    m.def("gen_data", command(cmd_gen_data), py::arg("config"), py::arg("verbose") = false);
    m.def("train", command(cmd_train), py::arg("config"), py::arg("verbose") = false);
    m.def(
        "evaluate",
        [](const RunConfig& cfg, bool verbose) {
            const Logger log = logger(verbose);
            py::gil_scoped_release release;
            return cmd_evaluate(cfg, log).dir.string();
        },
        py::arg("config"), py::arg("verbose") = false);
    m.def(
        "experiment",
        [](const RunConfig& cfg, const std::string& which, bool verbose) {
            const Logger log = logger(verbose);
            py::gil_scoped_release release;
            return cmd_experiment(cfg, which, log).string();
        },
        py::arg("config"), py::arg("which"), py::arg("verbose") = false);
}
