#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>
#include <optional>

#include "mcalf/acceptance.hpp"
#include "mcalf/app.hpp"
#include "mcalf/certificates.hpp"
#include "mcalf/config.hpp"
#include "mcalf/montecarlo.hpp"
#include "mcalf/schedules.hpp"

namespace py = pybind11;
using namespace mcalf;

namespace {

ExperimentConfig config_from(const std::string& path, std::optional<std::uint64_t> seed,
                             std::optional<std::size_t> workers) {
    ExperimentConfig cfg = load_config(path);
    Overrides o;
    o.seed = seed;
    o.workers = workers;
    apply_overrides(cfg, o);
    return cfg;
}

}  // namespace

PYBIND11_MODULE(_multicalf, m) {
    m.doc() = "Native core of the multicalf package";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
    py::register_exception<BatchError>(m, "BatchError", PyExc_RuntimeError);

    py::class_<ClassKInf>(m, "ClassKInf")
        .def_static("linear", &ClassKInf::linear, py::arg("scale") = 1.0)
        .def_static("power", &ClassKInf::power, py::arg("exponent"), py::arg("scale") = 1.0)
        .def("__call__", &ClassKInf::operator(), py::arg("x"))
        .def("inverse", [](const ClassKInf& k, double y) { return invert(k, y); }, py::arg("y"))
        .def_readonly("label", &ClassKInf::label)
        .def("__repr__", [](const ClassKInf& k) { return "ClassKInf(" + k.label + ")"; });

    py::class_<KLCertificate>(m, "KLCertificate")
        .def(py::init([](ClassKInf kappa, ClassKInf xi, double eps) {
                 return KLCertificate{std::move(kappa), std::move(xi), eps};
             }),
             py::arg("kappa"), py::arg("xi"), py::arg("eps") = 0.0)
        .def_readonly("eps", &KLCertificate::eps)
        .def("beta", [](const KLCertificate& c, double d, double t) { return beta(c, d, t); },
             py::arg("d"), py::arg("t"));

    m.def(
        "tail_product",
        [](double lambda, double p_relax, std::size_t t) {
            return tail_product(GeometricSchedule(lambda, p_relax), t);
        },
        py::arg("lam"), py::arg("p_relax"), py::arg("t"),
        "prod_{k>=t} (1 - lam^k p_relax)");
    m.def(
        "tail_product_detailed",
        [](double lambda, double p_relax, std::size_t t) {
            const TailProduct tp = tail_product_detailed(GeometricSchedule(lambda, p_relax), t);
            py::dict d;
            d["value"] = tp.value;
            d["log_value"] = tp.log_value;
            d["truncation_bound"] = tp.truncation_bound;
            d["terms"] = tp.terms;
            return d;
        },
        py::arg("lam"), py::arg("p_relax"), py::arg("t"));
    m.def("corollary_lower_bound", &corollary_lower_bound, py::arg("lam"), py::arg("p_relax"), py::arg("t"));
    m.def(
        "summability",
        [](double lambda, double p_relax) {
            const SummabilityResult r = summability_check(GeometricSchedule(lambda, p_relax), 1e-12);
            return py::make_tuple(r.sum, r.pass);
        },
        py::arg("lam"), py::arg("p_relax"));
    m.def("compute_tau_f", &compute_tau_f, py::arg("certificate"), py::arg("d_max"), py::arg("d_star"));
    m.def(
        "wilson_interval",
        [](std::size_t successes, std::size_t trials, double z) {
            const Interval i = wilson_interval(successes, trials, z);
            return py::make_tuple(i.low, i.high);
        },
        py::arg("successes"), py::arg("trials"), py::arg("z") = 1.959963984540054);
    m.def("config_hash", [](const std::string& text) { return config_hash(nlohmann::json::parse(text)); },
          py::arg("json_text"));

    m.def(
        "run_config",
        [](const std::string& path, std::optional<std::uint64_t> seed, std::optional<std::string> output,
           std::optional<std::size_t> workers) {
            const ExperimentConfig cfg = config_from(path, seed, workers);
            std::optional<std::filesystem::path> dir;
            if (output) dir = *output;
            py::gil_scoped_release release;
            return execute_run(cfg, dir).dump();
        },
        py::arg("path"), py::arg("seed") = py::none(), py::arg("output") = py::none(),
        py::arg("workers") = py::none(), "Runs a config file and returns the summary as JSON text");
    m.def(
        "verify_bounds",
        [](const std::string& path) { return bounds_report(load_config(path)).dump(); },
        py::arg("path"), "Bound report for a config file as JSON text");
    m.def(
        "run_criterion",
        [](int id, const std::string& params, std::size_t workers, const std::string& base_dir) {
            AcceptanceContext ctx;
            ctx.workers = workers;
            ctx.base_dir = base_dir;
            ctx.scratch_dir = std::filesystem::temp_directory_path() / "mcalf-python-acceptance";
            const nlohmann::json j = params.empty() ? nlohmann::json::object() : nlohmann::json::parse(params);
            CriterionResult r;
            {
                py::gil_scoped_release release;
                r = run_criterion(id, j, ctx);
            }
            py::dict d;
            d["id"] = r.id;
            d["name"] = r.name;
            d["passed"] = r.pass;
            d["detail"] = r.detail;
            d["seconds"] = r.seconds;
            d["line"] = format_result_line(r);
            return d;
        },
        py::arg("criterion"), py::arg("params") = "", py::arg("workers") = 1, py::arg("base_dir") = ".");
    m.attr("criterion_count") = kCriterionCount;
}
