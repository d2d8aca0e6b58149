// Python bindings: the numeric kernels plus the CLI commands.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "morphguard/checkpoint.hpp"
#include "morphguard/commands.hpp"
#include "morphguard/error.hpp"
#include "morphguard/featviz.hpp"
#include "morphguard/loss.hpp"
#include "morphguard/metrics.hpp"

namespace py = pybind11;
using namespace morphguard;

namespace {

std::vector<MorphTrial> to_trials(const std::vector<Vec>& scores) {
    std::vector<MorphTrial> trials;
    trials.reserve(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) trials.push_back({"m" + std::to_string(i), scores[i]});
    return trials;
}

py::dict ellipse_dict(const Ellipse& e) {
    py::dict d;
    d["center"] = py::make_tuple(e.center.x, e.center.y);
    d["width"] = e.width;
    d["height"] = e.height;
    d["orientation"] = e.orientation;
    d["size"] = e.size;
    return d;
}

void run_command(const std::string& name, const std::string& config_json, const std::filesystem::path& out,
                 std::optional<std::filesystem::path> checkpoint, std::optional<std::filesystem::path> data,
                 bool parallel) {
    CommandOptions o;
    o.config = config_json.empty() ? ExperimentConfig{} : config_from_json(nlohmann::json::parse(config_json));
    o.out = out;
    o.checkpoint = std::move(checkpoint);
    o.data_dir = std::move(data);
    o.parallel = parallel;
    py::gil_scoped_release release;
    if (name == "gen-data") cmd_gen_data(o);
    else if (name == "train") cmd_train(o);
    else if (name == "sweep-margins") cmd_sweep_margins(o);
    else if (name == "adapt") cmd_adapt(o);
    else if (name == "eval") cmd_eval(o);
    else if (name == "analyze-features") cmd_analyze_features(o);
    else throw ConfigError("unknown command '" + name + "'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "MorphGuard dual-head margin loss, morph metrics and feature analysis";

    auto base = py::register_exception<Error>(m, "MorphGuardError", PyExc_RuntimeError);
    auto config = py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<ProtocolError>(m, "ProtocolError", base.ptr());
    auto numeric = py::register_exception<NumericInputError>(m, "NumericInputError", base.ptr());
    py::register_exception<UnattainableOperatingPointError>(m, "UnattainableOperatingPointError", numeric.ptr());
    auto io = py::register_exception<IoError>(m, "IoError", base.ptr());
    py::register_exception<FormatError>(m, "FormatError", io.ptr());
    (void)config;

    // loss
    m.def("margin_adjust", &margin_adjust, py::arg("cos_theta"), py::arg("m"));
    m.def(
        "softmax_ce",
        [](const Vec& logits, std::size_t target) {
            const auto r = softmax_ce(logits, target);
            return py::make_tuple(r.loss, r.grad);
        },
        py::arg("logits"), py::arg("target"), "Returns (loss, d loss / d logits).");
    m.def(
        "margin_softmax_ce",
        [](const Vec& cosines, std::size_t target, double s, double margin) {
            const auto r = margin_softmax_ce(CosineLogits{cosines}, target, s, margin);
            return py::make_tuple(r.loss, r.grad);
        },
        py::arg("cosines"), py::arg("target"), py::arg("s"), py::arg("m"), "Returns (loss, d loss / d cosines).");

    // metrics; morph trials are lists of subject scores
    m.def("fnmr_at", [](const Vec& genuine, const Vec& impostor, double tau) { return fnmr_at({genuine, impostor}, tau); });
    m.def("fmr_at", [](const Vec& genuine, const Vec& impostor, double tau) { return fmr_at({genuine, impostor}, tau); });
    m.def("mmpmr", [](const std::vector<Vec>& trials, double tau) { return mmpmr(to_trials(trials), tau); });
    m.def("rmmr", &rmmr);
    m.def(
        "min_rmmr",
        [](const std::vector<Vec>& trials, const Vec& genuine, const Vec& impostor) {
            const auto r = min_rmmr(to_trials(trials), {genuine, impostor});
            return py::make_tuple(r.threshold, r.value);
        },
        py::arg("trials"), py::arg("genuine"), py::arg("impostor"), "Returns (threshold, value).");
    m.def(
        "mmpmr_at_fnmr",
        [](const std::vector<Vec>& trials, const Vec& genuine, const Vec& impostor, const Vec& targets) {
            py::list out;
            for (const auto& r : mmpmr_at_fnmr(to_trials(trials), {genuine, impostor}, targets))
                out.append(py::dict(py::arg("target") = r.target, py::arg("achieved_fnmr") = r.achieved_fnmr,
                                    py::arg("threshold") = r.threshold, py::arg("mmpmr") = r.mmpmr));
            return out;
        },
        py::arg("trials"), py::arg("genuine"), py::arg("impostor"), py::arg("targets"));
    m.def(
        "fnmr_at_fmr",
        [](const Vec& genuine, const Vec& impostor, const Vec& targets) {
            py::list out;
            for (const auto& r : fnmr_at_fmr({genuine, impostor}, targets))
                out.append(py::dict(py::arg("target") = r.target, py::arg("achieved_fmr") = r.achieved_fmr,
                                    py::arg("threshold") = r.threshold, py::arg("fnmr") = r.fnmr));
            return out;
        },
        py::arg("genuine"), py::arg("impostor"), py::arg("targets"));

    // featviz
    m.def("chi2_2dof_quantile", &chi2_2dof_quantile);
    m.def(
        "confidence_ellipse",
        [](const std::vector<std::pair<double, double>>& points, double level) {
            std::vector<Point2> pts;
            for (const auto& [x, y] : points) pts.push_back({x, y});
            return ellipse_dict(confidence_ellipse(pts, level));
        },
        py::arg("points"), py::arg("level") = 0.9);
    m.def(
        "ellipse_contains",
        [](const std::vector<std::pair<double, double>>& points, double level) {
            std::vector<Point2> pts;
            for (const auto& [x, y] : points) pts.push_back({x, y});
            const auto e = confidence_ellipse(pts, level);
            std::vector<bool> inside;
            for (const auto& p : pts) inside.push_back(e.contains(p));
            return inside;
        },
        py::arg("points"), py::arg("level") = 0.9, "Membership of each point in its own confidence ellipse.");

    // models
    py::class_<DualHeadModel>(m, "Model")
        .def_property_readonly("input_dim", &DualHeadModel::input_dim)
        .def_property_readonly("embedding_dim", &DualHeadModel::embedding_dim)
        .def_property_readonly("classes", &DualHeadModel::classes)
        .def("embed", [](const DualHeadModel& model, const Vec& x) { return embed(model, x); })
        .def("__eq__", [](const DualHeadModel& a, const DualHeadModel& b) { return a == b; });
    m.def("init_model", [](std::size_t input_dim, const std::vector<std::size_t>& hidden, std::size_t d,
                           std::size_t classes, std::uint64_t seed) { return init_model(input_dim, hidden, d, classes, seed); });
    m.def("load_checkpoint", &load_checkpoint);
    m.def("save_checkpoint", &save_checkpoint);

    // commands
    m.def("default_config", &cmd_print_default_config, "Default configuration as JSON text.");
    m.def("run_command", &run_command, py::arg("name"), py::arg("config_json") = "", py::arg("out") = "out",
          py::arg("checkpoint") = std::nullopt, py::arg("data") = std::nullopt, py::arg("parallel") = false,
          "Runs one CLI subcommand in-process.");
}
