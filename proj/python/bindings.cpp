// pybind11 bindings. Structured results cross the boundary as JSON text; the
// Python package decodes them.

#include "sbc/causal_graph.hpp"
#include "sbc/dataset.hpp"
#include "sbc/errors.hpp"
#include "sbc/estimators.hpp"
#include "sbc/gam.hpp"
#include "sbc/query_summarizer.hpp"
#include "sbc/simulator.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

namespace py = pybind11;

namespace {

sbc::EstimatorOptions options_from(int k, int k_tensor, int k_monotone, double delta, bool x2_controls) {
    sbc::EstimatorOptions o;
    o.k = k;
    o.k_tensor = k_tensor;
    o.k_monotone = k_monotone;
    o.delta = delta;
    o.x2_controls = x2_controls;
    return o;
}

std::vector<sbc::Method> methods_from(const std::vector<std::string>& names) {
    std::vector<sbc::Method> out;
    for (const auto& n : names) out.push_back(sbc::method_from_string(n));
    return out;
}

sbc::Dag dag_from(const std::string& diagram_or_edges) {
    const auto builtins = sbc::builtin_diagrams();
    if (builtins.count(diagram_or_edges)) return builtins.at(diagram_or_edges);
    return sbc::parse_edge_list(diagram_or_edges);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Search-ad ROAS estimation with search bias correction";
    m.attr("__version__") = SBC_VERSION;

    // Exception hierarchy, so Python callers can catch by kind.
    static py::exception<sbc::Error> error(m, "Error");
    static py::exception<sbc::InputError> input_error(m, "InputError", error.ptr());
    static py::exception<sbc::EstimationError> estimation_error(m, "EstimationError", error.ptr());
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const sbc::InputError& e) {
            input_error(e.what());
        } catch (const sbc::EstimationError& e) {
            estimation_error(e.what());
        } catch (const sbc::Error& e) {
            error(e.what());
        }
    });

    m.def("method_names", &sbc::method_names);

    m.def(
        "simulate",
        [](const std::string& config_json) {
            const auto out = sbc::simulate(sbc::ScenarioConfig::from_json(config_json));
            sbc::PanelSchema schema;
            for (const auto& [name, series] : out.panel.x2) schema.x2.push_back(name);
            return py::make_tuple(sbc::panel_to_csv(out.panel, schema), out.truth_json());
        },
        py::arg("config_json") = "{}", "Returns (panel CSV text, truth JSON text).");

    m.def("default_config", [] { return sbc::ScenarioConfig{}.to_json(); });

    m.def(
        "estimate",
        [](const std::string& panel_csv, const std::string& method, int k, int k_tensor, int k_monotone, double delta,
           bool x2_controls) {
            const auto panel = sbc::parse_panel(panel_csv, sbc::infer_schema(panel_csv));
            return sbc::estimate(sbc::method_from_string(method), panel,
                                 options_from(k, k_tensor, k_monotone, delta, x2_controls))
                .to_json();
        },
        py::arg("panel_csv"), py::arg("method") = "sbc", py::arg("k") = 10, py::arg("k_tensor") = 5,
        py::arg("k_monotone") = 10, py::arg("delta") = 0.01, py::arg("x2_controls") = false);

    m.def(
        "estimate_full_mmm",
        [](const std::string& panel_csv, const std::vector<std::string>& x2, int k) {
            sbc::PanelSchema schema;
            schema.x2 = x2;
            sbc::EstimatorOptions o;
            o.k = k;
            return sbc::estimate_full_mmm(sbc::parse_panel(panel_csv, schema), o).to_json();
        },
        py::arg("panel_csv"), py::arg("x2"), py::arg("k") = 10);

    m.def(
        "compare",
        [](const std::string& panel_csv, std::optional<double> reference, double reference_se, bool index,
           bool per_year, const std::vector<std::string>& methods) {
            std::optional<sbc::Reference> ref;
            if (reference) ref = sbc::Reference{*reference, reference_se};
            auto ms = methods_from(methods);
            if (ms.empty()) ms = sbc::table_methods();
            return sbc::compare_estimators(sbc::parse_panel(panel_csv, sbc::infer_schema(panel_csv)), ref, index, per_year, ms).to_json();
        },
        py::arg("panel_csv"), py::arg("reference") = py::none(), py::arg("reference_se") = 0.0,
        py::arg("index_to_reference") = false, py::arg("per_year") = false,
        py::arg("methods") = std::vector<std::string>{});

    m.def(
        "replicate_study",
        [](const std::string& config_json, int reps, const std::vector<std::string>& methods, int threads,
           bool x2_controls) {
            sbc::EstimatorOptions o;
            o.x2_controls = x2_controls;
            const auto cfg = sbc::ScenarioConfig::from_json(config_json);
            py::gil_scoped_release release;
            return sbc::replicate_study(cfg, reps, methods_from(methods), o, threads).to_json();
        },
        py::arg("config_json"), py::arg("reps"), py::arg("methods"), py::arg("threads") = 1,
        py::arg("x2_controls") = false);

    m.def(
        "classify",
        [](const std::string& log_path, const std::string& taxonomy_path, double category_min, double target_min,
           double competitor_min) {
            sbc::Thresholds t{category_min, target_min, competitor_min};
            const auto r = sbc::classify_queries(sbc::load_query_log(log_path),
                                                 sbc::UrlTaxonomy::load(taxonomy_path), t);
            return sbc::classification_to_csv(r.queries);
        },
        py::arg("log_path"), py::arg("taxonomy_path"), py::arg("category_min") = 0.5, py::arg("target_min") = 0.5,
        py::arg("competitor_min") = 0.5, "Returns the classification as CSV text.");

    m.def(
        "assign_segment",
        [](double a, double b, double c, double d) { return sbc::to_string(sbc::assign_segment(a, b, c, d)); },
        py::arg("w_a"), py::arg("w_b"), py::arg("w_c"), py::arg("w_d"));

    m.def(
        "is_d_separated",
        [](const std::string& dag, const std::string& x, const std::string& y, const std::vector<std::string>& z) {
            return sbc::is_d_separated(dag_from(dag), x, y, sbc::NodeSet(z.begin(), z.end()));
        },
        py::arg("dag"), py::arg("x"), py::arg("y"), py::arg("z"),
        "`dag` is a built-in diagram key or an edge list (one 'a -> b' per line).");

    m.def(
        "satisfies_backdoor",
        [](const std::string& dag, const std::string& t, const std::string& o, const std::vector<std::string>& z) {
            return sbc::satisfies_backdoor(dag_from(dag), t, o, sbc::NodeSet(z.begin(), z.end()));
        },
        py::arg("dag"), py::arg("treatment"), py::arg("outcome"), py::arg("z"));

    m.def(
        "fit_gam",
        [](const std::map<std::string, std::vector<double>>& data, const std::string& response,
           const std::vector<std::string>& linear, const std::vector<std::string>& smooths, int k) {
            sbc::ModelSpec spec;
            spec.response = response;
            spec.linear = linear;
            for (const auto& s : smooths) spec.smooths.push_back(sbc::SmoothTerm::cr(s, k));
            return sbc::fit_reml(spec, data).to_json();
        },
        py::arg("data"), py::arg("response"), py::arg("linear"), py::arg("smooths"), py::arg("k") = 10,
        "Gaussian additive model with REML smoothing; returns the fit as JSON text.");
}
