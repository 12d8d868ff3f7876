// Command-line front end: classify, fit, simulate, compare, replicates.

#include "sbc/csv.hpp"
#include "sbc/dataset.hpp"
#include "sbc/errors.hpp"
#include "sbc/estimators.hpp"
#include "sbc/query_summarizer.hpp"
#include "sbc/simulator.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#ifndef SBC_VERSION
#define SBC_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitEstimation = 3;
constexpr int kExitInternal = 4;

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw sbc::InputError("cannot open '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) != 1 || EVP_DigestFinal_ex(ctx, digest, &len) != 1) {
        EVP_MD_CTX_free(ctx);
        throw std::runtime_error("SHA-256 digest failed");
    }
    EVP_MD_CTX_free(ctx);
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Collects outputs and writes them plus run_manifest.json into the output directory.
class Run {
public:
    Run(std::string command, std::string out_dir, std::uint64_t seed)
        : command_(std::move(command)), out_dir_(std::move(out_dir)), seed_(seed) {}

    std::string input(const std::string& path) {
        std::string bytes = read_text(path);
        inputs_.push_back({{"path", path}, {"sha256", sha256_hex(bytes)}});
        return bytes;
    }

    void output(const std::string& name, const std::string& content) {
        fs::create_directories(out_dir_);
        sbc::csv::write_file((fs::path(out_dir_) / name).string(), content);
        outputs_.push_back(name);
    }

    ordered_json& config() { return config_; }

    void finish(const std::vector<std::string>& argv) {
        ordered_json m;
        m["command"] = command_;
        m["argv"] = argv;
        m["config"] = config_;
        m["inputs"] = inputs_;
        m["outputs"] = outputs_;
        m["version"] = SBC_VERSION;
        m["seed"] = seed_;
        m["timestamp"] = utc_timestamp();
        fs::create_directories(out_dir_);
        sbc::csv::write_file((fs::path(out_dir_) / "run_manifest.json").string(), m.dump(2) + "\n");
    }

private:
    std::string command_;
    std::string out_dir_;
    std::uint64_t seed_;
    ordered_json config_ = ordered_json::object();
    ordered_json inputs_ = ordered_json::array();
    std::vector<std::string> outputs_;
};

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else if (c != ' ') {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

// Options shared by every subcommand.
struct Global {
    std::optional<std::uint64_t> seed;
    std::string out_dir = "sbc_out";
    std::string config_path;
    nlohmann::json config = nlohmann::json::object();
};

template <typename T>
void from_config(const Global& g, CLI::App* sub, const std::string& flag, const std::string& key, T& value) {
    if (sub->count(flag) == 0 && g.config.contains(key)) value = g.config.at(key).get<T>();
}

// ---------------------------------------------------------------------------
// classify
// ---------------------------------------------------------------------------

struct ClassifyArgs {
    std::string log, counts, taxonomy;
    sbc::Thresholds thresholds;
};

int cmd_classify(const Global& g, CLI::App* sub, ClassifyArgs a, const std::vector<std::string>& argv) {
    from_config(g, sub, "--log", "log", a.log);
    from_config(g, sub, "--counts", "counts", a.counts);
    from_config(g, sub, "--taxonomy", "taxonomy", a.taxonomy);
    from_config(g, sub, "--threshold-category", "threshold_category", a.thresholds.category_min);
    from_config(g, sub, "--threshold-target", "threshold_target", a.thresholds.target_min);
    from_config(g, sub, "--threshold-competitor", "threshold_competitor", a.thresholds.competitor_min);
    if (a.log.empty() || a.taxonomy.empty()) throw sbc::ConfigError("classify needs --log and --taxonomy");

    Run run("classify", g.out_dir, g.seed.value_or(0));
    const auto taxonomy = sbc::UrlTaxonomy::from_json(run.input(a.taxonomy));
    run.input(a.log);
    const auto log = sbc::load_query_log(a.log);
    const auto result = sbc::classify_queries(log, taxonomy, a.thresholds);
    run.config() = {{"log", a.log},
                    {"counts", a.counts},
                    {"taxonomy", a.taxonomy},
                    {"threshold_category", a.thresholds.category_min},
                    {"threshold_target", a.thresholds.target_min},
                    {"threshold_competitor", a.thresholds.competitor_min}};
    run.output("classification.csv", sbc::classification_to_csv(result.queries));
    run.output("scatter.csv", sbc::scatter_to_csv(sbc::emit_classification_scatter(result.queries)));
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
    if (!a.counts.empty()) {
        run.input(a.counts);
        const auto panel = sbc::build_volume_panel(sbc::load_daily_counts(a.counts), result.queries);
        for (const auto& w : panel.warnings) std::cerr << "warning: " << w << "\n";
        run.output("volume_panel.csv", sbc::volume_panel_to_csv(panel));
    }
    run.finish(argv);
    std::cout << "classified " << result.queries.size() << " queries into " << g.out_dir << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// Panel-based commands
// ---------------------------------------------------------------------------

struct PanelArgs {
    std::string panel;
    std::string schema;
    bool weekly = false;
    int k = 10;
    int k_tensor = 5;
    int k_monotone = 10;
    double delta = 0.01;
    bool x2_controls = false;
};

void bind_panel(const Global& g, CLI::App* sub, PanelArgs& a) {
    from_config(g, sub, "panel", "panel", a.panel);
    from_config(g, sub, "--schema", "schema", a.schema);
    from_config(g, sub, "--weekly", "weekly", a.weekly);
    from_config(g, sub, "--k", "k", a.k);
    from_config(g, sub, "--k-tensor", "k_tensor", a.k_tensor);
    from_config(g, sub, "--k-monotone", "k_monotone", a.k_monotone);
    from_config(g, sub, "--delta", "delta", a.delta);
    from_config(g, sub, "--x2-controls", "x2_controls", a.x2_controls);
    if (a.panel.empty()) throw sbc::ConfigError("a panel CSV is required");
}

sbc::MmmPanel load_panel(Run& run, const PanelArgs& a) {
    sbc::PanelSchema schema;
    if (!a.schema.empty()) schema = sbc::PanelSchema::from_json(run.input(a.schema));
    const auto text = run.input(a.panel);
    // without an explicit x2 list, unmapped columns are non-search channels
    auto panel = sbc::parse_panel(text, sbc::infer_schema(text, schema));
    if (a.weekly) panel = sbc::aggregate_weekly(panel);
    return panel;
}

sbc::EstimatorOptions estimator_options(const PanelArgs& a) {
    sbc::EstimatorOptions o;
    o.k = a.k;
    o.k_tensor = a.k_tensor;
    o.k_monotone = a.k_monotone;
    o.delta = a.delta;
    o.x2_controls = a.x2_controls;
    return o;
}

ordered_json panel_config(const PanelArgs& a) {
    return {{"panel", a.panel}, {"schema", a.schema},       {"weekly", a.weekly},
            {"k", a.k},         {"k_tensor", a.k_tensor},   {"k_monotone", a.k_monotone},
            {"delta", a.delta}, {"x2_controls", a.x2_controls}};
}

int cmd_fit(const Global& g, CLI::App* sub, PanelArgs a, std::string method, const std::vector<std::string>& argv) {
    bind_panel(g, sub, a);
    from_config(g, sub, "--method", "method", method);
    Run run("fit", g.out_dir, g.seed.value_or(0));
    const auto panel = load_panel(run, a);
    run.config() = panel_config(a);
    run.config()["method"] = method;
    const auto options = estimator_options(a);

    std::string key = method;
    std::replace(key.begin(), key.end(), '-', '_');
    if (key == "full_mmm") {
        const auto full = sbc::estimate_full_mmm(panel, options);
        run.output("full_mmm.json", full.to_json() + "\n");
        if (full.stage1.fit) run.output("curves.csv", full.stage1.fit->curves_csv());
        run.finish(argv);
        std::cout << "beta1 " << full.beta1() << " (se " << full.stage1.se << ")\n";
        for (const auto& c : full.channels)
            std::cout << "channel " << c.name << " " << c.estimate << " (se " << c.se << ")"
                      << (c.aliased ? " aliased" : "") << ", not bias-corrected\n";
        return 0;
    }
    const auto est = sbc::estimate(sbc::method_from_string(method), panel, options);
    run.output("estimate.json", est.to_json() + "\n");
    if (est.fit) {
        run.output("curves.csv", est.fit->curves_csv());
        run.output("partial_residuals.csv", est.fit->partial_residuals_csv());
    }
    run.finish(argv);
    for (const auto& w : est.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << sbc::to_string(est.method) << " beta1 " << est.beta1 << " (se " << est.se << ")\n";
    return 0;
}

int cmd_compare(const Global& g, CLI::App* sub, PanelArgs a, std::optional<double> ref, std::optional<double> ref_se,
                bool index, bool per_year, std::string methods, const std::vector<std::string>& argv) {
    bind_panel(g, sub, a);
    from_config(g, sub, "--index-to-reference", "index_to_reference", index);
    from_config(g, sub, "--per-year", "per_year", per_year);
    from_config(g, sub, "--methods", "methods", methods);
    if (sub->count("--reference") == 0 && g.config.contains("reference")) ref = g.config.at("reference").get<double>();
    if (sub->count("--reference-se") == 0 && g.config.contains("reference_se"))
        ref_se = g.config.at("reference_se").get<double>();

    Run run("compare", g.out_dir, g.seed.value_or(0));
    const auto panel = load_panel(run, a);
    std::vector<sbc::Method> ms;
    for (const auto& m : split_list(methods)) ms.push_back(sbc::method_from_string(m));
    if (ms.empty()) ms = sbc::table_methods();
    std::optional<sbc::Reference> reference;
    if (ref) reference = sbc::Reference{*ref, ref_se.value_or(0.0)};
    if (index && !reference) throw sbc::ConfigError("--index-to-reference needs --reference");

    run.config() = panel_config(a);
    run.config()["methods"] = methods;
    run.config()["index_to_reference"] = index;
    run.config()["per_year"] = per_year;
    if (reference) run.config()["reference"] = {{"estimate", reference->estimate}, {"se", reference->se}};

    const auto rep = sbc::compare_estimators(panel, reference, index, per_year, ms, estimator_options(a));
    run.output("comparison.json", rep.to_json() + "\n");
    run.output("comparison.csv", rep.to_csv());
    run.output("comparison.txt", rep.to_text());
    run.finish(argv);
    std::cout << rep.to_text();
    return 0;
}

// ---------------------------------------------------------------------------
// Simulation commands
// ---------------------------------------------------------------------------

struct ScenarioArgs {
    std::string scenario_config;
    std::string scenario;
    std::optional<int> n_days;
    std::optional<double> beta1;
};

/// Scenario config: file, then global --config, then flags.
sbc::ScenarioConfig resolve_scenario(const Global& g, Run& run, const ScenarioArgs& a,
                                     const std::vector<std::string>& strip) {
    nlohmann::json j = nlohmann::json::object();
    if (!a.scenario_config.empty()) {
        try {
            j = nlohmann::json::parse(run.input(a.scenario_config));
        } catch (const nlohmann::json::exception& e) {
            throw sbc::ConfigError("scenario config '" + a.scenario_config + "' is not valid JSON: " + e.what());
        }
        if (!j.is_object()) throw sbc::ConfigError("scenario config must be a JSON object");
    }
    for (const auto& [k, v] : g.config.items()) j[k] = v;
    for (const auto& k : strip) j.erase(k);
    if (!a.scenario.empty()) j["scenario"] = a.scenario;
    if (a.n_days) j["n_days"] = *a.n_days;
    if (a.beta1) j["beta1"] = *a.beta1;
    if (g.seed) j["seed"] = *g.seed;
    return sbc::ScenarioConfig::from_json(j.dump());
}

int cmd_simulate(const Global& g, const ScenarioArgs& a, bool write_truth_series, const std::vector<std::string>& argv) {
    Run probe("simulate", g.out_dir, 0);
    const auto cfg = resolve_scenario(g, probe, a, {});
    Run run("simulate", g.out_dir, cfg.seed);
    if (!a.scenario_config.empty()) run.input(a.scenario_config);
    run.config() = ordered_json::parse(cfg.to_json());
    const auto out = sbc::simulate(cfg);
    run.output("panel.csv", sbc::panel_to_csv(out.panel, [&] {
                   sbc::PanelSchema s;
                   for (const auto& [name, series] : out.panel.x2) s.x2.push_back(name);
                   return s;
               }()));
    auto truth = ordered_json::parse(out.truth_json());
    if (!write_truth_series)
        for (const char* k : {"demand", "f", "eta", "epsilon"}) truth.erase(k);
    run.output("truth.json", truth.dump(2) + "\n");
    run.output("dag.txt", sbc::to_edge_list(out.dag));
    run.finish(argv);
    for (const auto& w : out.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "simulated " << out.panel.size() << " days (" << sbc::to_string(cfg.scenario) << "), gamma "
              << out.gamma << "\n";
    return 0;
}

int cmd_replicates(const Global& g, CLI::App* sub, const ScenarioArgs& a, int reps, std::string methods, int threads,
                   bool x2_controls, const std::vector<std::string>& argv) {
    from_config(g, sub, "--reps", "reps", reps);
    from_config(g, sub, "--methods", "methods", methods);
    from_config(g, sub, "--threads", "threads", threads);
    from_config(g, sub, "--x2-controls", "x2_controls", x2_controls);
    std::vector<sbc::Method> ms;
    for (const auto& m : split_list(methods)) ms.push_back(sbc::method_from_string(m));

    Run probe("replicates", g.out_dir, 0);
    const auto cfg = resolve_scenario(g, probe, a, {"reps", "methods", "threads", "x2_controls"});
    Run run("replicates", g.out_dir, cfg.seed);
    if (!a.scenario_config.empty()) run.input(a.scenario_config);
    run.config() = ordered_json::parse(cfg.to_json());
    run.config()["reps"] = reps;
    run.config()["methods"] = methods;
    run.config()["threads"] = threads;
    run.config()["x2_controls"] = x2_controls;
    sbc::EstimatorOptions options;
    options.x2_controls = x2_controls;
    const auto study = sbc::replicate_study(cfg, reps, ms, options, threads);
    run.output("replicates.json", study.to_json() + "\n");
    run.output("replicates.csv", study.to_csv());
    run.output("replicate_records.csv", study.records_csv());
    run.finish(argv);
    std::cout << study.to_text();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::string> args(argv, argv + argc);
    CLI::App app{"Search-ad ROAS estimation with search bias correction"};
    app.set_version_flag("--version", SBC_VERSION);
    app.require_subcommand(1);

    Global g;
    std::uint64_t seed_value = 0;
    auto* seed_opt = app.add_option("--seed", seed_value, "Random seed");
    app.add_option("--out-dir", g.out_dir, "Output directory")->capture_default_str();
    app.add_option("--config", g.config_path, "JSON config; command-line flags take precedence");

    ClassifyArgs ca;
    auto* classify = app.add_subcommand("classify", "Classify queries and build search-volume series");
    classify->add_option("--log", ca.log, "Query log CSV (query,url,count)");
    classify->add_option("--counts", ca.counts, "Daily query counts CSV (date,query,count)");
    classify->add_option("--taxonomy", ca.taxonomy, "URL taxonomy JSON");
    classify->add_option("--threshold-category", ca.thresholds.category_min, "Minimum category share");
    classify->add_option("--threshold-target", ca.thresholds.target_min, "Advertiser share above which a query is target");
    classify->add_option("--threshold-competitor", ca.thresholds.competitor_min,
                         "Competitor share above which a query is competitor");

    PanelArgs fit_args;
    std::string fit_method = "sbc";
    auto* fit = app.add_subcommand("fit", "Fit one estimator to a panel");
    auto add_panel_opts = [](CLI::App* sub, PanelArgs& a) {
        sub->add_option("panel", a.panel, "Panel CSV");
        sub->add_option("--schema", a.schema, "Column-name schema JSON");
        sub->add_flag("--weekly", a.weekly, "Aggregate to ISO weeks before fitting");
        sub->add_option("--k", a.k, "Smooth basis dimension");
        sub->add_option("--k-tensor", a.k_tensor, "Tensor basis dimension per margin");
        sub->add_option("--k-monotone", a.k_monotone, "Monotone spend basis dimension");
        sub->add_option("--delta", a.delta, "Relative spend step for marginal ROAS");
        sub->add_flag("--x2-controls", a.x2_controls, "Add smooths of non-search channels as controls");
    };
    add_panel_opts(fit, fit_args);
    fit->add_option("--method", fit_method, "naive, demand_adjusted, sbc, sbc_tensor, sbc_marginal or full_mmm");

    PanelArgs cmp_args;
    std::optional<double> ref, ref_se;
    bool index = false, per_year = false;
    std::string cmp_methods;
    auto* compare = app.add_subcommand("compare", "Run several estimators side by side");
    add_panel_opts(compare, cmp_args);
    compare->add_option("--reference", ref, "Reference ROAS estimate (e.g. from an experiment)");
    compare->add_option("--reference-se", ref_se, "Standard error of the reference");
    compare->add_flag("--index-to-reference", index, "Divide estimates and se's by the reference estimate");
    compare->add_flag("--per-year", per_year, "One row per calendar year instead of one pooled row");
    compare->add_option("--methods", cmp_methods, "Comma-separated methods (default: naive,demand_adjusted,sbc,sbc_tensor)");

    ScenarioArgs sim_args;
    bool truth_series = false;
    auto* simulate = app.add_subcommand("simulate", "Generate a synthetic panel with known ROAS");
    auto add_scenario_opts = [](CLI::App* sub, ScenarioArgs& a) {
        sub->add_option("scenario_config", a.scenario_config, "Scenario config JSON");
        sub->add_option("--scenario", a.scenario,
                        "figure2, figure3, figure4, counterexample_demand_edge or no_confounding");
        sub->add_option("--n-days", a.n_days, "Number of days");
        sub->add_option("--beta1", a.beta1, "True ROAS");
    };
    add_scenario_opts(simulate, sim_args);
    simulate->add_flag("--truth-series", truth_series, "Include latent series in truth.json");

    ScenarioArgs rep_args;
    int reps = 100, threads = 1;
    bool rep_x2 = false;
    std::string rep_methods = "naive,demand_adjusted,sbc";
    auto* replicates = app.add_subcommand("replicates", "Bias and coverage over simulated replicates");
    add_scenario_opts(replicates, rep_args);
    replicates->add_option("--reps", reps, "Number of replicates");
    replicates->add_option("--methods", rep_methods, "Comma-separated methods");
    replicates->add_option("--threads", threads, "Worker threads");
    replicates->add_flag("--x2-controls", rep_x2, "Add smooths of non-search channels as controls");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitInput;
    }

    try {
        if (*seed_opt) g.seed = seed_value;
        if (!g.config_path.empty()) {
            try {
                g.config = nlohmann::json::parse(read_text(g.config_path));
            } catch (const nlohmann::json::exception& e) {
                throw sbc::ConfigError("config '" + g.config_path + "' is not valid JSON: " + e.what());
            }
            if (!g.config.is_object()) throw sbc::ConfigError("config must be a JSON object");
        }
        try {
            if (*classify) return cmd_classify(g, classify, ca, args);
            if (*fit) return cmd_fit(g, fit, fit_args, fit_method, args);
            if (*compare) return cmd_compare(g, compare, cmp_args, ref, ref_se, index, per_year, cmp_methods, args);
            if (*simulate) return cmd_simulate(g, sim_args, truth_series, args);
            if (*replicates) return cmd_replicates(g, replicates, rep_args, reps, rep_methods, threads, rep_x2, args);
        } catch (const nlohmann::json::exception& e) {
            throw sbc::ConfigError(std::string("config value has the wrong type: ") + e.what());
        }
    } catch (const sbc::InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const sbc::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitEstimation;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitInternal;
}
