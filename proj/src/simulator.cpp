#include "sbc/simulator.hpp"

#include "sbc/csv.hpp"
#include "sbc/errors.hpp"
#include "sbc/report.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <stdexcept>
#include <thread>

namespace sbc {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal(double mean, double sd) {
    if (has_spare_) {
        has_spare_ = false;
        return mean + sd * spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return mean + sd * r * std::cos(theta);
}

// ---------------------------------------------------------------------------
// Scenarios and configuration
// ---------------------------------------------------------------------------

namespace {

const std::map<Scenario, std::string>& scenario_names() {
    static const std::map<Scenario, std::string> names = {
        {Scenario::figure2, "figure2"},
        {Scenario::figure3, "figure3"},
        {Scenario::figure4, "figure4"},
        {Scenario::counterexample_demand_edge, "counterexample_demand_edge"},
        {Scenario::no_confounding, "no_confounding"},
    };
    return names;
}

template <typename E>
struct EnumNames {
    std::vector<std::pair<E, std::string>> items;
    std::string name(E e) const {
        for (const auto& [k, v] : items)
            if (k == e) return v;
        return "unknown";
    }
    E parse(const std::string& s, const std::string& what) const {
        std::string valid;
        for (const auto& [k, v] : items) {
            if (v == s) return k;
            valid += (valid.empty() ? "" : ", ") + v;
        }
        throw ConfigError("unknown " + what + " '" + s + "'; valid: " + valid);
    }
};

const EnumNames<ScenarioConfig::Confounding> kFamilies{{{ScenarioConfig::Confounding::linear, "linear"},
                                                         {ScenarioConfig::Confounding::sqrt, "sqrt"},
                                                         {ScenarioConfig::Confounding::sine, "sine"},
                                                         {ScenarioConfig::Confounding::interaction, "interaction"}}};
const EnumNames<ScenarioConfig::SpendRule> kSpendRules{{{ScenarioConfig::SpendRule::linear_v1, "linear_v1"},
                                                         {ScenarioConfig::SpendRule::linear_all, "linear_all"},
                                                         {ScenarioConfig::SpendRule::interaction, "interaction"}}};

bool has_x2(Scenario s) { return s == Scenario::figure3 || s == Scenario::figure4; }

}  // namespace

std::string to_string(Scenario s) { return scenario_names().at(s); }

Scenario scenario_from_string(const std::string& s) {
    std::string valid;
    for (const auto& [k, v] : scenario_names()) {
        if (v == s) return k;
        valid += (valid.empty() ? "" : ", ") + v;
    }
    throw ConfigError("unknown scenario '" + s + "'; valid: " + valid);
}

Dag scenario_dag(Scenario s) {
    switch (s) {
        case Scenario::figure2: return builtin_diagram("figure2");
        case Scenario::figure3: return builtin_diagram("figure3");
        case Scenario::figure4: return builtin_diagram("figure4");
        case Scenario::counterexample_demand_edge:
            return builtin_diagram("figure2").with_edges({{"consumer_demand", "X", {}}});
        case Scenario::no_confounding:
            return builtin_diagram("figure2").without_edges({{"V", "X"}, {"V", "auction"}});
    }
    throw ConfigError("unknown scenario");
}

void ScenarioConfig::validate() const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be positive");
    };
    auto nonneg = [](double v, const char* name) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be nonnegative");
    };
    if (n_days < 30) throw ConfigError("n_days must be at least 30, got " + std::to_string(n_days));
    try {
        (void)parse_iso_date(start_date);
    } catch (const std::exception&) {
        throw ConfigError("start_date '" + start_date + "' is not a valid YYYY-MM-DD date");
    }
    positive(demand_base, "demand_base");
    if (!(annual_amplitude >= 0.0 && annual_amplitude < 1.0)) throw ConfigError("annual_amplitude must lie in [0, 1)");
    for (double d : dow) positive(d, "dow multipliers");
    if (!(std::abs(ar_rho) < 1.0)) throw ConfigError("ar_rho must lie in (-1, 1)");
    positive(ar_sd, "ar_sd");
    for (double l : loading) positive(l, "loading");
    for (double s : volume_sd) nonneg(s, "volume_sd");
    positive(auction_sd, "auction_sd");
    positive(noise_sd, "noise_sd");
    positive(shock_sd, "shock_sd");
    positive(x2_level, "x2_level");
    if (!(x2_month_spread >= 0.0 && x2_month_spread < 1.0)) throw ConfigError("x2_month_spread must lie in [0, 1)");
    positive(x2_noise_sd, "x2_noise_sd");
    positive(budget_slack, "budget_slack");
    for (double v : {beta0, beta1, demand_effect, spend_intercept, spend_slope, spend_interaction, shock_to_spend,
                     shock_to_sales, x2_demand_elasticity, beta2, funnel, f_coef[0], f_coef[1], f_coef[2]})
        if (!std::isfinite(v)) throw ConfigError("configuration values must be finite");
}

std::string ScenarioConfig::to_json() const {
    nlohmann::ordered_json j;
    j["scenario"] = to_string(scenario);
    j["n_days"] = n_days;
    j["start_date"] = start_date;
    j["seed"] = seed;
    j["beta0"] = beta0;
    j["beta1"] = beta1;
    j["demand_base"] = demand_base;
    j["annual_amplitude"] = annual_amplitude;
    j["dow"] = dow;
    j["ar_rho"] = ar_rho;
    j["ar_sd"] = ar_sd;
    j["loading"] = loading;
    j["volume_sd"] = volume_sd;
    j["funnel"] = funnel;
    j["demand_effect"] = demand_effect;
    j["f_family"] = kFamilies.name(f_family);
    j["f_coef"] = f_coef;
    j["spend_rule"] = kSpendRules.name(spend_rule);
    j["spend_intercept"] = spend_intercept;
    j["spend_slope"] = spend_slope;
    j["auction_sd"] = auction_sd;
    j["spend_interaction"] = spend_interaction;
    j["noise_sd"] = noise_sd;
    j["shock_sd"] = shock_sd;
    j["shock_to_spend"] = shock_to_spend;
    j["shock_to_sales"] = shock_to_sales;
    j["x2_level"] = x2_level;
    j["x2_month_spread"] = x2_month_spread;
    j["x2_demand_elasticity"] = x2_demand_elasticity;
    j["x2_noise_sd"] = x2_noise_sd;
    j["beta2"] = beta2;
    j["budget_slack"] = budget_slack;
    return j.dump(2);
}

ScenarioConfig ScenarioConfig::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("scenario config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("scenario config must be a JSON object");
    ScenarioConfig c;
    try {
        for (const auto& [key, val] : j.items()) {
            if (key == "scenario") c.scenario = scenario_from_string(val.get<std::string>());
            else if (key == "n_days") c.n_days = val.get<int>();
            else if (key == "start_date") c.start_date = val.get<std::string>();
            else if (key == "seed") c.seed = val.get<std::uint64_t>();
            else if (key == "beta0") c.beta0 = val.get<double>();
            else if (key == "beta1") c.beta1 = val.get<double>();
            else if (key == "demand_base") c.demand_base = val.get<double>();
            else if (key == "annual_amplitude") c.annual_amplitude = val.get<double>();
            else if (key == "dow") c.dow = val.get<std::array<double, 7>>();
            else if (key == "ar_rho") c.ar_rho = val.get<double>();
            else if (key == "ar_sd") c.ar_sd = val.get<double>();
            else if (key == "loading") c.loading = val.get<std::array<double, 3>>();
            else if (key == "volume_sd") c.volume_sd = val.get<std::array<double, 3>>();
            else if (key == "funnel") c.funnel = val.get<double>();
            else if (key == "demand_effect") c.demand_effect = val.get<double>();
            else if (key == "f_family") c.f_family = kFamilies.parse(val.get<std::string>(), "f_family");
            else if (key == "f_coef") c.f_coef = val.get<std::array<double, 3>>();
            else if (key == "spend_rule") c.spend_rule = kSpendRules.parse(val.get<std::string>(), "spend_rule");
            else if (key == "spend_intercept") c.spend_intercept = val.get<double>();
            else if (key == "spend_slope") c.spend_slope = val.get<double>();
            else if (key == "auction_sd") c.auction_sd = val.get<double>();
            else if (key == "spend_interaction") c.spend_interaction = val.get<double>();
            else if (key == "noise_sd") c.noise_sd = val.get<double>();
            else if (key == "shock_sd") c.shock_sd = val.get<double>();
            else if (key == "shock_to_spend") c.shock_to_spend = val.get<double>();
            else if (key == "shock_to_sales") c.shock_to_sales = val.get<double>();
            else if (key == "x2_level") c.x2_level = val.get<double>();
            else if (key == "x2_month_spread") c.x2_month_spread = val.get<double>();
            else if (key == "x2_demand_elasticity") c.x2_demand_elasticity = val.get<double>();
            else if (key == "x2_noise_sd") c.x2_noise_sd = val.get<double>();
            else if (key == "beta2") c.beta2 = val.get<double>();
            else if (key == "budget_slack") c.budget_slack = val.get<double>();
            else throw ConfigError("unknown scenario config key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("scenario config has a value of the wrong type: ") + e.what());
    }
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

namespace {

double sample_cov(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double c = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) c += (a[i] - ma) * (b[i] - mb);
    return c / (n - 1.0);
}

}  // namespace

SimOutput simulate(const ScenarioConfig& cfg) {
    cfg.validate();
    SimOutput out;
    out.config = cfg;
    out.dag = scenario_dag(cfg.scenario);

    const auto n = static_cast<std::size_t>(cfg.n_days);
    const Date start = parse_iso_date(cfg.start_date);
    const bool with_x2 = has_x2(cfg.scenario);
    const bool counterexample = cfg.scenario == Scenario::counterexample_demand_edge;
    const bool unconfounded = cfg.scenario == Scenario::no_confounding;
    const double nominal_x1 = cfg.spend_intercept + cfg.spend_slope * cfg.loading[0] * cfg.demand_base;

    Rng rng(cfg.seed);
    MmmPanel& p = out.panel;
    p.dates.resize(n);
    p.y.resize(n);
    p.x1.resize(n);
    p.v1.resize(n);
    p.v2.resize(n);
    p.v3.resize(n);
    std::vector<double> x2(with_x2 ? n : 0);
    out.demand.resize(n);
    out.f.resize(n);
    out.eta.resize(n);
    out.epsilon.resize(n);

    std::map<int, double> month_plan;
    std::size_t clipped_x1 = 0, clipped_x2 = 0;
    double a = rng.normal(0.0, cfg.ar_sd / std::sqrt(1.0 - cfg.ar_rho * cfg.ar_rho));
    for (std::size_t t = 0; t < n; ++t) {
        const Date d = start + std::chrono::days(static_cast<int>(t));
        p.dates[t] = d;
        if (t > 0) a = cfg.ar_rho * a + rng.normal(0.0, cfg.ar_sd);
        const unsigned wd = std::chrono::weekday(d).iso_encoding() - 1;
        const double season = 1.0 + cfg.annual_amplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / 365.25);
        const double D = cfg.demand_base * season * cfg.dow[wd] * std::exp(a);
        out.demand[t] = D;

        const double vol_noise[3] = {rng.normal(0.0, cfg.volume_sd[0]), rng.normal(0.0, cfg.volume_sd[1]),
                                     rng.normal(0.0, cfg.volume_sd[2])};
        const double auction = rng.normal(0.0, cfg.auction_sd);
        const double shock = rng.normal(0.0, cfg.shock_sd);
        const double eta = rng.normal(0.0, cfg.noise_sd);
        const double x2_noise = rng.normal(0.0, cfg.x2_noise_sd);

        // Non-search channel: monthly plan adjusted toward demand.
        double plan = 0.0;
        double x2t = 0.0;
        if (with_x2) {
            const std::chrono::year_month_day ymd(d);
            const int month_key = static_cast<int>(ymd.year()) * 12 + static_cast<int>(static_cast<unsigned>(ymd.month()));
            auto it = month_plan.find(month_key);
            if (it == month_plan.end())
                it = month_plan.emplace(month_key, cfg.x2_level * (1.0 + cfg.x2_month_spread * (2.0 * rng.uniform() - 1.0)))
                         .first;
            plan = it->second;
            x2t = plan * (1.0 + cfg.x2_demand_elasticity * (D / cfg.demand_base - 1.0)) + x2_noise;
            if (x2t < 0.0) {
                x2t = 0.0;
                ++clipped_x2;
            }
            x2[t] = x2t;
        }

        const double funnel = with_x2 ? 1.0 + cfg.funnel * (x2t / cfg.x2_level - 1.0) : 1.0;
        double v[3];
        for (int i = 0; i < 3; ++i) v[i] = cfg.loading[static_cast<std::size_t>(i)] * D * std::exp(vol_noise[i]) * std::max(funnel, 0.0);
        p.v1[t] = v[0];
        p.v2[t] = v[1];
        p.v3[t] = v[2];
        double z[3];
        for (int i = 0; i < 3; ++i) z[i] = v[i] / (cfg.loading[static_cast<std::size_t>(i)] * cfg.demand_base) - 1.0;

        // Search spend.
        double x1;
        if (unconfounded) {
            x1 = nominal_x1 + auction;
        } else {
            double g = 0.0;
            switch (cfg.spend_rule) {
                case ScenarioConfig::SpendRule::linear_v1: g = v[0]; break;
                case ScenarioConfig::SpendRule::linear_all:
                    g = cfg.loading[0] * (v[0] + v[1] + v[2]) / (cfg.loading[0] + cfg.loading[1] + cfg.loading[2]);
                    break;
                case ScenarioConfig::SpendRule::interaction:
                    g = cfg.loading[0] * cfg.demand_base * (1.0 + cfg.spend_interaction * z[0] * z[1]);
                    break;
            }
            x1 = cfg.spend_intercept + cfg.spend_slope * g + auction;
            if (counterexample) x1 += cfg.shock_to_spend * shock;
        }
        if (cfg.scenario == Scenario::figure3) {
            const double budget = cfg.budget_slack * (nominal_x1 + plan);
            x1 = std::min(x1, budget - x2t);
        }
        if (x1 < 0.0) {
            x1 = 0.0;
            ++clipped_x1;
        }
        p.x1[t] = x1;

        // Sales.
        double f = 0.0;
        if (!unconfounded) {
            f += cfg.demand_effect * D;
            if (counterexample) f += cfg.shock_to_sales * shock;
            switch (cfg.f_family) {
                case ScenarioConfig::Confounding::linear:
                    for (int i = 0; i < 3; ++i) f += cfg.f_coef[static_cast<std::size_t>(i)] * v[i];
                    break;
                case ScenarioConfig::Confounding::sqrt:
                    for (int i = 0; i < 3; ++i) f += cfg.f_coef[static_cast<std::size_t>(i)] * std::sqrt(v[i]);
                    break;
                case ScenarioConfig::Confounding::sine:
                    for (int i = 0; i < 3; ++i)
                        f += cfg.f_coef[static_cast<std::size_t>(i)] *
                             std::sin(2.0 * std::numbers::pi * v[i] / (cfg.loading[static_cast<std::size_t>(i)] * cfg.demand_base));
                    break;
                case ScenarioConfig::Confounding::interaction: f += cfg.f_coef[0] * z[0] * z[1]; break;
            }
        }
        if (with_x2) f += cfg.beta2 * x2t;
        out.f[t] = f;
        out.eta[t] = eta;
        out.epsilon[t] = f + eta;
        p.y[t] = cfg.beta0 + cfg.beta1 * x1 + f + eta;
    }
    if (with_x2) p.x2["tv"] = std::move(x2);

    const double limit = 0.05 * static_cast<double>(n);
    if (static_cast<double>(clipped_x1) > limit || static_cast<double>(clipped_x2) > limit)
        throw ConfigError("more than 5% of generated spend was negative (x1: " + std::to_string(clipped_x1) +
                          ", x2: " + std::to_string(clipped_x2) + " of " + std::to_string(n) + " days)");
    out.clipped = clipped_x1 + clipped_x2;
    if (out.clipped > 0)
        out.warnings.push_back("clipped " + std::to_string(out.clipped) + " negative spend values to zero");
    for (std::size_t t = 0; t < n; ++t)
        if (p.y[t] < 0.0)
            throw ConfigError("generated sales are negative on " + format_iso_date(p.dates[t]) +
                              "; raise beta0 or lower noise_sd");

    p.validate();
    out.gamma = expected_naive_bias(out);
    return out;
}

double expected_naive_bias(const SimOutput& output) {
    const auto& x = output.panel.x1;
    const double var = sample_cov(x, x);
    if (!(var > 0.0)) return kNaN;
    return sample_cov(x, output.epsilon) / var;
}

std::string SimOutput::truth_json() const {
    nlohmann::ordered_json j;
    j["scenario"] = to_string(config.scenario);
    j["seed"] = config.seed;
    j["n"] = panel.size();
    j["beta0"] = config.beta0;
    j["beta1"] = config.beta1;
    if (has_x2(config.scenario)) j["beta2"] = config.beta2;
    j["gamma"] = gamma;
    j["clipped"] = clipped;
    j["warnings"] = warnings;
    j["demand"] = demand;
    j["f"] = f;
    j["eta"] = eta;
    j["epsilon"] = epsilon;
    return j.dump(2);
}

// ---------------------------------------------------------------------------
// Replicate studies
// ---------------------------------------------------------------------------

const MethodSummary& ReplicateStudy::summary(Method m) const {
    for (const auto& s : summaries)
        if (s.method == m) return s;
    throw ConfigError("study has no results for method " + to_string(m));
}

ReplicateStudy replicate_study(const ScenarioConfig& config, int n_reps, const std::vector<Method>& methods,
                               const EstimatorOptions& options, int threads) {
    if (n_reps < 2) throw ConfigError("replicate study needs at least 2 replicates");
    if (methods.empty()) throw ConfigError("replicate study needs at least one method");
    config.validate();

    ReplicateStudy study;
    study.config = config;
    study.n_reps = n_reps;
    study.truth = config.beta1;
    const std::size_t m = methods.size();
    study.records.resize(static_cast<std::size_t>(n_reps) * m);
    std::vector<double> gammas(static_cast<std::size_t>(n_reps), kNaN);

    auto run = [&](int i) {
        ScenarioConfig c = config;
        c.seed = config.seed + static_cast<std::uint64_t>(i);
        std::optional<SimOutput> sim;
        std::string sim_error;
        try {
            sim = simulate(c);
            gammas[static_cast<std::size_t>(i)] = sim->gamma;
        } catch (const Error& e) {
            sim_error = e.what();
        }
        for (std::size_t k = 0; k < m; ++k) {
            ReplicateRecord& r = study.records[static_cast<std::size_t>(i) * m + k];
            r.replicate = i;
            r.seed = c.seed;
            r.method = methods[k];
            if (!sim) {
                r.error = sim_error;
                continue;
            }
            r.gamma = sim->gamma;
            try {
                const auto est = estimate(methods[k], sim->panel, options);
                r.estimate = est.beta1;
                r.se = est.se;
                r.ok = true;
            } catch (const Error& e) {
                r.error = e.what();
            }
        }
    };

    const int workers = std::clamp(threads, 1, n_reps);
    if (workers == 1) {
        for (int i = 0; i < n_reps; ++i) run(i);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (int i = w; i < n_reps; i += workers) run(i);
            });
        for (auto& th : pool) th.join();
    }

    double gsum = 0.0;
    int gcount = 0;
    for (double g : gammas)
        if (std::isfinite(g)) {
            gsum += g;
            ++gcount;
        }
    study.mean_gamma = gcount ? gsum / gcount : kNaN;

    for (std::size_t k = 0; k < m; ++k) {
        MethodSummary s;
        s.method = methods[k];
        std::vector<double> est, se;
        for (int i = 0; i < n_reps; ++i) {
            const auto& r = study.records[static_cast<std::size_t>(i) * m + k];
            if (r.ok) {
                est.push_back(r.estimate);
                se.push_back(r.se);
            } else {
                ++s.n_failed;
            }
        }
        s.n_ok = static_cast<int>(est.size());
        if (s.n_ok > 0) {
            double sum = 0.0, sq = 0.0, se_sum = 0.0;
            int covered = 0;
            bool have_se = true;
            for (std::size_t i = 0; i < est.size(); ++i) {
                sum += est[i];
                sq += (est[i] - study.truth) * (est[i] - study.truth);
                if (std::isnan(se[i])) have_se = false;
                se_sum += se[i];
                if (std::abs(est[i] - study.truth) <= 1.96 * se[i]) ++covered;
            }
            s.mean_estimate = sum / s.n_ok;
            s.mean_bias = s.mean_estimate - study.truth;
            double var = 0.0;
            for (double e : est) var += (e - s.mean_estimate) * (e - s.mean_estimate);
            s.sd = s.n_ok > 1 ? std::sqrt(var / (s.n_ok - 1)) : kNaN;
            s.rmse = std::sqrt(sq / s.n_ok);
            s.coverage = have_se ? static_cast<double>(covered) / s.n_ok : kNaN;
            s.mean_se = have_se ? se_sum / s.n_ok : kNaN;
        } else {
            s.mean_estimate = s.mean_bias = s.sd = s.rmse = s.coverage = s.mean_se = kNaN;
        }
        study.summaries.push_back(s);
    }
    return study;
}

namespace {

nlohmann::ordered_json number_or_null(double v) {
    return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

std::string ReplicateStudy::to_json() const {
    nlohmann::ordered_json j;
    j["scenario"] = to_string(config.scenario);
    j["seed"] = config.seed;
    j["n_reps"] = n_reps;
    j["truth"] = truth;
    j["mean_gamma"] = number_or_null(mean_gamma);
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& s : summaries)
        rows.push_back({{"method", to_string(s.method)},
                        {"n_ok", s.n_ok},
                        {"n_failed", s.n_failed},
                        {"mean_estimate", number_or_null(s.mean_estimate)},
                        {"mean_bias", number_or_null(s.mean_bias)},
                        {"sd", number_or_null(s.sd)},
                        {"rmse", number_or_null(s.rmse)},
                        {"coverage", number_or_null(s.coverage)},
                        {"mean_se", number_or_null(s.mean_se)}});
    j["methods"] = rows;
    std::vector<std::string> failures;
    for (const auto& r : records)
        if (!r.ok) failures.push_back("replicate " + std::to_string(r.replicate) + " " + to_string(r.method) + ": " + r.error);
    j["failures"] = failures;
    return j.dump(2);
}

std::string ReplicateStudy::to_csv() const {
    std::string out = csv::format_row(
        {"method", "n_ok", "n_failed", "mean_estimate", "mean_bias", "sd", "rmse", "coverage", "mean_se"});
    for (const auto& s : summaries)
        out += csv::format_row({to_string(s.method), std::to_string(s.n_ok), std::to_string(s.n_failed),
                                csv::format_double(s.mean_estimate), csv::format_double(s.mean_bias),
                                csv::format_double(s.sd), csv::format_double(s.rmse), csv::format_double(s.coverage),
                                csv::format_double(s.mean_se)});
    return out;
}

std::string ReplicateStudy::records_csv() const {
    std::string out = csv::format_row({"replicate", "seed", "method", "ok", "estimate", "se", "gamma", "error"});
    for (const auto& r : records)
        out += csv::format_row({std::to_string(r.replicate), std::to_string(r.seed), to_string(r.method),
                                r.ok ? "1" : "0", r.ok ? csv::format_double(r.estimate) : "",
                                r.ok ? csv::format_double(r.se) : "", csv::format_double(r.gamma), r.error});
    return out;
}

std::string ReplicateStudy::to_text() const {
    std::vector<std::vector<std::string>> rows;
    for (const auto& s : summaries)
        rows.push_back({to_string(s.method), std::to_string(s.n_ok), std::to_string(s.n_failed),
                        report::fixed(s.mean_estimate, 4), report::fixed(s.mean_bias, 4), report::fixed(s.sd, 4),
                        report::fixed(s.rmse, 4), report::fixed(s.coverage, 2), report::fixed(s.mean_se, 4)});
    std::string out = "scenario " + to_string(config.scenario) + ", truth " + report::fixed(truth, 4) + ", " +
                      std::to_string(n_reps) + " replicates, mean gamma " + report::fixed(mean_gamma, 4) + "\n";
    out += report::format_table({"method", "ok", "failed", "mean", "bias", "sd", "rmse", "coverage", "mean_se"}, rows);
    return out;
}

}  // namespace sbc
