#pragma once

#include "sbc/causal_graph.hpp"
#include "sbc/dataset.hpp"
#include "sbc/estimators.hpp"

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace sbc {

/// 64-bit Mersenne Twister (std::mt19937_64, whose output sequence the C++
/// standard fixes) with uniforms built from the top 53 bits and normals from
/// the Box-Muller transform, so streams are identical on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    double uniform();  ///< [0, 1)
    double normal(double mean = 0.0, double sd = 1.0);

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

enum class Scenario { figure2, figure3, figure4, counterexample_demand_edge, no_confounding };
std::string to_string(Scenario s);
Scenario scenario_from_string(const std::string& s);

/// DAG the scenario draws from.
Dag scenario_dag(Scenario s);

struct ScenarioConfig {
    enum class Confounding { linear, sqrt, sine, interaction };
    enum class SpendRule { linear_v1, linear_all, interaction };

    Scenario scenario = Scenario::figure2;
    int n_days = 500;
    std::string start_date = "2021-01-04";
    std::uint64_t seed = 42;

    double beta0 = 5000.0;
    double beta1 = 2.0;

    // Demand: base * (1 + amplitude sin(2 pi t / 365.25)) * dow[weekday] * exp(a_t),
    // a_t = rho a_{t-1} + N(0, ar_sd).
    double demand_base = 1000.0;
    double annual_amplitude = 0.2;
    std::array<double, 7> dow = {1.1, 1.05, 1.0, 1.0, 0.95, 0.9, 1.0};  ///< Monday first
    double ar_rho = 0.7;
    double ar_sd = 0.1;

    // Search volumes: v_i = loading_i * demand * exp(N(0, volume_sd_i)).
    std::array<double, 3> loading = {10.0, 4.0, 6.0};
    std::array<double, 3> volume_sd = {0.0, 0.15, 0.15};
    /// Funnel effect of non-search spend on volumes (figure3/4).
    double funnel = 0.0;

    // Organic contributions: eps0 = demand_effect * demand; eps1 = sum_i f_coef_i h_i(v_i) with
    // h_i(v) = v (linear), sqrt(v) (sqrt), sin(2 pi v / (loading_i demand_base)) (sine).
    // For interaction, eps1 = f_coef[0] * z1 * z2 with z_i = v_i / (loading_i demand_base) - 1.
    double demand_effect = 2.0;
    Confounding f_family = Confounding::linear;
    std::array<double, 3> f_coef = {0.1, 0.1, 0.1};

    // Search spend: x1 = spend_intercept + spend_slope * g(V) + N(0, auction_sd), where
    // g = v1 (linear_v1), loading_1 (v1 + v2 + v3) / sum(loading) (linear_all), or
    // loading_1 demand_base (1 + spend_interaction z1 z2) (interaction).
    SpendRule spend_rule = SpendRule::linear_v1;
    double spend_intercept = 0.0;
    double spend_slope = 0.1;
    double auction_sd = 150.0;
    double spend_interaction = 4.0;

    double noise_sd = 200.0;  ///< eta

    // Counterexample: a demand shock outside search volume that moves spend and sales.
    double shock_sd = 100.0;
    double shock_to_spend = 1.0;
    double shock_to_sales = 3.0;

    // Non-search channel (figure3/4).
    double x2_level = 500.0;
    double x2_month_spread = 0.3;   ///< monthly plan varies uniformly by +-spread
    double x2_demand_elasticity = 0.5;
    double x2_noise_sd = 50.0;
    double beta2 = 1.5;
    /// figure3 daily budget = slack * (nominal x1 + monthly x2 plan).
    double budget_slack = 1.1;

    /// Throws ConfigError on invalid values.
    void validate() const;
    std::string to_json() const;
    /// Keys mirror the field names; unknown keys are rejected.
    static ScenarioConfig from_json(const std::string& text);
};

struct SimOutput {
    ScenarioConfig config;
    MmmPanel panel;
    Dag dag;
    std::vector<double> demand;
    /// Structural contribution to y other than beta0 + beta1 x1 and eta.
    std::vector<double> f;
    std::vector<double> eta;
    /// f + eta: the error term of the naive regression y = beta0 + beta1 x1 + epsilon.
    std::vector<double> epsilon;
    double gamma = 0.0;  ///< cov(x1, epsilon) / var(x1)
    std::size_t clipped = 0;
    std::vector<std::string> warnings;

    /// {"scenario", "beta0", "beta1", "gamma", "seed", "n", "clipped", "f", "eta", "epsilon"}.
    std::string truth_json() const;
};

SimOutput simulate(const ScenarioConfig& config);

/// Realized cov(x1, epsilon) / var(x1) from the stored draws.
double expected_naive_bias(const SimOutput& output);

struct ReplicateRecord {
    int replicate = 0;
    std::uint64_t seed = 0;
    Method method = Method::naive;
    bool ok = false;
    double estimate = 0.0;
    double se = 0.0;
    double gamma = 0.0;
    std::string error;
};

struct MethodSummary {
    Method method = Method::naive;
    int n_ok = 0;
    int n_failed = 0;
    double mean_estimate = 0.0;
    double mean_bias = 0.0;
    double sd = 0.0;
    double rmse = 0.0;
    double coverage = 0.0;  ///< NaN when se is not reported
    double mean_se = 0.0;
};

struct ReplicateStudy {
    ScenarioConfig config;
    int n_reps = 0;
    double truth = 0.0;
    double mean_gamma = 0.0;
    std::vector<MethodSummary> summaries;
    std::vector<ReplicateRecord> records;

    const MethodSummary& summary(Method m) const;
    std::string to_json() const;
    std::string to_csv() const;
    std::string records_csv() const;
    std::string to_text() const;
};

/// Replicate i uses seed config.seed + i. Results do not depend on `threads`.
ReplicateStudy replicate_study(const ScenarioConfig& config, int n_reps, const std::vector<Method>& methods,
                               const EstimatorOptions& options = {}, int threads = 1);

}  // namespace sbc
