#pragma once

#include "sbc/dataset.hpp"
#include "sbc/gam.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sbc {

enum class Method { naive, demand_adjusted, sbc_additive, sbc_tensor, sbc_monotone_marginal };

/// Canonical names: naive, demand_adjusted, sbc, sbc_tensor, sbc_marginal.
std::string to_string(Method m);
/// Accepts canonical names with '-' or '_'. Throws ConfigError listing valid names.
Method method_from_string(const std::string& name);
std::vector<std::string> method_names();

struct EstimatorOptions {
    int k = 10;                       ///< univariate smooth basis dimension
    int k_tensor = 5;                 ///< per margin
    int k_monotone = 10;
    double delta = 0.01;              ///< relative spend perturbation for marginal ROAS
    double collinearity_r2 = 0.999;   ///< reject SBC above this R^2 of x1 on V
    /// Add s(x2 channel) controls to the SBC model (needed when a shared
    /// budget links non-search spend to x1).
    bool x2_controls = false;
    RemlOptions reml;
};

struct RoasEstimate {
    Method method = Method::naive;
    double beta1 = 0.0;
    double se = 0.0;  ///< NaN when not reported
    std::shared_ptr<const FitResult> fit;
    std::optional<double> index_base;
    std::vector<std::string> warnings;

    std::string to_json() const;
};

/// Data columns used in model formulas: y, x1, v1, v2, v3, category, and
/// "x2.<name>" for every non-search channel.
Columns panel_columns(const MmmPanel& panel);

RoasEstimate estimate_naive(const MmmPanel& panel, const EstimatorOptions& options = {});
RoasEstimate estimate_demand_adjusted(const MmmPanel& panel, const EstimatorOptions& options = {});
RoasEstimate estimate_sbc(const MmmPanel& panel, const EstimatorOptions& options = {});
RoasEstimate estimate_sbc_tensor(const MmmPanel& panel, const EstimatorOptions& options = {});
RoasEstimate estimate_sbc_monotone_marginal(const MmmPanel& panel, const EstimatorOptions& options = {});
RoasEstimate estimate(Method method, const MmmPanel& panel, const EstimatorOptions& options = {});

/// R^2 of x1 regressed on the unpenalized smooth bases of v1, v2, v3.
double spend_r2_on_volumes(const MmmPanel& panel, int k = 10);

/// sum_t (s((1+delta) x_t) - s(x_t)) / (delta * sum_t x_t).
/// Throws EstimationError when sum x is zero and ConfigError for delta outside (0, 0.1].
double marginal_roas(const std::function<double(double)>& s, std::span<const double> x, double delta);

struct ChannelEstimate {
    std::string name;
    double estimate = 0.0;
    double se = 0.0;
    double t = 0.0;
    bool aliased = false;  ///< constant channel, not estimable
};

struct FullMmmEstimate {
    RoasEstimate stage1;
    std::vector<ChannelEstimate> channels;
    std::shared_ptr<const FitResult> stage2;
    /// Stage-2 coefficients carry no selection-bias correction.
    bool channels_bias_corrected = false;

    double beta1() const { return stage1.beta1; }
    std::string to_json() const;
};

FullMmmEstimate estimate_full_mmm(const MmmPanel& panel, const EstimatorOptions& options = {});

struct Reference {
    double estimate = 0.0;
    double se = 0.0;
};

struct ComparisonCell {
    double estimate = 0.0;
    double se = 0.0;
    bool ok = false;
    std::string error;
};

struct ComparisonRow {
    std::string label;  ///< "all" or the year
    std::size_t n = 0;
    std::vector<ComparisonCell> cells;  ///< aligned with ComparisonReport::columns
};

struct ComparisonReport {
    std::vector<std::string> columns;
    std::vector<Method> methods;
    std::vector<ComparisonRow> rows;
    std::optional<Reference> reference;  ///< as given, in raw units
    bool indexed = false;

    /// Reference in the report's units: (1, se/estimate) when indexed.
    std::optional<Reference> reported_reference() const;
    std::string to_json() const;
    std::string to_csv() const;
    /// Aligned text table with "estimate (se)" cells.
    std::string to_text() const;
};

/// Column headings used in reports.
std::string column_label(Method m);

/// Default comparison columns: naive, demand-adjusted, SBC, SBC (full).
std::vector<Method> table_methods();

/// Runs each method; failures are recorded per cell. With a reference and
/// `index_to_reference`, estimates and se's are divided by the reference
/// point estimate. With `per_year`, adds one row per calendar year.
ComparisonReport compare_estimators(const MmmPanel& panel, const std::optional<Reference>& reference = std::nullopt,
                                    bool index_to_reference = true, bool per_year = false,
                                    const std::vector<Method>& methods = table_methods(),
                                    const EstimatorOptions& options = {});

}  // namespace sbc
