#include "sbc/estimators.hpp"

#include "sbc/csv.hpp"
#include "sbc/report.hpp"
#include "sbc/spline.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace sbc {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct MethodName {
    Method method;
    const char* name;
};
constexpr MethodName kMethodNames[] = {
    {Method::naive, "naive"},
    {Method::demand_adjusted, "demand_adjusted"},
    {Method::sbc_additive, "sbc"},
    {Method::sbc_tensor, "sbc_tensor"},
    {Method::sbc_monotone_marginal, "sbc_marginal"},
};

std::vector<SmoothTerm> volume_smooths(int k) {
    return {SmoothTerm::cr("v1", k), SmoothTerm::cr("v2", k), SmoothTerm::cr("v3", k)};
}

RoasEstimate from_fit(Method method, FitResult fit) {
    RoasEstimate est;
    est.method = method;
    est.beta1 = fit.coefficient("x1");
    est.se = fit.std_error("x1");
    est.warnings = fit.warnings;
    est.fit = std::make_shared<const FitResult>(std::move(fit));
    return est;
}

std::string x2_column(const std::string& channel) { return "x2." + channel; }

}  // namespace

std::string to_string(Method m) {
    for (const auto& mn : kMethodNames)
        if (mn.method == m) return mn.name;
    return "unknown";
}

std::vector<std::string> method_names() {
    std::vector<std::string> out;
    for (const auto& mn : kMethodNames) out.emplace_back(mn.name);
    return out;
}

Method method_from_string(const std::string& name) {
    std::string key = name;
    std::replace(key.begin(), key.end(), '-', '_');
    std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (key == "sbc_additive") return Method::sbc_additive;
    if (key == "sbc_monotone_marginal" || key == "marginal") return Method::sbc_monotone_marginal;
    for (const auto& mn : kMethodNames)
        if (key == mn.name) return mn.method;
    std::string valid;
    for (const auto& n : method_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw ConfigError("unknown method '" + name + "'; valid methods: " + valid);
}

std::string column_label(Method m) {
    switch (m) {
        case Method::naive: return "naive";
        case Method::demand_adjusted: return "demand-adjusted";
        case Method::sbc_additive: return "SBC";
        case Method::sbc_tensor: return "SBC (full)";
        case Method::sbc_monotone_marginal: return "SBC (marginal)";
    }
    return "unknown";
}

std::vector<Method> table_methods() {
    return {Method::naive, Method::demand_adjusted, Method::sbc_additive, Method::sbc_tensor};
}

Columns panel_columns(const MmmPanel& panel) {
    Columns c;
    c["y"] = panel.y;
    c["x1"] = panel.x1;
    c["v1"] = panel.v1;
    c["v2"] = panel.v2;
    c["v3"] = panel.v3;
    c["category"] = panel.category_volume();
    for (const auto& [name, series] : panel.x2) c[x2_column(name)] = series;
    return c;
}

std::string RoasEstimate::to_json() const {
    nlohmann::ordered_json j;
    j["method"] = to_string(method);
    j["beta1"] = beta1;
    if (std::isnan(se))
        j["se"] = nullptr;
    else
        j["se"] = se;
    if (index_base) j["index_base"] = *index_base;
    j["warnings"] = warnings;
    if (fit) {
        j["edf"] = fit->edf_total;
        j["adj_r2"] = fit->adj_r2;
        j["fit"] = nlohmann::ordered_json::parse(fit->to_json());
    }
    return j.dump(2);
}

// ---------------------------------------------------------------------------
// Estimators
// ---------------------------------------------------------------------------

RoasEstimate estimate_naive(const MmmPanel& panel, const EstimatorOptions& options) {
    ModelSpec spec{"y", {"x1"}, {}};
    return from_fit(Method::naive, fit_reml(spec, panel_columns(panel), options.reml));
}

RoasEstimate estimate_demand_adjusted(const MmmPanel& panel, const EstimatorOptions& options) {
    ModelSpec spec{"y", {"x1"}, {SmoothTerm::cr("category", options.k)}};
    return from_fit(Method::demand_adjusted, fit_reml(spec, panel_columns(panel), options.reml));
}

double spend_r2_on_volumes(const MmmPanel& panel, int k) {
    const Columns cols = panel_columns(panel);
    std::vector<MatrixXd> blocks;
    blocks.push_back(MatrixXd::Ones(static_cast<Index>(panel.size()), 1));
    for (const char* v : {"v1", "v2", "v3"}) {
        const auto& x = cols.at(v);
        const auto distinct = count_distinct(x);
        if (distinct <= 1) continue;
        if (distinct == 2) {
            blocks.push_back(Eigen::Map<const VectorXd>(x.data(), static_cast<Index>(x.size())));
            continue;
        }
        blocks.push_back(build_crs(x, std::min<int>(k, static_cast<int>(distinct))).design(x));
    }
    Index width = 0;
    for (const auto& b : blocks) width += b.cols();
    MatrixXd X(static_cast<Index>(panel.size()), width);
    Index off = 0;
    for (const auto& b : blocks) {
        X.middleCols(off, b.cols()) = b;
        off += b.cols();
    }
    const VectorXd y = Eigen::Map<const VectorXd>(panel.x1.data(), static_cast<Index>(panel.size()));
    const double tss = (y.array() - y.mean()).square().sum();
    if (!(tss > 0.0)) return 1.0;
    const VectorXd fitted = X * X.colPivHouseholderQr().solve(y);
    return 1.0 - (y - fitted).squaredNorm() / tss;
}

namespace {

void add_x2_controls(ModelSpec& spec, const MmmPanel& panel, const EstimatorOptions& options) {
    if (!options.x2_controls) return;
    if (panel.x2.empty()) throw ConfigError("x2 controls requested but the panel has no non-search spend columns");
    for (const auto& [name, series] : panel.x2) spec.smooths.push_back(SmoothTerm::cr(x2_column(name), options.k));
}

ModelSpec sbc_spec(const MmmPanel& panel, const EstimatorOptions& options) {
    ModelSpec spec{"y", {"x1"}, volume_smooths(options.k)};
    add_x2_controls(spec, panel, options);
    return spec;
}

void check_collinearity(const MmmPanel& panel, const EstimatorOptions& options) {
    const double r2 = spend_r2_on_volumes(panel, options.k);
    if (r2 > options.collinearity_r2)
        throw CollinearityError("spend is almost perfectly explained by search volumes (R^2 = " +
                                    report::fixed(r2, 6) + ")",
                                r2);
}

}  // namespace

RoasEstimate estimate_sbc(const MmmPanel& panel, const EstimatorOptions& options) {
    check_collinearity(panel, options);
    return from_fit(Method::sbc_additive, fit_reml(sbc_spec(panel, options), panel_columns(panel), options.reml));
}

RoasEstimate estimate_sbc_tensor(const MmmPanel& panel, const EstimatorOptions& options) {
    const int k = options.k_tensor;
    const auto required = static_cast<std::size_t>(3 * (k * k * k - 1));
    if (panel.size() < required)
        throw SampleSizeError("tensor smooth needs at least " + std::to_string(required) + " observations, panel has " +
                                  std::to_string(panel.size()),
                              required);
    check_collinearity(panel, options);
    ModelSpec spec{"y", {"x1"}, {SmoothTerm::tensor("v1", "v2", "v3", k)}};
    add_x2_controls(spec, panel, options);
    return from_fit(Method::sbc_tensor, fit_reml(spec, panel_columns(panel), options.reml));
}

double marginal_roas(const std::function<double(double)>& s, std::span<const double> x, double delta) {
    if (!(delta > 0.0 && delta <= 0.1)) throw ConfigError("delta must lie in (0, 0.1]");
    double num = 0.0;
    double total = 0.0;
    for (double xt : x) {
        num += s((1.0 + delta) * xt) - s(xt);
        total += xt;
    }
    if (total == 0.0) throw EstimationError("marginal ROAS undefined: total spend is zero");
    return num / (delta * total);
}

RoasEstimate estimate_sbc_monotone_marginal(const MmmPanel& panel, const EstimatorOptions& options) {
    if (!(options.delta > 0.0 && options.delta <= 0.1)) throw ConfigError("delta must lie in (0, 0.1]");
    if (std::accumulate(panel.x1.begin(), panel.x1.end(), 0.0) == 0.0)
        throw EstimationError("marginal ROAS undefined: total spend is zero");

    // Smoothing parameters of the volume smooths come from the additive fit.
    const RoasEstimate sbc = estimate_sbc(panel, options);
    const Columns cols = panel_columns(panel);
    ModelSpec vspec{"y", {}, sbc_spec(panel, options).smooths};
    const ModelDesign vd = build_model_design(vspec, cols);
    std::vector<double> v_lambda(vd.lambda_labels.size(), 0.0);
    for (std::size_t j = 0; j < vd.lambda_labels.size(); ++j) {
        const auto& labels = sbc.fit->lambda_labels;
        const auto it = std::find(labels.begin(), labels.end(), vd.lambda_labels[j]);
        if (it == labels.end()) throw EstimationError("missing smoothing parameter for " + vd.lambda_labels[j]);
        v_lambda[j] = sbc.fit->lambda[static_cast<std::size_t>(it - labels.begin())];
    }
    std::vector<double> per_penalty(vd.design.penalties.size());
    for (std::size_t j = 0; j < per_penalty.size(); ++j)
        per_penalty[j] = v_lambda[static_cast<std::size_t>(vd.penalty_parameter[j])];
    const VectorXd sv = vd.design.penalty_diagonal(per_penalty);

    const MonotoneBasis mb = build_monotone(panel.x1, options.k_monotone);
    const MatrixXd Bx = mb.design(panel.x1);
    const Index n = Bx.rows();
    const Index pv = vd.design.X.cols();
    const Index px = Bx.cols();
    const Index p = pv + px;
    MatrixXd X(n, p);
    X << vd.design.X, Bx;
    MatrixXd D1 = MatrixXd::Zero(px - 1, px);
    for (Index i = 0; i + 1 < px; ++i) {
        D1(i, i) = -1.0;
        D1(i, i + 1) = 1.0;
    }
    const double dscale = (Bx.transpose() * Bx).norm() / (D1.transpose() * D1).norm();
    std::vector<bool> constrained(static_cast<std::size_t>(p), false);
    for (Index j = pv; j < p; ++j) constrained[static_cast<std::size_t>(j)] = true;
    const VectorXd y = vd.y;

    VectorXd best_coef;
    double best_gcv = std::numeric_limits<double>::infinity();
    for (double rho = -8.0; rho <= 12.0 + 1e-9; rho += 1.0) {
        const double lam = std::exp(rho) * dscale;
        MatrixXd A = MatrixXd::Zero(n + pv + px - 1, p);
        A.topRows(n) = X;
        A.block(n, 0, pv, pv).diagonal() = sv.cwiseSqrt();
        A.block(n + pv, pv, px - 1, px) = std::sqrt(lam) * D1;
        VectorXd b = VectorXd::Zero(A.rows());
        b.head(n) = y;
        const VectorXd coef = constrained_least_squares(A, b, constrained);
        const double rss = (y - X * coef).squaredNorm();

        // Effective degrees of freedom with active constraints treated as fixed.
        std::vector<Index> keep;
        for (Index j = 0; j < p; ++j)
            if (!(constrained[static_cast<std::size_t>(j)] && coef[j] <= 0.0)) keep.push_back(j);
        MatrixXd Ak(A.rows(), static_cast<Index>(keep.size()));
        MatrixXd Xk(n, static_cast<Index>(keep.size()));
        for (std::size_t i = 0; i < keep.size(); ++i) {
            Ak.col(static_cast<Index>(i)) = A.col(keep[i]);
            Xk.col(static_cast<Index>(i)) = X.col(keep[i]);
        }
        const MatrixXd G = Ak.transpose() * Ak;
        const MatrixXd H = G.ldlt().solve(Xk.transpose() * Xk);
        const double edf = H.trace();
        const double denom = static_cast<double>(n) - edf;
        if (denom <= 0.0) continue;
        const double gcv = static_cast<double>(n) * rss / (denom * denom);
        if (gcv < best_gcv) {
            best_gcv = gcv;
            best_coef = coef;
        }
    }
    if (best_coef.size() == 0) throw EstimationError("monotone spend curve could not be fitted");

    const VectorXd cx = best_coef.tail(px);
    const auto s = [&](double x) { return mb.evaluate(x).dot(cx); };
    RoasEstimate est;
    est.method = Method::sbc_monotone_marginal;
    est.beta1 = marginal_roas(s, panel.x1, options.delta);
    est.se = kNaN;
    est.warnings = sbc.warnings;
    est.warnings.emplace_back("standard error not reported for marginal ROAS");
    return est;
}

RoasEstimate estimate(Method method, const MmmPanel& panel, const EstimatorOptions& options) {
    switch (method) {
        case Method::naive: return estimate_naive(panel, options);
        case Method::demand_adjusted: return estimate_demand_adjusted(panel, options);
        case Method::sbc_additive: return estimate_sbc(panel, options);
        case Method::sbc_tensor: return estimate_sbc_tensor(panel, options);
        case Method::sbc_monotone_marginal: return estimate_sbc_monotone_marginal(panel, options);
    }
    throw ConfigError("unknown method");
}

// ---------------------------------------------------------------------------
// Two-stage full MMM
// ---------------------------------------------------------------------------

FullMmmEstimate estimate_full_mmm(const MmmPanel& panel, const EstimatorOptions& options) {
    if (panel.x2.empty()) throw ConfigError("full MMM needs at least one non-search channel");
    FullMmmEstimate out;
    out.stage1 = estimate_sbc(panel, options);

    Columns cols = panel_columns(panel);
    auto& resid = cols["stage2_response"];
    resid.resize(panel.size());
    for (std::size_t t = 0; t < panel.size(); ++t) resid[t] = panel.y[t] - out.stage1.beta1 * panel.x1[t];

    ModelSpec spec{"stage2_response", {}, volume_smooths(options.k)};
    for (const auto& [name, series] : panel.x2) {
        ChannelEstimate ch;
        ch.name = name;
        if (count_distinct(series) <= 1) {
            ch.aliased = true;
            ch.se = std::numeric_limits<double>::infinity();
        } else {
            spec.linear.push_back(x2_column(name));
        }
        out.channels.push_back(ch);
    }
    auto fit = std::make_shared<const FitResult>(fit_reml(spec, cols, options.reml));
    for (auto& ch : out.channels) {
        if (ch.aliased) continue;
        ch.estimate = fit->coefficient(x2_column(ch.name));
        ch.se = fit->std_error(x2_column(ch.name));
        ch.t = ch.estimate / ch.se;
    }
    out.stage2 = std::move(fit);
    return out;
}

std::string FullMmmEstimate::to_json() const {
    nlohmann::ordered_json j;
    j["beta1"] = stage1.beta1;
    j["beta1_se"] = stage1.se;
    j["channels_bias_corrected"] = channels_bias_corrected;
    nlohmann::ordered_json chans = nlohmann::ordered_json::array();
    for (const auto& c : channels) {
        nlohmann::ordered_json cj{{"name", c.name}, {"estimate", c.estimate}, {"t", c.t}, {"aliased", c.aliased}};
        if (std::isfinite(c.se))
            cj["se"] = c.se;
        else
            cj["se"] = nullptr;
        chans.push_back(cj);
    }
    j["channels"] = chans;
    j["stage1"] = nlohmann::ordered_json::parse(stage1.to_json());
    if (stage2) j["stage2"] = nlohmann::ordered_json::parse(stage2->to_json());
    return j.dump(2);
}

// ---------------------------------------------------------------------------
// Comparison
// ---------------------------------------------------------------------------

std::optional<Reference> ComparisonReport::reported_reference() const {
    if (!reference) return std::nullopt;
    if (!indexed) return reference;
    return Reference{1.0, reference->se / reference->estimate};
}

namespace {

ComparisonRow run_row(const std::string& label, const MmmPanel& panel, const std::vector<Method>& methods,
                      const EstimatorOptions& options, double divisor) {
    ComparisonRow row;
    row.label = label;
    row.n = panel.size();
    for (Method m : methods) {
        ComparisonCell cell;
        try {
            const auto est = estimate(m, panel, options);
            cell.estimate = est.beta1 / divisor;
            cell.se = est.se / divisor;
            cell.ok = true;
        } catch (const Error& e) {
            cell.error = e.what();
        }
        row.cells.push_back(cell);
    }
    return row;
}

}  // namespace

ComparisonReport compare_estimators(const MmmPanel& panel, const std::optional<Reference>& reference,
                                    bool index_to_reference, bool per_year, const std::vector<Method>& methods,
                                    const EstimatorOptions& options) {
    ComparisonReport rep;
    rep.methods = methods;
    for (Method m : methods) rep.columns.push_back(column_label(m));
    rep.reference = reference;
    rep.indexed = reference.has_value() && index_to_reference;
    if (rep.indexed && reference->estimate == 0.0) throw ConfigError("cannot index to a zero reference estimate");
    const double divisor = rep.indexed ? reference->estimate : 1.0;
    if (per_year) {
        for (const auto& [year, slice] : split_by_year(panel))
            rep.rows.push_back(run_row(std::to_string(year), slice, methods, options, divisor));
    } else {
        rep.rows.push_back(run_row("all", panel, methods, options, divisor));
    }
    return rep;
}

std::string ComparisonReport::to_json() const {
    nlohmann::ordered_json j;
    j["indexed"] = indexed;
    j["columns"] = columns;
    std::vector<std::string> keys;
    for (Method m : methods) keys.push_back(to_string(m));
    j["methods"] = keys;
    if (const auto ref = reported_reference()) j["reference"] = {{"estimate", ref->estimate}, {"se", ref->se}};
    nlohmann::ordered_json rows_j = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        nlohmann::ordered_json rj;
        rj["label"] = r.label;
        rj["n"] = r.n;
        nlohmann::ordered_json cells = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < r.cells.size(); ++i) {
            const auto& c = r.cells[i];
            nlohmann::ordered_json cj{{"method", keys[i]}, {"ok", c.ok}};
            if (c.ok) {
                cj["estimate"] = c.estimate;
                cj["se"] = std::isnan(c.se) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(c.se);
            } else {
                cj["error"] = c.error;
            }
            cells.push_back(cj);
        }
        rj["cells"] = cells;
        rows_j.push_back(rj);
    }
    j["rows"] = rows_j;
    return j.dump(2);
}

std::string ComparisonReport::to_csv() const {
    std::string out = csv::format_row({"row", "n", "method", "estimate", "se", "error"});
    for (const auto& r : rows)
        for (std::size_t i = 0; i < r.cells.size(); ++i) {
            const auto& c = r.cells[i];
            out += csv::format_row({r.label, std::to_string(r.n), to_string(methods[i]),
                                    c.ok ? csv::format_double(c.estimate) : "", c.ok ? csv::format_double(c.se) : "",
                                    c.error});
        }
    if (const auto ref = reported_reference())
        out += csv::format_row({"reference", "", "reference", csv::format_double(ref->estimate),
                                csv::format_double(ref->se), ""});
    return out;
}

std::string ComparisonReport::to_text() const {
    std::vector<std::string> header{""};
    header.insert(header.end(), columns.begin(), columns.end());
    if (reference) header.emplace_back("reference");
    std::vector<std::vector<std::string>> body;
    const auto ref = reported_reference();
    for (const auto& r : rows) {
        std::vector<std::string> line{r.label};
        for (const auto& c : r.cells) line.push_back(c.ok ? report::estimate_cell(c.estimate, c.se) : "n/a");
        if (ref) line.push_back(report::estimate_cell(ref->estimate, ref->se));
        body.push_back(std::move(line));
    }
    std::string out = report::format_table(header, body);
    if (indexed) out += "(indexed: reference point estimate = 1)\n";
    for (const auto& r : rows)
        for (std::size_t i = 0; i < r.cells.size(); ++i)
            if (!r.cells[i].ok) out += r.label + " " + columns[i] + ": " + r.cells[i].error + "\n";
    return out;
}

}  // namespace sbc
