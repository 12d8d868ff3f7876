#pragma once

#include "sbc/errors.hpp"
#include "sbc/spline.hpp"

#include <Eigen/Dense>

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace sbc {

/// Named data columns, all of equal length.
using Columns = std::map<std::string, std::vector<double>>;

struct SmoothTerm {
    enum class Kind { cr, tensor };

    Kind kind = Kind::cr;
    std::vector<std::string> variables;  ///< one for cr, three for tensor
    int k = 10;                          ///< basis dimension (per margin for tensor)
    /// Terms sharing a non-empty group share one smoothing parameter.
    std::string lambda_group;

    static SmoothTerm cr(std::string var, int k = 10, std::string group = {});
    static SmoothTerm tensor(std::string a, std::string b, std::string c, int k = 5);

    std::string label() const;
};

struct ModelSpec {
    std::string response;
    std::vector<std::string> linear;
    std::vector<SmoothTerm> smooths;

    /// Throws ConfigError on overlapping names or an empty model.
    void validate() const;
};

/// Design matrix with diagonal penalties. Every penalty is a diagonal block
/// starting at `offset`; the total penalty for smoothing parameters lambda is
/// diag(sum_j lambda_j * P_j).
struct PenalizedDesign {
    struct Penalty {
        Eigen::Index offset = 0;
        Eigen::VectorXd diagonal;
        std::string label;
    };

    Eigen::MatrixXd X;
    std::vector<std::string> column_names;
    std::vector<Penalty> penalties;

    Eigen::Index cols() const { return X.cols(); }
    /// diag(sum_j lambda_j P_j); lambdas.size() must equal penalties.size().
    Eigen::VectorXd penalty_diagonal(const std::vector<double>& lambdas) const;
    /// Columns no penalty touches (intercept, linear terms, null-space directions).
    Eigen::Index unpenalized_dim() const;
};

struct PlsResult {
    Eigen::VectorXd beta;
    double rss = 0.0;
    double penalty = 0.0;       ///< beta' S beta
    double edf_total = 0.0;     ///< tr((X'X+S)^-1 X'X)
    Eigen::VectorXd edf;        ///< diagonal of that matrix
    Eigen::MatrixXd inverse;    ///< (X'X+S)^-1
    double log_det = 0.0;       ///< log|X'X+S|
    double log_det_penalty = 0.0;  ///< log|S|_+
};

/// Stateful penalized least-squares solver. The QR of X is computed once so
/// repeated solves for different smoothing parameters are cheap.
class PlsSolver {
public:
    PlsSolver(const PenalizedDesign& design, const Eigen::VectorXd& y);

    /// Throws RankError naming aliased columns when X'X+S is singular.
    /// Without `with_inverse`, `inverse` and `edf` are left empty.
    PlsResult solve(const std::vector<double>& lambdas, bool with_inverse = true) const;

    /// Restricted likelihood for lambda = exp(rho), sigma^2 profiled out.
    double reml(const std::vector<double>& rho) const;
    double reml(const PlsResult& r) const;

    Eigen::Index n() const { return n_; }
    Eigen::Index null_dim() const { return null_dim_; }

private:
    const PenalizedDesign& design_;
    Eigen::Index n_ = 0;
    Eigen::Index p_ = 0;
    Eigen::Index null_dim_ = 0;
    Eigen::VectorXd scale_;     ///< column norms
    Eigen::MatrixXd R0_;        ///< R of QR(X D^-1)
    Eigen::VectorXd f_;         ///< Q' y
    double rss_offset_ = 0.0;   ///< ||y||^2 - ||f||^2
    double log_scale_sum_ = 0.0;
    Eigen::VectorXd structural_;  ///< sum_j P_j, zero on the null space
};

/// Penalized least squares at fixed smoothing parameters.
PlsResult fit_pls(const PenalizedDesign& design, const Eigen::VectorXd& y, const std::vector<double>& lambdas);

/// One smooth term as it appears in a fitted model.
struct SmoothComponent {
    SmoothTerm term;
    std::variant<std::monostate, SmoothBasis, TensorBasis> basis;  ///< monostate for linear fallback
    Eigen::Index offset = 0;
    Eigen::Index width = 0;
    double linear_mean = 0.0;  ///< centering for the two-value linear fallback
    std::vector<int> penalty_index;

    /// Constrained basis rows for a set of data rows.
    Eigen::MatrixXd design(const Columns& data) const;
};

struct SmoothCurve {
    std::string label;
    std::string variable;  ///< the variable on the x axis
    std::vector<double> x, fit, se, lower, upper;
    std::vector<double> data_x, partial_residual;
};

struct TermSummary {
    std::string label;
    std::string kind;  ///< "intercept", "linear", "smooth"
    double edf = 0.0;
    std::vector<double> lambda;
};

struct FitResult {
    ModelSpec spec;
    std::vector<std::string> column_names;
    Eigen::VectorXd beta;
    Eigen::VectorXd se;
    Eigen::MatrixXd covariance;  ///< Bayesian posterior covariance
    std::vector<std::string> lambda_labels;
    std::vector<double> lambda;
    double sigma2 = 0.0;
    double reml = 0.0;
    double edf_total = 0.0;  ///< includes the intercept
    double r2 = 0.0;
    double adj_r2 = 0.0;
    std::size_t n = 0;
    std::vector<TermSummary> terms;
    std::vector<SmoothComponent> components;
    Eigen::VectorXd y, fitted, residuals;
    std::vector<SmoothCurve> curves;
    std::vector<std::string> warnings;
    /// (rho vector, criterion) for every coarse-grid point visited.
    std::vector<std::pair<std::vector<double>, double>> grid_trace;

    Eigen::Index column(const std::string& name) const;
    double coefficient(const std::string& name) const { return beta[column(name)]; }
    double std_error(const std::string& name) const { return se[column(name)]; }
    /// Contribution of smooth term i (index into components) at new data.
    Eigen::VectorXd smooth_contribution(std::size_t i, const Columns& data) const;
    Eigen::VectorXd predict(const Columns& data) const;

    std::string to_json() const;
    /// CSV of all smooth curves: label,variable,x,fit,se,lower,upper.
    std::string curves_csv() const;
    /// CSV of partial residuals: label,variable,x,partial_residual.
    std::string partial_residuals_csv() const;
};

class RemlConvergenceError : public ConvergenceError {
public:
    RemlConvergenceError(const std::string& msg, std::shared_ptr<const FitResult> best)
        : ConvergenceError(msg), best_(std::move(best)) {}
    const FitResult& best() const { return *best_; }

private:
    std::shared_ptr<const FitResult> best_;
};

struct RemlOptions {
    double log_lambda_min = -12.0;
    double log_lambda_max = 16.0;
    double grid_min = -8.0;
    double grid_max = 12.0;
    int grid_sweeps = 2;
    double simplex_tol = 1e-6;
    int max_iterations = 2000;
    int curve_points = 100;
    /// Fixed smoothing parameters (skip selection) when non-empty.
    std::vector<double> fixed_lambda;
};

/// Builds the design for a model. Degenerate smooths are handled here: a
/// smooth of a constant variable is dropped, one of a two-valued variable
/// becomes linear, and k shrinks to the number of distinct values.
struct ModelDesign {
    PenalizedDesign design;
    Eigen::VectorXd y;
    std::vector<SmoothComponent> components;
    std::vector<std::string> lambda_labels;   ///< one per smoothing parameter
    std::vector<int> penalty_parameter;       ///< penalty index -> parameter index
    std::vector<std::string> warnings;
};
ModelDesign build_model_design(const ModelSpec& spec, const Columns& data);

/// Gaussian additive model with REML-selected smoothing parameters.
FitResult fit_reml(const ModelSpec& spec, const Columns& data, const RemlOptions& options = {});

/// Minimizes ||A x - b|| with x_i >= 0 for constrained[i]; other entries free.
Eigen::VectorXd constrained_least_squares(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                          const std::vector<bool>& constrained);

}  // namespace sbc
