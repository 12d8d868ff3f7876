#pragma once

#include <Eigen/Dense>

#include <array>
#include <span>
#include <string>
#include <vector>

namespace sbc {

/// Natural cubic regression spline parameterized by its values at the knots.
///
/// With coefficients beta (one per knot) the curve interpolates beta at the
/// knots and has second derivatives F * beta there, zero at both ends.
/// Outside [knots.front(), knots.back()] the curve continues linearly.
class CubicRegressionSpline {
public:
    CubicRegressionSpline() = default;
    /// Knots must be strictly increasing, at least 3 of them.
    explicit CubicRegressionSpline(Eigen::VectorXd knots);

    const Eigen::VectorXd& knots() const noexcept { return knots_; }
    Eigen::Index dim() const noexcept { return knots_.size(); }

    Eigen::RowVectorXd evaluate(double x) const;
    Eigen::RowVectorXd derivative(double x) const;
    Eigen::RowVectorXd second_derivative(double x) const;
    Eigen::MatrixXd design(std::span<const double> x) const;

    /// S with beta' S beta = integral of f''(t)^2 over the knot range.
    const Eigen::MatrixXd& penalty() const noexcept { return penalty_; }
    /// Maps coefficients to second derivatives at the knots.
    const Eigen::MatrixXd& second_derivative_map() const noexcept { return F_; }

private:
    Eigen::VectorXd knots_;
    Eigen::MatrixXd F_;
    Eigen::MatrixXd penalty_;
};

/// Evenly spaced quantiles of the distinct values of x (min and max included).
Eigen::VectorXd quantile_knots(std::span<const double> x, int k);

/// Number of distinct values in x.
std::size_t count_distinct(std::span<const double> x);

/// Eigen decomposition of a cubic-spline penalty with the null space pinned
/// to {constant, linear} so that the constant direction is column 0.
struct PenaltyEigen {
    Eigen::MatrixXd vectors;  ///< orthonormal, column 0 constant, column 1 linear
    Eigen::VectorXd values;   ///< entries 0 and 1 exactly zero
};
PenaltyEigen penalty_eigen(const CubicRegressionSpline& spline);

/// Univariate smooth with the sum-to-zero constraint absorbed.
///
/// `constraint` (k x (k-1)) maps constrained coefficients to spline
/// coefficients. In the constrained coordinates the penalty is diagonal:
/// `penalty_diagonal` holds it, with a single zero for the linear direction.
struct SmoothBasis {
    CubicRegressionSpline spline;
    Eigen::MatrixXd constraint;
    Eigen::VectorXd penalty_diagonal;

    Eigen::Index dim() const noexcept { return spline.dim(); }
    Eigen::Index constrained_dim() const noexcept { return constraint.cols(); }
    Eigen::RowVectorXd evaluate(double x) const { return spline.evaluate(x); }
    Eigen::RowVectorXd evaluate_constrained(double x) const { return spline.evaluate(x) * constraint; }
    Eigen::MatrixXd design(std::span<const double> x) const { return spline.design(x) * constraint; }
    Eigen::MatrixXd constrained_penalty() const { return penalty_diagonal.asDiagonal(); }

    std::string to_json() const;
};

/// Cubic regression spline basis of dimension k with knots at quantiles of
/// x_data and the sum-to-zero constraint computed over x_data.
/// Throws RankError when x_data has fewer than k distinct values.
SmoothBasis build_crs(std::span<const double> x_data, int k = 10);

/// Full tensor product of three cubic regression splines.
///
/// Columns follow row-wise Kronecker order (margin 0 slowest). The three
/// penalties are S0 x I x I, I x S1 x I, I x I x S2. After absorbing the
/// sum-to-zero constraint they are simultaneously diagonal.
struct TensorBasis {
    std::array<CubicRegressionSpline, 3> margins;
    Eigen::MatrixXd constraint;                      ///< (k^3) x (k^3 - 1)
    std::array<Eigen::VectorXd, 3> penalty_diagonal;  ///< constrained coordinates

    Eigen::Index dim() const;
    Eigen::Index constrained_dim() const noexcept { return constraint.cols(); }
    Eigen::RowVectorXd evaluate(double x0, double x1, double x2) const;
    Eigen::RowVectorXd evaluate_constrained(double x0, double x1, double x2) const {
        return evaluate(x0, x1, x2) * constraint;
    }
    Eigen::MatrixXd design(std::span<const double> x0, std::span<const double> x1, std::span<const double> x2) const;
    /// Margin penalty j lifted to the full (unconstrained) tensor space.
    Eigen::MatrixXd raw_penalty(int j) const;
};

TensorBasis build_tensor(std::span<const double> x0, std::span<const double> x1, std::span<const double> x2,
                         int k_marginal = 5);

/// I-spline basis built from cubic B-splines on quantile knots.
///
/// Each basis function rises monotonically from 0 at the lower boundary to
/// 1 at the upper boundary, so any nonnegative combination is nondecreasing.
/// Outside the boundary knots the basis continues linearly.
class MonotoneBasis {
public:
    MonotoneBasis() = default;
    /// `interior` knots strictly inside (lower, upper).
    MonotoneBasis(double lower, double upper, std::vector<double> interior);

    int dim() const noexcept { return static_cast<int>(interior_.size()) + 3; }
    double lower() const noexcept { return lower_; }
    double upper() const noexcept { return upper_; }

    Eigen::RowVectorXd evaluate(double x) const;
    Eigen::RowVectorXd derivative(double x) const;
    Eigen::MatrixXd design(std::span<const double> x) const;

private:
    Eigen::RowVectorXd inside(double x) const;
    Eigen::RowVectorXd inside_derivative(double x) const;

    double lower_ = 0.0;
    double upper_ = 1.0;
    std::vector<double> interior_;
    std::vector<double> t_;  ///< clamped knot vector
};

MonotoneBasis build_monotone(std::span<const double> x_data, int k = 10);

}  // namespace sbc
