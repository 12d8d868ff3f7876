#include "sbc/spline.hpp"

#include "sbc/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace sbc {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

CubicRegressionSpline::CubicRegressionSpline(VectorXd knots) : knots_(std::move(knots)) {
    const Index k = knots_.size();
    if (k < 3) throw ConfigError("cubic regression spline needs at least 3 knots");
    for (Index i = 1; i < k; ++i)
        if (!(knots_[i] > knots_[i - 1])) throw ConfigError("spline knots must be strictly increasing");

    VectorXd h = knots_.tail(k - 1) - knots_.head(k - 1);
    MatrixXd D = MatrixXd::Zero(k - 2, k);
    MatrixXd B = MatrixXd::Zero(k - 2, k - 2);
    for (Index i = 0; i < k - 2; ++i) {
        D(i, i) = 1.0 / h[i];
        D(i, i + 1) = -1.0 / h[i] - 1.0 / h[i + 1];
        D(i, i + 2) = 1.0 / h[i + 1];
        B(i, i) = (h[i] + h[i + 1]) / 3.0;
        if (i + 1 < k - 2) {
            B(i, i + 1) = h[i + 1] / 6.0;
            B(i + 1, i) = h[i + 1] / 6.0;
        }
    }
    const Eigen::LLT<MatrixXd> llt(B);
    const MatrixXd inner = llt.solve(D);
    F_ = MatrixXd::Zero(k, k);
    F_.middleRows(1, k - 2) = inner;
    penalty_ = D.transpose() * inner;
    penalty_ = 0.5 * (penalty_ + penalty_.transpose()).eval();
}

namespace {

Index interval_of(const VectorXd& knots, double x) {
    const auto* begin = knots.data();
    const auto* end = knots.data() + knots.size();
    Index j = static_cast<Index>(std::upper_bound(begin, end, x) - begin) - 1;
    return std::clamp<Index>(j, 0, knots.size() - 2);
}

}  // namespace

RowVectorXd CubicRegressionSpline::evaluate(double x) const {
    const Index k = dim();
    const double lo = knots_[0];
    const double hi = knots_[k - 1];
    if (x < lo) return evaluate(lo) + (x - lo) * derivative(lo);
    if (x > hi) return evaluate(hi) + (x - hi) * derivative(hi);
    const Index j = interval_of(knots_, x);
    const double h = knots_[j + 1] - knots_[j];
    const double dm = knots_[j + 1] - x;
    const double dp = x - knots_[j];
    RowVectorXd row = (dm * dm * dm / h - h * dm) / 6.0 * F_.row(j) + (dp * dp * dp / h - h * dp) / 6.0 * F_.row(j + 1);
    row[j] += dm / h;
    row[j + 1] += dp / h;
    return row;
}

RowVectorXd CubicRegressionSpline::derivative(double x) const {
    const double lo = knots_[0];
    const double hi = knots_[dim() - 1];
    x = std::clamp(x, lo, hi);
    const Index j = interval_of(knots_, x);
    const double h = knots_[j + 1] - knots_[j];
    const double dm = knots_[j + 1] - x;
    const double dp = x - knots_[j];
    RowVectorXd row = (-3.0 * dm * dm / h + h) / 6.0 * F_.row(j) + (3.0 * dp * dp / h - h) / 6.0 * F_.row(j + 1);
    row[j] -= 1.0 / h;
    row[j + 1] += 1.0 / h;
    return row;
}

RowVectorXd CubicRegressionSpline::second_derivative(double x) const {
    const double lo = knots_[0];
    const double hi = knots_[dim() - 1];
    if (x < lo || x > hi) return RowVectorXd::Zero(dim());
    const Index j = interval_of(knots_, x);
    const double h = knots_[j + 1] - knots_[j];
    return (knots_[j + 1] - x) / h * F_.row(j) + (x - knots_[j]) / h * F_.row(j + 1);
}

MatrixXd CubicRegressionSpline::design(std::span<const double> x) const {
    MatrixXd X(static_cast<Index>(x.size()), dim());
    for (std::size_t i = 0; i < x.size(); ++i) X.row(static_cast<Index>(i)) = evaluate(x[i]);
    return X;
}

std::size_t count_distinct(std::span<const double> x) {
    std::vector<double> v(x.begin(), x.end());
    std::sort(v.begin(), v.end());
    return static_cast<std::size_t>(std::unique(v.begin(), v.end()) - v.begin());
}

VectorXd quantile_knots(std::span<const double> x, int k) {
    std::vector<double> u(x.begin(), x.end());
    std::sort(u.begin(), u.end());
    u.erase(std::unique(u.begin(), u.end()), u.end());
    const auto m = u.size();
    if (k < 2 || m < static_cast<std::size_t>(k))
        throw RankError("need at least " + std::to_string(k) + " distinct values to place knots, got " + std::to_string(m));
    VectorXd knots(k);
    for (int i = 0; i < k; ++i) {
        const double pos = static_cast<double>(i) * static_cast<double>(m - 1) / static_cast<double>(k - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const double frac = pos - static_cast<double>(lo);
        knots[i] = lo + 1 < m ? u[lo] + frac * (u[lo + 1] - u[lo]) : u[m - 1];
    }
    return knots;
}

PenaltyEigen penalty_eigen(const CubicRegressionSpline& spline) {
    const Index k = spline.dim();
    const Eigen::SelfAdjointEigenSolver<MatrixXd> es(spline.penalty());
    PenaltyEigen out;
    out.vectors = es.eigenvectors();
    out.values = es.eigenvalues();
    // Coefficients are knot values, so constants and straight lines are exact.
    VectorXd constant = VectorXd::Constant(k, 1.0 / std::sqrt(static_cast<double>(k)));
    VectorXd linear = spline.knots().array() - spline.knots().mean();
    linear.normalize();
    out.vectors.col(0) = constant;
    out.vectors.col(1) = linear;
    out.values[0] = 0.0;
    out.values[1] = 0.0;
    for (Index i = 2; i < k; ++i) out.values[i] = std::max(out.values[i], 0.0);
    return out;
}

namespace {

/// Absorbs the sum-to-zero constraint: maps w to W w - e (C W w)/(C e).
/// Because e is in the null space of every penalty, penalties expressed in w
/// are W' S W.
MatrixXd absorb_constraint(const MatrixXd& raw_design, const VectorXd& e, const MatrixXd& W) {
    const RowVectorXd C = raw_design.colwise().sum();
    const double Ce = C.dot(e);
    if (std::abs(Ce) < 1e-300) throw RankError("sum-to-zero constraint is degenerate");
    return W - e * ((C * W) / Ce);
}

}  // namespace

SmoothBasis build_crs(std::span<const double> x_data, int k) {
    if (k < 3) throw ConfigError("basis dimension must be at least 3");
    const auto distinct = count_distinct(x_data);
    if (distinct < static_cast<std::size_t>(k))
        throw RankError("smooth needs " + std::to_string(k) + " distinct values, data has " + std::to_string(distinct));
    SmoothBasis b;
    b.spline = CubicRegressionSpline(quantile_knots(x_data, k));
    const auto pe = penalty_eigen(b.spline);
    const MatrixXd W = pe.vectors.rightCols(k - 1);
    b.constraint = absorb_constraint(b.spline.design(x_data), pe.vectors.col(0), W);
    b.penalty_diagonal = pe.values.tail(k - 1);
    return b;
}

std::string SmoothBasis::to_json() const {
    nlohmann::json j;
    const auto& kn = spline.knots();
    j["type"] = "cr";
    j["knots"] = std::vector<double>(kn.data(), kn.data() + kn.size());
    j["dim"] = dim();
    j["constrained_dim"] = constrained_dim();
    std::vector<std::vector<double>> S;
    for (Index r = 0; r < spline.penalty().rows(); ++r) {
        const RowVectorXd row = spline.penalty().row(r);
        S.emplace_back(row.data(), row.data() + row.size());
    }
    j["penalty"] = S;
    std::vector<std::vector<double>> Z;
    for (Index r = 0; r < constraint.rows(); ++r) {
        const RowVectorXd row = constraint.row(r);
        Z.emplace_back(row.data(), row.data() + row.size());
    }
    j["constraint"] = Z;
    j["penalty_diagonal"] = std::vector<double>(penalty_diagonal.data(), penalty_diagonal.data() + penalty_diagonal.size());
    return j.dump();
}

// ---------------------------------------------------------------------------
// Tensor product
// ---------------------------------------------------------------------------

namespace {

RowVectorXd kron3(const RowVectorXd& a, const RowVectorXd& b, const RowVectorXd& c) {
    const Index nb = b.size(), nc = c.size();
    RowVectorXd out(a.size() * nb * nc);
    for (Index i = 0; i < a.size(); ++i)
        for (Index j = 0; j < nb; ++j) out.segment((i * nb + j) * nc, nc) = a[i] * b[j] * c;
    return out;
}

MatrixXd kron(const MatrixXd& a, const MatrixXd& b) {
    MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

}  // namespace

Index TensorBasis::dim() const { return margins[0].dim() * margins[1].dim() * margins[2].dim(); }

RowVectorXd TensorBasis::evaluate(double x0, double x1, double x2) const {
    return kron3(margins[0].evaluate(x0), margins[1].evaluate(x1), margins[2].evaluate(x2));
}

MatrixXd TensorBasis::design(std::span<const double> x0, std::span<const double> x1, std::span<const double> x2) const {
    if (x0.size() != x1.size() || x0.size() != x2.size()) throw ConfigError("tensor margins differ in length");
    MatrixXd X(static_cast<Index>(x0.size()), dim());
    for (std::size_t i = 0; i < x0.size(); ++i) X.row(static_cast<Index>(i)) = evaluate(x0[i], x1[i], x2[i]);
    return X;
}

MatrixXd TensorBasis::raw_penalty(int j) const {
    std::array<MatrixXd, 3> f;
    for (int m = 0; m < 3; ++m)
        f[m] = m == j ? margins[m].penalty() : MatrixXd::Identity(margins[m].dim(), margins[m].dim());
    return kron(kron(f[0], f[1]), f[2]);
}

TensorBasis build_tensor(std::span<const double> x0, std::span<const double> x1, std::span<const double> x2,
                         int k_marginal) {
    if (k_marginal < 3) throw ConfigError("tensor marginal dimension must be at least 3");
    TensorBasis t;
    const std::array<std::span<const double>, 3> xs = {x0, x1, x2};
    std::array<PenaltyEigen, 3> pe;
    for (int m = 0; m < 3; ++m) {
        const auto distinct = count_distinct(xs[m]);
        if (distinct < static_cast<std::size_t>(k_marginal))
            throw RankError("tensor margin " + std::to_string(m) + " needs " + std::to_string(k_marginal) +
                            " distinct values, data has " + std::to_string(distinct));
        t.margins[m] = CubicRegressionSpline(quantile_knots(xs[m], k_marginal));
        pe[m] = penalty_eigen(t.margins[m]);
    }
    // The marginal penalties commute once lifted, so U0 x U1 x U2 diagonalizes all three.
    const MatrixXd U = kron(kron(pe[0].vectors, pe[1].vectors), pe[2].vectors);
    const Index K = U.cols();
    const MatrixXd W = U.rightCols(K - 1);
    t.constraint = absorb_constraint(t.design(x0, x1, x2), U.col(0), W);
    const Index k1 = t.margins[1].dim(), k2 = t.margins[2].dim();
    for (int m = 0; m < 3; ++m) t.penalty_diagonal[m] = VectorXd(K - 1);
    for (Index c = 1; c < K; ++c) {
        const Index a = c / (k1 * k2);
        const Index b = (c / k2) % k1;
        const Index d = c % k2;
        t.penalty_diagonal[0][c - 1] = pe[0].values[a];
        t.penalty_diagonal[1][c - 1] = pe[1].values[b];
        t.penalty_diagonal[2][c - 1] = pe[2].values[d];
    }
    return t;
}

// ---------------------------------------------------------------------------
// Monotone I-splines
// ---------------------------------------------------------------------------

namespace {

/// Nonzero B-spline basis functions of degree p at x on knot span `span`
/// (t[span] <= x < t[span+1]); returns N_{span-p..span}.
std::vector<double> basis_funs(const std::vector<double>& t, std::size_t span, double x, int p) {
    std::vector<double> N(static_cast<std::size_t>(p) + 1, 0.0), left(N.size()), right(N.size());
    N[0] = 1.0;
    for (int j = 1; j <= p; ++j) {
        left[j] = x - t[span + 1 - j];
        right[j] = t[span + j] - x;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            const double denom = right[r + 1] + left[j - r];
            const double temp = denom > 0.0 ? N[r] / denom : 0.0;
            N[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        N[j] = saved;
    }
    return N;
}

std::size_t find_span(const std::vector<double>& t, double x, int p) {
    const std::size_t n_basis = t.size() - static_cast<std::size_t>(p) - 1;
    if (x >= t[n_basis]) return n_basis - 1;
    const auto it = std::upper_bound(t.begin() + p, t.begin() + static_cast<std::ptrdiff_t>(n_basis) + 1, x);
    return static_cast<std::size_t>(it - t.begin()) - 1;
}

}  // namespace

MonotoneBasis::MonotoneBasis(double lower, double upper, std::vector<double> interior)
    : lower_(lower), upper_(upper), interior_(std::move(interior)) {
    if (!(upper_ > lower_)) throw ConfigError("monotone basis needs lower < upper");
    double prev = lower_;
    for (double k : interior_) {
        if (!(k > prev)) throw ConfigError("monotone basis knots must be strictly increasing");
        prev = k;
    }
    if (!(upper_ > prev)) throw ConfigError("interior knots must lie below the upper boundary");
    t_.assign(4, lower_);
    t_.insert(t_.end(), interior_.begin(), interior_.end());
    t_.insert(t_.end(), 4, upper_);
}

RowVectorXd MonotoneBasis::inside(double x) const {
    constexpr int p = 3;
    const std::size_t n_basis = t_.size() - p - 1;
    const auto span = find_span(t_, x, p);
    const auto N = basis_funs(t_, span, x, p);
    std::vector<double> B(n_basis, 0.0);
    for (int r = 0; r <= p; ++r) B[span - p + static_cast<std::size_t>(r)] = N[static_cast<std::size_t>(r)];
    RowVectorXd row(static_cast<Index>(n_basis - 1));
    double tail = 0.0;
    for (std::size_t m = n_basis - 1; m >= 1; --m) {
        tail += B[m];
        row[static_cast<Index>(m - 1)] = std::min(tail, 1.0);
    }
    return row;
}

RowVectorXd MonotoneBasis::inside_derivative(double x) const {
    // d/dx sum_{l>=m} B_{l,3} telescopes to 3 N_{m,2} / (t_{m+3} - t_m).
    constexpr int p = 3;
    const std::size_t n_basis = t_.size() - p - 1;
    const auto span = find_span(t_, x, p);
    const auto N2 = basis_funs(t_, span, x, 2);
    RowVectorXd row = RowVectorXd::Zero(static_cast<Index>(n_basis - 1));
    for (int r = 0; r <= 2; ++r) {
        const std::size_t m = span - 2 + static_cast<std::size_t>(r);
        if (m == 0 || m >= n_basis) continue;
        const double denom = t_[m + 3] - t_[m];
        if (denom > 0.0) row[static_cast<Index>(m - 1)] = 3.0 * N2[static_cast<std::size_t>(r)] / denom;
    }
    return row;
}

RowVectorXd MonotoneBasis::evaluate(double x) const {
    if (x < lower_) return inside(lower_) + (x - lower_) * inside_derivative(lower_);
    if (x > upper_) return inside(upper_) + (x - upper_) * inside_derivative(upper_);
    return inside(x);
}

RowVectorXd MonotoneBasis::derivative(double x) const { return inside_derivative(std::clamp(x, lower_, upper_)); }

MatrixXd MonotoneBasis::design(std::span<const double> x) const {
    MatrixXd X(static_cast<Index>(x.size()), dim());
    for (std::size_t i = 0; i < x.size(); ++i) X.row(static_cast<Index>(i)) = evaluate(x[i]);
    return X;
}

MonotoneBasis build_monotone(std::span<const double> x_data, int k) {
    if (k < 3) throw ConfigError("monotone basis dimension must be at least 3");
    const auto distinct = count_distinct(x_data);
    if (distinct < static_cast<std::size_t>(k))
        throw RankError("monotone basis needs " + std::to_string(k) + " distinct values, data has " +
                        std::to_string(distinct));
    const VectorXd q = quantile_knots(x_data, k - 1);
    std::vector<double> interior(q.data() + 1, q.data() + q.size() - 1);
    return MonotoneBasis(q[0], q[q.size() - 1], std::move(interior));
}

}  // namespace sbc
