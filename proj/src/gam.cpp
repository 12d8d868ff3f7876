#include "sbc/gam.hpp"

#include "sbc/csv.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace sbc {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

std::string join(const std::vector<std::string>& items, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += sep;
        out += items[i];
    }
    return out;
}

const std::vector<double>& require_column(const Columns& data, const std::string& name) {
    const auto it = data.find(name);
    if (it == data.end()) throw ConfigError("model refers to unknown column '" + name + "'");
    return it->second;
}

}  // namespace

// ---------------------------------------------------------------------------
// Model specification
// ---------------------------------------------------------------------------

SmoothTerm SmoothTerm::cr(std::string var, int k, std::string group) {
    SmoothTerm t;
    t.kind = Kind::cr;
    t.variables = {std::move(var)};
    t.k = k;
    t.lambda_group = std::move(group);
    return t;
}

SmoothTerm SmoothTerm::tensor(std::string a, std::string b, std::string c, int k) {
    SmoothTerm t;
    t.kind = Kind::tensor;
    t.variables = {std::move(a), std::move(b), std::move(c)};
    t.k = k;
    return t;
}

std::string SmoothTerm::label() const {
    return (kind == Kind::cr ? "s(" : "te(") + join(variables, ",") + ")";
}

void ModelSpec::validate() const {
    if (response.empty()) throw ConfigError("model has no response");
    if (linear.empty() && smooths.empty()) throw ConfigError("model needs at least one term");
    std::set<std::string> linear_names;
    for (const auto& l : linear) {
        if (l == response) throw ConfigError("response '" + l + "' also appears as a linear term");
        if (!linear_names.insert(l).second) throw ConfigError("linear term '" + l + "' listed twice");
    }
    std::set<std::string> smooth_names;
    for (const auto& s : smooths) {
        const std::size_t want = s.kind == SmoothTerm::Kind::cr ? 1 : 3;
        if (s.variables.size() != want) throw ConfigError(s.label() + " has the wrong number of variables");
        if (s.k < 3) throw ConfigError(s.label() + " needs basis dimension of at least 3");
        for (const auto& v : s.variables) {
            if (v == response) throw ConfigError("response '" + v + "' also appears in " + s.label());
            if (linear_names.count(v)) throw ConfigError("'" + v + "' appears in both linear and smooth parts");
            smooth_names.insert(v);
        }
    }
}

// ---------------------------------------------------------------------------
// Penalized design and solver
// ---------------------------------------------------------------------------

VectorXd PenalizedDesign::penalty_diagonal(const std::vector<double>& lambdas) const {
    if (lambdas.size() != penalties.size())
        throw ConfigError("expected " + std::to_string(penalties.size()) + " smoothing parameters, got " +
                          std::to_string(lambdas.size()));
    VectorXd s = VectorXd::Zero(X.cols());
    for (std::size_t j = 0; j < penalties.size(); ++j) {
        if (!(lambdas[j] >= 0.0)) throw ConfigError("smoothing parameters must be nonnegative");
        const auto& p = penalties[j];
        s.segment(p.offset, p.diagonal.size()) += lambdas[j] * p.diagonal;
    }
    return s;
}

Index PenalizedDesign::unpenalized_dim() const {
    VectorXd s = VectorXd::Zero(X.cols());
    for (const auto& p : penalties) s.segment(p.offset, p.diagonal.size()) += p.diagonal;
    return (s.array() == 0.0).count();
}

PlsSolver::PlsSolver(const PenalizedDesign& design, const VectorXd& y) : design_(design) {
    n_ = design.X.rows();
    p_ = design.X.cols();
    if (y.size() != n_) throw ConfigError("response length does not match design rows");
    if (static_cast<Index>(design.column_names.size()) != p_) throw ConfigError("design column names mismatch");

    scale_ = design.X.colwise().norm();
    for (Index j = 0; j < p_; ++j)
        if (!(scale_[j] > 0.0) || !std::isfinite(scale_[j]))
            throw RankError("design column '" + design.column_names[j] + "' is identically zero",
                            {design.column_names[j]});
    log_scale_sum_ = scale_.array().log().sum();
    const MatrixXd Xs = design.X * scale_.cwiseInverse().asDiagonal();

    structural_ = VectorXd::Zero(p_);
    for (const auto& p : design.penalties) structural_.segment(p.offset, p.diagonal.size()) += p.diagonal;
    null_dim_ = (structural_.array() == 0.0).count();

    // Unpenalized directions must be linearly independent for any lambda > 0.
    std::vector<Index> unpen;
    for (Index j = 0; j < p_; ++j)
        if (structural_[j] == 0.0) unpen.push_back(j);
    if (!unpen.empty()) {
        MatrixXd U(n_, static_cast<Index>(unpen.size()));
        for (std::size_t i = 0; i < unpen.size(); ++i) U.col(static_cast<Index>(i)) = Xs.col(unpen[i]);
        Eigen::ColPivHouseholderQR<MatrixXd> qr(U);
        qr.setThreshold(1e-9);
        if (qr.rank() < U.cols()) {
            std::vector<std::string> aliased;
            for (Index i = qr.rank(); i < U.cols(); ++i)
                aliased.push_back(design.column_names[unpen[static_cast<std::size_t>(qr.colsPermutation().indices()[i])]]);
            throw RankError("unpenalized design columns are collinear; aliased: " + join(aliased, ", "), aliased);
        }
    }

    Eigen::HouseholderQR<MatrixXd> qr(Xs);
    const Index r = std::min(n_, p_);
    R0_ = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
    const VectorXd qty = qr.householderQ().transpose() * y;
    f_ = qty.head(r);
    rss_offset_ = std::max(0.0, qty.tail(n_ - r).squaredNorm());
}

PlsResult PlsSolver::solve(const std::vector<double>& lambdas, bool with_inverse) const {
    const VectorXd s = design_.penalty_diagonal(lambdas);
    const VectorXd s_scaled = s.cwiseQuotient(scale_.cwiseAbs2());
    const Index r = R0_.rows();
    MatrixXd A = MatrixXd::Zero(r + p_, p_);
    A.topRows(r) = R0_;
    A.bottomRows(p_).diagonal() = s_scaled.cwiseSqrt();
    VectorXd rhs = VectorXd::Zero(r + p_);
    rhs.head(r) = f_;

    Eigen::ColPivHouseholderQR<MatrixXd> qr(A);
    qr.setThreshold(1e-11);
    if (qr.rank() < p_) {
        std::vector<std::string> aliased;
        for (Index i = qr.rank(); i < p_; ++i)
            aliased.push_back(design_.column_names[static_cast<std::size_t>(qr.colsPermutation().indices()[i])]);
        throw RankError("penalized system is singular; aliased: " + join(aliased, ", "), aliased);
    }
    const VectorXd beta_s = qr.solve(rhs);

    PlsResult out;
    out.beta = beta_s.cwiseQuotient(scale_);
    out.rss = rss_offset_ + (f_ - R0_ * beta_s).squaredNorm();
    out.penalty = (s_scaled.array() * beta_s.array().square()).sum();

    const MatrixXd R = qr.matrixR().topLeftCorner(p_, p_).triangularView<Eigen::Upper>();
    out.log_det = 2.0 * R.diagonal().cwiseAbs().array().log().sum() + 2.0 * log_scale_sum_;
    out.log_det_penalty = 0.0;
    for (Index j = 0; j < p_; ++j)
        if (structural_[j] > 0.0) out.log_det_penalty += std::log(s[j]);
    if (!with_inverse) return out;

    const MatrixXd Rinv = R.triangularView<Eigen::Upper>().solve(MatrixXd::Identity(p_, p_));
    const auto& perm = qr.colsPermutation();
    const MatrixXd inv_perm = perm * (Rinv * Rinv.transpose()) * perm.transpose();
    out.edf = VectorXd::Ones(p_) - inv_perm.diagonal().cwiseProduct(s_scaled);
    out.edf_total = out.edf.sum();
    out.inverse = scale_.cwiseInverse().asDiagonal() * inv_perm * scale_.cwiseInverse().asDiagonal();
    return out;
}

double PlsSolver::reml(const PlsResult& r) const {
    const double dof = static_cast<double>(n_ - null_dim_);
    if (dof <= 0.0) throw SampleSizeError("too few observations for the unpenalized model", null_dim_ + 1);
    const double ss = r.rss + r.penalty;
    const double sigma2 = ss / dof;
    if (!(sigma2 > 0.0)) return -std::numeric_limits<double>::infinity();
    return ss / sigma2 + r.log_det - r.log_det_penalty + dof * (kLog2Pi + std::log(sigma2));
}

double PlsSolver::reml(const std::vector<double>& rho) const {
    std::vector<double> lambdas(rho.size());
    std::transform(rho.begin(), rho.end(), lambdas.begin(), [](double v) { return std::exp(v); });
    return reml(solve(lambdas, false));
}

PlsResult fit_pls(const PenalizedDesign& design, const VectorXd& y, const std::vector<double>& lambdas) {
    const PlsSolver solver(design, y);
    return solver.solve(lambdas);
}

// ---------------------------------------------------------------------------
// Model design
// ---------------------------------------------------------------------------

MatrixXd SmoothComponent::design(const Columns& data) const {
    if (std::holds_alternative<std::monostate>(basis)) {
        const auto& x = require_column(data, term.variables[0]);
        MatrixXd X(static_cast<Index>(x.size()), 1);
        for (std::size_t i = 0; i < x.size(); ++i) X(static_cast<Index>(i), 0) = x[i] - linear_mean;
        return X;
    }
    if (const auto* b = std::get_if<SmoothBasis>(&basis)) return b->design(require_column(data, term.variables[0]));
    const auto& t = std::get<TensorBasis>(basis);
    return t.design(require_column(data, term.variables[0]), require_column(data, term.variables[1]),
                    require_column(data, term.variables[2])) *
           t.constraint;
}

ModelDesign build_model_design(const ModelSpec& spec, const Columns& data) {
    spec.validate();
    ModelDesign md;
    const auto& yv = require_column(data, spec.response);
    const std::size_t n = yv.size();
    auto check = [&](const std::string& name) -> const std::vector<double>& {
        const auto& c = require_column(data, name);
        if (c.size() != n) throw ConfigError("column '" + name + "' length differs from the response");
        for (double v : c)
            if (!std::isfinite(v)) throw ConfigError("column '" + name + "' has non-finite values");
        return c;
    };
    check(spec.response);
    md.y = Eigen::Map<const VectorXd>(yv.data(), static_cast<Index>(n));

    std::vector<VectorXd> cols;
    auto& names = md.design.column_names;
    cols.push_back(VectorXd::Ones(static_cast<Index>(n)));
    names.emplace_back("(Intercept)");
    for (const auto& l : spec.linear) {
        const auto& x = check(l);
        cols.push_back(Eigen::Map<const VectorXd>(x.data(), static_cast<Index>(n)));
        names.push_back(l);
    }

    std::map<std::string, int> groups;
    Index offset = static_cast<Index>(cols.size());
    for (const auto& term : spec.smooths) {
        for (const auto& v : term.variables) check(v);
        SmoothComponent comp;
        comp.term = term;
        comp.offset = offset;
        MatrixXd B;
        std::vector<VectorXd> diagonals;
        std::vector<std::string> pen_labels;
        if (term.kind == SmoothTerm::Kind::cr) {
            const auto& x = data.at(term.variables[0]);
            const auto distinct = count_distinct(x);
            if (distinct <= 1) {
                md.warnings.push_back(term.label() + " dropped: variable is constant");
                continue;
            }
            if (distinct == 2) {
                md.warnings.push_back(term.label() + " fitted as linear: variable takes two values");
                comp.linear_mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
                B = comp.design(data);
            } else {
                int k = term.k;
                if (distinct < static_cast<std::size_t>(k)) {
                    k = static_cast<int>(distinct);
                    md.warnings.push_back(term.label() + " basis reduced to k=" + std::to_string(k) +
                                          " (few distinct values)");
                }
                auto basis = build_crs(x, k);
                B = basis.design(x);
                diagonals.push_back(basis.penalty_diagonal);
                pen_labels.push_back(term.label());
                comp.basis = std::move(basis);
            }
        } else {
            auto basis = build_tensor(data.at(term.variables[0]), data.at(term.variables[1]),
                                      data.at(term.variables[2]), term.k);
            comp.basis = basis;
            B = comp.design(data);
            for (int m = 0; m < 3; ++m) {
                diagonals.push_back(basis.penalty_diagonal[m]);
                pen_labels.push_back(term.label() + "[" + term.variables[m] + "]");
            }
        }
        comp.width = B.cols();
        for (Index j = 0; j < B.cols(); ++j) {
            cols.push_back(B.col(j));
            names.push_back(term.label() + "." + std::to_string(j + 1));
        }
        // Scale penalties so lambda = 1 balances penalty and data fit.
        const double xtx = (B.transpose() * B).norm();
        for (std::size_t m = 0; m < diagonals.size(); ++m) {
            const double dn = diagonals[m].norm();
            PenalizedDesign::Penalty pen;
            pen.offset = offset;
            pen.diagonal = dn > 0.0 ? VectorXd(diagonals[m] * (xtx / dn)) : diagonals[m];
            pen.label = pen_labels[m];
            int param;
            if (!term.lambda_group.empty() && term.kind == SmoothTerm::Kind::cr) {
                auto [it, inserted] = groups.try_emplace(term.lambda_group, static_cast<int>(md.lambda_labels.size()));
                if (inserted) md.lambda_labels.push_back("group:" + term.lambda_group);
                param = it->second;
            } else {
                param = static_cast<int>(md.lambda_labels.size());
                md.lambda_labels.push_back(pen.label);
            }
            comp.penalty_index.push_back(static_cast<int>(md.design.penalties.size()));
            md.penalty_parameter.push_back(param);
            md.design.penalties.push_back(std::move(pen));
        }
        offset += comp.width;
        md.components.push_back(std::move(comp));
    }

    md.design.X.resize(static_cast<Index>(n), static_cast<Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) md.design.X.col(static_cast<Index>(j)) = cols[j];
    return md;
}

// ---------------------------------------------------------------------------
// REML fitting
// ---------------------------------------------------------------------------

namespace {

struct Objective {
    const PlsSolver* solver;
    const std::vector<int>* mapping;
    double lo, hi;
    std::size_t evaluations = 0;

    std::vector<double> lambdas(const std::vector<double>& rho) const {
        std::vector<double> out(mapping->size());
        for (std::size_t j = 0; j < mapping->size(); ++j)
            out[j] = std::exp(std::clamp(rho[static_cast<std::size_t>((*mapping)[j])], lo, hi));
        return out;
    }

    double operator()(const std::vector<double>& rho) {
        ++evaluations;
        double excess = 0.0;
        for (double r : rho) {
            const double c = std::clamp(r, lo, hi);
            excess += (r - c) * (r - c);
        }
        return solver->reml(solver->solve(lambdas(rho), false)) + excess;
    }
};

double gsl_objective(const gsl_vector* v, void* params) {
    auto* obj = static_cast<Objective*>(params);
    std::vector<double> rho(v->size);
    for (std::size_t i = 0; i < v->size; ++i) rho[i] = gsl_vector_get(v, i);
    try {
        return (*obj)(rho);
    } catch (const RankError&) {
        return GSL_POSINF;
    }
}

struct GslVector {
    gsl_vector* v;
    explicit GslVector(std::size_t n) : v(gsl_vector_alloc(n)) {}
    ~GslVector() { gsl_vector_free(v); }
    GslVector(const GslVector&) = delete;
    GslVector& operator=(const GslVector&) = delete;
};

struct GslMinimizer {
    gsl_multimin_fminimizer* m;
    explicit GslMinimizer(std::size_t n) : m(gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n)) {}
    ~GslMinimizer() { gsl_multimin_fminimizer_free(m); }
    GslMinimizer(const GslMinimizer&) = delete;
    GslMinimizer& operator=(const GslMinimizer&) = delete;
};

void add_curves(FitResult& fit, const Columns& data, int points) {
    for (std::size_t i = 0; i < fit.components.size(); ++i) {
        const auto& comp = fit.components[i];
        const MatrixXd cov = fit.covariance.block(comp.offset, comp.offset, comp.width, comp.width);
        const VectorXd b = fit.beta.segment(comp.offset, comp.width);
        const VectorXd contrib = fit.smooth_contribution(i, data);

        std::vector<std::string> axes = comp.term.variables;
        std::map<std::string, double> medians;
        for (const auto& v : comp.term.variables) {
            std::vector<double> s = data.at(v);
            std::nth_element(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(s.size() / 2), s.end());
            medians[v] = s[s.size() / 2];
        }
        for (const auto& axis : axes) {
            const auto& xd = data.at(axis);
            const auto [mn, mx] = std::minmax_element(xd.begin(), xd.end());
            SmoothCurve curve;
            curve.label = comp.term.label();
            curve.variable = axis;
            Columns grid;
            for (const auto& v : comp.term.variables) grid[v] = std::vector<double>(static_cast<std::size_t>(points), medians[v]);
            for (int g = 0; g < points; ++g)
                grid[axis][static_cast<std::size_t>(g)] = *mn + (*mx - *mn) * g / std::max(1, points - 1);
            const MatrixXd G = comp.design(grid);
            const VectorXd fit_vals = G * b;
            curve.x = grid[axis];
            for (Index g = 0; g < G.rows(); ++g) {
                const double sd = std::sqrt(std::max(0.0, G.row(g).dot(cov * G.row(g).transpose())));
                curve.fit.push_back(fit_vals[g]);
                curve.se.push_back(sd);
                curve.lower.push_back(fit_vals[g] - 1.96 * sd);
                curve.upper.push_back(fit_vals[g] + 1.96 * sd);
            }
            curve.data_x = xd;
            curve.partial_residual.resize(xd.size());
            for (std::size_t r = 0; r < xd.size(); ++r)
                curve.partial_residual[r] = fit.residuals[static_cast<Index>(r)] + contrib[static_cast<Index>(r)];
            fit.curves.push_back(std::move(curve));
        }
    }
}

}  // namespace

FitResult fit_reml(const ModelSpec& spec, const Columns& data, const RemlOptions& options) {
    ModelDesign md = build_model_design(spec, data);
    const auto n = static_cast<Index>(md.y.size());
    const Index null_dim = md.design.unpenalized_dim();
    if (n <= null_dim)
        throw SampleSizeError("need more than " + std::to_string(null_dim) + " observations, have " + std::to_string(n),
                              static_cast<std::size_t>(null_dim + 1));

    const PlsSolver solver(md.design, md.y);
    const std::size_t m = md.lambda_labels.size();
    Objective obj{&solver, &md.penalty_parameter, options.log_lambda_min, options.log_lambda_max};

    FitResult fit;
    std::vector<double> rho(m, 0.0);
    bool converged = true;
    if (m > 0 && !options.fixed_lambda.empty()) {
        if (options.fixed_lambda.size() != m)
            throw ConfigError("expected " + std::to_string(m) + " fixed smoothing parameters");
        for (std::size_t j = 0; j < m; ++j) {
            if (!(options.fixed_lambda[j] > 0.0)) throw ConfigError("fixed smoothing parameters must be positive");
            rho[j] = std::log(options.fixed_lambda[j]);
        }
    } else if (m > 0) {
        // Coordinate-wise coarse grid.
        double best = obj(rho);
        for (int sweep = 0; sweep < options.grid_sweeps; ++sweep) {
            for (std::size_t j = 0; j < m; ++j) {
                for (double g = options.grid_min; g <= options.grid_max + 1e-9; g += 1.0) {
                    std::vector<double> trial = rho;
                    trial[j] = g;
                    double v;
                    try {
                        v = obj(trial);
                    } catch (const RankError&) {
                        continue;
                    }
                    fit.grid_trace.emplace_back(trial, v);
                    if (v < best) {
                        best = v;
                        rho = trial;
                    }
                }
            }
        }

        // Nelder-Mead refinement from the best grid point.
        GslVector x(m), step(m);
        for (std::size_t j = 0; j < m; ++j) {
            gsl_vector_set(x.v, j, rho[j]);
            gsl_vector_set(step.v, j, 1.0);
        }
        gsl_multimin_function fn{&gsl_objective, m, &obj};
        GslMinimizer nm(m);
        gsl_multimin_fminimizer_set(nm.m, &fn, x.v, step.v);
        int status = GSL_CONTINUE;
        int iter = 0;
        // Along directions where the criterion is flat (a smooth heading to its
        // linear limit) the simplex may never shrink; treat a long run without
        // meaningful improvement as converged too.
        constexpr int stall_window = 200;
        double window_start = nm.m->fval;
        while (status == GSL_CONTINUE && iter < options.max_iterations) {
            ++iter;
            if (gsl_multimin_fminimizer_iterate(nm.m)) break;
            status = gsl_multimin_test_size(gsl_multimin_fminimizer_size(nm.m), options.simplex_tol);
            if (status == GSL_CONTINUE && iter % stall_window == 0) {
                if (window_start - nm.m->fval <= options.simplex_tol * (1.0 + std::abs(nm.m->fval)))
                    status = GSL_SUCCESS;
                window_start = nm.m->fval;
            }
        }
        converged = status == GSL_SUCCESS;
        if (nm.m->fval <= best) {
            std::vector<double> refined(m);
            for (std::size_t j = 0; j < m; ++j)
                refined[j] = std::clamp(gsl_vector_get(nm.m->x, j), options.log_lambda_min, options.log_lambda_max);
            // clamping can lose the improvement; keep the grid point then
            try {
                if (obj(refined) <= best) rho = refined;
            } catch (const RankError&) {
            }
        }
    }

    const auto lambdas = obj.lambdas(rho);
    const PlsResult pls = solver.solve(lambdas);

    fit.spec = spec;
    fit.n = static_cast<std::size_t>(n);
    fit.column_names = md.design.column_names;
    fit.components = std::move(md.components);
    fit.warnings = std::move(md.warnings);
    fit.lambda_labels = md.lambda_labels;
    for (double r : rho) fit.lambda.push_back(std::exp(r));
    fit.beta = pls.beta;
    fit.reml = solver.reml(pls);
    fit.sigma2 = (pls.rss + pls.penalty) / static_cast<double>(n - null_dim);
    fit.covariance = pls.inverse * fit.sigma2;
    fit.se = fit.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
    fit.edf_total = pls.edf_total;
    fit.y = md.y;
    fit.fitted = md.design.X * pls.beta;
    fit.residuals = md.y - fit.fitted;
    const double tss = (md.y.array() - md.y.mean()).square().sum();
    const double rss = fit.residuals.squaredNorm();
    fit.r2 = tss > 0.0 ? 1.0 - rss / tss : std::numeric_limits<double>::quiet_NaN();
    const double resid_dof = static_cast<double>(n) - pls.edf_total;
    fit.adj_r2 = tss > 0.0 && resid_dof > 0.0 && n > 1
                     ? 1.0 - (rss / resid_dof) / (tss / static_cast<double>(n - 1))
                     : std::numeric_limits<double>::quiet_NaN();

    fit.terms.push_back({"(Intercept)", "intercept", 1.0, {}});
    for (std::size_t i = 0; i < spec.linear.size(); ++i)
        fit.terms.push_back({spec.linear[i], "linear", pls.edf[static_cast<Index>(i + 1)], {}});
    for (const auto& comp : fit.components) {
        TermSummary t{comp.term.label(), "smooth", pls.edf.segment(comp.offset, comp.width).sum(), {}};
        for (int pi : comp.penalty_index) t.lambda.push_back(fit.lambda[static_cast<std::size_t>(md.penalty_parameter[static_cast<std::size_t>(pi)])]);
        fit.terms.push_back(std::move(t));
    }
    for (std::size_t j = 0; j < m && options.fixed_lambda.empty(); ++j) {
        if (rho[j] <= options.log_lambda_min + 1e-3)
            fit.warnings.push_back("smoothing parameter " + fit.lambda_labels[j] + " at lower bound");
        if (rho[j] >= options.log_lambda_max - 1e-3)
            fit.warnings.push_back("smoothing parameter " + fit.lambda_labels[j] + " at upper bound");
    }
    add_curves(fit, data, options.curve_points);

    if (!converged) {
        auto best = std::make_shared<const FitResult>(std::move(fit));
        throw RemlConvergenceError("smoothing parameter search did not converge", best);
    }
    return fit;
}

// ---------------------------------------------------------------------------
// FitResult
// ---------------------------------------------------------------------------

Index FitResult::column(const std::string& name) const {
    const auto it = std::find(column_names.begin(), column_names.end(), name);
    if (it == column_names.end()) throw ConfigError("fit has no coefficient '" + name + "'");
    return static_cast<Index>(it - column_names.begin());
}

VectorXd FitResult::smooth_contribution(std::size_t i, const Columns& data) const {
    const auto& comp = components.at(i);
    return comp.design(data) * beta.segment(comp.offset, comp.width);
}

VectorXd FitResult::predict(const Columns& data) const {
    Index rows = -1;
    for (const auto& l : spec.linear) rows = static_cast<Index>(require_column(data, l).size());
    for (const auto& c : components) rows = static_cast<Index>(require_column(data, c.term.variables[0]).size());
    if (rows < 0) rows = 1;
    VectorXd out = VectorXd::Constant(rows, beta[0]);
    for (std::size_t i = 0; i < spec.linear.size(); ++i) {
        const auto& x = require_column(data, spec.linear[i]);
        if (static_cast<Index>(x.size()) != rows) throw ConfigError("prediction columns differ in length");
        out += beta[static_cast<Index>(i + 1)] * Eigen::Map<const VectorXd>(x.data(), rows);
    }
    for (std::size_t i = 0; i < components.size(); ++i) out += smooth_contribution(i, data);
    return out;
}

std::string FitResult::to_json() const {
    nlohmann::ordered_json j;
    j["response"] = spec.response;
    j["n"] = n;
    nlohmann::ordered_json coefs = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < column_names.size(); ++i)
        coefs.push_back({{"name", column_names[i]},
                         {"estimate", beta[static_cast<Index>(i)]},
                         {"se", se[static_cast<Index>(i)]}});
    j["coefficients"] = coefs;
    nlohmann::ordered_json lam = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < lambda.size(); ++i) lam.push_back({{"label", lambda_labels[i]}, {"lambda", lambda[i]}});
    j["lambda"] = lam;
    nlohmann::ordered_json terms_j = nlohmann::ordered_json::array();
    for (const auto& t : terms) terms_j.push_back({{"label", t.label}, {"kind", t.kind}, {"edf", t.edf}, {"lambda", t.lambda}});
    j["terms"] = terms_j;
    j["sigma2"] = sigma2;
    j["reml"] = reml;
    j["edf_total"] = edf_total;
    j["r2"] = r2;
    j["adj_r2"] = adj_r2;
    j["warnings"] = warnings;
    nlohmann::ordered_json curves_j = nlohmann::ordered_json::array();
    for (const auto& c : curves)
        curves_j.push_back({{"label", c.label}, {"variable", c.variable}, {"x", c.x}, {"fit", c.fit}, {"se", c.se},
                            {"lower", c.lower}, {"upper", c.upper}});
    j["curves"] = curves_j;
    return j.dump(2);
}

std::string FitResult::curves_csv() const {
    std::string out = csv::format_row({"label", "variable", "x", "fit", "se", "lower", "upper"});
    for (const auto& c : curves)
        for (std::size_t i = 0; i < c.x.size(); ++i)
            out += csv::format_row({c.label, c.variable, csv::format_double(c.x[i]), csv::format_double(c.fit[i]),
                                    csv::format_double(c.se[i]), csv::format_double(c.lower[i]),
                                    csv::format_double(c.upper[i])});
    return out;
}

std::string FitResult::partial_residuals_csv() const {
    std::string out = csv::format_row({"label", "variable", "x", "partial_residual"});
    for (const auto& c : curves)
        for (std::size_t i = 0; i < c.data_x.size(); ++i)
            out += csv::format_row({c.label, c.variable, csv::format_double(c.data_x[i]),
                                    csv::format_double(c.partial_residual[i])});
    return out;
}

// ---------------------------------------------------------------------------
// Sign-constrained least squares
// ---------------------------------------------------------------------------

namespace {

/// Lawson-Hanson active-set NNLS.
VectorXd nnls(const MatrixXd& A, const VectorXd& b) {
    const Index p = A.cols();
    VectorXd x = VectorXd::Zero(p);
    std::vector<bool> passive(static_cast<std::size_t>(p), false);
    const double tol = 10.0 * std::numeric_limits<double>::epsilon() * A.cwiseAbs().colwise().sum().maxCoeff() *
                       static_cast<double>(std::max(A.rows(), p));
    auto solve_passive = [&]() {
        std::vector<Index> idx;
        for (Index j = 0; j < p; ++j)
            if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
        MatrixXd Ap(A.rows(), static_cast<Index>(idx.size()));
        for (std::size_t i = 0; i < idx.size(); ++i) Ap.col(static_cast<Index>(i)) = A.col(idx[i]);
        const VectorXd zp = Ap.colPivHouseholderQr().solve(b);
        VectorXd z = VectorXd::Zero(p);
        for (std::size_t i = 0; i < idx.size(); ++i) z[idx[i]] = zp[static_cast<Index>(i)];
        return z;
    };

    for (int outer = 0; outer < 3 * p + 10; ++outer) {
        const VectorXd w = A.transpose() * (b - A * x);
        Index best = -1;
        double wmax = tol;
        for (Index j = 0; j < p; ++j)
            if (!passive[static_cast<std::size_t>(j)] && w[j] > wmax) {
                wmax = w[j];
                best = j;
            }
        if (best < 0) break;
        passive[static_cast<std::size_t>(best)] = true;
        for (int inner = 0; inner < 3 * p + 10; ++inner) {
            const VectorXd z = solve_passive();
            bool feasible = true;
            double alpha = 1.0;
            for (Index j = 0; j < p; ++j)
                if (passive[static_cast<std::size_t>(j)] && z[j] <= 0.0) {
                    feasible = false;
                    alpha = std::min(alpha, x[j] / (x[j] - z[j]));
                }
            if (feasible) {
                x = z;
                break;
            }
            x += alpha * (z - x);
            for (Index j = 0; j < p; ++j)
                if (passive[static_cast<std::size_t>(j)] && x[j] <= tol) {
                    passive[static_cast<std::size_t>(j)] = false;
                    x[j] = 0.0;
                }
        }
    }
    return x;
}

}  // namespace

VectorXd constrained_least_squares(const MatrixXd& A, const VectorXd& b, const std::vector<bool>& constrained) {
    if (static_cast<Index>(constrained.size()) != A.cols()) throw ConfigError("constraint mask length mismatch");
    if (b.size() != A.rows()) throw ConfigError("right-hand side length mismatch");
    std::vector<Index> free_idx, con_idx;
    for (Index j = 0; j < A.cols(); ++j) (constrained[static_cast<std::size_t>(j)] ? con_idx : free_idx).push_back(j);
    MatrixXd Af(A.rows(), static_cast<Index>(free_idx.size()));
    MatrixXd Ac(A.rows(), static_cast<Index>(con_idx.size()));
    for (std::size_t i = 0; i < free_idx.size(); ++i) Af.col(static_cast<Index>(i)) = A.col(free_idx[i]);
    for (std::size_t i = 0; i < con_idx.size(); ++i) Ac.col(static_cast<Index>(i)) = A.col(con_idx[i]);

    // Profile out the free coefficients: project onto the orthogonal complement of span(Af).
    MatrixXd Ac_perp = Ac;
    VectorXd b_perp = b;
    Eigen::ColPivHouseholderQR<MatrixXd> qr_f;
    if (Af.cols() > 0) {
        qr_f.compute(Af);
        auto project_out = [&](const auto& M) {
            MatrixXd coef = qr_f.solve(M);
            return MatrixXd(M - Af * coef);
        };
        Ac_perp = project_out(Ac);
        b_perp = project_out(b);
    }
    const VectorXd c = con_idx.empty() ? VectorXd() : nnls(Ac_perp, b_perp);
    VectorXd x(A.cols());
    for (std::size_t i = 0; i < con_idx.size(); ++i) x[con_idx[i]] = c[static_cast<Index>(i)];
    if (!free_idx.empty()) {
        const VectorXd rhs = con_idx.empty() ? b : VectorXd(b - Ac * c);
        const VectorXd f = qr_f.solve(rhs);
        for (std::size_t i = 0; i < free_idx.size(); ++i) x[free_idx[i]] = f[static_cast<Index>(i)];
    }
    return x;
}

}  // namespace sbc
