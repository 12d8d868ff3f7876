#include "oracles.hpp"
#include "sbc/errors.hpp"
#include "sbc/gam.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <random>

using namespace sbc;

namespace {

/// y = 2 + 3x + sin(v) + N(0, 0.1^2) with x, v uniform.
Columns benchmark(std::uint64_t seed, int n = 500, bool with_noise_smooth = false) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ux(0.0, 1.0), uv(-3.0, 3.0);
    std::normal_distribution<double> e(0.0, 0.1);
    Columns c;
    for (int i = 0; i < n; ++i) {
        const double x = ux(rng), v = uv(rng);
        c["x"].push_back(x);
        c["v"].push_back(v);
        c["y"].push_back(2.0 + 3.0 * x + std::sin(v) + e(rng));
        if (with_noise_smooth) c["w"].push_back(uv(rng));
    }
    return c;
}

ModelSpec benchmark_spec(bool with_noise_smooth = false) {
    ModelSpec s;
    s.response = "y";
    s.linear = {"x"};
    s.smooths = {SmoothTerm::cr("v")};
    if (with_noise_smooth) s.smooths.push_back(SmoothTerm::cr("w"));
    return s;
}

double objective(const PenalizedDesign& d, const Eigen::VectorXd& y, const std::vector<double>& lambdas,
                 const Eigen::VectorXd& beta) {
    const Eigen::VectorXd s = d.penalty_diagonal(lambdas);
    return (y - d.X * beta).squaredNorm() + beta.dot(s.cwiseProduct(beta));
}

}  // namespace

TEST_CASE("model spec validation") {
    ModelSpec s;
    s.response = "y";
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s.linear = {"x"};
    s.smooths = {SmoothTerm::cr("x")};
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s.smooths = {SmoothTerm::tensor("a", "b", "c")};
    CHECK_NOTHROW(s.validate());
    CHECK(s.smooths[0].label() == "te(a,b,c)");
}

TEST_CASE("no smooths and zero penalty reproduce hand OLS") {
    PenalizedDesign d;
    d.X.resize(4, 2);
    d.X << 1, 0, 1, 1, 1, 2, 1, 3;
    d.column_names = {"(Intercept)", "x"};
    Eigen::VectorXd y(4);
    y << 1, 3, 2, 5;
    // means 1.5 and 2.75, sxy = 5.5, sxx = 5: slope 1.1, intercept 1.1
    const auto r = fit_pls(d, y, {});
    CHECK(r.beta[0] == doctest::Approx(1.1).epsilon(1e-13));
    CHECK(r.beta[1] == doctest::Approx(1.1).epsilon(1e-13));
    CHECK(r.edf_total == doctest::Approx(2.0).epsilon(1e-12));
    const auto o = oracle::simple_ols({0, 1, 2, 3}, {1, 3, 2, 5});
    CHECK(r.beta[1] == doctest::Approx(o.slope).epsilon(1e-13));
}

TEST_CASE("exact fit has zero residuals") {
    PenalizedDesign d;
    d.X.resize(5, 3);
    d.X << 1, 0, 1, 1, 1, 0, 1, 2, 4, 1, 3, 2, 1, 4, 7;
    d.column_names = {"a", "b", "c"};
    Eigen::VectorXd beta(3);
    beta << 0.5, -1.0, 2.0;
    const auto r = fit_pls(d, d.X * beta, {});
    CHECK(r.rss < 1e-24);
    CHECK((r.beta - beta).norm() < 1e-12);
}

TEST_CASE("collinear linear terms are reported as aliased") {
    Columns c;
    for (int i = 0; i < 30; ++i) {
        c["y"].push_back(i % 7);
        c["a"].push_back(i);
        c["b"].push_back(2.0 * i + 1.0);
    }
    ModelSpec s;
    s.response = "y";
    s.linear = {"a", "b"};
    try {
        fit_reml(s, c);
        FAIL("expected a rank error");
    } catch (const RankError& e) {
        CHECK_FALSE(e.aliased().empty());
    }
}

TEST_CASE("penalized least-squares optimum has zero gradient") {
    const auto data = benchmark(21, 300, true);
    const auto md = build_model_design(benchmark_spec(true), data);
    const std::vector<double> lambdas(md.design.penalties.size(), 0.7);
    const auto r = fit_pls(md.design, md.y, lambdas);
    const Eigen::VectorXd s = md.design.penalty_diagonal(lambdas);
    const Eigen::VectorXd grad = 2.0 * md.design.X.transpose() * (md.design.X * r.beta - md.y) + 2.0 * s.cwiseProduct(r.beta);
    const double scale = (md.design.X.transpose() * md.y).norm();
    CHECK(grad.norm() <= 1e-6 * scale);

    std::mt19937_64 rng(22);
    std::normal_distribution<double> z;
    for (int k = 0; k < 5; ++k) {
        Eigen::VectorXd dir(r.beta.size());
        for (auto& v : dir) v = z(rng);
        dir.normalize();
        const double h = 1e-4;
        const double fd = (objective(md.design, md.y, lambdas, r.beta + h * dir) -
                           objective(md.design, md.y, lambdas, r.beta - h * dir)) / (2 * h);
        CHECK(std::abs(fd) <= 1e-6 * scale);
    }
}

TEST_CASE("huge smoothing parameter collapses a smooth to a line") {
    const auto data = benchmark(23, 300);
    const auto md = build_model_design(benchmark_spec(), data);
    const auto r = fit_pls(md.design, md.y, {1e10});
    const auto& comp = md.components.at(0);
    const auto& basis = std::get<SmoothBasis>(comp.basis);
    const Eigen::VectorXd coef = basis.constraint * r.beta.segment(comp.offset, comp.width);
    double curvature = 0.0;
    const auto& kn = basis.spline.knots();
    for (int i = 0; i <= 200; ++i) {
        const double t = kn[0] + (kn[kn.size() - 1] - kn[0]) * i / 200.0;
        curvature = std::max(curvature, std::abs(basis.spline.second_derivative(t).dot(coef)));
    }
    CHECK(curvature <= 1e-6);
}

TEST_CASE("REML recovers the benchmark") {
    const auto data = benchmark(3);
    const auto fit = fit_reml(benchmark_spec(), data);
    const double b = fit.coefficient("x"), se = fit.std_error("x");
    CHECK(std::abs(b - 3.0) <= 3.0 * se);
    const Eigen::VectorXd s = fit.smooth_contribution(0, data);
    double mean_sin = 0.0;
    for (double v : data.at("v")) mean_sin += std::sin(v);
    mean_sin /= 500.0;
    double mse = 0.0;
    for (int i = 0; i < 500; ++i) mse += std::pow(s[i] - (std::sin(data.at("v")[i]) - mean_sin), 2);
    CHECK(std::sqrt(mse / 500.0) <= 0.05);

    // bookkeeping invariants
    CHECK(((fit.fitted + fit.residuals) - fit.y).norm() <= 1e-10 * fit.y.norm());
    for (const auto& t : fit.terms)
        if (t.kind == "smooth") {
            CHECK(t.edf > 0.0);
            CHECK(t.edf <= 9.0 + 1e-9);
        }
    for (Eigen::Index j = 0; j < fit.se.size(); ++j) CHECK(fit.se[j] > 0.0);
    CHECK(fit.adj_r2 > 0.9);
}

TEST_CASE("REML optimum is no worse than any coarse-grid point") {
    for (std::uint64_t seed = 100; seed < 105; ++seed) {
        const auto data = benchmark(seed, 200, true);
        const auto fit = fit_reml(benchmark_spec(true), data);
        REQUIRE_FALSE(fit.grid_trace.empty());
        for (const auto& [rho, v] : fit.grid_trace) CHECK(fit.reml <= v + 1e-9 * std::abs(v));
    }
}

TEST_CASE("pure-noise smooth shrinks to its null space") {
    const auto data = benchmark(3, 500, true);
    const auto fit = fit_reml(benchmark_spec(true), data);
    const auto it = std::find_if(fit.terms.begin(), fit.terms.end(), [](const auto& t) { return t.label == "s(w)"; });
    REQUIRE(it != fit.terms.end());
    CHECK(it->edf <= 1.5);
}

TEST_CASE("dropping a null smooth barely moves the linear coefficient") {
    for (std::uint64_t seed : {31u, 32u, 33u}) {
        const auto data = benchmark(seed, 400, true);
        const auto with = fit_reml(benchmark_spec(true), data);
        const auto without = fit_reml(benchmark_spec(false), data);
        CHECK(std::abs(with.coefficient("x") - without.coefficient("x")) < 2.0 * without.std_error("x"));
    }
}

TEST_CASE("adjusted R2 equals the classical value without smooths") {
    std::mt19937_64 rng(41);
    std::normal_distribution<double> z;
    Columns c;
    for (int i = 0; i < 60; ++i) {
        const double x = z(rng);
        c["x"].push_back(x);
        c["y"].push_back(1.0 + 0.5 * x + z(rng));
    }
    ModelSpec s;
    s.response = "y";
    s.linear = {"x"};
    const auto fit = fit_reml(s, c);
    const double n = 60, p = 1;
    CHECK(fit.adj_r2 == doctest::Approx(1.0 - (1.0 - fit.r2) * (n - 1) / (n - p - 1)).epsilon(1e-12));
    const auto o = oracle::simple_ols(c["x"], c["y"]);
    CHECK(fit.coefficient("x") == doctest::Approx(o.slope).epsilon(1e-12));
    // with no penalty the posterior se is the classical one
    CHECK(fit.std_error("x") == doctest::Approx(o.se_slope).epsilon(1e-10));
}

TEST_CASE("scaling the response scales estimates and keeps the grid argmin") {
    const auto data = benchmark(51, 300);
    auto scaled = data;
    for (auto& v : scaled["y"]) v *= 7.0;
    const auto a = fit_reml(benchmark_spec(), data);
    const auto b = fit_reml(benchmark_spec(), scaled);
    CHECK(b.coefficient("x") == doctest::Approx(7.0 * a.coefficient("x")).epsilon(1e-4));
    CHECK(b.std_error("x") == doctest::Approx(7.0 * a.std_error("x")).epsilon(1e-4));
    auto argmin = [](const FitResult& f) {
        return std::min_element(f.grid_trace.begin(), f.grid_trace.end(),
                                [](const auto& p, const auto& q) { return p.second < q.second; })
            ->first;
    };
    CHECK(argmin(a) == argmin(b));
}

TEST_CASE("degenerate smooths") {
    auto data = benchmark(61, 100);
    data["c"] = std::vector<double>(100, 3.0);
    data["two"].clear();
    for (int i = 0; i < 100; ++i) data["two"].push_back(i % 2);
    ModelSpec s = benchmark_spec();
    s.smooths.push_back(SmoothTerm::cr("c"));
    s.smooths.push_back(SmoothTerm::cr("two"));
    const auto fit = fit_reml(s, data);
    CHECK(fit.warnings.size() >= 2);
    const auto plain = fit_reml(benchmark_spec(), data);
    CHECK(fit.coefficient("x") == doctest::Approx(plain.coefficient("x")).epsilon(0.05));
}

TEST_CASE("fixed smoothing parameters and convergence errors") {
    const auto data = benchmark(71, 200, true);
    RemlOptions fixed;
    fixed.fixed_lambda = {1.0, 2.0};
    const auto f = fit_reml(benchmark_spec(true), data, fixed);
    CHECK(f.lambda[0] == doctest::Approx(1.0));
    CHECK(f.lambda[1] == doctest::Approx(2.0));

    RemlOptions tight;
    tight.max_iterations = 1;
    try {
        fit_reml(benchmark_spec(true), data, tight);
        FAIL("expected a convergence error");
    } catch (const RemlConvergenceError& e) {
        CHECK(e.best().beta.size() > 0);
        CHECK(std::isfinite(e.best().reml));
    }
}

TEST_CASE("fit serialization") {
    const auto data = benchmark(81, 200);
    const auto fit = fit_reml(benchmark_spec(), data);
    const auto j = nlohmann::json::parse(fit.to_json());
    for (const char* key : {"coefficients", "lambda", "edf_total", "adj_r2", "sigma2", "terms", "curves"})
        CHECK(j.contains(key));
    const auto curves = fit.curves_csv();
    CHECK(curves.rfind("label,variable,x,fit,se,lower,upper", 0) == 0);
    CHECK(std::count(curves.begin(), curves.end(), '\n') == 101);
    const auto& c = fit.curves.at(0);
    for (std::size_t i = 0; i < c.x.size(); ++i) {
        CHECK(c.upper[i] - c.fit[i] == doctest::Approx(1.96 * c.se[i]));
        CHECK(c.fit[i] - c.lower[i] == doctest::Approx(1.96 * c.se[i]));
    }
    const auto pr = fit.partial_residuals_csv();
    CHECK(std::count(pr.begin(), pr.end(), '\n') == 201);
}

TEST_CASE("prediction at the data reproduces fitted values") {
    const auto data = benchmark(91, 150);
    const auto fit = fit_reml(benchmark_spec(), data);
    CHECK((fit.predict(data) - fit.fitted).cwiseAbs().maxCoeff() < 1e-9);
}
