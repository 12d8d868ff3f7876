#pragma once

// Independent reference computations used by the tests. None of these call
// into the library routines they check.

#include "sbc/causal_graph.hpp"
#include "sbc/dataset.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace oracle {

// ---------------------------------------------------------------------------
// d-separation by enumerating every simple path in the skeleton.
// ---------------------------------------------------------------------------

inline bool path_blocked(const sbc::Dag& g, const std::vector<std::size_t>& path, const std::set<std::size_t>& z) {
    for (std::size_t i = 1; i + 1 < path.size(); ++i) {
        const std::size_t prev = path[i - 1], node = path[i], next = path[i + 1];
        const auto& pa = g.parents(node);
        const bool from_prev = std::find(pa.begin(), pa.end(), prev) != pa.end();
        const bool from_next = std::find(pa.begin(), pa.end(), next) != pa.end();
        if (from_prev && from_next) {
            // collider: open only if it or a descendant is conditioned on
            bool open = z.count(node) != 0;
            for (const auto& d : g.descendants(g.nodes()[node]))
                if (z.count(g.index_of(d))) open = true;
            if (!open) return true;
        } else if (z.count(node)) {
            return true;
        }
    }
    return false;
}

inline bool d_separated(const sbc::Dag& g, const std::string& x, const std::string& y, const sbc::NodeSet& zn) {
    std::set<std::size_t> z;
    for (const auto& n : zn) z.insert(g.index_of(n));
    const std::size_t s = g.index_of(x), t = g.index_of(y);
    if (z.count(s) || z.count(t)) return true;
    const std::size_t n = g.size();
    std::vector<std::vector<std::size_t>> adj(n);
    for (const auto& e : g.edges()) {
        adj[g.index_of(e.parent)].push_back(g.index_of(e.child));
        adj[g.index_of(e.child)].push_back(g.index_of(e.parent));
    }
    std::vector<std::size_t> path{s};
    std::vector<bool> used(n, false);
    used[s] = true;
    bool connected = false;
    std::function<void(std::size_t)> walk = [&](std::size_t u) {
        if (connected) return;
        if (u == t) {
            if (!path_blocked(g, path, z)) connected = true;
            return;
        }
        for (std::size_t v : adj[u]) {
            if (used[v]) continue;
            used[v] = true;
            path.push_back(v);
            walk(v);
            path.pop_back();
            used[v] = false;
        }
    };
    walk(s);
    return !connected;
}

// ---------------------------------------------------------------------------
// Random graphs and discrete SCMs.
// ---------------------------------------------------------------------------

inline sbc::Dag random_dag(std::mt19937_64& rng, std::size_t n, double p) {
    std::vector<std::string> nodes;
    for (std::size_t i = 0; i < n; ++i) nodes.push_back("n" + std::to_string(i));
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<sbc::Edge> edges;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (u(rng) < p) edges.push_back({nodes[order[i]], nodes[order[j]], ""});
    return sbc::Dag(nodes, edges);
}

/// Strictly positive CPTs with the library's layout (last parent fastest).
inline sbc::DiscreteScm random_scm(std::mt19937_64& rng, const sbc::Dag& g) {
    std::uniform_int_distribution<int> card_dist(2, 3);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    std::vector<std::size_t> card(g.size());
    for (auto& c : card) c = static_cast<std::size_t>(card_dist(rng));
    std::vector<std::vector<double>> cpts(g.size());
    for (std::size_t v = 0; v < g.size(); ++v) {
        std::size_t rows = 1;
        for (std::size_t p : g.parents(v)) rows *= card[p];
        for (std::size_t r = 0; r < rows; ++r) {
            std::vector<double> row(card[v]);
            double sum = 0.0;
            for (auto& e : row) sum += (e = u(rng));
            for (auto e : row) cpts[v].push_back(e / sum);
        }
    }
    return sbc::DiscreteScm(g, card, cpts);
}

/// Pr(outcome | do(treatment = value)) by the truncated factorization: drop
/// the treatment's own factor, clamp it, and sum the remaining product.
inline std::vector<double> truncated_factorization(const sbc::DiscreteScm& scm, const std::string& treatment,
                                                   std::size_t value, const std::string& outcome) {
    const auto& g = scm.dag();
    const auto& card = scm.cardinalities();
    const auto& cpts = scm.cpts();
    const std::size_t n = g.size(), t = g.index_of(treatment), o = g.index_of(outcome);
    std::vector<double> out(card[o], 0.0);
    std::vector<std::size_t> s(n, 0);
    // odometer over every assignment, treatment held fixed
    s[t] = value;
    while (true) {
        double p = 1.0;
        for (std::size_t v = 0; v < n; ++v) {
            if (v == t) continue;
            std::size_t row = 0;
            for (std::size_t par : g.parents(v)) row = row * card[par] + s[par];
            p *= cpts[v][row * card[v] + s[v]];
        }
        out[s[o]] += p;
        std::size_t i = 0;
        for (; i < n; ++i) {
            if (i == t) continue;
            if (++s[i] < card[i]) break;
            s[i] = 0;
        }
        if (i == n) break;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Numerics
// ---------------------------------------------------------------------------

/// Composite Simpson rule with `panels` (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int panels = 10000) {
    const double h = (b - a) / panels;
    double sum = f(a) + f(b);
    for (int i = 1; i < panels; ++i) sum += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return sum * h / 3.0;
}

/// Natural cubic spline through (knots, values) by the tridiagonal second-
/// derivative system, evaluated for f''(x). Independent of the library's F matrix.
inline std::function<double(double)> natural_spline_second_derivative(const Eigen::VectorXd& knots,
                                                                      const Eigen::VectorXd& values) {
    const Eigen::Index k = knots.size();
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(k, k);
    Eigen::VectorXd r = Eigen::VectorXd::Zero(k);
    A(0, 0) = A(k - 1, k - 1) = 1.0;
    for (Eigen::Index i = 1; i + 1 < k; ++i) {
        const double h0 = knots[i] - knots[i - 1], h1 = knots[i + 1] - knots[i];
        A(i, i - 1) = h0 / 6.0;
        A(i, i) = (h0 + h1) / 3.0;
        A(i, i + 1) = h1 / 6.0;
        r[i] = (values[i + 1] - values[i]) / h1 - (values[i] - values[i - 1]) / h0;
    }
    const Eigen::VectorXd m = A.fullPivLu().solve(r);
    return [knots, m](double x) {
        const Eigen::Index k = knots.size();
        if (x <= knots[0] || x >= knots[k - 1]) return 0.0;
        Eigen::Index j = 0;
        while (x > knots[j + 1]) ++j;
        const double h = knots[j + 1] - knots[j];
        return (m[j] * (knots[j + 1] - x) + m[j + 1] * (x - knots[j])) / h;
    };
}

struct Ols {
    double intercept, slope, se_slope;
};

/// Simple-regression OLS from the textbook sums.
inline Ols simple_ols(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
    mx /= n, my /= n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) sxx += (x[i] - mx) * (x[i] - mx), sxy += (x[i] - mx) * (y[i] - my);
    const double b = sxy / sxx, a = my - b * mx;
    double rss = 0;
    for (std::size_t i = 0; i < x.size(); ++i) rss += std::pow(y[i] - a - b * x[i], 2);
    return {a, b, std::sqrt(rss / (n - 2) / sxx)};
}

/// Daily panel starting 2022-01-03 with the given columns.
inline sbc::MmmPanel make_panel(const std::vector<double>& y, const std::vector<double>& x1,
                                const std::vector<double>& v1, const std::vector<double>& v2,
                                const std::vector<double>& v3) {
    sbc::MmmPanel p;
    sbc::Date d = sbc::parse_iso_date("2022-01-03");
    for (std::size_t i = 0; i < y.size(); ++i) p.dates.push_back(d + std::chrono::days(static_cast<int>(i)));
    p.y = y, p.x1 = x1, p.v1 = v1, p.v2 = v2, p.v3 = v3;
    return p;
}

}  // namespace oracle
