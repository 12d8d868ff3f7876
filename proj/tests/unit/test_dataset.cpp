#include "oracles.hpp"
#include "sbc/csv.hpp"
#include "sbc/dataset.hpp"
#include "sbc/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace sbc;

namespace {

std::string panel_csv(int rows, int skip_row = -1, int negative_row = -1) {
    std::ostringstream os;
    os << "date,sales,spend,v1,v2,v3\n";
    Date d = parse_iso_date("2021-03-01");
    for (int i = 0; i < rows + (skip_row >= 0 ? 1 : 0); ++i) {
        const Date day = d + std::chrono::days(i);
        if (i == skip_row) continue;
        const int row = skip_row >= 0 && i > skip_row ? i : i + 1;
        os << format_iso_date(day) << "," << 100 + i << "," << (row == negative_row ? -1 : 10 + i % 7) << ","
           << 50 + i << "," << 20 + i % 3 << "," << 30 + i % 5 << "\n";
    }
    return os.str();
}

template <typename F>
ValidationError capture(F&& f) {
    try {
        f();
    } catch (const ValidationError& e) {
        return e;
    }
    FAIL("expected a validation error");
    return ValidationError(ValidationError::Kind::other, "");
}

}  // namespace

TEST_CASE("iso dates") {
    CHECK(format_iso_date(parse_iso_date("2024-02-29")) == "2024-02-29");
    CHECK_THROWS(parse_iso_date("2023-02-29"));
    CHECK_THROWS(parse_iso_date("2023/01/01"));
}

TEST_CASE("csv parsing handles quotes, CRLF and embedded separators") {
    const auto t = csv::parse("a,b\r\n\"x, y\",\"say \"\"hi\"\"\"\n1,2\n");
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0][0] == "x, y");
    CHECK(t.rows[0][1] == "say \"hi\"");
    CHECK(csv::parse(csv::format(t)).rows == t.rows);
}

TEST_CASE("65-row panel loads") {
    const auto p = parse_panel(panel_csv(65));
    CHECK(p.size() == 65);
    CHECK(p.step_days() == 1);
    CHECK(p.y.front() == 100);
}

TEST_CASE("gap error names the missing date") {
    const auto e = capture([] { parse_panel(panel_csv(20, 5)); });
    CHECK(e.kind() == ValidationError::Kind::date_gap);
    CHECK(std::string(e.what()).find("2021-03-06") != std::string::npos);
}

TEST_CASE("negative value error names row 7") {
    const auto e = capture([] { parse_panel(panel_csv(20, -1, 7)); });
    CHECK(e.kind() == ValidationError::Kind::negative_value);
    CHECK(e.row() == 7);
    CHECK(e.column() == "spend");
}

TEST_CASE("missing column and duplicate date are distinct errors") {
    auto text = panel_csv(12);
    const auto no_v3 = std::string("date,sales,spend,v1,v2\n2021-01-01,1,1,1,1\n");
    CHECK(capture([&] { parse_panel(no_v3); }).kind() == ValidationError::Kind::missing_column);
    text += "2021-03-12,1,1,1,1,1\n";
    CHECK(capture([&] { parse_panel(text); }).kind() == ValidationError::Kind::duplicate_date);
    CHECK(capture([] { parse_panel(panel_csv(5)); }).kind() == ValidationError::Kind::length);
}

TEST_CASE("unsorted rows are sorted by date") {
    auto text = panel_csv(12);
    std::istringstream in(text);
    std::string header, line;
    std::getline(in, header);
    std::vector<std::string> lines;
    while (std::getline(in, line)) lines.push_back(line);
    std::reverse(lines.begin(), lines.end());
    std::string shuffled = header + "\n";
    for (const auto& l : lines) shuffled += l + "\n";
    CHECK(parse_panel(shuffled).y == parse_panel(text).y);
}

TEST_CASE("save/load round trip is bit exact") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1e4);
    std::vector<double> y, x, a, b, c;
    for (int i = 0; i < 40; ++i) y.push_back(u(rng)), x.push_back(u(rng)), a.push_back(u(rng)), b.push_back(u(rng)), c.push_back(u(rng));
    auto p = oracle::make_panel(y, x, a, b, c);
    p.x2["tv"] = a;
    PanelSchema schema;
    schema.x2 = {"tv"};
    const auto q = parse_panel(panel_to_csv(p, schema), schema);
    CHECK(q.y == p.y);
    CHECK(q.x1 == p.x1);
    CHECK(q.v3 == p.v3);
    CHECK(q.x2.at("tv") == p.x2.at("tv"));
    CHECK(q.dates == p.dates);
}

TEST_CASE("schema maps custom column names") {
    PanelSchema s = PanelSchema::from_json(R"({"date":"day","y":"kpi","x1":"search","x2":["tv"]})");
    CHECK(s.y == "kpi");
    std::string text = "day,kpi,search,v1,v2,v3,tv\n";
    for (int i = 0; i < 10; ++i) text += "2021-01-" + std::string(i + 1 < 10 ? "0" : "") + std::to_string(i + 1) + ",1,2,3,4,5,6\n";
    const auto p = parse_panel(text, s);
    CHECK(p.x2.at("tv").front() == 6.0);
}

TEST_CASE("schema inference takes unmapped columns as non-search channels") {
    const std::string text = "date,kpi,spend,v1,v2,v3,tv,radio\n2021-01-01,1,2,3,4,5,6,7\n";
    PanelSchema base;
    base.y = "kpi";
    const auto s = infer_schema(text, base);
    CHECK(s.x2 == std::vector<std::string>{"tv", "radio"});
    CHECK(s.y == "kpi");
    base.x2 = {"tv"};
    CHECK(infer_schema(text, base).x2 == std::vector<std::string>{"tv"});
    CHECK(infer_schema(panel_csv(12)).x2.empty());
}

TEST_CASE("pearson correlation") {
    std::vector<double> x{1, 2, 3, 4, 5}, y{2, 1, 4, 3, 5};
    // hand evaluation: means 3, 3; sxy = 8; sxx = syy = 10
    CHECK(pearson(x, y) == doctest::Approx(0.8).epsilon(1e-14));
    std::vector<double> neg;
    for (double v : x) neg.push_back(7 - 2 * v);
    CHECK(pearson(x, neg) == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(pearson(x, x) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(std::isnan(pearson(x, {1, 1, 1, 1, 1})));
}

TEST_CASE("summarize: symmetric unit-diagonal correlations, affine invariance, undefined pairs") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> z(10.0, 2.0);
    std::vector<double> y, x, a, b, c(30, 4.0);
    for (int i = 0; i < 30; ++i) y.push_back(z(rng) + 20), x.push_back(z(rng) + 20), a.push_back(z(rng) + 20), b.push_back(z(rng) + 20);
    const auto p = oracle::make_panel(y, x, a, b, c);
    const auto s = summarize(p);
    const auto& C = s.correlation;
    for (Eigen::Index i = 0; i < 4; ++i) {
        CHECK(C(i, i) == doctest::Approx(1.0));
        for (Eigen::Index j = 0; j < 4; ++j) {
            CHECK(C(i, j) == C(j, i));
            CHECK(std::abs(C(i, j)) <= 1.0 + 1e-15);
        }
    }
    CHECK(s.undefined_pairs.size() == 4);  // v3 against the other four series

    auto q = p;
    for (auto& v : q.x1) v = 3.0 * v + 100.0;
    const auto s2 = summarize(q);
    CHECK(s2.correlation(0, 1) == doctest::Approx(C(0, 1)).epsilon(1e-12));
    CHECK(s.median_rescaled.at("y").size() == 30);
}

TEST_CASE("weekly aggregation drops partial weeks and sums") {
    std::vector<double> ones(30, 1.0);
    auto p = oracle::make_panel(ones, ones, ones, ones, ones);  // starts Monday 2022-01-03
    p.dates.erase(p.dates.begin());
    for (auto* s : {&p.y, &p.x1, &p.v1, &p.v2, &p.v3}) s->erase(s->begin());
    // now starts on a Tuesday: 29 days cover 6 partial days + 3 full weeks + 2 days
    CHECK_THROWS_AS(aggregate_weekly(p), ValidationError);  // 3 weeks is below the minimum length
    std::vector<double> many(120, 1.0);
    const auto w = aggregate_weekly(oracle::make_panel(many, many, many, many, many));
    CHECK(w.step_days() == 7);
    CHECK(w.size() == 17);
    for (double v : w.y) CHECK(v == 7.0);
}

TEST_CASE("split by year") {
    std::vector<double> v(800, 1.0);
    const auto parts = split_by_year(oracle::make_panel(v, v, v, v, v));
    REQUIRE(parts.size() == 3);
    CHECK(parts[0].first == 2022);
    CHECK(parts[0].second.size() == 363);
    CHECK(parts[1].second.size() == 365);
}
