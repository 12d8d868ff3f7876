#include "sbc/dataset.hpp"

#include "sbc/csv.hpp"
#include "sbc/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

namespace sbc {

using namespace std::chrono;

Date parse_iso_date(const std::string& text) {
    int y = 0;
    unsigned m = 0, d = 0;
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') throw std::invalid_argument("bad date '" + text + "'");
    for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9})
        if (text[i] < '0' || text[i] > '9') throw std::invalid_argument("bad date '" + text + "'");
    y = std::stoi(text.substr(0, 4));
    m = static_cast<unsigned>(std::stoi(text.substr(5, 2)));
    d = static_cast<unsigned>(std::stoi(text.substr(8, 2)));
    const year_month_day ymd{year{y}, month{m}, day{d}};
    if (!ymd.ok()) throw std::invalid_argument("impossible date '" + text + "'");
    return sys_days{ymd};
}

std::string format_iso_date(Date d) {
    const year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()));
    return buf;
}

std::vector<double> MmmPanel::category_volume() const {
    std::vector<double> s(size());
    for (std::size_t i = 0; i < size(); ++i) s[i] = v1[i] + v2[i] + v3[i];
    return s;
}

int MmmPanel::step_days() const {
    if (dates.size() < 2) return 1;
    return static_cast<int>((dates[1] - dates[0]).count());
}

void MmmPanel::validate() const {
    using K = ValidationError::Kind;
    const auto n = dates.size();
    if (n < min_length)
        throw ValidationError(K::length, "panel has " + std::to_string(n) + " rows, need at least " +
                                             std::to_string(min_length));
    auto check = [&](const std::vector<double>& s, const std::string& name) {
        if (s.size() != n)
            throw ValidationError(K::length, "series '" + name + "' has length " + std::to_string(s.size()) +
                                                 ", expected " + std::to_string(n),
                                  0, name);
        for (std::size_t i = 0; i < n; ++i) {
            if (!std::isfinite(s[i]))
                throw ValidationError(K::parse, "non-finite value in '" + name + "' at row " + std::to_string(i + 1),
                                      i + 1, name);
            if (s[i] < 0.0)
                throw ValidationError(K::negative_value,
                                      "negative value in '" + name + "' at row " + std::to_string(i + 1), i + 1, name);
        }
    };
    check(y, "y");
    check(x1, "x1");
    check(v1, "v1");
    check(v2, "v2");
    check(v3, "v3");
    for (const auto& [name, s] : x2) check(s, name);
    const auto step = dates[1] - dates[0];
    for (std::size_t i = 1; i < n; ++i) {
        const auto diff = dates[i] - dates[i - 1];
        if (diff.count() == 0)
            throw ValidationError(K::duplicate_date, "duplicate date " + format_iso_date(dates[i]), i + 1, "date");
        if (diff.count() < 0)
            throw ValidationError(K::other, "dates are not increasing at row " + std::to_string(i + 1), i + 1, "date");
        if (diff != step)
            throw ValidationError(K::date_gap, "gap in dates: missing " + format_iso_date(dates[i - 1] + step), i + 1,
                                  "date");
    }
}

MmmPanel MmmPanel::slice(std::size_t begin, std::size_t end) const {
    end = std::min(end, size());
    auto cut = [&](const std::vector<double>& s) {
        return std::vector<double>(s.begin() + static_cast<std::ptrdiff_t>(begin),
                                   s.begin() + static_cast<std::ptrdiff_t>(end));
    };
    MmmPanel out;
    out.dates.assign(dates.begin() + static_cast<std::ptrdiff_t>(begin), dates.begin() + static_cast<std::ptrdiff_t>(end));
    out.y = cut(y);
    out.x1 = cut(x1);
    out.v1 = cut(v1);
    out.v2 = cut(v2);
    out.v3 = cut(v3);
    for (const auto& [k, s] : x2) out.x2[k] = cut(s);
    return out;
}

PanelSchema PanelSchema::from_json(const std::string& text) {
    PanelSchema s;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid schema JSON: ") + e.what());
    }
    s.date = j.value("date", s.date);
    s.y = j.value("y", s.y);
    s.x1 = j.value("x1", s.x1);
    s.v1 = j.value("v1", s.v1);
    s.v2 = j.value("v2", s.v2);
    s.v3 = j.value("v3", s.v3);
    if (j.contains("x2")) s.x2 = j.at("x2").get<std::vector<std::string>>();
    return s;
}

PanelSchema infer_schema(const std::string& csv_text, PanelSchema base) {
    if (!base.x2.empty()) return base;
    const auto table = csv::parse(csv_text);
    const std::set<std::string> mapped{base.date, base.y, base.x1, base.v1, base.v2, base.v3};
    for (const auto& h : table.header)
        if (!mapped.count(h)) base.x2.push_back(h);
    return base;
}

MmmPanel parse_panel(const std::string& csv_text, const PanelSchema& schema) {
    using K = ValidationError::Kind;
    const auto table = csv::parse(csv_text);
    auto col = [&](const std::string& name) {
        const auto c = table.column(name);
        if (c == csv::Table::npos) throw ValidationError(K::missing_column, "missing column '" + name + "'", 0, name);
        return c;
    };
    const auto cd = col(schema.date);
    const auto cy = col(schema.y);
    const auto cx = col(schema.x1);
    const auto c1 = col(schema.v1);
    const auto c2 = col(schema.v2);
    const auto c3 = col(schema.v3);
    std::vector<std::size_t> cx2;
    for (const auto& name : schema.x2) cx2.push_back(col(name));

    struct Row {
        Date date;
        std::size_t line;
        std::vector<double> values;
    };
    std::vector<Row> rows;
    rows.reserve(table.rows.size());
    std::vector<std::size_t> numeric = {cy, cx, c1, c2, c3};
    numeric.insert(numeric.end(), cx2.begin(), cx2.end());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& fields = table.rows[r];
        Row row;
        row.line = r + 1;
        try {
            row.date = parse_iso_date(fields[cd]);
        } catch (const std::exception&) {
            throw ValidationError(K::parse, "row " + std::to_string(r + 1) + ": bad date '" + fields[cd] + "'", r + 1,
                                  schema.date);
        }
        for (auto c : numeric) {
            const auto& f = fields[c];
            if (f.find_first_not_of(" \t") == std::string::npos)
                throw ValidationError(K::parse, "row " + std::to_string(r + 1) + ": missing value in '" + table.header[c] + "'",
                                      r + 1, table.header[c]);
            double v = 0.0;
            try {
                v = csv::parse_double(f);
            } catch (const std::exception&) {
                throw ValidationError(K::parse, "row " + std::to_string(r + 1) + ": '" + f + "' in '" + table.header[c] +
                                                    "' is not a number",
                                      r + 1, table.header[c]);
            }
            if (!std::isfinite(v))
                throw ValidationError(K::parse, "row " + std::to_string(r + 1) + ": non-finite value in '" + table.header[c] + "'",
                                      r + 1, table.header[c]);
            if (v < 0.0)
                throw ValidationError(K::negative_value,
                                      "row " + std::to_string(r + 1) + ": negative value in '" + table.header[c] + "'", r + 1,
                                      table.header[c]);
            row.values.push_back(v);
        }
        rows.push_back(std::move(row));
    }

    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.date < b.date; });
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].date == rows[i - 1].date)
            throw ValidationError(K::duplicate_date, "row " + std::to_string(rows[i].line) + ": duplicate date " +
                                                         format_iso_date(rows[i].date),
                                  rows[i].line, schema.date);
    if (rows.size() >= 2) {
        // The smallest spacing defines the grid; anything wider is a gap.
        auto step = rows[1].date - rows[0].date;
        for (std::size_t i = 2; i < rows.size(); ++i) step = std::min(step, rows[i].date - rows[i - 1].date);
        for (std::size_t i = 1; i < rows.size(); ++i)
            if (rows[i].date - rows[i - 1].date != step)
                throw ValidationError(K::date_gap, "gap in dates: missing " + format_iso_date(rows[i - 1].date + step) +
                                                       " before row " + std::to_string(rows[i].line),
                                      rows[i].line, schema.date);
    }

    MmmPanel p;
    for (const auto& row : rows) {
        p.dates.push_back(row.date);
        p.y.push_back(row.values[0]);
        p.x1.push_back(row.values[1]);
        p.v1.push_back(row.values[2]);
        p.v2.push_back(row.values[3]);
        p.v3.push_back(row.values[4]);
        for (std::size_t k = 0; k < schema.x2.size(); ++k) p.x2[schema.x2[k]].push_back(row.values[5 + k]);
    }
    p.validate();
    return p;
}

MmmPanel load_panel(const std::string& path, const PanelSchema& schema) {
    const auto table_text = [&] {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw InputError("cannot open panel file '" + path + "'");
        std::stringstream buf;
        buf << in.rdbuf();
        return buf.str();
    }();
    return parse_panel(table_text, schema);
}

std::string panel_to_csv(const MmmPanel& panel, const PanelSchema& schema) {
    csv::Table t;
    t.header = {schema.date, schema.y, schema.x1, schema.v1, schema.v2, schema.v3};
    for (const auto& [name, s] : panel.x2) t.header.push_back(name);
    for (std::size_t i = 0; i < panel.size(); ++i) {
        std::vector<std::string> row = {format_iso_date(panel.dates[i]), csv::format_double(panel.y[i]),
                                        csv::format_double(panel.x1[i]), csv::format_double(panel.v1[i]),
                                        csv::format_double(panel.v2[i]), csv::format_double(panel.v3[i])};
        for (const auto& [name, s] : panel.x2) row.push_back(csv::format_double(s[i]));
        t.rows.push_back(std::move(row));
    }
    return csv::format(t);
}

void save_panel(const MmmPanel& panel, const std::string& path, const PanelSchema& schema) {
    csv::write_file(path, panel_to_csv(panel, schema));
}

std::string panel_to_json(const MmmPanel& panel) {
    nlohmann::json j;
    std::vector<std::string> dates;
    for (auto d : panel.dates) dates.push_back(format_iso_date(d));
    j["dates"] = dates;
    j["y"] = panel.y;
    j["x1"] = panel.x1;
    j["v1"] = panel.v1;
    j["v2"] = panel.v2;
    j["v3"] = panel.v3;
    j["x2"] = panel.x2;
    return j.dump();
}

MmmPanel aggregate_weekly(const MmmPanel& panel) {
    if (panel.step_days() != 1) throw ConfigError("weekly aggregation needs a daily panel");
    MmmPanel out;
    for (const auto& [name, s] : panel.x2) out.x2[name];
    std::size_t i = 0;
    const auto n = panel.size();
    // Advance to the first Monday.
    while (i < n && weekday{panel.dates[i]} != Monday) ++i;
    for (; i + 7 <= n; i += 7) {
        out.dates.push_back(panel.dates[i]);
        auto sum = [&](const std::vector<double>& s) {
            return std::accumulate(s.begin() + static_cast<std::ptrdiff_t>(i),
                                   s.begin() + static_cast<std::ptrdiff_t>(i + 7), 0.0);
        };
        out.y.push_back(sum(panel.y));
        out.x1.push_back(sum(panel.x1));
        out.v1.push_back(sum(panel.v1));
        out.v2.push_back(sum(panel.v2));
        out.v3.push_back(sum(panel.v3));
        for (const auto& [name, s] : panel.x2) out.x2[name].push_back(sum(s));
    }
    out.validate();
    return out;
}

std::vector<std::pair<int, MmmPanel>> split_by_year(const MmmPanel& panel) {
    std::vector<std::pair<int, MmmPanel>> out;
    std::size_t begin = 0;
    while (begin < panel.size()) {
        const int yr = static_cast<int>(year_month_day{panel.dates[begin]}.year());
        std::size_t end = begin;
        while (end < panel.size() && static_cast<int>(year_month_day{panel.dates[end]}.year()) == yr) ++end;
        out.emplace_back(yr, panel.slice(begin, end));
        begin = end;
    }
    return out;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const auto n = a.size();
    if (n != b.size() || n < 2) return std::numeric_limits<double>::quiet_NaN();
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(n);
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(n);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return std::numeric_limits<double>::quiet_NaN();
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

PanelSummary summarize(const MmmPanel& panel) {
    PanelSummary s;
    std::vector<const std::vector<double>*> series = {&panel.y, &panel.x1, &panel.v1, &panel.v2, &panel.v3};
    s.names = {"y", "x1", "v1", "v2", "v3"};
    for (const auto& [name, v] : panel.x2) {
        s.names.push_back(name);
        series.push_back(&v);
    }
    const auto k = series.size();
    s.correlation = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < k; ++i) {
        const auto& v = *series[i];
        const auto n = static_cast<double>(v.size());
        auto sorted = v;
        std::sort(sorted.begin(), sorted.end());
        const auto m = sorted.size();
        const double median = m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        s.median.push_back(median);
        s.mean.push_back(mean);
        s.sd.push_back(std::sqrt(ss / (n - 1.0)));
        std::vector<double> rescaled(v.size(), std::numeric_limits<double>::quiet_NaN());
        if (median != 0.0)
            for (std::size_t t = 0; t < v.size(); ++t) rescaled[t] = v[t] / median;
        s.median_rescaled[s.names[i]] = std::move(rescaled);
    }
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = i + 1; j < k; ++j) {
            const double r = pearson(*series[i], *series[j]);
            s.correlation(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r;
            s.correlation(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = r;
            if (std::isnan(r)) s.undefined_pairs.emplace_back(s.names[i], s.names[j]);
        }
        // Unit diagonal even for constant series; the undefined pair list reports them.
    }
    return s;
}

}  // namespace sbc
