#include "sbc/query_summarizer.hpp"

#include "sbc/csv.hpp"
#include "sbc/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace sbc {

std::string to_string(Segment s) {
    switch (s) {
        case Segment::target: return "target";
        case Segment::competitor: return "competitor";
        case Segment::general: return "general";
        case Segment::irrelevant: return "irrelevant";
    }
    return "irrelevant";
}

Segment segment_from_string(const std::string& s) {
    if (s == "target") return Segment::target;
    if (s == "competitor") return Segment::competitor;
    if (s == "general") return Segment::general;
    if (s == "irrelevant") return Segment::irrelevant;
    throw InputError("unknown segment '" + s + "'");
}

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

bool domain_matches(const std::string& host, const std::string& domain) {
    if (host == domain) return true;
    return host.size() > domain.size() && host.compare(host.size() - domain.size(), domain.size(), domain) == 0 &&
           host[host.size() - domain.size() - 1] == '.';
}

std::string strip_scheme(const std::string& url) {
    const auto scheme = url.find("://");
    return scheme == std::string::npos ? url : url.substr(scheme + 3);
}

bool in_set(const std::string& url, const std::set<std::string>& domains, UrlTaxonomy::Match match) {
    if (match == UrlTaxonomy::Match::domain_suffix) {
        const auto host = url_host(url);
        return std::any_of(domains.begin(), domains.end(), [&](const std::string& d) { return domain_matches(host, lower(d)); });
    }
    const auto bare = lower(strip_scheme(url));
    return std::any_of(domains.begin(), domains.end(),
                       [&](const std::string& p) { return bare.rfind(lower(strip_scheme(p)), 0) == 0; });
}

}  // namespace

std::string url_host(const std::string& url) {
    auto rest = strip_scheme(url);
    rest = rest.substr(0, rest.find_first_of("/?#"));
    if (const auto at = rest.rfind('@'); at != std::string::npos) rest = rest.substr(at + 1);
    if (const auto colon = rest.find(':'); colon != std::string::npos) rest = rest.substr(0, colon);
    rest = lower(rest);
    if (rest.rfind("www.", 0) == 0) rest = rest.substr(4);
    while (!rest.empty() && rest.back() == '.') rest.pop_back();
    return rest;
}

void UrlTaxonomy::validate() const {
    auto overlap = [](const std::set<std::string>& a, const std::set<std::string>& b, const char* what) {
        for (const auto& d : a)
            if (b.count(d)) throw ConfigError(std::string("taxonomy sets overlap (") + what + "): '" + d + "'");
    };
    overlap(advertiser_domains, competitor_domains, "advertiser/competitor");
    overlap(advertiser_domains, category_domains, "advertiser/category");
    overlap(competitor_domains, category_domains, "competitor/category");
}

UrlGroup UrlTaxonomy::classify(const std::string& url) const {
    if (in_set(url, advertiser_domains, match)) return UrlGroup::advertiser;
    if (in_set(url, competitor_domains, match)) return UrlGroup::competitor;
    if (in_set(url, category_domains, match)) return UrlGroup::category;
    return UrlGroup::other;
}

UrlTaxonomy UrlTaxonomy::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid taxonomy JSON: ") + e.what());
    }
    UrlTaxonomy t;
    auto read = [&](const char* key, std::set<std::string>& out) {
        if (!j.contains(key)) throw ConfigError(std::string("taxonomy JSON lacks '") + key + "'");
        for (const auto& d : j.at(key)) out.insert(lower(d.get<std::string>()));
    };
    read("advertiser", t.advertiser_domains);
    read("competitors", t.competitor_domains);
    read("category", t.category_domains);
    const auto match = j.value("match", std::string("domain"));
    if (match == "domain")
        t.match = Match::domain_suffix;
    else if (match == "prefix")
        t.match = Match::url_prefix;
    else
        throw ConfigError("taxonomy 'match' must be 'domain' or 'prefix'");
    t.validate();
    return t;
}

UrlTaxonomy UrlTaxonomy::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open taxonomy file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str());
}

std::vector<QueryLogRecord> aggregate_log(const std::vector<QueryLogRecord>& log) {
    std::map<std::pair<std::string, std::string>, std::uint64_t> acc;
    for (const auto& r : log) acc[{r.query, r.url}] += r.count;
    std::vector<QueryLogRecord> out;
    out.reserve(acc.size());
    for (const auto& [key, count] : acc) out.push_back({key.first, key.second, count});
    return out;
}

Segment assign_segment(double w_a, double w_b, double w_c, double w_d, const Thresholds& th) {
    const double total = w_a + w_b + w_c + w_d;
    const double category = w_a + w_b + w_c;
    if (w_a <= 0.0 || total <= 0.0) return Segment::irrelevant;
    if (category / total < th.category_min) return Segment::irrelevant;
    if (w_a / category > th.target_min) return Segment::target;
    if (w_b / category > th.competitor_min) return Segment::competitor;
    return Segment::general;
}

ClassificationResult classify_queries(const std::vector<QueryLogRecord>& log, const UrlTaxonomy& taxonomy,
                                      const Thresholds& th) {
    for (double t : {th.category_min, th.target_min, th.competitor_min})
        if (!(t > 0.0 && t < 1.0)) throw ConfigError("thresholds must lie in (0, 1)");
    taxonomy.validate();

    std::map<std::string, QueryClassification> by_query;
    for (const auto& r : aggregate_log(log)) {
        auto& q = by_query[r.query];
        q.query = r.query;
        const auto w = static_cast<double>(r.count);
        switch (taxonomy.classify(r.url)) {
            case UrlGroup::advertiser: q.w_a += w; break;
            case UrlGroup::competitor: q.w_b += w; break;
            case UrlGroup::category: q.w_c += w; break;
            case UrlGroup::other: q.w_d += w; break;
        }
    }
    ClassificationResult result;
    for (auto& [name, q] : by_query) {
        if (q.w_total() == 0.0) result.warnings.push_back("query '" + name + "' has no impressions; marked irrelevant");
        q.segment = assign_segment(q.w_a, q.w_b, q.w_c, q.w_d, th);
        result.queries.push_back(q);
    }
    return result;
}

std::vector<double> VolumePanel::category() const {
    std::vector<double> s(dates.size());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = v1[i] + v2[i] + v3[i];
    return s;
}

VolumePanel build_volume_panel(const std::vector<DailyQueryCount>& counts,
                               const std::vector<QueryClassification>& classes) {
    VolumePanel out;
    std::map<std::string, Segment> seg;
    for (const auto& c : classes) seg[c.query] = c.segment;
    if (classes.empty()) out.warnings.push_back("empty classification set; all volumes are zero");

    std::map<Date, std::array<double, 3>> by_date;
    for (const auto& c : counts) {
        if (!(c.count >= 0.0)) throw InputError("negative search count for '" + c.query + "'");
        auto& slot = by_date[c.date];
        const auto it = seg.find(c.query);
        if (it == seg.end()) continue;
        switch (it->second) {
            case Segment::target: slot[0] += c.count; break;
            case Segment::competitor: slot[1] += c.count; break;
            case Segment::general: slot[2] += c.count; break;
            case Segment::irrelevant: break;
        }
    }
    if (by_date.size() >= 2) {
        auto it = by_date.begin();
        auto prev = it->first;
        const auto step = std::chrono::days(1);
        for (++it; it != by_date.end(); ++it) {
            if (it->first - prev != step)
                throw AlignmentError("daily counts are misaligned: expected " + format_iso_date(prev + step) + " after " +
                                     format_iso_date(prev) + ", got " + format_iso_date(it->first));
            prev = it->first;
        }
    }
    for (const auto& [d, v] : by_date) {
        out.dates.push_back(d);
        out.v1.push_back(v[0]);
        out.v2.push_back(v[1]);
        out.v3.push_back(v[2]);
    }
    return out;
}

ScatterTable emit_classification_scatter(const std::vector<QueryClassification>& classes) {
    ScatterTable t;
    for (const auto& c : classes) {
        const double cat = c.w_category();
        if (cat <= 0.0) {
            ++t.omitted;
            continue;
        }
        t.points.push_back({c.query, c.w_a / cat, cat / c.w_total(), c.segment});
    }
    return t;
}

std::vector<QueryLogRecord> load_query_log(const std::string& path) {
    const auto t = csv::read_file(path);
    const auto cq = t.column("query"), cu = t.column("url"), cc = t.column("count");
    for (auto [c, name] : {std::pair{cq, "query"}, std::pair{cu, "url"}, std::pair{cc, "count"}})
        if (c == csv::Table::npos)
            throw ValidationError(ValidationError::Kind::missing_column, path + ": missing column '" + name + "'", 0, name);
    std::vector<QueryLogRecord> log;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        double v = 0.0;
        try {
            v = csv::parse_double(t.rows[r][cc]);
        } catch (const std::exception&) {
            throw ValidationError(ValidationError::Kind::parse, path + ": row " + std::to_string(r + 1) + ": bad count", r + 1,
                                  "count");
        }
        if (v < 0.0 || v != std::floor(v))
            throw ValidationError(ValidationError::Kind::negative_value,
                                  path + ": row " + std::to_string(r + 1) + ": count must be a nonnegative integer", r + 1,
                                  "count");
        log.push_back({t.rows[r][cq], t.rows[r][cu], static_cast<std::uint64_t>(v)});
    }
    return log;
}

std::vector<DailyQueryCount> load_daily_counts(const std::string& path) {
    const auto t = csv::read_file(path);
    const auto cd = t.column("date"), cq = t.column("query"), cc = t.column("count");
    for (auto [c, name] : {std::pair{cd, "date"}, std::pair{cq, "query"}, std::pair{cc, "count"}})
        if (c == csv::Table::npos)
            throw ValidationError(ValidationError::Kind::missing_column, path + ": missing column '" + name + "'", 0, name);
    std::vector<DailyQueryCount> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        DailyQueryCount c;
        try {
            c.date = parse_iso_date(t.rows[r][cd]);
        } catch (const std::exception&) {
            throw ValidationError(ValidationError::Kind::parse, path + ": row " + std::to_string(r + 1) + ": bad date", r + 1,
                                  "date");
        }
        try {
            c.count = csv::parse_double(t.rows[r][cc]);
        } catch (const std::exception&) {
            throw ValidationError(ValidationError::Kind::parse, path + ": row " + std::to_string(r + 1) + ": bad count", r + 1,
                                  "count");
        }
        if (c.count < 0.0)
            throw ValidationError(ValidationError::Kind::negative_value,
                                  path + ": row " + std::to_string(r + 1) + ": negative count", r + 1, "count");
        c.query = t.rows[r][cq];
        out.push_back(std::move(c));
    }
    return out;
}

std::string classification_to_csv(const std::vector<QueryClassification>& classes) {
    csv::Table t;
    t.header = {"query", "w_a", "w_b", "w_c", "w_d", "w_total", "w_category", "segment"};
    for (const auto& c : classes)
        t.rows.push_back({c.query, csv::format_double(c.w_a), csv::format_double(c.w_b), csv::format_double(c.w_c),
                          csv::format_double(c.w_d), csv::format_double(c.w_total()), csv::format_double(c.w_category()),
                          to_string(c.segment)});
    return csv::format(t);
}

std::vector<QueryClassification> classification_from_csv(const std::string& text) {
    const auto t = csv::parse(text);
    std::vector<QueryClassification> out;
    const auto col = [&](const char* name) {
        const auto c = t.column(name);
        if (c == csv::Table::npos)
            throw ValidationError(ValidationError::Kind::missing_column, std::string("missing column '") + name + "'", 0, name);
        return c;
    };
    const auto cq = col("query"), ca = col("w_a"), cb = col("w_b"), cc = col("w_c"), cd = col("w_d"), cs = col("segment");
    for (const auto& r : t.rows)
        out.push_back({r[cq], csv::parse_double(r[ca]), csv::parse_double(r[cb]), csv::parse_double(r[cc]),
                       csv::parse_double(r[cd]), segment_from_string(r[cs])});
    return out;
}

std::string volume_panel_to_csv(const VolumePanel& panel) {
    csv::Table t;
    t.header = {"date", "v1", "v2", "v3", "category"};
    const auto cat = panel.category();
    for (std::size_t i = 0; i < panel.dates.size(); ++i)
        t.rows.push_back({format_iso_date(panel.dates[i]), csv::format_double(panel.v1[i]), csv::format_double(panel.v2[i]),
                          csv::format_double(panel.v3[i]), csv::format_double(cat[i])});
    return csv::format(t);
}

std::string scatter_to_csv(const ScatterTable& table) {
    csv::Table t;
    t.header = {"query", "share_advertiser", "share_category", "segment"};
    for (const auto& p : table.points)
        t.rows.push_back({p.query, csv::format_double(p.share_advertiser), csv::format_double(p.share_category),
                          to_string(p.segment)});
    return csv::format(t);
}

}  // namespace sbc
