#pragma once

#include "sbc/dataset.hpp"

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace sbc {

/// One (query, destination URL, impression count) observation from a search log.
struct QueryLogRecord {
    std::string query;
    std::string url;
    std::uint64_t count = 0;
};

enum class UrlGroup { advertiser, competitor, category, other };
enum class Segment { target, competitor, general, irrelevant };

std::string to_string(Segment s);
Segment segment_from_string(const std::string& s);

/// Domain sets for URL groups a (advertiser), b (competitors) and c (the
/// wider business category). Anything unmatched is group d.
struct UrlTaxonomy {
    enum class Match { domain_suffix, url_prefix };

    std::set<std::string> advertiser_domains;
    std::set<std::string> competitor_domains;
    std::set<std::string> category_domains;
    Match match = Match::domain_suffix;

    /// Throws ConfigError when the three sets overlap.
    void validate() const;
    UrlGroup classify(const std::string& url) const;

    /// {"advertiser": [...], "competitors": [...], "category": [...], "match": "domain"|"prefix"}
    static UrlTaxonomy from_json(const std::string& text);
    static UrlTaxonomy load(const std::string& path);
};

/// Lower-cased host of a URL with scheme, credentials, port and a leading "www." removed.
std::string url_host(const std::string& url);

struct Thresholds {
    double category_min = 0.5;
    double target_min = 0.5;
    double competitor_min = 0.5;
};

struct QueryClassification {
    std::string query;
    double w_a = 0.0;
    double w_b = 0.0;
    double w_c = 0.0;
    double w_d = 0.0;
    Segment segment = Segment::irrelevant;

    double w_total() const { return w_a + w_b + w_c + w_d; }
    double w_category() const { return w_a + w_b + w_c; }
};

struct ClassificationResult {
    std::vector<QueryClassification> queries;  ///< sorted by query string
    std::vector<std::string> warnings;
};

/// Aggregates duplicate (query, url) records by summing their counts.
std::vector<QueryLogRecord> aggregate_log(const std::vector<QueryLogRecord>& log);

/// Assigns each query in the log to a segment by the mix of URL groups in
/// its organic results. Queries without an advertiser URL are irrelevant.
/// Ratio comparisons against target_min and competitor_min are strict.
ClassificationResult classify_queries(const std::vector<QueryLogRecord>& log, const UrlTaxonomy& taxonomy,
                                      const Thresholds& thresholds = {});

/// Segment rule alone, given per-group impression sums.
Segment assign_segment(double w_a, double w_b, double w_c, double w_d, const Thresholds& thresholds = {});

struct DailyQueryCount {
    Date date;
    std::string query;
    double count = 0.0;
};

struct VolumePanel {
    std::vector<Date> dates;
    std::vector<double> v1, v2, v3;
    std::vector<std::string> warnings;

    std::vector<double> category() const;
};

/// Per-date search totals for target, competitor and general-interest queries.
/// Unclassified queries count as irrelevant. Dates must form a gap-free grid.
VolumePanel build_volume_panel(const std::vector<DailyQueryCount>& counts,
                               const std::vector<QueryClassification>& classes);

struct ScatterPoint {
    std::string query;
    double share_advertiser;  ///< w_a / w_category
    double share_category;    ///< w_category / w_total
    Segment segment;
};

struct ScatterTable {
    std::vector<ScatterPoint> points;
    std::size_t omitted = 0;  ///< queries with w_category == 0
};

ScatterTable emit_classification_scatter(const std::vector<QueryClassification>& classes);

// CSV adapters.
std::vector<QueryLogRecord> load_query_log(const std::string& path);
std::vector<DailyQueryCount> load_daily_counts(const std::string& path);
std::string classification_to_csv(const std::vector<QueryClassification>& classes);
std::vector<QueryClassification> classification_from_csv(const std::string& text);
std::string volume_panel_to_csv(const VolumePanel& panel);
std::string scatter_to_csv(const ScatterTable& table);

}  // namespace sbc
