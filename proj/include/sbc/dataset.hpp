#pragma once

#include <Eigen/Dense>

#include <chrono>
#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace sbc {

using Date = std::chrono::sys_days;

/// Parses YYYY-MM-DD; throws std::invalid_argument on malformed or impossible dates.
Date parse_iso_date(const std::string& text);
std::string format_iso_date(Date d);

/// Date-indexed media-mix observations at national level.
///
/// All series share one length, dates increase with a constant step, and
/// values are finite and nonnegative. `validate()` enforces these and is run
/// by every loader.
struct MmmPanel {
    std::vector<Date> dates;
    std::vector<double> y;   ///< sales / KPI
    std::vector<double> x1;  ///< search ad spend
    std::map<std::string, std::vector<double>> x2;  ///< non-search channels by name
    std::vector<double> v1;  ///< target-favoring query volume
    std::vector<double> v2;  ///< competitor-favoring query volume
    std::vector<double> v3;  ///< general-interest query volume

    static constexpr std::size_t min_length = 10;

    std::size_t size() const noexcept { return dates.size(); }
    /// Category search volume v1 + v2 + v3.
    std::vector<double> category_volume() const;
    /// Spacing between consecutive dates in days.
    int step_days() const;
    void validate() const;

    /// Rows [begin, end).
    MmmPanel slice(std::size_t begin, std::size_t end) const;
};

/// Column names used to read and write panels.
struct PanelSchema {
    std::string date = "date";
    std::string y = "sales";
    std::string x1 = "spend";
    std::string v1 = "v1";
    std::string v2 = "v2";
    std::string v3 = "v3";
    std::vector<std::string> x2;  ///< non-search spend columns, kept under the same names

    /// Reads {"date": ..., "y": ..., "x1": ..., "v1": ..., "x2": [...]}; absent keys keep defaults.
    static PanelSchema from_json(const std::string& text);
};

/// `base` with every header column it does not map taken as a non-search channel.
/// Leaves an explicit x2 list alone.
PanelSchema infer_schema(const std::string& csv_text, PanelSchema base = {});

MmmPanel parse_panel(const std::string& csv_text, const PanelSchema& schema = {});
MmmPanel load_panel(const std::string& path, const PanelSchema& schema = {});
std::string panel_to_csv(const MmmPanel& panel, const PanelSchema& schema = {});
void save_panel(const MmmPanel& panel, const std::string& path, const PanelSchema& schema = {});
std::string panel_to_json(const MmmPanel& panel);

/// Sums a daily panel within ISO weeks (Monday to Sunday). Incomplete first
/// and last weeks are dropped; each output row is dated by its Monday.
MmmPanel aggregate_weekly(const MmmPanel& panel);

/// Consecutive sub-panels, one per calendar year, in date order.
std::vector<std::pair<int, MmmPanel>> split_by_year(const MmmPanel& panel);

struct PanelSummary {
    std::vector<std::string> names;  ///< y, x1, v1, v2, v3, then x2 channels
    std::vector<double> median;
    std::vector<double> mean;
    std::vector<double> sd;
    Eigen::MatrixXd correlation;  ///< NaN where undefined
    std::vector<std::pair<std::string, std::string>> undefined_pairs;  ///< zero-variance pairs
    std::map<std::string, std::vector<double>> median_rescaled;       ///< series / median (for plotting)
};

PanelSummary summarize(const MmmPanel& panel);
/// Product-moment correlation; NaN when either series has zero variance.
double pearson(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace sbc
