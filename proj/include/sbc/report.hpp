#pragma once

#include <string>
#include <vector>

namespace sbc::report {

/// Fixed-point formatting; NaN prints as "NA", infinities as "Inf"/"-Inf".
std::string fixed(double value, int digits = 3);

/// "estimate (se)", or just the estimate when se is NaN.
std::string estimate_cell(double estimate, double se, int digits = 3);

/// Left-aligned first column, right-aligned others, two spaces between columns.
std::string format_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows);

}  // namespace sbc::report
