#pragma once

#include <iosfwd>
#include <string>

#include "threshcox/melib.hpp"
#include "threshcox/survcore.hpp"

namespace threshcox {

/// Cohort CSV: header-driven, RFC-4180 style. Recognized columns:
/// entry_time (optional, default 0), time (required), event (required, 0/1),
/// w (required), z1..zp (optional), stratum (optional, default one stratum).
Cohort read_cohort_csv(std::istream& in);
Cohort read_cohort_csv_file(const std::string& path);

/// Reliability CSV: columns id, w (one row per replicate measurement),
/// optional z1..zp (constant within id).
ReliabilityStudy read_reliability_csv(std::istream& in);
ReliabilityStudy read_reliability_csv_file(const std::string& path);

}  // namespace threshcox
