#pragma once

#include <cstdint>
#include <string>

namespace onionlink {

// Unix seconds -> "YYYY-MM-DDTHH:MM:SSZ" (UTC, zero-padded).
std::string format_iso8601(int64_t unix_seconds);

// UTC calendar year containing the given instant.
int utc_year(int64_t unix_seconds);

// Whole elapsed days between two instants: floor((last - first) / 86400).
int64_t lifetime_days(int64_t first, int64_t last);

} // namespace onionlink
