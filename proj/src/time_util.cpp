#include "onionlink/time_util.hpp"

#include "onionlink/errors.hpp"

#include <chrono>
#include <cstdio>

namespace onionlink {

namespace {

using days_t = std::chrono::duration<int64_t, std::ratio<86400>>;

std::chrono::year_month_day civil_date(int64_t unix_seconds) {
    std::chrono::sys_seconds tp{std::chrono::seconds{unix_seconds}};
    auto day_point = std::chrono::floor<days_t>(tp);
    return std::chrono::year_month_day{
        std::chrono::sys_days{std::chrono::floor<std::chrono::days>(day_point)}};
}

} // namespace

std::string format_iso8601(int64_t unix_seconds) {
    auto ymd = civil_date(unix_seconds);
    // seconds within the UTC day; the floor handles pre-epoch instants too
    int64_t day_start =
        std::chrono::floor<days_t>(std::chrono::seconds{unix_seconds}).count() * 86400;
    int64_t rem = unix_seconds - day_start;
    int hh = static_cast<int>(rem / 3600);
    int mm = static_cast<int>((rem % 3600) / 60);
    int ss = static_cast<int>(rem % 60);

    char buf[40];
    int n = std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%02dZ",
                          static_cast<int>(ymd.year()),
                          static_cast<unsigned>(ymd.month()),
                          static_cast<unsigned>(ymd.day()), hh, mm, ss);
    if (n <= 0) throw InternalError("timestamp formatting failed");
    return std::string(buf, static_cast<size_t>(n));
}

int utc_year(int64_t unix_seconds) {
    return static_cast<int>(civil_date(unix_seconds).year());
}

int64_t lifetime_days(int64_t first, int64_t last) {
    if (last < first) throw InternalError("lifetime_days: last < first");
    return (last - first) / 86400;
}

} // namespace onionlink
