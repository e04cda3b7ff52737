#pragma once

#include <cstdint>
#include <string>

namespace gnssr {

// Seconds since the Unix epoch, UTC. All timestamps in the system use this
// scale; no leap-second handling (source data is already on a uniform scale).
using UtcSeconds = double;

struct Date {
  int year = 1970;
  int month = 1;  // 1..12
  int day = 1;    // 1..31

  auto operator<=>(const Date&) const = default;
};

bool valid_date(const Date& d);

// Days since 1970-01-01 (negative before).
std::int64_t days_from_epoch(const Date& d);
Date date_from_epoch_days(std::int64_t days);

UtcSeconds day_start(const Date& d);
UtcSeconds hour_start(const Date& d, int hour);
Date date_of(UtcSeconds t);
int hour_of(UtcSeconds t);

Date add_days(const Date& d, int n);
// b - a in whole days.
std::int64_t days_between(const Date& a, const Date& b);

// "YYYY-MM-DD"
Date parse_date(const std::string& s);
std::string format_date(const Date& d);
// "YYYYMMDD"
std::string format_date_compact(const Date& d);
// "YYYYMMDDTHH"
std::string format_date_hour_compact(const Date& d, int hour);
// "YYYY-MM-DDTHH:MM:SSZ" from a timestamp (seconds truncated toward zero).
std::string format_utc(UtcSeconds t);
// Inverse of format_utc; also accepts a bare "YYYY-MM-DD" as midnight.
UtcSeconds parse_utc(const std::string& s);

}  // namespace gnssr
