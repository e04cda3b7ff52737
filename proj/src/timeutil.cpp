#include "gnssr/timeutil.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace gnssr {

namespace {
namespace chr = std::chrono;

chr::year_month_day to_ymd(const Date& d) {
  return chr::year_month_day{chr::year{d.year}, chr::month{unsigned(d.month)},
                             chr::day{unsigned(d.day)}};
}

Date from_ymd(const chr::year_month_day& ymd) {
  return Date{int(ymd.year()), int(unsigned(ymd.month())),
              int(unsigned(ymd.day()))};
}
}  // namespace

bool valid_date(const Date& d) { return to_ymd(d).ok(); }

std::int64_t days_from_epoch(const Date& d) {
  if (!valid_date(d)) {
    throw std::invalid_argument("invalid calendar date " + format_date(d));
  }
  return chr::sys_days{to_ymd(d)}.time_since_epoch().count();
}

Date date_from_epoch_days(std::int64_t days) {
  return from_ymd(chr::year_month_day{chr::sys_days{chr::days{days}}});
}

UtcSeconds day_start(const Date& d) {
  return 86400.0 * static_cast<double>(days_from_epoch(d));
}

UtcSeconds hour_start(const Date& d, int hour) {
  if (hour < 0 || hour > 23) {
    throw std::invalid_argument("hour out of range: " + std::to_string(hour));
  }
  return day_start(d) + 3600.0 * hour;
}

Date date_of(UtcSeconds t) {
  return date_from_epoch_days(
      static_cast<std::int64_t>(std::floor(t / 86400.0)));
}

int hour_of(UtcSeconds t) {
  const double day = std::floor(t / 86400.0);
  int h = static_cast<int>(std::floor((t - day * 86400.0) / 3600.0));
  if (h < 0) h = 0;
  if (h > 23) h = 23;
  return h;
}

Date add_days(const Date& d, int n) {
  return date_from_epoch_days(days_from_epoch(d) + n);
}

std::int64_t days_between(const Date& a, const Date& b) {
  return days_from_epoch(b) - days_from_epoch(a);
}

Date parse_date(const std::string& s) {
  int y = 0, m = 0, d = 0;
  char trail = 0;
  if (std::sscanf(s.c_str(), "%d-%d-%d%c", &y, &m, &d, &trail) != 3) {
    throw std::invalid_argument("expected YYYY-MM-DD, got '" + s + "'");
  }
  Date out{y, m, d};
  if (!valid_date(out)) {
    throw std::invalid_argument("invalid calendar date '" + s + "'");
  }
  return out;
}

std::string format_date(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", d.year, d.month, d.day);
  return buf;
}

std::string format_date_compact(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d%02d%02d", d.year, d.month, d.day);
  return buf;
}

std::string format_date_hour_compact(const Date& d, int hour) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%04d%02d%02dT%02d", d.year, d.month, d.day,
                hour);
  return buf;
}

std::string format_utc(UtcSeconds t) {
  const std::int64_t whole = static_cast<std::int64_t>(std::floor(t));
  const std::int64_t days =
      (whole >= 0 ? whole / 86400 : (whole - 86399) / 86400);
  const std::int64_t sod = whole - days * 86400;
  const Date d = date_from_epoch_days(days);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02lld:%02lld:%02lldZ",
                d.year, d.month, d.day,
                static_cast<long long>(sod / 3600),
                static_cast<long long>((sod / 60) % 60),
                static_cast<long long>(sod % 60));
  return buf;
}

UtcSeconds parse_utc(const std::string& s) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  char trail = 0;
  const int n = std::sscanf(s.c_str(), "%d-%d-%dT%d:%d:%d%c", &y, &mo, &d, &h,
                            &mi, &sec, &trail);
  if (n == 3) return day_start(parse_date(s));
  if (n != 7 || trail != 'Z' || h < 0 || h > 23 || mi < 0 || mi > 59 ||
      sec < 0 || sec > 59) {
    throw std::invalid_argument("expected YYYY-MM-DDTHH:MM:SSZ, got '" + s +
                                "'");
  }
  const Date date{y, mo, d};
  if (!valid_date(date)) {
    throw std::invalid_argument("invalid calendar date in '" + s + "'");
  }
  return day_start(date) + 3600.0 * h + 60.0 * mi + sec;
}

}  // namespace gnssr
