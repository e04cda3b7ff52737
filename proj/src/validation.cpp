#include "gnssr/validation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace gnssr::validation {

namespace {

void check_pairs(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("paired vectors differ in length");
  }
  if (x.size() < 2) {
    throw std::invalid_argument("need at least 2 pairs");
  }
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double a : v) s += a;
  return s / static_cast<double>(v.size());
}

}  // namespace

double pearson(std::span<const double> x, std::span<const double> y) {
  check_pairs(x, y);
  const double mx = mean_of(x), my = mean_of(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0, msx = 0.0, msy = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
    msx += x[i] * x[i] / n;
    msy += y[i] * y[i] / n;
  }
  // A constant vector leaves only rounding noise in the centered sum; judge
  // "zero variance" relative to the data's own scale.
  const double eps2 = 64.0 * 1e-32;  // (8 * double epsilon)^2 scale
  if (sxx <= eps2 * n * msx || syy <= eps2 * n * msy) {
    throw std::invalid_argument("pearson undefined: zero variance");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double bias(std::span<const double> x, std::span<const double> y) {
  check_pairs(x, y);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] - y[i];
  return s / static_cast<double>(x.size());
}

double rmse(std::span<const double> x, std::span<const double> y) {
  check_pairs(x, y);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(x.size()));
}

double ubrmse(std::span<const double> x, std::span<const double> y) {
  check_pairs(x, y);
  const double mx = mean_of(x), my = mean_of(y);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = (x[i] - mx) - (y[i] - my);
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(x.size()));
}

PairStats pair_stats(std::span<const double> x, std::span<const double> y) {
  PairStats out;
  out.r = pearson(x, y);
  out.bias = bias(x, y);
  out.rmse = rmse(x, y);
  out.ubrmse = ubrmse(x, y);
  out.n = x.size();
  return out;
}

// ---------------------------------------------------------- in-situ probes

void InSituSite::validate() const {
  if (id.empty()) throw std::invalid_argument("site id empty");
  if (landcover_class < 1 || landcover_class > 17) {
    throw std::invalid_argument("site '" + id + "': landcover class " +
                                std::to_string(landcover_class) +
                                " outside 1..17");
  }
  if (!(depth_cm > 0.0)) {
    throw std::invalid_argument("site '" + id + "': depth must be positive");
  }
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (!(series[i].sm >= 0.0 && series[i].sm <= 1.0)) {
      throw std::invalid_argument("site '" + id +
                                  "': soil moisture outside [0, 1]");
    }
    if (i > 0 && !(series[i - 1].timestamp < series[i].timestamp)) {
      throw std::invalid_argument("site '" + id +
                                  "': timestamps not strictly increasing");
    }
  }
}

std::optional<double> InSituSite::daily_mean(const Date& day) const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const InSituReading& r : series) {
    if (date_of(r.timestamp) == day) {
      sum += r.sm;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

std::size_t InSituSite::days_with_data(const products::TimeWindow& w) const {
  std::set<std::int64_t> days;
  for (const InSituReading& r : series) {
    if (r.timestamp >= w.start && r.timestamp < w.end) {
      days.insert(days_from_epoch(date_of(r.timestamp)));
    }
  }
  return days.size();
}

std::vector<InSituSite> eligible_sites(const std::vector<InSituSite>& sites,
                                       const products::TimeWindow& window) {
  if (!(window.start < window.end)) {
    throw std::invalid_argument("empty validation window");
  }
  std::vector<InSituSite> out;
  for (const InSituSite& s : sites) {
    if (s.depth_cm != 5.0) continue;
    if (std::abs(s.location.lat) > 40.0) continue;
    if (s.days_with_data(window) < 30) continue;
    out.push_back(s);
  }
  return out;
}

// ------------------------------------------------------------- site files

std::vector<InSituSite> load_sites(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open site file " + path.string());
  }
  std::vector<InSituSite> out;
  std::string line;
  std::size_t lineno = 0;
  const auto fail = [&](const std::string& why) {
    throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                             ": " + why);
  };
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::string first;
    if (!(ss >> first) || first[0] == '#') continue;
    if (first == "site") {
      InSituSite s;
      double lat = 0.0, lon = 0.0;
      if (!(ss >> s.id >> lat >> lon >> s.landcover_class)) {
        fail("expected: site <id> <lat> <lon> <class> [depth [network]]");
      }
      s.location = {lat, lon};
      if (!(ss >> s.depth_cm)) s.depth_cm = 5.0;
      ss.clear();
      ss >> s.network;
      out.push_back(std::move(s));
    } else {
      if (out.empty()) fail("reading before any 'site' line");
      InSituReading r;
      try {
        r.timestamp = parse_utc(first);
      } catch (const std::invalid_argument& e) {
        fail(e.what());
      }
      if (!(ss >> r.sm)) fail("missing soil-moisture value");
      out.back().series.push_back(r);
    }
  }
  for (const InSituSite& s : out) {
    try {
      s.validate();
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(path.string() + ": " + e.what());
    }
  }
  return out;
}

void write_sites(const std::vector<InSituSite>& sites,
                 const std::filesystem::path& path) {
  for (const InSituSite& s : sites) s.validate();
  std::ofstream outf(path);
  if (!outf) {
    throw std::runtime_error("cannot write site file " + path.string());
  }
  outf << "# in-situ soil moisture network\n";
  outf.precision(17);
  for (const InSituSite& s : sites) {
    outf << "site " << s.id << ' ' << s.location.lat << ' ' << s.location.lon
         << ' ' << s.landcover_class << ' ' << s.depth_cm;
    if (!s.network.empty()) outf << ' ' << s.network;
    outf << '\n';
    for (const InSituReading& r : s.series) {
      outf << format_utc(r.timestamp) << ' ' << r.sm << '\n';
    }
  }
  if (!outf.flush()) {
    throw std::runtime_error("write failed for " + path.string());
  }
}

// --------------------------------------------------------------- upscaling

std::optional<double> upscale_daily(
    const std::vector<products::L2Record>& records,
    const grid::GeoPoint& site, const Date& day, double diameter_km) {
  if (!(diameter_km > 0.0)) {
    throw std::invalid_argument("footprint diameter must be positive");
  }
  const double radius = diameter_km / 2.0;
  std::vector<double> vals;
  for (const products::L2Record& r : records) {
    if (is_missing(r.sm)) continue;
    if (date_of(r.timestamp) != day) continue;
    if (grid::great_circle_km(site, {r.lat, r.lon}) <= radius) {
      vals.push_back(r.sm);
    }
  }
  if (vals.empty()) return std::nullopt;
  std::sort(vals.begin(), vals.end());
  double sum = 0.0;
  for (double v : vals) sum += v;
  return sum / static_cast<double>(vals.size());
}

// ---------------------------------------------------------------- matchups

MatchupTable build_matchups(const InSituSite& site,
                            const std::vector<products::L2Record>& records,
                            const products::TimeWindow& window,
                            double diameter_km) {
  site.validate();
  if (!(window.start < window.end)) {
    throw std::invalid_argument("empty matchup window");
  }
  MatchupTable table;
  table.site_id = site.id;
  table.landcover_class = site.landcover_class;

  const double radius = diameter_km / 2.0;
  for (Date day = date_of(window.start); day_start(day) < window.end;
       day = add_days(day, 1)) {
    const auto in_situ = site.daily_mean(day);
    if (!in_situ) continue;
    const auto product = upscale_daily(records, site.location, day,
                                       diameter_km);
    if (!product) continue;
    std::size_t count = 0;
    for (const products::L2Record& r : records) {
      if (!is_missing(r.sm) && date_of(r.timestamp) == day &&
          grid::great_circle_km(site.location, {r.lat, r.lon}) <= radius) {
        ++count;
      }
    }
    table.rows.push_back({day, *in_situ, *product, count});
  }
  return table;
}

SiteStats site_stats(const MatchupTable& table) {
  std::vector<double> prod, situ;
  prod.reserve(table.rows.size());
  situ.reserve(table.rows.size());
  for (const Matchup& m : table.rows) {
    prod.push_back(m.product);
    situ.push_back(m.in_situ);
  }
  const PairStats p = pair_stats(prod, situ);
  SiteStats out;
  out.site_id = table.site_id;
  out.landcover_class = table.landcover_class;
  out.r = p.r;
  out.ubrmse = p.ubrmse;
  out.bias = p.bias;
  out.n = p.n;
  return out;
}

// --------------------------------------------------------- rolling compare

std::vector<RollingPoint> rolling_compare(const std::vector<DatedValue>& a,
                                          const std::vector<DatedValue>& b,
                                          int window_days, int step_days) {
  if (window_days < 1 || step_days < 1) {
    throw std::invalid_argument("window and step must be at least one day");
  }
  std::map<Date, std::pair<double, double>> paired;
  {
    std::map<Date, double> bv;
    for (const DatedValue& v : b) bv[v.day] = v.value;
    for (const DatedValue& v : a) {
      const auto it = bv.find(v.day);
      if (it != bv.end()) paired[v.day] = {v.value, it->second};
    }
  }
  std::vector<RollingPoint> out;
  if (paired.empty()) return out;
  const Date first = paired.begin()->first;
  const Date last = paired.rbegin()->first;

  for (Date start = first; start <= last; start = add_days(start, step_days)) {
    RollingPoint pt;
    pt.window_start = start;
    pt.window_end = add_days(start, window_days);
    std::vector<double> xa, xb;
    for (auto it = paired.lower_bound(start);
         it != paired.end() && it->first < pt.window_end; ++it) {
      xa.push_back(it->second.first);
      xb.push_back(it->second.second);
    }
    pt.n = xa.size();
    if (pt.n >= 2) {
      pt.mean_a = mean_of(xa);
      pt.mean_b = mean_of(xb);
      pt.diff = pt.mean_a - pt.mean_b;
      pt.rmse = rmse(xa, xb);
      try {
        pt.r = pearson(xa, xb);
      } catch (const std::invalid_argument&) {
        pt.r = kMissing;  // constant window
      }
    }
    out.push_back(pt);
  }
  return out;
}

// ------------------------------------------------------ landcover grouping

LandcoverBreakdown stats_by_landcover(const std::vector<SiteStats>& per_site) {
  LandcoverBreakdown out;
  out.aggregate = per_site;
  std::map<int, std::vector<SiteStats>> groups;
  for (const SiteStats& s : per_site) groups[s.landcover_class].push_back(s);
  for (auto& [cls, members] : groups) {
    if (members.size() >= 2) out.by_class.emplace(cls, std::move(members));
  }
  return out;
}

}  // namespace gnssr::validation
