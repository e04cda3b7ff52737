#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gnssr/geogrid.hpp"
#include "gnssr/products.hpp"
#include "gnssr/timeutil.hpp"

namespace gnssr::validation {

// ------------------------------------------------------------- pair metrics
//
// The standard soil-moisture cal/val statistics. All take equal-length
// vectors of at least two pairs; pearson additionally needs both sides to
// vary. ubrmse uses the centered-anomaly definition, so
// rmse^2 == ubrmse^2 + bias^2 up to rounding.

double pearson(std::span<const double> x, std::span<const double> y);
double bias(std::span<const double> x, std::span<const double> y);  // mean(x-y)
double rmse(std::span<const double> x, std::span<const double> y);
double ubrmse(std::span<const double> x, std::span<const double> y);

struct PairStats {
  double r = kMissing;
  double bias = kMissing;
  double rmse = kMissing;
  double ubrmse = kMissing;
  std::size_t n = 0;
};

// All four at once. Throws like the individual functions.
PairStats pair_stats(std::span<const double> x, std::span<const double> y);

// ---------------------------------------------------------- in-situ probes

struct InSituReading {
  UtcSeconds timestamp = 0.0;
  double sm = 0.0;  // m3/m3
};

struct InSituSite {
  std::string id;
  grid::GeoPoint location;
  std::string network;
  double depth_cm = 5.0;
  int landcover_class = 0;  // IGBP 1..17
  std::vector<InSituReading> series;

  // Strictly increasing timestamps, sm in [0, 1], class in range.
  void validate() const;

  // Mean of all readings on the given UTC calendar day, if any.
  std::optional<double> daily_mean(const Date& day) const;

  // Number of distinct UTC days with at least one reading in [start, end).
  std::size_t days_with_data(const products::TimeWindow& w) const;
};

// Probe-network eligibility: 5 cm depth, within +/-40 degrees latitude, and
// at least 30 days of data inside the window.
std::vector<InSituSite> eligible_sites(const std::vector<InSituSite>& sites,
                                       const products::TimeWindow& window);

// ------------------------------------------------------------- site files
//
// Whitespace-delimited text, one network file holding many sites:
//   # comment
//   site <id> <lat> <lon> <igbp_class> [depth_cm [network]]
//   <YYYY-MM-DDTHH:MM:SSZ> <sm>
// Reading lines attach to the most recent site line.

std::vector<InSituSite> load_sites(const std::filesystem::path& path);
void write_sites(const std::vector<InSituSite>& sites,
                 const std::filesystem::path& path);

// --------------------------------------------------------------- upscaling

// Daily mean of every retrieval on `day` within the footprint (closed
// boundary: a retrieval exactly at diameter/2 counts). Withheld retrievals
// are skipped. The mean is accumulated in a sorted order, so the result does
// not depend on record order. Absent when no retrieval qualifies.
std::optional<double> upscale_daily(
    const std::vector<products::L2Record>& records,
    const grid::GeoPoint& site, const Date& day, double diameter_km = 36.0);

// ---------------------------------------------------------------- matchups

struct Matchup {
  Date day;
  double in_situ = 0.0;   // site daily mean
  double product = 0.0;   // upscaled product daily mean
  std::size_t count = 0;  // retrievals inside the footprint that day
};

struct MatchupTable {
  std::string site_id;
  int landcover_class = 0;
  std::vector<Matchup> rows;  // only days where both sides exist
};

MatchupTable build_matchups(const InSituSite& site,
                            const std::vector<products::L2Record>& records,
                            const products::TimeWindow& window,
                            double diameter_km = 36.0);

struct SiteStats {
  std::string site_id;
  int landcover_class = 0;
  double r = kMissing;
  double ubrmse = kMissing;
  double bias = kMissing;  // product minus in situ
  std::size_t n = 0;
};

// Statistics over a site's matchup rows. Throws when fewer than two rows or
// when either side is constant.
SiteStats site_stats(const MatchupTable& table);

// --------------------------------------------------------- rolling compare

struct DatedValue {
  Date day;
  double value = 0.0;
};

struct RollingPoint {
  Date window_start;  // window covers [window_start, window_end)
  Date window_end;
  double mean_a = kMissing;
  double mean_b = kMissing;
  double diff = kMissing;  // mean_a - mean_b
  double r = kMissing;
  double rmse = kMissing;
  std::size_t n = 0;  // paired days inside the window
};

// Rolling comparison of two daily series over their shared days. Windows
// start at the first shared day and advance by step_days while the start
// stays at or before the last shared day; trailing windows may be partial.
// Windows with fewer than two pairs (or a constant side, for r) carry
// sentinel statistics.
std::vector<RollingPoint> rolling_compare(const std::vector<DatedValue>& a,
                                          const std::vector<DatedValue>& b,
                                          int window_days = 30,
                                          int step_days = 10);

// ------------------------------------------------------ landcover grouping

struct LandcoverBreakdown {
  // Classes with at least two sites; single-site classes are dropped here
  // but still contribute to the aggregate list.
  std::map<int, std::vector<SiteStats>> by_class;
  std::vector<SiteStats> aggregate;
};

LandcoverBreakdown stats_by_landcover(const std::vector<SiteStats>& per_site);

}  // namespace gnssr::validation
