#pragma once

#include <Eigen/Core>
#include <cstdint>

#include "gnssr/geogrid.hpp"
#include "gnssr/observations.hpp"

namespace gnssr {

// Missing-data sentinel used in all stored records and products. Never NaN
// on disk.
inline constexpr double kMissing = -9999.0;
inline bool is_missing(double v) { return v == kMissing; }

inline constexpr int kLandcoverClasses = 17;  // IGBP classes 1..17
using LandcoverVec = Eigen::Matrix<double, kLandcoverClasses, 1>;

// Static surface description at the observation's 3 km cell. Missing fields
// hold kMissing.
struct AncillaryRecord {
  double elevation_m = kMissing;
  double elevation_std_m = kMissing;
  double slope_deg = kMissing;
  double slope_std_deg = kMissing;
  double ndvi = kMissing;
  double vwc_kg_m2 = kMissing;
  double water_fraction = kMissing;
  double clay_fraction = kMissing;
  double sand_fraction = kMissing;
  LandcoverVec landcover = LandcoverVec::Constant(kMissing);

  bool complete() const {
    return !is_missing(elevation_m) && !is_missing(elevation_std_m) &&
           !is_missing(slope_deg) && !is_missing(slope_std_deg) &&
           !is_missing(ndvi) && !is_missing(vwc_kg_m2) &&
           !is_missing(water_fraction) && !is_missing(clay_fraction) &&
           !is_missing(sand_fraction) && !is_missing(landcover(0));
  }
};

// Quantities derived from the DDM itself.
struct DdmMetrics {
  double peak_power_w = 0.0;
  double noise_floor_w = 0.0;
  double reflectivity_db = kMissing;
  bool rfi_detected = false;
};

// Reference soil-moisture flag bits.
inline constexpr std::uint32_t kTargetUnsuccessful = 1u << 0;
inline constexpr std::uint32_t kTargetPrecipitation = 1u << 1;
inline constexpr std::uint32_t kTargetNotRecommended = 1u << 2;

struct TargetValue {
  double soil_moisture = kMissing;  // cm^3/cm^3
  std::uint32_t flags = 0;
};

// One matched-up warehouse sample: observation plus everything needed for
// filtering, feature assembly and training.
struct Sample {
  io::DdmObservation obs;
  AncillaryRecord anc;
  DdmMetrics metrics;
  grid::CellIndex cell3, cell9, cell36;
  bool has_target = false;
  TargetValue target;
};

}  // namespace gnssr
