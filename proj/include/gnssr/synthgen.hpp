#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

#include "gnssr/observations.hpp"
#include "gnssr/raster.hpp"
#include "gnssr/rng.hpp"
#include "gnssr/samples.hpp"
#include "gnssr/timeutil.hpp"
#include "gnssr/warehouse.hpp"

namespace gnssr::synth {

// Nominal LEO ground-track speed; at 2 Hz consecutive specular points are
// ~3.2 km apart.
inline constexpr double kGroundSpeedKmS = 6.4;

struct WorldConfig {
  std::uint64_t seed = 1;

  // Region of interest (no antimeridian crossing).
  double lat_min = 30.0, lat_max = 38.0;
  double lon_min = -100.0, lon_max = -90.0;
  Date first_day{2022, 6, 1};
  int num_days = 10;

  // Soil-moisture field.
  double correlation_km = 150.0;
  double sm_mean = 0.22;
  double sm_sigma = 0.10;
  double seasonal_amplitude = 0.05;
  double events_per_day = 1.0;       // expected wet-up events per day
  double event_radius_km = 120.0;
  double event_amplitude = 0.15;
  double drydown_efolding_days = 5.0;
  // Redraw the spatial pattern every day. Makes soil moisture on a held-out
  // day unpredictable from position alone, so nothing but the DDM carries
  // the signal across days.
  bool volatile_field = false;

  // Tracks.
  int tracks_per_day = 16;
  int samples_per_track = 400;
  int sample_rate_hz = 2;  // 1 or 2

  // DDM synthesis.
  double ddm_noise = 0.05;        // relative per-bin amplitude
  double bad_quality_rate = 0.01; // source quality flag injection
  double rfi_rate = 0.005;        // full-column interference injection

  // Daily reference grid.
  double target_coverage = 0.7;   // fraction of 9 km cells populated per day
  double target_noise = 0.0;      // additive, m3/m3
  double target_bias = 0.0;
  double flag_unsuccessful_rate = 0.02;
  double flag_precipitation_rate = 0.03;
  double flag_not_recommended_rate = 0.05;

  void validate() const;  // throws std::invalid_argument
};

// Unit-variance smooth random field with a squared-exponential covariance of
// the given length scale, built from a fixed bank of random cosine features.
class SmoothField {
 public:
  SmoothField(std::uint64_t key, double length_km, const grid::GeoPoint& origin,
              int features = 192);

  double at(const grid::GeoPoint& p) const { return at(p, 0); }
  // Same spectrum, independently re-phased pattern per variant.
  double at(const grid::GeoPoint& p, std::uint64_t variant) const;

 private:
  const Eigen::VectorXd& variant_offsets(std::uint64_t variant) const;

  double lat0_, lon0_, km_per_deg_lat_, km_per_deg_lon_;
  Eigen::Matrix2Xd w_;     // radians per km
  Eigen::VectorXd phase_;
  std::uint64_t rephase_key_;
  double norm_;
  mutable std::map<std::uint64_t, Eigen::VectorXd> offsets_;
};

struct WetUpEvent {
  double start_day = 0.0;  // days since first_day
  grid::GeoPoint center;
  double radius_km = 0.0;
  double amplitude = 0.0;  // m3/m3 at the center at onset
};

// Ground-truth soil moisture: smooth base pattern + seasonal cycle + wet-up
// events with exponential dry-down, clamped into [0.02, 0.95].
class SmField {
 public:
  SmField(const WorldConfig& cfg);

  // t_days: continuous days since first_day.
  double at(double t_days, const grid::GeoPoint& p) const;
  double at_time(UtcSeconds ts, const grid::GeoPoint& p) const;

  // The raw unit-variance anomaly for day 0 (spatial-statistics tests).
  double base_anomaly(const grid::GeoPoint& p) const;

  const std::vector<WetUpEvent>& events() const { return events_; }

 private:
  WorldConfig cfg_;
  SmoothField base_;
  double season_phase_;
  std::vector<WetUpEvent> events_;
  UtcSeconds epoch_;
};

// Static surface rasters on the 3 km grid, windowed to the configured
// region; layer layout matches what the warehouse ancillary store reads.
struct AncillaryFields {
  io::Raster<double> elevation;  // mean m, std m
  io::Raster<double> slope;      // mean deg, std deg
  io::Raster<double> ndvi;
  io::Raster<double> water;      // open-water fraction
  io::Raster<double> soiltex;    // clay, sand
  io::Raster<double> landcover;  // 17 class-fraction layers

  // vwc at a cell under the given model; 0 where ancillary is missing.
  double vwc_at(const grid::CellIndex& c3,
                const warehouse::VwcModel& model) const;
};

AncillaryFields make_ancillary(const WorldConfig& cfg);
// Writes elevation.grd, slope.grd, ndvi.grd, water.grd, soiltex.grd,
// landcover.grd into dir.
void write_ancillary(const AncillaryFields& f,
                     const std::filesystem::path& dir);

// --------------------------------------------------------------- forward model

// Specular power reflectivity (linear) of the synthetic surface:
//   refl = (0.05 + 0.55 * sm) * exp(-0.35 * vwc)
// Monotone in sm, attenuated by vegetation, and exactly invertible.
double forward_reflectivity(double sm, double vwc_kg_m2);
// Inverse of the above.
double invert_reflectivity(double refl_lin, double vwc_kg_m2);

// Recovers soil moisture from a synthesized DDM: noise floor read off the
// first two delay rows, specular power = peak minus floor, reflectivity via
// the bistatic link budget, vegetation attenuation undone. Exact on
// noiseless DDMs.
double invert_ddm_sm(const io::DdmObservation& obs, double vwc_kg_m2,
                     double eirp_w);

struct DdmContext {
  double vwc_kg_m2 = 0.0;
  double elevation_std_m = 0.0;  // roughness proxy; broadens the return
  double sp_rx_gain_db = 0.0;
  double range_tx_sp_m = 0.0;
  double range_sp_rx_m = 0.0;
  double eirp_w = 500.0;
  double noise_floor_w = 0.0;  // absolute receiver noise level
};

// Specular peak power for the given surface reflectivity under the coherent
// bistatic link budget (the exact quantity the warehouse inverts back to
// reflectivity).
double link_budget_peak_w(double refl_lin, const DdmContext& ctx);

// Fills obs.ddm (and ddm_snr_db) for the given true soil moisture. noise is
// the relative per-bin amplitude; 0 gives the exact closed form. The first
// two delay rows carry only the noise floor.
void synthesize_ddm(double sm_true, const DdmContext& ctx, double noise,
                    Rng& rng, io::DdmObservation& obs);

// ------------------------------------------------------------------- tracks

// All observation of one day: great-circle-like tracks with constant ground
// speed, randomized geometry, DDMs synthesized from the truth field and the
// ancillary rasters. Deterministic per (cfg.seed, day).
std::vector<io::DdmObservation> simulate_day(const WorldConfig& cfg,
                                             const SmField& field,
                                             const AncillaryFields& anc,
                                             const Date& day);

// Writes one track file per (spacecraft, track) under
// {root}/tracks/YYYY-MM-DD/.
void write_day_tracks(const WorldConfig& cfg, const SmField& field,
                      const AncillaryFields& anc, const Date& day,
                      const std::filesystem::path& root);

// ------------------------------------------------------------------- target

// Daily 9 km reference grid: swath-like coverage at the configured fraction,
// cell values averaged over the nested 3 km cell centers, independently
// injected quality flags. Layer 0 soil moisture (sentinel where
// unsuccessful), layer 1 flag bits (sentinel where not covered).
io::Raster<double> make_target_day(const WorldConfig& cfg,
                                   const SmField& field, const Date& day);

// ------------------------------------------------------------------- world

// Generates the full tree:
//   {root}/ancillary/*.grd
//   {root}/targets/target_YYYYMMDD.grd
//   {root}/tracks/YYYY-MM-DD/*.trk
void generate_world(const WorldConfig& cfg, const std::filesystem::path& root);

}  // namespace gnssr::synth
