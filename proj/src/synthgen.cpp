#include "gnssr/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "gnssr/hashing.hpp"

namespace gnssr::synth {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTau = 2.0 * kPi;

double km_per_deg() { return kPi * grid::authalic_radius_km() / 180.0; }

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

int poisson_draw(Rng& rng, double lambda) {
  const double limit = std::exp(-lambda);
  int k = 0;
  double p = 1.0;
  do {
    ++k;
    p *= rng.uniform();
  } while (p > limit);
  return k - 1;
}

grid::GeoPoint box_center(const WorldConfig& cfg) {
  return {0.5 * (cfg.lat_min + cfg.lat_max),
          0.5 * (cfg.lon_min + cfg.lon_max)};
}

struct Window {
  long row0, col0, nrows, ncols;
};

Window window_for(const WorldConfig& cfg, const grid::GridSpec& spec,
                  long margin) {
  const long r_top = grid::cell_of({cfg.lat_max, cfg.lon_min}, spec).row;
  const long r_bot = grid::cell_of({cfg.lat_min, cfg.lon_min}, spec).row;
  const long c_left = grid::cell_of({cfg.lat_min, cfg.lon_min}, spec).col;
  const long c_right = grid::cell_of({cfg.lat_min, cfg.lon_max}, spec).col;
  Window w;
  w.row0 = std::max(0L, r_top - margin);
  w.col0 = std::max(0L, c_left - margin);
  w.nrows = std::min(spec.rows, r_bot + margin + 1) - w.row0;
  w.ncols = std::min(spec.cols, c_right + margin + 1) - w.col0;
  return w;
}

}  // namespace

void WorldConfig::validate() const {
  if (!(lat_min < lat_max) || !(lon_min < lon_max)) {
    throw std::invalid_argument("world extent is empty");
  }
  if (lat_min < -40.0 || lat_max > 40.0) {
    throw std::invalid_argument("world extent must stay within +/-40 degrees"
                                " latitude");
  }
  if (lon_min < -180.0 || lon_max > 180.0) {
    throw std::invalid_argument("world longitudes out of range");
  }
  if (num_days < 1) throw std::invalid_argument("need at least one day");
  if (!(correlation_km > 0.0)) {
    throw std::invalid_argument("correlation length must be positive");
  }
  if (sm_sigma < 0.0 || seasonal_amplitude < 0.0 || events_per_day < 0.0 ||
      ddm_noise < 0.0 || target_noise < 0.0) {
    throw std::invalid_argument("world amplitudes must be non-negative");
  }
  if (events_per_day > 0.0 &&
      (!(event_radius_km > 0.0) || !(drydown_efolding_days > 0.0))) {
    throw std::invalid_argument("event shape parameters must be positive");
  }
  if (tracks_per_day < 0 || samples_per_track < 1) {
    throw std::invalid_argument("track counts out of range");
  }
  if (sample_rate_hz != 1 && sample_rate_hz != 2) {
    throw std::invalid_argument("sample rate must be 1 or 2 Hz");
  }
  if (!(target_coverage > 0.0) || target_coverage > 1.0) {
    throw std::invalid_argument("target coverage must be in (0, 1]");
  }
  for (double r : {bad_quality_rate, rfi_rate, flag_unsuccessful_rate,
                   flag_precipitation_rate, flag_not_recommended_rate}) {
    if (r < 0.0 || r > 1.0) {
      throw std::invalid_argument("injection rates must be in [0, 1]");
    }
  }
}

// -------------------------------------------------------------- SmoothField

SmoothField::SmoothField(std::uint64_t key, double length_km,
                         const grid::GeoPoint& origin, int features) {
  if (features < 8) throw std::invalid_argument("too few field features");
  if (!(length_km > 0.0)) {
    throw std::invalid_argument("field length scale must be positive");
  }
  lat0_ = origin.lat;
  lon0_ = origin.lon;
  km_per_deg_lat_ = km_per_deg();
  km_per_deg_lon_ = km_per_deg() * std::cos(lat0_ * kPi / 180.0);
  Rng rng(key);
  w_.resize(2, features);
  phase_.resize(features);
  for (int k = 0; k < features; ++k) {
    w_(0, k) = rng.normal(0.0, 1.0 / length_km);
    w_(1, k) = rng.normal(0.0, 1.0 / length_km);
    phase_[k] = rng.uniform(0.0, kTau);
  }
  rephase_key_ = hash_key(key, 0x7265706861736531ull);
  norm_ = std::sqrt(2.0 / features);
}

const Eigen::VectorXd& SmoothField::variant_offsets(
    std::uint64_t variant) const {
  auto it = offsets_.find(variant);
  if (it != offsets_.end()) return it->second;
  Eigen::VectorXd off(phase_.size());
  for (Eigen::Index k = 0; k < off.size(); ++k) {
    off[k] = kTau * hash01(hash_key(rephase_key_, variant,
                                    static_cast<std::uint64_t>(k)));
  }
  return offsets_.emplace(variant, std::move(off)).first->second;
}

double SmoothField::at(const grid::GeoPoint& p, std::uint64_t variant) const {
  const double x = (p.lon - lon0_) * km_per_deg_lon_;
  const double y = (p.lat - lat0_) * km_per_deg_lat_;
  Eigen::ArrayXd args = (w_.row(0).transpose() * x +
                         w_.row(1).transpose() * y + phase_)
                            .array();
  if (variant != 0) args += variant_offsets(variant).array();
  return norm_ * args.cos().sum();
}

// ------------------------------------------------------------------ SmField

SmField::SmField(const WorldConfig& cfg)
    : cfg_(cfg),
      base_(hash_key_str(cfg.seed, "smbase"), cfg.correlation_km,
            box_center(cfg)),
      epoch_(day_start(cfg.first_day)) {
  cfg_.validate();
  season_phase_ = kTau * hash01(hash_key_str(cfg.seed, "season"));
  for (int d = 0; d < cfg.num_days; ++d) {
    Rng rng(hash_key(hash_key_str(cfg.seed, "events"),
                     static_cast<std::uint64_t>(d)));
    const int n = cfg.events_per_day > 0.0
                      ? poisson_draw(rng, cfg.events_per_day)
                      : 0;
    for (int e = 0; e < n; ++e) {
      WetUpEvent ev;
      ev.start_day = d + rng.uniform();
      ev.center = {cfg.lat_min + rng.uniform() * (cfg.lat_max - cfg.lat_min),
                   cfg.lon_min + rng.uniform() * (cfg.lon_max - cfg.lon_min)};
      ev.radius_km = cfg.event_radius_km * (0.7 + 0.6 * rng.uniform());
      ev.amplitude = cfg.event_amplitude * (0.5 + rng.uniform());
      events_.push_back(ev);
    }
  }
}

double SmField::base_anomaly(const grid::GeoPoint& p) const {
  return base_.at(p, cfg_.volatile_field ? 1 : 0);
}

double SmField::at(double t_days, const grid::GeoPoint& p) const {
  const std::uint64_t variant =
      cfg_.volatile_field
          ? 1 + static_cast<std::uint64_t>(std::max(0.0, std::floor(t_days)))
          : 0;
  double v = cfg_.sm_mean + cfg_.sm_sigma * base_.at(p, variant) +
             cfg_.seasonal_amplitude *
                 std::sin(kTau * t_days / 365.25 + season_phase_);
  for (const WetUpEvent& ev : events_) {
    if (t_days < ev.start_day) continue;
    const double age = t_days - ev.start_day;
    if (age > 12.0 * cfg_.drydown_efolding_days) continue;
    const double d = grid::great_circle_km(ev.center, p);
    if (d > 4.0 * ev.radius_km) continue;
    v += ev.amplitude * std::exp(-0.5 * d * d / (ev.radius_km * ev.radius_km)) *
         std::exp(-age / cfg_.drydown_efolding_days);
  }
  return std::clamp(v, 0.02, 0.95);
}

double SmField::at_time(UtcSeconds ts, const grid::GeoPoint& p) const {
  return at((ts - epoch_) / 86400.0, p);
}

// ------------------------------------------------------------- ancillary

AncillaryFields make_ancillary(const WorldConfig& cfg) {
  cfg.validate();
  const grid::GridSpec g3 = grid::GridSpec::ease2(3);
  const Window w = window_for(cfg, g3, 2);
  const double sentinel = kMissing;

  AncillaryFields f{
      io::Raster<double>(g3, w.row0, w.col0, w.nrows, w.ncols, 2, sentinel),
      io::Raster<double>(g3, w.row0, w.col0, w.nrows, w.ncols, 2, sentinel),
      io::Raster<double>(g3, w.row0, w.col0, w.nrows, w.ncols, 1, sentinel),
      io::Raster<double>(g3, w.row0, w.col0, w.nrows, w.ncols, 1, sentinel),
      io::Raster<double>(g3, w.row0, w.col0, w.nrows, w.ncols, 2, sentinel),
      io::Raster<double>(g3, w.row0, w.col0, w.nrows, w.ncols, 17, sentinel)};

  const grid::GeoPoint c = box_center(cfg);
  const auto key = [&](const char* tag) {
    return hash_key_str(hash_key_str(cfg.seed, "anc"), tag);
  };
  const int nf = 96;
  const SmoothField f_ndvi(key("ndvi"), 80.0, c, nf);
  const SmoothField f_water(key("water"), 50.0, c, nf);
  const SmoothField f_lc(key("landcover"), 150.0, c, nf);
  const SmoothField f_urban(key("urban"), 40.0, c, nf);
  const SmoothField f_ice(key("ice"), 60.0, c, nf);
  const SmoothField f_mix(key("mix"), 70.0, c, nf);
  const SmoothField f_elev(key("elev"), 120.0, c, nf);
  const SmoothField f_ridge(key("ridge"), 90.0, c, nf);
  const SmoothField f_estd(key("estd"), 50.0, c, nf);
  const SmoothField f_slope(key("slope"), 60.0, c, nf);
  const SmoothField f_sstd(key("sstd"), 45.0, c, nf);
  const SmoothField f_clay(key("clay"), 100.0, c, nf);
  const SmoothField f_sand(key("sand"), 100.0, c, nf);

  static constexpr int kPalette[8] = {4, 7, 8, 9, 10, 12, 14, 16};

  for (long r = 0; r < w.nrows; ++r) {
    for (long cc = 0; cc < w.ncols; ++cc) {
      const grid::CellIndex cell{w.row0 + r, w.col0 + cc};
      const grid::GeoPoint p = grid::cell_center(cell, g3);

      const double elev =
          std::max(1.0, 400.0 + 500.0 * f_elev.at(p) +
                            2600.0 * logistic((f_ridge.at(p) - 1.8) * 4.0));
      f.elevation.set(cell, elev, 0);
      f.elevation.set(cell, 10.0 + 60.0 * std::abs(f_estd.at(p)), 1);
      f.slope.set(cell, 1.0 + 6.0 * std::abs(f_slope.at(p)), 0);
      f.slope.set(cell, 0.5 + 3.0 * std::abs(f_sstd.at(p)), 1);

      const double ndvi =
          std::clamp(0.45 + 0.35 * std::tanh(f_ndvi.at(p)), 0.02, 0.9);
      f.ndvi.set(cell, ndvi, 0);

      double wf = logistic((f_water.at(p) - 2.2) * 8.0);
      if (wf < 1e-4) wf = 0.0;
      f.water.set(cell, wf, 0);

      const double clay = 0.1 + 0.35 * logistic(f_clay.at(p));
      const double sand =
          std::clamp(0.8 - clay - 0.25 * logistic(f_sand.at(p)), 0.05, 0.9);
      f.soiltex.set(cell, clay, 0);
      f.soiltex.set(cell, sand, 1);

      const double t = logistic(0.8 * f_lc.at(p));
      const int di = std::min(7, static_cast<int>(t * 8.0));
      int dom = kPalette[di];
      if (f_urban.at(p) > 2.0) dom = 13;
      if (f_ice.at(p) > 2.6) dom = 15;
      LandcoverVec lc = LandcoverVec::Zero();
      lc[16] = wf;  // open water class tracks the water fraction
      const double rem = 1.0 - wf;
      const double fd = rem * (0.55 + 0.3 * logistic(f_mix.at(p)));
      lc[dom - 1] += fd;
      lc[kPalette[(di + 1) % 8] - 1] += (rem - fd) * 0.6;
      lc[dom == 10 ? 11 : 9] += (rem - fd) * 0.4;
      lc /= lc.sum();
      for (int k = 0; k < kLandcoverClasses; ++k) {
        f.landcover.set(cell, lc[k], k);
      }
    }
  }
  return f;
}

double AncillaryFields::vwc_at(const grid::CellIndex& c3,
                               const warehouse::VwcModel& model) const {
  const double nd = ndvi.at(c3, 0);
  if (ndvi.is_missing(nd)) return 0.0;
  LandcoverVec lc;
  for (int k = 0; k < kLandcoverClasses; ++k) lc[k] = landcover.at(c3, k);
  if (landcover.is_missing(lc[0])) return 0.0;
  return warehouse::derive_vwc(nd, lc, model);
}

void write_ancillary(const AncillaryFields& f,
                     const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  f.elevation.write(dir / "elevation.grd");
  f.slope.write(dir / "slope.grd");
  f.ndvi.write(dir / "ndvi.grd");
  f.water.write(dir / "water.grd");
  f.soiltex.write(dir / "soiltex.grd");
  f.landcover.write(dir / "landcover.grd");
}

// ---------------------------------------------------------- forward model

double forward_reflectivity(double sm, double vwc_kg_m2) {
  return (0.05 + 0.55 * sm) * std::exp(-0.35 * vwc_kg_m2);
}

double invert_reflectivity(double refl_lin, double vwc_kg_m2) {
  return (refl_lin * std::exp(0.35 * vwc_kg_m2) - 0.05) / 0.55;
}

double invert_ddm_sm(const io::DdmObservation& obs, double vwc_kg_m2,
                     double eirp_w) {
  const double floor = warehouse::noise_floor_w(obs.ddm);
  const double peak = obs.ddm.maxCoeff();
  const double signal = peak - floor;
  const double lambda = warehouse::kGpsL1WavelengthM;
  const double range = obs.range_tx_sp_m + obs.range_sp_rx_m;
  const double gain = std::pow(10.0, obs.sp_rx_gain_db / 10.0);
  const double refl = signal * (4.0 * kPi) * (4.0 * kPi) * range * range /
                      (eirp_w * gain * lambda * lambda);
  return invert_reflectivity(refl, vwc_kg_m2);
}

double link_budget_peak_w(double refl_lin, const DdmContext& ctx) {
  const double lambda = warehouse::kGpsL1WavelengthM;
  const double range = ctx.range_tx_sp_m + ctx.range_sp_rx_m;
  const double gain = std::pow(10.0, ctx.sp_rx_gain_db / 10.0);
  return refl_lin * ctx.eirp_w * gain * lambda * lambda /
         ((4.0 * kPi) * (4.0 * kPi) * range * range);
}

void synthesize_ddm(double sm_true, const DdmContext& ctx, double noise,
                    Rng& rng, io::DdmObservation& obs) {
  if (sm_true < 0.0 || sm_true > 1.0) {
    throw std::invalid_argument("soil moisture must be in [0, 1]");
  }
  if (!(ctx.noise_floor_w > 0.0)) {
    throw std::invalid_argument("noise floor must be positive");
  }
  const double peak =
      link_budget_peak_w(forward_reflectivity(sm_true, ctx.vwc_kg_m2), ctx);
  const double floor = ctx.noise_floor_w;

  const double rough = std::min(ctx.elevation_std_m, 100.0);
  const double sig_r = 0.9 + 0.006 * rough;
  const double sig_c = 1.3 + 0.008 * rough;
  constexpr int kPeakRow = 5, kPeakCol = 5;
  for (int r = 0; r < io::kDelayBins; ++r) {
    for (int c = 0; c < io::kDopplerBins; ++c) {
      // The two leading delay rows precede the specular return and carry
      // only the noise floor.
      const double t =
          r < 2 ? 0.0
                : std::exp(-0.5 * (r - kPeakRow) * (r - kPeakRow) /
                               (sig_r * sig_r) -
                           0.5 * (c - kPeakCol) * (c - kPeakCol) /
                               (sig_c * sig_c));
      double v;
      if (noise > 0.0) {
        v = peak * t * (1.0 + noise * rng.normal()) +
            floor * (1.0 + noise * rng.normal());
      } else {
        v = peak * t + floor;
      }
      obs.ddm(r, c) = std::max(v, 0.0);
    }
  }
  const double measured_floor = warehouse::noise_floor_w(obs.ddm);
  obs.ddm_snr_db =
      measured_floor > 0.0
          ? 10.0 * std::log10(obs.ddm.maxCoeff() / measured_floor)
          : 99.0;
  obs.sp_rx_gain_db = ctx.sp_rx_gain_db;
  obs.range_tx_sp_m = ctx.range_tx_sp_m;
  obs.range_sp_rx_m = ctx.range_sp_rx_m;
}

// ------------------------------------------------------------------ tracks

namespace {

std::vector<io::DdmObservation> simulate_track(const WorldConfig& cfg,
                                               const SmField& field,
                                               const AncillaryFields& anc,
                                               const Date& day, int index) {
  const std::uint64_t di =
      static_cast<std::uint64_t>(days_between(cfg.first_day, day));
  Rng rng(hash_key(hash_key_str(cfg.seed, "track"), di,
                   static_cast<std::uint64_t>(index)));

  const grid::GridSpec g3 = grid::GridSpec::ease2(3);
  const warehouse::VwcModel vwc_model = warehouse::VwcModel::defaults();
  const warehouse::CalibrationTable cal;

  const double lat_span = cfg.lat_max - cfg.lat_min;
  const double lon_span = cfg.lon_max - cfg.lon_min;
  double lat = cfg.lat_min + (0.2 + 0.6 * rng.uniform()) * lat_span;
  double lon = cfg.lon_min + (0.2 + 0.6 * rng.uniform()) * lon_span;
  const double heading = rng.uniform(0.0, kTau);
  const double inc_base = rng.uniform(0.0, 68.0);
  const int sc = 1 + index % 8;
  const int prn = 1 + static_cast<int>(rng.below(32));

  const double duration =
      static_cast<double>(cfg.samples_per_track) / cfg.sample_rate_hz;
  const double slot = 86400.0 / std::max(1, cfg.tracks_per_day);
  const double t0 =
      day_start(day) + std::clamp((index + 0.5 * rng.uniform()) * slot, 0.0,
                                  std::max(0.0, 86400.0 - duration));
  const double step_km = kGroundSpeedKmS / cfg.sample_rate_hz;

  std::vector<io::DdmObservation> out;
  out.reserve(static_cast<std::size_t>(cfg.samples_per_track));
  for (int j = 0; j < cfg.samples_per_track; ++j) {
    io::DdmObservation obs;
    obs.timestamp = t0 + static_cast<double>(j) / cfg.sample_rate_hz;
    obs.lat = std::clamp(lat, -89.0, 89.0);
    obs.lon = grid::normalize_lon(lon);
    obs.spacecraft_id = sc;
    obs.prn = prn;
    obs.sample_rate_hz = cfg.sample_rate_hz;
    obs.incidence_deg =
        std::clamp(inc_base + rng.normal(0.0, 1.5), 0.0, 70.0);

    const grid::GeoPoint p{obs.lat, obs.lon};
    const grid::CellIndex c3 = grid::cell_of(p, g3);
    DdmContext ctx;
    ctx.vwc_kg_m2 = anc.vwc_at(c3, vwc_model);
    const double estd = anc.elevation.at(c3, 1);
    ctx.elevation_std_m = anc.elevation.is_missing(estd) ? 30.0 : estd;
    ctx.sp_rx_gain_db = -2.0 + 16.0 * rng.uniform();
    ctx.range_tx_sp_m = 2.1e7 + 2.0e6 * rng.uniform();
    ctx.range_sp_rx_m = 5.0e5 + 4.0e5 * rng.uniform();
    ctx.eirp_w = cal.eirp_w(prn);
    // Receiver noise level set against a reference surface so that the
    // realized SNR varies with the actual surface state.
    const double snr_target_db = std::clamp(rng.normal(14.0, 6.0), -3.0, 35.0);
    ctx.noise_floor_w =
        link_budget_peak_w(forward_reflectivity(0.25, 1.0), ctx) /
        std::pow(10.0, snr_target_db / 10.0);

    const double sm = field.at_time(obs.timestamp, p);
    synthesize_ddm(sm, ctx, cfg.ddm_noise, rng, obs);

    if (rng.uniform() < cfg.bad_quality_rate) {
      obs.quality_flags |= io::kObsFlagUnusable;
    }
    if (rng.uniform() < cfg.bad_quality_rate * 0.5) {
      obs.quality_flags |= io::kObsFlagCalibrationEvent;
    }
    if (rng.uniform() < cfg.rfi_rate) {
      const int col = static_cast<int>(rng.below(io::kDopplerBins));
      const double fl = warehouse::noise_floor_w(obs.ddm);
      for (int r = 0; r < io::kDelayBins; ++r) obs.ddm(r, col) += 12.0 * fl;
      const double fl2 = warehouse::noise_floor_w(obs.ddm);
      obs.ddm_snr_db =
          fl2 > 0.0 ? 10.0 * std::log10(obs.ddm.maxCoeff() / fl2) : 99.0;
    }
    out.push_back(obs);

    lat += step_km * std::cos(heading) / km_per_deg();
    const double coslat = std::max(0.2, std::cos(lat * kPi / 180.0));
    lon += step_km * std::sin(heading) / (km_per_deg() * coslat);
  }
  return out;
}

}  // namespace

std::vector<io::DdmObservation> simulate_day(const WorldConfig& cfg,
                                             const SmField& field,
                                             const AncillaryFields& anc,
                                             const Date& day) {
  cfg.validate();
  std::vector<io::DdmObservation> all;
  for (int i = 0; i < cfg.tracks_per_day; ++i) {
    auto track = simulate_track(cfg, field, anc, day, i);
    all.insert(all.end(), track.begin(), track.end());
  }
  return all;
}

void write_day_tracks(const WorldConfig& cfg, const SmField& field,
                      const AncillaryFields& anc, const Date& day,
                      const std::filesystem::path& root) {
  cfg.validate();
  const std::filesystem::path dir = root / "tracks" / format_date(day);
  std::filesystem::create_directories(dir);
  for (int i = 0; i < cfg.tracks_per_day; ++i) {
    const auto track = simulate_track(cfg, field, anc, day, i);
    char name[64];
    std::snprintf(name, sizeof name, "track_%s_%03d.trk",
                  warehouse::spacecraft_label(1 + i % 8).c_str(), i);
    io::write_track_file(dir / name, track);
  }
}

// ------------------------------------------------------------------ target

io::Raster<double> make_target_day(const WorldConfig& cfg,
                                   const SmField& field, const Date& day) {
  cfg.validate();
  const grid::GridSpec g9 = grid::GridSpec::ease2(9);
  const Window w = window_for(cfg, g9, 0);
  io::Raster<double> out(g9, w.row0, w.col0, w.nrows, w.ncols, 2, kMissing);

  const std::uint64_t di =
      static_cast<std::uint64_t>(days_between(cfg.first_day, day));
  const double t_noon = static_cast<double>(di) + 0.5;

  // Swath-like coverage: a drifting stripe score, thresholded at the exact
  // coverage quantile.
  std::vector<double> score(
      static_cast<std::size_t>(w.nrows) * static_cast<std::size_t>(w.ncols));
  for (long r = 0; r < w.nrows; ++r) {
    for (long c = 0; c < w.ncols; ++c) {
      const double colf = static_cast<double>(c) / w.ncols;
      const double s =
          0.5 * (1.0 + std::sin(kTau * (2.5 * colf + 0.31 * di))) +
          0.05 * (hash01(hash_key(hash_key_str(cfg.seed, "swath"), di,
                                  static_cast<std::uint64_t>(r),
                                  static_cast<std::uint64_t>(c))) -
                  0.5);
      score[static_cast<std::size_t>(r * w.ncols + c)] = s;
    }
  }
  std::vector<double> sorted = score;
  const auto keep_n = static_cast<std::size_t>(
      std::llround(cfg.target_coverage * static_cast<double>(sorted.size())));
  double threshold = std::numeric_limits<double>::infinity();
  if (keep_n < sorted.size()) {
    std::nth_element(sorted.begin(),
                     sorted.begin() + static_cast<std::ptrdiff_t>(keep_n),
                     sorted.end());
    threshold = sorted[keep_n];
  }

  const grid::GridSpec g3 = grid::GridSpec::ease2(3);
  for (long r = 0; r < w.nrows; ++r) {
    for (long c = 0; c < w.ncols; ++c) {
      if (score[static_cast<std::size_t>(r * w.ncols + c)] >= threshold) {
        continue;
      }
      const grid::CellIndex cell{w.row0 + r, w.col0 + c};
      // Cell mean over the nine nested 3 km cell centers at 12:00 UTC.
      double acc = 0.0;
      for (int rr = 0; rr < 3; ++rr) {
        for (int ccc = 0; ccc < 3; ++ccc) {
          const grid::CellIndex sub{cell.row * 3 + rr, cell.col * 3 + ccc};
          acc += field.at(t_noon, grid::cell_center(sub, g3));
        }
      }
      double value = acc / 9.0 + cfg.target_bias;
      if (cfg.target_noise > 0.0) {
        value += cfg.target_noise *
                 keyed_normal(hash_key(hash_key_str(cfg.seed, "tnoise"), di,
                                       static_cast<std::uint64_t>(cell.row),
                                       static_cast<std::uint64_t>(cell.col)));
      }
      value = clamp01(value);

      const std::uint64_t fk =
          hash_key(hash_key_str(cfg.seed, "tflag"), di,
                   static_cast<std::uint64_t>(cell.row),
                   static_cast<std::uint64_t>(cell.col));
      std::uint32_t flags = 0;
      if (hash01(hash_key(fk, 1)) < cfg.flag_unsuccessful_rate) {
        flags |= kTargetUnsuccessful;
      }
      if (hash01(hash_key(fk, 2)) < cfg.flag_precipitation_rate) {
        flags |= kTargetPrecipitation;
      }
      if (hash01(hash_key(fk, 3)) < cfg.flag_not_recommended_rate) {
        flags |= kTargetNotRecommended;
      }
      out.set(cell, (flags & kTargetUnsuccessful) ? kMissing : value, 0);
      out.set(cell, static_cast<double>(flags), 1);
    }
  }
  return out;
}

// ------------------------------------------------------------------- world

void generate_world(const WorldConfig& cfg,
                    const std::filesystem::path& root) {
  cfg.validate();
  const SmField field(cfg);
  const AncillaryFields anc = make_ancillary(cfg);
  write_ancillary(anc, root / "ancillary");
  std::filesystem::create_directories(root / "targets");
  for (int d = 0; d < cfg.num_days; ++d) {
    const Date day = add_days(cfg.first_day, d);
    write_day_tracks(cfg, field, anc, day, root);
    make_target_day(cfg, field, day)
        .write(warehouse::TargetStore::day_file(root / "targets", day));
  }
}

}  // namespace gnssr::synth
