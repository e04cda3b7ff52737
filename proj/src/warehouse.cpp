#include "gnssr/warehouse.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "gnssr/container.hpp"

namespace gnssr::warehouse {

namespace fs = std::filesystem;
using io::ArrayFile;
using io::DdmMatrix;
using io::DType;
using io::Variable;

double reflectivity_db(double peak_power_w, double range_tx_sp_m,
                       double range_sp_rx_m, double eirp_w,
                       double rx_gain_db) {
  if (!(peak_power_w > 0.0)) {
    throw std::invalid_argument("peak power must be positive");
  }
  if (!(range_tx_sp_m > 0.0) || !(range_sp_rx_m > 0.0)) {
    throw std::invalid_argument("ranges must be positive");
  }
  if (!(eirp_w > 0.0)) {
    throw std::invalid_argument("EIRP must be positive");
  }
  const double four_pi = 4.0 * M_PI;
  const double r_sum = range_tx_sp_m + range_sp_rx_m;
  const double g_r = std::pow(10.0, rx_gain_db / 10.0);
  const double gamma = peak_power_w * four_pi * four_pi * r_sum * r_sum /
                       (eirp_w * g_r * kGpsL1WavelengthM * kGpsL1WavelengthM);
  return 10.0 * std::log10(gamma);
}

double noise_floor_w(const DdmMatrix& ddm) {
  return ddm.topRows<2>().mean();
}

bool rfi_flagged(const DdmMatrix& ddm, double noise_floor, double factor) {
  const double threshold = factor * noise_floor;
  for (int c = 0; c < io::kDopplerBins; ++c) {
    if ((ddm.col(c).array() > threshold).all()) return true;
  }
  return false;
}

DdmMetrics compute_ddm_metrics(const io::DdmObservation& obs,
                               const CalibrationTable& cal,
                               double rfi_factor) {
  DdmMetrics m;
  m.peak_power_w = obs.ddm.maxCoeff();
  m.noise_floor_w = noise_floor_w(obs.ddm);
  m.rfi_detected = rfi_flagged(obs.ddm, m.noise_floor_w, rfi_factor);
  if (m.peak_power_w > 0.0) {
    m.reflectivity_db =
        reflectivity_db(m.peak_power_w, obs.range_tx_sp_m, obs.range_sp_rx_m,
                        cal.eirp_w(obs.prn), obs.sp_rx_gain_db);
  }
  return m;
}

VwcModel VwcModel::defaults() {
  VwcModel m;
  // Stem-dominated VWC at full canopy per IGBP class 1..17, kg/m^2.
  m.stem_factor_kg_m2 << 6.0, 8.0, 5.0, 6.0, 6.0, 2.0, 1.5, 3.0, 2.0, 1.5,
      3.0, 2.5, 1.0, 2.5, 0.0, 0.5, 0.0;
  return m;
}

double derive_vwc(double ndvi, const LandcoverVec& landcover_frac,
                  const VwcModel& model) {
  if (is_missing(ndvi) || is_missing(landcover_frac(0))) return kMissing;
  const double scale =
      std::max(ndvi - model.ndvi_origin, 0.0) / (1.0 - model.ndvi_origin);
  return scale * landcover_frac.dot(model.stem_factor_kg_m2);
}

io::Raster<double> derive_fractional_landcover(
    const io::Raster<std::uint8_t>& class_map,
    const grid::GridSpec& target_spec) {
  struct Counts {
    std::uint32_t valid = 0;
    std::array<std::uint32_t, kLandcoverClasses> per_class{};
  };
  std::map<grid::CellIndex, Counts> cells;

  for (long r = 0; r < class_map.window_rows(); ++r) {
    for (long c = 0; c < class_map.window_cols(); ++c) {
      const grid::CellIndex pix{class_map.row0() + r, class_map.col0() + c};
      const std::uint8_t cls = class_map.at(pix);
      if (cls == 0 || cls == class_map.sentinel()) continue;
      if (cls > kLandcoverClasses) {
        throw std::runtime_error(
            "landcover class " + std::to_string(int(cls)) + " at pixel (" +
            std::to_string(pix.row) + ", " + std::to_string(pix.col) +
            ") outside 0..17");
      }
      const grid::GeoPoint center = cell_center(pix, class_map.spec());
      Counts& k = cells[cell_of(center, target_spec)];
      ++k.valid;
      ++k.per_class[cls - 1];
    }
  }
  if (cells.empty()) {
    throw std::runtime_error("class map contains no valid pixels");
  }

  long r0 = target_spec.rows, r1 = -1, c0 = target_spec.cols, c1 = -1;
  for (const auto& [cell, _] : cells) {
    r0 = std::min(r0, cell.row);
    r1 = std::max(r1, cell.row);
    c0 = std::min(c0, cell.col);
    c1 = std::max(c1, cell.col);
  }
  io::Raster<double> out(target_spec, r0, c0, r1 - r0 + 1, c1 - c0 + 1,
                         kLandcoverClasses, kMissing);
  for (const auto& [cell, k] : cells) {
    for (int cls = 0; cls < kLandcoverClasses; ++cls) {
      out.set(cell, double(k.per_class[cls]) / double(k.valid), cls);
    }
  }
  return out;
}

namespace {
io::Raster<double> load_3km(const fs::path& dir, const char* name,
                            int expect_layers) {
  const fs::path p = dir / name;
  auto r = io::Raster<double>::read(p);
  if (r.spec() != grid::GridSpec::ease2(3)) {
    throw std::runtime_error("ancillary field not on the 3 km grid: " +
                             p.string());
  }
  if (r.layers() != expect_layers) {
    throw std::runtime_error("ancillary field " + p.string() + " has " +
                             std::to_string(r.layers()) + " layers, want " +
                             std::to_string(expect_layers));
  }
  return r;
}
}  // namespace

AncillaryStore::AncillaryStore(const fs::path& dir)
    : elevation_(load_3km(dir, "elevation.grd", 2)),
      slope_(load_3km(dir, "slope.grd", 2)),
      ndvi_(load_3km(dir, "ndvi.grd", 1)),
      water_(load_3km(dir, "water.grd", 1)),
      soiltex_(load_3km(dir, "soiltex.grd", 2)),
      landcover_(load_3km(dir, "landcover.grd", kLandcoverClasses)) {}

AncillaryRecord AncillaryStore::at(const grid::CellIndex& c3) const {
  AncillaryRecord a;
  a.elevation_m = elevation_.at(c3, 0);
  a.elevation_std_m = elevation_.at(c3, 1);
  a.slope_deg = slope_.at(c3, 0);
  a.slope_std_deg = slope_.at(c3, 1);
  a.ndvi = ndvi_.at(c3);
  a.water_fraction = water_.at(c3);
  a.clay_fraction = soiltex_.at(c3, 0);
  a.sand_fraction = soiltex_.at(c3, 1);
  if (!is_missing(landcover_.at(c3, 0))) {
    for (int k = 0; k < kLandcoverClasses; ++k) {
      a.landcover(k) = landcover_.at(c3, k);
    }
  }
  return a;
}

TargetStore::TargetStore(fs::path dir) : dir_(std::move(dir)) {}

fs::path TargetStore::day_file(const fs::path& dir, const Date& day) {
  return dir / ("target_" + format_date_compact(day) + ".grd");
}

std::optional<TargetValue> TargetStore::at(const Date& day,
                                           const grid::CellIndex& c9) const {
  const std::int64_t key = days_from_epoch(day);
  auto it = cache_.find(key);
  if (it == cache_.end()) {
    std::shared_ptr<io::Raster<double>> r;
    const fs::path p = day_file(dir_, day);
    if (fs::exists(p)) {
      r = std::make_shared<io::Raster<double>>(io::Raster<double>::read(p));
      if (r->spec() != grid::GridSpec::ease2(9) || r->layers() != 2) {
        throw std::runtime_error("bad reference grid file: " + p.string());
      }
    }
    it = cache_.emplace(key, std::move(r)).first;
    if (cache_.size() > 16) cache_.erase(cache_.begin());
  }
  const auto& raster = it->second;
  if (!raster) return std::nullopt;
  const double flags = raster->at(c9, 1);
  if (is_missing(flags)) return std::nullopt;
  TargetValue t;
  t.soil_moisture = raster->at(c9, 0);
  t.flags = static_cast<std::uint32_t>(std::llround(flags));
  return t;
}

std::vector<Sample> build_samples(const std::vector<io::DdmObservation>& obs,
                                  const AncillaryStore& ancillary,
                                  const TargetStore* targets,
                                  const CalibrationTable& cal,
                                  const VwcModel& vwc,
                                  const MatchupPolicy& matchup,
                                  double rfi_factor, BuildStats* stats) {
  std::vector<Sample> out;
  out.reserve(obs.size());
  BuildStats local;
  local.observations_in = obs.size();
  for (const auto& o : obs) {
    Sample s;
    s.obs = o;
    const grid::GeoPoint p(o.lat, o.lon);
    s.cell3 = cell_of(p, grid::GridSpec::ease2(3));
    s.cell9 = cell_of(p, grid::GridSpec::ease2(9));
    s.cell36 = cell_of(p, grid::GridSpec::ease2(36));
    s.anc = ancillary.at(s.cell3);
    s.anc.vwc_kg_m2 = derive_vwc(s.anc.ndvi, s.anc.landcover, vwc);
    s.metrics = compute_ddm_metrics(o, cal, rfi_factor);
    if (!s.anc.complete()) ++local.incomplete_ancillary;
    if (targets != nullptr) {
      const Date day = date_of(o.timestamp);
      for (int k = 0; k <= 2 * matchup.max_day_offset && !s.has_target; ++k) {
        // 0, -1, +1, -2, +2, ... nearest day first, past preferred.
        const int off = (k % 2 == 1) ? -(k + 1) / 2 : k / 2;
        if (auto t = targets->at(add_days(day, off), s.cell9)) {
          s.has_target = true;
          s.target = *t;
        }
      }
      if (s.has_target) ++local.with_target;
    }
    out.push_back(std::move(s));
  }
  if (stats != nullptr) *stats = local;
  return out;
}

std::string spacecraft_label(int id) {
  if (id < 1 || id > 8) {
    throw std::invalid_argument("spacecraft id out of range: " +
                                std::to_string(id));
  }
  char buf[8];
  std::snprintf(buf, sizeof buf, "CY%03d", id);
  return buf;
}

fs::path SampleStore::day_file(const Date& d, int spacecraft_id) const {
  return root_ / format_date(d) /
         ("samples_" + spacecraft_label(spacecraft_id) + "_" +
          format_date_compact(d) + ".smp");
}

bool SampleStore::has_day(const Date& d, int spacecraft_id) const {
  return fs::exists(day_file(d, spacecraft_id));
}

void SampleStore::write_day(const Date& d, int spacecraft_id,
                            const std::vector<Sample>& samples,
                            const std::map<std::string, std::string>& prov) {
  const std::uint64_t n = samples.size();
  for (const Sample& s : samples) {
    if (s.obs.spacecraft_id != spacecraft_id) {
      throw std::invalid_argument(
          "sample from spacecraft " + std::to_string(s.obs.spacecraft_id) +
          " in " + spacecraft_label(spacecraft_id) + " day file");
    }
  }
  ArrayFile f;
  f.set_attr("kind", "samples");
  f.set_attr("date", format_date(d));
  f.set_attr("spacecraft_id", std::int64_t{spacecraft_id});
  f.set_attr("spacecraft", spacecraft_label(spacecraft_id));
  f.set_attr("sample_count", static_cast<std::int64_t>(n));
  for (const auto& [k, v] : prov) f.set_attr("prov_" + k, v);

  auto scalar = [&](const char* name, auto get) {
    Variable& v = f.add(name, DType::kF64, {n});
    for (std::uint64_t i = 0; i < n; ++i) v.f64()[i] = get(samples[i]);
  };
  auto integer = [&](const char* name, auto get) {
    Variable& v = f.add(name, DType::kI64, {n});
    for (std::uint64_t i = 0; i < n; ++i) v.i64()[i] = get(samples[i]);
  };

  scalar("timestamp", [](const Sample& s) { return s.obs.timestamp; });
  scalar("lat", [](const Sample& s) { return s.obs.lat; });
  scalar("lon", [](const Sample& s) { return s.obs.lon; });
  Variable& ddm = f.add("ddm", DType::kF64,
                        {n, io::kDelayBins, io::kDopplerBins});
  for (std::uint64_t i = 0; i < n; ++i) {
    double* out = ddm.f64() + i * io::kDelayBins * io::kDopplerBins;
    for (int r = 0; r < io::kDelayBins; ++r) {
      for (int c = 0; c < io::kDopplerBins; ++c) {
        *out++ = samples[i].obs.ddm(r, c);
      }
    }
  }
  scalar("ddm_snr_db", [](const Sample& s) { return s.obs.ddm_snr_db; });
  scalar("sp_rx_gain_db", [](const Sample& s) { return s.obs.sp_rx_gain_db; });
  scalar("incidence_deg", [](const Sample& s) { return s.obs.incidence_deg; });
  scalar("range_tx_sp_m", [](const Sample& s) { return s.obs.range_tx_sp_m; });
  scalar("range_sp_rx_m", [](const Sample& s) { return s.obs.range_sp_rx_m; });
  integer("prn", [](const Sample& s) { return s.obs.prn; });
  integer("quality_flags",
          [](const Sample& s) { return std::int64_t{s.obs.quality_flags}; });
  integer("sample_rate_hz",
          [](const Sample& s) { return s.obs.sample_rate_hz; });

  scalar("elevation_m", [](const Sample& s) { return s.anc.elevation_m; });
  scalar("elevation_std_m",
         [](const Sample& s) { return s.anc.elevation_std_m; });
  scalar("slope_deg", [](const Sample& s) { return s.anc.slope_deg; });
  scalar("slope_std_deg", [](const Sample& s) { return s.anc.slope_std_deg; });
  scalar("ndvi", [](const Sample& s) { return s.anc.ndvi; });
  scalar("vwc_kg_m2", [](const Sample& s) { return s.anc.vwc_kg_m2; });
  scalar("water_fraction",
         [](const Sample& s) { return s.anc.water_fraction; });
  scalar("clay_fraction", [](const Sample& s) { return s.anc.clay_fraction; });
  scalar("sand_fraction", [](const Sample& s) { return s.anc.sand_fraction; });
  Variable& lc = f.add("landcover", DType::kF64, {n, kLandcoverClasses});
  for (std::uint64_t i = 0; i < n; ++i) {
    for (int k = 0; k < kLandcoverClasses; ++k) {
      lc.f64()[i * kLandcoverClasses + k] = samples[i].anc.landcover(k);
    }
  }

  scalar("peak_power_w", [](const Sample& s) { return s.metrics.peak_power_w; });
  scalar("noise_floor_w",
         [](const Sample& s) { return s.metrics.noise_floor_w; });
  scalar("reflectivity_db",
         [](const Sample& s) { return s.metrics.reflectivity_db; });
  Variable& rfi = f.add("rfi_detected", DType::kU8, {n});
  for (std::uint64_t i = 0; i < n; ++i) {
    rfi.u8()[i] = samples[i].metrics.rfi_detected ? 1 : 0;
  }

  integer("cell3_row", [](const Sample& s) { return s.cell3.row; });
  integer("cell3_col", [](const Sample& s) { return s.cell3.col; });
  integer("cell9_row", [](const Sample& s) { return s.cell9.row; });
  integer("cell9_col", [](const Sample& s) { return s.cell9.col; });
  integer("cell36_row", [](const Sample& s) { return s.cell36.row; });
  integer("cell36_col", [](const Sample& s) { return s.cell36.col; });

  Variable& ht = f.add("has_target", DType::kU8, {n});
  for (std::uint64_t i = 0; i < n; ++i) {
    ht.u8()[i] = samples[i].has_target ? 1 : 0;
  }
  scalar("target_sm", [](const Sample& s) {
    return s.has_target ? s.target.soil_moisture : kMissing;
  });
  integer("target_flags", [](const Sample& s) {
    return s.has_target ? std::int64_t{s.target.flags} : std::int64_t{0};
  });

  f.write(day_file(d, spacecraft_id));
}

std::vector<Sample> SampleStore::read_day(const Date& d,
                                          int spacecraft_id) const {
  const fs::path p = day_file(d, spacecraft_id);
  const ArrayFile f = ArrayFile::read(p);
  if (!f.has_attr("kind") || f.attr_str("kind") != "samples") {
    throw std::runtime_error("not a sample file: " + p.string());
  }
  const auto n = static_cast<std::size_t>(f.attr_i64("sample_count"));
  std::vector<Sample> out(n);
  const int sc = static_cast<int>(f.attr_i64("spacecraft_id"));

  auto scalar = [&](const char* name, auto set) {
    const double* v = f.var(name).f64();
    for (std::size_t i = 0; i < n; ++i) set(out[i], v[i]);
  };
  auto integer = [&](const char* name, auto set) {
    const std::int64_t* v = f.var(name).i64();
    for (std::size_t i = 0; i < n; ++i) set(out[i], v[i]);
  };

  scalar("timestamp", [](Sample& s, double v) { s.obs.timestamp = v; });
  scalar("lat", [](Sample& s, double v) { s.obs.lat = v; });
  scalar("lon", [](Sample& s, double v) { s.obs.lon = v; });
  const double* ddm = f.var("ddm").f64();
  for (std::size_t i = 0; i < n; ++i) {
    const double* in = ddm + i * io::kDelayBins * io::kDopplerBins;
    for (int r = 0; r < io::kDelayBins; ++r) {
      for (int c = 0; c < io::kDopplerBins; ++c) {
        out[i].obs.ddm(r, c) = *in++;
      }
    }
    out[i].obs.spacecraft_id = sc;
  }
  scalar("ddm_snr_db", [](Sample& s, double v) { s.obs.ddm_snr_db = v; });
  scalar("sp_rx_gain_db", [](Sample& s, double v) { s.obs.sp_rx_gain_db = v; });
  scalar("incidence_deg", [](Sample& s, double v) { s.obs.incidence_deg = v; });
  scalar("range_tx_sp_m", [](Sample& s, double v) { s.obs.range_tx_sp_m = v; });
  scalar("range_sp_rx_m", [](Sample& s, double v) { s.obs.range_sp_rx_m = v; });
  integer("prn", [](Sample& s, std::int64_t v) { s.obs.prn = int(v); });
  integer("quality_flags", [](Sample& s, std::int64_t v) {
    s.obs.quality_flags = static_cast<std::uint32_t>(v);
  });
  integer("sample_rate_hz",
          [](Sample& s, std::int64_t v) { s.obs.sample_rate_hz = int(v); });

  scalar("elevation_m", [](Sample& s, double v) { s.anc.elevation_m = v; });
  scalar("elevation_std_m",
         [](Sample& s, double v) { s.anc.elevation_std_m = v; });
  scalar("slope_deg", [](Sample& s, double v) { s.anc.slope_deg = v; });
  scalar("slope_std_deg", [](Sample& s, double v) { s.anc.slope_std_deg = v; });
  scalar("ndvi", [](Sample& s, double v) { s.anc.ndvi = v; });
  scalar("vwc_kg_m2", [](Sample& s, double v) { s.anc.vwc_kg_m2 = v; });
  scalar("water_fraction",
         [](Sample& s, double v) { s.anc.water_fraction = v; });
  scalar("clay_fraction", [](Sample& s, double v) { s.anc.clay_fraction = v; });
  scalar("sand_fraction", [](Sample& s, double v) { s.anc.sand_fraction = v; });
  const double* lc = f.var("landcover").f64();
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < kLandcoverClasses; ++k) {
      out[i].anc.landcover(k) = lc[i * kLandcoverClasses + k];
    }
  }

  scalar("peak_power_w",
         [](Sample& s, double v) { s.metrics.peak_power_w = v; });
  scalar("noise_floor_w",
         [](Sample& s, double v) { s.metrics.noise_floor_w = v; });
  scalar("reflectivity_db",
         [](Sample& s, double v) { s.metrics.reflectivity_db = v; });
  const std::uint8_t* rfi = f.var("rfi_detected").u8();
  for (std::size_t i = 0; i < n; ++i) {
    out[i].metrics.rfi_detected = rfi[i] != 0;
  }

  integer("cell3_row", [](Sample& s, std::int64_t v) { s.cell3.row = v; });
  integer("cell3_col", [](Sample& s, std::int64_t v) { s.cell3.col = v; });
  integer("cell9_row", [](Sample& s, std::int64_t v) { s.cell9.row = v; });
  integer("cell9_col", [](Sample& s, std::int64_t v) { s.cell9.col = v; });
  integer("cell36_row", [](Sample& s, std::int64_t v) { s.cell36.row = v; });
  integer("cell36_col", [](Sample& s, std::int64_t v) { s.cell36.col = v; });

  const std::uint8_t* ht = f.var("has_target").u8();
  const double* tsm = f.var("target_sm").f64();
  const std::int64_t* tfl = f.var("target_flags").i64();
  for (std::size_t i = 0; i < n; ++i) {
    out[i].has_target = ht[i] != 0;
    if (out[i].has_target) {
      out[i].target.soil_moisture = tsm[i];
      out[i].target.flags = static_cast<std::uint32_t>(tfl[i]);
    }
  }
  return out;
}

std::vector<Sample> SampleStore::read_range(const Date& first,
                                            const Date& last) const {
  std::vector<Sample> out;
  for (Date d = first; d <= last; d = add_days(d, 1)) {
    for (int sc = 1; sc <= 8; ++sc) {
      if (!has_day(d, sc)) continue;
      auto day = read_day(d, sc);
      out.insert(out.end(), std::make_move_iterator(day.begin()),
                 std::make_move_iterator(day.end()));
    }
  }
  return out;
}

}  // namespace gnssr::warehouse
