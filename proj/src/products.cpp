#include "gnssr/products.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <regex>
#include <stdexcept>

namespace gnssr::products {

// ----------------------------------------------------------- L2 (trackwise)

L2Record make_l2_record(const Sample& s, double sm) {
  if (!is_missing(sm) && !(sm >= 0.0)) {
    throw std::invalid_argument(
        "retrieval must be non-negative or the sentinel");
  }
  L2Record r;
  r.timestamp = s.obs.timestamp;
  r.lat = s.obs.lat;
  r.lon = s.obs.lon;
  r.sm = sm;
  r.quality_flags = s.obs.quality_flags;
  r.spacecraft_id = s.obs.spacecraft_id;
  r.prn = s.obs.prn;
  r.incidence_deg = s.obs.incidence_deg;
  r.sp_rx_gain_db = s.obs.sp_rx_gain_db;
  r.ddm_snr_db = s.obs.ddm_snr_db;
  r.reflectivity_db = s.metrics.reflectivity_db;
  r.peak_power_w = s.metrics.peak_power_w;
  r.anc = s.anc;
  return r;
}

std::map<int, std::vector<L2Record>> retrieve_day(
    const std::vector<Sample>& samples, nn::Network& net,
    const cond::NormStats& stats, const cond::FilterConfig& filter,
    cond::FilterReport* report) {
  std::map<int, std::vector<L2Record>> out;
  for (const Sample& s : samples) out.try_emplace(s.obs.spacecraft_id);

  cond::FilterReport rep;
  const std::vector<Sample> kept = cond::filter_samples(samples, filter, &rep);
  if (report) *report = rep;

  if (!kept.empty()) {
    const cond::Dataset data =
        cond::make_dataset(kept, stats, /*with_targets=*/false);
    const Eigen::VectorXd pred = net.predict(data);
    for (Eigen::Index i = 0; i < pred.size(); ++i) {
      const Sample& s = kept[static_cast<std::size_t>(i)];
      out[s.obs.spacecraft_id].push_back(make_l2_record(s, pred[i]));
    }
  }
  for (auto& [sc, recs] : out) {
    std::stable_sort(recs.begin(), recs.end(),
                     [](const L2Record& a, const L2Record& b) {
                       if (a.prn != b.prn) return a.prn < b.prn;
                       return a.timestamp < b.timestamp;
                     });
  }
  return out;
}

// ------------------------------------------------------------ surface flags

std::uint8_t compute_surface_flags(const SurfaceFlagInputs& x) {
  if (!(x.urban_fraction >= 0.0 && x.urban_fraction <= 1.0)) {
    throw std::invalid_argument("urban fraction outside [0, 1]");
  }
  if (!(x.coastal_distance_km >= 0.0)) {
    throw std::invalid_argument("coastal distance must be non-negative");
  }
  std::uint8_t w = 0;
  if (x.coastal_distance_km < 10.0) w |= kSurfaceCoastal;
  if (x.urban_fraction > 0.25) w |= kSurfaceUrban;
  if (x.dominant_igbp_class == 15) w |= kSurfaceSnowIce;
  if (x.elevation_m > 3000.0) w |= kSurfaceHighElevation;
  if (x.vwc_kg_m2 > 5.0) w |= kSurfaceDenseVegetation;
  return w;
}

SurfaceFlagMap::SurfaceFlagMap(const warehouse::AncillaryStore& ancillary,
                               const warehouse::VwcModel& vwc)
    : anc_(ancillary), vwc_(vwc) {
  const io::Raster<double>& wr = ancillary.water();
  for (long r = 0; r < wr.window_rows(); ++r) {
    for (long c = 0; c < wr.window_cols(); ++c) {
      const grid::CellIndex cell{wr.row0() + r, wr.col0() + c};
      const double v = wr.at(cell);
      if (!wr.is_missing(v) && v > 0.5) {
        water_centers_.push_back(grid::cell_center(cell, wr.spec()));
      }
    }
  }
}

SurfaceFlagInputs SurfaceFlagMap::inputs_for(const grid::CellIndex& c9) const {
  SurfaceFlagInputs x;
  const grid::GridSpec g9 = grid::GridSpec::ease2(9);
  const grid::GeoPoint center = grid::cell_center(c9, g9);
  for (const grid::GeoPoint& wc : water_centers_) {
    x.coastal_distance_km =
        std::min(x.coastal_distance_km, grid::great_circle_km(center, wc));
  }

  int n = 0;
  double elev = 0.0, vwc = 0.0;
  LandcoverVec lc = LandcoverVec::Zero();
  for (int rr = 0; rr < 3; ++rr) {
    for (int cc = 0; cc < 3; ++cc) {
      const grid::CellIndex c3{c9.row * 3 + rr, c9.col * 3 + cc};
      const AncillaryRecord rec = anc_.at(c3);
      if (is_missing(rec.elevation_m) || is_missing(rec.ndvi) ||
          is_missing(rec.landcover(0))) {
        continue;
      }
      ++n;
      elev += rec.elevation_m;
      lc += rec.landcover;
      vwc += warehouse::derive_vwc(rec.ndvi, rec.landcover, vwc_);
    }
  }
  if (n > 0) {
    x.elevation_m = elev / n;
    x.vwc_kg_m2 = vwc / n;
    lc /= static_cast<double>(n);
    x.urban_fraction = lc(12);  // IGBP class 13
    int best = 0;
    for (int k = 1; k < kLandcoverClasses; ++k) {
      if (lc(k) > lc(best)) best = k;  // ties keep the lower class id
    }
    x.dominant_igbp_class = best + 1;
  }
  return x;
}

std::uint8_t SurfaceFlagMap::flags_for(const grid::CellIndex& c9) const {
  return compute_surface_flags(inputs_for(c9));
}

// --------------------------------------------------------------- L3 (grids)

const char* grid_method_name(GridMethod m) {
  switch (m) {
    case GridMethod::kEqual: return "equal";
    case GridMethod::kNearest: return "nearest";
    case GridMethod::kIdw: return "idw";
  }
  throw std::logic_error("unreachable grid method");
}

GridMethod parse_grid_method(const std::string& name) {
  if (name == "equal") return GridMethod::kEqual;
  if (name == "nearest") return GridMethod::kNearest;
  if (name == "idw") return GridMethod::kIdw;
  throw std::invalid_argument("unknown gridding method '" + name +
                              "' (want equal, nearest or idw)");
}

namespace {

// Earlier timestamp first, then lower spacecraft id.
bool tie_less(const L2Record& a, const L2Record& b) {
  if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
  return a.spacecraft_id < b.spacecraft_id;
}

double aggregate_cell(const std::vector<const L2Record*>& group,
                      const grid::GeoPoint& center, const GridConfig& cfg) {
  // A lone retrieval is the cell value under every method, bit for bit.
  if (group.size() == 1) return group.front()->sm;
  switch (cfg.method) {
    case GridMethod::kEqual: {
      double sum = 0.0;
      for (const L2Record* r : group) sum += r->sm;
      return sum / static_cast<double>(group.size());
    }
    case GridMethod::kNearest: {
      const L2Record* best = nullptr;
      double best_d = 0.0;
      for (const L2Record* r : group) {
        const double d = grid::great_circle_km(center, {r->lat, r->lon});
        if (best == nullptr || d < best_d ||
            (d == best_d && tie_less(*r, *best))) {
          best = r;
          best_d = d;
        }
      }
      return best->sm;
    }
    case GridMethod::kIdw: {
      const L2Record* exact = nullptr;
      double wsum = 0.0, acc = 0.0;
      for (const L2Record* r : group) {
        const double d = grid::great_circle_km(center, {r->lat, r->lon});
        if (d == 0.0) {
          if (exact == nullptr || tie_less(*r, *exact)) exact = r;
          continue;
        }
        const double w = 1.0 / std::pow(d, cfg.idw_power);
        wsum += w;
        acc += w * r->sm;
      }
      if (exact != nullptr) return exact->sm;
      return acc / wsum;
    }
  }
  throw std::logic_error("unreachable grid method");
}

}  // namespace

L3Grid grid_l3(const std::vector<L2Record>& records, const TimeWindow& window,
               const grid::GridSpec& spec, const GridConfig& cfg) {
  if (!(window.end > window.start)) {
    throw std::invalid_argument("gridding window is empty");
  }
  if (cfg.method == GridMethod::kIdw && !(cfg.idw_power > 0.0)) {
    throw std::invalid_argument("idw exponent must be positive");
  }

  std::map<std::pair<long, long>, std::vector<const L2Record*>> buckets;
  for (const L2Record& r : records) {
    if (!window.contains(r.timestamp) || is_missing(r.sm)) continue;
    const grid::CellIndex c = grid::cell_of({r.lat, r.lon}, spec);
    buckets[{c.row, c.col}].push_back(&r);
  }

  long row0 = 0, col0 = 0, row1 = 0, col1 = 0;
  if (!buckets.empty()) {
    row0 = row1 = buckets.begin()->first.first;
    col0 = col1 = buckets.begin()->first.second;
    for (const auto& [key, group] : buckets) {
      row0 = std::min(row0, key.first);
      row1 = std::max(row1, key.first);
      col0 = std::min(col0, key.second);
      col1 = std::max(col1, key.second);
    }
  }
  io::Raster<double> cells(spec, row0, col0, row1 - row0 + 1, col1 - col0 + 1,
                           3, kMissing);
  cells.layer(L3Grid::kCount).setZero();
  cells.layer(L3Grid::kFlags).setZero();

  for (const auto& [key, group] : buckets) {
    const grid::CellIndex c{key.first, key.second};
    const grid::GeoPoint center = grid::cell_center(c, spec);
    cells.set(c, aggregate_cell(group, center, cfg), L3Grid::kSm);
    cells.set(c, static_cast<double>(group.size()), L3Grid::kCount);
  }
  return {std::move(cells), window};
}

void apply_surface_flags(L3Grid& grid, const SurfaceFlagMap& flags) {
  for (long r = 0; r < grid.cells.window_rows(); ++r) {
    for (long c = 0; c < grid.cells.window_cols(); ++c) {
      const grid::CellIndex cell{grid.cells.row0() + r, grid.cells.col0() + c};
      const std::uint8_t word = flags.flags_for(cell);
      grid.cells.set(cell, static_cast<double>(word), L3Grid::kFlags);
      if (word & kSurfaceHighElevation) {
        grid.cells.set(cell, kMissing, L3Grid::kSm);
      }
    }
  }
}

// ------------------------------------------------------------ product files

void validate_version(const std::string& version) {
  static const std::regex re(R"(v\d+\.\d+)");
  if (!std::regex_match(version, re)) {
    throw std::invalid_argument("product version must look like v1.0, got '" +
                                version + "'");
  }
}

std::string l2_file_name(int spacecraft_id, const Date& day,
                         const std::string& version) {
  validate_version(version);
  char buf[128];
  std::snprintf(buf, sizeof buf, "aggregateSoilMoisture_muon_%s_%s_%s.nc4",
                warehouse::spacecraft_label(spacecraft_id).c_str(),
                format_date_compact(day).c_str(), version.c_str());
  return buf;
}

std::string l3_hourly_file_name(const Date& day, int hour,
                                const std::string& version) {
  validate_version(version);
  if (hour < 0 || hour > 23) {
    throw std::invalid_argument("hour outside 0..23");
  }
  char buf[128];
  std::snprintf(buf, sizeof buf, "hourlySoilMoisture_muon_CYGNSS_%sZ_%s.nc4",
                format_date_hour_compact(day, hour).c_str(), version.c_str());
  return buf;
}

std::string l3_daily_file_name(const Date& day, const std::string& version) {
  validate_version(version);
  char buf[128];
  std::snprintf(buf, sizeof buf, "dailySoilMoisture_muon_CYGNSS_%s_%s.nc4",
                format_date_compact(day).c_str(), version.c_str());
  return buf;
}

std::filesystem::path l2_day_dir(const std::filesystem::path& root,
                                 const std::string& version, int spacecraft_id,
                                 const Date& day) {
  validate_version(version);
  return root / version / "trackwiseSoilMoisture" /
         warehouse::spacecraft_label(spacecraft_id) / format_date(day);
}

std::filesystem::path l3_day_dir(const std::filesystem::path& root,
                                 const std::string& version,
                                 const std::string& filetype, const Date& day) {
  validate_version(version);
  if (filetype != "hourlySoilMoisture" && filetype != "dailySoilMoisture") {
    throw std::invalid_argument("unknown gridded file type '" + filetype + "'");
  }
  return root / version / "griddedSoilMoisture" / filetype / "CYGNSS" /
         format_date(day);
}

TimeWindow ParsedName::window() const {
  if (kind == ProductKind::kL3Hourly) {
    return {hour_start(day, hour), hour_start(day, hour) + 3600.0};
  }
  return {day_start(day), day_start(add_days(day, 1))};
}

namespace {

Date parse_compact_date(const std::string& s) {
  const Date d{std::stoi(s.substr(0, 4)), std::stoi(s.substr(4, 2)),
               std::stoi(s.substr(6, 2))};
  if (!valid_date(d)) {
    throw std::invalid_argument("invalid date in product name: " + s);
  }
  return d;
}

}  // namespace

ParsedName parse_product_name(const std::string& file_name) {
  static const std::regex l2_re(
      R"(aggregateSoilMoisture_muon_(CY\d{3})_(\d{8})_(v\d+\.\d+)\.nc4)");
  static const std::regex hourly_re(
      R"(hourlySoilMoisture_muon_CYGNSS_(\d{8})T(\d{2})Z_(v\d+\.\d+)\.nc4)");
  static const std::regex daily_re(
      R"(dailySoilMoisture_muon_CYGNSS_(\d{8})_(v\d+\.\d+)\.nc4)");

  std::smatch m;
  ParsedName p;
  if (std::regex_match(file_name, m, l2_re)) {
    p.kind = ProductKind::kL2Daily;
    p.satellite = m[1];
    const int num = std::stoi(p.satellite.substr(2));
    if (num < 1 || num > 8) {
      throw std::invalid_argument("spacecraft out of range in product name: " +
                                  file_name);
    }
    p.day = parse_compact_date(m[2]);
    p.version = m[3];
  } else if (std::regex_match(file_name, m, hourly_re)) {
    p.kind = ProductKind::kL3Hourly;
    p.satellite = "CYGNSS";
    p.day = parse_compact_date(m[1]);
    p.hour = std::stoi(m[2]);
    if (p.hour > 23) {
      throw std::invalid_argument("hour out of range in product name: " +
                                  file_name);
    }
    p.version = m[3];
  } else if (std::regex_match(file_name, m, daily_re)) {
    p.kind = ProductKind::kL3Daily;
    p.satellite = "CYGNSS";
    p.day = parse_compact_date(m[1]);
    p.version = m[2];
  } else {
    throw std::invalid_argument("unrecognized product file name: " +
                                file_name);
  }
  return p;
}

namespace {

void check_collision(const std::filesystem::path& path, Overwrite ow) {
  if (ow == Overwrite::kForbid && std::filesystem::exists(path)) {
    throw std::runtime_error("product file already exists (backfill mode "
                             "required to overwrite): " +
                             path.string());
  }
}

}  // namespace

std::filesystem::path write_l2_day(const std::vector<L2Record>& records,
                                   int spacecraft_id, const Date& day,
                                   const std::string& version,
                                   const std::filesystem::path& root,
                                   Overwrite overwrite) {
  const TimeWindow win{day_start(day), day_start(add_days(day, 1))};
  for (const L2Record& r : records) {
    if (r.spacecraft_id != spacecraft_id) {
      throw std::invalid_argument("record from a different spacecraft in " +
                                  warehouse::spacecraft_label(spacecraft_id) +
                                  " daily file");
    }
    if (!win.contains(r.timestamp)) {
      throw std::invalid_argument("record timestamp outside " +
                                  format_date(day));
    }
    if (!is_missing(r.sm) && !(r.sm >= 0.0)) {
      throw std::invalid_argument("negative retrieval in product records");
    }
  }

  const std::filesystem::path dir =
      l2_day_dir(root, version, spacecraft_id, day);
  std::filesystem::create_directories(dir);
  const std::filesystem::path path =
      dir / l2_file_name(spacecraft_id, day, version);
  check_collision(path, overwrite);

  const std::size_t n = records.size();
  io::ArrayFile f;
  f.set_attr("kind", "l2_trackwise");
  f.set_attr("satellite", warehouse::spacecraft_label(spacecraft_id));
  f.set_attr("date", format_date(day));
  f.set_attr("version", version);
  f.set_attr("time_start", format_utc(win.start));
  f.set_attr("time_end", format_utc(win.end));
  f.set_attr("count", static_cast<std::int64_t>(n));

  const auto add_field = [&](const std::string& name, auto&& get) {
    io::Variable& v = f.add(name, io::DType::kF64, {n});
    for (std::size_t i = 0; i < n; ++i) v.f64()[i] = get(records[i]);
  };
  const auto add_int = [&](const std::string& name, auto&& get) {
    io::Variable& v = f.add(name, io::DType::kI64, {n});
    for (std::size_t i = 0; i < n; ++i) v.i64()[i] = get(records[i]);
  };

  add_field("time", [](const L2Record& r) { return r.timestamp; });
  add_field("lat", [](const L2Record& r) { return r.lat; });
  add_field("lon", [](const L2Record& r) { return r.lon; });
  add_field("soil_moisture", [](const L2Record& r) { return r.sm; });
  add_int("quality_flags", [](const L2Record& r) {
    return static_cast<std::int64_t>(r.quality_flags);
  });
  add_int("spacecraft",
          [](const L2Record& r) { return std::int64_t{r.spacecraft_id}; });
  add_int("prn", [](const L2Record& r) { return std::int64_t{r.prn}; });
  add_field("incidence_deg",
            [](const L2Record& r) { return r.incidence_deg; });
  add_field("sp_rx_gain_db",
            [](const L2Record& r) { return r.sp_rx_gain_db; });
  add_field("ddm_snr_db", [](const L2Record& r) { return r.ddm_snr_db; });
  add_field("reflectivity_db",
            [](const L2Record& r) { return r.reflectivity_db; });
  add_field("peak_power_w", [](const L2Record& r) { return r.peak_power_w; });
  add_field("elevation_m", [](const L2Record& r) { return r.anc.elevation_m; });
  add_field("elevation_std_m",
            [](const L2Record& r) { return r.anc.elevation_std_m; });
  add_field("slope_deg", [](const L2Record& r) { return r.anc.slope_deg; });
  add_field("slope_std_deg",
            [](const L2Record& r) { return r.anc.slope_std_deg; });
  add_field("ndvi", [](const L2Record& r) { return r.anc.ndvi; });
  add_field("vwc_kg_m2", [](const L2Record& r) { return r.anc.vwc_kg_m2; });
  add_field("water_fraction",
            [](const L2Record& r) { return r.anc.water_fraction; });
  add_field("clay_fraction",
            [](const L2Record& r) { return r.anc.clay_fraction; });
  add_field("sand_fraction",
            [](const L2Record& r) { return r.anc.sand_fraction; });
  io::Variable& lc = f.add("landcover", io::DType::kF64,
                           {n, static_cast<std::uint64_t>(kLandcoverClasses)});
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < kLandcoverClasses; ++k) {
      lc.f64()[i * kLandcoverClasses + k] = records[i].anc.landcover(k);
    }
  }

  f.write(path);
  return path;
}

std::vector<L2Record> read_l2(const std::filesystem::path& path) {
  const io::ArrayFile f = io::ArrayFile::read(path);
  if (!f.has_attr("kind") || f.attr_str("kind") != "l2_trackwise") {
    throw std::runtime_error("not a trackwise product file: " + path.string());
  }
  const std::size_t n = static_cast<std::size_t>(f.attr_i64("count"));
  if (f.var("time").elements() != n) {
    throw std::runtime_error("record count mismatch in " + path.string());
  }
  std::vector<L2Record> out(n);
  const auto field = [&](const std::string& name, auto&& set) {
    const io::Variable& v = f.var(name);
    for (std::size_t i = 0; i < n; ++i) set(out[i], v.f64()[i]);
  };
  const auto ints = [&](const std::string& name, auto&& set) {
    const io::Variable& v = f.var(name);
    for (std::size_t i = 0; i < n; ++i) set(out[i], v.i64()[i]);
  };
  field("time", [](L2Record& r, double v) { r.timestamp = v; });
  field("lat", [](L2Record& r, double v) { r.lat = v; });
  field("lon", [](L2Record& r, double v) { r.lon = v; });
  field("soil_moisture", [](L2Record& r, double v) { r.sm = v; });
  ints("quality_flags", [](L2Record& r, std::int64_t v) {
    r.quality_flags = static_cast<std::uint32_t>(v);
  });
  ints("spacecraft", [](L2Record& r, std::int64_t v) {
    r.spacecraft_id = static_cast<int>(v);
  });
  ints("prn",
       [](L2Record& r, std::int64_t v) { r.prn = static_cast<int>(v); });
  field("incidence_deg", [](L2Record& r, double v) { r.incidence_deg = v; });
  field("sp_rx_gain_db", [](L2Record& r, double v) { r.sp_rx_gain_db = v; });
  field("ddm_snr_db", [](L2Record& r, double v) { r.ddm_snr_db = v; });
  field("reflectivity_db",
        [](L2Record& r, double v) { r.reflectivity_db = v; });
  field("peak_power_w", [](L2Record& r, double v) { r.peak_power_w = v; });
  field("elevation_m", [](L2Record& r, double v) { r.anc.elevation_m = v; });
  field("elevation_std_m",
        [](L2Record& r, double v) { r.anc.elevation_std_m = v; });
  field("slope_deg", [](L2Record& r, double v) { r.anc.slope_deg = v; });
  field("slope_std_deg",
        [](L2Record& r, double v) { r.anc.slope_std_deg = v; });
  field("ndvi", [](L2Record& r, double v) { r.anc.ndvi = v; });
  field("vwc_kg_m2", [](L2Record& r, double v) { r.anc.vwc_kg_m2 = v; });
  field("water_fraction",
        [](L2Record& r, double v) { r.anc.water_fraction = v; });
  field("clay_fraction",
        [](L2Record& r, double v) { r.anc.clay_fraction = v; });
  field("sand_fraction",
        [](L2Record& r, double v) { r.anc.sand_fraction = v; });
  const io::Variable& lc = f.var("landcover");
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < kLandcoverClasses; ++k) {
      out[i].anc.landcover(k) = lc.f64()[i * kLandcoverClasses + k];
    }
  }
  return out;
}

std::filesystem::path write_l3(const L3Grid& grid, const std::string& version,
                               const std::filesystem::path& root,
                               Overwrite overwrite) {
  const Date day = date_of(grid.window.start);
  const int hour = hour_of(grid.window.start);
  const double span = grid.window.end - grid.window.start;
  std::string filetype, name;
  if (span == 3600.0 && grid.window.start == hour_start(day, hour)) {
    filetype = "hourlySoilMoisture";
    name = l3_hourly_file_name(day, hour, version);
  } else if (span == 86400.0 && grid.window.start == day_start(day)) {
    filetype = "dailySoilMoisture";
    name = l3_daily_file_name(day, version);
  } else {
    throw std::invalid_argument(
        "grid window must span exactly one hour or one UTC day");
  }

  const std::filesystem::path dir = l3_day_dir(root, version, filetype, day);
  std::filesystem::create_directories(dir);
  const std::filesystem::path path = dir / name;
  check_collision(path, overwrite);

  const io::Raster<double>& cells = grid.cells;
  const std::uint64_t nr = static_cast<std::uint64_t>(cells.window_rows());
  const std::uint64_t nc = static_cast<std::uint64_t>(cells.window_cols());

  io::ArrayFile f;
  f.set_attr("kind", "l3_grid");
  f.set_attr("version", version);
  f.set_attr("cadence", filetype == "hourlySoilMoisture" ? "hourly" : "daily");
  f.set_attr("time_start", format_utc(grid.window.start));
  f.set_attr("time_end", format_utc(grid.window.end));
  f.set_attr("time_start_s", grid.window.start);
  f.set_attr("time_end_s", grid.window.end);
  f.set_attr("cell_km",
             static_cast<std::int64_t>(cells.spec().nominal_cell_km));
  f.set_attr("rows", static_cast<std::int64_t>(cells.spec().rows));
  f.set_attr("cols", static_cast<std::int64_t>(cells.spec().cols));
  f.set_attr("window_row0", static_cast<std::int64_t>(cells.row0()));
  f.set_attr("window_col0", static_cast<std::int64_t>(cells.col0()));
  f.set_attr("window_rows", static_cast<std::int64_t>(nr));
  f.set_attr("window_cols", static_cast<std::int64_t>(nc));
  f.set_attr("missing_value", kMissing);

  io::Variable& lat = f.add("latitude", io::DType::kF64, {nr});
  for (std::uint64_t r = 0; r < nr; ++r) {
    lat.f64()[r] = grid::cell_center({cells.row0() + static_cast<long>(r),
                                      cells.col0()},
                                     cells.spec())
                       .lat;
  }
  io::Variable& lon = f.add("longitude", io::DType::kF64, {nc});
  for (std::uint64_t c = 0; c < nc; ++c) {
    lon.f64()[c] = grid::cell_center({cells.row0(),
                                      cells.col0() + static_cast<long>(c)},
                                     cells.spec())
                       .lon;
  }

  io::Variable& sm = f.add("soil_moisture_level3", io::DType::kF64, {nr, nc});
  io::Variable& flags = f.add("surface_flag", io::DType::kU8, {nr, nc});
  io::Variable& count = f.add("sample_count", io::DType::kI32, {nr, nc});
  for (std::uint64_t r = 0; r < nr; ++r) {
    for (std::uint64_t c = 0; c < nc; ++c) {
      const grid::CellIndex cell{cells.row0() + static_cast<long>(r),
                                 cells.col0() + static_cast<long>(c)};
      const std::uint64_t i = r * nc + c;
      sm.f64()[i] = cells.at(cell, L3Grid::kSm);
      flags.u8()[i] = grid.flags(cell);
      const double cnt = cells.at(cell, L3Grid::kCount);
      count.i32()[i] =
          cells.is_missing(cnt) ? 0 : static_cast<std::int32_t>(cnt);
    }
  }

  f.write(path);
  return path;
}

L3Grid read_l3(const std::filesystem::path& path) {
  const io::ArrayFile f = io::ArrayFile::read(path);
  if (!f.has_attr("kind") || f.attr_str("kind") != "l3_grid") {
    throw std::runtime_error("not a gridded product file: " + path.string());
  }
  const grid::GridSpec spec =
      grid::GridSpec::ease2(static_cast<int>(f.attr_i64("cell_km")));
  if (spec.rows != f.attr_i64("rows") || spec.cols != f.attr_i64("cols")) {
    throw std::runtime_error("grid dimensions mismatch in " + path.string());
  }
  const long row0 = f.attr_i64("window_row0");
  const long col0 = f.attr_i64("window_col0");
  const long nr = f.attr_i64("window_rows");
  const long nc = f.attr_i64("window_cols");
  io::Raster<double> cells(spec, row0, col0, nr, nc, 3, kMissing);

  const io::Variable& sm = f.var("soil_moisture_level3");
  const io::Variable& flags = f.var("surface_flag");
  const io::Variable& count = f.var("sample_count");
  if (sm.elements() != static_cast<std::size_t>(nr * nc)) {
    throw std::runtime_error("grid payload size mismatch in " + path.string());
  }
  for (long r = 0; r < nr; ++r) {
    for (long c = 0; c < nc; ++c) {
      const grid::CellIndex cell{row0 + r, col0 + c};
      const std::size_t i = static_cast<std::size_t>(r * nc + c);
      cells.set(cell, sm.f64()[i], L3Grid::kSm);
      cells.set(cell, static_cast<double>(count.i32()[i]), L3Grid::kCount);
      cells.set(cell, static_cast<double>(flags.u8()[i]), L3Grid::kFlags);
    }
  }
  return {std::move(cells),
          {f.attr_f64("time_start_s"), f.attr_f64("time_end_s")}};
}

}  // namespace gnssr::products
