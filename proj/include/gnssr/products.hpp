#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "gnssr/conditioning.hpp"
#include "gnssr/network.hpp"
#include "gnssr/raster.hpp"
#include "gnssr/samples.hpp"
#include "gnssr/timeutil.hpp"
#include "gnssr/warehouse.hpp"

namespace gnssr::products {

// ----------------------------------------------------------- L2 (trackwise)

// One trackwise retrieval: the model output plus the observation and surface
// context it was made under. The DDM array itself is not echoed, to bound
// storage; everything else a downstream user would need to re-filter or
// re-grid the retrievals is.
struct L2Record {
  UtcSeconds timestamp = 0.0;
  double lat = 0.0;
  double lon = 0.0;
  double sm = kMissing;             // m3/m3, >= 0 or the sentinel
  std::uint32_t quality_flags = 0;  // source observation flags, propagated
  int spacecraft_id = 0;            // 1..8
  int prn = 0;                      // 1..32

  // Observation-side context.
  double incidence_deg = kMissing;
  double sp_rx_gain_db = kMissing;
  double ddm_snr_db = kMissing;
  double reflectivity_db = kMissing;
  double peak_power_w = kMissing;

  // Surface-side context.
  AncillaryRecord anc;
};

L2Record make_l2_record(const Sample& s, double sm);

// Applies the observation filter chain to one day's samples, runs batched
// inference on the survivors, and returns records keyed by spacecraft.
// Every spacecraft present in `samples` gets an entry, possibly empty.
// Within each set, records are grouped by transmitter then ordered in time.
// The total record count equals the filter report's kept count.
std::map<int, std::vector<L2Record>> retrieve_day(
    const std::vector<Sample>& samples, nn::Network& net,
    const cond::NormStats& stats, const cond::FilterConfig& filter,
    cond::FilterReport* report = nullptr);

// ------------------------------------------------------------ surface flags

inline constexpr std::uint8_t kSurfaceCoastal = 1u << 0;
inline constexpr std::uint8_t kSurfaceUrban = 1u << 1;
inline constexpr std::uint8_t kSurfaceSnowIce = 1u << 2;
inline constexpr std::uint8_t kSurfaceHighElevation = 1u << 3;
inline constexpr std::uint8_t kSurfaceDenseVegetation = 1u << 4;

struct SurfaceFlagInputs {
  double coastal_distance_km = 1e12;
  double urban_fraction = 0.0;   // in [0, 1]
  int dominant_igbp_class = 0;   // 1..17, 0 = unknown
  double elevation_m = 0.0;
  double vwc_kg_m2 = 0.0;
};

// Ambient-surface condition word. All comparisons are strict, so inputs
// exactly at a threshold leave the bit clear. Bits 5-7 stay zero. The
// high-elevation bit additionally means the cell's retrieval is withheld.
std::uint8_t compute_surface_flags(const SurfaceFlagInputs& x);

// Aggregates the 3 km ancillary rasters up to 9 km cells and answers
// per-cell surface-flag queries. Coastal distance is measured from the 9 km
// cell center to the nearest 3 km cell whose open-water fraction exceeds
// 0.5 (a raster proxy for a coastline dataset). Cells with no ancillary
// coverage report a zero word.
class SurfaceFlagMap {
 public:
  SurfaceFlagMap(const warehouse::AncillaryStore& ancillary,
                 const warehouse::VwcModel& vwc);

  SurfaceFlagInputs inputs_for(const grid::CellIndex& c9) const;
  std::uint8_t flags_for(const grid::CellIndex& c9) const;

 private:
  const warehouse::AncillaryStore& anc_;
  warehouse::VwcModel vwc_;
  std::vector<grid::GeoPoint> water_centers_;
};

// --------------------------------------------------------------- L3 (grids)

// Half-open [start, end) in UTC seconds.
struct TimeWindow {
  UtcSeconds start = 0.0;
  UtcSeconds end = 0.0;

  bool contains(UtcSeconds t) const { return start <= t && t < end; }
};

enum class GridMethod { kEqual, kNearest, kIdw };

const char* grid_method_name(GridMethod m);
GridMethod parse_grid_method(const std::string& name);  // throws on unknown

struct GridConfig {
  GridMethod method = GridMethod::kEqual;
  double idw_power = 2.0;
};

// Gridded soil moisture on the 9 km grid, stored as a window of the global
// grid covering the aggregated retrievals. Layers: cell mean, sample count,
// surface-flag word.
struct L3Grid {
  static constexpr int kSm = 0;
  static constexpr int kCount = 1;
  static constexpr int kFlags = 2;

  io::Raster<double> cells;
  TimeWindow window;

  double sm(const grid::CellIndex& c) const { return cells.at(c, kSm); }
  double count(const grid::CellIndex& c) const { return cells.at(c, kCount); }
  std::uint8_t flags(const grid::CellIndex& c) const {
    const double v = cells.at(c, kFlags);
    return cells.is_missing(v) ? 0 : static_cast<std::uint8_t>(v);
  }
};

// Aggregates the retrievals falling inside the window into cells. equal:
// arithmetic mean; nearest: the retrieval closest to the cell center, ties
// to the earlier timestamp then the lower spacecraft id; idw: inverse
// distance to the cell center with the configured exponent, a zero-distance
// retrieval taking the cell exclusively. Retrievals with sentinel soil
// moisture are ignored. The raster window tightly bounds the used
// retrievals (a 1x1 sentinel window when there are none); the surface-flag
// layer is zeroed and filled later.
L3Grid grid_l3(const std::vector<L2Record>& records, const TimeWindow& window,
               const grid::GridSpec& spec, const GridConfig& cfg = {});

// Fills the surface-flag layer over the grid window and withholds cell
// values where the high-elevation bit is set.
void apply_surface_flags(L3Grid& grid, const SurfaceFlagMap& flags);

// ------------------------------------------------------------ product files

// Exact release naming.
//   L2:        aggregateSoilMoisture_muon_{satelliteID}_{YYYYMMDD}_{version}.nc4
//   L3 hourly: hourlySoilMoisture_muon_CYGNSS_{YYYYMMDDTHH}Z_{version}.nc4
//   L3 daily:  dailySoilMoisture_muon_CYGNSS_{YYYYMMDD}_{version}.nc4
// under
//   {root}/{version}/trackwiseSoilMoisture/{satelliteID}/{YYYY-MM-DD}/
//   {root}/{version}/griddedSoilMoisture/{filetype}/CYGNSS/{YYYY-MM-DD}/
std::string l2_file_name(int spacecraft_id, const Date& day,
                         const std::string& version);
std::string l3_hourly_file_name(const Date& day, int hour,
                                const std::string& version);
std::string l3_daily_file_name(const Date& day, const std::string& version);

std::filesystem::path l2_day_dir(const std::filesystem::path& root,
                                 const std::string& version, int spacecraft_id,
                                 const Date& day);
std::filesystem::path l3_day_dir(const std::filesystem::path& root,
                                 const std::string& version,
                                 const std::string& filetype, const Date& day);

// Release versions look like v1.0; the decimal part increments on minor
// revisions. Throws on anything else.
void validate_version(const std::string& version);

enum class ProductKind { kL2Daily, kL3Hourly, kL3Daily };

struct ParsedName {
  ProductKind kind = ProductKind::kL2Daily;
  std::string satellite;  // CYxxx for L2, CYGNSS for L3
  Date day;
  int hour = -1;  // hourly files only
  std::string version;

  TimeWindow window() const;
};

// Inverse of the naming functions; throws on anything off-template.
ParsedName parse_product_name(const std::string& file_name);

enum class Overwrite { kForbid, kAllow };

// Writers create the directory chain, refuse to clobber an existing file
// unless overwrite is allowed (the backfill path), and produce byte-stable
// output for identical inputs. Read-back is value-exact.
std::filesystem::path write_l2_day(const std::vector<L2Record>& records,
                                   int spacecraft_id, const Date& day,
                                   const std::string& version,
                                   const std::filesystem::path& root,
                                   Overwrite overwrite = Overwrite::kForbid);
std::vector<L2Record> read_l2(const std::filesystem::path& path);

// The grid's time window must be exactly one hour or one UTC calendar day;
// that choice selects the hourly or daily template.
std::filesystem::path write_l3(const L3Grid& grid, const std::string& version,
                               const std::filesystem::path& root,
                               Overwrite overwrite = Overwrite::kForbid);
L3Grid read_l3(const std::filesystem::path& path);

}  // namespace gnssr::products
