#pragma once

#include <compare>
#include <cstdint>
#include <vector>

namespace gnssr::grid {

// WGS84 ellipsoid and derived authalic constants.
inline constexpr double kWgs84A = 6378137.0;
inline constexpr double kWgs84F = 1.0 / 298.257223563;
inline constexpr double kWgs84E2 = kWgs84F * (2.0 - kWgs84F);

// Authalic sphere radius (same total surface area as the ellipsoid).
double authalic_radius_m();
inline double authalic_radius_km() { return authalic_radius_m() / 1000.0; }
// 4*pi*R^2 of the authalic sphere.
double earth_surface_area_m2();

struct GeoPoint {
  double lat = 0.0;  // degrees north, [-90, 90]
  double lon = 0.0;  // degrees east, normalized to [-180, 180)

  GeoPoint() = default;
  GeoPoint(double lat_deg, double lon_deg);  // validates and normalizes

  auto operator<=>(const GeoPoint&) const = default;
};

// Wrap an arbitrary finite longitude into [-180, 180).
double normalize_lon(double lon_deg);

enum class GridKind : std::uint8_t { kEase2Global, kDegreeRegular };

// A global grid definition. The equal-area grids follow the EASE-Grid 2.0
// cylindrical projection geometry with the published column counts; rows
// partition the full [-90, 90] latitude span into equal-area bands so that
// every cell has exactly the same area. Columns are identical to the
// published registration; rows are slightly taller than the polar-truncated
// registration some archives use.
struct GridSpec {
  GridKind kind = GridKind::kEase2Global;
  int nominal_cell_km = 0;   // 3, 9 or 36 for equal-area grids, else 0
  long rows = 0;
  long cols = 0;
  double degree_step = 0.0;  // kDegreeRegular only

  static GridSpec ease2(int cell_km);  // cell_km in {3, 9, 36}
  static GridSpec degree_regular(double step_deg);

  bool operator==(const GridSpec&) const = default;
};

struct CellIndex {
  long row = 0;
  long col = 0;

  auto operator<=>(const CellIndex&) const = default;
};

bool contains(const GridSpec& spec, const CellIndex& c);

// Point -> containing cell. Total over the valid domain: every point on the
// globe (poles included) maps to exactly one cell.
CellIndex cell_of(const GeoPoint& p, const GridSpec& spec);

// Cell -> its center point. Throws if the index is outside the grid.
GeoPoint cell_center(const CellIndex& c, const GridSpec& spec);

// Area of one cell in km^2. Constant per grid for equal-area grids; for
// degree grids it depends on the row band.
double cell_area_km2(const GridSpec& spec, long row = 0);

// Great-circle distance on the authalic sphere.
double great_circle_km(const GeoPoint& a, const GeoPoint& b);

// All cells whose centers lie within radius_km (inclusive) of center,
// sorted row-major. radius_km must be non-negative.
std::vector<CellIndex> cells_within_radius(const GeoPoint& center,
                                           double radius_km,
                                           const GridSpec& spec);

}  // namespace gnssr::grid
