#include "gnssr/geogrid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace gnssr::grid {

namespace {

constexpr double kDeg = M_PI / 180.0;

// q(phi): Snyder's authalic function scaled so q(90 deg) = kQp below.
double authalic_q(double sin_phi) {
  const double e = std::sqrt(kWgs84E2);
  const double es = e * sin_phi;
  return (1.0 - kWgs84E2) *
         (sin_phi / (1.0 - es * es) -
          (0.5 / e) * std::log((1.0 - es) / (1.0 + es)));
}

const double kQp = authalic_q(1.0);

// Latitude with the given authalic q, via the series expansion in the
// authalic latitude beta plus one Newton polish step to machine precision.
double lat_from_q(double q) {
  const double ratio = std::clamp(q / kQp, -1.0, 1.0);
  const double beta = std::asin(ratio);
  const double e2 = kWgs84E2, e4 = e2 * e2, e6 = e4 * e2;
  double phi = beta +
               (e2 / 3.0 + 31.0 * e4 / 180.0 + 517.0 * e6 / 5040.0) *
                   std::sin(2.0 * beta) +
               (23.0 * e4 / 360.0 + 251.0 * e6 / 3780.0) *
                   std::sin(4.0 * beta) +
               (761.0 * e6 / 45360.0) * std::sin(6.0 * beta);
  // dq/dphi = (1-e2)*(1-e2 s^2)^-2 * 2c ... evaluate directly.
  const double s = std::sin(phi), c = std::cos(phi);
  const double denom = 1.0 - kWgs84E2 * s * s;
  const double dq = 2.0 * (1.0 - kWgs84E2) * c / (denom * denom);
  if (dq > 1e-12) phi -= (authalic_q(s) - q) / dq;
  return std::clamp(phi / kDeg, -90.0, 90.0);
}

void require_ease2_or_degree(const GridSpec& spec) {
  if (spec.rows <= 0 || spec.cols <= 0) {
    throw std::invalid_argument("grid spec has empty dimensions");
  }
}

}  // namespace

double authalic_radius_m() {
  static const double r = kWgs84A * std::sqrt(kQp / 2.0);
  return r;
}

double earth_surface_area_m2() {
  const double r = authalic_radius_m();
  return 4.0 * M_PI * r * r;
}

double normalize_lon(double lon_deg) {
  if (!std::isfinite(lon_deg)) {
    throw std::invalid_argument("longitude is not finite");
  }
  double lon = std::fmod(lon_deg + 180.0, 360.0);
  if (lon < 0.0) lon += 360.0;
  return lon - 180.0;
}

GeoPoint::GeoPoint(double lat_deg, double lon_deg) {
  if (!std::isfinite(lat_deg) || lat_deg < -90.0 || lat_deg > 90.0) {
    throw std::invalid_argument("latitude out of range: " +
                                std::to_string(lat_deg));
  }
  lat = lat_deg;
  lon = normalize_lon(lon_deg);
}

GridSpec GridSpec::ease2(int cell_km) {
  GridSpec s;
  s.kind = GridKind::kEase2Global;
  s.nominal_cell_km = cell_km;
  switch (cell_km) {
    case 36: s.rows = 406;  s.cols = 964;   break;
    case 9:  s.rows = 1624; s.cols = 3856;  break;
    case 3:  s.rows = 4872; s.cols = 11568; break;
    default:
      throw std::invalid_argument("unsupported equal-area cell size: " +
                                  std::to_string(cell_km) + " km");
  }
  return s;
}

GridSpec GridSpec::degree_regular(double step_deg) {
  if (!(step_deg > 0.0) || step_deg > 180.0) {
    throw std::invalid_argument("degree step out of range");
  }
  const long rows = std::lround(180.0 / step_deg);
  if (rows < 1 || std::abs(rows * step_deg - 180.0) > 1e-6) {
    throw std::invalid_argument("degree step must divide 180");
  }
  GridSpec s;
  s.kind = GridKind::kDegreeRegular;
  s.degree_step = step_deg;
  s.rows = rows;
  s.cols = 2 * rows;
  return s;
}

bool contains(const GridSpec& spec, const CellIndex& c) {
  return c.row >= 0 && c.row < spec.rows && c.col >= 0 && c.col < spec.cols;
}

CellIndex cell_of(const GeoPoint& p, const GridSpec& spec) {
  require_ease2_or_degree(spec);
  CellIndex c;
  c.col = static_cast<long>(
      std::floor(spec.cols * (p.lon + 180.0) / 360.0));
  c.col = std::clamp(c.col, 0L, spec.cols - 1);
  double frac;  // 0 at the north edge, 1 at the south edge
  if (spec.kind == GridKind::kEase2Global) {
    frac = 0.5 * (1.0 - authalic_q(std::sin(p.lat * kDeg)) / kQp);
  } else {
    frac = (90.0 - p.lat) / 180.0;
  }
  c.row = static_cast<long>(std::floor(spec.rows * frac));
  c.row = std::clamp(c.row, 0L, spec.rows - 1);
  return c;
}

GeoPoint cell_center(const CellIndex& c, const GridSpec& spec) {
  require_ease2_or_degree(spec);
  if (!contains(spec, c)) {
    throw std::out_of_range("cell (" + std::to_string(c.row) + ", " +
                            std::to_string(c.col) + ") outside grid");
  }
  const double lon =
      -180.0 + 360.0 * (static_cast<double>(c.col) + 0.5) / spec.cols;
  double lat;
  if (spec.kind == GridKind::kEase2Global) {
    const double frac = (static_cast<double>(c.row) + 0.5) / spec.rows;
    lat = lat_from_q(kQp * (1.0 - 2.0 * frac));
  } else {
    lat = 90.0 - 180.0 * (static_cast<double>(c.row) + 0.5) / spec.rows;
  }
  return GeoPoint(lat, lon);
}

double cell_area_km2(const GridSpec& spec, long row) {
  require_ease2_or_degree(spec);
  const double r_km = authalic_radius_km();
  if (spec.kind == GridKind::kEase2Global) {
    return 4.0 * M_PI * r_km * r_km /
           (static_cast<double>(spec.rows) * static_cast<double>(spec.cols));
  }
  if (row < 0 || row >= spec.rows) {
    throw std::out_of_range("row outside grid: " + std::to_string(row));
  }
  const double top = (90.0 - 180.0 * row / spec.rows) * kDeg;
  const double bot = (90.0 - 180.0 * (row + 1) / spec.rows) * kDeg;
  const double dlon = 2.0 * M_PI / spec.cols;
  return r_km * r_km * dlon * (std::sin(top) - std::sin(bot));
}

double great_circle_km(const GeoPoint& a, const GeoPoint& b) {
  const double la = a.lat * kDeg, lb = b.lat * kDeg;
  const double sdl = std::sin(0.5 * (lb - la));
  const double sdo = std::sin(0.5 * (b.lon - a.lon) * kDeg);
  const double h = sdl * sdl + std::cos(la) * std::cos(lb) * sdo * sdo;
  return 2.0 * authalic_radius_km() *
         std::asin(std::min(1.0, std::sqrt(h)));
}

std::vector<CellIndex> cells_within_radius(const GeoPoint& center,
                                           double radius_km,
                                           const GridSpec& spec) {
  require_ease2_or_degree(spec);
  if (!(radius_km >= 0.0)) {
    throw std::invalid_argument("radius must be non-negative");
  }
  const double r = authalic_radius_km();
  const double ang = radius_km / r;  // radians
  const double dlat = ang / kDeg;

  const double lat_hi = std::min(90.0, center.lat + dlat);
  const double lat_lo = std::max(-90.0, center.lat - dlat);
  long row_lo = cell_of(GeoPoint(lat_hi, center.lon), spec).row - 1;
  long row_hi = cell_of(GeoPoint(lat_lo, center.lon), spec).row + 1;
  row_lo = std::max(row_lo, 0L);
  row_hi = std::min(row_hi, spec.rows - 1);

  const double sin_c = std::sin(center.lat * kDeg);
  const double cos_c = std::cos(center.lat * kDeg);
  const double cos_ang = std::cos(std::min(ang, M_PI));

  std::vector<CellIndex> out;
  for (long row = row_lo; row <= row_hi; ++row) {
    const GeoPoint rc = cell_center(CellIndex{row, 0}, spec);
    const double sin_r = std::sin(rc.lat * kDeg);
    const double cos_r = std::cos(rc.lat * kDeg);
    long col_span;  // max |column offset| from the center column, plus margin
    const double denom = cos_c * cos_r;
    if (denom < 1e-12) {
      col_span = spec.cols;  // a pole band: check every column
    } else {
      const double cos_dl = (cos_ang - sin_c * sin_r) / denom;
      if (cos_dl <= -1.0) {
        col_span = spec.cols;
      } else if (cos_dl >= 1.0) {
        col_span = 1;
      } else {
        const double dl_deg = std::acos(cos_dl) / kDeg;
        col_span =
            static_cast<long>(std::ceil(dl_deg / (360.0 / spec.cols))) + 1;
      }
    }
    const long col0 = cell_of(GeoPoint(rc.lat, center.lon), spec).col;
    const long lo = col0 - col_span, hi = col0 + col_span;
    const bool full = (hi - lo + 1) >= spec.cols;
    const long begin = full ? 0 : lo;
    const long end = full ? spec.cols - 1 : hi;
    for (long c = begin; c <= end; ++c) {
      long col = c % spec.cols;
      if (col < 0) col += spec.cols;
      const GeoPoint cc = cell_center(CellIndex{row, col}, spec);
      if (great_circle_km(center, cc) <= radius_km) {
        out.push_back(CellIndex{row, col});
      }
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace gnssr::grid
