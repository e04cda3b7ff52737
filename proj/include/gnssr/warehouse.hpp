#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gnssr/raster.hpp"
#include "gnssr/samples.hpp"

namespace gnssr::warehouse {

// GPS L1 carrier wavelength, c / 1575.42 MHz.
inline constexpr double kGpsL1WavelengthM = 299792458.0 / 1575.42e6;

// Transmit EIRP (power times antenna gain, watts) per GPS PRN.
struct CalibrationTable {
  double default_eirp_w = 500.0;
  std::map<int, double> prn_eirp_w;

  double eirp_w(int prn) const {
    const auto it = prn_eirp_w.find(prn);
    return it == prn_eirp_w.end() ? default_eirp_w : it->second;
  }
};

// Bistatic radar equation solved for surface reflectivity, in dB.
double reflectivity_db(double peak_power_w, double range_tx_sp_m,
                       double range_sp_rx_m, double eirp_w,
                       double rx_gain_db);

// Noise floor estimate: mean of the first two delay rows, which precede the
// specular return.
double noise_floor_w(const io::DdmMatrix& ddm);

// Interference check: any full Doppler column above factor * noise floor.
bool rfi_flagged(const io::DdmMatrix& ddm, double noise_floor,
                 double factor);

DdmMetrics compute_ddm_metrics(const io::DdmObservation& obs,
                               const CalibrationTable& cal,
                               double rfi_factor = 5.0);

// NDVI -> vegetation water content, blended over landcover fractions:
// vwc = sum_k frac_k * stem_k * max(ndvi - origin, 0) / (1 - origin).
struct VwcModel {
  double ndvi_origin = 0.1;
  LandcoverVec stem_factor_kg_m2;

  static VwcModel defaults();
};

double derive_vwc(double ndvi, const LandcoverVec& landcover_frac,
                  const VwcModel& model);

// Histogram a fine-pixel class map (values 1..17, 0 = missing) into
// per-class fractions on the target grid. Output layers k = class k+1;
// cells with no valid pixels stay at the sentinel. Pixels with classes
// outside 0..17 are a data error.
io::Raster<double> derive_fractional_landcover(
    const io::Raster<std::uint8_t>& class_map,
    const grid::GridSpec& target_spec);

// Static surface fields for the region of interest, all on the 3 km grid.
// File layout under one directory:
//   elevation.grd  (layers: mean m, std m)
//   slope.grd      (layers: mean deg, std deg)
//   ndvi.grd
//   water.grd      (open-water fraction)
//   soiltex.grd    (layers: clay fraction, sand fraction)
//   landcover.grd  (17 layers of class fractions)
class AncillaryStore {
 public:
  explicit AncillaryStore(const std::filesystem::path& dir);

  // vwc_kg_m2 is left missing; it is derived at matchup time.
  AncillaryRecord at(const grid::CellIndex& c3) const;
  const io::Raster<double>& water() const { return water_; }

 private:
  io::Raster<double> elevation_, slope_, ndvi_, water_, soiltex_, landcover_;
};

// Daily reference soil-moisture grids on the 9 km grid. Per-day files
// target_YYYYMMDD.grd with layer 0 = soil moisture (sentinel where
// unsuccessful) and layer 1 = flag bits (sentinel where no overpass).
class TargetStore {
 public:
  explicit TargetStore(std::filesystem::path dir);

  std::optional<TargetValue> at(const Date& day,
                                const grid::CellIndex& c9) const;
  static std::filesystem::path day_file(const std::filesystem::path& dir,
                                        const Date& day);

 private:
  std::filesystem::path dir_;
  mutable std::map<std::int64_t, std::shared_ptr<io::Raster<double>>> cache_;
};

// Matchup policy: how far (in whole days) a reference grid may be from the
// observation's UTC day. 0 = same day only; larger values search outward,
// nearest day first.
struct MatchupPolicy {
  int max_day_offset = 0;
};

struct BuildStats {
  std::size_t observations_in = 0;
  std::size_t with_target = 0;
  std::size_t incomplete_ancillary = 0;
};

std::vector<Sample> build_samples(const std::vector<io::DdmObservation>& obs,
                                  const AncillaryStore& ancillary,
                                  const TargetStore* targets,
                                  const CalibrationTable& cal,
                                  const VwcModel& vwc,
                                  const MatchupPolicy& matchup = {},
                                  double rfi_factor = 5.0,
                                  BuildStats* stats = nullptr);

std::string spacecraft_label(int id);  // 1 -> "CY001"; validates 1..8

// Per-day, per-spacecraft sample persistence under
// {root}/YYYY-MM-DD/samples_CY00X_YYYYMMDD.smp.
class SampleStore {
 public:
  explicit SampleStore(std::filesystem::path root) : root_(std::move(root)) {}

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path day_file(const Date& d, int spacecraft_id) const;
  bool has_day(const Date& d, int spacecraft_id) const;

  void write_day(const Date& d, int spacecraft_id,
                 const std::vector<Sample>& samples,
                 const std::map<std::string, std::string>& provenance = {});
  std::vector<Sample> read_day(const Date& d, int spacecraft_id) const;

  // All samples in [first, last], ascending (date, spacecraft) file order.
  std::vector<Sample> read_range(const Date& first, const Date& last) const;

 private:
  std::filesystem::path root_;
};

}  // namespace gnssr::warehouse
