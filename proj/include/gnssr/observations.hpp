#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "gnssr/geogrid.hpp"
#include "gnssr/timeutil.hpp"

namespace gnssr::io {

inline constexpr int kDelayBins = 17;    // DDM rows
inline constexpr int kDopplerBins = 11;  // DDM columns

using DdmMatrix = Eigen::Matrix<double, kDelayBins, kDopplerBins>;

// Source quality flag bits attached by the observation provider.
inline constexpr std::uint32_t kObsFlagUnusable = 1u << 0;
inline constexpr std::uint32_t kObsFlagCalibrationEvent = 1u << 1;

// One delay-Doppler map with its geolocation and receiver metadata.
struct DdmObservation {
  UtcSeconds timestamp = 0.0;
  double lat = 0.0;  // specular point
  double lon = 0.0;
  DdmMatrix ddm = DdmMatrix::Zero();  // analog power, watts
  double ddm_snr_db = 0.0;
  double sp_rx_gain_db = 0.0;
  double incidence_deg = 0.0;
  double range_tx_sp_m = 0.0;  // transmitter to specular point
  double range_sp_rx_m = 0.0;  // specular point to receiver
  int spacecraft_id = 0;       // 1..8
  int prn = 0;                 // 1..32
  std::uint32_t quality_flags = 0;
  int sample_rate_hz = 1;  // 1 or 2
};

struct TrackReadResult {
  std::vector<DdmObservation> observations;
  std::size_t records_total = 0;
  std::size_t records_skipped = 0;
  bool checksum_ok = true;
};

// Binary track files: fixed-size records with a header count and a trailing
// checksum. The reader validates each record independently, so single
// corrupted records are skipped (and counted) instead of aborting the file.
void write_track_file(const std::filesystem::path& path,
                      const std::vector<DdmObservation>& observations);
TrackReadResult read_track_file(const std::filesystem::path& path);

// Where daily track files come from. The local source reads a directory
// tree; the stub source serves canned fixtures and logs every request, for
// exercising the fetch path in tests without a network.
class TrackFileSource {
 public:
  virtual ~TrackFileSource() = default;
  // Sorted list of track files for the day; empty if none.
  virtual std::vector<std::filesystem::path> files_for_day(const Date& d) = 0;
};

class LocalTrackSource : public TrackFileSource {
 public:
  explicit LocalTrackSource(std::filesystem::path root)
      : root_(std::move(root)) {}
  std::vector<std::filesystem::path> files_for_day(const Date& d) override;
  const std::filesystem::path& root() const { return root_; }
  // {root}/tracks/YYYY-MM-DD
  std::filesystem::path day_dir(const Date& d) const;

 private:
  std::filesystem::path root_;
};

class StubTrackService : public TrackFileSource {
 public:
  explicit StubTrackService(std::filesystem::path fixture_root)
      : local_(std::move(fixture_root)) {}
  std::vector<std::filesystem::path> files_for_day(const Date& d) override;
  const std::vector<Date>& requests() const { return requests_; }

 private:
  LocalTrackSource local_;
  std::vector<Date> requests_;
};

}  // namespace gnssr::io
