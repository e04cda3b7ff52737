#include "gnssr/observations.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "gnssr/bytes.hpp"
#include "gnssr/fsutil.hpp"
#include "gnssr/hashing.hpp"

namespace gnssr::io {

namespace {
constexpr char kMagic[8] = {'G', 'R', 'O', 'B', '0', '0', '0', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kRecordBytes =
    8 * 3 + 8 * kDelayBins * kDopplerBins + 8 * 5 + 2 + 2 + 4 + 1 + 7;

void put_record(ByteWriter& w, const DdmObservation& o) {
  w.f64(o.timestamp);
  w.f64(o.lat);
  w.f64(o.lon);
  for (int r = 0; r < kDelayBins; ++r) {
    for (int c = 0; c < kDopplerBins; ++c) w.f64(o.ddm(r, c));
  }
  w.f64(o.ddm_snr_db);
  w.f64(o.sp_rx_gain_db);
  w.f64(o.incidence_deg);
  w.f64(o.range_tx_sp_m);
  w.f64(o.range_sp_rx_m);
  w.u16(static_cast<std::uint16_t>(o.spacecraft_id));
  w.u16(static_cast<std::uint16_t>(o.prn));
  w.u32(o.quality_flags);
  w.u8(static_cast<std::uint8_t>(o.sample_rate_hz));
  const std::uint8_t pad[7] = {};
  w.raw(pad, sizeof pad);
}

bool get_record(ByteReader& r, DdmObservation* o) {
  o->timestamp = r.f64();
  o->lat = r.f64();
  o->lon = r.f64();
  for (int rr = 0; rr < kDelayBins; ++rr) {
    for (int cc = 0; cc < kDopplerBins; ++cc) o->ddm(rr, cc) = r.f64();
  }
  o->ddm_snr_db = r.f64();
  o->sp_rx_gain_db = r.f64();
  o->incidence_deg = r.f64();
  o->range_tx_sp_m = r.f64();
  o->range_sp_rx_m = r.f64();
  o->spacecraft_id = r.u16();
  o->prn = r.u16();
  o->quality_flags = r.u32();
  o->sample_rate_hz = r.u8();
  std::uint8_t pad[7];
  r.raw(pad, sizeof pad);

  if (!std::isfinite(o->timestamp) || !std::isfinite(o->lat) ||
      !std::isfinite(o->lon) || !std::isfinite(o->ddm_snr_db) ||
      !std::isfinite(o->sp_rx_gain_db) || !std::isfinite(o->incidence_deg) ||
      !std::isfinite(o->range_tx_sp_m) || !std::isfinite(o->range_sp_rx_m)) {
    return false;
  }
  if (o->lat < -90.0 || o->lat > 90.0) return false;
  if (o->lon < -180.0 || o->lon >= 180.0) return false;
  if (o->incidence_deg < 0.0 || o->incidence_deg >= 90.0) return false;
  if (!(o->range_tx_sp_m > 0.0) || !(o->range_sp_rx_m > 0.0)) return false;
  if (o->spacecraft_id < 1 || o->spacecraft_id > 8) return false;
  if (o->prn < 1 || o->prn > 32) return false;
  if (o->sample_rate_hz != 1 && o->sample_rate_hz != 2) return false;
  if (!o->ddm.allFinite() || (o->ddm.array() < 0.0).any()) return false;
  return true;
}
}  // namespace

void write_track_file(const std::filesystem::path& path,
                      const std::vector<DdmObservation>& observations) {
  ByteWriter w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(observations.size()));
  for (const auto& o : observations) put_record(w, o);
  w.u64(fnv1a(w.bytes().data(), w.size()));
  write_bytes_atomic(path, w.bytes());
}

TrackReadResult read_track_file(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  if (bytes.size() < sizeof kMagic + 8 ||
      std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw std::runtime_error("not a track file: " + path.string());
  }

  TrackReadResult out;
  std::size_t body = bytes.size();
  if (bytes.size() >= sizeof kMagic + 8 + 8) {
    std::uint64_t stored;
    std::memcpy(&stored, bytes.data() + bytes.size() - 8, 8);
    if (fnv1a(bytes.data(), bytes.size() - 8) == stored) {
      body = bytes.size() - 8;
    } else {
      out.checksum_ok = false;  // salvage whatever validates record-by-record
    }
  } else {
    out.checksum_ok = false;
  }

  ByteReader r(std::span(bytes.data(), body));
  char magic[8];
  r.raw(magic, sizeof magic);
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw std::runtime_error("unsupported track file version " +
                             std::to_string(version) + ": " + path.string());
  }
  const std::uint32_t declared = r.u32();
  out.records_total = declared;
  out.observations.reserve(declared);
  for (std::uint32_t i = 0; i < declared; ++i) {
    if (r.remaining() < kRecordBytes) {
      out.records_skipped += declared - i;  // truncated tail
      break;
    }
    DdmObservation o;
    if (get_record(r, &o)) {
      out.observations.push_back(std::move(o));
    } else {
      ++out.records_skipped;
    }
  }
  return out;
}

std::filesystem::path LocalTrackSource::day_dir(const Date& d) const {
  return root_ / "tracks" / format_date(d);
}

std::vector<std::filesystem::path> LocalTrackSource::files_for_day(
    const Date& d) {
  std::vector<std::filesystem::path> out;
  const auto dir = day_dir(d);
  if (!std::filesystem::is_directory(dir)) return out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".trk") {
      out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::filesystem::path> StubTrackService::files_for_day(
    const Date& d) {
  requests_.push_back(d);
  return local_.files_for_day(d);
}

}  // namespace gnssr::io
