#include <cmath>
#include <cstring>
#include <fstream>

#include "doctest.h"
#include "gnssr/bytes.hpp"
#include "gnssr/container.hpp"
#include "gnssr/fsutil.hpp"
#include "gnssr/hashing.hpp"
#include "gnssr/observations.hpp"
#include "gnssr/raster.hpp"
#include "testutil.hpp"

using namespace gnssr;
using namespace gnssr::io;
namespace fs = std::filesystem;

TEST_CASE("byte writer/reader round trip and truncation") {
  ByteWriter w;
  w.u8(7);
  w.u16(65535);
  w.u32(123456789);
  w.u64(0xdeadbeefcafebabeull);
  w.i64(-42);
  w.f64(-1.5e-300);
  w.str("hello");
  ByteReader r(w.bytes());
  CHECK(r.u8() == 7);
  CHECK(r.u16() == 65535);
  CHECK(r.u32() == 123456789u);
  CHECK(r.u64() == 0xdeadbeefcafebabeull);
  CHECK(r.i64() == -42);
  CHECK(r.f64() == -1.5e-300);
  CHECK(r.str() == "hello");
  CHECK(r.remaining() == 0);
  CHECK_THROWS_WITH_AS(r.u8(), doctest::Contains("truncated"),
                       std::runtime_error);
}

TEST_CASE("array container: attributes and variables round trip") {
  ArrayFile f;
  f.set_attr("version", "v1.0");
  f.set_attr("count", std::int64_t{42});
  f.set_attr("scale", 0.25);
  std::vector<double> xs = {1.0, -2.5, 3.25};
  f.add_f64("x", xs);
  auto& m = f.add("mask", DType::kU8, {2, 3});
  for (int i = 0; i < 6; ++i) m.u8()[i] = static_cast<std::uint8_t>(i * 7);
  auto& ids = f.add("ids", DType::kI32, {3});
  ids.i32()[0] = -1;
  ids.i32()[1] = 0;
  ids.i32()[2] = 7;

  const auto bytes = f.serialize();
  const ArrayFile g = ArrayFile::deserialize(bytes);
  CHECK(g.attr_str("version") == "v1.0");
  CHECK(g.attr_i64("count") == 42);
  CHECK(g.attr_f64("scale") == 0.25);
  CHECK(g.attr_f64("count") == 42.0);  // integer promotes
  REQUIRE(g.vars().size() == 3);
  CHECK(g.vars()[0].name == "x");  // insertion order preserved
  CHECK(g.var("x").to_f64() == xs);
  CHECK(g.var("mask").shape == std::vector<std::uint64_t>{2, 3});
  CHECK(g.var("mask").u8()[5] == 35);
  CHECK(g.var("ids").i32()[0] == -1);
  CHECK_FALSE(g.has_var("absent"));
  CHECK_THROWS_WITH_AS(g.var("absent"),
                       doctest::Contains("missing variable: absent"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(g.attr_f64("absent"),
                       doctest::Contains("missing attribute: absent"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(g.var("mask").f64(), doctest::Contains("u8"),
                       std::runtime_error);
}

TEST_CASE("array container: corruption and format errors are detected") {
  ArrayFile f;
  f.set_attr("a", 1.0);
  f.add_f64("x", std::vector<double>{1, 2, 3});
  auto bytes = f.serialize();

  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= std::byte{0x40};
  CHECK_THROWS_WITH_AS(ArrayFile::deserialize(flipped),
                       doctest::Contains("checksum"), std::runtime_error);

  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  CHECK_THROWS_AS(ArrayFile::deserialize(truncated), std::runtime_error);

  std::vector<std::byte> junk(64, std::byte{0x11});
  CHECK_THROWS_WITH_AS(ArrayFile::deserialize(junk),
                       doctest::Contains("not an array container"),
                       std::runtime_error);

  CHECK_THROWS_WITH_AS(f.add_f64("x", std::vector<double>{1}),
                       doctest::Contains("duplicate"), std::runtime_error);
}

TEST_CASE("atomic file writes leave no temporaries behind") {
  testutil::TempDir tmp("fsutil");
  const fs::path p = tmp / "sub/dir/file.bin";
  std::vector<std::byte> payload(1000);
  for (std::size_t i = 0; i < payload.size(); ++i) {
    payload[i] = static_cast<std::byte>(i & 0xff);
  }
  write_bytes_atomic(p, payload);
  CHECK(read_bytes(p) == payload);
  CHECK_FALSE(fs::exists(p.string() + ".tmp"));
  CHECK_THROWS_WITH_AS(read_bytes(tmp / "nope.bin"),
                       doctest::Contains("cannot open"), std::runtime_error);

  const std::uint64_t want = fnv1a(payload.data(), payload.size());
  CHECK(fnv1a_file(p) == want);
}

TEST_CASE("raster: window semantics, sentinel reads, file round trip") {
  testutil::TempDir tmp("raster");
  const auto spec = grid::GridSpec::ease2(9);
  Raster<double> r(spec, 300, 1100, 20, 15, 2, -9999.0);
  CHECK(r.at({305, 1105}) == -9999.0);
  r.set({305, 1105}, 0.31, 0);
  r.set({305, 1105}, 7.0, 1);
  CHECK(r.at({305, 1105}, 0) == 0.31);
  CHECK(r.at({305, 1105}, 1) == 7.0);
  CHECK(r.at({299, 1100}) == -9999.0);  // outside window: sentinel, no throw
  CHECK_THROWS_AS(r.set({299, 1100}, 1.0), std::out_of_range);
  CHECK_THROWS_AS(r.at({305, 1105}, 2), std::out_of_range);

  const fs::path p = tmp / "f.grd";
  r.write(p);
  const auto back = Raster<double>::read(p);
  CHECK(back.spec() == spec);
  CHECK(back.row0() == 300);
  CHECK(back.window_cols() == 15);
  CHECK(back.layers() == 2);
  CHECK(back.at({305, 1105}, 0) == 0.31);
  CHECK(back.at({305, 1105}, 1) == 7.0);
  CHECK(back.at({300, 1100}) == -9999.0);

  CHECK_THROWS_WITH_AS(Raster<float>::read(p), doctest::Contains("dtype"),
                       std::runtime_error);
  CHECK_THROWS_AS(Raster<double>(spec, -1, 0, 10, 10, 1, -9999.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(Raster<double>(spec, 0, 0, 10, 1000000, 1, -9999.0),
                  std::invalid_argument);
}

namespace {
DdmObservation sample_obs(int i) {
  DdmObservation o;
  o.timestamp = 1.6e9 + 0.5 * i;
  o.lat = 33.0 + 0.01 * i;
  o.lon = -101.0 + 0.01 * i;
  for (int r = 0; r < kDelayBins; ++r) {
    for (int c = 0; c < kDopplerBins; ++c) {
      o.ddm(r, c) = 1e-19 * (1 + r + c) + 1e-21 * i;
    }
  }
  o.ddm_snr_db = 4.5 + 0.1 * i;
  o.sp_rx_gain_db = 9.0;
  o.incidence_deg = 30.0 + i;
  o.range_tx_sp_m = 2.02e7;
  o.range_sp_rx_m = 6.5e5;
  o.spacecraft_id = 1 + (i % 8);
  o.prn = 1 + (i % 32);
  o.quality_flags = (i % 5 == 0) ? kObsFlagUnusable : 0u;
  o.sample_rate_hz = 2;
  return o;
}
}  // namespace

TEST_CASE("track files: round trip preserves every field") {
  testutil::TempDir tmp("track");
  std::vector<DdmObservation> obs;
  for (int i = 0; i < 25; ++i) obs.push_back(sample_obs(i));
  const fs::path p = tmp / "t.trk";
  write_track_file(p, obs);

  const auto res = read_track_file(p);
  CHECK(res.checksum_ok);
  CHECK(res.records_total == 25);
  CHECK(res.records_skipped == 0);
  REQUIRE(res.observations.size() == 25);
  for (int i = 0; i < 25; ++i) {
    const auto& a = obs[static_cast<std::size_t>(i)];
    const auto& b = res.observations[static_cast<std::size_t>(i)];
    CHECK(a.timestamp == b.timestamp);
    CHECK(a.lat == b.lat);
    CHECK(a.lon == b.lon);
    CHECK(a.ddm == b.ddm);
    CHECK(a.ddm_snr_db == b.ddm_snr_db);
    CHECK(a.sp_rx_gain_db == b.sp_rx_gain_db);
    CHECK(a.incidence_deg == b.incidence_deg);
    CHECK(a.range_tx_sp_m == b.range_tx_sp_m);
    CHECK(a.range_sp_rx_m == b.range_sp_rx_m);
    CHECK(a.spacecraft_id == b.spacecraft_id);
    CHECK(a.prn == b.prn);
    CHECK(a.quality_flags == b.quality_flags);
    CHECK(a.sample_rate_hz == b.sample_rate_hz);
  }
}

TEST_CASE("track files: corrupted records are skipped, not fatal") {
  testutil::TempDir tmp("trackbad");
  std::vector<DdmObservation> obs;
  for (int i = 0; i < 10; ++i) obs.push_back(sample_obs(i));
  const fs::path p = tmp / "t.trk";
  write_track_file(p, obs);

  // Stomp the latitude of record 4 with an out-of-range value.
  auto bytes = read_bytes(p);
  const std::size_t header = 8 + 4 + 4;
  const std::size_t record_size = (bytes.size() - header - 8) / 10;
  const double bad_lat = 200.0;
  std::memcpy(bytes.data() + header + 4 * record_size + 8, &bad_lat, 8);
  std::ofstream(p, std::ios::binary)
      .write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));

  const auto res = read_track_file(p);
  CHECK_FALSE(res.checksum_ok);  // we rewrote without fixing the checksum
  CHECK(res.records_total == 10);
  CHECK(res.records_skipped == 1);
  REQUIRE(res.observations.size() == 9);
  CHECK(res.observations[4].timestamp == obs[5].timestamp);  // order held

  // Truncation mid-record: remaining records counted as skipped. The cut
  // file still carries the bad record 4, so 1 invalid + 3 truncated.
  auto cut = read_bytes(p);
  cut.resize(header + 7 * record_size + record_size / 2);
  const fs::path p2 = tmp / "cut.trk";
  std::ofstream(p2, std::ios::binary)
      .write(reinterpret_cast<const char*>(cut.data()),
             static_cast<std::streamsize>(cut.size()));
  const auto res2 = read_track_file(p2);
  CHECK_FALSE(res2.checksum_ok);
  CHECK(res2.records_total == 10);
  CHECK(res2.records_skipped == 4);
  CHECK(res2.observations.size() == 6);

  std::ofstream(tmp / "junk.trk", std::ios::binary) << "not a track";
  CHECK_THROWS_WITH_AS(read_track_file(tmp / "junk.trk"),
                       doctest::Contains("not a track file"),
                       std::runtime_error);
}

TEST_CASE("track sources: local listing is sorted, stub logs requests") {
  testutil::TempDir tmp("src");
  const Date day{2021, 3, 5};
  const fs::path dir = tmp.path / "tracks" / "2021-03-05";
  fs::create_directories(dir);
  write_track_file(dir / "b.trk", {sample_obs(1)});
  write_track_file(dir / "a.trk", {sample_obs(2)});
  std::ofstream(dir / "ignore.txt") << "x";

  LocalTrackSource local(tmp.path);
  const auto files = local.files_for_day(day);
  REQUIRE(files.size() == 2);
  CHECK(files[0].filename() == "a.trk");
  CHECK(files[1].filename() == "b.trk");
  CHECK(local.files_for_day({2021, 3, 6}).empty());

  StubTrackService stub(tmp.path);
  CHECK(stub.files_for_day(day).size() == 2);
  CHECK(stub.files_for_day({2021, 3, 7}).empty());
  REQUIRE(stub.requests().size() == 2);
  CHECK(stub.requests()[0] == day);
  CHECK(stub.requests()[1] == Date{2021, 3, 7});
}

TEST_CASE("time utilities: calendar arithmetic and formatting") {
  using namespace gnssr;
  const Date d{2022, 5, 18};
  CHECK(format_date(d) == "2022-05-18");
  CHECK(format_date_compact(d) == "20220518");
  CHECK(format_date_hour_compact(d, 7) == "20220518T07");
  CHECK(parse_date("2022-05-18") == d);
  CHECK_THROWS_AS(parse_date("2022-13-01"), std::invalid_argument);
  CHECK_THROWS_AS(parse_date("20220518"), std::invalid_argument);
  CHECK(valid_date({2020, 2, 29}));
  CHECK_FALSE(valid_date({2021, 2, 29}));
  CHECK(add_days({2020, 12, 30}, 3) == Date{2021, 1, 2});
  CHECK(days_between({2021, 1, 1}, {2022, 1, 1}) == 365);
  const UtcSeconds t = day_start({2021, 6, 1}) + 3600.0 * 13 + 125.0;
  CHECK(date_of(t) == Date{2021, 6, 1});
  CHECK(hour_of(t) == 13);
  CHECK(format_utc(t) == "2021-06-01T13:02:05Z");
  CHECK(hour_start({2021, 6, 1}, 13) == day_start({2021, 6, 1}) + 13 * 3600.0);
  CHECK(date_of(day_start({2021, 6, 1})) == Date{2021, 6, 1});
  CHECK(date_of(day_start({2021, 6, 1}) - 0.001) == Date{2021, 5, 31});
}
