#include "gnssr/validation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <vector>

#include "doctest.h"
#include "gnssr/rng.hpp"
#include "testutil.hpp"

using namespace gnssr;
using validation::DatedValue;
using validation::InSituSite;
using L2Record = products::L2Record;

namespace {

const Date kDay0{2020, 3, 1};

products::L2Record vrec(double lat, double lon, double sm, UtcSeconds t) {
  products::L2Record r;
  r.timestamp = t;
  r.lat = lat;
  r.lon = lon;
  r.sm = sm;
  r.spacecraft_id = 1;
  r.prn = 1;
  return r;
}

InSituSite make_site(const std::string& id, double lat, int cls) {
  InSituSite s;
  s.id = id;
  s.location = {lat, -95.0};
  s.landcover_class = cls;
  return s;
}

}  // namespace

TEST_CASE("pair metrics match closed forms on structured inputs") {
  const std::vector<double> x{0.12, 0.31, 0.08, 0.44, 0.27, 0.19};
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + 0.1;

  CHECK(validation::pearson(x, y) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(validation::bias(x, y) == doctest::Approx(-0.1).epsilon(1e-12));
  CHECK(validation::ubrmse(x, y) < 1e-12);
  CHECK(validation::rmse(x, y) == doctest::Approx(0.1).epsilon(1e-12));

  const std::vector<double> zx{-2.0, -1.0, 1.0, 2.0};
  const std::vector<double> zy{2.0, 1.0, -1.0, -2.0};
  CHECK(validation::pearson(zx, zy) == -1.0);
}

TEST_CASE("pair metrics match a direct-formula oracle on random vectors") {
  Rng rng(77);
  std::vector<double> x(1000), y(1000);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = 0.25 + 0.1 * rng.normal();
    y[i] = 0.22 + 0.08 * rng.normal() + 0.3 * (x[i] - 0.25);
  }
  const double n = 1000.0;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxy = 0.0, sxx = 0.0, syy = 0.0, sb = 0.0, sq = 0.0, su = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sb += (x[i] - y[i]) / n;
    sq += (x[i] - y[i]) * (x[i] - y[i]) / n;
    su += ((x[i] - mx) - (y[i] - my)) * ((x[i] - mx) - (y[i] - my)) / n;
  }
  CHECK(validation::pearson(x, y) ==
        doctest::Approx(sxy / std::sqrt(sxx * syy)).epsilon(1e-12));
  CHECK(validation::bias(x, y) == doctest::Approx(sb).epsilon(1e-12));
  CHECK(validation::rmse(x, y) == doctest::Approx(std::sqrt(sq)).epsilon(1e-12));
  CHECK(validation::ubrmse(x, y) ==
        doctest::Approx(std::sqrt(su)).epsilon(1e-12));

  const auto p = validation::pair_stats(x, y);
  CHECK(p.n == 1000);
  CHECK(std::abs(p.rmse * p.rmse - (p.ubrmse * p.ubrmse + p.bias * p.bias)) <=
        1e-12);
}

TEST_CASE("error decomposition and affine invariance hold on random pairs") {
  Rng rng(123);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 2 + rng.below(40);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = rng.uniform();
      y[i] = rng.uniform();
    }
    const double r2 = validation::rmse(x, y) * validation::rmse(x, y);
    const double u2 = validation::ubrmse(x, y) * validation::ubrmse(x, y);
    const double b = validation::bias(x, y);
    CHECK(std::abs(r2 - (u2 + b * b)) <= 1e-12);

    double sxx = 0.0, syy = 0.0, mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mx += x[i] / double(n);
      my += y[i] / double(n);
    }
    for (std::size_t i = 0; i < n; ++i) {
      sxx += (x[i] - mx) * (x[i] - mx);
      syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx > 1e-12 && syy > 1e-12) {
      const double r = validation::pearson(x, y);
      for (double a : {2.5, -0.3}) {
        std::vector<double> ax(n);
        for (std::size_t i = 0; i < n; ++i) ax[i] = a * x[i] + 0.7;
        const double want = a > 0 ? r : -r;
        CHECK(validation::pearson(ax, y) ==
              doctest::Approx(want).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("pair metrics reject degenerate input") {
  const std::vector<double> x{0.1, 0.2, 0.3};
  const std::vector<double> shorter{0.1, 0.2};
  const std::vector<double> one{0.1};
  const std::vector<double> flat{0.2, 0.2, 0.2};
  CHECK_THROWS_AS(validation::pearson(x, shorter), std::invalid_argument);
  CHECK_THROWS_AS(validation::rmse(one, one), std::invalid_argument);
  CHECK_THROWS_AS(validation::pearson(flat, x), std::invalid_argument);
  CHECK_THROWS_AS(validation::pearson(x, flat), std::invalid_argument);
  CHECK_NOTHROW(validation::rmse(flat, x));  // only r needs variance
}

TEST_CASE("site eligibility applies depth, latitude, and coverage rules") {
  const products::TimeWindow w{day_start(kDay0),
                               day_start(add_days(kDay0, 60))};
  std::vector<InSituSite> sites;

  const auto with_days = [](InSituSite s, int days,
                            int readings_per_day = 1) {
    for (int d = 0; d < days; ++d) {
      for (int k = 0; k < readings_per_day; ++k) {
        s.series.push_back(
            {day_start(add_days(kDay0, d)) + 3600.0 * (1 + k), 0.2});
      }
    }
    return s;
  };

  sites.push_back(with_days(make_site("ok", 35.0, 10), 30));
  sites.push_back(with_days(make_site("edge_lat", 40.0, 10), 30));
  sites.push_back(with_days(make_site("too_north", 45.0, 10), 30));
  sites.push_back(with_days(make_site("too_south", -41.0, 10), 30));
  sites.push_back(with_days(make_site("short", 35.0, 10), 29));
  InSituSite deep = with_days(make_site("deep", 35.0, 10), 30);
  deep.depth_cm = 10.0;
  sites.push_back(deep);
  // 30 readings all on one calendar day count as a single day.
  sites.push_back(with_days(make_site("one_day", 35.0, 10), 1, 30));

  const auto kept = validation::eligible_sites(sites, w);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].id == "ok");
  CHECK(kept[1].id == "edge_lat");

  // Monotone in the window: enlarging it never drops a site.
  const products::TimeWindow big{day_start(add_days(kDay0, -30)),
                                 day_start(add_days(kDay0, 120))};
  const auto kept_big = validation::eligible_sites(sites, big);
  for (const auto& s : kept) {
    CHECK(std::any_of(kept_big.begin(), kept_big.end(),
                      [&](const InSituSite& t) { return t.id == s.id; }));
  }

  CHECK_THROWS_AS(validation::eligible_sites(sites, {w.end, w.start}),
                  std::invalid_argument);
}

TEST_CASE("daily upscaling averages the closed footprint") {
  const grid::GeoPoint site{34.0, -95.0};
  const UtcSeconds t0 = day_start(kDay0);
  std::vector<L2Record> records{
      vrec(34.02, -95.00, 0.20, t0 + 100.0),
      vrec(34.00, -95.03, 0.30, t0 + 200.0),
      vrec(33.97, -95.01, 0.40, t0 + 300.0),
      vrec(34.30, -95.00, 0.90, t0 + 400.0),      // ~33 km away: outside
      vrec(34.00, -95.00, 0.70, t0 + 86400.0),    // next day
      vrec(34.00, -95.00, kMissing, t0 + 500.0),  // withheld
  };

  const auto m = validation::upscale_daily(records, site, kDay0);
  REQUIRE(m.has_value());
  CHECK(*m == doctest::Approx((0.2 + 0.3 + 0.4) / 3.0).epsilon(1e-15));

  // Record order never changes the result, bit for bit.
  std::vector<L2Record> shuffled = records;
  Rng rng(3);
  rng.shuffle(shuffled);
  CHECK(*validation::upscale_daily(shuffled, site, kDay0) == *m);

  // A retrieval exactly at the footprint radius is included.
  const double d_far =
      grid::great_circle_km(site, {records[3].lat, records[3].lon});
  const auto widened =
      validation::upscale_daily(records, site, kDay0, 2.0 * d_far);
  REQUIRE(widened.has_value());
  CHECK(*widened ==
        doctest::Approx((0.2 + 0.3 + 0.4 + 0.9) / 4.0).epsilon(1e-15));

  CHECK(!validation::upscale_daily(records, site, add_days(kDay0, 5))
             .has_value());
  CHECK(!validation::upscale_daily({}, site, kDay0).has_value());
  CHECK_THROWS_AS(validation::upscale_daily(records, site, kDay0, 0.0),
                  std::invalid_argument);

  // Against a brute-force linear scan on a random day of retrievals.
  std::vector<L2Record> cloud;
  for (int i = 0; i < 400; ++i) {
    cloud.push_back(vrec(33.5 + rng.uniform(), -95.5 + rng.uniform(),
                         rng.uniform(), t0 + 86400.0 * rng.uniform()));
  }
  double sum = 0.0;
  int n = 0;
  for (const auto& r : cloud) {
    if (date_of(r.timestamp) == kDay0 &&
        grid::great_circle_km(site, {r.lat, r.lon}) <= 18.0) {
      sum += r.sm;
      ++n;
    }
  }
  const auto got = validation::upscale_daily(cloud, site, kDay0);
  REQUIRE(n > 0);
  REQUIRE(got.has_value());
  CHECK(*got == doctest::Approx(sum / n).epsilon(1e-12));
}

TEST_CASE("site files round-trip through the text format") {
  testutil::TempDir tmp("sites");
  std::vector<InSituSite> sites;
  InSituSite a = make_site("walnut_gulch", 31.73, 10);
  a.network = "uscrn";
  a.series = {{day_start(kDay0) + 3600.0, 0.21},
              {day_start(kDay0) + 7200.0, 0.225},
              {day_start(add_days(kDay0, 1)) + 3600.0, 0.19}};
  InSituSite b = make_site("little_river", 31.5, 12);
  b.depth_cm = 5.0;
  b.series = {{day_start(kDay0), 0.33}};
  sites = {a, b};

  const auto path = tmp / "network.txt";
  validation::write_sites(sites, path);
  const auto back = validation::load_sites(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].id == "walnut_gulch");
  CHECK(back[0].network == "uscrn");
  CHECK(back[0].location.lat == 31.73);
  CHECK(back[0].landcover_class == 10);
  CHECK(back[0].depth_cm == 5.0);
  REQUIRE(back[0].series.size() == 3);
  CHECK(back[0].series[1].timestamp == day_start(kDay0) + 7200.0);
  CHECK(back[0].series[1].sm == 0.225);
  CHECK(back[1].series.size() == 1);

  // Malformed files are rejected with the offending line.
  const auto write_text = [&](const std::string& body) {
    const auto p = tmp / "bad.txt";
    std::ofstream f(p);
    f << body;
    f.close();
    return p;
  };
  CHECK_THROWS_AS(
      validation::load_sites(write_text("2020-03-01T00:00:00Z 0.2\n")),
      std::runtime_error);
  CHECK_THROWS_AS(
      validation::load_sites(write_text("site s1 34 -95 10\nnot_a_time 0.2\n")),
      std::runtime_error);
  CHECK_THROWS_AS(
      validation::load_sites(
          write_text("site s1 34 -95 10\n2020-03-01T00:00:00Z\n")),
      std::runtime_error);
  CHECK_THROWS_AS(
      validation::load_sites(
          write_text("site s1 34 -95 10\n2020-03-01T00:00:00Z 1.5\n")),
      std::runtime_error);
  CHECK_THROWS_AS(validation::load_sites(tmp / "missing.txt"),
                  std::runtime_error);

  InSituSite bad = make_site("bad", 34.0, 25);
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad.landcover_class = 5;
  bad.series = {{100.0, 0.2}, {100.0, 0.3}};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("matchups pair only days where both sides exist") {
  InSituSite site = make_site("s1", 34.0, 10);
  // Readings on days 0, 1, 3, 4 (day 2 skipped); day 1 has two readings.
  site.series = {{day_start(kDay0) + 100.0, 0.20},
                 {day_start(add_days(kDay0, 1)) + 100.0, 0.30},
                 {day_start(add_days(kDay0, 1)) + 200.0, 0.40},
                 {day_start(add_days(kDay0, 3)) + 100.0, 0.25},
                 {day_start(add_days(kDay0, 4)) + 100.0, 0.28}};
  // Retrievals near the site on days 1, 2, 3; day 4 only far away.
  std::vector<L2Record> records{
      vrec(34.01, -95.0, 0.31, day_start(add_days(kDay0, 1)) + 50.0),
      vrec(34.02, -95.0, 0.35, day_start(add_days(kDay0, 1)) + 60.0),
      vrec(34.00, -95.0, 0.50, day_start(add_days(kDay0, 2)) + 50.0),
      vrec(33.99, -95.0, 0.26, day_start(add_days(kDay0, 3)) + 50.0),
      vrec(36.50, -95.0, 0.90, day_start(add_days(kDay0, 4)) + 50.0)};

  const products::TimeWindow w{day_start(kDay0),
                               day_start(add_days(kDay0, 7))};
  const auto table = validation::build_matchups(site, records, w);
  CHECK(table.site_id == "s1");
  CHECK(table.landcover_class == 10);
  REQUIRE(table.rows.size() == 2);
  CHECK(table.rows[0].day == add_days(kDay0, 1));
  CHECK(table.rows[0].in_situ == doctest::Approx(0.35).epsilon(1e-15));
  CHECK(table.rows[0].product == doctest::Approx(0.33).epsilon(1e-15));
  CHECK(table.rows[0].count == 2);
  CHECK(table.rows[1].day == add_days(kDay0, 3));
  CHECK(table.rows[1].in_situ == 0.25);
  CHECK(table.rows[1].product == 0.26);
  CHECK(table.rows[1].count == 1);

  const auto stats = validation::site_stats(table);
  CHECK(stats.site_id == "s1");
  CHECK(stats.n == 2);
  const std::vector<double> prod{0.33, 0.26}, situ{0.35, 0.25};
  CHECK(stats.bias ==
        doctest::Approx(validation::bias(prod, situ)).epsilon(1e-12));
  CHECK(stats.ubrmse ==
        doctest::Approx(validation::ubrmse(prod, situ)).epsilon(1e-12));

  validation::MatchupTable tiny;
  tiny.rows = {{kDay0, 0.2, 0.3, 1}};
  CHECK_THROWS_AS(validation::site_stats(tiny), std::invalid_argument);
}

TEST_CASE("rolling comparison windows follow the step rule") {
  // Shared days at offsets 0,3,7,12,31,33,34,52; plus unpaired noise days.
  const std::vector<int> offs{0, 3, 7, 12, 31, 33, 34, 52};
  std::vector<DatedValue> a, b;
  Rng rng(5);
  std::vector<double> va, vb;
  for (int o : offs) {
    const double x = 0.2 + 0.1 * rng.uniform();
    const double y = 0.2 + 0.1 * rng.uniform();
    a.push_back({add_days(kDay0, o), x});
    b.push_back({add_days(kDay0, o), y});
    va.push_back(x);
    vb.push_back(y);
  }
  a.push_back({add_days(kDay0, 20), 0.9});  // a-only day
  b.push_back({add_days(kDay0, 21), 0.9});  // b-only day

  const auto pts = validation::rolling_compare(a, b, 30, 10);
  REQUIRE(pts.size() == 6);  // starts at +0,+10,...,+50
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK(pts[i].window_start == add_days(kDay0, 10 * int(i)));
    CHECK(pts[i].window_end == add_days(kDay0, 10 * int(i) + 30));
  }
  // Independent per-window recount from the offset list.
  const std::size_t expect_n[] = {4, 4, 3, 4, 1, 1};
  for (std::size_t i = 0; i < 6; ++i) CHECK(pts[i].n == expect_n[i]);

  // Window at +10 covers offsets {12,31,33,34}.
  std::vector<double> wa, wb;
  for (std::size_t k = 0; k < offs.size(); ++k) {
    if (offs[k] >= 10 && offs[k] < 40) {
      wa.push_back(va[k]);
      wb.push_back(vb[k]);
    }
  }
  double wa_mean = 0.0;
  for (double v : wa) wa_mean += v / static_cast<double>(wa.size());
  CHECK(pts[1].mean_a == doctest::Approx(wa_mean).epsilon(1e-12));
  CHECK(pts[1].rmse ==
        doctest::Approx(validation::rmse(wa, wb)).epsilon(1e-12));
  CHECK(pts[1].r == doctest::Approx(validation::pearson(wa, wb)).epsilon(1e-12));
  CHECK(pts[1].diff ==
        doctest::Approx(pts[1].mean_a - pts[1].mean_b).epsilon(1e-12));

  // Sparse trailing windows carry sentinels.
  CHECK(pts[4].r == kMissing);
  CHECK(pts[4].rmse == kMissing);
  CHECK(pts[4].mean_a == kMissing);
}

TEST_CASE("rolling comparison of offset series isolates the offset") {
  std::vector<DatedValue> a, b;
  Rng rng(8);
  for (int d = 0; d < 45; ++d) {
    const double x = 0.2 + 0.1 * rng.uniform();
    a.push_back({add_days(kDay0, d), x});
    b.push_back({add_days(kDay0, d), x + 0.07});
  }
  const auto pts = validation::rolling_compare(a, b);
  REQUIRE(pts.size() == 5);
  for (const auto& p : pts) {
    REQUIRE(p.n >= 2);
    CHECK(p.diff == doctest::Approx(-0.07).epsilon(1e-12));
    CHECK(p.rmse == doctest::Approx(0.07).epsilon(1e-12));
    CHECK(p.r == doctest::Approx(1.0).epsilon(1e-12));
  }

  // Identical series: zero error everywhere, r exactly one.
  const auto self = validation::rolling_compare(a, a);
  for (const auto& p : self) {
    CHECK(p.diff == 0.0);
    CHECK(p.rmse == 0.0);
    CHECK(p.r == 1.0);
  }

  // Constant series: r undefined, error stats still meaningful.
  std::vector<DatedValue> flat_a, flat_b;
  for (int d = 0; d < 10; ++d) {
    flat_a.push_back({add_days(kDay0, d), 0.2});
    flat_b.push_back({add_days(kDay0, d), 0.25});
  }
  const auto fp = validation::rolling_compare(flat_a, flat_b, 10, 10);
  REQUIRE(!fp.empty());
  CHECK(fp[0].r == kMissing);
  CHECK(fp[0].rmse == doctest::Approx(0.05).epsilon(1e-12));

  CHECK(validation::rolling_compare({}, {}).empty());
  CHECK_THROWS_AS(validation::rolling_compare(a, b, 0, 10),
                  std::invalid_argument);
}

TEST_CASE("landcover grouping drops singleton classes from the split view") {
  std::vector<validation::SiteStats> per_site;
  const auto add = [&](const std::string& id, int cls, double r) {
    validation::SiteStats s;
    s.site_id = id;
    s.landcover_class = cls;
    s.r = r;
    s.ubrmse = 0.04;
    s.bias = 0.01;
    s.n = 40;
    per_site.push_back(s);
  };
  add("a", 10, 0.7);
  add("b", 10, 0.6);
  add("c", 12, 0.5);
  add("d", 12, 0.55);
  add("e", 4, 0.2);  // lone forest site

  const auto out = validation::stats_by_landcover(per_site);
  CHECK(out.aggregate.size() == 5);
  REQUIRE(out.by_class.size() == 2);
  CHECK(out.by_class.count(4) == 0);
  CHECK(out.by_class.at(10).size() == 2);
  CHECK(out.by_class.at(12).size() == 2);
  CHECK(out.by_class.at(10)[0].site_id == "a");

  // All sites one class: the grouped view equals the aggregate.
  std::vector<validation::SiteStats> mono(per_site.begin(),
                                          per_site.begin() + 2);
  const auto m = validation::stats_by_landcover(mono);
  REQUIRE(m.by_class.size() == 1);
  CHECK(m.by_class.at(10).size() == m.aggregate.size());
}
