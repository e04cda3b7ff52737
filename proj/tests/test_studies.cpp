#include "gnssr/studies.hpp"

#include <cmath>
#include <filesystem>
#include <vector>

#include "doctest.h"
#include "gnssr/observations.hpp"
#include "gnssr/synthgen.hpp"
#include "gnssr/validation.hpp"
#include "gnssr/warehouse.hpp"
#include "testutil.hpp"

using namespace gnssr;
using studies::AblationGroup;
using studies::NoiseSpec;
using studies::StudyConfig;

namespace {

Sample full_sample() {
  Sample s;
  s.obs.timestamp = day_start({2022, 6, 1}) + 4000.0;
  s.obs.lat = 34.2;
  s.obs.lon = -95.3;
  s.obs.incidence_deg = 31.0;
  s.obs.sp_rx_gain_db = 9.5;
  s.obs.ddm_snr_db = 7.2;
  s.obs.spacecraft_id = 3;
  s.obs.prn = 11;
  s.metrics.reflectivity_db = -13.0;
  s.metrics.peak_power_w = 2.5e-17;
  s.anc.elevation_m = 240.0;
  s.anc.elevation_std_m = 15.0;
  s.anc.slope_deg = 1.5;
  s.anc.slope_std_deg = 0.4;
  s.anc.ndvi = 0.45;
  s.anc.vwc_kg_m2 = 1.1;
  s.anc.water_fraction = 0.004;
  s.anc.clay_fraction = 0.25;
  s.anc.sand_fraction = 0.4;
  s.anc.landcover.setConstant(1.0 / 17.0);
  return s;
}

// Synthetic supervised sample sets: one batch per day of a generated world.
struct StudyWorld {
  testutil::TempDir tmp{"studyworld"};
  synth::WorldConfig cfg;
  std::vector<std::vector<Sample>> by_day;  // filtered supervised samples

  explicit StudyWorld(std::uint64_t seed, int tracks, int per_track,
                      int days, bool volatile_field) {
    cfg.seed = seed;
    cfg.lat_min = 32.0;
    cfg.lat_max = 36.0;
    cfg.lon_min = -100.0;
    cfg.lon_max = -94.0;
    cfg.num_days = days;
    cfg.tracks_per_day = tracks;
    cfg.samples_per_track = per_track;
    cfg.ddm_noise = 0.02;
    cfg.bad_quality_rate = 0.0;
    cfg.rfi_rate = 0.0;
    cfg.target_coverage = 1.0;
    cfg.flag_unsuccessful_rate = 0.0;
    cfg.flag_precipitation_rate = 0.0;
    cfg.flag_not_recommended_rate = 0.0;
    cfg.volatile_field = volatile_field;
    synth::generate_world(cfg, tmp.path);

    io::LocalTrackSource source(tmp.path);
    const warehouse::AncillaryStore anc(tmp / "ancillary");
    const warehouse::TargetStore targets(tmp / "targets");
    for (int d = 0; d < days; ++d) {
      const Date day = add_days(cfg.first_day, d);
      std::vector<io::DdmObservation> obs;
      for (const auto& path : source.files_for_day(day)) {
        const auto read = io::read_track_file(path);
        obs.insert(obs.end(), read.observations.begin(),
                   read.observations.end());
      }
      auto samples = warehouse::build_samples(obs, anc, &targets, {},
                                              warehouse::VwcModel::defaults());
      samples = cond::filter_samples(std::move(samples), {});
      by_day.push_back(cond::training_pairs(std::move(samples)));
    }
  }
};

}  // namespace

TEST_CASE("feature deletion shrinks the manifest") {
  cond::Dataset d;
  d.ancillary_names = {"a", "b", "c"};
  d.ancillary.resize(3, 4);
  d.ancillary << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12;
  d.ddm = Eigen::MatrixXd::Constant(187, 4, 0.5);
  d.target = Eigen::VectorXd::LinSpaced(4, 0.1, 0.4);

  const cond::Dataset out = cond::drop_features(d, {"b"});
  REQUIRE(out.ancillary_names == std::vector<std::string>{"a", "c"});
  REQUIRE(out.ancillary.rows() == 2);
  CHECK(out.ancillary.row(0) == d.ancillary.row(0));
  CHECK(out.ancillary.row(1) == d.ancillary.row(2));
  CHECK(out.target == d.target);
  CHECK(out.ddm == d.ddm);

  const cond::Dataset none = cond::drop_features(d, {"c", "a", "b"});
  CHECK(none.ancillary.rows() == 0);
  CHECK(none.ancillary_names.empty());

  CHECK_THROWS_AS(cond::drop_features(d, {"zz"}), std::invalid_argument);
  CHECK_THROWS_AS(cond::drop_features(d, {"a", "a"}), std::invalid_argument);
}

TEST_CASE("sample list hashing is order- and content-sensitive") {
  std::vector<Sample> a{full_sample(), full_sample()};
  a[1].obs.timestamp += 1.0;
  a[1].has_target = true;
  a[1].target.soil_moisture = 0.3;
  std::vector<Sample> b = a;
  CHECK(studies::hash_samples(a) == studies::hash_samples(b));

  b[0].obs.lat += 1e-9;
  CHECK(studies::hash_samples(a) != studies::hash_samples(b));
  b = a;
  b[1].target.soil_moisture = 0.31;
  CHECK(studies::hash_samples(a) != studies::hash_samples(b));
  std::swap(b[0], b[1]);
  b[1].target.soil_moisture = 0.3;  // same multiset, different order
  CHECK(studies::hash_samples(a) != studies::hash_samples(b));
  CHECK(studies::hash_samples({}) != studies::hash_samples(a));
}

TEST_CASE("input scaling addresses exactly the manifest slot") {
  const Sample base = full_sample();
  const Eigen::VectorXd raw = cond::raw_features(base);
  for (int idx = 0; idx < cond::kAncillaryFeatures; ++idx) {
    Sample s = base;
    studies::scale_input(s, idx, 1.3);
    const Eigen::VectorXd got = cond::raw_features(s);
    for (int j = 0; j < cond::kAncillaryFeatures; ++j) {
      if (j == idx) {
        CHECK(got[j] == raw[j] * 1.3);
      } else {
        CHECK(got[j] == raw[j]);
      }
    }
  }
  Sample s = base;
  CHECK_THROWS_AS(studies::scale_input(s, cond::kAncillaryFeatures, 1.1),
                  std::invalid_argument);
  CHECK_THROWS_AS(studies::scale_input(s, -1, 1.1), std::invalid_argument);
}

TEST_CASE("noise study: zero amplitude reproduces the baseline exactly") {
  StudyWorld world(21, 5, 40, 1, false);
  const auto& eval = world.by_day[0];
  REQUIRE(eval.size() > 30);
  const auto stats = cond::fit_normalization(eval);

  nn::NetworkConfig ncfg;
  ncfg.channels = {2, 2};
  ncfg.ancillary_dense = 8;
  ncfg.head_dense = {8, 4};
  ncfg.dropout = 0.0;
  ncfg.init_seed = 3;
  nn::Network net(ncfg);

  NoiseSpec zero;
  zero.relative_sigma = 0.0;
  const auto quiet = studies::run_noise_sensitivity(net, stats, eval, zero);
  CHECK(quiet.study == "noise");
  CHECK(quiet.eval_hash == studies::hash_samples(eval));
  CHECK(quiet.eval_count == eval.size());
  REQUIRE(quiet.runs.size() == 35);  // 33 ancillary + ddm + all_inputs
  CHECK(quiet.runs.back().label == "all_inputs");
  for (const auto& run : quiet.runs) {
    CHECK(run.metrics.correlation == quiet.baseline.correlation);
    CHECK(run.metrics.rmse == quiet.baseline.rmse);
  }

  // Default amplitude: deterministic run-to-run, and the perturbations bite.
  const auto a = studies::run_noise_sensitivity(net, stats, eval, {});
  const auto b = studies::run_noise_sensitivity(net, stats, eval, {});
  REQUIRE(a.runs.size() == b.runs.size());
  for (std::size_t i = 0; i < a.runs.size(); ++i) {
    CHECK(a.runs[i].label == b.runs[i].label);
    CHECK(a.runs[i].metrics.rmse == b.runs[i].metrics.rmse);
    CHECK(a.runs[i].metrics.correlation == b.runs[i].metrics.correlation);
  }
  const auto ddm_run = std::find_if(
      a.runs.begin(), a.runs.end(),
      [](const studies::StudyRun& r) { return r.label == "ddm"; });
  REQUIRE(ddm_run != a.runs.end());
  CHECK(ddm_run->metrics.rmse != a.baseline.rmse);
}

TEST_CASE("noise on an input the network cannot see changes nothing") {
  StudyWorld world(22, 4, 40, 1, false);
  const auto& eval = world.by_day[0];
  REQUIRE(eval.size() > 30);
  const auto stats = cond::fit_normalization(eval);

  nn::NetworkConfig ncfg;
  ncfg.channels = {2, 2};
  ncfg.ancillary_dense = 8;
  ncfg.head_dense = {8, 4};
  ncfg.dropout = 0.0;
  ncfg.init_seed = 5;
  nn::Network net(ncfg);
  const int ndvi = cond::feature_index("ndvi");
  for (auto& p : net.params()) {
    if (p.name == "anc.w") p.value->col(ndvi).setZero();
  }

  NoiseSpec spec;
  spec.relative_sigma = 0.0;
  spec.overrides = {{"ndvi", 0.5}, {"elevation_m", 0.5}};
  const auto res = studies::run_noise_sensitivity(net, stats, eval, spec);
  double ndvi_rmse = kMissing, elev_rmse = kMissing;
  for (const auto& run : res.runs) {
    if (run.label == "ndvi") ndvi_rmse = run.metrics.rmse;
    if (run.label == "elevation_m") elev_rmse = run.metrics.rmse;
  }
  CHECK(ndvi_rmse == res.baseline.rmse);  // zeroed weights: bit-identical
  CHECK(elev_rmse != res.baseline.rmse);  // a live input responds
}

TEST_CASE("ablation study trains the baseline and one model per group") {
  StudyWorld world(23, 6, 40, 1, false);
  auto all = world.by_day[0];
  REQUIRE(all.size() > 120);
  // Time-ordered split of one day into train/dev/eval.
  const std::size_t n = all.size();
  const std::vector<Sample> train(all.begin(), all.begin() + n * 6 / 10);
  const std::vector<Sample> dev(all.begin() + n * 6 / 10,
                                all.begin() + n * 8 / 10);
  const std::vector<Sample> eval(all.begin() + n * 8 / 10, all.end());

  StudyConfig cfg;
  cfg.network.channels = {2, 2};
  cfg.network.ancillary_dense = 8;
  cfg.network.head_dense = {8, 4};
  cfg.network.dropout = 0.0;
  cfg.trainer.epochs = 2;
  cfg.trainer.batch_size = 64;

  const auto solo = studies::run_ablation(cfg, {}, train, dev, eval);
  CHECK(solo.study == "ablation");
  CHECK(solo.runs.empty());
  CHECK(solo.eval_hash == studies::hash_samples(eval));
  CHECK(solo.baseline.rmse >= 0.0);
  CHECK(solo.baseline.correlation >= -1.0);
  CHECK(solo.baseline.correlation <= 1.0);

  const std::vector<AblationGroup> groups{
      {"position", {"lat", "lon"}},
      {"ddm_branch", {studies::kDdmMarker}},
  };
  const auto res = studies::run_ablation(cfg, groups, train, dev, eval);
  REQUIRE(res.runs.size() == 2);
  CHECK(res.runs[0].label == "position");
  CHECK(res.runs[0].detail == "removed=lat,lon");
  CHECK(res.runs[1].label == "ddm_branch");
  CHECK(res.runs[1].detail == "removed=ddm");
  CHECK(res.baseline.rmse == solo.baseline.rmse);  // same seed, same data
  for (const auto& run : res.runs) {
    CHECK(run.metrics.rmse >= 0.0);
  }

  CHECK_THROWS_AS(
      studies::run_ablation(cfg, {{"bad", {"no_such_input"}}}, train, dev,
                            eval),
      std::invalid_argument);
  CHECK_THROWS_AS(
      studies::run_ablation(cfg, {{"g", {"lat"}}, {"g", {"lon"}}}, train,
                            dev, eval),
      std::invalid_argument);
  CHECK_THROWS_AS(studies::run_ablation(cfg, {{"g", {}}}, train, dev, eval),
                  std::invalid_argument);
  StudyConfig bad = cfg;
  bad.sample_fraction = 0.0;
  CHECK_THROWS_AS(studies::run_ablation(bad, {}, train, dev, eval),
                  std::invalid_argument);

  // An input that is constant zero cannot carry information: ablating it
  // stays inside the run-to-run noise band.
  auto flat_train = train;
  auto flat_dev = dev;
  auto flat_eval = eval;
  for (auto* vec : {&flat_train, &flat_dev, &flat_eval}) {
    for (Sample& s : *vec) s.anc.slope_std_deg = 0.0;
  }
  const auto flat = studies::run_ablation(
      cfg, {{"dead_input", {"slope_std_deg"}}}, flat_train, flat_dev,
      flat_eval);
  REQUIRE(flat.runs.size() == 1);
  CHECK(std::abs(flat.runs[0].metrics.rmse - flat.baseline.rmse) < 0.05);
}

TEST_CASE("volatile world: only the ddm carries the cross-day signal") {
  // The field redraws every day, so position and the static ancillary maps
  // explain nothing beyond the day they were fit on; the observation itself
  // (DDM branch plus the scalars derived from it) is the only cross-day
  // channel. Training spans several days so that memorizing any one day's
  // pattern stops paying, and the dev day is held out to select for
  // generalization.
  StudyWorld world(31, 10, 55, 7, true);
  std::vector<Sample> train;
  for (int d = 0; d < 5; ++d) {
    train.insert(train.end(), world.by_day[d].begin(), world.by_day[d].end());
  }
  const auto& dev = world.by_day[5];
  const auto& eval = world.by_day[6];
  REQUIRE(train.size() > 1500);
  REQUIRE(dev.size() > 250);
  REQUIRE(eval.size() > 250);

  StudyConfig cfg;
  cfg.network.channels = {3, 4};
  cfg.network.ancillary_dense = 12;
  cfg.network.head_dense = {16, 8};
  cfg.network.dropout = 0.0;
  cfg.trainer.epochs = 30;
  cfg.trainer.batch_size = 128;
  cfg.trainer.lr = 3e-3;

  const std::vector<AblationGroup> groups{
      {"no_ddm",
       {studies::kDdmMarker, "ddm_snr_db", "reflectivity_db",
        "peak_power_w"}},
      {"no_position", {"lat", "lon"}},
      {"no_clay", {"clay_fraction"}},
  };
  const auto res = studies::run_ablation(cfg, groups, train, dev, eval);
  const double base = res.baseline.correlation;
  const double no_ddm = res.runs[0].metrics.correlation;
  const double no_pos = res.runs[1].metrics.correlation;
  const double no_clay = res.runs[2].metrics.correlation;
  INFO("base=", base, " no_ddm=", no_ddm, " no_pos=", no_pos,
       " no_clay=", no_clay);
  CHECK(base > 0.8);
  CHECK(base - no_ddm > 0.2);
  CHECK(std::abs(base - no_clay) < 0.1);
  CHECK(base - no_ddm > base - no_pos);
  CHECK(base - no_ddm > base - no_clay);
}

TEST_CASE("ensemble dispersion is reproducible from stored predictions") {
  StudyWorld world(24, 6, 40, 1, false);
  auto all = world.by_day[0];
  REQUIRE(all.size() > 120);
  const std::size_t n = all.size();
  const std::vector<Sample> train(all.begin(), all.begin() + n * 6 / 10);
  const std::vector<Sample> dev(all.begin() + n * 6 / 10,
                                all.begin() + n * 8 / 10);
  const std::vector<Sample> eval(all.begin() + n * 8 / 10, all.end());

  StudyConfig cfg;
  cfg.network.channels = {2, 2};
  cfg.network.ancillary_dense = 8;
  cfg.network.head_dense = {8, 4};
  cfg.network.dropout = 0.0;
  cfg.trainer.epochs = 2;
  cfg.trainer.batch_size = 64;

  // Forcing identical seeds collapses the spread to exactly zero.
  const auto same =
      studies::train_ensemble(cfg, std::vector<std::uint64_t>{9, 9}, train,
                              dev, eval);
  CHECK(same.survivors == 2);
  CHECK(same.sample_std_mean == 0.0);
  CHECK(same.sample_std_std == 0.0);
  CHECK(same.corr_std == 0.0);
  CHECK(same.members[0].predictions == same.members[1].predictions);

  const auto res = studies::train_ensemble(cfg, 3, train, dev, eval);
  CHECK(res.members.size() == 3);
  CHECK(res.survivors == 3);
  CHECK(res.eval_hash == studies::hash_samples(eval));
  CHECK(res.warnings.empty());
  CHECK(res.members[0].seed == cfg.seed);
  CHECK(res.members[1].seed == cfg.seed + 1);

  // Brute-force the dispersion from the stored prediction matrix.
  const Eigen::Index ns = res.members[0].predictions.size();
  REQUIRE(ns == Eigen::Index(eval.size()));
  double mean_std = 0.0;
  std::vector<double> stds;
  for (Eigen::Index i = 0; i < ns; ++i) {
    double m = 0.0;
    for (const auto& mem : res.members) m += mem.predictions[i] / 3.0;
    double v = 0.0;
    for (const auto& mem : res.members) {
      v += (mem.predictions[i] - m) * (mem.predictions[i] - m) / 3.0;
    }
    stds.push_back(std::sqrt(v));
    mean_std += std::sqrt(v) / double(ns);
  }
  CHECK(res.sample_std_mean == doctest::Approx(mean_std).epsilon(1e-12));
  double sv = 0.0;
  for (double s : stds) sv += (s - mean_std) * (s - mean_std) / double(ns);
  CHECK(res.sample_std_std == doctest::Approx(std::sqrt(sv)).epsilon(1e-12));

  // Member metrics cover the correlation/rmse of each member's predictions.
  for (const auto& mem : res.members) {
    const auto score = studies::score_predictions(
        mem.predictions,
        [&] {
          Eigen::VectorXd t(ns);
          for (Eigen::Index i = 0; i < ns; ++i) {
            t[i] = eval[std::size_t(i)].target.soil_moisture;
          }
          return t;
        }());
    CHECK(mem.metrics.rmse == doctest::Approx(score.rmse).epsilon(1e-12));
  }

  CHECK_THROWS_AS(studies::train_ensemble(cfg, 1, train, dev, eval),
                  std::invalid_argument);

  // A learning rate far past stable makes every member blow up.
  StudyConfig hot = cfg;
  hot.trainer.optimizer = nn::Optimizer::kSgd;
  hot.trainer.lr = 1e18;
  hot.trainer.epochs = 1;
  CHECK_THROWS_AS(studies::train_ensemble(hot, 2, train, dev, eval),
                  std::runtime_error);
}

TEST_CASE("study and ensemble reports round-trip through text") {
  testutil::TempDir tmp("reports");
  studies::StudyResult r;
  r.study = "noise";
  r.eval_hash = 0xdeadbeef12345678ull;
  r.eval_count = 321;
  r.baseline = {0.91234567890123459, 0.045678901234567892};
  r.runs.push_back({"ndvi", {0.85, 0.06}, "sigma=0.030395136778115501"});
  r.runs.push_back({"ddm", {kMissing, 0.2}, ""});

  const auto path = tmp / "study.txt";
  studies::write_study_text(r, path);
  const auto back = studies::read_study_text(path);
  CHECK(back.study == r.study);
  CHECK(back.eval_hash == r.eval_hash);
  CHECK(back.eval_count == r.eval_count);
  CHECK(back.baseline.correlation == r.baseline.correlation);
  CHECK(back.baseline.rmse == r.baseline.rmse);
  REQUIRE(back.runs.size() == 2);
  CHECK(back.runs[0].label == "ndvi");
  CHECK(back.runs[0].metrics.correlation == 0.85);
  CHECK(back.runs[0].detail == "sigma=0.030395136778115501");
  CHECK(back.runs[1].metrics.correlation == kMissing);
  CHECK(back.runs[1].detail.empty());

  studies::EnsembleReport e;
  e.eval_hash = 0x123;
  e.eval_count = 77;
  e.survivors = 2;
  e.corr_mean = 0.9;
  e.corr_std = 0.01;
  e.rmse_mean = 0.05;
  e.rmse_std = 0.002;
  e.sample_std_mean = 0.0081234567890123457;
  e.sample_std_std = 0.003;
  e.members.push_back({11, false, {0.9, 0.05}, {}});
  e.members.push_back({12, true, {kMissing, kMissing}, {}});
  e.warnings.push_back("seed 12 diverged: non-finite predictions");

  const auto epath = tmp / "ensemble.txt";
  studies::write_ensemble_text(e, epath);
  const auto eback = studies::read_ensemble_text(epath);
  CHECK(eback.eval_hash == e.eval_hash);
  CHECK(eback.survivors == 2);
  CHECK(eback.sample_std_mean == e.sample_std_mean);
  REQUIRE(eback.members.size() == 2);
  CHECK(eback.members[0].seed == 11);
  CHECK(eback.members[1].diverged);
  CHECK(eback.members[1].metrics.correlation == kMissing);
  REQUIRE(eback.warnings.size() == 1);
  CHECK(eback.warnings[0] == "seed 12 diverged: non-finite predictions");

  // Files of the wrong shape are rejected.
  CHECK_THROWS_AS(studies::read_study_text(epath), std::runtime_error);
  CHECK_THROWS_AS(studies::read_ensemble_text(path), std::runtime_error);
  CHECK_THROWS_AS(studies::read_study_text(tmp / "none.txt"),
                  std::runtime_error);
}
