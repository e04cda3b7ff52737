#include "gnssr/studies.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "gnssr/hashing.hpp"
#include "gnssr/rng.hpp"
#include "gnssr/validation.hpp"

namespace gnssr::studies {

namespace {

// Deterministic thinning that keeps the original sample order.
std::vector<Sample> subsample(const std::vector<Sample>& samples,
                              double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("sample fraction must be in (0, 1]");
  }
  if (fraction == 1.0) return samples;
  const auto want = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(samples.size())));
  std::vector<std::size_t> idx(samples.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(hash_key(seed, 0x5ab5a317));
  rng.shuffle(idx);
  idx.resize(want);
  std::sort(idx.begin(), idx.end());
  std::vector<Sample> out;
  out.reserve(want);
  for (std::size_t i : idx) out.push_back(samples[i]);
  return out;
}

RunMetrics train_and_score(const nn::NetworkConfig& ncfg,
                           const nn::TrainConfig& tcfg,
                           const cond::Dataset& train,
                           const cond::Dataset& dev,
                           const cond::Dataset& eval,
                           Eigen::VectorXd* pred_out = nullptr) {
  nn::Network net(ncfg);
  const nn::TrainResult tr = nn::train_network(net, train, dev, tcfg);
  nn::Network best = nn::Network::from_weights(tr.best_weights);
  const Eigen::VectorXd pred = best.predict(eval);
  if (pred_out) *pred_out = pred;
  return score_predictions(pred, eval.target);
}

void check_eval_identity(const std::vector<Sample>& eval,
                         std::uint64_t expected) {
  if (hash_samples(eval) != expected) {
    throw std::logic_error("evaluation sample list changed mid-study");
  }
}

}  // namespace

std::uint64_t hash_samples(const std::vector<Sample>& samples) {
  std::uint64_t h = kFnvOffset;
  for (const Sample& s : samples) {
    const double d[4] = {s.obs.timestamp, s.obs.lat, s.obs.lon,
                         s.has_target ? s.target.soil_moisture : kMissing};
    h = fnv1a(d, sizeof d, h);
    const std::int64_t ids[2] = {s.obs.spacecraft_id, s.obs.prn};
    h = fnv1a(ids, sizeof ids, h);
  }
  return h;
}

RunMetrics score_predictions(const Eigen::VectorXd& pred,
                             const Eigen::VectorXd& target) {
  if (pred.size() != target.size() || pred.size() < 2) {
    throw std::invalid_argument(
        "predictions and targets must pair up, at least two of them");
  }
  const std::span<const double> p(pred.data(),
                                  static_cast<std::size_t>(pred.size()));
  const std::span<const double> t(target.data(),
                                  static_cast<std::size_t>(target.size()));
  RunMetrics m;
  m.rmse = validation::rmse(p, t);
  try {
    m.correlation = validation::pearson(p, t);
  } catch (const std::invalid_argument&) {
    m.correlation = kMissing;  // constant predictions
  }
  return m;
}

// ------------------------------------------------------------------ ablation

StudyResult run_ablation(const StudyConfig& cfg,
                         const std::vector<AblationGroup>& groups,
                         const std::vector<Sample>& train,
                         const std::vector<Sample>& dev,
                         const std::vector<Sample>& eval) {
  std::set<std::string> names_seen;
  for (const AblationGroup& g : groups) {
    if (g.name.empty() || g.name.find_first_of(" \t\n") != std::string::npos) {
      throw std::invalid_argument("ablation group name empty or has spaces");
    }
    if (!names_seen.insert(g.name).second) {
      throw std::invalid_argument("duplicate ablation group name: " + g.name);
    }
    if (g.members.empty()) {
      throw std::invalid_argument("ablation group '" + g.name +
                                  "' has no members");
    }
    for (const std::string& m : g.members) {
      if (m != kDdmMarker) cond::feature_index(m);  // throws on unknown
    }
  }

  const std::vector<Sample> train_used =
      subsample(train, cfg.sample_fraction, cfg.seed);
  const cond::NormStats stats = cond::fit_normalization(train_used);
  const cond::Dataset dtrain = cond::make_dataset(train_used, stats);
  const cond::Dataset ddev = cond::make_dataset(dev, stats);
  const cond::Dataset deval = cond::make_dataset(eval, stats);

  StudyResult out;
  out.study = "ablation";
  out.eval_hash = hash_samples(eval);
  out.eval_count = eval.size();

  nn::NetworkConfig base = cfg.network;
  base.ancillary_inputs = static_cast<int>(deval.ancillary_names.size());
  check_eval_identity(eval, out.eval_hash);
  out.baseline = train_and_score(base, cfg.trainer, dtrain, ddev, deval);

  for (const AblationGroup& g : groups) {
    bool drop_ddm = false;
    std::vector<std::string> drop_anc;
    for (const std::string& m : g.members) {
      if (m == kDdmMarker) {
        drop_ddm = true;
      } else {
        drop_anc.push_back(m);
      }
    }
    const cond::Dataset gtrain = cond::drop_features(dtrain, drop_anc);
    const cond::Dataset gdev = cond::drop_features(ddev, drop_anc);
    const cond::Dataset geval = cond::drop_features(deval, drop_anc);

    nn::NetworkConfig ncfg = base;
    ncfg.use_ddm_branch = base.use_ddm_branch && !drop_ddm;
    ncfg.ancillary_inputs = static_cast<int>(gtrain.ancillary_names.size());

    StudyRun run;
    run.label = g.name;
    std::string detail = "removed=";
    for (std::size_t i = 0; i < g.members.size(); ++i) {
      if (i) detail += ',';
      detail += g.members[i];
    }
    run.detail = detail;
    check_eval_identity(eval, out.eval_hash);
    run.metrics = train_and_score(ncfg, cfg.trainer, gtrain, gdev, geval);
    out.runs.push_back(std::move(run));
  }
  return out;
}

// ------------------------------------------------------------- noise probing

double noise_sigma_for(const NoiseSpec& spec, const std::string& input) {
  const auto it = spec.overrides.find(input);
  const double sigma = it != spec.overrides.end() ? it->second
                                                  : spec.relative_sigma;
  if (!(sigma >= 0.0)) {
    throw std::invalid_argument("noise sigma must be non-negative");
  }
  return sigma;
}

void scale_input(Sample& s, int feature_idx, double factor) {
  switch (feature_idx) {
    case 0: s.obs.lat *= factor; return;
    case 1: s.obs.lon *= factor; return;
    case 2: s.obs.incidence_deg *= factor; return;
    case 3: s.obs.sp_rx_gain_db *= factor; return;
    case 4: s.obs.ddm_snr_db *= factor; return;
    case 5: s.metrics.reflectivity_db *= factor; return;
    case 6: s.metrics.peak_power_w *= factor; return;
    case 7: s.anc.elevation_m *= factor; return;
    case 8: s.anc.elevation_std_m *= factor; return;
    case 9: s.anc.slope_deg *= factor; return;
    case 10: s.anc.slope_std_deg *= factor; return;
    case 11: s.anc.ndvi *= factor; return;
    case 12: s.anc.vwc_kg_m2 *= factor; return;
    case 13: s.anc.water_fraction *= factor; return;
    case 14: s.anc.clay_fraction *= factor; return;
    case 15: s.anc.sand_fraction *= factor; return;
    default:
      if (feature_idx >= 16 && feature_idx < cond::kAncillaryFeatures) {
        s.anc.landcover(feature_idx - 16) *= factor;
        return;
      }
      throw std::invalid_argument("feature index out of range");
  }
}

StudyResult run_noise_sensitivity(nn::Network& net,
                                  const cond::NormStats& stats,
                                  const std::vector<Sample>& eval,
                                  const NoiseSpec& spec) {
  const cond::Dataset deval = cond::make_dataset(eval, stats);

  StudyResult out;
  out.study = "noise";
  out.eval_hash = hash_samples(eval);
  out.eval_count = eval.size();
  out.baseline = score_predictions(net.predict(deval), deval.target);

  std::vector<std::string> inputs = cond::feature_names();
  inputs.push_back(kDdmMarker);

  const auto perturb_one = [&](std::vector<Sample>& copies,
                               const std::string& input, double sigma,
                               Rng& rng) {
    const int idx = input == kDdmMarker ? -1 : cond::feature_index(input);
    for (Sample& s : copies) {
      // One draw per sample; for the DDM this is the peak's noise and the
      // same factor scales the whole array.
      const double factor = 1.0 + sigma * rng.normal();
      if (idx < 0) {
        s.obs.ddm *= factor;
      } else {
        scale_input(s, idx, factor);
      }
    }
  };

  for (const std::string& input : inputs) {
    const double sigma = noise_sigma_for(spec, input);
    std::vector<Sample> copies = eval;
    Rng rng(hash_key_str(spec.seed, input));
    perturb_one(copies, input, sigma, rng);
    StudyRun run;
    run.label = input;
    char buf[48];
    std::snprintf(buf, sizeof buf, "sigma=%.17g", sigma);
    run.detail = buf;
    check_eval_identity(eval, out.eval_hash);
    const cond::Dataset noisy = cond::make_dataset(copies, stats);
    run.metrics = score_predictions(net.predict(noisy), noisy.target);
    out.runs.push_back(std::move(run));
  }

  {
    std::vector<Sample> copies = eval;
    Rng rng(hash_key_str(spec.seed, "all_inputs"));
    for (const std::string& input : inputs) {
      perturb_one(copies, input, noise_sigma_for(spec, input), rng);
    }
    StudyRun run;
    run.label = "all_inputs";
    run.detail = "every=input";
    check_eval_identity(eval, out.eval_hash);
    const cond::Dataset noisy = cond::make_dataset(copies, stats);
    run.metrics = score_predictions(net.predict(noisy), noisy.target);
    out.runs.push_back(std::move(run));
  }
  return out;
}

// ------------------------------------------------------------------ ensemble

EnsembleReport train_ensemble(const StudyConfig& cfg, int n_seeds,
                              const std::vector<Sample>& train,
                              const std::vector<Sample>& dev,
                              const std::vector<Sample>& eval) {
  if (n_seeds < 2) {
    throw std::invalid_argument("an ensemble needs at least two members");
  }
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < n_seeds; ++i) {
    seeds.push_back(cfg.seed + static_cast<std::uint64_t>(i));
  }
  return train_ensemble(cfg, seeds, train, dev, eval);
}

EnsembleReport train_ensemble(const StudyConfig& cfg,
                              const std::vector<std::uint64_t>& seeds,
                              const std::vector<Sample>& train,
                              const std::vector<Sample>& dev,
                              const std::vector<Sample>& eval) {
  if (seeds.size() < 2) {
    throw std::invalid_argument("an ensemble needs at least two members");
  }
  const std::vector<Sample> train_used =
      subsample(train, cfg.sample_fraction, cfg.seed);
  const cond::NormStats stats = cond::fit_normalization(train_used);
  const cond::Dataset dtrain = cond::make_dataset(train_used, stats);
  const cond::Dataset ddev = cond::make_dataset(dev, stats);
  const cond::Dataset deval = cond::make_dataset(eval, stats);

  EnsembleReport out;
  out.eval_hash = hash_samples(eval);
  out.eval_count = eval.size();

  for (std::uint64_t seed : seeds) {
    EnsembleMember member;
    member.seed = seed;
    nn::NetworkConfig ncfg = cfg.network;
    ncfg.init_seed = seed;
    nn::TrainConfig tcfg = cfg.trainer;
    tcfg.shuffle_seed = seed;
    bool warned = false;
    try {
      check_eval_identity(eval, out.eval_hash);
      Eigen::VectorXd pred;
      member.metrics =
          train_and_score(ncfg, tcfg, dtrain, ddev, deval, &pred);
      if (!pred.allFinite() || !std::isfinite(member.metrics.rmse)) {
        member.diverged = true;
      } else {
        member.predictions = std::move(pred);
      }
    } catch (const std::logic_error&) {
      throw;
    } catch (const std::exception& e) {
      member.diverged = true;
      warned = true;
      out.warnings.push_back("seed " + std::to_string(seed) +
                             " diverged: " + e.what());
    }
    if (member.diverged && !warned) {
      out.warnings.push_back("seed " + std::to_string(seed) +
                             " diverged: non-finite predictions");
    }
    out.members.push_back(std::move(member));
  }

  std::vector<const EnsembleMember*> alive;
  for (const EnsembleMember& m : out.members) {
    if (!m.diverged) alive.push_back(&m);
  }
  out.survivors = alive.size();
  if (alive.empty()) {
    throw std::runtime_error("every ensemble member diverged");
  }
  if (alive.size() < out.members.size()) {
    out.warnings.push_back(
        "ensemble statistics cover only the " +
        std::to_string(alive.size()) + " surviving members");
  }

  const double n = static_cast<double>(alive.size());
  double cm = 0.0, rm = 0.0;
  for (const auto* m : alive) {
    cm += m->metrics.correlation / n;
    rm += m->metrics.rmse / n;
  }
  double cv = 0.0, rv = 0.0;
  for (const auto* m : alive) {
    cv += (m->metrics.correlation - cm) * (m->metrics.correlation - cm) / n;
    rv += (m->metrics.rmse - rm) * (m->metrics.rmse - rm) / n;
  }
  out.corr_mean = cm;
  out.corr_std = std::sqrt(cv);
  out.rmse_mean = rm;
  out.rmse_std = std::sqrt(rv);

  const Eigen::Index ns = deval.size();
  Eigen::VectorXd per_sample_std(ns);
  for (Eigen::Index i = 0; i < ns; ++i) {
    double mean = 0.0;
    for (const auto* m : alive) mean += m->predictions[i] / n;
    double var = 0.0;
    for (const auto* m : alive) {
      var += (m->predictions[i] - mean) * (m->predictions[i] - mean) / n;
    }
    per_sample_std[i] = std::sqrt(var);
  }
  out.sample_std_mean = per_sample_std.mean();
  out.sample_std_std = std::sqrt(
      (per_sample_std.array() - out.sample_std_mean).square().mean());
  return out;
}

// -------------------------------------------------------------- result files

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& tok) {
  std::size_t used = 0;
  const double v = std::stod(tok, &used);
  if (used != tok.size()) {
    throw std::runtime_error("bad numeric field '" + tok + "'");
  }
  return v;
}

}  // namespace

void write_study_text(const StudyResult& result,
                      const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << "# input study result\n";
  f << "study " << result.study << '\n';
  f << "eval_hash " << hex64(result.eval_hash) << '\n';
  f << "eval_count " << result.eval_count << '\n';
  f << "baseline corr " << fmt(result.baseline.correlation) << " rmse "
    << fmt(result.baseline.rmse) << '\n';
  for (const StudyRun& r : result.runs) {
    f << "run " << r.label << " corr " << fmt(r.metrics.correlation)
      << " rmse " << fmt(r.metrics.rmse) << ' '
      << (r.detail.empty() ? "-" : r.detail) << '\n';
  }
  if (!f.flush()) throw std::runtime_error("write failed " + path.string());
}

StudyResult read_study_text(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  StudyResult out;
  std::string line;
  std::size_t lineno = 0;
  const auto fail = [&](const std::string& why) {
    throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                             ": " + why);
  };
  while (std::getline(f, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::string key;
    if (!(ss >> key) || key[0] == '#') continue;
    if (key == "study") {
      ss >> out.study;
    } else if (key == "eval_hash") {
      std::string hex;
      ss >> hex;
      out.eval_hash = std::strtoull(hex.c_str(), nullptr, 16);
    } else if (key == "eval_count") {
      ss >> out.eval_count;
    } else if (key == "baseline") {
      std::string kc, kr, vc, vr;
      if (!(ss >> kc >> vc >> kr >> vr) || kc != "corr" || kr != "rmse") {
        fail("malformed baseline line");
      }
      out.baseline.correlation = parse_double(vc);
      out.baseline.rmse = parse_double(vr);
    } else if (key == "run") {
      StudyRun r;
      std::string kc, kr, vc, vr;
      if (!(ss >> r.label >> kc >> vc >> kr >> vr) || kc != "corr" ||
          kr != "rmse") {
        fail("malformed run line");
      }
      r.metrics.correlation = parse_double(vc);
      r.metrics.rmse = parse_double(vr);
      std::string detail;
      ss >> detail;
      if (detail != "-") r.detail = detail;
      out.runs.push_back(std::move(r));
    } else {
      fail("unknown record '" + key + "'");
    }
  }
  if (out.study.empty()) {
    throw std::runtime_error(path.string() + ": not a study result file");
  }
  return out;
}

void write_ensemble_text(const EnsembleReport& report,
                         const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << "# ensemble dispersion report\n";
  f << "eval_hash " << hex64(report.eval_hash) << '\n';
  f << "eval_count " << report.eval_count << '\n';
  f << "members " << report.members.size() << '\n';
  f << "survivors " << report.survivors << '\n';
  f << "corr_mean " << fmt(report.corr_mean) << '\n';
  f << "corr_std " << fmt(report.corr_std) << '\n';
  f << "rmse_mean " << fmt(report.rmse_mean) << '\n';
  f << "rmse_std " << fmt(report.rmse_std) << '\n';
  f << "sample_std_mean " << fmt(report.sample_std_mean) << '\n';
  f << "sample_std_std " << fmt(report.sample_std_std) << '\n';
  for (const EnsembleMember& m : report.members) {
    f << "member seed " << m.seed << " diverged " << (m.diverged ? 1 : 0)
      << " corr " << fmt(m.metrics.correlation) << " rmse "
      << fmt(m.metrics.rmse) << '\n';
  }
  for (const std::string& w : report.warnings) {
    f << "warning " << w << '\n';
  }
  if (!f.flush()) throw std::runtime_error("write failed " + path.string());
}

EnsembleReport read_ensemble_text(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  EnsembleReport out;
  std::string line;
  bool saw_members = false;
  while (std::getline(f, line)) {
    std::istringstream ss(line);
    std::string key;
    if (!(ss >> key) || key[0] == '#') continue;
    if (key == "eval_hash") {
      std::string hex;
      ss >> hex;
      out.eval_hash = std::strtoull(hex.c_str(), nullptr, 16);
    } else if (key == "eval_count") {
      ss >> out.eval_count;
    } else if (key == "members") {
      saw_members = true;
    } else if (key == "survivors") {
      ss >> out.survivors;
    } else if (key == "corr_mean") {
      std::string v;
      ss >> v;
      out.corr_mean = parse_double(v);
    } else if (key == "corr_std") {
      std::string v;
      ss >> v;
      out.corr_std = parse_double(v);
    } else if (key == "rmse_mean") {
      std::string v;
      ss >> v;
      out.rmse_mean = parse_double(v);
    } else if (key == "rmse_std") {
      std::string v;
      ss >> v;
      out.rmse_std = parse_double(v);
    } else if (key == "sample_std_mean") {
      std::string v;
      ss >> v;
      out.sample_std_mean = parse_double(v);
    } else if (key == "sample_std_std") {
      std::string v;
      ss >> v;
      out.sample_std_std = parse_double(v);
    } else if (key == "member") {
      EnsembleMember m;
      std::string k1, k2, k3, vs, vd, vc, vr;
      if (!(ss >> k1 >> vs >> k2 >> vd >> k3 >> vc) || k1 != "seed" ||
          k2 != "diverged" || k3 != "corr") {
        throw std::runtime_error(path.string() + ": malformed member line");
      }
      std::string kr;
      if (!(ss >> kr >> vr) || kr != "rmse") {
        throw std::runtime_error(path.string() + ": malformed member line");
      }
      m.seed = std::strtoull(vs.c_str(), nullptr, 10);
      m.diverged = vd == "1";
      m.metrics.correlation = parse_double(vc);
      m.metrics.rmse = parse_double(vr);
      out.members.push_back(std::move(m));
    } else if (key == "warning") {
      std::string rest;
      std::getline(ss, rest);
      if (!rest.empty() && rest[0] == ' ') rest.erase(0, 1);
      out.warnings.push_back(rest);
    } else {
      throw std::runtime_error(path.string() + ": unknown record '" + key +
                               "'");
    }
  }
  if (!saw_members) {
    throw std::runtime_error(path.string() + ": not an ensemble report");
  }
  return out;
}

}  // namespace gnssr::studies
