#include "gnssr/conditioning.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

namespace gnssr::cond {

const char* reject_reason_name(RejectReason r) {
  switch (r) {
    case RejectReason::kNone: return "none";
    case RejectReason::kSourceFlags: return "source_flags";
    case RejectReason::kSnr: return "ddm_snr";
    case RejectReason::kGain: return "sp_rx_gain";
    case RejectReason::kIncidence: return "incidence";
    case RejectReason::kRfi: return "rfi";
    case RejectReason::kWater: return "water_fraction";
    case RejectReason::kElevation: return "elevation";
    default: return "?";
  }
}

RejectReason first_rejection(const Sample& s, const FilterConfig& cfg) {
  if ((s.obs.quality_flags & cfg.source_flag_mask) != 0) {
    return RejectReason::kSourceFlags;
  }
  if (!(s.obs.ddm_snr_db > cfg.min_ddm_snr_db)) return RejectReason::kSnr;
  if (!(s.obs.sp_rx_gain_db > cfg.min_sp_rx_gain_db)) {
    return RejectReason::kGain;
  }
  if (!(s.obs.incidence_deg < cfg.max_incidence_deg)) {
    return RejectReason::kIncidence;
  }
  if (s.metrics.rfi_detected) return RejectReason::kRfi;
  if (is_missing(s.anc.water_fraction) ||
      !(s.anc.water_fraction < cfg.max_water_fraction)) {
    return RejectReason::kWater;
  }
  if (is_missing(s.anc.elevation_m) ||
      !(s.anc.elevation_m < cfg.max_elevation_m)) {
    return RejectReason::kElevation;
  }
  return RejectReason::kNone;
}

std::vector<Sample> filter_samples(std::vector<Sample> samples,
                                   const FilterConfig& cfg,
                                   FilterReport* report) {
  FilterReport rep;
  rep.total = samples.size();
  std::vector<Sample> out;
  out.reserve(samples.size());
  for (auto& s : samples) {
    const RejectReason r = first_rejection(s, cfg);
    if (r == RejectReason::kNone) {
      ++rep.kept;
      out.push_back(std::move(s));
    } else {
      ++rep.rejected_by[static_cast<std::size_t>(r)];
    }
  }
  if (report != nullptr) *report = rep;
  return out;
}

std::vector<Sample> training_pairs(std::vector<Sample> samples,
                                   TargetReport* report) {
  TargetReport rep;
  rep.total = samples.size();
  std::vector<Sample> out;
  out.reserve(samples.size());
  for (auto& s : samples) {
    if (!s.has_target || is_missing(s.target.soil_moisture)) {
      if (!s.has_target) {
        ++rep.without_target;
      } else {
        ++rep.dropped_unsuccessful;  // value withheld by the provider
      }
      continue;
    }
    if ((s.target.flags & kTargetUnsuccessful) != 0) {
      ++rep.dropped_unsuccessful;
      continue;
    }
    if ((s.target.flags & kTargetPrecipitation) != 0) {
      ++rep.dropped_precipitation;
      continue;
    }
    if ((s.target.flags & kTargetNotRecommended) != 0) {
      ++rep.kept_not_recommended;
    }
    ++rep.kept;
    out.push_back(std::move(s));
  }
  if (report != nullptr) *report = rep;
  return out;
}

void SplitWindows::validate() const {
  const DateWindow* ws[] = {&train, &dev, &validation};
  const char* names[] = {"train", "dev", "validation"};
  for (int i = 0; i < 3; ++i) {
    if (!(ws[i]->begin < ws[i]->end)) {
      throw std::invalid_argument(std::string(names[i]) +
                                  " window is empty or inverted");
    }
  }
  for (int i = 0; i < 3; ++i) {
    for (int j = i + 1; j < 3; ++j) {
      const bool disjoint =
          ws[i]->end <= ws[j]->begin || ws[j]->end <= ws[i]->begin;
      if (!disjoint) {
        throw std::invalid_argument(std::string(names[i]) + " and " +
                                    names[j] + " windows overlap");
      }
    }
  }
}

Split classify(UtcSeconds t, const SplitWindows& w) {
  if (w.train.contains(t)) return Split::kTrain;
  if (w.dev.contains(t)) return Split::kDev;
  if (w.validation.contains(t)) return Split::kValidation;
  return Split::kNone;
}

SplitSamples split_by_window(std::vector<Sample> samples,
                             const SplitWindows& w) {
  w.validate();
  SplitSamples out;
  for (auto& s : samples) {
    switch (classify(s.obs.timestamp, w)) {
      case Split::kTrain: out.train.push_back(std::move(s)); break;
      case Split::kDev: out.dev.push_back(std::move(s)); break;
      case Split::kValidation: out.validation.push_back(std::move(s)); break;
      case Split::kNone: break;
    }
  }
  return out;
}

std::vector<Sample> downsample_alongtrack(const std::vector<Sample>& samples,
                                          int factor) {
  if (factor < 1) {
    throw std::invalid_argument("downsample factor must be >= 1");
  }
  std::map<std::pair<int, int>, std::vector<std::size_t>> streams;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    streams[{samples[i].obs.spacecraft_id, samples[i].obs.prn}].push_back(i);
  }
  std::vector<std::size_t> chosen;
  for (auto& [key, idx] : streams) {
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) {
                       return samples[a].obs.timestamp <
                              samples[b].obs.timestamp;
                     });
    for (std::size_t k = 0; k < idx.size();
         k += static_cast<std::size_t>(factor)) {
      chosen.push_back(idx[k]);
    }
  }
  std::sort(chosen.begin(), chosen.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = samples[a].obs;
    const auto& y = samples[b].obs;
    return std::tie(x.timestamp, x.spacecraft_id, x.prn) <
           std::tie(y.timestamp, y.spacecraft_id, y.prn);
  });
  std::vector<Sample> out;
  out.reserve(chosen.size());
  for (const std::size_t i : chosen) out.push_back(samples[i]);
  return out;
}

const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n = {
        "lat",           "lon",
        "incidence_deg", "sp_rx_gain_db",
        "ddm_snr_db",    "reflectivity_db",
        "peak_power_w",  "elevation_m",
        "elevation_std_m", "slope_deg",
        "slope_std_deg", "ndvi",
        "vwc_kg_m2",     "water_fraction",
        "clay_fraction", "sand_fraction",
    };
    for (int k = 1; k <= kLandcoverClasses; ++k) {
      char buf[16];
      std::snprintf(buf, sizeof buf, "landcover_%02d", k);
      n.push_back(buf);
    }
    return n;
  }();
  return names;
}

int feature_index(const std::string& name) {
  const auto& names = feature_names();
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) {
    throw std::invalid_argument("unknown feature: " + name);
  }
  return static_cast<int>(it - names.begin());
}

Eigen::VectorXd raw_features(const Sample& s) {
  if (!s.anc.complete()) {
    const char* field = is_missing(s.anc.elevation_m) ? "elevation_m"
                        : is_missing(s.anc.elevation_std_m) ? "elevation_std_m"
                        : is_missing(s.anc.slope_deg) ? "slope_deg"
                        : is_missing(s.anc.slope_std_deg) ? "slope_std_deg"
                        : is_missing(s.anc.ndvi) ? "ndvi"
                        : is_missing(s.anc.vwc_kg_m2) ? "vwc_kg_m2"
                        : is_missing(s.anc.water_fraction) ? "water_fraction"
                        : is_missing(s.anc.clay_fraction) ? "clay_fraction"
                        : is_missing(s.anc.sand_fraction) ? "sand_fraction"
                                                          : "landcover";
    throw std::runtime_error(std::string("missing ancillary field: ") + field);
  }
  if (is_missing(s.metrics.reflectivity_db) ||
      !std::isfinite(s.metrics.reflectivity_db)) {
    throw std::runtime_error("missing ancillary field: reflectivity_db");
  }
  Eigen::VectorXd v(kAncillaryFeatures);
  v << s.obs.lat, s.obs.lon, s.obs.incidence_deg, s.obs.sp_rx_gain_db,
      s.obs.ddm_snr_db, s.metrics.reflectivity_db, s.metrics.peak_power_w,
      s.anc.elevation_m, s.anc.elevation_std_m, s.anc.slope_deg,
      s.anc.slope_std_deg, s.anc.ndvi, s.anc.vwc_kg_m2, s.anc.water_fraction,
      s.anc.clay_fraction, s.anc.sand_fraction, s.anc.landcover;
  return v;
}

namespace {

bool is_bounded_feature(const std::string& name) {
  static const std::set<std::string> bounded = {
      "lat",  "lon",  "incidence_deg",  "ndvi",
      "water_fraction", "clay_fraction", "sand_fraction"};
  return bounded.count(name) > 0 || name.rfind("landcover_", 0) == 0;
}

}  // namespace

NormStats fit_normalization(const std::vector<Sample>& train,
                            bool per_bin_ddm) {
  if (train.empty()) {
    throw std::invalid_argument("cannot fit normalization on an empty set");
  }
  NormStats st;
  st.per_bin_ddm = per_bin_ddm;
  st.names = feature_names();
  const int f = kAncillaryFeatures;
  st.kind.resize(static_cast<std::size_t>(f));
  st.offset.resize(f);
  st.scale.resize(f);

  Eigen::VectorXd mn = Eigen::VectorXd::Constant(f, 1e300);
  Eigen::VectorXd mx = Eigen::VectorXd::Constant(f, -1e300);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(f);
  Eigen::VectorXd sumsq = Eigen::VectorXd::Zero(f);

  const int bins = per_bin_ddm ? io::kDelayBins * io::kDopplerBins : 1;
  std::array<Eigen::VectorXd, 9> dsum, dsumsq;
  std::array<double, 9> dcount{};
  for (auto& v : dsum) v = Eigen::VectorXd::Zero(bins);
  for (auto& v : dsumsq) v = Eigen::VectorXd::Zero(bins);

  for (const Sample& s : train) {
    const Eigen::VectorXd x = raw_features(s);
    mn = mn.cwiseMin(x);
    mx = mx.cwiseMax(x);
    sum += x;
    sumsq += x.cwiseProduct(x);

    const int sc = s.obs.spacecraft_id;
    if (sc < 1 || sc > 8) {
      throw std::runtime_error("spacecraft id out of range in training set: " +
                               std::to_string(sc));
    }
    for (int slot : {0, sc}) {
      auto& a = dsum[static_cast<std::size_t>(slot)];
      auto& b = dsumsq[static_cast<std::size_t>(slot)];
      if (per_bin_ddm) {
        int k = 0;
        for (int r = 0; r < io::kDelayBins; ++r) {
          for (int c = 0; c < io::kDopplerBins; ++c, ++k) {
            const double w = s.obs.ddm(r, c);
            a(k) += w;
            b(k) += w * w;
          }
        }
        dcount[static_cast<std::size_t>(slot)] += 1.0;
      } else {
        a(0) += s.obs.ddm.sum();
        b(0) += s.obs.ddm.cwiseProduct(s.obs.ddm).sum();
        dcount[static_cast<std::size_t>(slot)] +=
            io::kDelayBins * io::kDopplerBins;
      }
    }
  }

  const double n = static_cast<double>(train.size());
  for (int i = 0; i < f; ++i) {
    if (is_bounded_feature(st.names[static_cast<std::size_t>(i)])) {
      st.kind[static_cast<std::size_t>(i)] = NormStats::Kind::kMinMax;
      st.offset(i) = mn(i);
      st.scale(i) = std::max(mx(i) - mn(i), NormStats::kEps);
    } else {
      st.kind[static_cast<std::size_t>(i)] = NormStats::Kind::kZScore;
      const double mean = sum(i) / n;
      const double var = std::max(sumsq(i) / n - mean * mean, 0.0);
      st.offset(i) = mean;
      st.scale(i) = std::max(std::sqrt(var), NormStats::kEps);
    }
  }

  for (int slot = 0; slot < 9; ++slot) {
    auto& d = st.ddm[static_cast<std::size_t>(slot)];
    const double c = dcount[static_cast<std::size_t>(slot)];
    if (c > 0.0) {
      d.mean = dsum[static_cast<std::size_t>(slot)] / c;
      d.var = (dsumsq[static_cast<std::size_t>(slot)] / c -
               d.mean.cwiseProduct(d.mean))
                  .cwiseMax(0.0);
    } else {
      d.mean = dsum[0] / dcount[0];  // unseen spacecraft: global stats
      d.var = (dsumsq[0] / dcount[0] - d.mean.cwiseProduct(d.mean))
                  .cwiseMax(0.0);
    }
  }
  st.fitted = true;
  return st;
}

FeatureBundle normalize_sample(const Sample& s, const NormStats& st) {
  if (!st.fitted) {
    throw std::logic_error("normalization statistics not fitted");
  }
  FeatureBundle b;
  const int sc = (s.obs.spacecraft_id >= 1 && s.obs.spacecraft_id <= 8)
                     ? s.obs.spacecraft_id
                     : 0;
  const auto& d = st.ddm[static_cast<std::size_t>(sc)];
  if (st.per_bin_ddm) {
    int k = 0;
    for (int r = 0; r < io::kDelayBins; ++r) {
      for (int c = 0; c < io::kDopplerBins; ++c, ++k) {
        b.ddm(r, c) = (s.obs.ddm(r, c) - d.mean(k)) /
                      std::sqrt(d.var(k) + NormStats::kEps * NormStats::kEps);
      }
    }
  } else {
    const double sd = std::sqrt(d.var(0));
    b.ddm = (s.obs.ddm.array() - d.mean(0)) / std::max(sd, NormStats::kEps);
  }

  const Eigen::VectorXd x = raw_features(s);
  b.ancillary = (x - st.offset).cwiseQuotient(st.scale);
  return b;
}

namespace {
void save_vec(io::ArrayFile& f, const std::string& name,
              const Eigen::VectorXd& v) {
  f.add_f64(name, std::span<const double>(v.data(),
                                          static_cast<std::size_t>(v.size())));
}

Eigen::VectorXd load_vec(const io::ArrayFile& f, const std::string& name) {
  const auto& var = f.var(name);
  Eigen::VectorXd v(static_cast<Eigen::Index>(var.elements()));
  const double* p = var.f64();
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = p[i];
  return v;
}
}  // namespace

void NormStats::save(io::ArrayFile& f, const std::string& prefix) const {
  if (!fitted) throw std::logic_error("cannot save unfitted statistics");
  f.set_attr(prefix + "per_bin_ddm", std::int64_t{per_bin_ddm ? 1 : 0});
  std::string joined;
  for (const auto& n : names) {
    if (!joined.empty()) joined += '\n';
    joined += n;
  }
  f.set_attr(prefix + "feature_names", joined);
  const int bins = static_cast<int>(ddm[0].mean.size());
  auto& vm = f.add(prefix + "ddm_mean", io::DType::kF64,
                   {9, static_cast<std::uint64_t>(bins)});
  auto& vv = f.add(prefix + "ddm_var", io::DType::kF64,
                   {9, static_cast<std::uint64_t>(bins)});
  for (int slot = 0; slot < 9; ++slot) {
    for (int k = 0; k < bins; ++k) {
      vm.f64()[slot * bins + k] = ddm[static_cast<std::size_t>(slot)].mean(k);
      vv.f64()[slot * bins + k] = ddm[static_cast<std::size_t>(slot)].var(k);
    }
  }
  auto& vk = f.add(prefix + "feature_kind", io::DType::kU8, {kind.size()});
  for (std::size_t i = 0; i < kind.size(); ++i) {
    vk.u8()[i] = static_cast<std::uint8_t>(kind[i]);
  }
  save_vec(f, prefix + "feature_offset", offset);
  save_vec(f, prefix + "feature_scale", scale);
}

NormStats NormStats::load(const io::ArrayFile& f, const std::string& prefix) {
  NormStats st;
  st.per_bin_ddm = f.attr_i64(prefix + "per_bin_ddm") != 0;
  const std::string joined = f.attr_str(prefix + "feature_names");
  st.names.clear();
  std::size_t start = 0;
  while (start <= joined.size()) {
    const std::size_t nl = joined.find('\n', start);
    if (nl == std::string::npos) {
      st.names.push_back(joined.substr(start));
      break;
    }
    st.names.push_back(joined.substr(start, nl - start));
    start = nl + 1;
  }
  const auto& vm = f.var(prefix + "ddm_mean");
  const auto& vv = f.var(prefix + "ddm_var");
  const int bins = static_cast<int>(vm.shape.at(1));
  for (int slot = 0; slot < 9; ++slot) {
    auto& d = st.ddm[static_cast<std::size_t>(slot)];
    d.mean.resize(bins);
    d.var.resize(bins);
    for (int k = 0; k < bins; ++k) {
      d.mean(k) = vm.f64()[slot * bins + k];
      d.var(k) = vv.f64()[slot * bins + k];
    }
  }
  const auto& vk = f.var(prefix + "feature_kind");
  st.kind.resize(vk.elements());
  for (std::size_t i = 0; i < st.kind.size(); ++i) {
    st.kind[i] = static_cast<Kind>(vk.u8()[i]);
  }
  st.offset = load_vec(f, prefix + "feature_offset");
  st.scale = load_vec(f, prefix + "feature_scale");
  if (st.names.size() != st.kind.size() ||
      st.offset.size() != static_cast<Eigen::Index>(st.kind.size()) ||
      st.scale.size() != st.offset.size()) {
    throw std::runtime_error("inconsistent normalization statistics");
  }
  st.fitted = true;
  return st;
}

Dataset make_dataset(const std::vector<Sample>& samples,
                     const NormStats& stats, bool with_targets) {
  const Eigen::Index n = static_cast<Eigen::Index>(samples.size());
  Dataset d;
  d.ancillary_names = stats.names;
  d.ddm.resize(io::kDelayBins * io::kDopplerBins, n);
  d.ancillary.resize(kAncillaryFeatures, n);
  if (with_targets) d.target.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Sample& s = samples[static_cast<std::size_t>(i)];
    const FeatureBundle fb = normalize_sample(s, stats);
    int k = 0;
    for (int r = 0; r < io::kDelayBins; ++r) {
      for (int c = 0; c < io::kDopplerBins; ++c, ++k) {
        d.ddm(k, i) = fb.ddm(r, c);
      }
    }
    d.ancillary.col(i) = fb.ancillary;
    if (with_targets) {
      if (!s.has_target || is_missing(s.target.soil_moisture) ||
          !std::isfinite(s.target.soil_moisture)) {
        throw std::runtime_error(
            "sample without usable reference value in a supervised set");
      }
      d.target(i) = s.target.soil_moisture;
    }
  }
  if (!d.ddm.allFinite() || !d.ancillary.allFinite()) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!d.ddm.col(i).allFinite()) {
        throw std::runtime_error("non-finite value in feature ddm");
      }
      for (int j = 0; j < d.ancillary.rows(); ++j) {
        if (!std::isfinite(d.ancillary(j, i))) {
          throw std::runtime_error(
              "non-finite value in feature " +
              d.ancillary_names[static_cast<std::size_t>(j)]);
        }
      }
    }
  }
  return d;
}

Dataset drop_features(const Dataset& data,
                      const std::vector<std::string>& names) {
  std::vector<bool> drop(data.ancillary_names.size(), false);
  for (const std::string& name : names) {
    const auto it = std::find(data.ancillary_names.begin(),
                              data.ancillary_names.end(), name);
    if (it == data.ancillary_names.end()) {
      throw std::invalid_argument("unknown feature: " + name);
    }
    const auto idx =
        static_cast<std::size_t>(it - data.ancillary_names.begin());
    if (drop[idx]) {
      throw std::invalid_argument("feature listed twice: " + name);
    }
    drop[idx] = true;
  }
  Dataset out;
  out.ddm = data.ddm;
  out.target = data.target;
  const auto keep =
      static_cast<Eigen::Index>(data.ancillary_names.size() - names.size());
  out.ancillary.resize(keep, data.ancillary.cols());
  out.ancillary_names.reserve(static_cast<std::size_t>(keep));
  Eigen::Index row = 0;
  for (std::size_t j = 0; j < data.ancillary_names.size(); ++j) {
    if (drop[j]) continue;
    out.ancillary.row(row++) = data.ancillary.row(static_cast<Eigen::Index>(j));
    out.ancillary_names.push_back(data.ancillary_names[j]);
  }
  return out;
}

}  // namespace gnssr::cond
