#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "gnssr/container.hpp"
#include "gnssr/samples.hpp"
#include "gnssr/timeutil.hpp"

namespace gnssr::cond {

// ---------------------------------------------------------------- filtering

struct FilterConfig {
  std::uint32_t source_flag_mask =
      io::kObsFlagUnusable | io::kObsFlagCalibrationEvent;
  double min_ddm_snr_db = 1.0;     // keep strictly above
  double min_sp_rx_gain_db = 1.0;  // keep strictly above
  double max_incidence_deg = 65.0; // keep strictly below
  double max_water_fraction = 0.01;
  double max_elevation_m = 3000.0;
};

// Rules are evaluated in this fixed order; a sample is attributed to the
// first rule it fails.
enum class RejectReason : int {
  kNone = 0,
  kSourceFlags,
  kSnr,
  kGain,
  kIncidence,
  kRfi,
  kWater,
  kElevation,
  kReasonCount
};

const char* reject_reason_name(RejectReason r);

// Missing water fraction or elevation rejects under the respective rule: a
// sample that cannot be screened is not retrievable.
RejectReason first_rejection(const Sample& s, const FilterConfig& cfg);

struct FilterReport {
  std::size_t total = 0;
  std::size_t kept = 0;
  std::array<std::size_t,
             static_cast<std::size_t>(RejectReason::kReasonCount)>
      rejected_by{};  // indexed by RejectReason

  double kept_fraction() const {
    return total == 0 ? 0.0 : double(kept) / double(total);
  }
};

std::vector<Sample> filter_samples(std::vector<Sample> samples,
                                   const FilterConfig& cfg,
                                   FilterReport* report = nullptr);

// ------------------------------------------------------- target conditioning

struct TargetReport {
  std::size_t total = 0;
  std::size_t without_target = 0;
  std::size_t dropped_unsuccessful = 0;
  std::size_t dropped_precipitation = 0;
  std::size_t kept = 0;
  std::size_t kept_not_recommended = 0;  // retained, flag carried forward
};

// Keeps samples usable as supervised pairs: a reference value exists, is
// not an unsuccessful retrieval, and was not observed under precipitation.
// "Not recommended" references are retained and counted.
std::vector<Sample> training_pairs(std::vector<Sample> samples,
                                   TargetReport* report = nullptr);

// ------------------------------------------------------------------ splits

// Half-open [begin, end) over UTC days.
struct DateWindow {
  Date begin;
  Date end;

  bool contains(const Date& d) const { return begin <= d && d < end; }
  bool contains(UtcSeconds t) const {
    return day_start(begin) <= t && t < day_start(end);
  }
};

struct SplitWindows {
  DateWindow train{{2021, 1, 1}, {2023, 1, 1}};
  DateWindow dev{{2023, 1, 1}, {2024, 1, 1}};
  DateWindow validation{{2018, 8, 1}, {2021, 1, 1}};

  void validate() const;  // throws on empty or overlapping windows
};

enum class Split { kTrain, kDev, kValidation, kNone };

Split classify(UtcSeconds t, const SplitWindows& w);

struct SplitSamples {
  std::vector<Sample> train, dev, validation;
};

SplitSamples split_by_window(std::vector<Sample> samples,
                             const SplitWindows& w);

// -------------------------------------------------------------- downsample

// Thins each (spacecraft, transmitter) stream to every factor-th sample in
// time order, emulating a reduced sample rate; output is sorted by
// (timestamp, spacecraft, prn).
std::vector<Sample> downsample_alongtrack(const std::vector<Sample>& samples,
                                          int factor);

// ---------------------------------------------------------------- features

// Fixed ancillary feature order; landcover fractions occupy the tail.
inline constexpr int kAncillaryFeatures = 16 + kLandcoverClasses;  // 33

const std::vector<std::string>& feature_names();
int feature_index(const std::string& name);  // throws on unknown name

// Assembles the raw (unnormalized) ancillary vector. Requires a complete
// ancillary record and a valid reflectivity; throws naming the first
// missing field otherwise.
Eigen::VectorXd raw_features(const Sample& s);

// ------------------------------------------------------------ normalization

// Input scaling fitted on training data only. Bounded features use min-max
// to [0,1]; unbounded features use z-scores (population variance). DDM bins
// are standardized with per-spacecraft statistics, either pooled over all
// bins (default) or per bin; slot 0 holds the pooled all-spacecraft
// fallback used for spacecraft unseen in training.
struct NormStats {
  static constexpr double kEps = 1e-12;

  enum class Kind : std::uint8_t { kMinMax = 0, kZScore = 1 };

  bool fitted = false;
  bool per_bin_ddm = false;
  struct DdmStats {
    Eigen::VectorXd mean, var;  // length 1 (pooled) or one per bin
  };
  std::array<DdmStats, 9> ddm;  // [0] global, [1..8] per spacecraft
  std::vector<std::string> names;
  std::vector<Kind> kind;
  Eigen::VectorXd offset, scale;  // x' = (x - offset) / scale

  void save(io::ArrayFile& f, const std::string& prefix) const;
  static NormStats load(const io::ArrayFile& f, const std::string& prefix);
};

NormStats fit_normalization(const std::vector<Sample>& train,
                            bool per_bin_ddm = false);

struct FeatureBundle {
  io::DdmMatrix ddm;
  Eigen::VectorXd ancillary;
};

FeatureBundle normalize_sample(const Sample& s, const NormStats& stats);

// ----------------------------------------------------------------- dataset

// Column-per-sample design matrices ready for training or inference.
struct Dataset {
  Eigen::MatrixXd ddm;       // 187 x N, DDM flattened row-major
  Eigen::MatrixXd ancillary; // F x N
  Eigen::VectorXd target;    // N (unset for inference-only sets)
  std::vector<std::string> ancillary_names;

  Eigen::Index size() const { return ddm.cols(); }
};

Dataset make_dataset(const std::vector<Sample>& samples,
                     const NormStats& stats, bool with_targets = true);

// Removes the named ancillary features outright: the feature dimension
// shrinks and the manifest no longer lists them. Unknown or duplicate names
// throw.
Dataset drop_features(const Dataset& data,
                      const std::vector<std::string>& names);

}  // namespace gnssr::cond
