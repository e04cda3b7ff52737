#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "gnssr/conditioning.hpp"
#include "gnssr/trainer.hpp"

namespace gnssr::studies {

// Marker naming the DDM branch in ablation groups, alongside ancillary
// feature names.
inline constexpr const char* kDdmMarker = "ddm";

// ------------------------------------------------------------------- types

struct AblationGroup {
  std::string name;
  std::vector<std::string> members;  // feature names and/or kDdmMarker
};

struct RunMetrics {
  double correlation = kMissing;
  double rmse = kMissing;
};

struct StudyRun {
  std::string label;
  RunMetrics metrics;
  std::string detail;  // comma-separated, e.g. removed features or sigma
};

struct StudyResult {
  std::string study;  // "ablation" or "noise"
  RunMetrics baseline;
  std::vector<StudyRun> runs;
  std::uint64_t eval_hash = 0;  // identity of the evaluation sample list
  std::size_t eval_count = 0;
};

struct StudyConfig {
  nn::NetworkConfig network;
  nn::TrainConfig trainer;
  double sample_fraction = 1.0;  // reduced-dataset mode for training
  std::uint64_t seed = 1;
};

// Order-sensitive fingerprint of a sample list; every run in a study must
// evaluate against the identical list.
std::uint64_t hash_samples(const std::vector<Sample>& samples);

// Correlation/RMSE of a prediction vector against a dataset's targets.
RunMetrics score_predictions(const Eigen::VectorXd& pred,
                             const Eigen::VectorXd& target);

// ---------------------------------------------------------------- ablation

// Trains a baseline plus one model per group with the group's inputs
// deleted outright (the feature dimension shrinks; naming the DDM branch
// removes it entirely), then scores every model on the same evaluation
// samples. Group names must be unique and members nonempty and known.
StudyResult run_ablation(const StudyConfig& cfg,
                         const std::vector<AblationGroup>& groups,
                         const std::vector<Sample>& train,
                         const std::vector<Sample>& dev,
                         const std::vector<Sample>& eval);

// ----------------------------------------------------------- noise probing

struct NoiseSpec {
  // Default relative amplitude: +/-5% at 90% two-sided confidence.
  double relative_sigma = 0.05 / 1.645;
  // Inputs with separately known uncertainty (relative sigma). Keys are
  // feature names or the DDM marker.
  std::map<std::string, double> overrides;
  std::uint64_t seed = 1;
};

double noise_sigma_for(const NoiseSpec& spec, const std::string& input);

// Multiplies the input addressed by `feature_idx` (manifest order) by
// `factor` in place; used by the sensitivity study and exposed for tests.
void scale_input(Sample& s, int feature_idx, double factor);

// Perturbs each input independently with multiplicative Gaussian noise and
// scores the trained network against the unperturbed targets; one extra run
// perturbs all inputs at once. DDM noise draws one factor per sample (the
// peak's noise) and applies it to the whole 17x11 array. Deterministic for
// a given spec seed.
StudyResult run_noise_sensitivity(nn::Network& net,
                                  const cond::NormStats& stats,
                                  const std::vector<Sample>& eval,
                                  const NoiseSpec& spec = {});

// ---------------------------------------------------------------- ensemble

struct EnsembleMember {
  std::uint64_t seed = 0;
  bool diverged = false;
  RunMetrics metrics;
  Eigen::VectorXd predictions;  // empty when diverged
};

struct EnsembleReport {
  std::vector<EnsembleMember> members;
  std::size_t survivors = 0;
  // Across surviving members:
  double corr_mean = kMissing, corr_std = kMissing;
  double rmse_mean = kMissing, rmse_std = kMissing;
  // Per-sample prediction spread (population std across members), then
  // aggregated across samples:
  double sample_std_mean = kMissing, sample_std_std = kMissing;
  std::uint64_t eval_hash = 0;
  std::size_t eval_count = 0;
  std::vector<std::string> warnings;
};

// Trains n models differing only by seed (network init and batch shuffle)
// and reports dispersion. Diverged members are excluded from the statistics
// and reported. Seeds default to base_seed, base_seed+1, ...
EnsembleReport train_ensemble(const StudyConfig& cfg, int n_seeds,
                              const std::vector<Sample>& train,
                              const std::vector<Sample>& dev,
                              const std::vector<Sample>& eval);
EnsembleReport train_ensemble(const StudyConfig& cfg,
                              const std::vector<std::uint64_t>& seeds,
                              const std::vector<Sample>& train,
                              const std::vector<Sample>& dev,
                              const std::vector<Sample>& eval);

// ------------------------------------------------------------ result files
//
// Human-readable structured text: '#' comments, one "key value..." record
// per line. Written with full precision so read-back is exact.

void write_study_text(const StudyResult& result,
                      const std::filesystem::path& path);
StudyResult read_study_text(const std::filesystem::path& path);

void write_ensemble_text(const EnsembleReport& report,
                         const std::filesystem::path& path);
EnsembleReport read_ensemble_text(const std::filesystem::path& path);

}  // namespace gnssr::studies
