#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gnssr/conditioning.hpp"
#include "gnssr/network.hpp"
#include "gnssr/products.hpp"
#include "gnssr/studies.hpp"
#include "gnssr/synthgen.hpp"
#include "gnssr/timeutil.hpp"
#include "gnssr/trainer.hpp"
#include "gnssr/validation.hpp"
#include "gnssr/warehouse.hpp"

namespace gnssr::pipeline {

// Environment override for the root every relative path hangs from.
inline constexpr const char* kDataRootEnv = "GNSSR_DATA_ROOT";

// Orchestrator settings. Loaded from a JSON file; every field has a default
// so an empty object is a valid configuration. Relative paths resolve
// against data_root.
struct PipelineConfig {
  std::filesystem::path data_root = ".";
  std::filesystem::path lake = "lake";            // tracks + ancillary + targets
  std::filesystem::path warehouse = "warehouse";  // matched sample archive
  std::filesystem::path products = "products";    // the release inventory
  std::filesystem::path models = "models";        // weights + normalization
  std::filesystem::path logs = "logs";            // run reports, provenance
  std::filesystem::path studies = "studies";      // study result tables

  cond::FilterConfig filter;
  cond::SplitWindows splits;
  nn::NetworkConfig network;
  nn::TrainConfig trainer;

  products::GridMethod grid_method = products::GridMethod::kIdw;
  double idw_power = 2.0;
  std::string version = "v1.0";
  int backfill_days = 7;
  int workers = 1;
  warehouse::MatchupPolicy matchup;
  double rfi_factor = 5.0;

  // Study settings (cmd_study).
  std::string study_kind = "ablation";  // ablation | noise | ensemble
  std::vector<studies::AblationGroup> ablation_groups;
  studies::NoiseSpec noise;
  int ensemble_seeds = 10;
  double study_sample_fraction = 1.0;
  std::uint64_t study_seed = 1;

  // World settings (cmd_synth), applied on top of synth defaults.
  synth::WorldConfig world;

  // In-situ site list for cmd_validate, resolved like the other paths.
  std::filesystem::path sites = "sites.txt";

  void validate() const;  // throws std::invalid_argument

  std::filesystem::path resolve(const std::filesystem::path& p) const;
  std::filesystem::path lake_dir() const { return resolve(lake); }
  std::filesystem::path warehouse_dir() const { return resolve(warehouse); }
  std::filesystem::path products_dir() const { return resolve(products); }
  std::filesystem::path models_dir() const { return resolve(models); }
  std::filesystem::path logs_dir() const { return resolve(logs); }
  std::filesystem::path studies_dir() const { return resolve(studies); }
  std::filesystem::path sites_file() const { return resolve(sites); }

  std::filesystem::path weights_file() const;  // models/weights_<version>.bin
  std::filesystem::path norm_file() const;     // models/norm_<version>.bin
};

// Strict parser: unknown keys anywhere are configuration errors, as are
// ill-typed values. `origin` names the source in error messages.
PipelineConfig config_from_json(const std::string& text,
                                const std::string& origin);
PipelineConfig load_config(const std::filesystem::path& path);

// Canonical single-line JSON rendering of every setting; equal configs give
// equal strings. The hash of that string stamps provenance records.
std::string canonical_json(const PipelineConfig& cfg);
std::uint64_t config_hash(const PipelineConfig& cfg);

// ------------------------------------------------------------------- daily

enum class DayStatus { kProcessed, kSkipped, kEmpty, kFailed };

const char* day_status_name(DayStatus s);

struct DayOutcome {
  Date day{};
  DayStatus status = DayStatus::kProcessed;
  std::size_t observations = 0;
  std::size_t kept = 0;          // retrievals surviving the filter chain
  std::size_t files_written = 0; // outputs created or changed on disk
  std::size_t files_kept = 0;    // outputs already byte-identical
  std::uint64_t input_hash = 0;  // over the day's track files
  std::string error;             // kFailed only
};

struct RunReport {
  std::vector<DayOutcome> days;
  std::size_t files_written = 0;
  std::size_t files_kept = 0;
  std::size_t failed = 0;
  std::uint64_t config_hash = 0;
  std::uint64_t weights_hash = 0;

  // 0 = clean, 1 = some days failed.
  int exit_code() const { return failed == 0 ? 0 : 1; }
};

// One operational sweep over [first, last] (inclusive; an inverted range is
// an empty sweep). Per day: ingest tracks, match ancillary and reference
// grids, persist warehouse samples, filter + predict, write per-spacecraft
// L2 and hourly + daily L3 products. Every file is staged and committed only
// when its bytes differ from what is already on disk, so identical reruns
// rewrite nothing and interrupted runs converge. Days older than the
// backfill window whose daily L3 product already exists are skipped
// entirely; younger days are always reprocessed so late-arriving reference
// grids reach the warehouse records (retrievals do not depend on them).
// Failures are contained per day. Writes a run report and provenance record
// under logs/.
RunReport cmd_daily(const PipelineConfig& cfg, const Date& first,
                    const Date& last);

// ------------------------------------------------------------------- train

struct TrainOutcome {
  std::filesystem::path weights_path;
  std::filesystem::path norm_path;
  std::uint64_t weights_hash = 0;
  int best_epoch = -1;
  double best_dev_loss = 0.0;
  std::size_t train_samples = 0;
  std::size_t dev_samples = 0;
  std::vector<nn::EpochStats> curve;
};

// Trains on warehouse samples inside the configured split windows and writes
// the weight and normalization files the daily loop loads. Deterministic:
// identical config + warehouse give identical weight-file bytes.
TrainOutcome cmd_train(const PipelineConfig& cfg);

// Learning-rate range scan on the same data the trainer would see; writes
// nothing but the log.
nn::LrRangeResult cmd_find_lr(const PipelineConfig& cfg);

// ------------------------------------------------------------------- study

struct StudyOutcome {
  std::filesystem::path path;
  studies::StudyResult study;      // ablation | noise
  studies::EnsembleReport ensemble;  // ensemble only
};

StudyOutcome cmd_study(const PipelineConfig& cfg);

// ---------------------------------------------------------------- validate

struct ValidateOutcome {
  std::vector<validation::SiteStats> sites;
  validation::LandcoverBreakdown breakdown;
  std::size_t eligible = 0;
  std::size_t skipped_sparse = 0;  // eligible but < 2 product matchups
  std::filesystem::path report_path;
};

// Scores the product archive against the in-situ site file over [first,
// last]: eligibility screen, daily matchups against the L2 records within a
// footprint diameter, per-site and per-landcover statistics. Writes a text
// report under logs/.
ValidateOutcome cmd_validate(const PipelineConfig& cfg, const Date& first,
                             const Date& last);

// ------------------------------------------------------------------ report

// Renders every readable study table under studies/ (stable order) into a
// plain-text summary.
std::string cmd_report(const PipelineConfig& cfg);

// ------------------------------------------------------------------- synth

struct SynthOutcome {
  std::filesystem::path root;
  int days = 0;
};

// Generates the configured synthetic world into the lake directory.
SynthOutcome cmd_synth(const PipelineConfig& cfg);

}  // namespace gnssr::pipeline
