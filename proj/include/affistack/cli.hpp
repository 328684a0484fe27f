#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "affistack/cohort.hpp"
#include "affistack/evaluate.hpp"
#include "affistack/features.hpp"
#include "affistack/pipeline.hpp"

namespace affistack {

/// Run configuration read from JSON. Relative paths resolve against the
/// directory holding the config file.
struct RunConfig {
  std::filesystem::path base_dir;

  std::string labels;
  std::string partitions;
  std::string poses_dir;
  std::string experimental_dir;
  std::string ligands_dir;
  std::string molecular_weights;
  std::map<TableGroup, std::string> score_tables;
  /// Precomputed filter results, used instead of the pose files.
  std::map<FilterKind, std::string> filter_tables;

  std::vector<FeatureGroup> groups;
  std::vector<MetaAlgorithm> algorithms;
  std::vector<RmsdFilterMode> rmsd_modes;

  std::uint64_t seed = kDefaultSeed;
  std::string output_dir = "out";
  int workers = 1;
  TrainingProtocol protocol;
  ScoreOrientation orientation = ScoreOrientation::Ascending;
  double mw_threshold = 900.0;

  /// Model names averaged for the META group (empty: every ED-A-P model of
  /// the matrix) and prediction files averaged for DL and DOCK.
  std::vector<std::string> synergy_meta;
  std::vector<std::string> synergy_dl;
  std::vector<std::string> synergy_dock;
  std::size_t null_subset = 0;
  int null_iters = 0;

  std::filesystem::path resolve(const std::string& path) const;
  std::filesystem::path output_path() const { return resolve(output_dir); }
};

/// Command-line overrides applied on top of the file.
struct ConfigOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> output_dir;
  std::vector<std::string> groups;
  std::vector<std::string> algorithms;
  std::vector<std::string> modes;
  std::vector<double> cutoffs;
};

/// Throws ConfigError for unknown keys, bad values, missing paths or an empty
/// run matrix.
RunConfig parse_run_config(const std::string& json_text, const std::filesystem::path& base_dir,
                           const ConfigOverrides& overrides = {});
RunConfig load_run_config(const std::filesystem::path& path, const ConfigOverrides& overrides = {});

/// Content hash of every configured input file, keyed by its path as written
/// in the config (pose files as "<poses_dir>/<file>").
std::map<std::string, std::string> input_hashes(const RunConfig& config);

/// Builds the cohort and computes the filter results of every configured
/// mode. Pose files that fail to parse are reported in `pose_errors` (one
/// entry per complex) when given; otherwise they throw.
Cohort load_cohort(const RunConfig& config,
                   std::map<std::string, std::string>* pose_errors = nullptr);

/// Two-column TSV (id, value) with a header row.
std::map<std::string, double> read_value_table(const std::filesystem::path& path);
std::string write_value_table(const std::map<std::string, double>& values,
                              const std::string& value_header);

/// Entry point of the `affistack` executable. Returns the process exit code:
/// 0 success, 1 usage or configuration error, 2 data error, 3 numerical failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace affistack
