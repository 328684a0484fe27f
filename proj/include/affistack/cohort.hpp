#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "affistack/ingest.hpp"
#include "affistack/pose_rmsd.hpp"

namespace affistack {

enum class Partition { Train, CoreSet, GeneralSet, Screen };
std::string_view to_string(Partition p);
Partition partition_from_string(std::string_view s);

struct ComplexRecord {
  Partition partition = Partition::Train;
  std::optional<AffinityLabel> label;
  std::map<ScoringFunction, PoseSet> pose_sets;
  std::optional<Molecule> experimental_pose;
  std::optional<Molecule> ligand;
  /// Overrides the structure-derived molecular weight when set.
  std::optional<double> molecular_weight;
  std::map<FilterKind, FilterResult> filter_results;

  /// Explicit value, else the ligand, the experimental pose or the top SMINA
  /// pose, in that order. nullopt when no structure is available.
  std::optional<double> resolve_molecular_weight() const;
};

/// Complexes keyed by id (iteration is lexicographic) plus the shared
/// base-prediction tables.
class Cohort {
 public:
  std::map<std::string, ComplexRecord> records;
  std::map<TableGroup, std::shared_ptr<const BasePredictionTable>> base_tables;

  std::vector<std::string> ids(std::optional<Partition> partition = std::nullopt) const;
  /// Same tables, only records in `partition`.
  Cohort subset(Partition partition) const;
  /// Throws DataError if the group has no table.
  const BasePredictionTable& table(TableGroup group) const;
  /// Every base table covers every record with a label in TRAIN.
  void validate() const;
};

/// Run the selection procedure of `kind` for every record that has both pose
/// sets and stores the result in the record. Records are processed
/// independently and may run on `workers` threads.
void compute_filter_results(Cohort& cohort, FilterKind kind, int workers = 1);

/// Keep TRAIN records whose stored RMSD is strictly below the cutoff; every
/// other partition passes through unchanged.
Cohort apply_rmsd_cutoff(const Cohort& cohort, const RmsdFilterMode& mode);

}  // namespace affistack
