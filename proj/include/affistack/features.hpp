#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "affistack/cohort.hpp"
#include "affistack/pca.hpp"

namespace affistack {

/// Meta-model feature groups. E: docking scores; W: molecular weight;
/// D1/D2/D3: per-architecture DL means; -F: fine-tuned; -P: PCA projections.
enum class FeatureGroup { E, EW, ED1, ED2, ED3, ED1F, ED2F, ED1FP, ED2FP, ED3P, EDAP };

inline constexpr FeatureGroup kAllFeatureGroups[] = {
    FeatureGroup::E,    FeatureGroup::EW,    FeatureGroup::ED1,   FeatureGroup::ED2,
    FeatureGroup::ED3,  FeatureGroup::ED1F,  FeatureGroup::ED2F,  FeatureGroup::ED1FP,
    FeatureGroup::ED2FP, FeatureGroup::ED3P, FeatureGroup::EDAP};

/// "E", "EW", "ED1", ..., "ED1-F", "ED1-F-P", "ED3-P", "ED-A-P".
std::string_view to_string(FeatureGroup g);
/// Accepts hyphens or underscores ("ED_A_P").
FeatureGroup feature_group_from_string(std::string_view s);

bool is_pca_group(FeatureGroup g);
bool uses_molecular_weight(FeatureGroup g);
/// Table whose per-architecture means are appended (ED1..ED2-F).
std::optional<TableGroup> mean_source(FeatureGroup g);
/// Tables whose columns are stacked before PCA (*-P groups).
std::vector<TableGroup> pca_tables(FeatureGroup g);
PcaSource pca_source(FeatureGroup g);

struct FeatureGroupSpec {
  FeatureGroup group = FeatureGroup::E;
  RmsdFilterMode rmsd_mode;
  /// Present exactly for *-P groups, in 1..22 by default.
  std::optional<int> pc_count;

  /// Throws ConfigError if pc_count presence does not match the group.
  void validate(int k_max = 22) const;
};

/// Named-column matrix, rows in lexicographic complex-id order.
struct FeatureMatrix {
  std::vector<std::string> complex_ids;
  std::vector<std::string> column_names;
  Eigen::MatrixXd values;
  /// Aligned ln-affinities; nullopt when any record lacks a label.
  std::optional<Eigen::VectorXd> labels;

  Eigen::Index rows() const { return values.rows(); }
  /// Columns reordered to `names`; throws DataError naming any missing column.
  FeatureMatrix select_columns(std::span<const std::string> names) const;
  /// Subset of rows by position.
  FeatureMatrix select_rows(std::span<const std::size_t> rows) const;
};

/// Header: complex_id, columns..., label (empty cells when unlabeled).
std::string write_feature_matrix(const FeatureMatrix& m);
FeatureMatrix parse_feature_matrix(std::string_view text);

/// Groups model-instance column ids into architectures.
using ArchitectureKey = std::function<std::string(std::string_view column_id)>;
/// First two '|'-separated fields ("D1F|Daylight_AAC|rep3|fold2" -> "D1F|Daylight_AAC").
std::string default_architecture_key(std::string_view column_id);

struct ArchitectureMeans {
  std::vector<std::string> architectures;  ///< first-appearance order
  Eigen::MatrixXd means;                   ///< rows aligned with table.row_ids()
};

ArchitectureMeans dl_mean_scores(const BasePredictionTable& table,
                                 const ArchitectureKey& key = default_architecture_key);

/// Stacked base predictions feeding the PCA of a *-P group.
BasePredictionTable pca_input_table(const Cohort& cohort, FeatureGroup group);

/// Columns: smina, vinardo [, mw] [, DL means | pc1..pck]. Docking scores are
/// the selected-pose energies of the group's filter kind. No filtering by RMSD
/// happens here. Throws DataError listing complexes that lack an input.
FeatureMatrix assemble_features(const Cohort& cohort, const FeatureGroupSpec& spec,
                                const PCABasis* pca = nullptr);

}  // namespace affistack
