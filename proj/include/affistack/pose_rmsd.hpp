#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "affistack/error.hpp"
#include "affistack/ingest.hpp"

namespace affistack {

/// Sentinel RMSD marking a complex whose poses failed the geometric cutoff.
inline constexpr double kSentinelRmsd = 100.0;
/// Pose-agreement cutoff used when selecting poses.
inline constexpr double kSelectionCutoff = 3.0;

/// Element-typed nearest-neighbour RMSD from `a` to `b`:
/// sqrt(mean_i min_{j : elem_j == elem_i} |a_i - b_j|^2).
/// Coordinates are 3 x N column matrices of any scalar type.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar asymmetric_rmsd(const Eigen::MatrixBase<DerivedA>& a,
                                          std::span<const Element> a_elements,
                                          const Eigen::MatrixBase<DerivedB>& b,
                                          std::span<const Element> b_elements) {
  using Scalar = typename DerivedA::Scalar;
  static_assert(DerivedA::RowsAtCompileTime == 3 || DerivedA::RowsAtCompileTime == Eigen::Dynamic);
  if (a.cols() == 0 || b.cols() == 0) throw DataError("asymmetric_rmsd: empty structure");
  if (static_cast<std::size_t>(a.cols()) != a_elements.size() ||
      static_cast<std::size_t>(b.cols()) != b_elements.size())
    throw DataError("asymmetric_rmsd: element list does not match coordinates");

  Scalar sum(0);
  for (Eigen::Index i = 0; i < a.cols(); ++i) {
    Scalar best = std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
      if (b_elements[j] != a_elements[i]) continue;
      const Scalar d2 = (a.col(i) - b.col(j)).squaredNorm();
      if (d2 < best) best = d2;
    }
    if (!std::isfinite(best))
      throw DataError("asymmetric_rmsd: element " + std::string(a_elements[i].symbol()) +
                      " has no counterpart in the other structure");
    sum += best;
  }
  using std::sqrt;
  return sqrt(sum / static_cast<Scalar>(a.cols()));
}

/// Heavy-atom asymmetric RMSD between two molecules (no superposition).
double asymmetric_rmsd(const Molecule& a, const Molecule& b);
/// max(asymmetric(a, b), asymmetric(b, a)).
double symmetric_rmsd(const Molecule& a, const Molecule& b);

enum class FilterKind { Experimental, Consensus };

/// The three cutoffs used downstream: 101 keeps everything, 100 drops the
/// sentinel records, 3 keeps good pose agreement only.
enum class RmsdCutoff { Unfiltered, DropSentinel, Strict };

double cutoff_value(RmsdCutoff c);
/// "101.0", "100.0", "3.0".
std::string cutoff_label(RmsdCutoff c);
RmsdCutoff cutoff_from_value(double value);

struct RmsdFilterMode {
  FilterKind kind = FilterKind::Consensus;
  RmsdCutoff cutoff = RmsdCutoff::Unfiltered;

  /// "VvS" for consensus, "RelExpt" for experimental.
  std::string tag() const;
  friend bool operator==(const RmsdFilterMode&, const RmsdFilterMode&) = default;
};

std::string_view to_string(FilterKind k);
FilterKind filter_kind_from_string(std::string_view s);

struct SelectedPose {
  std::string complex_id;
  ScoringFunction scoring_function = ScoringFunction::Smina;
  int chosen_rank = 0;
  double energy = 0.0;
  double rmsd = kSentinelRmsd;
  friend bool operator==(const SelectedPose&, const SelectedPose&) = default;
};

/// Lowest-energy pose among those with RMSD to the experimental structure
/// strictly below `cutoff`; otherwise rank 0 with the sentinel RMSD. A failed
/// PoseSet yields rank 0 (energy 0 when it has no poses) with the sentinel.
SelectedPose experimental_filter(const PoseSet& poses, const Molecule& experimental,
                                 double cutoff = kSelectionCutoff);

/// Same rule applied to a precomputed per-pose RMSD vector.
SelectedPose select_experimental(const PoseSet& poses, std::span<const double> rmsds,
                                 double cutoff = kSelectionCutoff);

struct ConsensusChoice {
  int smina_rank = 0;
  int vinardo_rank = 0;
  double pair_rmsd = kSentinelRmsd;
  friend bool operator==(const ConsensusChoice&, const ConsensusChoice&) = default;
};

/// Pair choice over an RMSD matrix (rows = SMINA ranks, cols = Vinardo ranks):
/// among entries strictly below `cutoff`, minimum rank sum, then minimum RMSD,
/// then minimum SMINA rank. No qualifying entry gives (0, 0, sentinel).
ConsensusChoice select_consensus_pair(const Eigen::MatrixXd& pair_rmsd,
                                      double cutoff = kSelectionCutoff);

struct ConsensusResult {
  SelectedPose smina;
  SelectedPose vinardo;
  double pair_rmsd = kSentinelRmsd;
};

ConsensusResult consensus_filter(const PoseSet& smina, const PoseSet& vinardo,
                                 double cutoff = kSelectionCutoff);

/// Per-complex outcome of one filter kind. `rmsd` is the value compared against
/// the downstream cutoff.
struct FilterResult {
  FilterKind kind = FilterKind::Consensus;
  SelectedPose smina;
  SelectedPose vinardo;
  double rmsd = kSentinelRmsd;
  friend bool operator==(const FilterResult&, const FilterResult&) = default;
};

/// Experimental filtering applied to both scoring functions. The complex-level
/// RMSD is the larger of the two, so it passes only if both poses pass.
FilterResult experimental_filter_result(const PoseSet& smina, const PoseSet& vinardo,
                                        const Molecule& experimental,
                                        double cutoff = kSelectionCutoff);
FilterResult consensus_filter_result(const PoseSet& smina, const PoseSet& vinardo,
                                     double cutoff = kSelectionCutoff);

/// Filter-result TSV: complex_id, mode, cutoff, smina_rank, smina_energy,
/// vinardo_rank, vinardo_energy, rmsd.
std::string write_filter_table(std::span<const FilterResult> results, RmsdCutoff cutoff);
std::vector<FilterResult> parse_filter_table(std::string_view text);
/// e.g. "scores_VvS_3.0.tsv".
std::string filter_table_filename(const RmsdFilterMode& mode);

}  // namespace affistack
