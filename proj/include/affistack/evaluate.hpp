#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "affistack/error.hpp"

namespace affistack {

// ---------------------------------------------------------------------------
// Correlations and errors
// ---------------------------------------------------------------------------

/// Sample Pearson correlation. Throws NumericalError for constant input.
template <typename DerivedX, typename DerivedY>
typename DerivedX::Scalar pearson(const Eigen::DenseBase<DerivedX>& x,
                                  const Eigen::DenseBase<DerivedY>& y) {
  using Scalar = typename DerivedX::Scalar;
  if (x.size() != y.size()) throw DataError("pearson: length mismatch");
  if (x.size() < 2) throw NumericalError("pearson: need at least two values");
  const auto n = static_cast<Scalar>(x.size());
  const Scalar mx = x.derived().sum() / n;
  const Scalar my = y.derived().sum() / n;
  const auto dx = (x.derived().array() - mx).eval();
  const auto dy = (y.derived().array() - my).eval();
  const Scalar sxx = dx.square().sum();
  const Scalar syy = dy.square().sum();
  if (!(sxx > Scalar(0)) || !(syy > Scalar(0)))
    throw NumericalError("pearson: undefined for a constant vector");
  using std::sqrt;
  const Scalar r = (dx * dy).sum() / sqrt(sxx * syy);
  return std::clamp(r, Scalar(-1), Scalar(1));
}

/// 1-based ranks with ties given their average rank.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> average_ranks(
    const Eigen::DenseBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = v.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return v(a) < v(b); });
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> ranks(n);
  for (Eigen::Index i = 0; i < n;) {
    Eigen::Index j = i;
    while (j + 1 < n && v(order[j + 1]) == v(order[i])) ++j;
    const Scalar avg = Scalar(i + j + 2) / Scalar(2);
    for (Eigen::Index k = i; k <= j; ++k) ranks(order[k]) = avg;
    i = j + 1;
  }
  return ranks;
}

/// Pearson correlation of average ranks.
template <typename DerivedX, typename DerivedY>
typename DerivedX::Scalar spearman(const Eigen::DenseBase<DerivedX>& x,
                                   const Eigen::DenseBase<DerivedY>& y) {
  if (x.size() != y.size()) throw DataError("spearman: length mismatch");
  return pearson(average_ranks(x), average_ranks(y));
}

struct ErrorSummary {
  double mse = 0.0;
  double rmse = 0.0;
};

ErrorSummary mse_rmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth);

struct EvaluationReport {
  std::size_t n = 0;
  /// Unset when fewer than two points or a constant vector make them undefined.
  std::optional<double> pearson;
  std::optional<double> spearman;
  std::optional<double> mse;
  std::optional<double> rmse;
  std::map<std::string, double> per_complex_abs_error;
};

/// Joins predictions and truth on complex id; ids missing from `truth` are a
/// DataError. Metrics are unavailable (unset) when n < 2 or undefined.
EvaluationReport evaluate_predictions(const std::map<std::string, double>& predictions,
                                      const std::map<std::string, double>& truth);

/// Per-group reports; `group_of` maps complex id to a group label.
std::map<std::string, EvaluationReport> grouped_report(
    const std::map<std::string, double>& predictions, const std::map<std::string, double>& truth,
    const std::function<std::string(const std::string&)>& group_of);

/// "low" for MW <= threshold, "high" above.
std::function<std::string(const std::string&)> molecular_weight_grouping(
    const std::map<std::string, double>& molecular_weights, double threshold = 900.0);

// ---------------------------------------------------------------------------
// Monte Carlo subsampling null
// ---------------------------------------------------------------------------

class NullDistribution {
 public:
  explicit NullDistribution(std::vector<double> samples);
  /// Sorted ascending.
  const std::vector<double>& samples() const { return samples_; }
  /// Linear interpolation between order statistics, q in [0, 1].
  double quantile(double q) const;
  /// Fraction of samples >= value.
  double upper_tail(double value) const;

 private:
  std::vector<double> samples_;
};

/// Pearson correlations of `iters` uniform without-replacement subsets of
/// size `subset_size`. Iteration i uses its own derived stream.
NullDistribution monte_carlo_subsample_null(const Eigen::VectorXd& pred,
                                            const Eigen::VectorXd& truth,
                                            std::size_t subset_size, int iters,
                                            std::uint64_t seed, int workers = 1);

// ---------------------------------------------------------------------------
// Prediction synergy
// ---------------------------------------------------------------------------

/// Tool groups in tie-break priority order.
enum class ToolGroup { Meta, DL, Dock };
std::string_view to_string(ToolGroup g);

struct SynergyPartition {
  std::map<ToolGroup, std::size_t> counts;
  std::map<std::string, ToolGroup> assignment;
};

/// Winner per complex = group with the smallest absolute error among
/// `groups`; ties resolve Meta > DL > Dock. Throws DataError when a complex
/// lacks one of the groups.
SynergyPartition synergy_partition(
    const std::map<std::string, std::map<ToolGroup, double>>& abs_errors,
    const std::set<ToolGroup>& groups = {ToolGroup::Meta, ToolGroup::DL, ToolGroup::Dock});

// ---------------------------------------------------------------------------
// Virtual screening
// ---------------------------------------------------------------------------

/// Ascending: lower score = stronger predicted binder = ranked first.
enum class ScoreOrientation { Ascending, Descending };
ScoreOrientation orientation_from_string(std::string_view s);
std::string_view to_string(ScoreOrientation o);

struct ScoredLigand {
  std::string ligand_id;
  double score = 0.0;
  bool active = false;
};

/// Fraction of actives among the k best-ranked ligands (ties by ligand id).
double topk_recall(std::span<const ScoredLigand> ligands, int k,
                   ScoreOrientation orientation = ScoreOrientation::Ascending);
/// topk_recall with k = number of actives; 0 when there are none.
double precision_at_actives(std::span<const ScoredLigand> ligands,
                            ScoreOrientation orientation = ScoreOrientation::Ascending);

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Welch's unequal-variance t-test, two-sided, Welch-Satterthwaite df.
TestResult welch_t(std::span<const double> a, std::span<const double> b);

enum class MwuMethod { Auto, Exact, Asymptotic };

/// U statistic of sample `a` (rank sum of a minus n_a(n_a+1)/2), two-sided p.
/// Auto uses exact enumeration when n_a*n_b <= 400 and there are no ties,
/// otherwise the tie- and continuity-corrected normal approximation.
TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b,
                          MwuMethod method = MwuMethod::Auto);

struct TargetScreenReport {
  std::string target;
  std::size_t n_ligands = 0;
  std::size_t n_actives = 0;
  double top5_recall = 0.0;
  double top10_recall = 0.0;
  double precision_at_actives = 0.0;
  /// Active vs inactive score distributions; unset when a side is degenerate.
  std::optional<TestResult> welch;
  std::optional<TestResult> mwu;
};

/// One report per target, targets in lexicographic order. k larger than the
/// ligand count is clamped to it.
std::vector<TargetScreenReport> screen_report(
    const std::map<std::string, std::vector<ScoredLigand>>& by_target,
    ScoreOrientation orientation = ScoreOrientation::Ascending);

}  // namespace affistack
