#pragma once

#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "affistack/ingest.hpp"

namespace affistack {

/// Which prediction set a basis was fitted on.
enum class PcaSource { D1FP, D2FP, D3P, DAP };
std::string_view to_string(PcaSource s);
PcaSource pca_source_from_string(std::string_view s);

/// Center-only PCA basis. `components` holds one unit loading vector per
/// column, ordered by decreasing singular value; each column's entries sum to
/// a non-negative value.
struct PCABasis {
  Eigen::VectorXd column_means;
  Eigen::MatrixXd components;
  Eigen::VectorXd singular_values;
  PcaSource source = PcaSource::DAP;
  Eigen::Index n_rows = 0;

  Eigen::Index input_width() const { return column_means.size(); }
  Eigen::Index component_count() const { return components.cols(); }
  /// singular_value^2 / (n_rows - 1).
  Eigen::VectorXd explained_variance() const;
  Eigen::VectorXd explained_variance_ratio() const;
};

inline constexpr std::string_view kPcaSignConvention = "loading-sum-nonnegative";

/// Requires >= 2 rows and >= 1 column of finite values.
PCABasis fit_pca(const Eigen::MatrixXd& rows, PcaSource source);
PCABasis fit_pca(const BasePredictionTable& table, PcaSource source);

/// (rows - means) * components[:, :k].
Eigen::MatrixXd project(const PCABasis& basis, const Eigen::MatrixXd& rows, Eigen::Index k);

/// Inverse of a full projection: scores * components^T + means.
Eigen::MatrixXd reconstruct(const PCABasis& basis, const Eigen::MatrixXd& scores);

/// Trains on the training split and predicts the validation split for one
/// candidate PC count. Inputs are [fixed columns | first k PC scores].
using PcCandidateLearner = std::function<Eigen::VectorXd(
    const Eigen::MatrixXd& train_x, const Eigen::VectorXd& train_y,
    const Eigen::MatrixXd& valid_x, int k)>;

struct PcCountSelection {
  int best_k = 1;
  /// Validation Pearson for k = 1..k_max; -inf where predictions were constant.
  std::vector<double> validation_pearson;
  std::vector<std::size_t> validation_rows;
};

/// Sweep k = 1..k_max on a uniform random split holding out
/// `validation_fraction` of the rows, pick the k with the largest validation
/// Pearson (ties, within 1e-12, go to the smaller k). `pc_scores` needs >= k_max columns.
PcCountSelection optimize_pc_count(const Eigen::MatrixXd& fixed_columns,
                                   const Eigen::MatrixXd& pc_scores,
                                   const Eigen::VectorXd& labels,
                                   const PcCandidateLearner& learner, int k_max,
                                   std::uint64_t split_seed,
                                   double validation_fraction = 0.2, int workers = 1);

}  // namespace affistack
