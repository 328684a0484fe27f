#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace affistack {

class Rng;

// ---------------------------------------------------------------------------
// Cross-validation splits
// ---------------------------------------------------------------------------

/// Shuffled k-fold test sets: fold sizes differ by at most one (the first
/// n % folds folds get the extra row); indices within a fold are sorted.
std::vector<std::vector<std::size_t>> shuffled_kfold(std::size_t n, int folds, Rng& rng);
/// Complement of `test` in 0..n-1, sorted.
std::vector<std::size_t> complement_rows(std::size_t n, const std::vector<std::size_t>& test);

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, const std::vector<std::size_t>& rows);
Eigen::VectorXd take_rows(const Eigen::VectorXd& y, const std::vector<std::size_t>& rows);

// ---------------------------------------------------------------------------
// Linear models
// ---------------------------------------------------------------------------

/// Per-feature z-scoring with training statistics. Zero-variance columns get
/// scale 1.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static Standardizer fit(const Eigen::MatrixXd& x);
  static Standardizer identity(Eigen::Index width);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
};

enum class LinearAlgorithm { Ols, Lasso, ElasticNet };
std::string_view to_string(LinearAlgorithm a);
LinearAlgorithm linear_algorithm_from_string(std::string_view s);

struct LinearDiagnostics {
  /// Duality gap of the final fit on the 1/(2n) objective scale.
  double duality_gap = 0.0;
  int iterations = 0;
  bool converged = true;
  /// Mean validation MSE at the chosen alpha (CV fits only).
  double cv_mse = 0.0;
  /// Index of the winning shuffle repeat (CV fits only).
  int selected_repeat = -1;
  std::string selection_rule;
};

/// y = standardize(X) * coefficients + intercept.
struct LinearModel {
  LinearAlgorithm algorithm = LinearAlgorithm::Ols;
  Eigen::VectorXd coefficients;
  double intercept = 0.0;
  double alpha = 0.0;
  double l1_ratio = 1.0;
  Standardizer standardizer;
  LinearDiagnostics diagnostics;

  /// Coefficients on the unstandardized inputs.
  Eigen::VectorXd raw_coefficients() const;
  double raw_intercept() const;
};

struct LinearFitOptions {
  bool standardize = true;
  bool fit_intercept = true;
  /// Stop when the duality gap drops below tol * ||y - mean(y)||^2.
  double tol = 1e-6;
  int max_sweeps = 10000;
};

struct CoordinateDescentResult {
  Eigen::VectorXd beta;
  /// Unscaled gap of 0.5||y - Xb||^2 + n*alpha*(l1||b||_1 + (1-l1)/2 ||b||^2).
  double gap = 0.0;
  int sweeps = 0;
  bool converged = false;
};

/// Cyclic coordinate descent on (1/(2n))||y - Xb||^2 + alpha*l1_ratio*||b||_1
/// + alpha*(1-l1_ratio)/2*||b||^2. X and y are used as given (no centering).
/// Converges when the duality gap <= tol_abs, or when every coordinate
/// satisfies its optimality condition to machine precision.
CoordinateDescentResult coordinate_descent(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                           double alpha, double l1_ratio, double tol_abs,
                                           int max_sweeps,
                                           const Eigen::VectorXd* warm_start = nullptr);

/// Least squares through a complete orthogonal decomposition (minimum-norm
/// solution for rank-deficient inputs).
LinearModel fit_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                    const LinearFitOptions& options = {});
LinearModel fit_lasso_cd(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double alpha,
                         const LinearFitOptions& options = {});
LinearModel fit_elasticnet_cd(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double alpha,
                              double l1_ratio, const LinearFitOptions& options = {});

/// Largest alpha with a non-zero solution on standardized, centered data.
double alpha_max(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double l1_ratio,
                 const LinearFitOptions& options = {});
/// `count` geometric steps from alpha_max down to eps * alpha_max.
std::vector<double> alpha_grid(double alpha_max, int count = 100, double eps = 1e-3);

inline const std::vector<double> kElasticNetL1Ratios = {0.1, 0.5, 0.7, 0.9, 0.95, 0.99, 1.0};

struct PenalizedCvOptions {
  int folds = 5;
  /// Shuffled CV repeats (per l1 ratio for ElasticNet).
  int repeats = 100;
  int n_alphas = 100;
  double eps = 1e-3;
  std::vector<double> l1_ratios = {1.0};
  LinearFitOptions fit;
  int workers = 1;
};

/// For every (l1_ratio, repeat): shuffle, pick alpha by mean validation MSE
/// over the folds, refit on all rows. Returns the refit with the smallest
/// duality gap (first candidate on ties).
LinearModel fit_penalized_cv(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                             const PenalizedCvOptions& options, std::uint64_t seed);

LinearModel fit_lasso_cv(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int folds,
                         int repeats, std::uint64_t seed, int workers = 1);
LinearModel fit_elasticnet_cv(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int folds,
                              int repeats_per_ratio, std::uint64_t seed, int workers = 1,
                              const std::vector<double>& l1_ratios = kElasticNetL1Ratios);

Eigen::VectorXd predict(const LinearModel& model, const Eigen::MatrixXd& x);

// ---------------------------------------------------------------------------
// Gradient-boosted regression trees
// ---------------------------------------------------------------------------

struct GBTHyperparams {
  int n_estimators = 125;
  int max_depth = 4;
  double learning_rate = 0.1;
  double subsample = 0.5;
  double colsample_bytree = 0.5;
  /// Minimum squared-error reduction required to keep a split.
  double gamma = 0.0;

  /// Structural validity: counts >= 0, fractions in (0, 1], gamma >= 0.
  void validate() const;
  /// Inside the randomized-search ranges.
  bool within_search_ranges() const;
  friend bool operator==(const GBTHyperparams&, const GBTHyperparams&) = default;
};

/// Search ranges: n_estimators {100..150}, max_depth {2..6}, learning_rate
/// [0.02, 0.3], subsample [0.3, 0.7], colsample_bytree [0.2, 0.8], gamma [0, 0.5].
GBTHyperparams draw_gbt_hyperparams(Rng& rng);

struct TreeNode {
  int feature = -1;  ///< -1 for leaves
  double threshold = 0.0;  ///< rows with x[feature] < threshold go left
  int left = -1;
  int right = -1;
  double value = 0.0;
  bool is_leaf() const { return feature < 0; }
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  ///< nodes[0] is the root

  double predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
  /// Number of edges on the longest root-to-leaf path.
  int depth() const;
};

struct GBTModel {
  std::vector<RegressionTree> trees;
  double base_prediction = 0.0;
  GBTHyperparams hyperparams;
  Eigen::Index n_features = 0;
};

/// Squared-error boosting with exact greedy splits. Each tree sees a row
/// subsample drawn without replacement and a column subsample. When
/// `training_mse` is given it receives the training MSE after each round
/// (index 0 = base prediction only).
GBTModel fit_gbt(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GBTHyperparams& hp,
                 std::uint64_t seed, std::vector<double>* training_mse = nullptr);

Eigen::VectorXd predict(const GBTModel& model, const Eigen::MatrixXd& x);

struct GbtSearchResult {
  GBTModel model;
  GBTHyperparams best;
  double best_score = 0.0;  ///< mean validation R^2
  std::vector<GBTHyperparams> candidates;
  std::vector<double> scores;
};

/// Randomized search over the ranges of draw_gbt_hyperparams, scored by mean
/// validation R^2 over shuffled folds; the best setting (first on ties) is
/// refit on all rows.
GbtSearchResult random_search_gbt(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                  int n_iter, int folds, std::uint64_t seed, int workers = 1);

/// Coefficient of determination; 0 when the truth is constant and imperfectly fit.
double r2_score(const Eigen::VectorXd& truth, const Eigen::VectorXd& pred);

}  // namespace affistack
