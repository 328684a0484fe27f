#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "affistack/cohort.hpp"
#include "affistack/features.hpp"
#include "affistack/learners.hpp"
#include "affistack/pca.hpp"

namespace affistack {

inline constexpr std::uint64_t kDefaultSeed = 1701;
inline constexpr std::string_view kFormatVersion = "affistack-model/1";

// ---------------------------------------------------------------------------
// Repeated k-fold plan
// ---------------------------------------------------------------------------

struct CvPlan {
  std::size_t n_rows = 0;
  int folds = 5;
  int repeats = 10;
  std::uint64_t seed = kDefaultSeed;
  /// assignments[repeat][fold] = sorted test-row indices.
  std::vector<std::vector<std::vector<std::size_t>>> assignments;

  const std::vector<std::size_t>& test_rows(int repeat, int fold) const {
    return assignments.at(static_cast<std::size_t>(repeat)).at(static_cast<std::size_t>(fold));
  }
  std::vector<std::size_t> train_rows(int repeat, int fold) const;
};

CvPlan repeated_kfold(std::size_t n, int folds = 5, int repeats = 10,
                      std::uint64_t seed = kDefaultSeed);

// ---------------------------------------------------------------------------
// Meta-models
// ---------------------------------------------------------------------------

enum class MetaAlgorithm { LinReg, Lasso, ElasticNet, XGB };
inline constexpr MetaAlgorithm kAllMetaAlgorithms[] = {
    MetaAlgorithm::LinReg, MetaAlgorithm::Lasso, MetaAlgorithm::ElasticNet, MetaAlgorithm::XGB};
/// "LinReg", "LASSO", "ElasticNet", "XGB".
std::string_view to_string(MetaAlgorithm a);
MetaAlgorithm meta_algorithm_from_string(std::string_view s);

/// Budgets of the training protocols. Defaults are the full-scale settings.
struct TrainingProtocol {
  int folds = 5;
  int lasso_repeats = 100;
  int enet_repeats_per_ratio = 10;
  int gbt_search_iters = 100;
  int pc_k_max = 22;
  double pc_validation_fraction = 0.2;
  /// Budgets used inside the PC-count sweep; a GBT budget of 0 fits the
  /// fixed default hyperparameters instead of searching.
  int sweep_lasso_repeats = 1;
  int sweep_enet_repeats_per_ratio = 1;
  int sweep_gbt_search_iters = 0;
  int workers = 1;
};

using MetaModel = std::variant<LinearModel, GBTModel>;

/// Full protocol of `algorithm` on (x, y).
MetaModel fit_algorithm(MetaAlgorithm algorithm, const Eigen::MatrixXd& x,
                        const Eigen::VectorXd& y, const TrainingProtocol& protocol,
                        std::uint64_t seed);
/// Reduced-budget variant used to score PC-count candidates.
MetaModel fit_algorithm_for_sweep(MetaAlgorithm algorithm, const Eigen::MatrixXd& x,
                                  const Eigen::VectorXd& y, const TrainingProtocol& protocol,
                                  std::uint64_t seed);
Eigen::VectorXd predict(const MetaModel& model, const Eigen::MatrixXd& x);

struct RunManifest {
  std::uint64_t master_seed = kDefaultSeed;
  std::map<std::string, std::uint64_t> seeds;
  std::map<std::string, std::string> input_hashes;
  std::size_t n_train = 0;
  std::vector<std::string> train_ids;
  std::vector<double> pc_validation_pearson;
  std::string filter_mode;
  std::string version = std::string(kFormatVersion);
};

struct FittedMetaModel {
  FeatureGroupSpec spec;
  MetaAlgorithm algorithm = MetaAlgorithm::LinReg;
  std::vector<std::string> schema;
  MetaModel model;
  std::optional<PCABasis> pca;
  RunManifest manifest;

  /// "<group>_<mode-tag>_<cutoff>_<algo>", e.g. "ED2-F_VvS_101.0_LinReg".
  std::string name() const;
};

std::string model_name(const FeatureGroupSpec& spec, MetaAlgorithm algorithm);

/// Filter TRAIN by the group's RMSD mode, fit PCA and choose the PC count for
/// *-P groups, assemble features and run the algorithm's protocol.
FittedMetaModel train_meta_model(const Cohort& cohort, const FeatureGroupSpec& spec,
                                 MetaAlgorithm algorithm, std::uint64_t seed,
                                 const TrainingProtocol& protocol = {});

/// Features for `partition` (no RMSD filtering) with the stored PCA basis.
FeatureMatrix assemble_for_model(const FittedMetaModel& model, const Cohort& cohort,
                                 Partition partition);

/// Predictions on an assembled feature matrix; columns are matched by name
/// and a missing schema column is a DataError naming it.
std::map<std::string, double> predict_features(const FittedMetaModel& model,
                                               const FeatureMatrix& features);

std::map<std::string, double> predict_meta(const FittedMetaModel& model, const Cohort& cohort,
                                           Partition partition);

}  // namespace affistack
