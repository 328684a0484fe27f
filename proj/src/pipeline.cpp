#include "affistack/pipeline.hpp"

#include <algorithm>
#include <cctype>

#include "affistack/error.hpp"
#include "affistack/random.hpp"
#include "affistack/text.hpp"

namespace affistack {

std::vector<std::size_t> CvPlan::train_rows(int repeat, int fold) const {
  return complement_rows(n_rows, test_rows(repeat, fold));
}

CvPlan repeated_kfold(std::size_t n, int folds, int repeats, std::uint64_t seed) {
  if (folds < 2) throw ConfigError("repeated_kfold: need at least 2 folds");
  if (repeats < 1) throw ConfigError("repeated_kfold: need at least 1 repeat");
  if (n < static_cast<std::size_t>(folds))
    throw DataError("repeated_kfold: " + std::to_string(n) + " rows cannot fill " +
                    std::to_string(folds) + " folds");
  CvPlan plan;
  plan.n_rows = n;
  plan.folds = folds;
  plan.repeats = repeats;
  plan.seed = seed;
  for (int r = 0; r < repeats; ++r) {
    Rng rng(derive_seed(seed, "repeated-kfold", static_cast<std::uint64_t>(r)));
    plan.assignments.push_back(shuffled_kfold(n, folds, rng));
  }
  return plan;
}

std::string_view to_string(MetaAlgorithm a) {
  switch (a) {
    case MetaAlgorithm::LinReg: return "LinReg";
    case MetaAlgorithm::Lasso: return "LASSO";
    case MetaAlgorithm::ElasticNet: return "ElasticNet";
    case MetaAlgorithm::XGB: return "XGB";
  }
  return "LinReg";
}

MetaAlgorithm meta_algorithm_from_string(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "linreg" || lower == "ols") return MetaAlgorithm::LinReg;
  if (lower == "lasso") return MetaAlgorithm::Lasso;
  if (lower == "elasticnet" || lower == "enet") return MetaAlgorithm::ElasticNet;
  if (lower == "xgb" || lower == "gbt") return MetaAlgorithm::XGB;
  throw ConfigError("unknown algorithm '" + std::string(s) + "'");
}

namespace {

MetaModel fit_with_budgets(MetaAlgorithm algorithm, const Eigen::MatrixXd& x,
                           const Eigen::VectorXd& y, int folds, int lasso_repeats,
                           int enet_repeats, int gbt_iters, int workers, std::uint64_t seed) {
  switch (algorithm) {
    case MetaAlgorithm::LinReg:
      return fit_ols(x, y);
    case MetaAlgorithm::Lasso:
      return fit_lasso_cv(x, y, folds, lasso_repeats, derive_seed(seed, "lasso"), workers);
    case MetaAlgorithm::ElasticNet:
      return fit_elasticnet_cv(x, y, folds, enet_repeats, derive_seed(seed, "elasticnet"), workers);
    case MetaAlgorithm::XGB:
      if (gbt_iters == 0) return fit_gbt(x, y, GBTHyperparams{}, derive_seed(seed, "gbt-fixed"));
      return random_search_gbt(x, y, gbt_iters, folds, derive_seed(seed, "gbt"), workers).model;
  }
  throw ConfigError("unknown algorithm");
}

}  // namespace

MetaModel fit_algorithm(MetaAlgorithm algorithm, const Eigen::MatrixXd& x,
                        const Eigen::VectorXd& y, const TrainingProtocol& protocol,
                        std::uint64_t seed) {
  return fit_with_budgets(algorithm, x, y, protocol.folds, protocol.lasso_repeats,
                          protocol.enet_repeats_per_ratio, protocol.gbt_search_iters,
                          protocol.workers, seed);
}

MetaModel fit_algorithm_for_sweep(MetaAlgorithm algorithm, const Eigen::MatrixXd& x,
                                  const Eigen::VectorXd& y, const TrainingProtocol& protocol,
                                  std::uint64_t seed) {
  return fit_with_budgets(algorithm, x, y, protocol.folds, protocol.sweep_lasso_repeats,
                          protocol.sweep_enet_repeats_per_ratio, protocol.sweep_gbt_search_iters,
                          1, seed);
}

Eigen::VectorXd predict(const MetaModel& model, const Eigen::MatrixXd& x) {
  return std::visit([&](const auto& m) -> Eigen::VectorXd { return predict(m, x); }, model);
}

std::string model_name(const FeatureGroupSpec& spec, MetaAlgorithm algorithm) {
  return std::string(to_string(spec.group)) + "_" + spec.rmsd_mode.tag() + "_" +
         cutoff_label(spec.rmsd_mode.cutoff) + "_" + std::string(to_string(algorithm));
}

std::string FittedMetaModel::name() const { return model_name(spec, algorithm); }

FittedMetaModel train_meta_model(const Cohort& cohort, const FeatureGroupSpec& spec,
                                 MetaAlgorithm algorithm, std::uint64_t seed,
                                 const TrainingProtocol& protocol) {
  const Cohort train = apply_rmsd_cutoff(cohort, spec.rmsd_mode).subset(Partition::Train);
  const auto name = model_name(spec, algorithm);
  if (train.records.empty())
    throw DataError(name + ": no TRAIN complexes survive the RMSD cutoff");

  FittedMetaModel out;
  out.spec = spec;
  out.algorithm = algorithm;
  auto& manifest = out.manifest;
  manifest.master_seed = seed;
  manifest.filter_mode = spec.rmsd_mode.tag() + "_" + cutoff_label(spec.rmsd_mode.cutoff);
  manifest.train_ids = train.ids();
  manifest.n_train = manifest.train_ids.size();
  const auto fit_seed = derive_seed(seed, "meta-fit");
  manifest.seeds["meta-fit"] = fit_seed;

  if (is_pca_group(spec.group)) {
    const auto table = pca_input_table(train, spec.group);
    out.pca = fit_pca(table.gather(manifest.train_ids), pca_source(spec.group));
    const int k_max =
        std::min<int>(protocol.pc_k_max, static_cast<int>(out.pca->component_count()));
    if (!out.spec.pc_count) {
      const auto split_seed = derive_seed(seed, "pc-split");
      const auto sweep_seed = derive_seed(seed, "pc-sweep");
      manifest.seeds["pc-split"] = split_seed;
      manifest.seeds["pc-sweep"] = sweep_seed;
      FeatureGroupSpec full = spec;
      full.pc_count = k_max;
      const auto fm = assemble_features(train, full, &*out.pca);
      if (!fm.labels) throw DataError(name + ": TRAIN records without labels");
      const Eigen::Index fixed = fm.values.cols() - k_max;
      const PcCandidateLearner learner = [&](const Eigen::MatrixXd& tx, const Eigen::VectorXd& ty,
                                             const Eigen::MatrixXd& vx, int k) {
        const auto m = fit_algorithm_for_sweep(algorithm, tx, ty, protocol,
                                               derive_seed(sweep_seed, "k", static_cast<std::uint64_t>(k)));
        return predict(m, vx);
      };
      try {
        const auto selection = optimize_pc_count(fm.values.leftCols(fixed), fm.values.rightCols(k_max),
                                                 *fm.labels, learner, k_max, split_seed,
                                                 protocol.pc_validation_fraction, protocol.workers);
        out.spec.pc_count = selection.best_k;
        manifest.pc_validation_pearson = selection.validation_pearson;
      } catch (const NumericalError& e) {
        throw NumericalError(name + ": PC-count selection failed: " + e.what());
      }
    }
  }

  const auto features = assemble_features(train, out.spec, out.pca ? &*out.pca : nullptr);
  if (!features.labels) throw DataError(name + ": TRAIN records without labels");
  manifest.input_hashes["train_features"] = content_hash(write_feature_matrix(features));
  out.schema = features.column_names;
  try {
    out.model = fit_algorithm(algorithm, features.values, *features.labels, protocol, fit_seed);
  } catch (const NumericalError& e) {
    throw NumericalError(name + ": " + e.what());
  }
  return out;
}

FeatureMatrix assemble_for_model(const FittedMetaModel& model, const Cohort& cohort,
                                 Partition partition) {
  return assemble_features(cohort.subset(partition), model.spec,
                           model.pca ? &*model.pca : nullptr);
}

std::map<std::string, double> predict_features(const FittedMetaModel& model,
                                               const FeatureMatrix& features) {
  std::map<std::string, double> out;
  if (features.complex_ids.empty()) return out;
  const auto selected = features.select_columns(model.schema);
  const Eigen::VectorXd pred = predict(model.model, selected.values);
  for (std::size_t i = 0; i < selected.complex_ids.size(); ++i)
    out[selected.complex_ids[i]] = pred(static_cast<Eigen::Index>(i));
  return out;
}

std::map<std::string, double> predict_meta(const FittedMetaModel& model, const Cohort& cohort,
                                           Partition partition) {
  if (cohort.ids(partition).empty()) return {};
  return predict_features(model, assemble_for_model(model, cohort, partition));
}

}  // namespace affistack
