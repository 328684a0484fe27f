#include "affistack/serialization.hpp"

#include <cmath>
#include <limits>

#include "affistack/error.hpp"

namespace affistack {

namespace {

Json vec(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

/// Non-finite values become null; null reads back as -inf.
Json maybe_finite(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

double read_double(const Json& j) {
  if (j.is_null()) return -std::numeric_limits<double>::infinity();
  return j.get<double>();
}

Eigen::VectorXd read_vec(const Json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

Json optional_number(const std::optional<double>& v) {
  return v && std::isfinite(*v) ? Json(*v) : Json(nullptr);
}

template <typename F>
auto guarded(std::string_view what, F&& f) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("malformed " + std::string(what) + " JSON: " + e.what());
  }
}

}  // namespace

Json to_json(const PCABasis& basis) {
  Json j;
  j["source"] = std::string(to_string(basis.source));
  j["sign_convention"] = std::string(kPcaSignConvention);
  j["n_rows"] = basis.n_rows;
  j["column_means"] = vec(basis.column_means);
  j["singular_values"] = vec(basis.singular_values);
  Json comps = Json::array();
  for (Eigen::Index c = 0; c < basis.components.cols(); ++c) comps.push_back(vec(basis.components.col(c)));
  j["components"] = std::move(comps);
  return j;
}

PCABasis pca_basis_from_json(const Json& j) {
  return guarded("PCA basis", [&] {
    PCABasis b;
    b.source = pca_source_from_string(j.at("source").get<std::string>());
    if (j.at("sign_convention").get<std::string>() != kPcaSignConvention)
      throw ParseError("PCA basis uses an unknown sign convention");
    b.n_rows = j.at("n_rows").get<Eigen::Index>();
    b.column_means = read_vec(j.at("column_means"));
    b.singular_values = read_vec(j.at("singular_values"));
    const auto& comps = j.at("components");
    b.components.resize(b.column_means.size(), static_cast<Eigen::Index>(comps.size()));
    for (std::size_t c = 0; c < comps.size(); ++c) {
      if (static_cast<Eigen::Index>(comps[c].size()) != b.column_means.size())
        throw ParseError("PCA component length does not match the input width");
      b.components.col(static_cast<Eigen::Index>(c)) = read_vec(comps[c]);
    }
    if (b.singular_values.size() != b.components.cols())
      throw ParseError("PCA singular values do not match the component count");
    return b;
  });
}

Json to_json(const LinearModel& m) {
  Json j;
  j["algorithm"] = std::string(to_string(m.algorithm));
  j["alpha"] = m.alpha;
  j["l1_ratio"] = m.l1_ratio;
  j["intercept"] = m.intercept;
  j["coefficients"] = vec(m.coefficients);
  j["standardizer"] = {{"mean", vec(m.standardizer.mean)}, {"scale", vec(m.standardizer.scale)}};
  const auto& d = m.diagnostics;
  j["diagnostics"] = {{"duality_gap", d.duality_gap},     {"iterations", d.iterations},
                      {"converged", d.converged},         {"cv_mse", d.cv_mse},
                      {"selected_repeat", d.selected_repeat}, {"selection_rule", d.selection_rule}};
  return j;
}

LinearModel linear_model_from_json(const Json& j) {
  return guarded("linear model", [&] {
    LinearModel m;
    m.algorithm = linear_algorithm_from_string(j.at("algorithm").get<std::string>());
    m.alpha = j.at("alpha").get<double>();
    m.l1_ratio = j.at("l1_ratio").get<double>();
    m.intercept = j.at("intercept").get<double>();
    m.coefficients = read_vec(j.at("coefficients"));
    m.standardizer.mean = read_vec(j.at("standardizer").at("mean"));
    m.standardizer.scale = read_vec(j.at("standardizer").at("scale"));
    if (m.standardizer.mean.size() != m.coefficients.size() ||
        m.standardizer.scale.size() != m.coefficients.size())
      throw ParseError("linear model standardizer width does not match its coefficients");
    const auto& d = j.at("diagnostics");
    m.diagnostics.duality_gap = d.at("duality_gap").get<double>();
    m.diagnostics.iterations = d.at("iterations").get<int>();
    m.diagnostics.converged = d.at("converged").get<bool>();
    m.diagnostics.cv_mse = d.at("cv_mse").get<double>();
    m.diagnostics.selected_repeat = d.at("selected_repeat").get<int>();
    m.diagnostics.selection_rule = d.at("selection_rule").get<std::string>();
    return m;
  });
}

Json to_json(const GBTHyperparams& hp) {
  return Json{{"n_estimators", hp.n_estimators},
              {"max_depth", hp.max_depth},
              {"learning_rate", hp.learning_rate},
              {"subsample", hp.subsample},
              {"colsample_bytree", hp.colsample_bytree},
              {"gamma", hp.gamma}};
}

GBTHyperparams gbt_hyperparams_from_json(const Json& j) {
  return guarded("GBT hyperparameters", [&] {
    GBTHyperparams hp;
    hp.n_estimators = j.at("n_estimators").get<int>();
    hp.max_depth = j.at("max_depth").get<int>();
    hp.learning_rate = j.at("learning_rate").get<double>();
    hp.subsample = j.at("subsample").get<double>();
    hp.colsample_bytree = j.at("colsample_bytree").get<double>();
    hp.gamma = j.at("gamma").get<double>();
    hp.validate();
    return hp;
  });
}

Json to_json(const GBTModel& m) {
  Json j;
  j["hyperparams"] = to_json(m.hyperparams);
  j["base_prediction"] = m.base_prediction;
  j["n_features"] = m.n_features;
  Json trees = Json::array();
  for (const auto& t : m.trees) {
    Json feature = Json::array(), threshold = Json::array(), left = Json::array(),
         right = Json::array(), value = Json::array();
    for (const auto& n : t.nodes) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      value.push_back(n.value);
    }
    trees.push_back(Json{{"feature", std::move(feature)},
                         {"threshold", std::move(threshold)},
                         {"left", std::move(left)},
                         {"right", std::move(right)},
                         {"value", std::move(value)}});
  }
  j["trees"] = std::move(trees);
  return j;
}

GBTModel gbt_model_from_json(const Json& j) {
  return guarded("GBT model", [&] {
    GBTModel m;
    m.hyperparams = gbt_hyperparams_from_json(j.at("hyperparams"));
    m.base_prediction = j.at("base_prediction").get<double>();
    m.n_features = j.at("n_features").get<Eigen::Index>();
    for (const auto& t : j.at("trees")) {
      RegressionTree tree;
      const auto& feature = t.at("feature");
      const std::size_t count = feature.size();
      for (const char* key : {"threshold", "left", "right", "value"})
        if (t.at(key).size() != count) throw ParseError("GBT tree arrays differ in length");
      for (std::size_t i = 0; i < count; ++i) {
        TreeNode n;
        n.feature = feature[i].get<int>();
        n.threshold = t.at("threshold")[i].get<double>();
        n.left = t.at("left")[i].get<int>();
        n.right = t.at("right")[i].get<int>();
        n.value = t.at("value")[i].get<double>();
        const auto limit = static_cast<int>(count);
        if (!n.is_leaf() && (n.feature >= m.n_features || n.left <= static_cast<int>(i) ||
                             n.right <= static_cast<int>(i) || n.left >= limit || n.right >= limit))
          throw ParseError("GBT tree node " + std::to_string(i) + " is malformed");
        tree.nodes.push_back(n);
      }
      if (tree.nodes.empty()) throw ParseError("GBT tree has no nodes");
      m.trees.push_back(std::move(tree));
    }
    return m;
  });
}

Json to_json(const FittedMetaModel& model) {
  Json j;
  j["format"] = std::string(kFormatVersion);
  j["name"] = model.name();
  j["group"] = std::string(to_string(model.spec.group));
  j["rmsd_mode"] = {{"kind", model.spec.rmsd_mode.tag()},
                    {"cutoff", cutoff_value(model.spec.rmsd_mode.cutoff)}};
  j["pc_count"] = model.spec.pc_count ? Json(*model.spec.pc_count) : Json(nullptr);
  j["algorithm"] = std::string(to_string(model.algorithm));
  j["schema"] = model.schema;
  if (const auto* lin = std::get_if<LinearModel>(&model.model)) {
    j["model"] = {{"type", "linear"}, {"linear", to_json(*lin)}};
  } else {
    j["model"] = {{"type", "gbt"}, {"gbt", to_json(std::get<GBTModel>(model.model))}};
  }
  j["pca"] = model.pca ? to_json(*model.pca) : Json(nullptr);
  const auto& m = model.manifest;
  Json seeds = Json::object();
  for (const auto& [k, v] : m.seeds) seeds[k] = v;
  Json hashes = Json::object();
  for (const auto& [k, v] : m.input_hashes) hashes[k] = v;
  Json pcs = Json::array();
  for (const double r : m.pc_validation_pearson) pcs.push_back(maybe_finite(r));
  j["manifest"] = {{"version", m.version},         {"master_seed", m.master_seed},
                   {"seeds", std::move(seeds)},    {"input_hashes", std::move(hashes)},
                   {"filter_mode", m.filter_mode}, {"n_train", m.n_train},
                   {"train_ids", m.train_ids},     {"pc_validation_pearson", std::move(pcs)}};
  return j;
}

FittedMetaModel fitted_model_from_json(const Json& j) {
  return guarded("model", [&] {
    if (j.at("format").get<std::string>() != kFormatVersion)
      throw ParseError("unsupported model format '" + j.at("format").get<std::string>() + "'");
    FittedMetaModel out;
    out.spec.group = feature_group_from_string(j.at("group").get<std::string>());
    out.spec.rmsd_mode.kind = filter_kind_from_string(j.at("rmsd_mode").at("kind").get<std::string>());
    out.spec.rmsd_mode.cutoff = cutoff_from_value(j.at("rmsd_mode").at("cutoff").get<double>());
    if (!j.at("pc_count").is_null()) out.spec.pc_count = j.at("pc_count").get<int>();
    out.algorithm = meta_algorithm_from_string(j.at("algorithm").get<std::string>());
    out.schema = j.at("schema").get<std::vector<std::string>>();
    const auto& model = j.at("model");
    const auto type = model.at("type").get<std::string>();
    if (type == "linear") {
      out.model = linear_model_from_json(model.at("linear"));
    } else if (type == "gbt") {
      out.model = gbt_model_from_json(model.at("gbt"));
    } else {
      throw ParseError("unknown model type '" + type + "'");
    }
    if (!j.at("pca").is_null()) out.pca = pca_basis_from_json(j.at("pca"));
    if (is_pca_group(out.spec.group) != out.pca.has_value())
      throw ParseError("PCA basis presence does not match group " +
                       std::string(to_string(out.spec.group)));
    out.spec.validate(out.pca ? static_cast<int>(out.pca->component_count()) : 22);
    const auto width = std::visit(
        [](const auto& m) -> Eigen::Index {
          if constexpr (std::is_same_v<std::decay_t<decltype(m)>, LinearModel>) {
            return m.coefficients.size();
          } else {
            return m.n_features;
          }
        },
        out.model);
    if (width != static_cast<Eigen::Index>(out.schema.size()))
      throw ParseError("model width does not match its feature schema");
    const auto& m = j.at("manifest");
    auto& man = out.manifest;
    man.version = m.at("version").get<std::string>();
    man.master_seed = m.at("master_seed").get<std::uint64_t>();
    for (const auto& [k, v] : m.at("seeds").items()) man.seeds[k] = v.get<std::uint64_t>();
    for (const auto& [k, v] : m.at("input_hashes").items()) man.input_hashes[k] = v.get<std::string>();
    man.filter_mode = m.at("filter_mode").get<std::string>();
    man.n_train = m.at("n_train").get<std::size_t>();
    man.train_ids = m.at("train_ids").get<std::vector<std::string>>();
    for (const auto& r : m.at("pc_validation_pearson")) man.pc_validation_pearson.push_back(read_double(r));
    return out;
  });
}

Json to_json(const EvaluationReport& report, bool include_per_complex) {
  Json j;
  j["n"] = report.n;
  j["pearson"] = optional_number(report.pearson);
  j["spearman"] = optional_number(report.spearman);
  j["mse"] = optional_number(report.mse);
  j["rmse"] = optional_number(report.rmse);
  if (include_per_complex) {
    Json errs = Json::object();
    for (const auto& [id, e] : report.per_complex_abs_error) errs[id] = e;
    j["abs_error"] = std::move(errs);
  }
  return j;
}

Json to_json(const TargetScreenReport& r) {
  auto test = [](const std::optional<TestResult>& t) {
    return t ? Json{{"statistic", t->statistic}, {"p_value", t->p_value}} : Json(nullptr);
  };
  return Json{{"target", r.target},
              {"n_ligands", r.n_ligands},
              {"n_actives", r.n_actives},
              {"top5_recall", r.top5_recall},
              {"top10_recall", r.top10_recall},
              {"precision_at_actives", r.precision_at_actives},
              {"welch_t", test(r.welch)},
              {"mann_whitney_u", test(r.mwu)}};
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace affistack
