#include <algorithm>
#include <cmath>
#include <numeric>

#include "affistack/error.hpp"
#include "affistack/learners.hpp"
#include "affistack/parallel.hpp"
#include "affistack/random.hpp"

namespace affistack {

void GBTHyperparams::validate() const {
  if (n_estimators < 0) throw ConfigError("n_estimators must be >= 0");
  if (max_depth < 0) throw ConfigError("max_depth must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(subsample > 0.0 && subsample <= 1.0)) throw ConfigError("subsample must be in (0, 1]");
  if (!(colsample_bytree > 0.0 && colsample_bytree <= 1.0))
    throw ConfigError("colsample_bytree must be in (0, 1]");
  if (!(gamma >= 0.0)) throw ConfigError("gamma must be >= 0");
}

bool GBTHyperparams::within_search_ranges() const {
  return n_estimators >= 100 && n_estimators <= 150 && max_depth >= 2 && max_depth <= 6 &&
         learning_rate >= 0.02 && learning_rate <= 0.3 && subsample >= 0.3 && subsample <= 0.7 &&
         colsample_bytree >= 0.2 && colsample_bytree <= 0.8 && gamma >= 0.0 && gamma <= 0.5;
}

GBTHyperparams draw_gbt_hyperparams(Rng& rng) {
  GBTHyperparams hp;
  hp.n_estimators = static_cast<int>(rng.uniform_int(100, 150));
  hp.max_depth = static_cast<int>(rng.uniform_int(2, 6));
  hp.learning_rate = rng.uniform(0.02, 0.3);
  hp.subsample = rng.uniform(0.3, 0.7);
  hp.colsample_bytree = rng.uniform(0.2, 0.8);
  hp.gamma = rng.uniform(0.0, 0.5);
  return hp;
}

double RegressionTree::predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  int node = 0;
  while (!nodes[static_cast<std::size_t>(node)].is_leaf()) {
    const auto& n = nodes[static_cast<std::size_t>(node)];
    node = row(n.feature) < n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(node)].value;
}

int RegressionTree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    best = std::max(best, d[i]);
    if (!n.is_leaf()) {
      d[static_cast<std::size_t>(n.left)] = d[i] + 1;
      d[static_cast<std::size_t>(n.right)] = d[i] + 1;
    }
  }
  return best;
}

namespace {

struct NodeStats {
  double count = 0.0;
  double sum = 0.0;
};

struct SplitCandidate {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

/// Level-wise exact greedy growth. `sorted` holds, per feature, all row
/// indices ordered by that feature's value.
RegressionTree grow_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& residual,
                         const std::vector<std::vector<Eigen::Index>>& sorted,
                         const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols,
                         const GBTHyperparams& hp) {
  RegressionTree tree;
  const auto n = static_cast<std::size_t>(x.rows());
  std::vector<int> node_of(n, -1);
  for (const auto r : rows) node_of[r] = 0;

  tree.nodes.emplace_back();
  std::vector<int> frontier{0};
  for (int depth = 0; !frontier.empty(); ++depth) {
    // Totals for the frontier nodes.
    std::vector<int> slot(tree.nodes.size(), -1);
    for (std::size_t i = 0; i < frontier.size(); ++i) slot[static_cast<std::size_t>(frontier[i])] = static_cast<int>(i);
    std::vector<NodeStats> total(frontier.size());
    for (const auto r : rows) {
      const int s = slot[static_cast<std::size_t>(node_of[r])];
      if (s < 0) continue;
      total[static_cast<std::size_t>(s)].count += 1.0;
      total[static_cast<std::size_t>(s)].sum += residual(static_cast<Eigen::Index>(r));
    }
    for (std::size_t i = 0; i < frontier.size(); ++i) {
      const auto& t = total[i];
      tree.nodes[static_cast<std::size_t>(frontier[i])].value = t.count > 0 ? t.sum / t.count : 0.0;
    }
    if (depth >= hp.max_depth) break;

    std::vector<SplitCandidate> best(frontier.size());
    std::vector<NodeStats> left(frontier.size());
    std::vector<double> last_value(frontier.size());
    std::vector<bool> seen(frontier.size());
    for (const auto f : cols) {
      std::fill(left.begin(), left.end(), NodeStats{});
      std::fill(seen.begin(), seen.end(), false);
      for (const auto r : sorted[f]) {
        const int node = node_of[static_cast<std::size_t>(r)];
        if (node < 0) continue;
        const int s_signed = slot[static_cast<std::size_t>(node)];
        if (s_signed < 0) continue;
        const auto s = static_cast<std::size_t>(s_signed);
        const double v = x(r, static_cast<Eigen::Index>(f));
        if (seen[s] && v > last_value[s]) {
          const auto& t = total[s];
          const double nl = left[s].count;
          const double nr = t.count - nl;
          const double sr = t.sum - left[s].sum;
          const double gain =
              left[s].sum * left[s].sum / nl + sr * sr / nr - t.sum * t.sum / t.count;
          if (gain > best[s].gain) {
            double thr = 0.5 * (last_value[s] + v);
            if (!(last_value[s] < thr)) thr = v;
            best[s] = SplitCandidate{gain, static_cast<int>(f), thr};
          }
        }
        seen[s] = true;
        last_value[s] = v;
        left[s].count += 1.0;
        left[s].sum += residual(r);
      }
    }

    std::vector<int> next;
    for (std::size_t i = 0; i < frontier.size(); ++i) {
      const auto& b = best[i];
      if (b.feature < 0 || !(b.gain > 0.0) || b.gain < hp.gamma) continue;
      const int id = frontier[i];
      const int l = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      auto& node = tree.nodes[static_cast<std::size_t>(id)];
      node.feature = b.feature;
      node.threshold = b.threshold;
      node.left = l;
      node.right = l + 1;
      next.push_back(l);
      next.push_back(l + 1);
    }
    for (const auto r : rows) {
      const auto& node = tree.nodes[static_cast<std::size_t>(node_of[r])];
      if (node.is_leaf()) continue;
      node_of[r] = x(static_cast<Eigen::Index>(r), node.feature) < node.threshold ? node.left : node.right;
    }
    frontier = std::move(next);
  }
  return tree;
}

std::size_t fraction_count(double fraction, std::size_t n) {
  const auto k = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
  return std::clamp<std::size_t>(k, 1, n);
}

}  // namespace

GBTModel fit_gbt(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GBTHyperparams& hp,
                 std::uint64_t seed, std::vector<double>* training_mse) {
  hp.validate();
  if (x.rows() != y.size()) throw DataError("fit_gbt: design matrix and target differ in length");
  if (x.rows() < 2) throw DataError("fit_gbt: need at least two rows");
  if (x.cols() < 1) throw DataError("fit_gbt: need at least one feature");
  if (!x.allFinite() || !y.allFinite()) throw NumericalError("fit_gbt: non-finite training data");

  const auto n = static_cast<std::size_t>(x.rows());
  const auto p = static_cast<std::size_t>(x.cols());
  std::vector<std::vector<Eigen::Index>> sorted(p);
  for (std::size_t f = 0; f < p; ++f) {
    auto& order = sorted[f];
    order.resize(n);
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
      return x(a, static_cast<Eigen::Index>(f)) < x(b, static_cast<Eigen::Index>(f));
    });
  }

  GBTModel model;
  model.hyperparams = hp;
  model.n_features = x.cols();
  model.base_prediction = y.mean();
  Eigen::VectorXd pred = Eigen::VectorXd::Constant(x.rows(), model.base_prediction);
  Eigen::VectorXd residual = y - pred;
  if (training_mse) {
    training_mse->clear();
    training_mse->push_back(residual.squaredNorm() / static_cast<double>(n));
  }

  Rng rng(seed);
  const std::size_t row_count = fraction_count(hp.subsample, n);
  const std::size_t col_count = fraction_count(hp.colsample_bytree, p);
  for (int t = 0; t < hp.n_estimators; ++t) {
    auto rows = rng.sample_without_replacement(n, row_count);
    auto cols = rng.sample_without_replacement(p, col_count);
    std::sort(rows.begin(), rows.end());
    std::sort(cols.begin(), cols.end());
    auto tree = grow_tree(x, residual, sorted, rows, cols, hp);
    for (Eigen::Index i = 0; i < x.rows(); ++i) pred(i) += hp.learning_rate * tree.predict_row(x.row(i));
    residual = y - pred;
    model.trees.push_back(std::move(tree));
    if (training_mse) training_mse->push_back(residual.squaredNorm() / static_cast<double>(n));
  }
  return model;
}

Eigen::VectorXd predict(const GBTModel& model, const Eigen::MatrixXd& x) {
  if (x.cols() != model.n_features)
    throw DataError("boosted model expects " + std::to_string(model.n_features) +
                    " features, got " + std::to_string(x.cols()));
  Eigen::VectorXd out = Eigen::VectorXd::Constant(x.rows(), model.base_prediction);
  for (const auto& tree : model.trees)
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      out(i) += model.hyperparams.learning_rate * tree.predict_row(x.row(i));
  return out;
}

double r2_score(const Eigen::VectorXd& truth, const Eigen::VectorXd& pred) {
  if (truth.size() != pred.size() || truth.size() == 0) throw DataError("r2_score: length mismatch");
  const double ss_res = (truth - pred).squaredNorm();
  const double ss_tot = (truth.array() - truth.mean()).matrix().squaredNorm();
  if (ss_tot == 0.0) return ss_res == 0.0 ? 1.0 : 0.0;
  return 1.0 - ss_res / ss_tot;
}

GbtSearchResult random_search_gbt(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int n_iter,
                                  int folds, std::uint64_t seed, int workers) {
  if (n_iter < 1) throw ConfigError("random search needs at least one iteration");
  const auto n = static_cast<std::size_t>(x.rows());
  if (n < static_cast<std::size_t>(folds))
    throw DataError("random search: " + std::to_string(n) + " rows < " + std::to_string(folds) + " folds");

  GbtSearchResult out;
  Rng draw(derive_seed(seed, "gbt-search-draws"));
  for (int i = 0; i < n_iter; ++i) out.candidates.push_back(draw_gbt_hyperparams(draw));
  Rng split_rng(derive_seed(seed, "gbt-search-folds"));
  const auto test_sets = shuffled_kfold(n, folds, split_rng);

  out.scores.assign(static_cast<std::size_t>(n_iter), 0.0);
  parallel_for(static_cast<std::size_t>(n_iter), workers, [&](std::size_t i) {
    double total = 0.0;
    for (std::size_t f = 0; f < test_sets.size(); ++f) {
      const auto train = complement_rows(n, test_sets[f]);
      const auto model = fit_gbt(take_rows(x, train), take_rows(y, train), out.candidates[i],
                                 derive_seed(seed, "gbt-search-fit", i, f));
      total += r2_score(take_rows(y, test_sets[f]), predict(model, take_rows(x, test_sets[f])));
    }
    out.scores[i] = total / static_cast<double>(test_sets.size());
  });

  std::size_t best = 0;
  for (std::size_t i = 1; i < out.scores.size(); ++i)
    if (out.scores[i] > out.scores[best]) best = i;
  out.best = out.candidates[best];
  out.best_score = out.scores[best];
  out.model = fit_gbt(x, y, out.best, derive_seed(seed, "gbt-refit"));
  return out;
}

}  // namespace affistack
