#include "affistack/evaluate.hpp"

#include <cmath>

#include <boost/math/distributions/students_t.hpp>

#include "affistack/parallel.hpp"
#include "affistack/random.hpp"

namespace affistack {

ErrorSummary mse_rmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
  if (pred.size() != truth.size()) throw DataError("mse_rmse: length mismatch");
  if (pred.size() == 0) throw DataError("mse_rmse: empty input");
  const double mse = (pred - truth).squaredNorm() / static_cast<double>(pred.size());
  return {mse, std::sqrt(mse)};
}

EvaluationReport evaluate_predictions(const std::map<std::string, double>& predictions,
                                      const std::map<std::string, double>& truth) {
  EvaluationReport report;
  std::vector<double> p;
  std::vector<double> t;
  for (const auto& [id, value] : predictions) {
    const auto it = truth.find(id);
    if (it == truth.end()) throw DataError("no ground truth for " + id);
    p.push_back(value);
    t.push_back(it->second);
    report.per_complex_abs_error[id] = std::abs(value - it->second);
  }
  report.n = p.size();
  if (report.n < 2) return report;
  const Eigen::Map<const Eigen::VectorXd> pv(p.data(), static_cast<Eigen::Index>(p.size()));
  const Eigen::Map<const Eigen::VectorXd> tv(t.data(), static_cast<Eigen::Index>(t.size()));
  const auto err = mse_rmse(pv, tv);
  report.mse = err.mse;
  report.rmse = err.rmse;
  try {
    report.pearson = pearson(pv, tv);
    report.spearman = spearman(pv, tv);
  } catch (const NumericalError&) {
    // correlations undefined for constant vectors
  }
  return report;
}

std::map<std::string, EvaluationReport> grouped_report(
    const std::map<std::string, double>& predictions, const std::map<std::string, double>& truth,
    const std::function<std::string(const std::string&)>& group_of) {
  std::map<std::string, std::map<std::string, double>> split;
  for (const auto& [id, value] : predictions) split[group_of(id)][id] = value;
  std::map<std::string, EvaluationReport> out;
  for (const auto& [group, preds] : split) out[group] = evaluate_predictions(preds, truth);
  return out;
}

std::function<std::string(const std::string&)> molecular_weight_grouping(
    const std::map<std::string, double>& molecular_weights, double threshold) {
  return [molecular_weights, threshold](const std::string& id) -> std::string {
    const auto it = molecular_weights.find(id);
    if (it == molecular_weights.end()) throw DataError("no molecular weight for " + id);
    return it->second <= threshold ? "low" : "high";
  };
}

// ---------------------------------------------------------------------------
// Monte Carlo null
// ---------------------------------------------------------------------------

NullDistribution::NullDistribution(std::vector<double> samples) : samples_(std::move(samples)) {
  std::sort(samples_.begin(), samples_.end());
}

double NullDistribution::quantile(double q) const {
  if (samples_.empty()) throw DataError("quantile of an empty distribution");
  if (q < 0.0 || q > 1.0) throw ConfigError("quantile must be in [0, 1]");
  const double pos = q * static_cast<double>(samples_.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, samples_.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return samples_[lo] + frac * (samples_[hi] - samples_[lo]);
}

double NullDistribution::upper_tail(double value) const {
  if (samples_.empty()) return 0.0;
  const auto it = std::lower_bound(samples_.begin(), samples_.end(), value);
  return static_cast<double>(samples_.end() - it) / static_cast<double>(samples_.size());
}

NullDistribution monte_carlo_subsample_null(const Eigen::VectorXd& pred,
                                            const Eigen::VectorXd& truth,
                                            std::size_t subset_size, int iters,
                                            std::uint64_t seed, int workers) {
  if (pred.size() != truth.size()) throw DataError("monte_carlo_subsample_null: length mismatch");
  if (subset_size < 3) throw ConfigError("monte_carlo_subsample_null: subset size must be >= 3");
  const auto n = static_cast<std::size_t>(pred.size());
  if (subset_size > n) throw ConfigError("monte_carlo_subsample_null: subset larger than sample");
  if (iters < 1) throw ConfigError("monte_carlo_subsample_null: need at least one iteration");
  std::vector<double> values(static_cast<std::size_t>(iters));
  parallel_for(values.size(), workers, [&](std::size_t i) {
    Rng rng(derive_seed(seed, "mc-subsample", i));
    auto rows = rng.sample_without_replacement(n, subset_size);
    std::sort(rows.begin(), rows.end());
    Eigen::VectorXd p(static_cast<Eigen::Index>(subset_size));
    Eigen::VectorXd t(static_cast<Eigen::Index>(subset_size));
    for (std::size_t k = 0; k < rows.size(); ++k) {
      p(static_cast<Eigen::Index>(k)) = pred(static_cast<Eigen::Index>(rows[k]));
      t(static_cast<Eigen::Index>(k)) = truth(static_cast<Eigen::Index>(rows[k]));
    }
    values[i] = pearson(p, t);
  });
  return NullDistribution(std::move(values));
}

// ---------------------------------------------------------------------------
// Synergy
// ---------------------------------------------------------------------------

std::string_view to_string(ToolGroup g) {
  switch (g) {
    case ToolGroup::Meta: return "META";
    case ToolGroup::DL: return "DL";
    case ToolGroup::Dock: return "DOCK";
  }
  return "META";
}

SynergyPartition synergy_partition(
    const std::map<std::string, std::map<ToolGroup, double>>& abs_errors,
    const std::set<ToolGroup>& groups) {
  if (groups.empty()) throw ConfigError("synergy_partition: no groups");
  SynergyPartition out;
  for (const auto g : groups) out.counts[g] = 0;
  for (const auto& [id, errors] : abs_errors) {
    std::optional<ToolGroup> winner;
    double best = 0.0;
    // std::set iterates in enum order, which is the tie-break priority.
    for (const auto g : groups) {
      const auto it = errors.find(g);
      if (it == errors.end())
        throw DataError("synergy_partition: " + id + " lacks group " + std::string(to_string(g)));
      if (!winner || it->second < best) {
        winner = g;
        best = it->second;
      }
    }
    out.assignment[id] = *winner;
    ++out.counts[*winner];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Screening
// ---------------------------------------------------------------------------

ScoreOrientation orientation_from_string(std::string_view s) {
  if (s == "ascending") return ScoreOrientation::Ascending;
  if (s == "descending") return ScoreOrientation::Descending;
  throw ConfigError("score orientation must be 'ascending' or 'descending'");
}

std::string_view to_string(ScoreOrientation o) {
  return o == ScoreOrientation::Ascending ? "ascending" : "descending";
}

double topk_recall(std::span<const ScoredLigand> ligands, int k, ScoreOrientation orientation) {
  if (k <= 0) throw ConfigError("topk_recall: k must be positive");
  if (static_cast<std::size_t>(k) > ligands.size())
    throw DataError("topk_recall: k exceeds the number of ligands");
  std::vector<const ScoredLigand*> order;
  order.reserve(ligands.size());
  for (const auto& l : ligands) order.push_back(&l);
  std::sort(order.begin(), order.end(), [orientation](const ScoredLigand* a, const ScoredLigand* b) {
    if (a->score != b->score)
      return orientation == ScoreOrientation::Ascending ? a->score < b->score : a->score > b->score;
    return a->ligand_id < b->ligand_id;
  });
  std::size_t hits = 0;
  for (int i = 0; i < k; ++i) hits += order[static_cast<std::size_t>(i)]->active ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(k);
}

double precision_at_actives(std::span<const ScoredLigand> ligands, ScoreOrientation orientation) {
  const auto actives = std::count_if(ligands.begin(), ligands.end(),
                                     [](const ScoredLigand& l) { return l.active; });
  if (actives == 0) return 0.0;
  return topk_recall(ligands, static_cast<int>(actives), orientation);
}

TestResult welch_t(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw NumericalError("welch_t: each sample needs >= 2 values");
  auto moments = [](std::span<const double> v) {
    const double n = static_cast<double>(v.size());
    double mean = 0.0;
    for (const double x : v) mean += x;
    mean /= n;
    double ss = 0.0;
    for (const double x : v) ss += (x - mean) * (x - mean);
    return std::pair{mean, ss / (n - 1.0)};
  };
  const auto [ma, va] = moments(a);
  const auto [mb, vb] = moments(b);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double sa = va / na;
  const double sb = vb / nb;
  if (!(sa + sb > 0.0)) throw NumericalError("welch_t: both samples have zero variance");
  const double t = (ma - mb) / std::sqrt(sa + sb);
  const double df = (sa + sb) * (sa + sb) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
  const boost::math::students_t dist(df);
  const double p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  return {t, std::min(1.0, p)};
}

namespace {

/// counts[u] = number of orderings of n_a + n_b distinct values with U_a = u.
std::vector<double> exact_u_counts(std::size_t na, std::size_t nb) {
  // f[i][j] over u, built by adding the largest element last.
  std::vector<std::vector<std::vector<double>>> f(
      na + 1, std::vector<std::vector<double>>(nb + 1));
  for (std::size_t i = 0; i <= na; ++i) {
    for (std::size_t j = 0; j <= nb; ++j) {
      auto& cell = f[i][j];
      cell.assign(i * j + 1, 0.0);
      if (i == 0 || j == 0) {
        cell[0] = 1.0;
        continue;
      }
      const auto& from_a = f[i - 1][j];  // largest is from a: beats j values of b
      for (std::size_t u = 0; u < from_a.size(); ++u) cell[u + j] += from_a[u];
      const auto& from_b = f[i][j - 1];
      for (std::size_t u = 0; u < from_b.size(); ++u) cell[u] += from_b[u];
    }
  }
  return f[na][nb];
}

}  // namespace

TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b, MwuMethod method) {
  if (a.empty() || b.empty()) throw DataError("mann_whitney_u: both samples must be non-empty");
  const std::size_t na = a.size();
  const std::size_t nb = b.size();
  Eigen::VectorXd pooled(static_cast<Eigen::Index>(na + nb));
  for (std::size_t i = 0; i < na; ++i) pooled(static_cast<Eigen::Index>(i)) = a[i];
  for (std::size_t i = 0; i < nb; ++i) pooled(static_cast<Eigen::Index>(na + i)) = b[i];
  const Eigen::VectorXd ranks = average_ranks(pooled);
  const double rank_sum_a = ranks.head(static_cast<Eigen::Index>(na)).sum();
  const double dna = static_cast<double>(na);
  const double dnb = static_cast<double>(nb);
  const double u = rank_sum_a - dna * (dna + 1.0) / 2.0;

  std::vector<double> sorted(pooled.data(), pooled.data() + pooled.size());
  std::sort(sorted.begin(), sorted.end());
  double tie_term = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    i = j;
  }
  const bool has_ties = tie_term > 0.0;

  bool exact = method == MwuMethod::Exact;
  if (method == MwuMethod::Auto) exact = na * nb <= 400 && !has_ties;
  if (exact && has_ties) throw DataError("mann_whitney_u: exact method requires tie-free samples");

  if (exact) {
    const auto counts = exact_u_counts(na, nb);
    double total = 0.0;
    for (const double c : counts) total += c;
    const auto ui = static_cast<std::size_t>(std::llround(u));
    double lower = 0.0;
    double upper = 0.0;
    for (std::size_t k = 0; k < counts.size(); ++k) {
      if (k <= ui) lower += counts[k];
      if (k >= ui) upper += counts[k];
    }
    const double p = std::min(1.0, 2.0 * std::min(lower, upper) / total);
    return {u, p};
  }

  const double n = dna + dnb;
  const double mu = dna * dnb / 2.0;
  const double var = dna * dnb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
  if (!(var > 0.0)) return {u, 1.0};
  const double z = std::max(0.0, std::abs(u - mu) - 0.5) / std::sqrt(var);
  return {u, std::min(1.0, std::erfc(z / std::sqrt(2.0)))};
}

std::vector<TargetScreenReport> screen_report(
    const std::map<std::string, std::vector<ScoredLigand>>& by_target,
    ScoreOrientation orientation) {
  std::vector<TargetScreenReport> out;
  for (const auto& [target, ligands] : by_target) {
    TargetScreenReport r;
    r.target = target;
    r.n_ligands = ligands.size();
    if (ligands.empty()) {
      out.push_back(r);
      continue;
    }
    std::vector<double> actives;
    std::vector<double> inactives;
    for (const auto& l : ligands) (l.active ? actives : inactives).push_back(l.score);
    r.n_actives = actives.size();
    const int n = static_cast<int>(ligands.size());
    r.top5_recall = topk_recall(ligands, std::min(5, n), orientation);
    r.top10_recall = topk_recall(ligands, std::min(10, n), orientation);
    r.precision_at_actives = precision_at_actives(ligands, orientation);
    try {
      r.welch = welch_t(actives, inactives);
    } catch (const NumericalError&) {
      // undefined for tiny or constant samples
    }
    if (!actives.empty() && !inactives.empty()) r.mwu = mann_whitney_u(actives, inactives);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace affistack
