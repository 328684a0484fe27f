#include "affistack/pca.hpp"

#include <cmath>
#include <limits>

#include <Eigen/SVD>

#include "affistack/error.hpp"
#include "affistack/evaluate.hpp"
#include "affistack/learners.hpp"
#include "affistack/parallel.hpp"
#include "affistack/random.hpp"

namespace affistack {

std::string_view to_string(PcaSource s) {
  switch (s) {
    case PcaSource::D1FP: return "D1FP";
    case PcaSource::D2FP: return "D2FP";
    case PcaSource::D3P: return "D3P";
    case PcaSource::DAP: return "DAP";
  }
  return "DAP";
}

PcaSource pca_source_from_string(std::string_view s) {
  for (auto p : {PcaSource::D1FP, PcaSource::D2FP, PcaSource::D3P, PcaSource::DAP})
    if (to_string(p) == s) return p;
  throw ParseError("unknown PCA source '" + std::string(s) + "'");
}

Eigen::VectorXd PCABasis::explained_variance() const {
  const double denom = n_rows > 1 ? static_cast<double>(n_rows - 1) : 1.0;
  return singular_values.array().square() / denom;
}

Eigen::VectorXd PCABasis::explained_variance_ratio() const {
  const Eigen::VectorXd var = explained_variance();
  const double total = var.sum();
  if (total <= 0.0) return Eigen::VectorXd::Zero(var.size());
  return var / total;
}

PCABasis fit_pca(const Eigen::MatrixXd& rows, PcaSource source) {
  if (rows.rows() < 2) throw NumericalError("fit_pca: need at least two rows");
  if (rows.cols() < 1) throw NumericalError("fit_pca: need at least one column");
  if (!rows.allFinite()) throw NumericalError("fit_pca: non-finite input");

  PCABasis basis;
  basis.source = source;
  basis.n_rows = rows.rows();
  basis.column_means = rows.colwise().mean().transpose();
  const Eigen::MatrixXd centered = rows.rowwise() - basis.column_means.transpose();

  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinU | Eigen::ComputeThinV);
  basis.singular_values = svd.singularValues();
  basis.components = svd.matrixV();

  for (Eigen::Index c = 0; c < basis.components.cols(); ++c) {
    auto v = basis.components.col(c);
    const double sum = v.sum();
    bool flip = sum < 0.0;
    if (sum == 0.0) {
      Eigen::Index arg = 0;
      v.cwiseAbs().maxCoeff(&arg);
      flip = v(arg) < 0.0;
    }
    if (flip) v = -v;
  }
  return basis;
}

PCABasis fit_pca(const BasePredictionTable& table, PcaSource source) {
  return fit_pca(table.values(), source);
}

Eigen::MatrixXd project(const PCABasis& basis, const Eigen::MatrixXd& rows, Eigen::Index k) {
  if (rows.cols() != basis.input_width())
    throw DataError("project: row width " + std::to_string(rows.cols()) +
                    " does not match basis width " + std::to_string(basis.input_width()));
  if (k < 1 || k > basis.component_count())
    throw DataError("project: k must be in 1.." + std::to_string(basis.component_count()));
  return (rows.rowwise() - basis.column_means.transpose()) * basis.components.leftCols(k);
}

Eigen::MatrixXd reconstruct(const PCABasis& basis, const Eigen::MatrixXd& scores) {
  const Eigen::Index k = scores.cols();
  if (k > basis.component_count()) throw DataError("reconstruct: too many score columns");
  Eigen::MatrixXd out = scores * basis.components.leftCols(k).transpose();
  out.rowwise() += basis.column_means.transpose();
  return out;
}

PcCountSelection optimize_pc_count(const Eigen::MatrixXd& fixed_columns,
                                   const Eigen::MatrixXd& pc_scores,
                                   const Eigen::VectorXd& labels,
                                   const PcCandidateLearner& learner, int k_max,
                                   std::uint64_t split_seed, double validation_fraction,
                                   int workers) {
  const auto n = static_cast<std::size_t>(labels.size());
  if (n < 10) throw NumericalError("optimize_pc_count: need at least 10 training rows");
  if (fixed_columns.rows() != labels.size() || pc_scores.rows() != labels.size())
    throw DataError("optimize_pc_count: row counts differ");
  if (k_max < 1 || k_max > pc_scores.cols())
    throw DataError("optimize_pc_count: k_max must be in 1.." + std::to_string(pc_scores.cols()));
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    throw ConfigError("optimize_pc_count: validation fraction must be in (0, 1)");

  auto n_valid = static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(n)));
  n_valid = std::clamp<std::size_t>(n_valid, 2, n - 2);
  Rng rng(split_seed);
  auto perm = rng.permutation(n);
  std::vector<std::size_t> valid(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_valid));
  std::sort(valid.begin(), valid.end());
  const auto train = complement_rows(n, valid);

  const Eigen::VectorXd y_train = take_rows(labels, train);
  const Eigen::VectorXd y_valid = take_rows(labels, valid);
  if ((y_valid.array() == y_valid(0)).all())
    throw NumericalError("optimize_pc_count: validation labels are constant");

  const Eigen::Index fixed = fixed_columns.cols();
  PcCountSelection out;
  out.validation_rows = valid;
  out.validation_pearson.assign(static_cast<std::size_t>(k_max),
                                -std::numeric_limits<double>::infinity());
  parallel_for(static_cast<std::size_t>(k_max), workers, [&](std::size_t idx) {
    const int k = static_cast<int>(idx) + 1;
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), fixed + k);
    x.leftCols(fixed) = fixed_columns;
    x.rightCols(k) = pc_scores.leftCols(k);
    const Eigen::VectorXd pred = learner(take_rows(x, train), y_train, take_rows(x, valid), k);
    try {
      out.validation_pearson[idx] = pearson(pred, y_valid);
    } catch (const NumericalError&) {
      // constant predictions: leave at -inf
    }
  });
  // Differences at rounding level count as ties, so the smaller k keeps them.
  constexpr double kTieTolerance = 1e-12;
  out.best_k = 1;
  for (int k = 2; k <= k_max; ++k)
    if (out.validation_pearson[static_cast<std::size_t>(k - 1)] >
        out.validation_pearson[static_cast<std::size_t>(out.best_k - 1)] + kTieTolerance)
      out.best_k = k;
  return out;
}

}  // namespace affistack
