#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/QR>

#include "affistack/error.hpp"
#include "affistack/learners.hpp"
#include "affistack/parallel.hpp"
#include "affistack/random.hpp"

namespace affistack {

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

std::vector<std::vector<std::size_t>> shuffled_kfold(std::size_t n, int folds, Rng& rng) {
  if (folds < 2) throw ConfigError("k-fold needs at least 2 folds");
  if (n < static_cast<std::size_t>(folds))
    throw DataError("k-fold: " + std::to_string(n) + " rows cannot fill " + std::to_string(folds) + " folds");
  const auto perm = rng.permutation(n);
  const auto k = static_cast<std::size_t>(folds);
  std::vector<std::vector<std::size_t>> out(k);
  std::size_t start = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = n / k + (f < n % k ? 1 : 0);
    out[f].assign(perm.begin() + static_cast<std::ptrdiff_t>(start),
                  perm.begin() + static_cast<std::ptrdiff_t>(start + size));
    std::sort(out[f].begin(), out[f].end());
    start += size;
  }
  return out;
}

std::vector<std::size_t> complement_rows(std::size_t n, const std::vector<std::size_t>& test) {
  std::vector<bool> in_test(n, false);
  for (const auto r : test) in_test.at(r) = true;
  std::vector<std::size_t> out;
  out.reserve(n - test.size());
  for (std::size_t i = 0; i < n; ++i)
    if (!in_test[i]) out.push_back(i);
  return out;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, const std::vector<std::size_t>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

Eigen::VectorXd take_rows(const Eigen::VectorXd& y, const std::vector<std::size_t>& rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    out(static_cast<Eigen::Index>(i)) = y(static_cast<Eigen::Index>(rows[i]));
  return out;
}

// ---------------------------------------------------------------------------
// Standardizer
// ---------------------------------------------------------------------------

Standardizer Standardizer::fit(const Eigen::MatrixXd& x) {
  Standardizer s;
  const double n = static_cast<double>(std::max<Eigen::Index>(x.rows(), 1));
  s.mean = x.colwise().mean().transpose();
  s.scale = ((x.rowwise() - s.mean.transpose()).colwise().squaredNorm().transpose() / n).cwiseSqrt();
  for (Eigen::Index j = 0; j < s.scale.size(); ++j)
    if (!(s.scale(j) > 0.0)) s.scale(j) = 1.0;
  return s;
}

Standardizer Standardizer::identity(Eigen::Index width) {
  return Standardizer{Eigen::VectorXd::Zero(width), Eigen::VectorXd::Ones(width)};
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& x) const {
  if (x.cols() != mean.size())
    throw DataError("standardizer: expected " + std::to_string(mean.size()) + " columns, got " +
                    std::to_string(x.cols()));
  return (x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
}

std::string_view to_string(LinearAlgorithm a) {
  switch (a) {
    case LinearAlgorithm::Ols: return "OLS";
    case LinearAlgorithm::Lasso: return "LASSO";
    case LinearAlgorithm::ElasticNet: return "ELASTICNET";
  }
  return "OLS";
}

LinearAlgorithm linear_algorithm_from_string(std::string_view s) {
  for (auto a : {LinearAlgorithm::Ols, LinearAlgorithm::Lasso, LinearAlgorithm::ElasticNet})
    if (to_string(a) == s) return a;
  throw ParseError("unknown linear algorithm '" + std::string(s) + "'");
}

Eigen::VectorXd LinearModel::raw_coefficients() const {
  return coefficients.cwiseQuotient(standardizer.scale);
}

double LinearModel::raw_intercept() const {
  return intercept - standardizer.mean.dot(raw_coefficients());
}

// ---------------------------------------------------------------------------
// Coordinate descent
// ---------------------------------------------------------------------------

namespace {

double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

double duality_gap(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                   const Eigen::VectorXd& residual, double l1, double l2) {
  const Eigen::VectorXd xta = x.transpose() * residual - l2 * w;
  const double dual_norm = xta.size() > 0 ? xta.cwiseAbs().maxCoeff() : 0.0;
  const double r2 = residual.squaredNorm();
  const double w2 = w.squaredNorm();
  double scale = 1.0;
  double gap = r2;
  if (dual_norm > l1) {
    scale = l1 / dual_norm;
    gap = 0.5 * (r2 + r2 * scale * scale);
  }
  gap += l1 * w.lpNorm<1>() - scale * residual.dot(y) + 0.5 * l2 * (1.0 + scale * scale) * w2;
  return gap;
}

void require_finite(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  if (x.rows() != y.size()) throw DataError("design matrix and target differ in length");
  if (x.rows() == 0) throw DataError("empty training data");
  if (!x.allFinite() || !y.allFinite()) throw NumericalError("non-finite training data");
}

struct Prepared {
  Standardizer standardizer;
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  double y_offset = 0.0;
};

Prepared prepare(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const LinearFitOptions& o) {
  require_finite(x, y);
  Prepared p;
  if (o.standardize) {
    p.standardizer = Standardizer::fit(x);
  } else if (o.fit_intercept) {
    p.standardizer = Standardizer::identity(x.cols());
    p.standardizer.mean = x.colwise().mean().transpose();
  } else {
    p.standardizer = Standardizer::identity(x.cols());
  }
  p.x = p.standardizer.apply(x);
  p.y_offset = o.fit_intercept ? y.mean() : 0.0;
  p.y = y.array() - p.y_offset;
  return p;
}

double gap_tolerance(const Eigen::VectorXd& y, double tol) {
  return tol * (y.array() - y.mean()).matrix().squaredNorm();
}

}  // namespace

CoordinateDescentResult coordinate_descent(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                           double alpha, double l1_ratio, double tol_abs,
                                           int max_sweeps, const Eigen::VectorXd* warm_start) {
  if (alpha < 0.0) throw ConfigError("alpha must be non-negative");
  if (l1_ratio < 0.0 || l1_ratio > 1.0) throw ConfigError("l1_ratio must be in [0, 1]");
  const auto n = static_cast<double>(x.rows());
  const double l1 = alpha * l1_ratio * n;
  const double l2 = alpha * (1.0 - l1_ratio) * n;
  const Eigen::VectorXd norms = x.colwise().squaredNorm().transpose();

  CoordinateDescentResult r;
  r.beta = warm_start ? *warm_start : Eigen::VectorXd::Zero(x.cols());
  Eigen::VectorXd residual = y - x * r.beta;

  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    double max_delta = 0.0;
    double max_w = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (norms(j) == 0.0) continue;
      const double old = r.beta(j);
      const double rho = x.col(j).dot(residual) + old * norms(j);
      const double updated = soft_threshold(rho, l1) / (norms(j) + l2);
      if (updated != old) {
        residual.noalias() -= (updated - old) * x.col(j);
        r.beta(j) = updated;
      }
      max_delta = std::max(max_delta, std::abs(updated - old));
      max_w = std::max(max_w, std::abs(updated));
    }
    r.sweeps = sweep;
    r.gap = duality_gap(x, y, r.beta, residual, l1, l2);
    // A sweep that moves no coordinate beyond rounding is a fixed point of CD,
    // which is the exact optimum even when the gap certificate is loose (alpha ~ 0).
    const bool fixed_point = max_delta <= 1e-15 * std::max(max_w, 1.0);
    if (r.gap <= tol_abs || fixed_point) {
      r.converged = true;
      break;
    }
  }
  return r;
}

LinearModel fit_elasticnet_cd(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double alpha,
                              double l1_ratio, const LinearFitOptions& options) {
  auto p = prepare(x, y, options);
  const auto cd = coordinate_descent(p.x, p.y, alpha, l1_ratio, gap_tolerance(y, options.tol),
                                     options.max_sweeps);
  LinearModel m;
  m.algorithm = l1_ratio == 1.0 ? LinearAlgorithm::Lasso : LinearAlgorithm::ElasticNet;
  m.coefficients = cd.beta;
  m.intercept = p.y_offset;
  m.alpha = alpha;
  m.l1_ratio = l1_ratio;
  m.standardizer = std::move(p.standardizer);
  m.diagnostics.duality_gap = cd.gap / static_cast<double>(x.rows());
  m.diagnostics.iterations = cd.sweeps;
  m.diagnostics.converged = cd.converged;
  m.diagnostics.selection_rule = "fixed-alpha";
  return m;
}

LinearModel fit_lasso_cd(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double alpha,
                         const LinearFitOptions& options) {
  return fit_elasticnet_cd(x, y, alpha, 1.0, options);
}

LinearModel fit_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                    const LinearFitOptions& options) {
  auto p = prepare(x, y, options);
  LinearModel m;
  m.algorithm = LinearAlgorithm::Ols;
  if (p.x.cols() == 0) {
    m.coefficients.resize(0);
  } else {
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(p.x);
    m.coefficients = cod.solve(p.y);
  }
  if (!m.coefficients.allFinite()) throw NumericalError("least squares produced non-finite coefficients");
  m.intercept = p.y_offset;
  m.alpha = 0.0;
  m.l1_ratio = 0.0;
  m.standardizer = std::move(p.standardizer);
  m.diagnostics.selection_rule = "least-squares";
  return m;
}

Eigen::VectorXd predict(const LinearModel& model, const Eigen::MatrixXd& x) {
  if (x.cols() != model.coefficients.size())
    throw DataError("linear model expects " + std::to_string(model.coefficients.size()) +
                    " features, got " + std::to_string(x.cols()));
  return (model.standardizer.apply(x) * model.coefficients).array() + model.intercept;
}

double alpha_max(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double l1_ratio,
                 const LinearFitOptions& options) {
  if (!(l1_ratio > 0.0)) throw ConfigError("alpha grid needs l1_ratio > 0");
  const auto p = prepare(x, y, options);
  if (p.x.cols() == 0) return 0.0;
  return (p.x.transpose() * p.y).cwiseAbs().maxCoeff() /
         (static_cast<double>(x.rows()) * l1_ratio);
}

std::vector<double> alpha_grid(double amax, int count, double eps) {
  if (count < 1) throw ConfigError("alpha grid needs at least one point");
  amax = std::max(amax, std::numeric_limits<double>::min() / eps);
  std::vector<double> grid(static_cast<std::size_t>(count));
  if (count == 1) {
    grid[0] = amax;
    return grid;
  }
  const double lo = std::log10(amax * eps);
  const double hi = std::log10(amax);
  for (int i = 0; i < count; ++i)
    grid[static_cast<std::size_t>(i)] =
        std::pow(10.0, hi + (lo - hi) * static_cast<double>(i) / static_cast<double>(count - 1));
  return grid;
}

// ---------------------------------------------------------------------------
// CV protocols
// ---------------------------------------------------------------------------

namespace {

struct FoldData {
  Prepared train;
  Eigen::MatrixXd test_x;  // transformed with the training standardizer
  Eigen::VectorXd test_y;
  double tol_abs = 0.0;
};

/// Mean validation MSE per alpha over the folds, using warm-started paths.
std::vector<double> cv_path_mse(const std::vector<FoldData>& folds, const std::vector<double>& grid,
                                double l1_ratio, int max_sweeps) {
  std::vector<double> mse(grid.size(), 0.0);
  for (const auto& f : folds) {
    Eigen::VectorXd warm = Eigen::VectorXd::Zero(f.train.x.cols());
    for (std::size_t a = 0; a < grid.size(); ++a) {
      const auto cd = coordinate_descent(f.train.x, f.train.y, grid[a], l1_ratio, f.tol_abs,
                                         max_sweeps, &warm);
      warm = cd.beta;
      const Eigen::VectorXd pred = (f.test_x * cd.beta).array() + f.train.y_offset;
      mse[a] += (pred - f.test_y).squaredNorm() / static_cast<double>(f.test_y.size());
    }
  }
  for (auto& v : mse) v /= static_cast<double>(folds.size());
  return mse;
}

}  // namespace

LinearModel fit_penalized_cv(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                             const PenalizedCvOptions& options, std::uint64_t seed) {
  require_finite(x, y);
  const auto n = static_cast<std::size_t>(x.rows());
  if (n < static_cast<std::size_t>(options.folds))
    throw DataError("penalized CV: " + std::to_string(n) + " rows < " +
                    std::to_string(options.folds) + " folds");
  if (options.repeats < 1 || options.l1_ratios.empty())
    throw ConfigError("penalized CV: need at least one repeat and one l1 ratio");

  const std::size_t per_ratio = static_cast<std::size_t>(options.repeats);
  const std::size_t total = per_ratio * options.l1_ratios.size();
  std::vector<LinearModel> candidates(total);

  parallel_for(total, options.workers, [&](std::size_t c) {
    const std::size_t ratio_index = c / per_ratio;
    const std::size_t repeat = c % per_ratio;
    const double l1_ratio = options.l1_ratios[ratio_index];
    Rng rng(derive_seed(seed, "penalized-cv", ratio_index, repeat));
    const auto test_sets = shuffled_kfold(n, options.folds, rng);

    std::vector<FoldData> folds;
    folds.reserve(test_sets.size());
    for (const auto& test : test_sets) {
      const auto train = complement_rows(n, test);
      FoldData f;
      const Eigen::VectorXd train_y = take_rows(y, train);
      f.train = prepare(take_rows(x, train), train_y, options.fit);
      f.test_x = f.train.standardizer.apply(take_rows(x, test));
      f.test_y = take_rows(y, test);
      f.tol_abs = gap_tolerance(train_y, options.fit.tol);
      folds.push_back(std::move(f));
    }
    const auto grid = alpha_grid(alpha_max(x, y, l1_ratio, options.fit), options.n_alphas, options.eps);
    const auto mse = cv_path_mse(folds, grid, l1_ratio, options.fit.max_sweeps);
    const auto best = static_cast<std::size_t>(std::min_element(mse.begin(), mse.end()) - mse.begin());

    auto model = fit_elasticnet_cd(x, y, grid[best], l1_ratio, options.fit);
    model.diagnostics.cv_mse = mse[best];
    model.diagnostics.selected_repeat = static_cast<int>(repeat);
    candidates[c] = std::move(model);
  });

  std::size_t winner = 0;
  for (std::size_t c = 1; c < total; ++c)
    if (candidates[c].diagnostics.duality_gap < candidates[winner].diagnostics.duality_gap)
      winner = c;
  LinearModel out = std::move(candidates[winner]);
  out.diagnostics.selection_rule = "min-duality-gap-of-refit";
  return out;
}

LinearModel fit_lasso_cv(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int folds,
                         int repeats, std::uint64_t seed, int workers) {
  PenalizedCvOptions o;
  o.folds = folds;
  o.repeats = repeats;
  o.l1_ratios = {1.0};
  o.workers = workers;
  auto m = fit_penalized_cv(x, y, o, seed);
  m.algorithm = LinearAlgorithm::Lasso;
  return m;
}

LinearModel fit_elasticnet_cv(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int folds,
                              int repeats_per_ratio, std::uint64_t seed, int workers,
                              const std::vector<double>& l1_ratios) {
  PenalizedCvOptions o;
  o.folds = folds;
  o.repeats = repeats_per_ratio;
  o.l1_ratios = l1_ratios;
  o.workers = workers;
  auto m = fit_penalized_cv(x, y, o, seed);
  m.algorithm = LinearAlgorithm::ElasticNet;
  return m;
}

}  // namespace affistack
