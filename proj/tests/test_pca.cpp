#include <gtest/gtest.h>

#include "affistack/error.hpp"
#include "affistack/evaluate.hpp"
#include "affistack/learners.hpp"
#include "affistack/pca.hpp"
#include "affistack/random.hpp"

using namespace affistack;

namespace {

Eigen::MatrixXd correlated(Rng& rng, int n, int p, double noise) {
  Eigen::MatrixXd x(n, p);
  for (int i = 0; i < n; ++i) {
    const double latent = rng.normal();
    for (int j = 0; j < p; ++j) x(i, j) = latent + noise * rng.normal();
  }
  return x;
}

PcCandidateLearner ols_learner() {
  return [](const Eigen::MatrixXd& tx, const Eigen::VectorXd& ty, const Eigen::MatrixXd& vx, int) {
    return predict(fit_ols(tx, ty), vx);
  };
}

}  // namespace

TEST(Pca, RankOneExplainsEverything) {
  Eigen::VectorXd base(6);
  base << 1, -2, 3, 0.5, 4, -1;
  Eigen::RowVectorXd scale(4);
  scale << 1, 2, -0.5, 3;
  const Eigen::MatrixXd x = base * scale;
  const auto b = fit_pca(x, PcaSource::D3P);
  EXPECT_NEAR(b.explained_variance_ratio()(0), 1.0, 1e-10);
  const auto s = project(b, x, 1);
  EXPECT_LT((reconstruct(b, s.leftCols(1)) - x).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Pca, CenteringAndOutOfSampleMean) {
  Rng rng(4);
  const auto x = correlated(rng, 40, 5, 0.5);
  const auto b = fit_pca(x, PcaSource::DAP);
  const auto s = project(b, x, b.component_count());
  EXPECT_LT(s.colwise().mean().cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT(project(b, b.column_means.transpose(), b.component_count()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((reconstruct(b, s) - x).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Pca, SignConventionAndOrthonormality) {
  Rng rng(9);
  const auto x = correlated(rng, 30, 8, 1.0);
  const auto b = fit_pca(x, PcaSource::DAP);
  for (Eigen::Index c = 0; c < b.components.cols(); ++c) EXPECT_GE(b.components.col(c).sum(), -1e-12);
  const Eigen::MatrixXd gram = b.components.transpose() * b.components;
  EXPECT_LT((gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff(), 1e-10);
  for (Eigen::Index c = 1; c < b.singular_values.size(); ++c)
    EXPECT_GE(b.singular_values(c - 1), b.singular_values(c));
}

TEST(Pca, FirstComponentTracksRowMean) {
  Rng rng(12);
  const auto x = correlated(rng, 200, 50, 0.8);
  const auto b = fit_pca(x, PcaSource::DAP);
  const Eigen::VectorXd pc1 = project(b, x, 1).col(0);
  EXPECT_GT(pearson(pc1, x.rowwise().mean()), 0.99);
}

TEST(Pca, RejectsDegenerateInput) {
  EXPECT_THROW(fit_pca(Eigen::MatrixXd::Ones(1, 3), PcaSource::DAP), Error);
  Eigen::MatrixXd bad = Eigen::MatrixXd::Ones(4, 2);
  bad(1, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(fit_pca(bad, PcaSource::DAP), Error);
}

TEST(PcCount, SingleCandidate) {
  Rng rng(2);
  const auto x = correlated(rng, 40, 4, 1.0);
  const auto b = fit_pca(x, PcaSource::DAP);
  const auto s = project(b, x, 4);
  const Eigen::VectorXd y = s.col(0);
  const auto sel = optimize_pc_count(Eigen::MatrixXd(40, 0), s, y, ols_learner(), 1, 99);
  EXPECT_EQ(sel.best_k, 1);
  EXPECT_EQ(sel.validation_pearson.size(), 1u);
  EXPECT_EQ(sel.validation_rows.size(), 8u);
}

TEST(PcCount, RecoversSignalDimension) {
  Rng rng(6);
  Eigen::MatrixXd x(150, 6);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal() * (1.0 + static_cast<double>(i % 6));
  const auto b = fit_pca(x, PcaSource::DAP);
  const auto s = project(b, x, 6);
  // labels = PC1: the extra components carry no signal, and the smallest k wins ties.
  const Eigen::VectorXd y1 = s.col(0);
  EXPECT_EQ(optimize_pc_count(Eigen::MatrixXd(150, 0), s, y1, ols_learner(), 6, 5).best_k, 1);
  const Eigen::VectorXd y13 = s.col(0) + s.col(2);
  EXPECT_GE(optimize_pc_count(Eigen::MatrixXd(150, 0), s, y13, ols_learner(), 6, 5).best_k, 3);
}

TEST(PcCount, NeedsTenRows) {
  const Eigen::MatrixXd s = Eigen::MatrixXd::Random(8, 3);
  EXPECT_THROW(optimize_pc_count(Eigen::MatrixXd(8, 0), s, Eigen::VectorXd::Random(8), ols_learner(), 2, 1),
               NumericalError);
}
