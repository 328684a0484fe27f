#include <gtest/gtest.h>

#include "affistack/error.hpp"
#include "affistack/evaluate.hpp"
#include "affistack/learners.hpp"
#include "affistack/random.hpp"
#include "affistack/serialization.hpp"

using namespace affistack;

namespace {

void make_data(Rng& rng, int n, int p, Eigen::MatrixXd& x, Eigen::VectorXd& y) {
  x.resize(n, p);
  y.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) x(i, j) = rng.uniform(-1.0, 1.0);
    y(i) = 3.0 * x(i, 0) + (x(i, 1) > 0 ? 1.0 : -1.0) + 0.1 * rng.normal();
  }
}

}  // namespace

TEST(Gbt, HandEvaluatedStump) {
  GBTModel m;
  m.n_features = 1;
  m.hyperparams.learning_rate = 0.1;
  RegressionTree t;
  t.nodes = {TreeNode{0, 0.5, 1, 2, 0.0}, TreeNode{-1, 0, -1, -1, -1.0}, TreeNode{-1, 0, -1, -1, 1.0}};
  m.trees.push_back(t);
  Eigen::MatrixXd x(2, 1);
  x << 0.2, 0.8;
  const auto p = predict(m, x);
  EXPECT_NEAR(p(0), -0.1, 1e-15);
  EXPECT_NEAR(p(1), 0.1, 1e-15);
}

TEST(Gbt, EmptyEnsembleAndHugeGammaPredictMean) {
  Rng rng(1);
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  make_data(rng, 50, 3, x, y);
  GBTHyperparams hp;
  hp.n_estimators = 0;
  auto m = fit_gbt(x, y, hp, 5);
  EXPECT_TRUE((predict(m, x).array() == y.mean()).all());
  hp.n_estimators = 10;
  hp.gamma = 1e9;
  hp.subsample = 1.0;  // root leaves then hold the zero mean residual
  m = fit_gbt(x, y, hp, 5);
  for (const auto& t : m.trees) EXPECT_EQ(t.nodes.size(), 1u);
  EXPECT_LT((predict(m, x).array() - y.mean()).abs().maxCoeff(), 1e-12);
}

TEST(Gbt, StepFunctionFitInOneTree) {
  Eigen::MatrixXd x(8, 2);
  Eigen::VectorXd y(8);
  for (int i = 0; i < 8; ++i) {
    x(i, 0) = i;
    x(i, 1) = (i * 37) % 5;
    y(i) = i < 3 ? -2.0 : 4.0;
  }
  GBTHyperparams hp{1, 2, 1.0, 1.0, 1.0, 0.0};
  std::vector<double> mse;
  const auto m = fit_gbt(x, y, hp, 1, &mse);
  ASSERT_EQ(mse.size(), 2u);
  EXPECT_LT(mse.back(), 1e-20);
  EXPECT_LT((predict(m, x) - y).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE(m.trees[0].depth(), 2);
}

TEST(Gbt, TrainingMseNonIncreasingOnFullSample) {
  Rng rng(2);
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  make_data(rng, 120, 4, x, y);
  GBTHyperparams hp{60, 3, 0.2, 1.0, 1.0, 0.0};
  std::vector<double> mse;
  fit_gbt(x, y, hp, 7, &mse);
  ASSERT_EQ(mse.size(), 61u);
  for (std::size_t i = 1; i < mse.size(); ++i) EXPECT_LE(mse[i], mse[i - 1] + 1e-12) << i;
}

TEST(Gbt, SeededFitIsBitwiseReproducible) {
  Rng rng(3);
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  make_data(rng, 80, 5, x, y);
  const GBTHyperparams hp;
  EXPECT_EQ(dump(to_json(fit_gbt(x, y, hp, 11))), dump(to_json(fit_gbt(x, y, hp, 11))));
  EXPECT_NE(dump(to_json(fit_gbt(x, y, hp, 11))), dump(to_json(fit_gbt(x, y, hp, 12))));
}

TEST(Gbt, HyperparameterValidation) {
  GBTHyperparams hp;
  hp.subsample = 0.0;
  EXPECT_THROW(hp.validate(), ConfigError);
  hp = {};
  hp.max_depth = -1;
  EXPECT_THROW(hp.validate(), ConfigError);
  Rng rng(4);
  for (int i = 0; i < 200; ++i) EXPECT_TRUE(draw_gbt_hyperparams(rng).within_search_ranges());
}

TEST(GbtSearch, SingleDrawAndDeterminism) {
  Rng rng(5);
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  make_data(rng, 60, 3, x, y);
  const auto one = random_search_gbt(x, y, 1, 3, 99);
  ASSERT_EQ(one.candidates.size(), 1u);
  EXPECT_EQ(one.best, one.candidates[0]);
  const auto a = random_search_gbt(x, y, 4, 3, 99, 1);
  const auto b = random_search_gbt(x, y, 4, 3, 99, 3);
  EXPECT_EQ(a.best, b.best);
  EXPECT_EQ(a.scores, b.scores);
  EXPECT_EQ(dump(to_json(a.model)), dump(to_json(b.model)));
}

TEST(GbtSearch, RecoversLinearSignal) {
  Rng rng(6);
  const int n = 500;
  Eigen::MatrixXd x(n, 3);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 3; ++j) x(i, j) = rng.normal();
    y(i) = 3.0 * x(i, 0) + 0.1 * rng.normal();
  }
  const Eigen::MatrixXd train_x = x.topRows(400), test_x = x.bottomRows(100);
  const Eigen::VectorXd train_y = y.head(400), test_y = y.tail(100);
  const auto r = random_search_gbt(train_x, train_y, 5, 5, 1701);
  EXPECT_GT(pearson(predict(r.model, test_x), test_y), 0.95);
}

TEST(R2, Basics) {
  const Eigen::Vector3d t(1, 2, 3);
  EXPECT_DOUBLE_EQ(r2_score(t, t), 1.0);
  EXPECT_DOUBLE_EQ(r2_score(t, Eigen::Vector3d::Constant(2.0)), 0.0);
}
