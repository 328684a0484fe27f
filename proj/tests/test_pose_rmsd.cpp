#include <gtest/gtest.h>

#include "affistack/cohort.hpp"
#include "affistack/error.hpp"
#include "affistack/pose_rmsd.hpp"
#include "support/oracles.hpp"

using namespace affistack;
using namespace affistack::testing;

namespace {

Molecule carbons(const std::vector<double>& xs) {
  std::vector<Atom> atoms;
  for (const double x : xs) atoms.push_back(Atom{Element::from_symbol("C"), Eigen::Vector3d(x, 0, 0)});
  return Molecule("c", atoms);
}

PoseSet pose_set(const std::string& id, ScoringFunction sf, const std::vector<double>& energies,
                 const std::vector<double>& offsets) {
  PoseSet s;
  s.complex_id = id;
  s.scoring_function = sf;
  for (std::size_t k = 0; k < energies.size(); ++k)
    s.poses.push_back(Pose{static_cast<int>(k), energies[k], carbons({offsets[k], offsets[k] + 1.5})});
  return s;
}

}  // namespace

TEST(Rmsd, SpecExamples) {
  EXPECT_DOUBLE_EQ(symmetric_rmsd(carbons({0, 1}), carbons({0, 1})), 0.0);
  EXPECT_DOUBLE_EQ(symmetric_rmsd(carbons({0}), carbons({2})), 2.0);
  const auto a = carbons({0, 1});
  const auto b = carbons({0, 3});
  EXPECT_NEAR(asymmetric_rmsd(a, b), std::sqrt(0.5), 1e-12);
  EXPECT_NEAR(symmetric_rmsd(a, b), std::sqrt(2.0), 1e-12);
  EXPECT_DOUBLE_EQ(symmetric_rmsd(a, b), symmetric_rmsd(b, a));
}

TEST(Rmsd, MissingElementCounterpartIsAnError) {
  const Molecule n("n", {Atom{Element::from_symbol("N"), Eigen::Vector3d::Zero()}});
  EXPECT_THROW(symmetric_rmsd(carbons({0}), n), DataError);
}

TEST(Rmsd, HydrogensIgnored) {
  auto atoms = carbons({0, 1}).atoms();
  atoms.push_back(Atom{Element::from_symbol("H"), Eigen::Vector3d(50, 50, 50)});
  EXPECT_DOUBLE_EQ(symmetric_rmsd(Molecule("h", atoms), carbons({0, 1})), 0.0);
}

TEST(Rmsd, TemplateWorksForFloat) {
  Eigen::Matrix3Xf a(3, 1), b(3, 1);
  a << 0, 0, 0;
  b << 3, 4, 0;
  const std::vector<Element> e{Element::from_symbol("C")};
  EXPECT_FLOAT_EQ(asymmetric_rmsd(a, std::span<const Element>(e), b, std::span<const Element>(e)), 5.0f);
}

TEST(Rmsd, MatchesOracleAndIsTranslationCovariant) {
  Rng rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    const auto a = random_molecule(rng, 12, {"C", "N", "O"});
    const auto b = random_molecule(rng, 9, {"C", "N", "O"});
    EXPECT_NEAR(symmetric_rmsd(a, b), oracle_symmetric_rmsd(a, b), 1e-12);
    EXPECT_GE(symmetric_rmsd(a, b), 0.0);
  }
}

TEST(ExperimentalFilter, SpecExamples) {
  const auto poses = pose_set("x", ScoringFunction::Smina, {-9, -8, -7}, {0, 0, 0});
  const std::vector<double> r1{5.0, 2.5, 1.0};
  auto s = select_experimental(poses, r1);
  EXPECT_EQ(s.chosen_rank, 1);
  EXPECT_DOUBLE_EQ(s.energy, -8);
  EXPECT_DOUBLE_EQ(s.rmsd, 2.5);
  const std::vector<double> far{4, 5, 6};
  s = select_experimental(poses, far);
  EXPECT_EQ(s.chosen_rank, 0);
  EXPECT_DOUBLE_EQ(s.energy, -9);
  EXPECT_DOUBLE_EQ(s.rmsd, 100.0);
  const std::vector<double> near{0.5, 1, 2};
  s = select_experimental(poses, near);
  EXPECT_EQ(s.chosen_rank, 0);
  EXPECT_DOUBLE_EQ(s.rmsd, 0.5);
  const std::vector<double> edge{3.0, 3.0, 3.0};
  EXPECT_DOUBLE_EQ(select_experimental(poses, edge).rmsd, 100.0);
}

TEST(ExperimentalFilter, UsesStructures) {
  const auto poses = pose_set("x", ScoringFunction::Smina, {-9, -8, -7}, {10, 1, 0});
  const auto s = experimental_filter(poses, carbons({0, 1.5}));
  EXPECT_EQ(s.chosen_rank, 1);
  EXPECT_NEAR(s.rmsd, std::sqrt(0.625), 1e-12);
}

TEST(ExperimentalFilter, FailedSetGetsSentinel) {
  PoseSet failed;
  failed.complex_id = "f";
  failed.failed = true;
  const auto s = experimental_filter(failed, carbons({0}));
  EXPECT_EQ(s.chosen_rank, 0);
  EXPECT_DOUBLE_EQ(s.energy, 0.0);
  EXPECT_DOUBLE_EQ(s.rmsd, 100.0);
}

TEST(ConsensusFilter, SpecExamples) {
  Eigen::MatrixXd m(2, 2);
  m << 2.9, 5.0, 5.0, 1.0;
  EXPECT_EQ(select_consensus_pair(m), (ConsensusChoice{0, 0, 2.9}));
  m << 5.0, 2.0, 2.5, 5.0;
  EXPECT_EQ(select_consensus_pair(m), (ConsensusChoice{0, 1, 2.0}));
  m << 5.0, 4.0, 3.0, 7.0;
  EXPECT_EQ(select_consensus_pair(m), (ConsensusChoice{0, 0, 100.0}));
  m << 5.0, 2.0, 2.0, 5.0;  // full tie: lower SMINA rank
  EXPECT_EQ(select_consensus_pair(m), (ConsensusChoice{0, 1, 2.0}));
}

TEST(ConsensusFilter, AgreesWithEnumeration) {
  Rng rng(8);
  for (int t = 0; t < 200; ++t) {
    Eigen::MatrixXd m(9, 9);
    for (Eigen::Index i = 0; i < 81; ++i) m(i) = std::round(rng.uniform(0.0, 8.0) * 2.0) / 2.0;
    EXPECT_EQ(select_consensus_pair(m), oracle_consensus(m));
  }
}

TEST(ConsensusFilter, StructuresAndFailure) {
  const auto smina = pose_set("x", ScoringFunction::Smina, {-9, -8}, {20, 0});
  const auto vinardo = pose_set("x", ScoringFunction::Vinardo, {-7, -6}, {0.5, 40});
  const auto r = consensus_filter(smina, vinardo);
  EXPECT_EQ(r.smina.chosen_rank, 1);
  EXPECT_EQ(r.vinardo.chosen_rank, 0);
  EXPECT_NEAR(r.pair_rmsd, 0.5, 1e-12);
  PoseSet failed = vinardo;
  failed.failed = true;
  const auto f = consensus_filter(smina, failed);
  EXPECT_DOUBLE_EQ(f.pair_rmsd, 100.0);
  EXPECT_EQ(f.smina.chosen_rank, 0);
}

TEST(FilterTable, RoundTripAndNaming) {
  const auto smina = pose_set("x", ScoringFunction::Smina, {-9, -8}, {20, 0});
  const auto vinardo = pose_set("x", ScoringFunction::Vinardo, {-7, -6}, {0.5, 40});
  const std::vector<FilterResult> rows{consensus_filter_result(smina, vinardo)};
  const auto text = write_filter_table(rows, RmsdCutoff::Strict);
  const auto back = parse_filter_table(text);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].smina.chosen_rank, 1);
  EXPECT_DOUBLE_EQ(back[0].vinardo.energy, -7);
  EXPECT_EQ(write_filter_table(back, RmsdCutoff::Strict), text);
  EXPECT_EQ(filter_table_filename({FilterKind::Consensus, RmsdCutoff::Strict}), "scores_VvS_3.0.tsv");
  EXPECT_EQ(filter_table_filename({FilterKind::Experimental, RmsdCutoff::Unfiltered}),
            "scores_RelExpt_101.0.tsv");
}

TEST(RmsdCutoff, ApplyToTrainOnly) {
  Cohort cohort;
  const double rmsds[] = {0.5, 2.9, 100.0, 100.0};
  for (int i = 0; i < 4; ++i) {
    ComplexRecord rec;
    rec.partition = i == 3 ? Partition::CoreSet : Partition::Train;
    FilterResult fr;
    fr.rmsd = rmsds[i];
    rec.filter_results[FilterKind::Consensus] = fr;
    cohort.records["c" + std::to_string(i)] = rec;
  }
  auto count = [&](RmsdCutoff c) {
    return apply_rmsd_cutoff(cohort, {FilterKind::Consensus, c}).records.size();
  };
  EXPECT_EQ(count(RmsdCutoff::Unfiltered), 4u);
  EXPECT_EQ(count(RmsdCutoff::DropSentinel), 3u);
  EXPECT_EQ(count(RmsdCutoff::Strict), 3u);
  EXPECT_EQ(apply_rmsd_cutoff(cohort, {FilterKind::Consensus, RmsdCutoff::Strict}).ids(),
            apply_rmsd_cutoff(cohort, {FilterKind::Consensus, RmsdCutoff::DropSentinel}).ids());
  EXPECT_TRUE(apply_rmsd_cutoff(cohort, {FilterKind::Consensus, RmsdCutoff::Strict}).records.contains("c3"));
  EXPECT_THROW(apply_rmsd_cutoff(cohort, {FilterKind::Experimental, RmsdCutoff::Strict}), DataError);
}
