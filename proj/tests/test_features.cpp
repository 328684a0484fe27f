#include <gtest/gtest.h>

#include "affistack/error.hpp"
#include "affistack/features.hpp"
#include "support/synthetic.hpp"

using namespace affistack;
using namespace affistack::testing;

TEST(FeatureGroup, NamesRoundTrip) {
  for (const auto g : kAllFeatureGroups) EXPECT_EQ(feature_group_from_string(to_string(g)), g);
  EXPECT_EQ(feature_group_from_string("ED_A_P"), FeatureGroup::EDAP);
  EXPECT_EQ(to_string(FeatureGroup::ED1FP), "ED1-F-P");
  EXPECT_THROW(feature_group_from_string("ED9"), ConfigError);
}

TEST(FeatureGroup, PcCountPresenceValidated) {
  FeatureGroupSpec s{FeatureGroup::EDAP, {}, std::nullopt};
  EXPECT_THROW(s.validate(), ConfigError);
  s.pc_count = 23;
  EXPECT_THROW(s.validate(), ConfigError);
  s.pc_count = 22;
  EXPECT_NO_THROW(s.validate());
  FeatureGroupSpec e{FeatureGroup::E, {}, 3};
  EXPECT_THROW(e.validate(), ConfigError);
}

TEST(DlMeans, ArchitectureAverages) {
  const BasePredictionTable t(TableGroup::D1, {"D1|a|1", "D1|a|2", "D1|b|1", "D1|b|2"}, {"x"},
                              (Eigen::MatrixXd(1, 4) << 1, 3, 10, 20).finished());
  const auto m = dl_mean_scores(t);
  EXPECT_EQ(m.architectures, (std::vector<std::string>{"D1|a", "D1|b"}));
  EXPECT_DOUBLE_EQ(m.means(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(m.means(0, 1), 15.0);
  const BasePredictionTable single(TableGroup::D1, {"D1|solo|1"}, {"x"},
                                   (Eigen::MatrixXd(1, 1) << 4.5).finished());
  EXPECT_DOUBLE_EQ(dl_mean_scores(single).means(0, 0), 4.5);
}

TEST(DlMeans, SixArchitecturesOfFiftyInstances) {
  std::vector<std::string> cols;
  for (int a = 0; a < 6; ++a)
    for (int r = 0; r < 50; ++r) cols.push_back("D1F|arch" + std::to_string(a) + "|" + std::to_string(r));
  const BasePredictionTable t(TableGroup::D1F, cols, {"x", "y"}, Eigen::MatrixXd::Ones(2, 300));
  EXPECT_EQ(dl_mean_scores(t).means.cols(), 6);
}

TEST(Assemble, ColumnCounts) {
  const auto d = make_synthetic({});
  auto columns = [&](FeatureGroup g, std::optional<int> k = std::nullopt, const PCABasis* pca = nullptr) {
    return assemble_features(d.cohort, FeatureGroupSpec{g, {}, k}, pca).column_names;
  };
  EXPECT_EQ(columns(FeatureGroup::E), (std::vector<std::string>{"smina", "vinardo"}));
  EXPECT_EQ(columns(FeatureGroup::EW).size(), 3u);
  EXPECT_EQ(columns(FeatureGroup::ED3).size(), 3u + 3u);  // 3 synthetic D3 architectures
  const auto pca = fit_pca(pca_input_table(d.cohort, FeatureGroup::EDAP), PcaSource::DAP);
  EXPECT_EQ(columns(FeatureGroup::EDAP, 4, &pca),
            (std::vector<std::string>{"smina", "vinardo", "mw", "pc1", "pc2", "pc3", "pc4"}));
  EXPECT_THROW(columns(FeatureGroup::EDAP, 4), ConfigError);
}

TEST(Assemble, DeterministicAndRoundTrips) {
  const auto d = make_synthetic({});
  const FeatureGroupSpec spec{FeatureGroup::ED2F, {}, std::nullopt};
  const auto a = write_feature_matrix(assemble_features(d.cohort, spec));
  EXPECT_EQ(a, write_feature_matrix(assemble_features(d.cohort, spec)));
  const auto parsed = parse_feature_matrix(a);
  EXPECT_EQ(write_feature_matrix(parsed), a);
  ASSERT_TRUE(parsed.labels.has_value());
}

TEST(Assemble, MissingInputsAreListed) {
  auto d = make_synthetic({});
  d.cohort.records.at("cpx0003").molecular_weight.reset();
  d.cohort.records.at("cpx0007").molecular_weight.reset();
  try {
    assemble_features(d.cohort, FeatureGroupSpec{FeatureGroup::EW, {}, std::nullopt});
    FAIL();
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("cpx0003 (mw)"), std::string::npos) << msg;
    EXPECT_NE(msg.find("cpx0007 (mw)"), std::string::npos) << msg;
  }
  EXPECT_NO_THROW(assemble_features(d.cohort, FeatureGroupSpec{FeatureGroup::E, {}, std::nullopt}));
}

TEST(FeatureMatrix, SelectColumnsNamesMissing) {
  const auto d = make_synthetic({});
  const auto m = assemble_features(d.cohort, FeatureGroupSpec{FeatureGroup::E, {}, std::nullopt});
  const std::vector<std::string> want{"vinardo", "mw"};
  try {
    m.select_columns(want);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("mw"), std::string::npos);
  }
  const std::vector<std::string> swap{"vinardo", "smina"};
  const auto s = m.select_columns(swap);
  EXPECT_EQ(s.values.col(0), m.values.col(1));
}

TEST(Cohort, SubsetKeepsTables) {
  const auto d = make_synthetic({});
  const auto core = d.cohort.subset(Partition::CoreSet);
  EXPECT_EQ(core.records.size(), 24u);
  EXPECT_EQ(core.base_tables.size(), d.cohort.base_tables.size());
  EXPECT_EQ(d.cohort.ids(Partition::Train).size(), 96u);
}

TEST(Cohort, MolecularWeightResolutionOrder) {
  ComplexRecord rec;
  EXPECT_FALSE(rec.resolve_molecular_weight().has_value());
  const Molecule water("w", {Atom{Element::from_symbol("O"), Eigen::Vector3d::Zero()},
                             Atom{Element::from_symbol("H"), Eigen::Vector3d(1, 0, 0)},
                             Atom{Element::from_symbol("H"), Eigen::Vector3d(0, 1, 0)}});
  rec.experimental_pose = water;
  EXPECT_NEAR(*rec.resolve_molecular_weight(), 18.015, 1e-9);
  rec.molecular_weight = 500.0;
  EXPECT_DOUBLE_EQ(*rec.resolve_molecular_weight(), 500.0);
}
