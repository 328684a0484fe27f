#include <gtest/gtest.h>

#include "affistack/error.hpp"
#include "affistack/ingest.hpp"

using namespace affistack;

namespace {

std::string molfile(const std::string& name, const std::vector<std::string>& atoms,
                    int declared = -1, const std::string& data = "") {
  char counts[64];
  std::snprintf(counts, sizeof(counts), "%3d  0  0  0  0  0  0  0  0  0999 V2000\n",
                declared < 0 ? static_cast<int>(atoms.size()) : declared);
  std::string out = name + "\n  test\n\n" + counts;
  double x = 0.0;
  for (const auto& a : atoms) {
    char line[128];
    std::snprintf(line, sizeof(line), "%10.4f%10.4f%10.4f %-3s 0  0  0  0  0  0  0  0  0  0  0  0\n",
                  x, 0.5, -0.25, a.c_str());
    out += line;
    x += 1.0;
  }
  out += "M  END\n" + data + "$$$$\n";
  return out;
}

}  // namespace

TEST(Element, SymbolsAndWeights) {
  EXPECT_EQ(Element::from_symbol("CL").symbol(), "Cl");
  EXPECT_EQ(Element::from_symbol("c").atomic_number(), 6);
  EXPECT_DOUBLE_EQ(Element::from_symbol("C").standard_weight(), 12.011);
  EXPECT_THROW(Element::from_symbol("Xx"), ParseError);
  EXPECT_FALSE(Element::is_known("Qq"));
  EXPECT_TRUE(Element::from_symbol("H").is_hydrogen());
}

TEST(Sdf, WaterHasOneHeavyAtom) {
  const auto mols = parse_sdf(molfile("water", {"O", "H", "H"}));
  ASSERT_EQ(mols.size(), 1u);
  EXPECT_EQ(mols[0].atoms().size(), 3u);
  EXPECT_EQ(mols[0].heavy_atom_count(), 1u);
  EXPECT_NEAR(molecular_weight(mols[0]), 18.015, 0.001);
}

TEST(Sdf, TwoRecords) {
  const auto mols = parse_sdf(molfile("a", {"C"}) + molfile("b", {"N", "C"}));
  ASSERT_EQ(mols.size(), 2u);
  EXPECT_EQ(mols[1].heavy_atom_count(), 2u);
}

TEST(Sdf, TruncatedAtomBlockNamesRecord) {
  try {
    parse_sdf(molfile("bad", {"C", "C", "C", "C"}, 5));
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("SDF record 1"), std::string::npos) << e.what();
  }
}

TEST(Sdf, SecondRecordErrorNamesRecordTwo) {
  try {
    parse_sdf(molfile("ok", {"C"}) + molfile("bad", {"Zz"}));
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("SDF record 2"), std::string::npos) << e.what();
  }
}

TEST(Sdf, RejectsV3000AndHydrogenOnly) {
  std::string v3 = molfile("v3", {"C"});
  v3.replace(v3.find("V2000"), 5, "V3000");
  EXPECT_THROW(parse_sdf(v3), ParseError);
  EXPECT_THROW(parse_sdf(molfile("h2", {"H", "H"})), Error);
}

TEST(Sdf, DataItemsAndRoundTrip) {
  const auto text = molfile("lig", {"C", "O", "N", "H"}, -1, "> <minimizedAffinity>\n-7.5\n\n");
  const auto mols = parse_sdf(text);
  ASSERT_EQ(mols.size(), 1u);
  EXPECT_EQ(mols[0].properties().at("minimizedAffinity"), "-7.5");
  const auto again = parse_sdf(write_sdf(mols));
  ASSERT_EQ(again.size(), 1u);
  EXPECT_EQ(again[0].heavy_positions(), mols[0].heavy_positions());
  EXPECT_TRUE(std::equal(again[0].heavy_elements().begin(), again[0].heavy_elements().end(),
                         mols[0].heavy_elements().begin()));
  EXPECT_EQ(again[0].properties(), mols[0].properties());
}

TEST(MolecularWeight, SingleCarbonAndBenzene) {
  const Molecule carbon("c", {Atom{Element::from_symbol("C"), Eigen::Vector3d::Zero()}});
  EXPECT_DOUBLE_EQ(molecular_weight(carbon), 12.011);
  std::vector<Atom> atoms;
  for (int i = 0; i < 6; ++i) {
    atoms.push_back(Atom{Element::from_symbol("C"), Eigen::Vector3d(i, 0, 0)});
    atoms.push_back(Atom{Element::from_symbol("H"), Eigen::Vector3d(i, 1, 0)});
  }
  EXPECT_NEAR(molecular_weight(Molecule("benzene", atoms)), 78.11, 0.01);
}

TEST(PoseSet, FromSdfReadsEnergiesInRankOrder) {
  const auto mols = parse_sdf(molfile("p", {"C"}, -1, "> <minimizedAffinity>\n-9.1\n\n") +
                              molfile("p", {"C"}, -1, "> <minimizedAffinity>\n-8.0\n\n"));
  const auto set = pose_set_from_sdf("1abc", ScoringFunction::Smina, mols);
  ASSERT_EQ(set.poses.size(), 2u);
  EXPECT_EQ(set.poses[1].rank, 1);
  EXPECT_DOUBLE_EQ(set.poses[0].energy, -9.1);
  EXPECT_NO_THROW(set.validate());
  const auto unsorted = parse_sdf(molfile("p", {"C"}, -1, "> <minimizedAffinity>\n-7\n\n") +
                                  molfile("p", {"C"}, -1, "> <minimizedAffinity>\n-8\n\n"));
  EXPECT_THROW(pose_set_from_sdf("x", ScoringFunction::Smina, unsorted), DataError);
  const auto missing = parse_sdf(molfile("p", {"C"}));
  EXPECT_THROW(pose_set_from_sdf("x", ScoringFunction::Smina, missing), ParseError);
}

TEST(ScoreTable, ParsesAndRejects) {
  const auto t = parse_score_table("id\tm1\tm2\n1abc\t-8.1\t-7.9\n", TableGroup::D1);
  EXPECT_EQ(t.values().rows(), 1);
  EXPECT_EQ(t.values().cols(), 2);
  EXPECT_DOUBLE_EQ(t.row("1abc")(1), -7.9);
  EXPECT_EQ(write_score_table(t), "id\tm1\tm2\n1abc\t-8.1\t-7.9\n");
  EXPECT_THROW(parse_score_table("id\tm1\na\t1\na\t2\n", TableGroup::D1), ParseError);
  EXPECT_THROW(parse_score_table("id\tm1\tm2\na\t1\n", TableGroup::D1), ParseError);
  EXPECT_THROW(parse_score_table("id\tm1\na\tx\n", TableGroup::D1), ParseError);
}

TEST(ScoreTable, GatherListsEveryMissingId) {
  const auto t = parse_score_table("id\tm\na\t1\nb\t2\n", TableGroup::D2);
  const std::vector<std::string> ids{"b", "zz", "a", "yy"};
  try {
    t.gather(ids);
    FAIL();
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("zz"), std::string::npos);
    EXPECT_NE(msg.find("yy"), std::string::npos);
  }
  const std::vector<std::string> ok{"b", "a"};
  EXPECT_DOUBLE_EQ(t.gather(ok)(0, 0), 2.0);
}

TEST(Labels, RoundTripAndErrors) {
  const std::string text =
      "complex_id\tln_affinity\tmeasure_kind\tassay_method\tyear\n"
      "1abc\t-12.5\tKd\tXRAY\t2010\n2xyz\t-9\tIC50\tNMR\t\n";
  const auto labels = parse_labels(text);
  ASSERT_EQ(labels.size(), 2u);
  EXPECT_EQ(labels[1].measure_kind, MeasureKind::IC50);
  EXPECT_FALSE(labels[1].year.has_value());
  EXPECT_EQ(write_labels(labels), text);
  EXPECT_THROW(parse_labels("complex_id\tvalue\n"), ParseError);
}

TEST(GeneralSet, RulesApplyInOrder) {
  auto label = [](std::string id, MeasureKind m, std::optional<AssayMethod> a, std::optional<int> y) {
    return AffinityLabel{std::move(id), -10.0, m, a, y};
  };
  const std::vector<AffinityLabel> labels{
      label("keep", MeasureKind::Kd, AssayMethod::Xray, 2015),
      label("ic50", MeasureKind::IC50, AssayMethod::Xray, 2015),
      label("old", MeasureKind::Ki, AssayMethod::Xray, 1999),
      label("nmr", MeasureKind::Kd, AssayMethod::Nmr, 2015),
      label("zero", MeasureKind::Kd, AssayMethod::Xray, 2015),
      label("excluded", MeasureKind::Kd, AssayMethod::Xray, 2015),
      label("noyear", MeasureKind::Kd, AssayMethod::Xray, std::nullopt),
      label("noscore", MeasureKind::Kd, AssayMethod::Xray, 2015)};
  std::map<std::string, DockingScores> scores;
  for (const auto& l : labels) scores[l.complex_id] = {-8.0, -7.0};
  scores["zero"].vinardo = 0.0;
  scores.erase("noscore");
  const auto kept = filter_general_set(labels, {"excluded"}, scores);
  EXPECT_EQ(kept, std::vector<std::string>{"keep"});
  EXPECT_EQ(filter_general_set(labels, {"excluded"}, scores), kept);
}
