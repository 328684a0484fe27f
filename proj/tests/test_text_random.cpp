#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "affistack/error.hpp"
#include "affistack/parallel.hpp"
#include "affistack/random.hpp"
#include "affistack/text.hpp"

using namespace affistack;

TEST(Text, FormatDoubleRoundTrips) {
  for (const double v : {0.1, -7.25, 1e-300, 123456789.123, 1.0 / 3.0}) {
    double back = 0.0;
    ASSERT_TRUE(parse_double(format_double(v), back));
    EXPECT_EQ(back, v);
  }
  EXPECT_EQ(format_double(0.0), "0");
  EXPECT_EQ(format_double(-0.0), "0");
  EXPECT_EQ(format_double(2.5), "2.5");
}

TEST(Text, StrictParsing) {
  double d = 0.0;
  EXPECT_FALSE(parse_double("", d));
  EXPECT_FALSE(parse_double("1.5x", d));
  EXPECT_FALSE(parse_double("nan", d));
  long long i = 0;
  EXPECT_TRUE(parse_int("-42", i));
  EXPECT_EQ(i, -42);
  EXPECT_FALSE(parse_int("4.2", i));
}

TEST(Text, SplitAndTrim) {
  const auto cells = split("a\tb\t\tc", '\t');
  ASSERT_EQ(cells.size(), 4u);
  EXPECT_EQ(cells[2], "");
  EXPECT_EQ(trim("  x \r"), "x");
  const auto lines = split_lines("one\r\ntwo\nthree");
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0], "one");
}

TEST(Text, ContentHashIsFnv1a) {
  // Published FNV-1a 64 test vectors.
  EXPECT_EQ(content_hash(""), "cbf29ce484222325");
  EXPECT_EQ(content_hash("a"), "af63dc4c8601ec8c");
}

TEST(Random, DeriveSeedSeparatesTagsAndIndices) {
  std::set<std::uint64_t> seen;
  for (const char* tag : {"a", "b", "lasso"})
    for (std::uint64_t i = 0; i < 5; ++i) seen.insert(derive_seed(1701, tag, i));
  EXPECT_EQ(seen.size(), 15u);
  EXPECT_EQ(derive_seed(1701, "x", 3), derive_seed(1701, "x", 3));
  EXPECT_NE(derive_seed(1701, "x"), derive_seed(1702, "x"));
}

TEST(Random, UniformIndexInRangeAndCoversAll) {
  Rng rng(3);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 7000; ++i) ++counts[rng.uniform_index(7)];
  for (const int c : counts) EXPECT_GT(c, 800);
}

TEST(Random, NormalMoments) {
  Rng rng(11);
  double sum = 0.0, sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sq += x * x;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.03);
  EXPECT_NEAR(sq / n, 1.0, 0.05);
}

TEST(Random, PermutationAndSampling) {
  Rng rng(5);
  auto p = rng.permutation(50);
  std::sort(p.begin(), p.end());
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(p[i], i);
  const auto s = rng.sample_without_replacement(20, 20);
  EXPECT_EQ(std::set<std::size_t>(s.begin(), s.end()).size(), 20u);
}

TEST(Parallel, SlotsAreIndependentOfWorkerCount) {
  std::vector<double> one(100), four(100);
  parallel_for(100, 1, [&](std::size_t i) { one[i] = std::sqrt(static_cast<double>(i)); });
  parallel_for(100, 4, [&](std::size_t i) { four[i] = std::sqrt(static_cast<double>(i)); });
  EXPECT_EQ(one, four);
}

TEST(Parallel, RethrowsLowestFailingIndex) {
  try {
    parallel_for(20, 4, [](std::size_t i) {
      if (i == 7 || i == 13) throw DataError("fail " + std::to_string(i));
    });
    FAIL();
  } catch (const DataError& e) {
    EXPECT_STREQ(e.what(), "fail 7");
  }
}
