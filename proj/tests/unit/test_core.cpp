#include <gtest/gtest.h>

#include <atomic>
#include <set>

#include "eventcast/core.hpp"

using namespace eventcast;

TEST(Dates, ParseFormatRoundTrip) {
  EXPECT_EQ(format_date(parse_date("2018-03-25")), "2018-03-25");
  EXPECT_EQ(parse_date("20180325"), make_date(2018, 3, 25));
  EXPECT_THROW(parse_date("2018-02-30"), std::invalid_argument);
  EXPECT_THROW(parse_date("yesterday"), std::invalid_argument);
}

TEST(Dates, ReferenceIndexLength) {
  const auto d = date_range(make_date(2015, 2, 18), make_date(2018, 12, 31));
  ASSERT_EQ(d.size(), 1413u);
  // Last 282 days begin on Mar 25 2018.
  EXPECT_EQ(d[1413 - 282], make_date(2018, 3, 25));
}

TEST(Matrix, SelectRowsCols) {
  Matrix m(3, 2);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 2; ++c) m(r, c) = 10.0 * r + c;
  const std::vector<std::size_t> rows{2, 0}, cols{1};
  auto s = m.select_rows(rows);
  EXPECT_EQ(s(0, 0), 20.0);
  EXPECT_EQ(s(1, 1), 1.0);
  auto c = m.select_cols(cols);
  EXPECT_EQ(c.cols(), 1u);
  EXPECT_EQ(c(2, 0), 21.0);
}

TEST(Rng, DeterministicAndSeedSensitive) {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    (void)c;
  }
  EXPECT_NE(Rng(42).next(), Rng(43).next());
  EXPECT_NE(mix_seed(1, 2), mix_seed(2, 1));
}

TEST(Rng, UniformAndBelowRanges) {
  Rng r(7);
  double sum = 0;
  for (int i = 0; i < 20000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    ASSERT_LT(r.below(5), 5u);
  }
  EXPECT_NEAR(sum / 20000, 0.5, 0.01);
}

TEST(Fingerprint, Fnv1aKnownValues) {
  EXPECT_EQ(fingerprint(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fingerprint("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(hex64(0xabcULL).size(), 16u);
}

TEST(ParallelFor, VisitsEveryIndexOnce) {
  for (unsigned threads : {1u, 2u, 8u}) {
    std::vector<std::atomic<int>> hits(257);
    parallel_for(hits.size(), threads, [&](std::size_t i) { hits[i]++; });
    for (auto& h : hits) EXPECT_EQ(h.load(), 1);
  }
}
