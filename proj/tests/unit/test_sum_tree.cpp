#include <cstdint>
#include <vector>

#include "doctest.h"
#include "rainbowq/errors.h"
#include "rainbowq/rng.h"
#include "rainbowq/sum_tree.h"
#include "support/oracles.h"
#include "support/stats.h"

using rainbowq::Rng;
using rainbowq::SumTree;

TEST_CASE("capacity rounds up to a power of two") {
  CHECK(SumTree(1).capacity() == 1);
  CHECK(SumTree(2).capacity() == 2);
  CHECK(SumTree(3).capacity() == 4);
  CHECK(SumTree(1000).capacity() == 1024);
}

TEST_CASE("hand-worked descent matches the prefix contract") {
  SumTree t(4);
  t.set(0, 1.0);
  t.set(1, 2.0);
  t.set(2, 3.0);
  t.set(3, 4.0);
  CHECK(t.total() == doctest::Approx(10.0));
  CHECK(t.prefix_sample(0.0) == 0);
  CHECK(t.prefix_sample(0.5) == 0);
  CHECK(t.prefix_sample(1.0) == 1);
  CHECK(t.prefix_sample(2.9) == 1);
  CHECK(t.prefix_sample(3.0) == 2);
  CHECK(t.prefix_sample(5.999) == 2);
  CHECK(t.prefix_sample(6.0) == 3);
  CHECK(t.prefix_sample(9.999) == 3);
  CHECK_THROWS_AS(t.prefix_sample(10.0), rainbowq::InputError);
  CHECK_THROWS_AS(t.prefix_sample(-0.001), rainbowq::InputError);
}

TEST_CASE("zero-priority leaves are never returned") {
  SumTree t(8);
  t.set(1, 1.0);
  t.set(5, 3.0);
  Rng r(11);
  for (int i = 0; i < 20000; ++i) {
    const int64_t leaf = t.prefix_sample(r.uniform() * t.total());
    REQUIRE((leaf == 1 || leaf == 5));
  }
  CHECK(t.prefix_sample(0.0) == 1);
  CHECK(t.prefix_sample(1.0) == 5);  // exact boundary walks past the zero leaves
}

TEST_CASE("internal nodes stay consistent after many updates") {
  SumTree t(64);
  Rng r(5);
  for (int step = 0; step < 5000; ++step) {
    t.set(r.uniform_int(64), r.uniform() * 10.0);
  }
  for (int64_t i = 1; i < t.leaf_base(); ++i) {
    const double kids = t.node(2 * i) + t.node(2 * i + 1);
    REQUIRE(t.node(i) == doctest::Approx(kids).epsilon(1e-6));
  }
  CHECK(t.total() == doctest::Approx(t.rebuild_total()).epsilon(1e-9));
}

TEST_CASE("random instances agree exactly with a linear scan") {
  Rng r(20240601);
  for (int inst = 0; inst < 300; ++inst) {
    const int64_t n = 1 + r.uniform_int(200);
    SumTree t(n);
    std::vector<double> p(static_cast<size_t>(t.capacity()), 0.0);
    const int writes = 1 + static_cast<int>(r.uniform_int(3 * n));
    for (int w = 0; w < writes; ++w) {
      const int64_t leaf = r.uniform_int(n);
      // dyadic values keep every partial sum exact in double
      const double v = static_cast<double>(r.uniform_int(1 << 12)) / 1024.0;
      t.set(leaf, v);
      p[static_cast<size_t>(leaf)] = v;
    }
    if (!(t.total() > 0.0)) continue;
    for (int d = 0; d < 50; ++d) {
      const double u = r.uniform() * t.total();
      REQUIRE(t.prefix_sample(u) == testsupport::linear_prefix_scan(p, u));
    }
  }
}

TEST_CASE("sampling frequencies are proportional to priorities") {
  const int k = 64;
  SumTree t(k);
  Rng r(314159);
  std::vector<double> p(k);
  for (int i = 0; i < k; ++i) {
    p[i] = 0.1 + 2.0 * r.uniform();
    t.set(i, p[i]);
  }
  std::vector<int64_t> counts(k, 0);
  const int draws = 100000;
  for (int d = 0; d < draws; ++d) counts[static_cast<size_t>(t.prefix_sample(r.uniform() * t.total()))]++;
  std::vector<double> probs(k);
  for (int i = 0; i < k; ++i) probs[i] = p[i] / t.total();
  const double stat = testsupport::chi2_statistic(counts, probs);
  const double pval = testsupport::chi2_pvalue(stat, k - 1);
  CHECK(pval > 0.01);
}

TEST_CASE("chi-squared helper matches tabulated critical values") {
  CHECK(testsupport::chi2_pvalue(3.841, 1) == doctest::Approx(0.05).epsilon(0.01));
  CHECK(testsupport::chi2_pvalue(16.919, 9) == doctest::Approx(0.05).epsilon(0.01));
  CHECK(testsupport::chi2_pvalue(0.0, 5) == doctest::Approx(1.0));
}
