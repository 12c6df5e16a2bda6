#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "mlmeval/rng.h"

using namespace mlmeval;

TEST_SUITE("rng") {

TEST_CASE("Mix64 matches the published SplitMix64 stream") {
  // First two outputs of SplitMix64 started from state 0.
  CHECK(Mix64(0) == 0xE220A8397B1DCDAFULL);
  CHECK(Mix64(0x9E3779B97F4A7C15ULL) == 0x6E789E6AA1B965F4ULL);
}

TEST_CASE("DeriveSeed depends only on its arguments") {
  CHECK(DeriveSeed(1, 0) == DeriveSeed(1, 0));
  std::set<std::uint64_t> seen;
  for (std::uint64_t run = 0; run < 4; ++run) {
    for (std::uint64_t i = 0; i < 256; ++i) seen.insert(DeriveSeed(run, i));
  }
  CHECK(seen.size() == 4 * 256);
}

TEST_CASE("UniformIndex stays in range and covers it") {
  Rng rng(3);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 7000; ++i) {
    std::size_t x = rng.UniformIndex(7);
    REQUIRE(x < 7);
    ++hits[x];
  }
  for (int h : hits) CHECK(h > 800);
  CHECK(rng.UniformIndex(1) == 0);
}

TEST_CASE("UniformDouble is in [0, 1)") {
  Rng rng(11);
  double lo = 1.0, hi = 0.0, sum = 0.0;
  for (int i = 0; i < 10000; ++i) {
    double u = rng.UniformDouble();
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    sum += u;
  }
  CHECK(lo >= 0.0);
  CHECK(hi < 1.0);
  CHECK(sum / 10000 == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("SampleIndices draws distinct indices and clamps the count") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const std::size_t n = 1 + seed % 13;
    const std::size_t count = seed % 17;
    std::vector<std::size_t> s = rng.SampleIndices(n, count);
    CHECK(s.size() == std::min(n, count));
    std::set<std::size_t> distinct(s.begin(), s.end());
    CHECK(distinct.size() == s.size());
    for (std::size_t x : s) CHECK(x < n);
  }
}

TEST_CASE("Shuffle permutes and is reproducible") {
  std::vector<int> a(40), b;
  std::iota(a.begin(), a.end(), 0);
  b = a;
  Rng r1(5), r2(5);
  r1.Shuffle(a);
  r2.Shuffle(b);
  CHECK(a == b);
  std::vector<int> sorted = a;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 40; ++i) CHECK(sorted[i] == i);
}

}
