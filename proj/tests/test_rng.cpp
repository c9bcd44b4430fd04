#include <doctest.h>

#include <cmath>
#include <set>

#include "evorace/rng.hpp"

using evorace::RngStream;
using evorace::StreamPurpose;

TEST_CASE("streams are deterministic in their key") {
  auto a = RngStream::derive(42, 7, StreamPurpose::kEval, 3);
  auto b = RngStream::derive(42, 7, StreamPurpose::kEval, 3);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("distinct keys give distinct streams") {
  std::set<std::uint64_t> firsts;
  for (std::uint64_t g = 0; g < 50; ++g)
    for (std::uint64_t i = 0; i < 20; ++i)
      firsts.insert(
          RngStream::derive(1, g, StreamPurpose::kOffspring, i).next_u64());
  CHECK(firsts.size() == 50 * 20);
}

TEST_CASE("next_unit stays in [0,1) and looks uniform") {
  RngStream rng(123);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.next_unit();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(std::abs(sum / n - 0.5) < 0.01);
}

TEST_CASE("below(n) covers the whole range without bias") {
  RngStream rng(99);
  int counts[3] = {0, 0, 0};
  for (int i = 0; i < 30000; ++i) counts[rng.below(3)]++;
  for (int c : counts) CHECK(std::abs(c - 10000) < 500);
}

TEST_CASE("normal() has unit variance and zero mean") {
  RngStream rng(7);
  double sum = 0.0, sum_sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sum_sq += x * x;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.02);
}
