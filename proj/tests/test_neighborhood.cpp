#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lasi/neighborhood.hpp"
#include "test_util.hpp"

using lasi::build_offsets;
using lasi::Coord;
using lasi::manhattan;

TEST_CASE("N=2 matches the enumeration oracle") {
  auto oracle = testutil::offsets_by_enumeration(5, 5, 3, 3, 2);
  REQUIRE(oracle.size() == 2);
  // Oracle resolves the norm-1 tie by raster order of the absolute position:
  // (2,3) precedes (3,2).
  CHECK(oracle == std::vector<Coord>{{-1, 0}, {0, -1}});
  CHECK(build_offsets(2).offsets == oracle);
}

TEST_CASE("build_offsets matches the oracle at an interior site") {
  for (int n : {1, 3, 5, 8, 12, 16, 25}) {
    auto got = build_offsets(n);
    auto oracle = testutil::offsets_by_enumeration(41, 41, 20, 20, n);
    CHECK(got.offsets == oracle);
  }
}

TEST_CASE("N=8 neighborhood of the 18th pixel on a 5x5 grid") {
  // x18 sits at (3,2); all 8 offsets resolve to in-bounds previous pixels.
  auto oracle = testutil::offsets_by_enumeration(5, 5, 3, 2, 8);
  CHECK(build_offsets(8).offsets == oracle);
  for (Coord off : oracle) {
    int r = 3 + off.first, c = 2 + off.second;
    CHECK(r >= 0);
    CHECK(c >= 0);
    CHECK(r < 5);
    CHECK(c < 5);
    CHECK(static_cast<long>(r) * 5 + c < 17);  // strictly previous
  }
}

TEST_CASE("offset invariants") {
  for (int n : {1, 2, 7, 13, 30}) {
    auto offs = build_offsets(n).offsets;
    REQUIRE(static_cast<int>(offs.size()) == n);
    for (std::size_t i = 0; i < offs.size(); ++i) {
      auto [dr, dc] = offs[i];
      CHECK((dr < 0 || (dr == 0 && dc < 0)));  // strictly causal
      for (std::size_t j = i + 1; j < offs.size(); ++j) CHECK(offs[i] != offs[j]);
    }
    for (std::size_t i = 1; i < offs.size(); ++i) {
      int prev = std::abs(offs[i - 1].first) + std::abs(offs[i - 1].second);
      int cur = std::abs(offs[i].first) + std::abs(offs[i].second);
      CHECK(prev <= cur);
    }
  }
}

TEST_CASE("offsets are nested prefixes") {
  auto big = build_offsets(24).offsets;
  for (int n = 1; n < 24; ++n) {
    auto small = build_offsets(n).offsets;
    CHECK(std::equal(small.begin(), small.end(), big.begin()));
  }
}

TEST_CASE("manhattan distances from the grid example") {
  CHECK(manhattan({3, 2}, {0, 2}) == 3);
  CHECK(manhattan({0, 0}, {3, 2}) == 5);  // x1 to x18 on the 5x5 grid
  CHECK(manhattan({2, 1}, {3, 2}) == 2);  // x12 to x18
  CHECK(manhattan({4, 4}, {4, 4}) == 0);
}

TEST_CASE("manhattan is a metric on a 6x6 grid") {
  std::vector<Coord> pts;
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 6; ++c) pts.emplace_back(r, c);
  for (Coord a : pts)
    for (Coord b : pts) {
      CHECK(manhattan(a, b) == manhattan(b, a));
      CHECK((manhattan(a, b) == 0) == (a == b));
      for (Coord c : pts) CHECK(manhattan(a, c) <= manhattan(a, b) + manhattan(b, c));
    }
}

TEST_CASE("gather_neighborhood") {
  auto offs = build_offsets(2);

  SUBCASE("fully out of bounds pads") {
    std::vector<double> plane(9, 0.7);
    std::vector<double> out(2);
    lasi::gather_neighborhood(plane, 3, 3, 0, 0, offs, 0.25, out);
    CHECK(out == std::vector<double>{0.25, 0.25});
  }
  SUBCASE("constant plane with matching pad") {
    std::vector<double> plane(9, 0.5);
    auto offs8 = build_offsets(8);
    std::vector<double> out(8);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) {
        lasi::gather_neighborhood(plane, 3, 3, r, c, offs8, 0.5, out);
        for (double v : out) CHECK(v == 0.5);
      }
  }
  SUBCASE("distinct values at (2,2)") {
    std::vector<double> plane(9);
    for (int i = 0; i < 9; ++i) plane[i] = i / 10.0;
    std::vector<double> out(2);
    lasi::gather_neighborhood(plane, 3, 3, 2, 2, offs, 0.0, out);
    // offsets are [(-1,0), (0,-1)] -> values at (1,2) then (2,1)
    CHECK(out == std::vector<double>{0.5, 0.7});
  }
}

TEST_CASE("no padding leakage at interior sites") {
  std::mt19937_64 rng(99);
  auto offs = build_offsets(6);
  std::uniform_int_distribution<int> pos(3, 8);
  for (int trial = 0; trial < 50; ++trial) {
    auto plane = testutil::random_plane(rng, 12, 12);
    int r = pos(rng), c = pos(rng);
    std::vector<double> out(6);
    lasi::gather_neighborhood(plane, 12, 12, r, c, offs, -1.0, out);
    for (std::size_t j = 0; j < out.size(); ++j) {
      auto [dr, dc] = offs.offsets[j];
      CHECK(out[j] == plane[static_cast<std::size_t>(r + dr) * 12 + (c + dc)]);
    }
  }
}
