#pragma once

#include <cstdlib>
#include <span>
#include <utility>
#include <vector>

namespace lasi {

using Coord = std::pair<int, int>;  // (row, col)

inline int manhattan(Coord a, Coord b) {
  return std::abs(a.first - b.first) + std::abs(a.second - b.second);
}

// Causal neighborhood shape: spatial offsets (drow, dcol) pointing at the N
// strictly-previous pixels closest in L1 distance. Ordered by ascending L1
// norm; ties broken by raster order of the absolute position, i.e. by
// ascending (drow, dcol).
struct NeighborOffsets {
  std::vector<Coord> offsets;

  int size() const { return static_cast<int>(offsets.size()); }
};

NeighborOffsets build_offsets(int n);

// Reads plane values at site+offset for every offset; out-of-bounds
// positions yield `pad`. `plane` is H*W row-major.
void gather_neighborhood(std::span<const double> plane, int height, int width,
                         int row, int col, const NeighborOffsets& offsets,
                         double pad, std::span<double> out);

}  // namespace lasi
