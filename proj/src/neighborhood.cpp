#include "lasi/neighborhood.hpp"

#include <algorithm>
#include <cassert>

namespace lasi {

NeighborOffsets build_offsets(int n) {
  assert(n >= 1);
  NeighborOffsets out;
  // Offsets at L1 norm m number 2m, so radius R covers R(R+1) candidates.
  int radius = 1;
  while (radius * (radius + 1) < n) ++radius;

  for (int dr = -radius; dr <= 0; ++dr) {
    int budget = radius - std::abs(dr);
    for (int dc = -budget; dc <= budget; ++dc) {
      bool causal = dr < 0 || (dr == 0 && dc < 0);
      if (causal) out.offsets.emplace_back(dr, dc);
    }
  }
  std::sort(out.offsets.begin(), out.offsets.end(), [](Coord a, Coord b) {
    int na = std::abs(a.first) + std::abs(a.second);
    int nb = std::abs(b.first) + std::abs(b.second);
    if (na != nb) return na < nb;
    return a < b;  // raster order of the absolute position
  });
  out.offsets.resize(n);
  return out;
}

void gather_neighborhood(std::span<const double> plane, int height, int width,
                         int row, int col, const NeighborOffsets& offsets,
                         double pad, std::span<double> out) {
  assert(out.size() == offsets.offsets.size());
  for (std::size_t j = 0; j < offsets.offsets.size(); ++j) {
    int r = row + offsets.offsets[j].first;
    int c = col + offsets.offsets[j].second;
    bool in = r >= 0 && r < height && c >= 0 && c < width;
    out[j] = in ? plane[static_cast<std::size_t>(r) * width + c] : pad;
  }
}

}  // namespace lasi
