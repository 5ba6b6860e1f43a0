// Effective resistances on small networks, the gasket, and a fused network.
#include <cmath>
#include <cstdio>

#include "trapnet/ensembles.hpp"
#include "trapnet/network.hpp"

int main() {
  using namespace trapnet;
  ElectricalNetwork series({1, 2, 3}, {{1, 2, 2.0}, {2, 3, 4.0}}, 1);
  ElectricalNetwork triangle({1, 2, 3}, {{1, 2, 1.0}, {2, 3, 1.0}, {1, 3, 1.0}}, 1);
  std::printf("series 1/2 + 1/4:      %.12f\n", effective_resistance(series, 1, 3));
  std::printf("unit triangle edge:    %.12f\n", effective_resistance(triangle, 1, 2));
  for (int n = 0; n <= 5; ++n) {
    const auto g = sierpinski(n);
    const double r = effective_resistance(g.network, gasket_vertex_id(n, 0, 0), gasket_vertex_id(n, 1 << n, 0));
    std::printf("gasket n=%d |V|=%-4zu corner resistance %.10f (2/3)(5/3)^n = %.10f\n", n, g.network.size(), r,
                2.0 / 3.0 * std::pow(5.0 / 3.0, n));
  }
  // Fusing the two ends of the first series edge short-circuits it.
  const auto fused = fuse(series, {{1, 2}});
  std::printf("series with 1~2 fused: %.12f\n", effective_resistance(fused.network, 1, 3));
}
