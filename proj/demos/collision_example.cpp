// Two unit atoms merging: nu_n = delta_0 + delta_{1/n} converges vaguely to
// 2 delta_0, while the point-process part keeps the two atoms apart.
#include <cstdio>

#include "trapnet/measure_metrics.hpp"

int main() {
  using namespace trapnet;
  for (int n : {1, 2, 5, 10, 50, 100}) {
    const auto S = line_space({0.0, 1.0 / n});
    DiscreteMeasure nu(S), lim(S);
    nu.add(0, 1.0);
    nu.add(1, 1.0);
    lim.add(0, 2.0);
    std::printf("n=%-4d vague=%.6f d_dis=%.6f\n", n, vague_distance(nu, lim), dis_measure_distance(nu, lim));
  }
}
