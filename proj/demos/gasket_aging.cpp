// Annealed aging and sub-aging values on gasket levels 1..4 with traps coupled
// through one Poisson random measure per replica.
#include <cstdio>

#include "trapnet/experiments.hpp"

int main() {
  trapnet::ExperimentConfig c;
  c.ensemble.kind = trapnet::EnsembleKind::Sierpinski;
  c.ensemble.sizes = {1, 2, 3, 4};
  c.alpha = 0.5;
  c.s_grid = {1.0};
  c.t_grid = {1.0, 2.0};
  c.replicas = 200;
  c.seed = 11;
  c.bootstrap = 200;
  const auto [phi, psi] = trapnet::run_two_point_experiments(c);
  std::printf("%-4s %-4s %-4s %-12s %-12s\n", "n", "s", "t", "E[phi]", "E[psi]");
  const auto pm = phi.select("phi_mean");
  const auto qm = psi.select("psi_mean");
  for (std::size_t k = 0; k < pm.size(); ++k)
    std::printf("%-4d %-4g %-4g %-12.6f %-12.6f\n", pm[k]->n, pm[k]->s, pm[k]->t, pm[k]->value, qm[k]->value);
  const auto st = trapnet::stabilization(phi, "phi", 1.0, 2.0);
  std::printf("successive differences of E[phi(1,2)]:");
  for (double d : st.differences) std::printf(" %.4f", d);
  std::printf("\n");
}
