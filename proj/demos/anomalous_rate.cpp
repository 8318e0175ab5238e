// Walks the supp4 construction toward phi -> 0 and prints how the postselected
// information, success probability and cost rate move.

#include <cmath>
#include <cstdio>

#include "psmet/psmet.hpp"

int main() {
  psmet::ProtocolConfig cfg;
  cfg.eigenvalues = {-1.0, -1.0, 3.0, 3.0};
  const double delta_a2 = 16.0;

  psmet::CostModel costs;
  costs.c_prepare = 0.01;
  costs.c_postselect = 0.01;
  costs.c_measure = 1.0;
  const double r_max = psmet::rate(delta_a2, costs);

  std::printf("%-10s %-14s %-14s %-14s %-12s\n", "phi", "p_ps", "I_ps", "p*I", "R_ps/R_max");
  for (double phi : {0.5, 0.1, 0.03, 1e-2, 3e-3, 1e-3}) {
    cfg.phi = phi;
    const auto inst = psmet::supp4_construct(cfg);
    const double qfi = psmet::postselected_qfi(inst.psi0, inst.A, inst.ps, 0.0).value;
    const double p = psmet::apply_postselection(inst.psi0, inst.ps).p_ps();
    const double r = psmet::ps_rate(qfi, p, costs);
    std::printf("%-10.3g %-14.6g %-14.6g %-14.8g %-12.4g\n", phi, p, qfi, p * qfi, r / r_max);
  }
  return 0;
}
