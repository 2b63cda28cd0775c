"""
Exact convergence of the decreasing-step OU chain
=================================================

For the Ornstein-Uhlenbeck drift b(x) = -x with sigma = sqrt(2), the Euler
chain with steps eta_k = theta/k stays Gaussian, so its law can be propagated
exactly. Here we print W_2 to the stationary N(0, 1) at powers of two and fit
the log-log slope; it comes out at -1.
"""

import math

from dsula import StepSchedule, fit_rate, ou_em_laws, ou_stationary, w2_gaussian

sched = StepSchedule.polynomial(2.0)
ns = [2 ** k for k in range(6, 17)]
laws = ou_em_laws(1.0, math.sqrt(2.0), sched, 1.0, ns)
target = ou_stationary(1.0, math.sqrt(2.0))

print(f"{'n':>7} {'mean':>12} {'var':>12} {'W2':>12}")
dist = []
for n, g in zip(ns, laws):
    d = w2_gaussian(g, target)
    dist.append(d)
    print(f"{n:>7} {g.mean[0]:12.4e} {g.cov[0]:12.8f} {d:12.4e}")

fit = fit_rate(ns, dist)
print(f"\nslope {fit.slope:.4f}, r^2 {fit.r_squared:.6f}")

# a larger theta only changes the constant, not the exponent
for theta in (1.0, 1.5, 2.0):
    laws = ou_em_laws(1.0, math.sqrt(2.0), StepSchedule.polynomial(theta), 1.0, ns)
    print(f"theta={theta}: slope {fit_rate(ns, [w2_gaussian(g, target) for g in laws]).slope:.4f}")
