"""Smoothed dynamics against the classical flow.

At theta = 0 both oscillator frequencies equal omega and the evolved,
smoothed Gaussian follows F(A_{-t} r) with an error that shrinks with hbar.
For theta > 0 the two modes split into omega_plus and omega_minus.
"""

import math

import numpy as np

from ncphase import PhysParams, SepGaussFunction, derive
from ncphase.dynamics import evolution_matrix, recover_period, smooth_evolved

F = SepGaussFunction.gaussian(centers=(0.5, -0.3, 0.2, 0.4))
r = np.array([0.4, -0.2, 0.6, 0.1])

for hbar in (1e-2, 1e-4, 1e-6):
    p = PhysParams(hbar=hbar, theta=0.0)
    ts = np.linspace(0, 2 * math.pi, 33)
    err = max(abs(smooth_evolved(F, r, t, p).value - float(F(evolution_matrix(-t, p).matrix @ r)))
              for t in ts)
    print(f"hbar={hbar:7.0e}  max |smoothed - classical| over one period: {err:.2e}")

print()
for theta in (0.0, 0.1, 1.0):
    p = PhysParams(hbar=1.0, theta=theta)
    d = derive(p)
    print(f"theta={theta:4.1f}  omega+={d.omega_plus:.6f}  omega-={d.omega_minus:.6f}  "
          f"first return of A_t: {recover_period(p):.6f}")
