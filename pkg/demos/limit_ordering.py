"""Which limit is taken first changes the classical answer.

F = (exp(-x1^2) + 1)(exp(-x2^2) + 1) exp(-y1^2) exp(-y2^2) is smoothed at r = 0.
Sending theta to zero first leaves an ordinary quantum smearing that dies
with hbar, so the value tends to F(0) = 4. Sending hbar to zero first spreads
the positions over the whole line and only the offsets of the x-factors
survive, giving 1.
"""

import numpy as np

from ncphase import PhysParams, smooth_closed_form, smooth_hbar0, smooth_theta0
from ncphase.cli import demo_function

F = demo_function()
r = np.zeros(4)

print(f"{'s':>8}  {'theta-first':>12}  {'hbar-first':>12}  {'hbar=theta=s':>12}")
for s in np.logspace(-1, -5, 5):
    theta_first = smooth_theta0(F, r, s).value
    hbar_first = smooth_hbar0(F, r, s)
    diagonal = smooth_closed_form(F, r, PhysParams(hbar=s, theta=s))
    print(f"{s:8.0e}  {theta_first:12.6f}  {hbar_first:12.6f}  {diagonal:12.6f}")

print("\nF(0) =", float(F(r)))
