"""Checking the closed-form kernel against a truncated Fock-space model.

The Hilbert-Schmidt space is modelled as two bosonic modes cut at n_max.
Coherent-state overlaps computed there are compared with both candidate
Gaussian kernels; only one of them fits.
"""

from ncphase.oracle import ORACLE_REFERENCE, FockOracle, minimal_n_max

p = ORACLE_REFERENCE
print("parameters:", p)
print("smallest n_max passing the ground-state tail test:", minimal_n_max(p))

oracle = FockOracle(p, n_max=12)
for check in oracle.run_checks(seed=0, n_pairs=40):
    status = "ok " if check.passed else "BAD"
    print(f"  {status} {check.name:<20} residual {check.residual:.2e}  (tol {check.tolerance:.0e})")

fit = oracle.kernel_fit(n_pairs=40)
print("\nkernel variant selected:", fit.selected)
for v in ("A", "B"):
    print(f"  variant {v}: max relative error {fit.max_rel_error(v):.2e}")
