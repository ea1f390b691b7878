"""Shared hypothesis strategies."""

import numpy as np
from hypothesis import strategies as st

from ncphase import GaussFactor, PhysParams, SepGaussFunction


def log_uniform(lo, hi):
    return st.floats(np.log10(lo), np.log10(hi)).map(lambda e: float(10.0**e))


@st.composite
def phys_params(draw, hbar=(1e-3, 1e3), theta=(1e-3, 1e3), mass=(1e-2, 1e2), omega=(1e-2, 1e2)):
    return PhysParams(
        hbar=draw(log_uniform(*hbar)),
        theta=draw(log_uniform(*theta)),
        mass=draw(log_uniform(*mass)),
        omega=draw(log_uniform(*omega)),
    )


@st.composite
def gauss_factors(draw, nonnegative=True, width=(0.5, 3.0)):
    amp = draw(st.floats(0.0, 2.0) if nonnegative else st.floats(-1.0, 2.0))
    offset = draw(st.floats(0.0, 2.0))
    if not nonnegative:
        # keep the factor non-negative only when asked
        offset = max(offset, 0.0)
    return GaussFactor(amp, draw(st.floats(-1.5, 1.5)), draw(st.floats(*width)), offset)


@st.composite
def sep_functions(draw, nonnegative=True, width=(0.5, 3.0)):
    return SepGaussFunction(factors=tuple(draw(gauss_factors(nonnegative, width)) for _ in range(4)))


points = st.lists(st.floats(-2.0, 2.0), min_size=4, max_size=4).map(np.array)
