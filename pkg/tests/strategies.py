"""Random expressions over a two-variable jet space."""

import sympy as sp
from hypothesis import strategies as st

from condsym import JetContext

CTX = JetContext(("x", "t"), ("u",), 5)
X, T = CTX.x
U = CTX.u[0]
LOW_JETS = [U] + [CTX.parse_jet(n) for n in ("u_x", "u_t", "u_xx", "u_xt")]
BASE = [X, T] + LOW_JETS

small_ints = st.integers(min_value=-4, max_value=4)


@st.composite
def monomials(draw, symbols=BASE, max_factors=3):
    factors = draw(st.lists(st.sampled_from(symbols), min_size=0, max_size=max_factors))
    return draw(small_ints.filter(bool)) * sp.Mul(*factors)


@st.composite
def jet_polynomials(draw, symbols=BASE, max_terms=4):
    return sp.Add(*draw(st.lists(monomials(symbols), min_size=1, max_size=max_terms)))


@st.composite
def point_functions(draw):
    """Functions of (x, t, u) only, as allowed in field components."""
    return draw(jet_polynomials(symbols=[X, T, U], max_terms=3))
