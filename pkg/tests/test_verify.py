import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from condsym.classify import PARTIAL_CERTIFIED, WEAK_CS, WEAK_CS_CERTIFIED, PdeProblem, classify, partial_report
from condsym.jetspace import MultiIndex
from condsym.verify import (
    ExplicitSolution,
    WitnessError,
    certify,
    jet_evaluate,
    numeric_residual,
    substitute_solution,
    verify_invariance_of_solution,
    verify_solution,
)

from .strategies import CTX, LOW_JETS, T, X, jet_polynomials


def sol(ctx, expr, *params):
    return ExplicitSolution.of(ctx, expr, parameters=params)


def test_jet_evaluate(ctx2, xt, params):
    x, t = xt
    c = params[0]
    assert jet_evaluate(sol(ctx2, 1 / t - x**2 / t**2), MultiIndex((2, 0))) == -2 / t**2
    assert jet_evaluate(sol(ctx2, c * sp.exp(x), c), MultiIndex((0, 1))) == 0
    assert jet_evaluate(sol(ctx2, x / t), MultiIndex((0, 1))) == -x / t**2


def test_heat_solution(load, xt):
    doc = load("heat")
    assert verify_solution(doc.problem(), sol(doc.ctx, doc.ctx.x[0]))
    assert not verify_solution(doc.problem(), sol(doc.ctx, doc.ctx.x[0] ** 2))


def test_undeclared_symbols_rejected(ctx2):
    with pytest.raises(WitnessError):
        sol(ctx2, sp.Symbol("c") * ctx2.x[0])


def test_invariance_of_solutions(load):
    doc = load("shifted_utt")
    x, t = doc.ctx.x
    c, c1 = sp.symbols("c c1")
    X = doc.field("Ft")
    assert verify_invariance_of_solution(X, sol(doc.ctx, c * sp.exp(x), c))
    assert not verify_invariance_of_solution(X, sol(doc.ctx, c * sp.exp(x) + c1 * sp.exp(x + t), c, c1))


def test_certify_requires_candidate(load):
    doc = load("heat")
    r = classify(doc.field("Fh"), doc.problem())
    with pytest.raises(ValueError):
        certify(r, [])


def test_failed_certification_keeps_candidate(load):
    doc = load("shifted")
    x, t = doc.ctx.x
    r = certify(classify(doc.field("Ft"), doc.problem()), [sol(doc.ctx, sp.exp(x + t))])
    assert r.verdict == WEAK_CS
    assert r.witnesses and not r.witnesses[0].passed
    assert any("fails" in n for n in r.notes)


def test_certified_weak_witness_is_invariant(load):
    doc = load("kdv")
    X = doc.field("scaling")
    w = doc.solution("invariant")
    r = certify(classify(X, doc.problem()), [w])
    assert r.verdict == WEAK_CS_CERTIFIED
    assert verify_invariance_of_solution(X, w)


def test_kdv_family_is_not_invariant_but_partial(load):
    doc = load("kdv")
    X = doc.field("scaling")
    fam = doc.solution("family")
    assert not verify_invariance_of_solution(X, fam)
    assert certify(partial_report(X, doc.problem()), [fam]).verdict == PARTIAL_CERTIFIED


solutions = st.builds(
    lambda a, b, k: a * X**2 + b * X * T + k * sp.exp(X),
    st.integers(-3, 3),
    st.integers(-3, 3),
    st.integers(-3, 3),
)


@settings(max_examples=100, deadline=None)
@given(jet_polynomials(symbols=[X, T] + LOW_JETS, max_terms=3), solutions)
def test_symbolic_and_numeric_residuals_agree(R, f):
    # R - R|_{u=f} vanishes on f by construction
    w = ExplicitSolution.of(CTX, f)
    eq = R - substitute_solution(R, w)
    if not CTX.jets_in(eq):
        return
    P = PdeProblem(CTX, (eq,))
    assert verify_solution(P, w)
    assert numeric_residual(P.equations, w, points=20) < 1e-9
    shifted = ExplicitSolution.of(CTX, f + X**3 * T)
    if not verify_solution(P, shifted):
        assert numeric_residual(P.equations, shifted, points=20) > 1e-9
