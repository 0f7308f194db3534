"""Witness solutions: substitution into equations, invariance, certification."""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from typing import Sequence

import sympy as sp

from .classify import (
    PARTIAL,
    PARTIAL_CERTIFIED,
    WEAK_CS,
    WEAK_CS_CERTIFIED,
    ClassificationReport,
    PdeProblem,
)
from .jetspace import JetContext, JetError, MultiIndex
from .kernel import Expression, KernelError, MalformedExpression, evaluate_at, is_zero, normalize
from .liefield import VectorField, evolutionary_characteristic


class WitnessError(JetError):
    pass


@dataclass(frozen=True)
class ExplicitSolution:
    """Closed-form ``u_a = f_a(x; c)`` with symbolic parameters ``c``."""

    ctx: JetContext
    values: tuple[Expression, ...]
    parameters: tuple[sp.Symbol, ...] = ()
    name: str = ""

    def __post_init__(self):
        values = tuple(sp.sympify(v) for v in self.values)
        if len(values) != self.ctx.q:
            raise WitnessError(f"solution {self.name!r}: expected {self.ctx.q} components")
        allowed = set(self.ctx.x) | set(self.parameters)
        for v in values:
            extra = v.free_symbols - allowed
            if extra:
                names = ", ".join(sorted(s.name for s in extra))
                raise WitnessError(f"solution {self.name!r} uses undeclared symbols: {names}")
        object.__setattr__(self, "values", values)

    @classmethod
    def of(cls, ctx: JetContext, *values, parameters: Sequence = (), name: str = "") -> "ExplicitSolution":
        params = tuple(sp.Symbol(p) if isinstance(p, str) else p for p in parameters)
        return cls(ctx, tuple(values), params, name)

    def describe(self) -> str:
        return "; ".join(f"{d} = {v}" for d, v in zip(self.ctx.dependents, self.values))


def jet_evaluate(f: ExplicitSolution, J: MultiIndex | Sequence[int], alpha: int = 0) -> Expression:
    """``D_J f_alpha`` by explicit differentiation."""
    e = f.values[alpha]
    for x, n in zip(f.ctx.x, J):
        if n:
            e = sp.diff(e, x, n)
    return normalize(e)


def substitute_solution(e, f: ExplicitSolution) -> Expression:
    """Replace every jet symbol of ``e`` by the matching derivative of ``f``."""
    e = sp.sympify(e)
    sub = {}
    for sym in e.free_symbols:
        dec = f.ctx.decode(sym)
        if dec is not None:
            sub[sym] = jet_evaluate(f, dec[1], dec[0])
    return normalize(e.xreplace(sub))


@dataclass(frozen=True)
class WitnessCheck:
    """Outcome of one witness against one system of equations."""

    witness: str
    system: str
    passed: bool
    residuals: tuple[Expression, ...]
    note: str = ""


def _residuals(equations, f: ExplicitSolution) -> tuple[tuple[Expression, ...], str]:
    out, note = [], ""
    for eq in equations:
        try:
            out.append(substitute_solution(eq, f))
        except MalformedExpression as exc:
            # a pole on a full-dimensional set: the witness is not defined there
            note = f"domain restriction: {exc}"
            out.append(sp.nan)
    return tuple(out), note


def check_system(equations, f: ExplicitSolution, system: str = "") -> WitnessCheck:
    residuals, note = _residuals(equations, f)
    passed = not note and all(is_zero(r) for r in residuals)
    return WitnessCheck(f.name or f.describe(), system, passed, residuals, note)


def verify_solution(P: PdeProblem, f: ExplicitSolution) -> bool:
    """True iff every equation vanishes identically (parameters stay symbolic)."""
    _require_same_context(P.ctx, f)
    return check_system(P.equations, f, P.name).passed


def invariance_residuals(X: VectorField, f: ExplicitSolution) -> tuple[Expression, ...]:
    return tuple(substitute_solution(q, f) for q in evolutionary_characteristic(X))


def verify_invariance_of_solution(X: VectorField, f: ExplicitSolution) -> bool:
    """True iff ``X_Q u = phi(x, f) - xi_i d_i f`` vanishes identically."""
    return all(is_zero(r) for r in invariance_residuals(X, f))


def numeric_residual(equations, f: ExplicitSolution, points: int = 20, seed: int = 0) -> float:
    """Largest absolute residual over random points, parameters sampled too."""
    residuals = [sp.sympify(r) for r in _residuals(equations, f)[0]]
    symbols = sorted(set().union(*(r.free_symbols for r in residuals)), key=lambda s: s.name)
    rng = random.Random(seed)
    worst, done, tries = 0.0, 0, 0
    while done < points:
        tries += 1
        if tries > 50 * points:
            raise KernelError("could not sample regular points")
        point = {s: sp.Rational(rng.randint(-60, 60), rng.randint(1, 13)) for s in symbols}
        vals = [evaluate_at(r, point) for r in residuals]
        if any(v is None for v in vals):
            continue
        done += 1
        worst = max([worst] + [float(abs(v)) for v in vals])
    return worst


def _require_same_context(ctx: JetContext, f: ExplicitSolution) -> None:
    if ctx.independents != f.ctx.independents or ctx.dependents != f.ctx.dependents:
        raise WitnessError("solution and problem declare different variables")


def certify(report: ClassificationReport, witnesses: Sequence[ExplicitSolution]) -> ClassificationReport:
    """Upgrade a candidate verdict when some witness solves the generating system.

    Weak CS: the chain equations together with ``X_Q u = 0``. Partial symmetry:
    the chain equations alone. Without a passing witness the candidate verdict
    is kept and the failures are recorded.
    """
    if report.verdict not in (WEAK_CS, PARTIAL):
        raise ValueError(f"cannot certify a {report.verdict!r} report")
    system = list(report.chain.system())
    label = "chain"
    if report.verdict == WEAK_CS:
        system += list(evolutionary_characteristic(report.field))
        label = "chain+invariant-surface"
    checks = []
    for f in witnesses:
        _require_same_context(report.problem.ctx, f)
        checks.append(check_system(system, f, label))
    passed = any(c.passed for c in checks)
    notes = list(report.notes)
    for c in checks:
        if not c.passed:
            detail = c.note or "nonzero residual " + ", ".join(str(r) for r in c.residuals if r != 0)
            notes.append(f"witness {c.witness} fails: {detail}")
    verdict = report.verdict
    if passed:
        verdict = WEAK_CS_CERTIFIED if verdict == WEAK_CS else PARTIAL_CERTIFIED
    return replace(report, verdict=verdict, witnesses=report.witnesses + tuple(checks), notes=tuple(notes))
