"""Lie-point vector fields and their prolongations."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import sympy as sp

from .jetspace import JetContext, JetError, MultiIndex, multi_indices, total_derivative, total_derivative_multi
from .kernel import Expression, normalize


class GeneralizedFieldError(JetError):
    """Field components depend on derivatives; only point symmetries are supported."""


@dataclass(frozen=True)
class VectorField:
    """``xi_i(x, u) d/dx_i + phi_a(x, u) d/du_a`` over a jet context."""

    ctx: JetContext
    xi: tuple[Expression, ...]
    phi: tuple[Expression, ...]
    name: str = "X"

    def __post_init__(self):
        xi = tuple(normalize(c) for c in self.xi)
        phi = tuple(normalize(c) for c in self.phi)
        if len(xi) != self.ctx.p or len(phi) != self.ctx.q:
            raise ValueError(f"field {self.name}: expected {self.ctx.p} xi and {self.ctx.q} phi components")
        for c in xi + phi:
            for s in self.ctx.jets_in(c):
                if self.ctx.decode(s)[1].order > 0:
                    raise GeneralizedFieldError(f"field {self.name}: component {c} depends on derivative {s}")
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "phi", phi)

    @classmethod
    def from_components(cls, ctx: JetContext, name: str = "X", **components) -> "VectorField":
        """Build from keyword components ``xi_<indep>`` / ``phi_<dep>``; missing ones are 0."""
        xi = [0] * ctx.p
        phi = [0] * ctx.q
        for key, val in components.items():
            kind, _, var = key.partition("_")
            if kind == "xi" and var in ctx.independents:
                xi[ctx.independents.index(var)] = val
            elif kind == "phi" and var in ctx.dependents:
                phi[ctx.dependents.index(var)] = val
            else:
                raise ValueError(f"unknown field component {key!r}")
        return cls(ctx, tuple(sp.sympify(c) for c in xi), tuple(sp.sympify(c) for c in phi), name)

    @property
    def projectable(self) -> bool:
        deps = set(self.ctx.u)
        return not any(c.free_symbols & deps for c in self.xi)

    def __call__(self, f) -> Expression:
        """Action on a function of ``(x, u)`` only."""
        f = sp.sympify(f)
        out = sum((c * sp.diff(f, x) for c, x in zip(self.xi, self.ctx.x)), sp.Integer(0))
        out += sum((c * sp.diff(f, u) for c, u in zip(self.phi, self.ctx.u)), sp.Integer(0))
        return normalize(out)

    def scaled(self, a) -> "VectorField":
        return VectorField(self.ctx, tuple(a * c for c in self.xi), tuple(a * c for c in self.phi), self.name)

    def __add__(self, other: "VectorField") -> "VectorField":
        return VectorField(
            self.ctx,
            tuple(a + b for a, b in zip(self.xi, other.xi)),
            tuple(a + b for a, b in zip(self.phi, other.phi)),
            f"{self.name}+{other.name}",
        )

    def describe(self) -> str:
        parts = [f"({c})*d/d{n}" for c, n in zip(self.xi, self.ctx.independents) if c != 0]
        parts += [f"({c})*d/d{n}" for c, n in zip(self.phi, self.ctx.dependents) if c != 0]
        return " + ".join(parts) or "0"


def evolutionary_characteristic(X: VectorField) -> tuple[Expression, ...]:
    """``Q_a = phi_a - xi_i u_{a,i}``; the invariant surface condition is ``Q = 0``."""
    ctx = X.ctx
    return tuple(
        normalize(X.phi[a] - sum(X.xi[i] * ctx.first_order(a, i) for i in range(ctx.p)))
        for a in range(ctx.q)
    )


@dataclass(eq=False)
class ProlongedField:
    """Prolongation coefficients, extended lazily and cached per order."""

    base: VectorField
    coefficients: dict = field(default_factory=dict)
    order: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self):
        if not self.coefficients:
            for a, u in enumerate(self.base.ctx.u):
                self.coefficients[u] = self.base.phi[a]

    @cached_property
    def _dxi(self) -> dict:
        ctx = self.base.ctx
        return {(i, k): total_derivative(self.base.xi[k], i, ctx) for i in range(ctx.p) for k in range(ctx.p)}

    def extend(self, order: int) -> "ProlongedField":
        ctx = self.base.ctx
        with self._lock:
            while self.order < order:
                n = self.order + 1
                for a in range(ctx.q):
                    for J in multi_indices(ctx.p, n):
                        if J.order != n:
                            continue
                        i = next(k for k, c in enumerate(J) if c > 0)
                        parent = J.bump(i, -1)
                        coeff = total_derivative(self.coefficients[ctx.jet(a, parent)], i, ctx)
                        coeff -= sum(self._dxi[i, k] * ctx.jet(a, parent.bump(k)) for k in range(ctx.p))
                        self.coefficients[ctx.jet(a, J)] = normalize(coeff)
                self.order = n
        return self

    def coefficient(self, jet: sp.Symbol) -> Expression:
        dec = self.base.ctx.decode(jet)
        if dec is None:
            raise KeyError(jet)
        if dec[1].order > self.order:
            self.extend(dec[1].order)
        return self.coefficients[jet]

    def __call__(self, e) -> Expression:
        return apply_prolonged(self, e)


def prolong(X: VectorField, order: int) -> ProlongedField:
    """Prolong by the recursion ``phi^{J,i} = D_i phi^J - (D_i xi_k) u_{J+e_k}``."""
    if order < 1:
        raise ValueError("prolongation order must be at least 1")
    return ProlongedField(X).extend(order)


def prolongation_via_characteristic(X: VectorField, jet: sp.Symbol) -> Expression:
    """``phi^J = D_J Q + xi_i u_{J+e_i}``; independent of the recursion in :func:`prolong`."""
    ctx = X.ctx
    a, J = ctx.decode(jet)
    Q = evolutionary_characteristic(X)[a]
    out = total_derivative_multi(Q, J, ctx)
    out += sum(X.xi[i] * ctx.jet(a, J.bump(i)) for i in range(ctx.p))
    return normalize(out)


def apply_prolonged(Xstar: ProlongedField, e) -> Expression:
    """``X* e = xi_i de/dx_i + sum over jets of coefficient * de/d(jet)``."""
    ctx = Xstar.base.ctx
    e = normalize(e)
    order = ctx.order_of(e)
    if order > Xstar.order:
        Xstar.extend(order)
    out = sum((c * sp.diff(e, x) for c, x in zip(Xstar.base.xi, ctx.x)), sp.Integer(0))
    for sym in ctx.jets_in(e):
        out += Xstar.coefficient(sym) * sp.diff(e, sym)
    return normalize(out)
