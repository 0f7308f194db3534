"""Symmetry-adapted coordinates, PDE transformation and reduction.

For a projectable field ``X`` the adapted coordinates ``(s, z, v)`` satisfy
``X s = 1``, ``X z_k = 0`` and ``X v = 0``, so that ``X`` becomes ``d/ds``.
Adapted independents keep the name of an original variable when the map is
that variable itself (``s = t`` is called ``t``); otherwise they are ``s`` and
``z`` (``z1``, ``z2``, ... for several). Adapted dependents are ``v``/``v1``...
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, replace
from typing import Sequence

import sympy as sp

from .classify import PdeProblem
from .jetspace import JetContext, JetError, MultiIndex, total_derivative
from .kernel import (
    Collection,
    Expression,
    collect_on_basis,
    evaluate_at,
    is_zero,
    normalize,
    split_dependence,
)
from .liefield import VectorField

log = logging.getLogger(__name__)


class CanonicalError(JetError):
    pass


class NotDerivable(CanonicalError):
    """The field is outside the classes handled by the characteristic solver."""


class InvalidCoordinates(CanonicalError):
    def __init__(self, message: str, residual=None):
        super().__init__(message)
        self.residual = residual


def _fresh(preferred: str, taken: set) -> str:
    if preferred not in taken:
        return preferred
    k = 1
    while f"{preferred}{k}" in taken:
        k += 1
    return f"{preferred}{k}"


def adapted_names(ctx: JetContext, s_map, z_maps: Sequence) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Names for the adapted independents and dependents."""
    taken = set(ctx.dependents)
    names = []
    maps = [s_map, *z_maps]
    for k, m in enumerate(maps):
        m = sp.sympify(m)
        if isinstance(m, sp.Symbol) and m in ctx.x and m.name not in names:
            names.append(m.name)
            continue
        if k == 0:
            base = "s"
        else:
            base = "z" if len(z_maps) == 1 else f"z{k}"
        names.append(_fresh(base, taken | set(names) | set(ctx.independents)))
    taken |= set(names)
    if ctx.q == 1:
        deps = (_fresh("v", taken | set(ctx.independents)),)
    else:
        deps = tuple(_fresh(f"v{a + 1}", taken | set(ctx.independents)) for a in range(ctx.q))
    # an adapted name must not reuse an original name for a different quantity
    for n, m in zip(names, maps):
        if n in ctx.independents and sp.sympify(m) != sp.Symbol(n):
            raise CanonicalError(f"adapted variable {n!r} would shadow an original variable")
    return tuple(names), deps


@dataclass(frozen=True)
class CoordinateChange:
    """Forward maps ``s(x), z_k(x), v_a(x, u)`` and inverse maps ``x_i(s, z), u_a(s, z, v)``."""

    original: JetContext
    adapted: JetContext
    forward_independent: tuple[Expression, ...]
    forward_dependent: tuple[Expression, ...]
    inverse_independent: tuple[Expression, ...]
    inverse_dependent: tuple[Expression, ...]
    validated: bool = False

    @property
    def s(self) -> sp.Symbol:
        return self.adapted.x[0]

    @property
    def z(self) -> tuple[sp.Symbol, ...]:
        return self.adapted.x[1:]

    @property
    def v(self) -> tuple[sp.Symbol, ...]:
        return self.adapted.u

    def describe(self) -> list[str]:
        lines = [f"{n} = {m}" for n, m in zip(self.adapted.independents, self.forward_independent)]
        lines += [f"{n} = {m}" for n, m in zip(self.adapted.dependents, self.forward_dependent)]
        lines += [f"{n} = {m}" for n, m in zip(self.original.dependents, self.inverse_dependent)]
        return lines


def coordinate_change(
    ctx: JetContext,
    forward_independent: Sequence,
    forward_dependent: Sequence,
    inverse_independent: Sequence | None = None,
    inverse_dependent: Sequence | None = None,
    names: tuple[Sequence[str], Sequence[str]] | None = None,
) -> CoordinateChange:
    """Assemble a change of variables, solving for the inverse maps when not given.

    ``names`` gives the adapted independent (``s`` first) and dependent names;
    by default they follow :func:`adapted_names`.
    """
    fi = tuple(sp.sympify(e) for e in forward_independent)
    fd = tuple(sp.sympify(e) for e in forward_dependent)
    if len(fi) != ctx.p or len(fd) != ctx.q:
        raise CanonicalError(f"need {ctx.p} independent and {ctx.q} dependent maps")
    if any(f.free_symbols & set(ctx.u) for f in fi):
        raise CanonicalError("adapted independents must not depend on the dependent variables")
    if names is None:
        names = adapted_names(ctx, fi[0], fi[1:])
    indep, deps = (tuple(n) for n in names)
    for n, m in zip(indep, fi):
        if n in ctx.independents and sp.sympify(m) != sp.Symbol(n):
            raise CanonicalError(f"adapted variable {n!r} would shadow an original variable")
    clash = (set(indep) | set(deps)) & set(ctx.dependents)
    if clash:
        raise CanonicalError(f"adapted names reuse dependent variables: {sorted(clash)}")
    adapted = JetContext(indep, deps, ctx.order)
    if inverse_independent is None:
        inverse_independent = _solve_inverse(fi, ctx.x, adapted.x)
    ii = tuple(normalize(e) for e in inverse_independent)
    if inverse_dependent is None:
        sub = dict(zip(ctx.x, ii))
        inverse_dependent = _solve_inverse(tuple(f.xreplace(sub) for f in fd), ctx.u, adapted.u)
    idp = tuple(normalize(e) for e in inverse_dependent)
    return CoordinateChange(ctx, adapted, fi, fd, ii, idp)


def _solve_inverse(maps, unknowns, targets) -> tuple[Expression, ...]:
    # Symbols of the adapted side may coincide with original ones (s = t is
    # named t), so solve with dummies standing in for the targets.
    dummies = [sp.Dummy(str(t)) for t in targets]
    eqs = [sp.Eq(d, m) for d, m in zip(dummies, maps)]
    try:
        sols = sp.solve(eqs, list(unknowns), dict=True)
    except NotImplementedError as exc:
        raise CanonicalError(f"cannot invert coordinate maps: {exc}") from exc
    if not sols:
        raise CanonicalError("coordinate maps are not invertible in closed form")
    back = dict(zip(dummies, targets))
    sol = sols[0]
    if any(u not in sol for u in unknowns):
        raise CanonicalError("coordinate maps do not determine every original variable")
    return tuple(sp.sympify(sol[u]).xreplace(back) for u in unknowns)


def _integrate(f, var) -> Expression:
    res = sp.integrate(sp.sympify(f), var)
    if res.has(sp.Integral):
        raise NotDerivable(f"no closed-form integral of {f} in {var}")
    return sp.simplify(res)


def _affine_flow(rate, y, s, context) -> tuple[Expression, Expression]:
    """For ``dy/ds = a(s) y + b(s)`` return ``(exp(-A), -integral(b exp(-A)))``.

    The invariant is ``y * exp(-A) - integral(b exp(-A) ds)``.
    """
    rate = sp.expand(sp.sympify(rate))
    a = sp.simplify(sp.diff(rate, y))
    if a.has(y):
        raise NotDerivable(f"{context}: characteristic rate {rate} is not affine in {y}")
    b = sp.simplify(rate - a * y)
    A = _integrate(a, s) if a != 0 else sp.Integer(0)
    factor = sp.simplify(sp.exp(-A))
    C = _integrate(sp.simplify(b * factor), s) if b != 0 else sp.Integer(0)
    return factor, sp.simplify(-C)


def derive_canonical_coordinates(X: VectorField) -> CoordinateChange:
    """Adapted coordinates by the method of characteristics.

    Supported: a lead variable ``x_j`` whose component ``xi_j`` depends only on
    ``x_j`` and variables left fixed by the flow; every other moving variable
    has a component affine in itself once the rest is written in terms of
    ``s``; ``phi`` affine in ``u``. This covers translations, scalings and
    time-dependent Galilean-type fields.
    """
    ctx = X.ctx
    if not X.projectable:
        raise CanonicalError(f"field {X.name} is not projectable")
    moving = [i for i in range(ctx.p) if X.xi[i] != 0]
    if not moving:
        raise NotDerivable(f"field {X.name} does not move the independent variables")
    fixed = {ctx.x[i] for i in range(ctx.p) if X.xi[i] == 0}

    def lead_ok(j):
        return X.xi[j].free_symbols <= fixed | {ctx.x[j]}

    constant = [j for j in moving if not X.xi[j].free_symbols]
    leads = constant or [j for j in moving if lead_ok(j)]
    if not leads:
        raise NotDerivable(f"no lead variable for {X.name}")
    j = max(leads)
    xj = ctx.x[j]
    S = sp.Dummy("s")
    s_of_x = _integrate(1 / X.xi[j], xj)
    xj_of_s = sp.solve(sp.Eq(S, s_of_x), xj)
    if not xj_of_s:
        raise NotDerivable(f"cannot invert s = {s_of_x}")
    xj_of_s = xj_of_s[-1]

    z_maps = {}
    inv = {xj: xj_of_s}
    zdummies = {}
    for i in range(ctx.p):
        if i == j:
            continue
        xi_ = ctx.x[i]
        Z = sp.Dummy(f"z{i}")
        zdummies[i] = Z
        if X.xi[i] == 0:
            z_maps[i] = xi_
            inv[xi_] = Z
            continue
        rate = X.xi[i].xreplace({xj: xj_of_s})
        if rate.free_symbols - fixed - {S, xi_}:
            raise NotDerivable(f"component xi_{ctx.independents[i]} couples several moving variables")
        factor, shift = _affine_flow(rate, xi_, S, f"xi_{ctx.independents[i]}")
        z_of = sp.simplify((xi_ * factor + shift).xreplace({S: s_of_x}))
        z_maps[i] = z_of
        inv[xi_] = sp.simplify((Z - shift) / factor)

    # dependent variables: du/ds = phi(x(s, z), u)
    v_maps, u_inv, vdummies = [], [], []
    for a in range(ctx.q):
        U = ctx.u[a]
        rate = X.phi[a].xreplace(inv)
        if rate.free_symbols & (set(ctx.u) - {U}):
            raise NotDerivable("coupled dependent variables are not supported")
        factor, shift = _affine_flow(rate, U, S, f"phi_{ctx.dependents[a]}")
        V = sp.Dummy(f"v{a}")
        vdummies.append(V)
        v_maps.append((factor, shift))
        u_inv.append(sp.simplify((V - shift) / factor))

    z_order = [i for i in range(ctx.p) if i != j]
    forward_z = [z_maps[i] for i in z_order]
    names, deps = adapted_names(ctx, s_of_x, forward_z)
    adapted = JetContext(names, deps, ctx.order)
    s_sym, z_syms = adapted.x[0], adapted.x[1:]
    to_adapted = {S: s_sym}
    for i, zs in zip(z_order, z_syms):
        to_adapted[zdummies[i]] = zs
    to_x = {S: s_of_x}
    for i in z_order:
        to_x[zdummies[i]] = z_maps[i]

    inverse_independent = []
    for i in range(ctx.p):
        inverse_independent.append(sp.sympify(inv[ctx.x[i]]).xreplace(to_adapted))
    forward_dependent, inverse_dependent = [], []
    for a, (factor, shift) in enumerate(v_maps):
        forward_dependent.append(sp.simplify((ctx.u[a] * factor + shift).xreplace(to_x)))
        inverse_dependent.append(sp.simplify(u_inv[a].xreplace({vdummies[a]: adapted.u[a], **to_adapted})))

    cc = CoordinateChange(
        ctx,
        adapted,
        tuple(sp.simplify(e) for e in [s_of_x, *forward_z]),
        tuple(forward_dependent),
        tuple(normalize(e) for e in inverse_independent),
        tuple(normalize(e) for e in inverse_dependent),
    )
    return validate_coordinates(X, cc)


def _roundtrip_error(cc: CoordinateChange, rng: random.Random) -> float | None:
    point = {s: sp.Rational(rng.randint(1, 40), rng.randint(2, 11)) for s in cc.adapted.x + cc.adapted.u}
    xs = [evaluate_at(sp.sympify(e), point) for e in cc.inverse_independent]
    if any(v is None for v in xs):
        return None
    xpoint = dict(zip(cc.original.x, xs))
    us = [evaluate_at(sp.sympify(e), point) for e in cc.inverse_dependent]
    if any(v is None for v in us):
        return None
    xpoint.update(zip(cc.original.u, us))
    err = 0.0
    targets = list(cc.adapted.x) + list(cc.adapted.u)
    images = list(cc.forward_independent) + list(cc.forward_dependent)
    for tgt, img in zip(targets, images):
        val = evaluate_at(sp.sympify(img), xpoint)
        if val is None:
            return None
        err = max(err, float(abs(sp.N(val - point[tgt], 30))))
    return err


def validate_coordinates(X: VectorField, cc: CoordinateChange, samples: int = 5) -> CoordinateChange:
    """Check ``X s = 1``, ``X z = 0``, ``X v = 0`` symbolically and the round trip numerically."""
    X = VectorField(cc.original, X.xi, X.phi, X.name)
    checks = [("X s - 1", X(cc.forward_independent[0]) - 1)]
    for n, z in zip(cc.adapted.independents[1:], cc.forward_independent[1:]):
        checks.append((f"X {n}", X(z)))
    for n, v in zip(cc.adapted.dependents, cc.forward_dependent):
        checks.append((f"X {n}", X(v)))
    for label, residual in checks:
        if not is_zero(residual):
            raise InvalidCoordinates(f"{label} = {normalize(residual)} is not zero", normalize(residual))
    rng = random.Random(1)
    done = tries = 0
    while done < samples:
        tries += 1
        if tries > 20 * samples:
            raise InvalidCoordinates("could not sample regular points for the round-trip check")
        err = _roundtrip_error(cc, rng)
        if err is None:
            continue
        if err > 1e-9:
            raise InvalidCoordinates(f"forward and inverse maps disagree (error {err:.3g})", err)
        done += 1
    return replace(cc, validated=True)


@dataclass(frozen=True)
class TransformedProblem:
    """Equations in adapted jet coordinates: ``multiplier * Delta = cleared``."""

    change: CoordinateChange
    equations: tuple[Expression, ...]
    multipliers: tuple[Expression, ...]
    raw: tuple[Expression, ...]


def _pull_back(exprs, source: JetContext, target: JetContext, src_indep, src_dep, tgt_indep):
    """Rewrite source-jet expressions in target jet coordinates.

    ``src_indep``/``src_dep`` give the source variables in target variables;
    ``tgt_indep`` gives the target independents in source independents.
    """
    tgt_x = list(target.x)
    src_x = list(source.x)
    # d(target_k)/d(source_i), written in target variables
    to_target = dict(zip(src_x, src_indep))
    jac = sp.Matrix([[normalize(sp.diff(b, a)) for a in src_x] for b in tgt_indep])
    jac = jac.applyfunc(lambda e: normalize(e.xreplace(to_target)))
    if normalize(jac.det()) == 0:
        raise CanonicalError("singular Jacobian for the coordinate change")

    cache: dict = {}

    def source_jet(alpha: int, J: MultiIndex) -> Expression:
        if J in cache.setdefault(alpha, {}):
            return cache[alpha][J]
        if J.order == 0:
            val = normalize(src_dep[alpha])
        else:
            i = next(k for k, c in enumerate(J) if c > 0)
            parent = source_jet(alpha, J.bump(i, -1))
            val = normalize(sum(jac[k, i] * total_derivative(parent, k, target) for k in range(target.p)))
        cache[alpha][J] = val
        return val

    out = []
    for e in exprs:
        e = sp.sympify(e)
        sub = dict(to_target)
        for sym in e.free_symbols:
            dec = source.decode(sym)
            if dec is not None:
                sub[sym] = source_jet(*dec)
        out.append(normalize(e.xreplace(sub)))
    return out


def _clear(e: Expression) -> tuple[Expression, Expression]:
    num, den = sp.fraction(normalize(e))
    return normalize(num), normalize(den)


def transform_pde(P: PdeProblem, cc: CoordinateChange) -> TransformedProblem:
    """Express the equations in adapted jets and clear denominators."""
    if not cc.validated:
        log.warning("transforming with an unvalidated coordinate change")
    adapted = cc.adapted.with_order(max(P.order, cc.adapted.order))
    cc = replace(cc, adapted=adapted)
    raw = _pull_back(
        P.equations, P.ctx, adapted, cc.inverse_independent, cc.inverse_dependent, cc.forward_independent
    )
    cleared = [_clear(e) for e in raw]
    return TransformedProblem(cc, tuple(c[0] for c in cleared), tuple(c[1] for c in cleared), tuple(raw))


def transform_back(exprs: Sequence[Expression], cc: CoordinateChange) -> list[Expression]:
    """Inverse of :func:`transform_pde`'s substitution: adapted jets back to original jets."""
    original = cc.original.with_order(max([cc.adapted.order_of(e) for e in exprs] + [cc.original.order]))
    return _pull_back(
        exprs,
        cc.adapted,
        original,
        cc.forward_independent,
        cc.forward_dependent,
        cc.inverse_independent,
    )


STANDARD = "standard"
POLYNOMIAL_WEAK = "polynomial-weak"
BASIS_WEAK = "basis-weak"
UNCLASSIFIED = "unclassified"


@dataclass(frozen=True)
class SFormDecomposition:
    """``Delta = theta + sum(R_r(s) * K_r)`` with ``K_r`` free of ``s`` and of s-derivatives."""

    ctx: JetContext
    theta: tuple[Expression, ...]
    components: tuple[tuple[Expression, Expression], ...]
    shape: str
    remainder: Expression = sp.Integer(0)

    @property
    def sigma(self) -> int:
        return len(self.components)

    @property
    def theta_part(self) -> Expression:
        return normalize(sp.Add(*self.theta))

    def reconstruct(self) -> Expression:
        return normalize(self.theta_part + sum((r * k for r, k in self.components), sp.Integer(0)) + self.remainder)


def is_s_jet(sym, ctx: JetContext) -> bool:
    dec = ctx.decode(sym)
    return dec is not None and dec[1][0] > 0


def _s_function_key(f: Expression, s: sp.Symbol):
    # Factors allowed in a detected basis: powers of s, exp(c*s), powers of log(s).
    for g in sp.Mul.make_args(f):
        if g.is_number:
            continue
        base, _ = g.as_base_exp()
        if base == s:
            continue
        if isinstance(g, sp.exp):
            if normalize(g.args[0] / s).has(s):
                return None
            continue
        if isinstance(base, sp.log) and base.args[0] == s:
            continue
        return None
    return True


def s_form_decompose(delta, ctx: JetContext) -> SFormDecomposition:
    """Split off every term holding an s-differentiated jet, then collect on an s-basis.

    The first adapted independent of ``ctx`` plays the role of ``s``.
    """
    s = ctx.x[0]
    delta = normalize(delta)
    num, den = sp.fraction(delta)
    theta, rest = [], []
    for term in sp.Add.make_args(sp.expand(num)):
        if any(is_s_jet(sym, ctx) for sym in term.free_symbols):
            theta.append(normalize(term / den))
        else:
            rest.append(term)
    rest_expr = normalize(sp.Add(*rest) / den)
    if rest_expr == 0:
        return SFormDecomposition(ctx, tuple(theta), (), UNCLASSIFIED, sp.Integer(0))
    num_r, den_r = sp.fraction(rest_expr)
    s_parts = []
    if not den_r.has(s):
        for term in sp.Add.make_args(sp.expand(num_r)):
            _, dep = split_dependence(term, s)
            dep = normalize(dep)
            if dep not in s_parts:
                s_parts.append(dep)
    if s_parts and all(p == 1 or (p.as_base_exp()[0] == s and p.as_base_exp()[1].is_Integer) for p in s_parts):
        degree = max(sp.degree(p, s) for p in s_parts)
        basis = [s**k for k in range(degree + 1)]
        shape = POLYNOMIAL_WEAK
    elif s_parts and all(_s_function_key(p, s) for p in s_parts):
        basis = sorted(s_parts, key=sp.default_sort_key)
        shape = BASIS_WEAK
    else:
        return SFormDecomposition(ctx, tuple(theta), (), UNCLASSIFIED, rest_expr)
    col: Collection = collect_on_basis(rest_expr, s, basis)
    if col.remainder != 0:
        return SFormDecomposition(ctx, tuple(theta), col.terms, UNCLASSIFIED, col.remainder)
    if len(col.terms) == 1:
        shape = STANDARD
    return SFormDecomposition(ctx, tuple(theta), col.terms, shape)


def reduce(d: SFormDecomposition, name: str = "w") -> tuple[Expression, ...]:
    """Reduced system: the ``K_r`` with ``v`` renamed ``w`` over the ``z`` variables."""
    if d.shape == UNCLASSIFIED:
        raise CanonicalError("decomposition is unclassified; no reduced system")
    reduced = reduced_context(d.ctx, name)
    out = []
    for _, K in d.components:
        sub = {}
        for sym in K.free_symbols:
            dec = d.ctx.decode(sym)
            if dec is not None:
                alpha, J = dec
                sub[sym] = reduced.jet(alpha, J[1:])
        out.append(normalize(K.xreplace(sub)))
    return tuple(out)


def reduced_context(ctx: JetContext, name: str = "w") -> JetContext:
    if ctx.p < 2:
        raise CanonicalError("reduction needs at least two independent variables")
    deps = (name,) if ctx.q == 1 else tuple(f"{name}{a + 1}" for a in range(ctx.q))
    return JetContext(ctx.independents[1:], deps, ctx.order)


def lift_solution(w_solution: Sequence[Expression], cc: CoordinateChange, name: str = "w") -> tuple[Expression, ...]:
    """Invariant solution ``u(x)`` from a solution ``w(z)`` of the reduced system."""
    sub = dict(zip(cc.adapted.x[1:], cc.forward_independent[1:]))
    out = []
    for a, U in enumerate(cc.inverse_dependent):
        expr = U.xreplace({cc.adapted.u[a]: sp.sympify(w_solution[a])})
        expr = expr.xreplace({cc.adapted.x[0]: cc.forward_independent[0], **sub})
        out.append(normalize(expr))
    return tuple(out)
