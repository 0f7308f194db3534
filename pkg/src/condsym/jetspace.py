"""Jet coordinates, total derivatives and restriction to solution manifolds."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Iterable, NamedTuple, Sequence

import sympy as sp

from .kernel import (
    Expression,
    KernelError,
    Role,
    SymbolTable,
    is_zero,
    normalize,
)

log = logging.getLogger(__name__)


class JetError(KernelError):
    pass


class NotSolvable(JetError):
    """An equation cannot be solved for the requested leading derivative."""


class InconsistentRules(JetError):
    """Two rules for the same jet symbol disagree on the manifold."""


class MultiIndex(tuple):
    """Derivative counts, one per independent variable."""

    def __new__(cls, counts: Iterable[int]):
        counts = tuple(int(c) for c in counts)
        if any(c < 0 for c in counts):
            raise ValueError(f"negative derivative count in {counts}")
        return super().__new__(cls, counts)

    @property
    def order(self) -> int:
        return sum(self)

    def bump(self, i: int, n: int = 1) -> "MultiIndex":
        counts = list(self)
        counts[i] += n
        return MultiIndex(counts)

    def covers(self, other: "MultiIndex") -> bool:
        return all(a >= b for a, b in zip(self, other))

    def __sub__(self, other: "MultiIndex") -> "MultiIndex":
        return MultiIndex(a - b for a, b in zip(self, other))


def _tokenize_suffix(suffix: str, names: Sequence[str]) -> list[int] | None:
    out = []
    pos = 0
    while pos < len(suffix):
        for i, name in enumerate(names):
            if suffix.startswith(name, pos):
                out.append(i)
                pos += len(name)
                break
        else:
            return None
    return out


@dataclass(frozen=True)
class JetContext:
    """Independent variables, dependent variables and a working derivative order.

    Jet symbols are named ``<dependent>_<letters>``, letters listed in the
    declaration order of the independents (``u_xxt`` for ``x, t``). Symbols are
    created on demand, so asking for a derivative above ``order`` simply works;
    ``order`` only bounds what :meth:`jets` enumerates.
    """

    independents: tuple[str, ...]
    dependents: tuple[str, ...]
    order: int = 1

    def __post_init__(self):
        object.__setattr__(self, "independents", tuple(self.independents))
        object.__setattr__(self, "dependents", tuple(self.dependents))
        if not self.independents or not self.dependents:
            raise JetError("need at least one independent and one dependent variable")
        if self.order < 1:
            raise JetError("working order must be at least 1")
        names = self.independents + self.dependents
        if len(set(names)) != len(names):
            raise JetError(f"duplicate variable names in {names}")
        for name in names:
            if not name.isidentifier() or "_" in name:
                raise JetError(f"invalid variable name {name!r}")
        for a in self.independents:
            for b in self.independents:
                if a != b and b.startswith(a):
                    raise JetError(f"independent names {a!r} and {b!r} make derivative suffixes ambiguous")

    @property
    def p(self) -> int:
        return len(self.independents)

    @property
    def q(self) -> int:
        return len(self.dependents)

    @cached_property
    def x(self) -> tuple[sp.Symbol, ...]:
        return tuple(sp.Symbol(n) for n in self.independents)

    @cached_property
    def u(self) -> tuple[sp.Symbol, ...]:
        return tuple(sp.Symbol(n) for n in self.dependents)

    def with_order(self, order: int) -> "JetContext":
        return JetContext(self.independents, self.dependents, max(order, 1))

    def jet(self, alpha: int, counts: Sequence[int]) -> sp.Symbol:
        counts = MultiIndex(counts)
        if counts.order == 0:
            return self.u[alpha]
        letters = "".join(n * c for n, c in zip(self.independents, counts))
        return sp.Symbol(f"{self.dependents[alpha]}_{letters}")

    def first_order(self, alpha: int, i: int) -> sp.Symbol:
        return self.jet(alpha, MultiIndex([0] * self.p).bump(i))

    def decode(self, sym) -> tuple[int, MultiIndex] | None:
        """Return ``(alpha, J)`` for a jet symbol of this context, else ``None``."""
        if not isinstance(sym, sp.Symbol):
            return None
        return _decode(self, sym.name)

    def parse_jet(self, name: str) -> sp.Symbol | None:
        dec = _decode(self, name)
        return None if dec is None else self.jet(*dec)

    def is_jet(self, sym) -> bool:
        return self.decode(sym) is not None

    def jets_in(self, e: Expression) -> list[sp.Symbol]:
        return sorted((s for s in sp.sympify(e).free_symbols if self.is_jet(s)), key=self.rank_key)

    def order_of(self, e: Expression) -> int:
        return max((self.decode(s)[1].order for s in self.jets_in(e)), default=0)

    def jets(self, order: int | None = None) -> list[sp.Symbol]:
        order = self.order if order is None else order
        out = []
        for alpha in range(self.q):
            for counts in multi_indices(self.p, order):
                out.append(self.jet(alpha, counts))
        return out

    def rank_key(self, sym: sp.Symbol) -> tuple:
        """Orderly ranking; among equal orders, later-declared variables dominate."""
        alpha, counts = self.decode(sym)
        return (counts.order, tuple(reversed(counts)), -alpha)

    def table(self, parameters: Iterable[str] = ()) -> SymbolTable:
        t = SymbolTable()
        for n in self.independents:
            t.register(n, Role.INDEPENDENT)
        for n in self.dependents:
            t.register(n, Role.DEPENDENT)
        for s in self.jets(self.order):
            if s.name not in t.roles:
                t.register(s.name, Role.JET)
        for n in parameters:
            t.register(n, Role.PARAMETER)
        return t


@lru_cache(maxsize=None)
def _decode(ctx: JetContext, name: str):
    if name in ctx.dependents:
        return ctx.dependents.index(name), MultiIndex([0] * ctx.p)
    dep, sep, suffix = name.partition("_")
    if not sep or dep not in ctx.dependents or not suffix:
        return None
    idx = _tokenize_suffix(suffix, ctx.independents)
    if idx is None:
        return None
    counts = [0] * ctx.p
    for i in idx:
        counts[i] += 1
    return ctx.dependents.index(dep), MultiIndex(counts)


def multi_indices(p: int, order: int) -> list[MultiIndex]:
    """All multi-indices of length ``p`` with total order ``<= order``, by order."""
    out = [MultiIndex([0] * p)]
    frontier = [out[0]]
    for _ in range(order):
        nxt = []
        seen = set()
        for J in frontier:
            for i in range(p):
                K = J.bump(i)
                if K not in seen:
                    seen.add(K)
                    nxt.append(K)
        out.extend(nxt)
        frontier = nxt
    return out


def total_derivative(e, i: int, ctx: JetContext) -> Expression:
    """``D_i e = de/dx_i + sum over jets u_J of u_{J+e_i} * de/du_J``."""
    e = sp.sympify(e)
    res = sp.diff(e, ctx.x[i])
    for sym in e.free_symbols:
        dec = ctx.decode(sym)
        if dec is not None:
            alpha, J = dec
            res += ctx.jet(alpha, J.bump(i)) * sp.diff(e, sym)
    return normalize(res)


def total_derivative_multi(e, J: Sequence[int], ctx: JetContext) -> Expression:
    for i, n in enumerate(J):
        for _ in range(n):
            e = total_derivative(e, i, ctx)
    return e


class Rule(NamedTuple):
    lhs: sp.Symbol
    rhs: Expression

    def __str__(self) -> str:
        return f"{self.lhs} -> {self.rhs}"


def solve_for_leading(eq, leading: sp.Symbol) -> Rule:
    """Solve an equation affine in ``leading`` for that symbol."""
    eq = normalize(eq)
    num, _ = sp.fraction(eq)
    coeff = normalize(sp.diff(num, leading))
    if coeff == 0:
        raise NotSolvable(f"{leading} does not occur in {eq}")
    if normalize(sp.diff(coeff, leading)) != 0:
        raise NotSolvable(f"{eq} is not affine in {leading}")
    rest = normalize(num.xreplace({leading: 0}))
    return Rule(leading, normalize(-rest / coeff))


def choose_leading(eq, ctx: JetContext, exclude: Iterable[sp.Symbol] = ()) -> sp.Symbol:
    """Highest-ranked jet symbol in which ``eq`` is affine (with nonzero coefficient)."""
    eq = normalize(eq)
    num, _ = sp.fraction(eq)
    exclude = set(exclude)
    for sym in sorted(ctx.jets_in(num), key=ctx.rank_key, reverse=True):
        if sym in exclude:
            continue
        coeff = normalize(sp.diff(num, sym))
        if coeff != 0 and normalize(sp.diff(coeff, sym)) == 0:
            return sym
    raise NotSolvable(f"{eq} is not affine in any of its jet symbols")

@dataclass(frozen=True)
class ManifoldRules:
    """Triangular substitution rules describing a solution manifold.

    ``rules`` are explicit; a jet that is a derivative of some left-hand side
    (at most ``depth`` differentiations away) is reduced on demand by the
    corresponding total derivative of that rule. Rules of a lower ``family``
    take precedence, then the closest left-hand side, then insertion order.

    ``conflicts`` records consequences that were not adopted because a rule for
    the same symbol already existed and disagreed, or because the consequence
    was implicit in its own left-hand side. ``empty`` is set when some equation
    reduced to a nonzero expression free of jet symbols.
    """

    ctx: JetContext
    rules: tuple[Rule, ...] = ()
    depth: int = 0
    conflicts: tuple[Expression, ...] = ()
    empty: bool = False
    families: tuple[int, ...] = ()
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if len(self.families) != len(self.rules):
            object.__setattr__(self, "families", (0,) * len(self.rules))

    @cached_property
    def mapping(self) -> dict:
        return {r.lhs: r.rhs for r in self.rules}

    @cached_property
    def _heads(self) -> list:
        return [(fam, self.ctx.decode(r.lhs), r.lhs) for fam, r in zip(self.families, self.rules)]

    def __len__(self) -> int:
        return len(self.rules)

    def __contains__(self, sym) -> bool:
        return sym in self.mapping

    def __getitem__(self, sym) -> Expression:
        return self.mapping[sym]

    def _source(self, alpha: int, K: MultiIndex):
        best = None
        for pos, (fam, (a, L), lhs) in enumerate(self._heads):
            if a != alpha or not K.covers(L):
                continue
            dist = K.order - L.order
            if 0 < dist <= self.depth:
                key = (fam, dist, pos)
                if best is None or key < best[0]:
                    best = (key, L)
        return None if best is None else best[1]

    def reducer(self, sym) -> Expression | None:
        """Value of ``sym`` on the manifold, or ``None`` if it is not reducible."""
        if sym in self.mapping:
            return self.mapping[sym]
        if sym in self._cache:
            return self._cache[sym]
        dec = self.ctx.decode(sym)
        if dec is None:
            return None
        alpha, K = dec
        L = self._source(alpha, K)
        if L is None:
            self._cache[sym] = None
            return None
        self._cache[sym] = None  # cycle guard while the value is computed
        i = next(k for k, (a, b) in enumerate(zip(K, L)) if a > b)
        parent = self.reducer(self.ctx.jet(alpha, K.bump(i, -1)))
        value = None
        if parent is not None:
            value = restrict(total_derivative(parent, i, self.ctx), self)
            if value.has(sym):
                value = None
        self._cache[sym] = value
        return value


def restrict(e, rules: "ManifoldRules | dict", max_passes: int = 50) -> Expression:
    """Substitute rule right-hand sides until no reducible jet symbol occurs."""
    if isinstance(rules, ManifoldRules):
        lookup = rules.reducer
    else:
        lookup = rules.get
    e = normalize(e)
    for _ in range(max_passes):
        hits = {}
        for s in e.free_symbols:
            val = lookup(s)
            if val is not None:
                hits[s] = val
        if not hits:
            return e
        e = normalize(e.xreplace(hits))
    raise JetError("restriction did not terminate; rules are not triangular")


class _Builder:
    def __init__(self, ctx: JetContext, strict: bool, depth: int = 0):
        self.ctx = ctx
        self.strict = strict
        self.depth = depth
        self.rules: dict = {}
        self.families: dict = {}
        self.conflicts: list = []
        self.empty = False
        self._view = None

    def view(self) -> ManifoldRules:
        if self._view is None:
            rules = tuple(Rule(k, v) for k, v in self.rules.items())
            fams = tuple(self.families[k] for k in self.rules)
            self._view = ManifoldRules(self.ctx, rules, self.depth, families=fams)
        return self._view

    def _truncated(self, e) -> bool:
        # A derivative of some left-hand side that lies beyond the closed depth
        # makes the comparison inconclusive rather than conflicting.
        heads = [self.ctx.decode(k) for k in self.rules]
        for sym in self.ctx.jets_in(e):
            alpha, K = self.ctx.decode(sym)
            if any(a == alpha and K.covers(L) for a, L in heads):
                return True
        return False

    def add_rule(self, lhs, rhs, family: int = 0) -> Rule | None:
        current = self.view()
        rhs = restrict(rhs, current)
        known = current.reducer(lhs)
        if known is not None:
            residual = restrict(rhs - known, current)
            if not is_zero(residual) and not self._truncated(residual):
                if self.strict:
                    raise InconsistentRules(f"conflicting rules for {lhs}: residual {residual}")
                self.conflicts.append(residual)
            if lhs in self.rules:
                return None
        if rhs.has(lhs):
            if self.strict:
                raise InconsistentRules(f"consequence for {lhs} is implicit: {rhs}")
            self.conflicts.append(normalize(lhs - rhs))
            return None
        for key, val in self.rules.items():
            if val.has(lhs):
                self.rules[key] = normalize(val.xreplace({lhs: rhs}))
        self.rules[lhs] = rhs
        self.families[lhs] = family
        self._view = None
        return Rule(lhs, rhs)

    def add_equation(self, eq, leading=None, family: int = 1) -> Rule | None:
        reduced = restrict(eq, self.view())
        if is_zero(reduced):
            return None
        if not self.ctx.jets_in(reduced):
            log.info("manifold is empty: %s = 0 has no jet symbols", reduced)
            self.empty = True
            self.conflicts.append(reduced)
            return None
        if leading is None or not reduced.has(leading):
            leading = choose_leading(reduced, self.ctx)
        try:
            rule = solve_for_leading(reduced, leading)
        except NotSolvable:
            rule = solve_for_leading(reduced, choose_leading(reduced, self.ctx))
        return self.add_rule(rule.lhs, rule.rhs, family)

    def close(self, seeds: Sequence[Rule], depth: int) -> None:
        frontier = [r.lhs for r in seeds if r is not None]
        for _ in range(depth):
            nxt = []
            for lhs in frontier:
                if lhs not in self.rules:
                    continue
                alpha, J = self.ctx.decode(lhs)
                for i in range(self.ctx.p):
                    added = self.add_rule(
                        self.ctx.jet(alpha, J.bump(i)),
                        total_derivative(self.rules[lhs], i, self.ctx),
                        self.families[lhs],
                    )
                    if added is not None:
                        nxt.append(added.lhs)
            frontier = nxt

    def freeze(self, depth: int) -> ManifoldRules:
        view = self.view()
        return ManifoldRules(self.ctx, view.rules, depth, tuple(self.conflicts), self.empty, view.families)


def close_rules(rules: Sequence[Rule], ctx: JetContext, depth: int, strict: bool = True) -> ManifoldRules:
    """Add total-derivative consequences of ``rules`` up to ``depth`` and triangularize.

    The consequences are materialized as explicit rules. With ``strict`` a
    disagreeing consequence raises :class:`InconsistentRules`; otherwise the
    earlier rule wins and the residual is recorded in ``conflicts``.
    """
    if depth < 0:
        raise ValueError("depth must be non-negative")
    b = _Builder(ctx, strict)
    seeds = [b.add_rule(r.lhs, r.rhs) for r in rules]
    b.close(seeds, depth)
    return b.freeze(depth)


def build_manifold(
    ctx: JetContext,
    equations: Sequence[tuple[Expression, sp.Symbol | None]],
    depth: int,
    base: Sequence[Rule] = (),
    strict: bool = False,
) -> ManifoldRules:
    """Manifold of ``base`` rules (highest priority) and ``equations``.

    Each equation is reduced by what is already known before it is solved for
    its leading derivative. Consequences up to ``depth`` differentiations are
    applied on demand by :func:`restrict`, with ``base`` rules preferred.
    """
    if depth < 0:
        raise ValueError("depth must be non-negative")
    b = _Builder(ctx, strict, depth)
    for r in base:
        b.add_rule(r.lhs, r.rhs, family=0)
    for eq, lead in equations:
        b.add_equation(eq, lead, family=1)
    return b.freeze(depth)
