"""Symbolic expression kernel.

Expressions are ordinary sympy expressions restricted to rational functions of
symbols with ``exp``/``log``/``sin``/``cos`` kernels. Kernels with distinct
normalized arguments are treated as independent transcendentals; arithmetic
stays exact (sympy rationals) on the symbolic path.

The canonical form produced by :func:`normalize` is a single reduced
numerator/denominator pair (sympy's ``cancel``) after rewriting
``exp(a + b)`` as ``exp(a)*exp(b)``.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import sympy as sp

Expression = sp.Expr

_KERNELS = (sp.exp, sp.log, sp.sin, sp.cos)
_POLES = (sp.zoo, sp.nan, sp.oo, -sp.oo)


class KernelError(Exception):
    """Base class for kernel failures."""


class MalformedExpression(KernelError):
    """An expression uses an unregistered symbol or an unsupported construct."""


class ZeroTestMismatch(KernelError):
    """Symbolic and numeric zero tests disagree."""


class Role(enum.IntEnum):
    INDEPENDENT = 0
    DEPENDENT = 1
    JET = 2
    PARAMETER = 3
    ADAPTED = 4


@dataclass
class SymbolTable:
    """Registry of symbol names and their roles."""

    roles: dict[str, Role] = field(default_factory=dict)

    def register(self, name: str, role: Role) -> sp.Symbol:
        known = self.roles.get(name)
        if known is not None and known != role:
            raise MalformedExpression(f"symbol {name!r} already registered as {known.name.lower()}")
        self.roles[name] = role
        return sp.Symbol(name)

    def role(self, sym: sp.Symbol) -> Role:
        try:
            return self.roles[sym.name]
        except KeyError:
            raise MalformedExpression(f"unregistered symbol {sym.name!r}") from None

    def __contains__(self, sym) -> bool:
        return getattr(sym, "name", sym) in self.roles

    def check(self, e: Expression) -> None:
        for sym in sp.sympify(e).free_symbols:
            if sym.name not in self.roles:
                raise MalformedExpression(f"unregistered symbol {sym.name!r}")

    def sort_key(self, sym: sp.Symbol) -> tuple:
        return (int(self.role(sym)), sym.name)

    def merged(self, other: "SymbolTable") -> "SymbolTable":
        out = SymbolTable(dict(self.roles))
        for name, role in other.roles.items():
            out.register(name, role)
        return out


def _split_exp(arg: Expression) -> Expression:
    # exp(n/d) becomes the product of exp(n_k/d) over the monomials n_k of n,
    # the same generators sympy's cancel works with.
    num, den = sp.fraction(_normalize(arg))
    return sp.Mul(*[sp.exp(term / den) for term in sp.Add.make_args(sp.expand(num))])


def _rewrite_kernels(e: Expression) -> Expression:
    if e.is_Atom:
        return e
    args = [_rewrite_kernels(a) for a in e.args]
    if isinstance(e, sp.exp):
        return _split_exp(args[0])
    if isinstance(e, _KERNELS):
        return e.func(_normalize(args[0]))
    if isinstance(e, sp.Function):
        raise MalformedExpression(f"unsupported function {e.func}")
    return e.func(*args)


def _merge_exp_factors(term: Expression) -> Expression:
    # exp(a)*exp(b/c) and exp(a + b/c) must share one form: recombine the
    # factors of a term whenever some argument has a denominator.
    exps = [f for f in sp.Mul.make_args(term) if isinstance(f, sp.exp)]
    if len(exps) < 2 or all(sp.fraction(f.args[0])[1] == 1 for f in exps):
        # polynomial arguments are already split into monomials
        return term
    rest = sp.Mul(*[f for f in sp.Mul.make_args(term) if not isinstance(f, sp.exp)])
    return rest * _split_exp(sp.Add(*[f.args[0] for f in exps]))


def _merge_exps(e: Expression) -> Expression:
    num, den = sp.fraction(e)
    num2 = sp.Add(*[_merge_exp_factors(t) for t in sp.Add.make_args(num)])
    den2 = sp.Add(*[_merge_exp_factors(t) for t in sp.Add.make_args(den)])
    if num2 == num and den2 == den:
        return e
    return sp.cancel(num2 / den2)


def _is_polynomial(e: Expression) -> bool:
    for node in sp.preorder_traversal(e):
        if isinstance(node, sp.Function):
            return False
        if node.is_Pow and not (node.exp.is_Integer and node.exp > 0):
            return False
    return True


@lru_cache(maxsize=65536)
def _normalize(e: Expression) -> Expression:
    if e.is_Atom:
        return e
    if e.has(*_POLES):
        raise MalformedExpression(f"expression has a pole or undefined value: {e}")
    if _is_polynomial(e):
        # same form as cancel gives for polynomials, much faster
        return sp.expand(e)
    return _merge_exps(sp.cancel(_rewrite_kernels(e)))


def normalize(e, table: SymbolTable | None = None) -> Expression:
    """Return the canonical form of ``e``.

    Idempotent. Raises :class:`MalformedExpression` when ``table`` is given and
    ``e`` contains an unregistered symbol.
    """
    e = sp.sympify(e)
    if table is not None:
        table.check(e)
    return _normalize(e)


def differentiate(e, sym: sp.Symbol, table: SymbolTable | None = None) -> Expression:
    """Explicit partial derivative; every other symbol is held fixed."""
    if table is not None and sym not in table:
        raise MalformedExpression(f"unregistered symbol {sym.name!r}")
    return _normalize(sp.diff(sp.sympify(e), sym))


def substitute(e, bindings: Mapping, table: SymbolTable | None = None) -> Expression:
    """Simultaneous one-shot replacement followed by normalization."""
    bindings = {sp.sympify(k): sp.sympify(v) for k, v in bindings.items()}
    if table is not None:
        for key in bindings:
            if key not in table:
                raise MalformedExpression(f"binding target {key} is unregistered")
    return _normalize(sp.sympify(e).xreplace(bindings))


def split_dependence(term: Expression, var: sp.Symbol) -> tuple[Expression, Expression]:
    """Split a product into (factor free of ``var``, factor depending on ``var``)."""
    free, dep = [], []
    for f in sp.Mul.make_args(term):
        if not f.has(var):
            free.append(f)
        elif isinstance(f, sp.exp):
            a_free, a_dep = f.args[0].as_independent(var, as_Add=True)
            free.append(sp.exp(a_free))
            dep.append(sp.exp(a_dep))
        else:
            dep.append(f)
    return sp.Mul(*free), sp.Mul(*dep)


@dataclass(frozen=True)
class Collection:
    terms: tuple[tuple[Expression, Expression], ...]
    remainder: Expression

    def reconstruct(self) -> Expression:
        return _normalize(sp.Add(*[b * c for b, c in self.terms]) + self.remainder)


def collect_on_basis(e, var: sp.Symbol, basis: Sequence) -> Collection:
    """Write ``e`` as ``sum(b * coeff_b) + remainder`` with ``var``-free coefficients.

    Terms whose ``var``-dependent factor is not a constant multiple of a basis
    element go to the remainder. Zero coefficients are dropped.
    """
    e = normalize(e)
    basis = [sp.sympify(b) for b in basis]
    num, den = sp.fraction(e)
    if den.has(var):
        return Collection((), e)
    buckets: dict[int, list] = {i: [] for i in range(len(basis))}
    rest = []
    for term in sp.Add.make_args(sp.expand(num)):
        free, dep = split_dependence(term, var)
        for i, b in enumerate(basis):
            ratio = _normalize(dep / b)
            if not ratio.has(var):
                buckets[i].append(free * ratio)
                break
        else:
            rest.append(term)
    terms = []
    for i, b in enumerate(basis):
        coeff = _normalize(sp.Add(*buckets[i]) / den)
        if coeff != 0:
            terms.append((b, coeff))
    return Collection(tuple(terms), _normalize(sp.Add(*rest) / den))


def _random_point(symbols: Iterable[sp.Symbol], rng: random.Random) -> dict:
    return {s: sp.Rational(rng.randint(1, 97), rng.randint(1, 13)) for s in symbols}


def evaluate_at(e: Expression, point: Mapping) -> sp.Expr | None:
    """Evaluate at a point; ``None`` when the point hits a pole."""
    try:
        val = e.xreplace(dict(point))
    except ZeroDivisionError:
        return None
    if val.has(*_POLES):
        return None
    if not val.is_Rational:
        val = val.evalf(60)
        if val.has(*_POLES) or not val.is_number:
            return None
    return val


def numerically_zero(e, points: int = 5, seed: int = 0) -> bool:
    """Probabilistic zero test by evaluation at random positive rationals."""
    e = sp.sympify(e)
    syms = sorted(e.free_symbols, key=lambda s: s.name)
    rng = random.Random(seed)
    done = attempts = 0
    while done < points:
        attempts += 1
        if attempts > 50 * points:
            raise KernelError(f"could not find {points} regular evaluation points")
        point = _random_point(syms, rng)
        val = evaluate_at(e, point)
        if val is None:
            continue
        done += 1
        if val.is_Rational:
            if val != 0:
                return False
            continue
        # relative to the largest term, since cancelling terms may be huge
        terms = [evaluate_at(a, point) for a in sp.Add.make_args(e)]
        scale = max([sp.Integer(1)] + [abs(v) for v in terms if v is not None])
        if abs(val) > sp.Float("1e-35") * scale:
            return False
    return True


def is_zero(e, points: int = 5) -> bool:
    """Symbolic zero test, confirmed by evaluation at ``points`` random points."""
    e = sp.sympify(e)
    symbolic = _normalize(e) == 0
    if symbolic != numerically_zero(e, points):
        raise ZeroTestMismatch(f"symbolic and numeric zero tests disagree on {e}")
    return symbolic


def free_of(e: Expression, symbols: Iterable[sp.Symbol]) -> bool:
    return not (sp.sympify(e).free_symbols & set(symbols))


def to_text(e: Expression) -> str:
    """Render with ``^`` for powers; the output parses back with the problem grammar."""
    return sp.sstr(e, order="rev-lex").replace("**", "^")
