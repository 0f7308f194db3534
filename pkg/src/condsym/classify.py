"""Symmetry taxonomy: invariance, exact symmetry, conditional and partial symmetries.

Every verdict below conditional symmetry depends on a finite budget: the
consequence depth used when restricting to a manifold and ``sigma_max``, the
longest Delta-chain examined. Both are carried in the report.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import sympy as sp

from .jetspace import (
    JetContext,
    JetError,
    ManifoldRules,
    Rule,
    build_manifold,
    choose_leading,
    close_rules,
    restrict,
    solve_for_leading,
)
from .kernel import Expression, is_zero, normalize
from .liefield import ProlongedField, VectorField, apply_prolonged, evolutionary_characteristic, prolong

log = logging.getLogger(__name__)

DEFAULT_SIGMA_MAX = 5


class DegenerateField(JetError):
    """The invariant surface condition is identically zero."""


@dataclass(frozen=True)
class PdeProblem:
    ctx: JetContext
    equations: tuple[Expression, ...]
    leading: tuple[sp.Symbol | None, ...] = ()
    depth: int | None = None
    name: str = ""

    def __post_init__(self):
        eqs = tuple(normalize(e) for e in self.equations)
        if not eqs:
            raise ValueError("a problem needs at least one equation")
        for e in eqs:
            if e == 0:
                raise ValueError("equations must be nonzero")
            if not self.ctx.jets_in(e):
                raise ValueError(f"equation {e} involves no dependent variable")
        leading = tuple(self.leading) or (None,) * len(eqs)
        if len(leading) != len(eqs):
            raise ValueError("one leading derivative (or None) per equation")
        named = [l for l in leading if l is not None]
        if len(set(named)) != len(named):
            raise ValueError("leading derivatives must be distinct")
        object.__setattr__(self, "equations", eqs)
        object.__setattr__(self, "leading", leading)
        order = max(self.ctx.order_of(e) for e in eqs)
        if order > self.ctx.order:
            object.__setattr__(self, "ctx", self.ctx.with_order(order))

    @property
    def order(self) -> int:
        return max(self.ctx.order_of(e) for e in self.equations)

    @property
    def consequence_depth(self) -> int:
        return self.order if self.depth is None else self.depth

    def with_depth(self, depth: int | None) -> "PdeProblem":
        return replace(self, depth=depth)

    def solved(self) -> list[Rule]:
        out = []
        for eq, lead in zip(self.equations, self.leading):
            out.append(solve_for_leading(eq, lead if lead is not None else choose_leading(eq, self.ctx)))
        return out


@dataclass(frozen=True)
class DeltaChain:
    """``[Delta, X*(Delta), X*(X*(Delta)), ...]`` as computed, one tuple per step."""

    elements: tuple[tuple[Expression, ...], ...]
    stabilized: bool
    with_invariant_surface: bool
    depth: int
    manifold: ManifoldRules | None = None

    @property
    def sigma(self) -> int | None:
        return len(self.elements) if self.stabilized else None

    def __len__(self) -> int:
        return len(self.elements)

    def system(self) -> list[Expression]:
        return [e for step in self.elements for e in step]


@dataclass(frozen=True)
class ClassificationReport:
    field: VectorField
    problem: PdeProblem
    verdict: str
    sigma: int | None
    chain: DeltaChain | None
    depth: int
    sigma_max: int
    multiplier: sp.ImmutableMatrix | None = None
    reduced_system: tuple[Expression, ...] | None = None
    notes: tuple[str, ...] = ()
    witnesses: tuple = ()

    @property
    def determinate(self) -> bool:
        return self.verdict != UNDETERMINED


INVARIANCE = "invariance"
EXACT = "exact"
STANDARD_CS = "standard-cs"
WEAK_CS = "weak-cs-candidate"
WEAK_CS_CERTIFIED = "weak-cs-certified"
PARTIAL = "partial-symmetry-candidate"
PARTIAL_CERTIFIED = "partial-symmetry-certified"
UNDETERMINED = "undetermined"


def _prolonged(X: VectorField, P: PdeProblem) -> ProlongedField:
    if X.ctx != P.ctx:
        X = VectorField(P.ctx, X.xi, X.phi, X.name)
    return prolong(X, max(P.order, 1))


def check_invariance(X: VectorField, P: PdeProblem) -> bool:
    """``X*(Delta_a)`` vanishes identically for every equation."""
    Xs = _prolonged(X, P)
    return all(is_zero(apply_prolonged(Xs, eq)) for eq in P.equations)


def _hadamard_multipliers(images: Sequence[Expression], P: PdeProblem) -> sp.ImmutableMatrix | None:
    # Replace each leading derivative by the value that makes its equation equal
    # a fresh symbol d_b; then F(d) - F(0) splits into d_b-divisible pieces.
    rules = P.solved()
    leads = [r.lhs for r in rules]
    for b, eq in enumerate(P.equations):
        if any(eq.has(l) for c, l in enumerate(leads) if c != b):
            return None
    deltas = [sp.Dummy(f"d{b}") for b in range(len(rules))]
    inverse = {}
    for b, (eq, lead) in enumerate(zip(P.equations, leads)):
        inverse[lead] = solve_for_leading(normalize(eq - deltas[b]), lead).rhs
    G = []
    for image in images:
        F = normalize(image.xreplace(inverse))
        row = []
        partial = {d: 0 for d in deltas}
        prev = normalize(F.xreplace(partial))
        for b in range(len(deltas) - 1, -1, -1):
            partial.pop(deltas[b])
            cur = normalize(F.xreplace(partial))
            q = normalize((cur - prev) / deltas[b])
            row.insert(0, q)
            prev = cur
        tail = normalize(F.xreplace({d: 0 for d in deltas}))
        if tail != 0:
            return None
        back = {d: eq for d, eq in zip(deltas, P.equations)}
        row = [normalize(g.xreplace(back)) for g in row]
        if any(g.has(*deltas) for g in row):
            return None
        G.append(row)
    return sp.ImmutableMatrix(G)


def exact_symmetry(X: VectorField, P: PdeProblem) -> tuple[bool, sp.ImmutableMatrix | None]:
    """``(symmetric, G)``; ``G`` is ``None`` when symmetric but no multiplier was found."""
    Xs = _prolonged(X, P)
    images = [apply_prolonged(Xs, eq) for eq in P.equations]
    M = build_manifold(P.ctx, list(zip(P.equations, P.leading)), P.consequence_depth)
    if not all(is_zero(restrict(img, M)) for img in images):
        return False, None
    G = _hadamard_multipliers(images, P)
    if G is None and len(P.equations) == 1:
        q = normalize(images[0] / P.equations[0])
        _, den = sp.fraction(q)
        if not is_zero(restrict(den, M)):
            G = sp.ImmutableMatrix([[q]])
    if G is not None:
        for a, img in enumerate(images):
            combo = sum((G[a, b] * P.equations[b] for b in range(len(P.equations))), sp.Integer(0))
            if not is_zero(img - combo):
                return True, None
    return True, G


def check_exact(X: VectorField, P: PdeProblem) -> sp.ImmutableMatrix | None:
    """Multiplier matrix ``G`` with ``X*(Delta) = G Delta``, or ``None`` when not symmetric."""
    symmetric, G = exact_symmetry(X, P)
    return G if symmetric else None


def invariant_surface_rules(X: VectorField, P: PdeProblem) -> ManifoldRules:
    """Solve ``Q = 0`` for a first-order jet (or for ``u`` when ``xi = 0``) and close."""
    ctx = P.ctx
    Q = evolutionary_characteristic(VectorField(ctx, X.xi, X.phi, X.name))
    rules = []
    for a, q in enumerate(Q):
        candidates = [ctx.first_order(a, i) for i in range(ctx.p) if X.xi[i] != 0]
        if not candidates:
            if X.phi[a] == 0:
                raise DegenerateField(f"field {X.name} has zero characteristic for {ctx.dependents[a]}")
            rules.append(solve_for_leading(q, ctx.u[a]))
            continue
        lead = max(candidates, key=ctx.rank_key)
        rules.append(solve_for_leading(q, lead))
    if all(c == 0 for c in X.xi) and all(c == 0 for c in X.phi):
        raise DegenerateField(f"field {X.name} is zero")
    return close_rules(rules, ctx, P.consequence_depth, strict=False)


def delta_chain(
    X: VectorField,
    P: PdeProblem,
    sigma_max: int = DEFAULT_SIGMA_MAX,
    invariant_surface: bool = False,
) -> DeltaChain:
    """Iterate ``Delta^(k) = X*(Delta^(k-1))`` until the next element vanishes on the
    manifold of the previous ones (optionally with the invariant surface rules).
    """
    if sigma_max < 1:
        raise ValueError("sigma_max must be at least 1")
    Xs = _prolonged(X, P)
    depth = P.consequence_depth
    base = invariant_surface_rules(X, P).rules if invariant_surface else ()
    elements = [P.equations]
    manifold = None
    for k in range(1, sigma_max + 1):
        eqs = [(e, P.leading[a] if j == 0 else None) for j, step in enumerate(elements) for a, e in enumerate(step)]
        manifold = build_manifold(P.ctx, eqs, depth, base=base)
        nxt = tuple(apply_prolonged(Xs, e) for e in elements[-1])
        if manifold.empty:
            log.info("manifold of the first %d chain elements is empty", k)
            return DeltaChain(tuple(elements), False, invariant_surface, depth, manifold)
        if all(is_zero(restrict(e, manifold)) for e in nxt):
            return DeltaChain(tuple(elements), True, invariant_surface, depth, manifold)
        if k < sigma_max:
            elements.append(nxt)
    return DeltaChain(tuple(elements), False, invariant_surface, depth, manifold)


@dataclass(frozen=True)
class PartialSymmetry:
    sigma: int
    system: tuple[Expression, ...]
    chain: DeltaChain


def check_partial(X: VectorField, P: PdeProblem, sigma_max: int = DEFAULT_SIGMA_MAX) -> PartialSymmetry | None:
    """Order and generating system ``Delta = ... = Delta^(sigma-1) = 0`` of a partial symmetry."""
    chain = delta_chain(X, P, sigma_max, invariant_surface=False)
    if not chain.stabilized:
        return None
    return PartialSymmetry(chain.sigma, tuple(chain.system()), chain)


def _reduced_system(X: VectorField, P: PdeProblem, notes: list[str]):
    from .canonical import CanonicalError, derive_canonical_coordinates, reduce, s_form_decompose, transform_pde

    if not X.projectable:
        return None
    try:
        cc = derive_canonical_coordinates(X)
        transformed = transform_pde(P, cc)
        parts = [s_form_decompose(eq, cc.adapted) for eq in transformed.equations]
        return tuple(e for part in parts for e in reduce(part))
    except (CanonicalError, NotImplementedError, ValueError) as exc:
        notes.append(f"reduced system unavailable: {exc}")
        return None


def classify(
    X: VectorField,
    P: PdeProblem,
    sigma_max: int = DEFAULT_SIGMA_MAX,
    with_reduction: bool = False,
) -> ClassificationReport:
    """Strongest applicable verdict: invariance, exact, standard CS, weak CS candidate."""
    if sigma_max < 1:
        raise ValueError("sigma_max must be at least 1")
    depth = P.consequence_depth
    notes: list[str] = []
    report = dict(field=X, problem=P, depth=depth, sigma_max=sigma_max)
    if check_invariance(X, P):
        zero = sp.ImmutableMatrix.zeros(len(P.equations), len(P.equations))
        return ClassificationReport(verdict=INVARIANCE, sigma=1, chain=None, multiplier=zero, **report)
    symmetric, G = exact_symmetry(X, P)
    if symmetric:
        if G is None:
            notes.append("symmetric but multiplier G not found")
        return ClassificationReport(verdict=EXACT, sigma=1, chain=None, multiplier=G, notes=tuple(notes), **report)
    chain = delta_chain(X, P, sigma_max, invariant_surface=True)
    if chain.manifold is not None and chain.manifold.empty:
        notes.append("augmented system has no solutions")
    if not chain.stabilized:
        return ClassificationReport(verdict=UNDETERMINED, sigma=None, chain=chain, notes=tuple(notes), **report)
    reduced = _reduced_system(X, P, notes) if with_reduction else None
    verdict = STANDARD_CS if chain.sigma == 1 else WEAK_CS
    return ClassificationReport(
        verdict=verdict, sigma=chain.sigma, chain=chain, reduced_system=reduced, notes=tuple(notes), **report
    )


def partial_report(X: VectorField, P: PdeProblem, sigma_max: int = DEFAULT_SIGMA_MAX) -> ClassificationReport:
    """Report for the partial-symmetry route (no invariant surface condition)."""
    chain = delta_chain(X, P, sigma_max, invariant_surface=False)
    verdict = PARTIAL if chain.stabilized else UNDETERMINED
    return ClassificationReport(
        field=X,
        problem=P,
        verdict=verdict,
        sigma=chain.sigma,
        chain=chain,
        depth=P.consequence_depth,
        sigma_max=sigma_max,
    )
