import pytest
import sympy as sp
from hypothesis import given, settings

from condsym.jetspace import (
    InconsistentRules,
    JetContext,
    JetError,
    MultiIndex,
    Rule,
    build_manifold,
    choose_leading,
    close_rules,
    multi_indices,
    restrict,
    solve_for_leading,
    total_derivative,
    total_derivative_multi,
)
from condsym.kernel import normalize

from .strategies import CTX, jet_polynomials


def test_mixed_partials_share_a_symbol(ctx2):
    assert ctx2.parse_jet("u_xt") == ctx2.parse_jet("u_tx")
    assert ctx2.decode(ctx2.parse_jet("u_xxt")) == (0, MultiIndex((2, 1)))


def test_names_follow_declaration_order():
    ctx = JetContext(("t", "x"), ("u",), 3)
    assert ctx.parse_jet("u_xt").name == "u_tx"


def test_ambiguous_independent_names_rejected():
    with pytest.raises(JetError):
        JetContext(("x", "xx"), ("u",))


def test_non_jet_names(ctx2):
    assert ctx2.parse_jet("v_x") is None
    assert ctx2.parse_jet("u_y") is None
    assert ctx2.decode(ctx2.x[0]) is None


def test_ranking_prefers_later_variables(ctx2, J):
    assert ctx2.rank_key(J("u_t")) > ctx2.rank_key(J("u_x"))
    assert ctx2.rank_key(J("u_tt")) > ctx2.rank_key(J("u_xx"))
    assert ctx2.rank_key(J("u_xxx")) > ctx2.rank_key(J("u_tt"))


def test_multi_indices_count():
    assert len(multi_indices(2, 3)) == 10
    assert multi_indices(2, 1) == [MultiIndex((0, 0)), MultiIndex((1, 0)), MultiIndex((0, 1))]


def test_total_derivative_of_product(ctx2, J):
    x, t = ctx2.x
    u = ctx2.u[0]
    assert total_derivative(x * u * J("u_x"), 0, ctx2) == normalize(u * J("u_x") + x * J("u_x") ** 2 + x * u * J("u_xx"))
    assert total_derivative(t**2, 0, ctx2) == 0


def test_solve_for_leading(J):
    rule = solve_for_leading(J("u_t") - J("u_xx"), J("u_t"))
    assert rule == Rule(J("u_t"), J("u_xx"))


def test_choose_leading_skips_nonlinear(ctx2, J):
    eq = J("u_tt") ** 2 + J("u_xxxx") + J("u_x")
    assert choose_leading(eq, ctx2) == J("u_xxxx")


def test_close_rules_depth_one(ctx2, J):
    M = close_rules([Rule(J("u_t"), J("u_xx"))], ctx2, 1)
    assert M[J("u_tx")] == J("u_xxx")
    assert M[J("u_tt")] == J("u_xxt")


def test_close_rules_depth_two_reaches_fourth_order(ctx2, J):
    M = close_rules([Rule(J("u_t"), J("u_xx"))], ctx2, 2)
    assert restrict(J("u_tt"), M) == J("u_xxxx")


def test_close_rules_conflict_is_detected(ctx2, J):
    u = ctx2.u[0]
    with pytest.raises(InconsistentRules):
        close_rules([Rule(J("u_x"), u), Rule(J("u_xx"), 2 * u)], ctx2, 1)
    M = close_rules([Rule(J("u_x"), u), Rule(J("u_xx"), 2 * u)], ctx2, 1, strict=False)
    assert M.conflicts


def test_manifold_detects_empty_system(ctx2, J):
    u = ctx2.u[0]
    M = build_manifold(ctx2, [(J("u_x") - u, None), (J("u_x") - u - 1, None)], 1)
    assert M.empty


def test_restrict_with_on_demand_consequences(ctx2, J):
    M = build_manifold(ctx2, [(J("u_t") - J("u_xx"), None)], 2)
    assert restrict(J("u_tt") - J("u_xxxx"), M) == 0


@settings(max_examples=100, deadline=None)
@given(jet_polynomials())
def test_total_derivatives_commute(f):
    assert normalize(total_derivative_multi(f, (1, 1), CTX) - total_derivative(total_derivative(f, 1, CTX), 0, CTX)) == 0


@settings(max_examples=100, deadline=None)
@given(jet_polynomials(), jet_polynomials())
def test_leibniz_rule(f, g):
    for i in range(CTX.p):
        lhs = total_derivative(f * g, i, CTX)
        rhs = f * total_derivative(g, i, CTX) + g * total_derivative(f, i, CTX)
        assert normalize(lhs - rhs) == 0
