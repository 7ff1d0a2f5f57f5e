from __future__ import annotations

import numpy as np
import pytest

from semev.contest import ContestParams, DomainError, equilibrium
from semev.economics import (
    DelegationScenario,
    contest_exposure,
    delegation_analysis,
    enforcement_cost,
    enforcement_cost_curve,
    mev_tax,
    solo_breakeven,
    solo_payoff,
    tax_over_v_closed_form,
)

from .conftest import sweep_instances


def test_tax_closed_form_matches_equilibrium():
    for ratio, r in sweep_instances(50, seed=8):
        params = ContestParams(2.0, 2.0 * ratio, r)
        eq = equilibrium(params)
        # both sides agree up to the solver's 1e-10 intensity residual
        assert tax_over_v_closed_form(eq.s_star, r) == pytest.approx(eq.T_star / params.V, rel=1e-9)


def test_reference_tax():
    point = mev_tax(ContestParams(1.0, 2.0, 1.0))
    assert point.tax_over_V == pytest.approx(0.6447977056, abs=1e-9)


@pytest.mark.parametrize("r", [1.0, 2.0, 4.0])
def test_tax_increasing_and_divergent(r):
    ratios = np.geomspace(2.0, 1e6, 80)
    tax = [mev_tax(ContestParams(1.0, float(k), r)).tax_over_V for k in ratios]
    assert all(b > a for a, b in zip(tax, tax[1:]))
    assert tax[-1] > 10.0 * tax[0]


@pytest.mark.parametrize("r", [1.0, 2.0, 4.0])
def test_tax_asymptote(r):
    point = mev_tax(ContestParams(1.0, 1e4, r))
    target = r / (1 + r) * point.s_star
    assert abs(point.tax_over_V - target) <= 0.01 * target


def test_enforcement_cost_endpoints_and_affinity():
    params = ContestParams(1.0, 2.0, 1.0, C_I=0.25)
    eq = equilibrium(params)
    assert enforcement_cost(1.0, params) == 0.25
    assert enforcement_cost(0.0, params) == pytest.approx(0.25 + eq.b_I + eq.P_B * 2.0, rel=1e-15)
    curve = enforcement_cost_curve(params, alpha_steps=21)
    alphas = np.asarray(curve.alpha_grid)
    line = curve.cost[0] + curve.slope * alphas
    assert np.max(np.abs(np.asarray(curve.cost) - line) / np.abs(curve.cost[0])) <= 1e-12
    assert curve.slope == pytest.approx(-contest_exposure(params))


def test_reference_enforcement_cost():
    # C_I + b_I + P_B Psi = 1.3429230828 at (1, 2, 1): numerically equal to s*
    assert enforcement_cost(0.0, ContestParams(1.0, 2.0, 1.0)) == pytest.approx(1.3429230828, abs=1e-9)


def test_slope_bound_on_sweep():
    for ratio, r in sweep_instances(200):
        assert enforcement_cost_curve(ContestParams(1.0, ratio, r), alpha_steps=2).bound_holds


@pytest.mark.parametrize("alpha", [-0.1, 1.1])
def test_alpha_domain(alpha):
    with pytest.raises(DomainError):
        enforcement_cost(alpha, ContestParams(1.0, 2.0, 1.0))


def test_solo_payoff_is_standalone_contest():
    for v in (0.5, 3.0, 40.0):
        eq = equilibrium(ContestParams(v, 5.0 * v, 2.0))
        assert solo_payoff(v, 5.0, 2.0, C_B=0.1) == pytest.approx(eq.U_B - 0.1, rel=1e-12)


def test_solo_breakeven():
    v_min = solo_breakeven(2.0, 1.0, 0.5)
    # 1 + 2 s* at ratio 2, r = 1
    assert v_min == pytest.approx(0.5 * 3.685846165554, rel=1e-10)
    assert solo_payoff(0.99 * v_min, 2.0, 1.0, 0.5) < 0 < solo_payoff(1.01 * v_min, 2.0, 1.0, 0.5)
    assert solo_payoff(v_min, 2.0, 1.0, 0.5) == pytest.approx(0.0, abs=1e-12)


def test_small_evaders_delegate():
    scn = DelegationScenario.equal_split(10, 10.0, 2.0, r=1.0, C_B=0.5, f=0.1)
    result = delegation_analysis(scn)
    assert result.U_S_gross == pytest.approx(2.713081217, abs=1e-8)
    assert len(result.evaders) == 10
    for ev in result.evaders:
        assert ev.solo == pytest.approx(0.2713081217 - 0.5, abs=1e-9)
        assert ev.delegate == pytest.approx(0.9 * 0.1 * (2.713081217 - 0.5), abs=1e-8)
        assert ev.solo < 0 < ev.delegate
        assert ev.prefers_delegate


def test_commission_limits():
    big = delegation_analysis(DelegationScenario.equal_split(1, 5.0, 3.0, f=0.1))
    ev = big.evaders[0]
    assert ev.solo > ev.delegate == pytest.approx(0.9 * ev.solo, rel=1e-12)
    greedy = delegation_analysis(DelegationScenario.equal_split(10, 10.0, 2.0, f=0.999999))
    assert all(abs(e.delegate) < 1e-6 for e in greedy.evaders)


def test_delegation_gross_matches_pooled_contest():
    scn = DelegationScenario((1.0, 2.0, 3.0), prize_ratio=4.0, r=2.0)
    result = delegation_analysis(scn)
    eq = equilibrium(ContestParams(6.0, 24.0, 2.0))
    assert result.U_S_gross == pytest.approx(eq.U_B, rel=1e-12)
    shares = [ev.delegate for ev in result.evaders]
    assert sum(shares) == pytest.approx(0.9 * eq.U_B, rel=1e-12)


@pytest.mark.parametrize("kwargs", [
    dict(V_i=(), prize_ratio=2.0),
    dict(V_i=(1.0, -1.0), prize_ratio=2.0),
    dict(V_i=(1.0,), prize_ratio=2.0, f=1.0),
    dict(V_i=(1.0,), prize_ratio=2.0, f=0.0),
    dict(V_i=(1.0, 1.0), prize_ratio=2.0, V=3.0),
    dict(V_i=(1.0, 1.0), prize_ratio=2.0, Psi_i=(2.0, 3.0)),
])
def test_scenario_validation(kwargs):
    with pytest.raises(DomainError):
        DelegationScenario(**kwargs)
