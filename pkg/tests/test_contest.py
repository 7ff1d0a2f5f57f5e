from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.optimize import brentq

from semev.contest import (
    ContestParams,
    DomainError,
    NashGrid,
    check_lemma_large_psi,
    check_positive_utility,
    equilibrium,
    evader_payoff,
    issuer_payoff,
    phi,
    solve_intensity_ratio,
    success_fn,
    verify_nash,
)

from .conftest import sweep_instances


def cubic_root(ratio: float) -> float:
    """r = 1: s(1+s)^2 = R(1+2s), i.e. s^3 + 2s^2 + (1-2R)s - R = 0, by bisection."""
    f = lambda s: s**3 + 2 * s**2 + (1 - 2 * ratio) * s - ratio
    return brentq(f, 1.0, ratio + 2.0, xtol=1e-15, rtol=1e-15)


def foc_oracle(V: float, Psi: float, r: float) -> tuple[float, float]:
    """Bids from the two first-order conditions, without the intensity equation.

    With t = b_B / b_I, P_I = 1 / (1 + t^r) and dP_I/db_I = r P_I P_B / b_I, the
    issuer's condition gives b_I = r P_I P_B Psi and the evader's
    r P_I (V - b_B) = b_B.  Consistency b_B / b_I = t is a scalar root in t.
    """

    def bids(t):
        p_i = 1.0 / (1.0 + t**r)
        return r * p_i * (1.0 - p_i) * Psi, r * p_i * V / (1.0 + r * p_i)

    def gap(t):
        b_i, b_b = bids(t)
        return b_b - t * b_i

    t = brentq(gap, 1e-12, 1.0, xtol=1e-16, rtol=1e-15)
    return bids(t)


# values at V=1, Psi=2, r=1 from the cubic oracle above
S_STAR = 1.3429230827771705
P_I = 0.5731827445
B_I = 0.4892885718
B_B = 0.3643459392
T_STAR = 0.6447977056
U_I = 0.6570769172
U_B = 0.2713081217


def test_success_fn_basic():
    p = success_fn(1.0, 1.0, 3.0)
    assert (p.P_I, p.P_B) == (0.5, 0.5)
    p = success_fn(2.0, 1.0, 1.0)
    assert p.P_I == pytest.approx(2 / 3)
    assert p.P_I + p.P_B == pytest.approx(1.0, abs=1e-15)


def test_success_fn_no_contest():
    p = success_fn(0.0, 0.0, 2.0)
    assert p.no_contest and tuple(p) == (0.0, 0.0)
    assert tuple(success_fn(0.0, 1.0, 2.0)) == (0.0, 1.0)


def test_success_fn_overflow_safe():
    p = success_fn(1e300, 1e299, 6.0)
    assert p.P_I == pytest.approx(1.0 / (1.0 + 1e-6))


@pytest.mark.parametrize("args", [(-1.0, 1.0, 1.0), (1.0, 1.0, 0.5)])
def test_success_fn_domain(args):
    with pytest.raises(DomainError):
        success_fn(*args)


def test_reference_point_matches_cubic_oracle():
    assert cubic_root(2.0) == pytest.approx(S_STAR, rel=1e-14)
    eq = equilibrium(ContestParams(1.0, 2.0, 1.0))
    assert eq.s_star == pytest.approx(S_STAR, rel=1e-10)
    assert eq.P_I == pytest.approx(P_I, abs=1e-9)
    assert eq.b_I == pytest.approx(B_I, abs=1e-9)
    assert eq.b_B == pytest.approx(B_B, abs=1e-9)
    assert eq.T_star == pytest.approx(T_STAR, abs=1e-9)
    assert eq.U_I == pytest.approx(U_I, abs=1e-9)
    assert eq.U_B == pytest.approx(U_B, abs=1e-9)
    assert eq.phi_residual <= 1e-10


@pytest.mark.parametrize("ratio", [2.0, 3.7, 50.0, 1e3, 1e4])
def test_r1_against_cubic(ratio):
    assert solve_intensity_ratio(ratio, 1.0) == pytest.approx(cubic_root(ratio), rel=1e-10)


@pytest.mark.parametrize("V,Psi,r", [(1.0, 2.0, 1.0), (3.0, 40.0, 2.5), (0.2, 900.0, 6.0), (5.0, 10.0, 4.0)])
def test_bids_against_first_order_conditions(V, Psi, r):
    b_I, b_B = foc_oracle(V, Psi, r)
    eq = equilibrium(ContestParams(V, Psi, r))
    assert eq.b_I == pytest.approx(b_I, rel=1e-8)
    assert eq.b_B == pytest.approx(b_B, rel=1e-8)


def test_two_dimensional_grid_oracle():
    """Brute-force best responses on a 2-D grid land next to the solver's bids."""
    params = ContestParams(1.0, 4.0, 2.0)
    eq = equilibrium(params)
    grid = np.linspace(0.0, 3.0, 3001)
    br_I = grid[np.argmax(issuer_payoff(grid, eq.b_B, params))]
    br_B = grid[np.argmax(evader_payoff(eq.b_I, grid, params))]
    assert abs(br_I - eq.b_I) <= 1e-3
    assert abs(br_B - eq.b_B) <= 1e-3


def test_prize_ratio_gate():
    with pytest.raises(DomainError, match="prize ratio below 2"):
        equilibrium(ContestParams(1.0, 1.5, 1.0))
    with pytest.raises(DomainError):
        solve_intensity_ratio(1.99, 2.0)


@pytest.mark.parametrize("kwargs", [dict(V=0.0, Psi=2.0), dict(V=1.0, Psi=-1.0), dict(V=1.0, Psi=2.0, r=0.9),
                                    dict(V=1.0, Psi=2.0, C_I=-1.0), dict(V=math.nan, Psi=2.0)])
def test_params_validation(kwargs):
    with pytest.raises(DomainError):
        ContestParams(**kwargs)


def test_scale_invariance():
    base = equilibrium(ContestParams(1.0, 7.0, 3.0))
    scaled = equilibrium(ContestParams(1.0, 7.0, 3.0).scaled(250.0))
    assert scaled.s_star == pytest.approx(base.s_star, rel=1e-12)
    assert scaled.P_I == pytest.approx(base.P_I, rel=1e-12)
    assert scaled.b_I == pytest.approx(250.0 * base.b_I, rel=1e-10)
    assert scaled.T_star == pytest.approx(250.0 * base.T_star, rel=1e-10)


def test_costs_shift_utilities_only():
    a = equilibrium(ContestParams(1.0, 5.0, 2.0))
    b = equilibrium(ContestParams(1.0, 5.0, 2.0, C_I=0.1, C_B=0.05))
    assert (b.b_I, b.b_B, b.P_I) == (a.b_I, a.b_B, a.P_I)
    assert b.U_I == pytest.approx(a.U_I - 0.1)
    assert b.U_B == pytest.approx(a.U_B - 0.05)


def test_phi_increasing_from_one():
    s = np.geomspace(1.0, 1e6, 500)
    for r in (1.0, 2.0, 6.0, 8.0):
        vals = [phi(float(x), r) for x in s]
        assert all(b > a for a, b in zip(vals, vals[1:]))
    assert math.isfinite(phi(1e150, 1.0))


def test_phi_random_pairs():
    rng = np.random.default_rng(5)
    for _ in range(1000):
        s1, s2 = sorted(10.0 ** rng.uniform(0.0, 6.0, 2))
        r = rng.uniform(1.0, 8.0)
        if s1 < s2:
            assert phi(s1, r) < phi(s2, r)


def test_nash_audit_passes_at_equilibrium():
    params = ContestParams(1.0, 2.0, 1.0)
    audit = verify_nash(equilibrium(params), params)
    assert audit.passed and audit.grid_points == 100_000


def test_nash_audit_catches_off_equilibrium():
    params = ContestParams(1.0, 2.0, 1.0)
    eq = equilibrium(params)
    bad = type(eq)(**{**eq.as_dict(), "b_I": eq.b_I * 0.5})
    assert not verify_nash(bad, params).passed


def test_nash_audit_rejects_coarse_grid():
    params = ContestParams(1.0, 2.0, 1.0)
    with pytest.raises(ValueError):
        verify_nash(equilibrium(params), params, NashGrid(steps=100))
    with pytest.raises(ValueError):
        verify_nash(equilibrium(params), params, NashGrid(hi=0.1))


def test_equilibrium_bounds_on_sweep():
    for ratio, r in sweep_instances(100, seed=3):
        eq = equilibrium(ContestParams(1.0, ratio, r))
        assert eq.P_I > 0.5
        assert eq.T_star > r / (r + 2.0)


@pytest.mark.parametrize("N", [2, 3, 5, 10])
@pytest.mark.parametrize("r", [1, 2, 4])
def test_large_psi_bound(N, r):
    check = check_lemma_large_psi(N, r)
    assert check.holds
    assert check.threshold == pytest.approx(N * (N - 1) ** (1 / r))


def test_large_psi_bound_fails_below_threshold():
    # well under the threshold the probability bound no longer holds
    eq = equilibrium(ContestParams(1.0, 2.0, 1.0))
    assert eq.P_I < 1 - 1 / 10


def test_positive_utility_conditions_agree():
    for ratio, r in sweep_instances(100, seed=4):
        check = check_positive_utility(ContestParams(1.0, ratio, r))
        assert check.passes and check.consistent
