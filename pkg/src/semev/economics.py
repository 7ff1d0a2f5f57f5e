"""Quantities derived from the contest equilibrium: MEV tax, issuer
enforcement cost under a proposer share, and the solo-vs-delegate choice."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .contest import ContestParams, DomainError, equilibrium, solve_intensity_ratio


@dataclass(frozen=True, slots=True)
class MevTaxPoint:
    prize_ratio: float
    r: float
    s_star: float
    tax_over_V: float
    asymptote_gap: float


def tax_over_v_closed_form(s_star: float, r: float) -> float:
    """T*/V written purely in terms of the intensity ratio."""
    x = s_star**r
    return r * x / (1.0 + (1.0 + r) * x) * (s_star + 1.0 / (1.0 + x))


def mev_tax(params: ContestParams) -> MevTaxPoint:
    eq = equilibrium(params)
    tax = eq.T_star / params.V
    gap = tax - params.r / (1.0 + params.r) * eq.s_star
    return MevTaxPoint(params.prize_ratio, params.r, eq.s_star, tax, gap)


def _check_alpha(alpha: float) -> None:
    if not 0.0 <= alpha <= 1.0:
        raise DomainError(f"alpha must lie in [0, 1], got {alpha}")


def contest_exposure(params: ContestParams) -> float:
    """b_I* + P_B* Psi: the issuer's expected loss in a neutral block, net of C_I."""
    eq = equilibrium(params)
    return eq.b_I + eq.P_B * params.Psi


def enforcement_cost(alpha: float, params: ContestParams) -> float:
    _check_alpha(alpha)
    return params.C_I + (1.0 - alpha) * contest_exposure(params)


@dataclass(frozen=True, slots=True)
class EnforcementCostCurve:
    alpha_grid: tuple[float, ...]
    cost: tuple[float, ...]
    slope: float
    T_star: float

    @property
    def bound_holds(self) -> bool:
        return -self.slope >= 2.0 / 3.0 * self.T_star


def enforcement_cost_curve(params: ContestParams, alpha_steps: int = 11) -> EnforcementCostCurve:
    if alpha_steps < 2:
        raise ValueError("alpha_steps must be at least 2")
    eq = equilibrium(params)
    exposure = eq.b_I + eq.P_B * params.Psi
    alphas = np.linspace(0.0, 1.0, alpha_steps)
    cost = tuple(params.C_I + (1.0 - a) * exposure for a in alphas)
    return EnforcementCostCurve(tuple(map(float, alphas)), cost, -exposure, eq.T_star)


def _solo_factor(prize_ratio: float, r: float) -> float:
    s = solve_intensity_ratio(prize_ratio, r)
    return 1.0 + (1.0 + r) * s**r


def solo_payoff(V_i: float, prize_ratio: float, r: float, C_B: float = 0.0) -> float:
    """Evader payoff when contesting (Psi_i, V_i) alone; linear in V_i."""
    if V_i <= 0:
        raise DomainError("V_i must be positive")
    if C_B < 0:
        raise DomainError("C_B must be nonnegative")
    return V_i / _solo_factor(prize_ratio, r) - C_B


def solo_breakeven(prize_ratio: float, r: float, C_B: float) -> float:
    """Smallest balance at which acting solo stops losing money."""
    if not C_B > 0:
        raise DomainError("C_B must be positive")
    return C_B * _solo_factor(prize_ratio, r)


@dataclass(frozen=True, slots=True)
class DelegationScenario:
    V_i: tuple[float, ...]
    prize_ratio: float
    r: float = 1.0
    C_B: float = 0.0
    f: float = 0.1
    V: float | None = None
    Psi_i: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if not self.V_i:
            raise DomainError("need at least one evader")
        if any(v <= 0 for v in self.V_i):
            raise DomainError("every V_i must be positive")
        if self.C_B < 0:
            raise DomainError("C_B must be nonnegative")
        if not 0.0 < self.f < 1.0:
            raise DomainError(f"commission f must lie in (0, 1), got {self.f}")
        total = math.fsum(self.V_i)
        if self.V is not None and not math.isclose(total, self.V, rel_tol=1e-9):
            raise DomainError(f"sum of V_i ({total}) differs from V ({self.V})")
        if self.Psi_i is not None:
            if len(self.Psi_i) != len(self.V_i):
                raise DomainError("Psi_i and V_i lengths differ")
            for psi, v in zip(self.Psi_i, self.V_i):
                # the closed-form solo payoff needs one common ratio
                if not math.isclose(psi / v, self.prize_ratio, rel_tol=1e-9):
                    raise DomainError("heterogeneous Psi_i/V_i ratios are not supported")

    @classmethod
    def equal_split(cls, n: int, V: float, prize_ratio: float, r: float = 1.0,
                    C_B: float = 0.0, f: float = 0.1) -> "DelegationScenario":
        if n < 1:
            raise DomainError("n must be positive")
        return cls(tuple([V / n] * n), prize_ratio, r, C_B, f, V=V)

    @property
    def n(self) -> int:
        return len(self.V_i)

    @property
    def total_V(self) -> float:
        return self.V if self.V is not None else math.fsum(self.V_i)


@dataclass(frozen=True, slots=True)
class EvaderChoice:
    V_i: float
    solo: float
    delegate: float

    @property
    def prefers_delegate(self) -> bool:
        return self.delegate > self.solo


@dataclass(frozen=True, slots=True)
class DelegationResult:
    U_S_gross: float
    evaders: tuple[EvaderChoice, ...]


def delegation_analysis(scn: DelegationScenario) -> DelegationResult:
    V = scn.total_V
    eq = equilibrium(ContestParams(V, scn.prize_ratio * V, scn.r))
    gross = eq.P_B * (V - eq.b_B)
    choices = []
    for v in scn.V_i:
        solo = solo_payoff(v, scn.prize_ratio, scn.r, scn.C_B)
        delegate = (1.0 - scn.f) * (v / V) * (gross - scn.C_B)
        choices.append(EvaderChoice(v, solo, delegate))
    return DelegationResult(gross, tuple(choices))
