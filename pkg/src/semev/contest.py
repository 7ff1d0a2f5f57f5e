"""Single-block issuer-vs-evader Tullock(r) ordering contest.

The issuer bids to freeze a balance and values winning at ``Psi`` (the
regulatory loss it avoids); the evader bids to move the balance out and
values winning at ``V``.  Issuer expenditure is all-pay, evader expenditure
is paid only when the evasion lands.

Everything here is a pure function of its arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MIN_PRIZE_RATIO = 2.0
PHI_RTOL = 1e-10
MAX_ITER = 200
_MAX_DOUBLINGS = 1100


class DomainError(ValueError):
    """Input lies outside the region where the contest equilibrium is defined."""


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True, slots=True)
class ContestParams:
    """One contest instance, all monetary values in a common USD unit."""

    V: float
    Psi: float
    r: float = 1.0
    C_I: float = 0.0
    C_B: float = 0.0

    def __post_init__(self) -> None:
        for name in ("V", "Psi", "r", "C_I", "C_B"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise DomainError(f"{name} must be finite, got {value!r}")
        if self.V <= 0:
            raise DomainError(f"V must be positive, got {self.V}")
        if self.Psi <= 0:
            raise DomainError(f"Psi must be positive, got {self.Psi}")
        if self.r < 1:
            raise DomainError(f"r must be >= 1, got {self.r}")
        if self.C_I < 0 or self.C_B < 0:
            raise DomainError("participation costs must be nonnegative")

    @property
    def prize_ratio(self) -> float:
        return self.Psi / self.V

    def scaled(self, lam: float) -> "ContestParams":
        """Scale both prizes by ``lam``; costs are left alone."""
        return ContestParams(self.V * lam, self.Psi * lam, self.r, self.C_I, self.C_B)

    def with_costs(self, C_I: float, C_B: float) -> "ContestParams":
        return ContestParams(self.V, self.Psi, self.r, C_I, C_B)


@dataclass(frozen=True, slots=True)
class WinProbs:
    """Contest success probabilities.

    Both entries are zero when neither side bids: the block leaves the state
    untouched and there is no winner.  Unpacks as ``P_I, P_B``.
    """

    P_I: float
    P_B: float

    @property
    def no_contest(self) -> bool:
        return self.P_I == 0.0 and self.P_B == 0.0

    def __iter__(self):
        yield self.P_I
        yield self.P_B


@dataclass(frozen=True, slots=True)
class Equilibrium:
    s_star: float
    P_I: float
    P_B: float
    b_I: float
    b_B: float
    T_star: float
    U_I: float
    U_B: float
    phi_residual: float

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in self.__dataclass_fields__}


@dataclass(frozen=True, slots=True)
class NashAudit:
    grid_points: int
    max_gain_I: float
    max_gain_B: float
    tol: float
    passed: bool


@dataclass(frozen=True, slots=True)
class NashGrid:
    """Uniform grid of candidate deviations; ``hi=None`` means max(2 b_I, 2 b_B)."""

    lo: float = 0.0
    hi: float | None = None
    steps: int = 100_000


MIN_AUDIT_STEPS = 10_000


def success_fn(b_I: float, b_B: float, r: float) -> WinProbs:
    if b_I < 0 or b_B < 0:
        raise DomainError("bids must be nonnegative")
    if r < 1:
        raise DomainError(f"r must be >= 1, got {r}")
    if b_I == 0 and b_B == 0:
        return WinProbs(0.0, 0.0)
    # ratio form keeps b**r from overflowing for large bids
    if b_I >= b_B:
        q = (b_B / b_I) ** r
        return WinProbs(1.0 / (1.0 + q), q / (1.0 + q))
    q = (b_I / b_B) ** r
    return WinProbs(q / (1.0 + q), 1.0 / (1.0 + q))


def _issuer_win_prob(b_I, b_B, r):
    """Vectorised P_I with the (0, 0) -> 0 convention."""
    b_I = np.asarray(b_I, dtype=float)
    b_B = np.asarray(b_B, dtype=float)
    top = np.maximum(b_I, b_B)
    safe = np.where(top > 0, top, 1.0)
    xi = (b_I / safe) ** r
    xb = (b_B / safe) ** r
    den = xi + xb
    return np.where(den > 0, xi / np.where(den > 0, den, 1.0), 0.0)


def _evader_win_prob(b_I, b_B, r):
    return _issuer_win_prob(b_B, b_I, r)


def phi(s: float, r: float) -> float:
    """Left side of the fixed-point equation, divided through: Phi(s*) = Psi/V."""
    if not s > 0:
        raise DomainError(f"s must be positive, got {s}")
    x = s**r
    # s (1+x)^2 / (1+(1+r)x) rearranged so the square never overflows
    return s * (1.0 + x) * ((1.0 + x) / (1.0 + (1.0 + r) * x))


def _dlog_phi(s: float, r: float) -> float:
    x = s**r
    return 1.0 / s + 2.0 * r * x / (s * (1.0 + x)) - (1.0 + r) * r * x / (s * (1.0 + (1.0 + r) * x))


def solve_intensity_ratio(prize_ratio: float, r: float) -> float:
    """Return the unique s* > 1 with phi(s*, r) == prize_ratio.

    Bisection on a doubling bracket [1, s_hi], with Newton steps accepted only
    when they land strictly inside the current bracket.
    """
    if not math.isfinite(prize_ratio) or prize_ratio < MIN_PRIZE_RATIO:
        raise DomainError(f"prize ratio below 2 (got {prize_ratio})")
    if r < 1:
        raise DomainError(f"r must be >= 1, got {r}")

    lo, hi = 1.0, 2.0
    for _ in range(_MAX_DOUBLINGS):
        if phi(hi, r) > prize_ratio:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise ConvergenceError(f"could not bracket s* for prize ratio {prize_ratio}")

    s = 0.5 * (lo + hi)
    for _ in range(MAX_ITER):
        f = phi(s, r) - prize_ratio
        if abs(f) <= PHI_RTOL * prize_ratio:
            return s
        if f > 0:
            hi = s
        else:
            lo = s
        step = (phi(s, r) - prize_ratio) / (phi(s, r) * _dlog_phi(s, r))
        cand = s - step
        if lo < cand < hi and abs(step) < 0.5 * (hi - lo):
            s = cand
        else:
            s = 0.5 * (lo + hi)
        if hi - lo <= 4 * math.ulp(hi):
            break

    if abs(phi(s, r) - prize_ratio) <= PHI_RTOL * prize_ratio:
        return s
    raise ConvergenceError(
        f"phi residual above {PHI_RTOL} after {MAX_ITER} iterations "
        f"(prize_ratio={prize_ratio}, r={r})"
    )


def equilibrium(params: ContestParams) -> Equilibrium:
    ratio = params.prize_ratio
    if ratio < MIN_PRIZE_RATIO:
        raise DomainError(f"prize ratio below 2 (Psi/V = {ratio})")
    r = params.r
    s = solve_intensity_ratio(ratio, r)
    x = s**r
    P_I = x / (1.0 + x)
    P_B = 1.0 / (1.0 + x)
    b_I = params.Psi * r * P_I * P_B
    b_B = r * P_I * params.V / (1.0 + r * P_I)
    T = b_I + P_B * b_B
    U_I = P_I * params.Psi - b_I - params.C_I
    U_B = P_B * (params.V - b_B) - params.C_B
    residual = abs(phi(s, r) - ratio) / ratio
    return Equilibrium(s, P_I, P_B, b_I, b_B, T, U_I, U_B, residual)


def issuer_payoff(b_I, b_B, params: ContestParams):
    return _issuer_win_prob(b_I, b_B, params.r) * params.Psi - np.asarray(b_I, dtype=float) - params.C_I


def evader_payoff(b_I, b_B, params: ContestParams):
    return _evader_win_prob(b_I, b_B, params.r) * (params.V - np.asarray(b_B, dtype=float)) - params.C_B


def verify_nash(
    eq: Equilibrium,
    params: ContestParams,
    grid: NashGrid | None = None,
    tol: float | None = None,
) -> NashAudit:
    """Brute-force check that neither side gains by a unilateral grid deviation."""
    grid = grid or NashGrid()
    if grid.steps < MIN_AUDIT_STEPS:
        raise ValueError(f"audit grid needs at least {MIN_AUDIT_STEPS} points, got {grid.steps}")
    needed = max(2 * eq.b_I, 2 * eq.b_B)
    hi = needed if grid.hi is None else grid.hi
    if grid.lo != 0 or hi < needed:
        raise ValueError(f"audit grid must cover [0, {needed}]")
    if tol is None:
        tol = 1e-6 * max(params.V, params.Psi)

    cand = np.linspace(grid.lo, hi, grid.steps)
    base_I = float(issuer_payoff(eq.b_I, eq.b_B, params))
    base_B = float(evader_payoff(eq.b_I, eq.b_B, params))
    gain_I = float(np.max(issuer_payoff(cand, eq.b_B, params)) - base_I)
    gain_B = float(np.max(evader_payoff(eq.b_I, cand, params)) - base_B)
    return NashAudit(grid.steps, gain_I, gain_B, tol, gain_I <= tol and gain_B <= tol)


@dataclass(frozen=True, slots=True)
class LargePsiCheck:
    N: float
    r: float
    threshold: float
    P_I_at_threshold: float
    ratios: tuple[float, ...]
    P_I: tuple[float, ...]
    holds: bool


def check_lemma_large_psi(N: float, r: float, samples: int = 10, span: float = 1e4) -> LargePsiCheck:
    """Check P_I* >= 1 - 1/N (and s* >= (N-1)^(1/r)) once Psi/V >= N (N-1)^(1/r).

    The threshold and ``samples`` log-spaced ratios up to ``span`` times it are
    solved.  Thresholds below 2 fall outside the solver's domain, so sampling
    starts at 2 in that case.
    """
    if not N > 1:
        raise DomainError(f"N must exceed 1, got {N}")
    if r < 1:
        raise DomainError(f"r must be >= 1, got {r}")
    threshold = N * (N - 1) ** (1.0 / r)
    start = max(threshold, MIN_PRIZE_RATIO)
    ratios = np.geomspace(start, start * span, samples + 1)
    bound = 1.0 - 1.0 / N
    s_bound = (N - 1) ** (1.0 / r)
    probs = []
    holds = True
    for ratio in ratios:
        eq = equilibrium(ContestParams(1.0, float(ratio), r))
        probs.append(eq.P_I)
        holds = holds and eq.P_I >= bound and eq.s_star >= s_bound
    return LargePsiCheck(N, r, threshold, probs[0], tuple(map(float, ratios)), tuple(probs), holds)


@dataclass(frozen=True, slots=True)
class PositiveUtilityCheck:
    x: float
    proof_condition: bool
    utility_condition: bool

    @property
    def passes(self) -> bool:
        return self.proof_condition and self.utility_condition

    @property
    def consistent(self) -> bool:
        return self.proof_condition == self.utility_condition


def check_positive_utility(params: ContestParams) -> PositiveUtilityCheck:
    """Issuer's gross equilibrium payoff U_I + C_I is positive iff (s*)^r > r - 1."""
    eq = equilibrium(params)
    x = eq.s_star**params.r
    return PositiveUtilityCheck(x, x > params.r - 1, eq.U_I + params.C_I > 0)
