"""Monte Carlo sanction races.

A contest is resolved by one Bernoulli draw from the Tullock success
function.  The visibility regime (who used a private channel) only changes
how payments are booked and what an outside observer could see; it never
changes who wins.
"""

from __future__ import annotations

import csv
import enum
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import IO, Sequence

import numpy as np

from . import rng as _rng
from .contest import ContestParams, DomainError, _issuer_win_prob, equilibrium
from .economics import enforcement_cost

log = logging.getLogger(__name__)

DEFAULT_CHUNK = 1 << 16


class Side(str, enum.Enum):
    ISSUER = "issuer"
    EVADER = "evader"


class RegimeVariant(str, enum.Enum):
    PUBLIC_PUBLIC = "PublicPublic"
    MIXED = "Mixed"
    PRIVATE_PRIVATE = "PrivatePrivate"


@dataclass(frozen=True, slots=True)
class ChannelRegime:
    variant: RegimeVariant = RegimeVariant.PUBLIC_PUBLIC
    which_private: Side | None = None

    def __post_init__(self) -> None:
        if self.variant is RegimeVariant.MIXED and self.which_private is None:
            raise ValueError("Mixed regime needs which_private")
        if self.variant is not RegimeVariant.MIXED and self.which_private is not None:
            raise ValueError(f"{self.variant.value} regime takes no which_private")

    @classmethod
    def parse(cls, text: str) -> "ChannelRegime":
        """Accepts ``public``, ``private``, ``mixed:issuer`` or ``mixed:evader``."""
        head, _, tail = text.strip().lower().partition(":")
        if head in ("public", "publicpublic"):
            return cls(RegimeVariant.PUBLIC_PUBLIC)
        if head in ("private", "privateprivate"):
            return cls(RegimeVariant.PRIVATE_PRIVATE)
        if head == "mixed" and tail in ("issuer", "evader"):
            return cls(RegimeVariant.MIXED, Side(tail))
        raise ValueError(f"unknown regime {text!r}")

    def label(self) -> str:
        if self.variant is RegimeVariant.MIXED:
            return f"mixed:{self.which_private.value}"
        return "public" if self.variant is RegimeVariant.PUBLIC_PUBLIC else "private"

    def is_public(self, side: Side) -> bool:
        if self.variant is RegimeVariant.PUBLIC_PUBLIC:
            return True
        if self.variant is RegimeVariant.PRIVATE_PRIVATE:
            return False
        return self.which_private is not side


@dataclass(frozen=True, slots=True)
class BidGrid:
    lo: float
    hi: float
    steps: int

    def __post_init__(self) -> None:
        if self.lo < 0 or self.hi <= self.lo:
            raise ValueError(f"bad bid grid [{self.lo}, {self.hi}]")
        if self.steps < 2:
            raise ValueError("bid grid needs at least 2 points")

    @classmethod
    def by_step(cls, hi: float, step: float, lo: float = 0.0) -> "BidGrid":
        return cls(lo, hi, int(round((hi - lo) / step)) + 1)

    def points(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.steps)


class StrategyKind(str, enum.Enum):
    EQUILIBRIUM = "equilibrium"
    FIXED = "fixed"
    GRID = "grid"


@dataclass(frozen=True, slots=True)
class Strategy:
    kind: StrategyKind = StrategyKind.EQUILIBRIUM
    amount: float | None = None
    grid: BidGrid | None = None

    def __post_init__(self) -> None:
        if self.kind is StrategyKind.FIXED:
            if self.amount is None or not self.amount >= 0 or not math.isfinite(self.amount):
                raise ValueError("FixedBid amount must be a finite value >= 0")
        if self.kind is StrategyKind.GRID and self.grid is None:
            raise ValueError("GridBestResponse needs a grid")

    @classmethod
    def equilibrium(cls) -> "Strategy":
        return cls(StrategyKind.EQUILIBRIUM)

    @classmethod
    def fixed(cls, amount: float) -> "Strategy":
        return cls(StrategyKind.FIXED, amount=float(amount))

    @classmethod
    def grid_best_response(cls, grid: BidGrid) -> "Strategy":
        return cls(StrategyKind.GRID, grid=grid)

    @classmethod
    def parse(cls, text: str) -> "Strategy":
        """``equilibrium``, ``fixed:AMOUNT`` or ``grid:LO:HI:STEPS``."""
        parts = text.strip().lower().split(":")
        if parts == ["equilibrium"]:
            return cls.equilibrium()
        if parts[0] == "fixed" and len(parts) == 2:
            return cls.fixed(float(parts[1]))
        if parts[0] == "grid" and len(parts) == 4:
            return cls.grid_best_response(BidGrid(float(parts[1]), float(parts[2]), int(parts[3])))
        raise ValueError(f"unknown strategy {text!r}")

    def label(self) -> str:
        if self.kind is StrategyKind.FIXED:
            return f"fixed:{self.amount!r}"
        if self.kind is StrategyKind.GRID:
            g = self.grid
            return f"grid:{g.lo!r}:{g.hi!r}:{g.steps}"
        return "equilibrium"


def issuer_best_response(b_B: float, params: ContestParams, grid: BidGrid) -> float:
    cand = grid.points()
    pay = _issuer_win_prob(cand, b_B, params.r) * params.Psi - cand
    # argmax takes the first maximum: ties go to the lower bid
    return float(cand[int(np.argmax(pay))])


def evader_best_response(b_I: float, params: ContestParams, grid: BidGrid) -> float:
    cand = grid.points()
    pay = _issuer_win_prob(cand, b_I, params.r) * (params.V - cand)
    return float(cand[int(np.argmax(pay))])


def resolve_bids(params: ContestParams, strat_I: Strategy, strat_B: Strategy) -> tuple[float, float]:
    if strat_I.kind is StrategyKind.GRID and strat_B.kind is StrategyKind.GRID:
        raise ValueError("unresolvable strategies: both sides best-respond to each other")

    eq = None

    def direct(s: Strategy, side: Side) -> float:
        nonlocal eq
        if s.kind is StrategyKind.FIXED:
            return s.amount
        if eq is None:
            eq = equilibrium(params)
        return eq.b_I if side is Side.ISSUER else eq.b_B

    if strat_I.kind is StrategyKind.GRID:
        b_B = direct(strat_B, Side.EVADER)
        return issuer_best_response(b_B, params, strat_I.grid), b_B
    b_I = direct(strat_I, Side.ISSUER)
    if strat_B.kind is StrategyKind.GRID:
        return b_I, evader_best_response(b_I, params, strat_B.grid)
    return b_I, direct(strat_B, Side.EVADER)


class Winner(str, enum.Enum):
    FREEZE = "Freeze"
    EVADE = "Evade"
    NO_CONTEST = "NoContest"


_CODES = (Winner.FREEZE, Winner.EVADE, Winner.NO_CONTEST)


def _draw_winners(b_I: float, b_B: float, r: float, u: np.ndarray) -> np.ndarray:
    """0 = freeze, 1 = evade, 2 = no contest."""
    if b_I == 0 and b_B == 0:
        return np.full(u.shape, 2, dtype=np.int8)
    p = float(_issuer_win_prob(b_I, b_B, r))
    return np.where(u < p, 0, 1).astype(np.int8)


@dataclass(frozen=True, slots=True)
class ContestOutcome:
    winner: Winner
    b_I: float
    b_B: float
    issuer_paid: float
    evader_paid: float
    proposer_revenue: float
    direct_proposer_payment: float
    observability: dict = field(default_factory=dict)


def _outcome(code: int, b_I: float, b_B: float, regime: ChannelRegime) -> ContestOutcome:
    winner = _CODES[code]
    evader_paid = b_B if winner is Winner.EVADE else 0.0
    direct = evader_paid if regime.variant is RegimeVariant.PRIVATE_PRIVATE else 0.0
    seen = {
        "regime": regime.label(),
        "issuer_bid_public": regime.is_public(Side.ISSUER),
        "evader_bid_public": regime.is_public(Side.EVADER),
    }
    return ContestOutcome(winner, b_I, b_B, b_I, evader_paid, b_I + evader_paid, direct, seen)


def run_contest(
    params: ContestParams,
    strat_I: Strategy,
    strat_B: Strategy,
    regime: ChannelRegime,
    seed: int,
    trial: int = 0,
) -> ContestOutcome:
    """Resolve one contest using substream ``(seed, trial)``."""
    b_I, b_B = resolve_bids(params, strat_I, strat_B)
    u = _rng.to_unit(_rng.trial_words(seed, trial, 1)[:, 0])
    code = int(_draw_winners(b_I, b_B, params.r, u)[0])
    return _outcome(code, b_I, b_B, regime)


@dataclass(frozen=True, slots=True)
class SimReport:
    trials: int
    seed: int
    regime: str
    strategy_I: str
    strategy_B: str
    b_I: float
    b_B: float
    analytic_P_I: float
    freezes: int
    evasions: int
    no_contests: int
    empirical_P_I: float
    ci_radius_P_I: float
    mean_proposer_revenue: float
    stderr_proposer_revenue: float
    mean_direct_proposer_payment: float
    mean_issuer_cost: float
    mean_evader_payoff: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"


TRIAL_COLUMNS = ("trial", "winner", "b_I", "b_B", "issuer_paid", "evader_paid", "proposer_revenue")


def _bernoulli_stderr(p: float, n: int) -> float:
    if n < 2:
        return 0.0
    return math.sqrt(p * (1.0 - p) / (n - 1))


def _map_chunks(fn, chunks, workers: int):
    if workers <= 1:
        return map(fn, chunks)
    pool = ThreadPoolExecutor(max_workers=workers)
    try:
        # results come back in submission order, so reduction order is fixed
        return list(pool.map(fn, chunks))
    finally:
        pool.shutdown()


def run_monte_carlo(
    params: ContestParams,
    strat_I: Strategy,
    strat_B: Strategy,
    regime: ChannelRegime,
    trials: int,
    seed: int,
    *,
    chunk_size: int = DEFAULT_CHUNK,
    workers: int = 1,
    trial_log: IO[str] | None = None,
) -> SimReport:
    if trials < 1:
        raise ValueError("trials must be at least 1")
    seed = _rng.check_seed(seed)
    b_I, b_B = resolve_bids(params, strat_I, strat_B)

    def run_chunk(bounds):
        start, count = bounds
        u = _rng.to_unit(_rng.trial_words(seed, start, count)[:, 0])
        return start, _draw_winners(b_I, b_B, params.r, u)

    writer = None
    if trial_log is not None:
        writer = csv.writer(trial_log, lineterminator="\n")
        writer.writerow(TRIAL_COLUMNS)

    counts = np.zeros(3, dtype=np.int64)
    for start, codes in _map_chunks(run_chunk, _rng.chunk_bounds(trials, chunk_size), workers):
        counts += np.bincount(codes, minlength=3)
        if writer is not None:
            for offset, code in enumerate(codes.tolist()):
                o = _outcome(code, b_I, b_B, regime)
                writer.writerow((start + offset, o.winner.value, repr(b_I), repr(b_B),
                                 repr(o.issuer_paid), repr(o.evader_paid), repr(o.proposer_revenue)))

    freezes, evasions, idle = (int(c) for c in counts)
    p_hat = freezes / trials
    p_evade = evasions / trials
    contested = not (b_I == 0 and b_B == 0)
    report = SimReport(
        trials=trials,
        seed=seed,
        regime=regime.label(),
        strategy_I=strat_I.label(),
        strategy_B=strat_B.label(),
        b_I=b_I,
        b_B=b_B,
        analytic_P_I=float(_issuer_win_prob(b_I, b_B, params.r)) if contested else 0.0,
        freezes=freezes,
        evasions=evasions,
        no_contests=idle,
        empirical_P_I=p_hat,
        ci_radius_P_I=3.0 * math.sqrt(p_hat * (1.0 - p_hat) / trials),
        mean_proposer_revenue=b_I + b_B * p_evade,
        stderr_proposer_revenue=b_B * _bernoulli_stderr(p_evade, trials),
        mean_direct_proposer_payment=(
            b_B * p_evade if regime.variant is RegimeVariant.PRIVATE_PRIVATE else 0.0
        ),
        mean_issuer_cost=params.C_I + b_I,
        mean_evader_payoff=p_evade * (params.V - b_B) - params.C_B,
    )
    log.info("monte carlo: %d trials, P_I=%.6f +- %.6f", trials, p_hat, report.ci_radius_P_I)
    return report


@dataclass(frozen=True, slots=True)
class RepeatedConfig:
    alpha: float
    contests: int
    params: ContestParams
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise DomainError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.contests < 1:
            raise ValueError("contests must be at least 1")
        _rng.check_seed(self.seed)


@dataclass(frozen=True, slots=True)
class RepeatedReport:
    alpha: float
    contests: int
    seed: int
    issuer_blocks: int
    neutral_freezes: int
    neutral_evasions: int
    empirical_cost: float
    stderr_cost: float
    analytic_cost: float
    freeze_rate: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"


def run_repeated(
    cfg: RepeatedConfig,
    strat_B: Strategy | None = None,
    *,
    chunk_size: int = DEFAULT_CHUNK,
    workers: int = 1,
) -> RepeatedReport:
    """Blocks go to an issuer-run proposer with probability alpha (certain
    freeze, cost C_I); otherwise the issuer plays its equilibrium bid in a
    neutral contest.  Cost per block is C_I + bid paid + Psi if evaded."""
    params = cfg.params
    strat_B = strat_B or Strategy.equilibrium()
    b_I, b_B = resolve_bids(params, Strategy.equilibrium(), strat_B)

    def run_chunk(bounds):
        start, count = bounds
        words = _rng.trial_words(cfg.seed, start, count)
        captured = _rng.to_unit(words[:, 0]) < cfg.alpha
        codes = _draw_winners(b_I, b_B, params.r, _rng.to_unit(words[:, 1]))
        neutral = codes[~captured]
        return int(captured.sum()), int((neutral == 0).sum()), int((neutral == 1).sum())

    captured = froze = evaded = 0
    for c, f, e in _map_chunks(run_chunk, _rng.chunk_bounds(cfg.contests, chunk_size), workers):
        captured += c
        froze += f
        evaded += e

    n = cfg.contests
    neutral = n - captured
    # loss above C_I: 0 (captured), b_I (neutral freeze), b_I + Psi (neutral evade)
    excess_mean = (neutral * b_I + evaded * params.Psi) / n
    second = (froze * b_I**2 + evaded * (b_I + params.Psi) ** 2) / n
    var = max(second - excess_mean**2, 0.0)
    stderr = math.sqrt(var / (n - 1)) if n > 1 else 0.0
    return RepeatedReport(
        alpha=cfg.alpha,
        contests=n,
        seed=cfg.seed,
        issuer_blocks=captured,
        neutral_freezes=froze,
        neutral_evasions=evaded,
        empirical_cost=params.C_I + excess_mean,
        stderr_cost=stderr,
        analytic_cost=enforcement_cost(cfg.alpha, params),
        freeze_rate=(captured + froze) / n,
    )


@dataclass(frozen=True, slots=True)
class AdaptiveTrace:
    pairs: tuple[tuple[float, float], ...]
    target: tuple[float, float]

    @property
    def final(self) -> tuple[float, float]:
        return self.pairs[-1]

    @property
    def distance(self) -> float:
        """Max-norm distance of the final pair from the equilibrium bids."""
        return max(abs(self.final[0] - self.target[0]), abs(self.final[1] - self.target[1]))


def run_adaptive(
    params: ContestParams,
    grid: BidGrid,
    rounds: int,
    seed: int = 0,
    start: tuple[float, float] | None = (0.01, 0.01),
    *,
    simultaneous: bool = False,
) -> AdaptiveTrace:
    """Grid best-response dynamics.

    By default the issuer moves first each round and the evader answers the
    updated bid; ``simultaneous=True`` has both answer last round's pair.
    ``start=None`` draws a random starting pair from substream ``(seed, 0)``.
    Convergence is observed, not promised.
    """
    if rounds < 1:
        raise ValueError("rounds must be at least 1")
    if grid.lo != 0 or grid.hi < 2 * params.Psi:
        raise ValueError(f"grid must cover [0, 2 Psi] = [0, {2 * params.Psi}]")
    eq = equilibrium(params)
    if start is None:
        u = _rng.to_unit(_rng.trial_words(seed, 0, 1)[0, :2])
        start = (float(u[0]) * params.Psi, float(u[1]) * params.V)
    b_I, b_B = float(start[0]), float(start[1])
    pairs = [(b_I, b_B)]
    for _ in range(rounds):
        new_I = issuer_best_response(b_B, params, grid)
        new_B = evader_best_response(b_I if simultaneous else new_I, params, grid)
        b_I, b_B = new_I, new_B
        pairs.append((b_I, b_B))
    return AdaptiveTrace(tuple(pairs), (eq.b_I, eq.b_B))


@dataclass(frozen=True, slots=True)
class MicroAuctionReport:
    noise_scale: float
    trials: int
    seed: int
    empirical_P_I: float
    bid_ratios: tuple[float, ...]
    P_I_by_ratio: tuple[float, ...]
    fitted_r: float | None
    residuals: tuple[float, ...]

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"


def _priority_race(b_I: float, b_B: float, noise: float, words: np.ndarray) -> float:
    g_I = _rng.to_normal(words[:, 0])
    g_B = _rng.to_normal(words[:, 1])
    pr_I = b_I * np.exp(noise * g_I)
    pr_B = b_B * np.exp(noise * g_B)
    coin = _rng.to_unit(words[:, 2]) < 0.5
    wins = (pr_I > pr_B) | ((pr_I == pr_B) & coin)
    return float(wins.mean())


def run_gas_auction_micro(
    params: ContestParams,
    latency_noise_scale: float,
    trials: int,
    seed: int,
    bid_ratios: Sequence[float] | None = None,
) -> MicroAuctionReport:
    """Highest effective priority wins, priority = bid * exp(noise * N(0,1)).

    Win rates over a grid of bid ratios are fitted to
    log(P_I/P_B) = r log(b_I/b_B) by least squares through the origin.
    Points with a win rate of exactly 0 or 1 carry no slope information and
    are left out of the fit; with fewer than two usable points the fitted r
    is None.  Exploratory only.
    """
    if latency_noise_scale < 0 or not math.isfinite(latency_noise_scale):
        raise ValueError("latency noise scale must be nonnegative")
    if trials < 1:
        raise ValueError("trials must be at least 1")
    seed = _rng.check_seed(seed)
    ratios = tuple(float(k) for k in (bid_ratios if bid_ratios is not None else np.geomspace(0.5, 2.0, 10)))
    if any(k <= 0 for k in ratios):
        raise ValueError("bid ratios must be positive")
    eq = equilibrium(params)

    base = _priority_race(eq.b_I, eq.b_B, latency_noise_scale, _rng.trial_words(seed, 0, trials))
    rates = []
    for j, k in enumerate(ratios, start=1):
        words = _rng.trial_words(seed, j * trials, trials)
        rates.append(_priority_race(k * eq.b_B, eq.b_B, latency_noise_scale, words))

    xs, ys = [], []
    for k, p in zip(ratios, rates):
        if 0.0 < p < 1.0 and k != 1.0:
            xs.append(math.log(k))
            ys.append(math.log(p / (1.0 - p)))
    fitted = None
    residuals: tuple[float, ...] = ()
    if len(xs) >= 2:
        x = np.array(xs)
        y = np.array(ys)
        fitted = float(x @ y / (x @ x))
        residuals = tuple(float(v) for v in y - fitted * x)
    return MicroAuctionReport(latency_noise_scale, trials, seed, base, ratios, tuple(rates), fitted, residuals)
