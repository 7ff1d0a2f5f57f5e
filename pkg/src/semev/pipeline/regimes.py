"""Temporal regimes of pre-enforcement outflow.

A Gaussian mixture is fitted to log(delta) with BIC choosing the number of
components; the valleys of the fitted density are candidate regime cut
points.  The mixture is used as a density estimator, not as a clustering:
components are never interpreted one by one.
"""

from __future__ import annotations

import enum
import itertools
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .config import DEFAULT_BOUNDARIES, PipelineConfig

log = logging.getLogger(__name__)

VARIANCE_FLOOR = 1e-6
BOUNDARY_GRID = 2048
MAX_EM_ITER = 2000
EM_TOL = 1e-8  # per-sample log-likelihood improvement


class RegimeLabel(str, enum.Enum):
    RACE = "Race"
    TACTICAL_REACTIVE = "TacticalReactive"
    STRATEGIC_MIGRATION = "StrategicMigration"
    LONG_TAIL = "LongTail"


def _check_boundaries(boundaries: Sequence[float]) -> tuple[float, float, float]:
    b = tuple(boundaries)
    if len(b) != 3:
        raise ValueError(f"need exactly three boundaries, got {len(b)}")
    if not (0 < b[0] < b[1] < b[2]):
        raise ValueError(f"boundaries must be positive and strictly increasing: {b}")
    return b


def assign_regime(delta: float, boundaries: Sequence[float] = DEFAULT_BOUNDARIES) -> RegimeLabel:
    b1, b2, b3 = _check_boundaries(boundaries)
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if delta <= b1:
        return RegimeLabel.RACE
    if delta <= b2:
        return RegimeLabel.TACTICAL_REACTIVE
    if delta <= b3:
        return RegimeLabel.STRATEGIC_MIGRATION
    return RegimeLabel.LONG_TAIL


def assign_regimes(deltas: Sequence[float], boundaries: Sequence[float] | None = None) -> list[RegimeLabel]:
    b = _check_boundaries(DEFAULT_BOUNDARIES if boundaries is None else boundaries)
    return [assign_regime(d, b) for d in deltas]


@dataclass(frozen=True)
class RegimeModel:
    k: int
    weights: tuple[float, ...]
    means: tuple[float, ...]
    variances: tuple[float, ...]
    bic: float
    log_likelihood: float
    n: int
    boundaries: tuple[float, ...]
    bic_by_k: dict[int, float] = field(default_factory=dict)

    def density(self, x: np.ndarray) -> np.ndarray:
        """Mixture density in log(delta) space."""
        w = np.asarray(self.weights)
        mu = np.asarray(self.means)
        var = np.asarray(self.variances)
        z = (np.asarray(x)[:, None] - mu) ** 2 / var
        return (w * np.exp(-0.5 * z) / np.sqrt(2 * np.pi * var)).sum(axis=1)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["bic_by_k"] = {str(k): v for k, v in sorted(self.bic_by_k.items())}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


class CollapseError(RuntimeError):
    pass


def _log_components(x, w, mu, var):
    """log(w_j N(x_i | mu_j, var_j)) with shape (restarts, k, n).

    Components sit on the middle axis so reductions over them run across
    contiguous rows, which is much faster than reducing a short last axis.
    """
    return (np.log(w)[:, :, None] - 0.5 * np.log(2 * np.pi * var)[:, :, None]
            - 0.5 * (x[None, None, :] - mu[:, :, None]) ** 2 / var[:, :, None])


def _e_step(x: np.ndarray, w, mu, var):
    """Per-restart log-likelihood and responsibilities, with one exp pass."""
    logp = _log_components(x, w, mu, var)
    m = logp.max(axis=1, keepdims=True)
    e = np.exp(logp - m)
    tot = e.sum(axis=1, keepdims=True)
    ll = (m + np.log(tot))[:, 0, :].sum(axis=1)
    return ll, e / tot


def _em_batch(x: np.ndarray, mu0: np.ndarray, var0: float, floor: bool):
    """EM for a stack of restarts (rows of ``mu0``), each run to its own convergence.

    Returns (w, mu, var, ll, ok); ``ok`` is False for restarts that collapsed
    (empty component, non-finite likelihood, or a variance under the floor
    when ``floor`` is off).  Finished rows drop out of the working set.
    """
    n = x.size
    R, k = mu0.shape
    w = np.full((R, k), 1.0 / k)
    mu = mu0.astype(float).copy()
    var = np.full((R, k), var0)
    ll = np.full(R, -np.inf)
    ok = np.ones(R, dtype=bool)
    idx = np.arange(R)
    prev = np.full(R, -np.inf)
    xs = x[None, None, :]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for _ in range(MAX_EM_ITER):
            if idx.size == 0:
                break
            cur, resp = _e_step(x, w[idx], mu[idx], var[idx])
            finite = np.isfinite(cur)
            ok[idx[~finite]] = False
            ll[idx] = cur
            done = ~finite | (cur - prev[idx] < EM_TOL * n)
            prev[idx] = cur
            nk = resp.sum(axis=2)
            empty = np.any(nk < 1e-10, axis=1) & ~done
            ok[idx[empty]] = False
            safe = np.where(nk > 0, nk, 1.0)
            new_mu = (resp @ x) / safe
            new_var = (resp * (xs - new_mu[:, :, None]) ** 2).sum(axis=2) / safe
            if floor:
                new_var = np.maximum(new_var, VARIANCE_FLOOR)
            else:
                low = np.any(new_var < VARIANCE_FLOOR, axis=1) & ~done & ~empty
                ok[idx[low]] = False
                empty |= low
            keep = ~(done | empty)
            upd = idx[keep]
            w[upd], mu[upd], var[upd] = nk[keep] / n, new_mu[keep], new_var[keep]
            idx = upd
        else:
            # iteration cap hit: score the parameters actually returned
            if idx.size:
                ll[idx] = _e_step(x, w[idx], mu[idx], var[idx])[0]
                ok[idx] &= np.isfinite(ll[idx])
    return w, mu, var, ll, ok


def _initial_means(x: np.ndarray, k: int, cfg: PipelineConfig) -> np.ndarray:
    rows = [(np.arange(k) + 0.5) / k]
    for restart in range(1, cfg.gmm_restarts):
        rows.append(np.sort(np.random.default_rng((cfg.seed, k, restart)).uniform(0, 1, k)))
    return np.quantile(x, np.array(rows))


def _fit_k(x: np.ndarray, k: int, cfg: PipelineConfig):
    """Best of ``cfg.gmm_restarts`` EM runs; collapsed runs are redone with a
    variance floor.  None when every restart collapses."""
    spread = float(np.var(x)) if x.size > 1 else 1.0
    var0 = max(spread / k**2, 10 * VARIANCE_FLOOR)
    mu0 = _initial_means(x, k, cfg)
    w, mu, var, ll, ok = _em_batch(x, mu0, var0, floor=False)
    if not ok.all():
        redo = ~ok
        w2, mu2, var2, ll2, ok2 = _em_batch(x, mu0[redo], var0, floor=True)
        w[redo], mu[redo], var[redo], ll[redo], ok[redo] = w2, mu2, var2, ll2, ok2
        log.debug("k=%d: %d restarts collapsed, %d recovered with floor", k, int(redo.sum()), int(ok2.sum()))
    if not ok.any():
        return None
    best = int(np.argmax(np.where(ok, ll, -np.inf)))
    return w[best], mu[best], var[best], float(ll[best])


def density_valleys(model_density, lo: float, hi: float, points: int = BOUNDARY_GRID) -> list[float]:
    grid = np.linspace(lo, hi, points)
    d = model_density(grid)
    idx = [i for i in range(1, points - 1) if d[i] < d[i - 1] and d[i] <= d[i + 1]]
    return [float(grid[i]) for i in idx]


def fit_regime_model(deltas: Sequence[float], cfg: PipelineConfig | None = None) -> RegimeModel:
    """BIC-selected 1-D mixture on log(delta); deterministic given cfg.seed."""
    cfg = cfg or PipelineConfig()
    d = np.asarray(deltas, dtype=float)
    if d.size == 0 or np.any(d <= 0):
        raise ValueError("need a nonempty list of positive deltas")
    x = np.log(d)
    n = x.size
    k_hi = min(cfg.k_max, n // 10)
    if k_hi < cfg.k_min:
        raise ValueError(f"{n} deltas are too few for k >= {cfg.k_min} (need 10 per component)")

    best = None
    bic_by_k: dict[int, float] = {}
    for k in range(cfg.k_min, k_hi + 1):
        fit = _fit_k(x, k, cfg)
        if fit is None:
            continue
        bic = -2.0 * fit[3] + (3 * k - 1) * math.log(n)
        bic_by_k[k] = float(bic)
        if best is None or bic < best[0]:
            best = (bic, k, fit)
    if best is None:
        raise CollapseError("every EM restart collapsed")

    bic, k, (w, mu, var, ll) = best
    model = RegimeModel(k, tuple(map(float, w)), tuple(map(float, mu)), tuple(map(float, var)),
                        float(bic), ll, n, (), bic_by_k)
    if x.max() > x.min():
        valleys = density_valleys(model.density, float(x.min()), float(x.max()))
    else:
        valleys = []
    bounds = tuple(float(np.exp(v)) for v in valleys)
    log.info("regime model: k=%d, BIC=%.2f, %d valleys", k, bic, len(bounds))
    return RegimeModel(k, model.weights, model.means, model.variances, bic, ll, n, bounds, bic_by_k)


def select_boundaries(valleys: Sequence[float], reference: Sequence[float] = DEFAULT_BOUNDARIES) -> tuple[float, float, float]:
    """Pick the three valleys closest (in log10, summed) to the reference cuts."""
    ref = np.log10(_check_boundaries(reference))
    vals = sorted(valleys)
    if len(vals) < 3:
        raise ValueError(f"need at least 3 fitted valleys, got {len(vals)}")
    logs = np.log10(vals)
    best = min(itertools.combinations(range(len(vals)), 3),
               key=lambda c: float(np.abs(logs[list(c)] - ref).sum()))
    return tuple(vals[i] for i in best)
