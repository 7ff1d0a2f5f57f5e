"""Inter-transaction gap threshold from the first valley of a log-gap KDE."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .config import PipelineConfig
from .events import AddressHistory

log = logging.getLogger(__name__)


class UnimodalGapsError(ValueError):
    """No usable valley in the gap density; the caller has to supply tau."""


@dataclass(frozen=True)
class TauEstimate:
    tau: float
    source: str  # "kde", "fallback" or "given"
    n_gaps: int
    bandwidth: float | None = None
    peak: float | None = None


def pooled_gaps(histories: Iterable[AddressHistory]) -> np.ndarray:
    out = []
    for hist in histories:
        times = np.fromiter((e.block_time for e in hist.entries), dtype=np.int64)
        if times.size > 1:
            out.append(np.diff(times))
    return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)


def silverman_bandwidth(x: np.ndarray) -> float:
    sd = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
    q75, q25 = np.percentile(x, [75, 25])
    iqr = float(q75 - q25)
    spread = min(sd, iqr / 1.34) if iqr > 0 else sd
    return 0.9 * spread * x.size ** (-0.2)


def gaussian_kde_grid(x: np.ndarray, grid: np.ndarray, bw: float, block: int = 4096) -> np.ndarray:
    dens = np.zeros_like(grid)
    for i in range(0, x.size, block):
        z = (grid[None, :] - x[i:i + block, None]) / bw
        dens += np.exp(-0.5 * z * z).sum(axis=0)
    return dens / (x.size * bw * np.sqrt(2.0 * np.pi))


def first_valley(density: np.ndarray, min_depth: float) -> tuple[int, int]:
    """Index of the first local maximum and of the first sufficiently deep
    local minimum after it.

    A minimum counts when both the highest point before it (back to the first
    maximum) and the highest point after it exceed it by ``min_depth``.
    """
    n = density.size
    peak = None
    for i in range(n):
        left = density[i - 1] if i > 0 else -np.inf
        right = density[i + 1] if i < n - 1 else -np.inf
        if density[i] > left and density[i] >= right:
            peak = i
            break
    if peak is None:
        raise UnimodalGapsError("unimodal gap distribution")
    for i in range(peak + 1, n - 1):
        if density[i] < density[i - 1] and density[i] <= density[i + 1]:
            rise_left = density[peak:i].max() - density[i]
            rise_right = density[i + 1:].max() - density[i]
            if min(rise_left, rise_right) >= min_depth:
                return peak, i
    raise UnimodalGapsError("unimodal gap distribution")


def estimate_gap_threshold(gaps, cfg: PipelineConfig | None = None) -> TauEstimate:
    """Place tau at the first prominent valley of the log10-gap density.

    Zero gaps are clamped to one second.  With fewer than ``cfg.min_gaps``
    gaps the configured fallback tau is returned.
    """
    cfg = cfg or PipelineConfig()
    g = np.asarray(gaps, dtype=float)
    if g.size and np.any(g < 0):
        raise ValueError("gaps must be nonnegative")
    if g.size < cfg.min_gaps:
        log.info("only %d gaps; using fallback tau %.1f s", g.size, cfg.fallback_tau)
        return TauEstimate(cfg.fallback_tau, "fallback", int(g.size))
    x = np.log10(np.maximum(g, 1.0))
    bw = silverman_bandwidth(x)
    if not bw > 0:
        raise UnimodalGapsError("unimodal gap distribution")
    grid = np.linspace(x.min(), x.max(), cfg.kde_grid_points)
    dens = gaussian_kde_grid(x, grid, bw)
    peak, valley = first_valley(dens, cfg.valley_depth * dens.max())
    tau = float(10.0 ** grid[valley])
    log.info("tau = %.1f s from %d gaps (bandwidth %.3f decades)", tau, g.size, bw)
    return TauEstimate(tau, "kde", int(g.size), bw, float(10.0 ** grid[peak]))
