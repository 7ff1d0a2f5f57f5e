from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal

DEFAULT_BOUNDARIES = (242, 95_514, 7_614_341)
# observed on the real USDT/USDC data; documentation only
REFERENCE_TAU = 107.0


@dataclass(frozen=True)
class PipelineConfig:
    alpha: float = 0.10
    beta: Decimal = Decimal(1000)
    k_min: int = 1
    k_max: int = 50
    kde_grid_points: int = 512
    gmm_restarts: int = 8
    seed: int = 0
    default_boundaries: tuple[int, int, int] = DEFAULT_BOUNDARIES
    fallback_tau: float = REFERENCE_TAU
    min_gaps: int = 100
    valley_depth: float = 0.01
    boundary_mode: str = "default"

    def __post_init__(self) -> None:
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        object.__setattr__(self, "beta", Decimal(str(self.beta)))
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if not 1 <= self.k_min <= self.k_max:
            raise ValueError("k range must be nonempty and start at 1 or above")
        if self.kde_grid_points < 3:
            raise ValueError("kde grid needs at least 3 points")
        if self.gmm_restarts < 1:
            raise ValueError("need at least one EM restart")
        if self.boundary_mode not in ("default", "fitted"):
            raise ValueError("boundary_mode must be 'default' or 'fitted'")
        b = tuple(self.default_boundaries)
        if len(b) != 3 or not b[0] < b[1] < b[2]:
            raise ValueError("default boundaries must be three increasing cut points")

    @property
    def alpha_decimal(self) -> Decimal:
        return Decimal(str(self.alpha))
