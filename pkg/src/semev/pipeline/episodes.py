"""Intent episodes: segmentation, materiality and timing relative to enforcement."""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal

from .config import PipelineConfig
from .events import ZERO, AddressHistory, SanctionEvent
from .regimes import RegimeLabel

EPISODE_COLUMNS = (
    "address", "token", "tx_ids", "start_time", "end_time", "B_start", "inflow_sum",
    "V_out", "L_episode", "final_outflow_time", "delta", "is_evasion", "regime",
    "net_inbound",
)


@dataclass
class IntentEpisode:
    address: str
    token: str
    tx_ids: list[str]
    start_time: int
    end_time: int
    B_start: Decimal
    inflow_sum: Decimal
    V_out: Decimal
    L_episode: Decimal
    final_outflow_time: int | None = None
    delta: int | None = None
    is_evasion: bool = False
    regime: RegimeLabel | None = None
    # inflows exceed outflows; "final net outflow" is then only nominal
    net_inbound: bool = False

    def row(self) -> list[str]:
        def opt(v):
            return "" if v is None else str(v)

        return [
            self.address, self.token, ";".join(self.tx_ids), str(self.start_time),
            str(self.end_time), str(self.B_start), str(self.inflow_sum), str(self.V_out),
            str(self.L_episode), opt(self.final_outflow_time), opt(self.delta),
            "true" if self.is_evasion else "false",
            "" if self.regime is None else self.regime.value,
            "true" if self.net_inbound else "false",
        ]


def segment_episodes(history: AddressHistory, tau: float) -> list[IntentEpisode]:
    """Split a time-ordered history wherever consecutive transactions are
    at least ``tau`` seconds apart."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    entries = history.entries
    episodes: list[IntentEpisode] = []
    i = 0
    while i < len(entries):
        j = i + 1
        while j < len(entries) and entries[j].block_time - entries[j - 1].block_time < tau:
            j += 1
        run = entries[i:j]
        b_start = entries[i - 1].balance if i > 0 else ZERO
        inflow = sum((e.inflow for e in run), ZERO)
        outflow = sum((e.outflow for e in run), ZERO)
        ep = IntentEpisode(
            address=history.address,
            token=history.token,
            tx_ids=[e.tx_id for e in run],
            start_time=run[0].block_time,
            end_time=run[-1].block_time,
            B_start=b_start,
            inflow_sum=inflow,
            V_out=outflow,
            L_episode=b_start + inflow,
            net_inbound=inflow > outflow,
        )
        out_times = [e.block_time for e in run if e.outflow > 0]
        ep.final_outflow_time = out_times[-1] if out_times else None
        episodes.append(ep)
        i = j
    return episodes


def classify_materiality(episode: IntentEpisode, cfg: PipelineConfig | None = None) -> bool:
    cfg = cfg or PipelineConfig()
    if episode.L_episode <= 0:
        return False
    # V_out / L >= alpha, kept in exact arithmetic
    return episode.V_out >= cfg.beta and episode.V_out >= cfg.alpha_decimal * episode.L_episode


def compute_delta(episode: IntentEpisode, sanction: SanctionEvent) -> int | None:
    """Seconds from the episode's last outflow to enforcement.

    None when the episode moved nothing out, or when that outflow is at or
    after ``t_exec`` (same-second ties depend on in-block ordering).
    """
    final = episode.final_outflow_time
    if final is None or final >= sanction.t_exec:
        return None
    return sanction.t_exec - final
