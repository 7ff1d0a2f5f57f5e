"""End-to-end pipeline: ingest, filter, segment, classify, time and regime-label."""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Iterable

from .config import PipelineConfig
from .episodes import EPISODE_COLUMNS, IntentEpisode, classify_materiality, compute_delta, segment_episodes
from .events import (
    AMOUNT_EXP,
    AddressCategory,
    SanctionEvent,
    TransferEvent,
    ingest_events,
    transfers_digest,
)
from .filters import adversarial_filter, first_blacklist, semantic_filter
from .gaps import TauEstimate, estimate_gap_threshold, pooled_gaps
from .regimes import RegimeModel, assign_regime, fit_regime_model, select_boundaries

log = logging.getLogger(__name__)


@dataclass
class PipelineResult:
    episodes: list[IntentEpisode]
    tau: TauEstimate
    regime_model: RegimeModel | None
    boundaries: tuple[float, float, float]
    funnel: dict[str, int]
    removed: dict[str, str]
    committed_window: dict
    input_digest: str
    notes: list[str] = field(default_factory=list)

    def episodes_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(EPISODE_COLUMNS)
        for ep in self.episodes:
            writer.writerow(ep.row())
        return buf.getvalue()

    def regimes_json(self) -> str:
        doc = {
            "boundaries_used": list(self.boundaries),
            "model": None if self.regime_model is None else self.regime_model.to_dict(),
            "tau": {"value": self.tau.tau, "source": self.tau.source, "n_gaps": self.tau.n_gaps,
                    "bandwidth": self.tau.bandwidth},
            "notes": self.notes,
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def run_pipeline(
    transfers: Iterable[TransferEvent],
    sanctions: Iterable[SanctionEvent],
    labels: dict[str, AddressCategory] | None = None,
    cfg: PipelineConfig | None = None,
    tau: float | None = None,
) -> PipelineResult:
    cfg = cfg or PipelineConfig()
    transfers = list(transfers)
    ledger = ingest_events(transfers, sanctions, labels)

    sed = semantic_filter(ledger)
    aed = adversarial_filter(ledger, sed)
    histories = [ledger.histories[k] for k in aed.retained]
    notes: list[str] = []

    if tau is not None:
        tau_est = TauEstimate(float(tau), "given", 0)
    else:
        tau_est = estimate_gap_threshold(pooled_gaps(histories), cfg)

    episodes: list[IntentEpisode] = []
    window_count, window_value = 0, Decimal(0)
    for key in aed.retained:
        sanction = first_blacklist(ledger.sanctions[key])
        for ep in segment_episodes(ledger.histories[key], tau_est.tau):
            ep.is_evasion = classify_materiality(ep, cfg)
            ep.delta = compute_delta(ep, sanction)
            if ep.final_outflow_time == sanction.t_exec:
                log.debug("outflow tie at t_exec for %s; delta left empty", key[0])
            if (ep.is_evasion and sanction.t_submit is not None and ep.final_outflow_time is not None
                    and sanction.t_submit <= ep.final_outflow_time < sanction.t_exec):
                window_count += 1
                window_value += ep.V_out
            episodes.append(ep)

    deltas = [ep.delta for ep in episodes if ep.is_evasion and ep.delta is not None]
    model = None
    if len(deltas) >= 10 * cfg.k_min:
        model = fit_regime_model(deltas, cfg)
    else:
        notes.append(f"only {len(deltas)} evasion deltas; no regime model fitted")

    boundaries = tuple(float(b) for b in cfg.default_boundaries)
    if cfg.boundary_mode == "fitted":
        if model is not None and len(model.boundaries) >= 3:
            boundaries = select_boundaries(model.boundaries, cfg.default_boundaries)
        else:
            notes.append("fewer than 3 fitted valleys; default boundaries used")
    for ep in episodes:
        if ep.is_evasion and ep.delta is not None:
            ep.regime = assign_regime(ep.delta, boundaries)

    funnel = {
        "raw_sanctioned": len(ledger.sanctions),
        "sed": len(sed.retained),
        "aed": len(aed.retained),
        "transactions": sum(len(h.entries) for h in histories),
        "episodes": len(episodes),
        "evasion_episodes": sum(ep.is_evasion for ep in episodes),
        "evasion_episodes_with_delta": len(deltas),
    }
    removed = {f"{a}/{t}": why for (a, t), why in {**sed.removed, **aed.removed}.items()}
    log.info("pipeline funnel: %s", funnel)
    return PipelineResult(
        episodes=episodes,
        tau=tau_est,
        regime_model=model,
        boundaries=boundaries,
        funnel=funnel,
        removed=dict(sorted(removed.items())),
        committed_window={"episodes": window_count, "outflow": str(window_value.quantize(AMOUNT_EXP))},
        input_digest=transfers_digest(transfers),
        notes=notes,
    )
