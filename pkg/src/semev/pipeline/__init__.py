"""Behavioral-abstraction pipeline over sanctioned-address event logs."""

from .config import DEFAULT_BOUNDARIES, PipelineConfig
from .episodes import IntentEpisode, classify_materiality, compute_delta, segment_episodes
from .evaluate import EvalReport, evaluate_pipeline
from .events import (
    AddressCategory,
    AddressLabel,
    MalformedRowError,
    SanctionEvent,
    SanctionKind,
    TransferEvent,
    ingest_events,
    read_labels,
    read_sanctions,
    read_transfers,
)
from .filters import adversarial_filter, semantic_filter
from .gaps import UnimodalGapsError, estimate_gap_threshold
from .regimes import RegimeLabel, RegimeModel, assign_regime, assign_regimes, fit_regime_model, select_boundaries
from .run import PipelineResult, run_pipeline
from .synth import SynthConfig, synth_generate, write_synth

__all__ = [
    "DEFAULT_BOUNDARIES", "PipelineConfig", "IntentEpisode", "classify_materiality",
    "compute_delta", "segment_episodes", "EvalReport", "evaluate_pipeline", "AddressCategory",
    "AddressLabel", "MalformedRowError", "SanctionEvent", "SanctionKind", "TransferEvent",
    "ingest_events", "read_labels", "read_sanctions", "read_transfers", "adversarial_filter",
    "semantic_filter", "UnimodalGapsError", "estimate_gap_threshold", "RegimeLabel",
    "RegimeModel", "assign_regime", "assign_regimes", "fit_regime_model", "select_boundaries",
    "PipelineResult", "run_pipeline", "SynthConfig", "synth_generate", "write_synth",
]
