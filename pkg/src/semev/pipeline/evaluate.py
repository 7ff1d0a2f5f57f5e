from __future__ import annotations

from dataclasses import asdict, dataclass

from .run import PipelineResult


@dataclass(frozen=True)
class EvalReport:
    tau_rel_error: float
    episode_f1: float
    precision: float
    recall: float
    regime_accuracy: float | None
    materiality_accuracy: float | None
    matched: int
    predicted: int
    truth: int
    surviving_decoys: int

    def as_dict(self) -> dict:
        return asdict(self)


def evaluate_pipeline(result: PipelineResult, truth: dict) -> EvalReport:
    """Score a pipeline run against the generator's planted structure.

    Episodes match only on identical transaction sets.  Regime accuracy is
    taken over matched episodes that carry a planted regime; materiality
    accuracy over all matched episodes.
    """
    if result.input_digest != truth["transfers_digest"]:
        raise ValueError("pipeline output and ground truth come from different datasets")

    truth_eps = {frozenset(ep["tx_ids"]): ep for ep in truth["episodes"]}
    pred_eps = {frozenset(ep.tx_ids): ep for ep in result.episodes}
    matched = truth_eps.keys() & pred_eps.keys()

    n_pred, n_truth, n_match = len(pred_eps), len(truth_eps), len(matched)
    precision = n_match / n_pred if n_pred else 0.0
    recall = n_match / n_truth if n_truth else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0

    regime_hits = regime_total = mat_hits = 0
    for key in matched:
        t, p = truth_eps[key], pred_eps[key]
        mat_hits += t["is_evasion"] == p.is_evasion
        if t["regime"] is not None:
            regime_total += 1
            regime_hits += p.regime is not None and p.regime.value == t["regime"]

    decoys = {a for addrs in truth["decoys"].values() for a in addrs}
    surviving = len({ep.address for ep in result.episodes} & decoys)
    planted = float(truth["planted_tau"])
    return EvalReport(
        tau_rel_error=abs(result.tau.tau - planted) / planted,
        episode_f1=f1,
        precision=precision,
        recall=recall,
        regime_accuracy=regime_hits / regime_total if regime_total else None,
        materiality_accuracy=mat_hits / n_match if n_match else None,
        matched=n_match,
        predicted=n_pred,
        truth=n_truth,
        surviving_decoys=surviving,
    )
