from __future__ import annotations

import math
from collections import Counter

import pytest

from semev.pipeline.config import DEFAULT_BOUNDARIES
from semev.pipeline.regimes import assign_regime
from semev.pipeline.synth import SYNTH_FILES, SynthConfig, synth_generate, synth_payloads, write_synth


def test_same_seed_same_bytes(small_synth):
    again = synth_generate(SynthConfig(addresses=30, seed=11))
    assert synth_payloads(again) == synth_payloads(small_synth)
    other = synth_generate(SynthConfig(addresses=30, seed=12))
    assert synth_payloads(other)["transfers.jsonl"] != synth_payloads(small_synth)["transfers.jsonl"]


def test_write_synth(tmp_path, small_synth):
    paths = write_synth(small_synth, tmp_path / "out")
    assert set(paths) == set(SYNTH_FILES)
    for name, text in synth_payloads(small_synth).items():
        assert paths[name].read_text() == text


def test_planted_deltas_sit_in_their_bands(small_synth):
    for ev in small_synth.ground_truth["evaders"]:
        assert assign_regime(ev["planted_delta"], DEFAULT_BOUNDARIES).value == ev["planted_regime"]


def test_regime_mix_within_three_sigma():
    data = synth_generate(SynthConfig(addresses=400, seed=3, decoys_per_kind=0))
    counts = Counter(ev["planted_regime"] for ev in data.ground_truth["evaders"])
    n = len(data.ground_truth["evaders"])
    for regime, p in SynthConfig().regime_mix.items():
        assert abs(counts[regime] - n * p) <= 3 * math.sqrt(n * p * (1 - p))


def test_gap_structure(small_synth):
    tx_time = {t.tx_id: t.block_time for t in small_synth.transfers}
    eps = {}
    for ep in small_synth.ground_truth["episodes"]:
        eps.setdefault((ep["address"], ep["token"]), []).append(sorted(tx_time[i] for i in ep["tx_ids"]))
    for runs in eps.values():
        runs.sort()
        for run in runs:
            assert all(b - a < 150 for a, b in zip(run, run[1:]))
        for a, b in zip(runs, runs[1:]):
            assert b[0] - a[-1] > 600


def test_decoys(small_synth):
    decoys = small_synth.ground_truth["decoys"]
    assert set(decoys) == {"revoked", "recovery", "inert", "infrastructure"}
    assert all(len(v) == 3 for v in decoys.values())


def test_each_evader_has_a_material_drain(small_synth):
    evasions = Counter(ep["address"] for ep in small_synth.ground_truth["episodes"] if ep["is_evasion"])
    for ev in small_synth.ground_truth["evaders"]:
        assert evasions[ev["address"]] >= 1


@pytest.mark.parametrize("kwargs", [dict(addresses=0), dict(planted_tau=100.0), dict(regime_mix={"Fast": 1.0}),
                                    dict(episodes=(3, 2))])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        SynthConfig(**kwargs)
