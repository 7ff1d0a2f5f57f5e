"""Synthetic sanctioned-address ledgers with planted ground truth.

Each evader address gets a few intent episodes: transactions inside an
episode are less than ``intra_gap_max`` apart, episodes are more than
``inter_gap_min`` apart.  The last pre-enforcement episode is a material
drain whose final outflow lands a planted delta before the freeze, with the
delta drawn inside one of the four regime bands.  Decoy addresses exercise
each filter rule.

Ground truth is computed here with its own bookkeeping, not with the
pipeline code it is meant to check.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import asdict, dataclass, field
from decimal import Decimal
from pathlib import Path

from .config import DEFAULT_BOUNDARIES
from .events import (
    AddressCategory,
    SanctionEvent,
    SanctionKind,
    TransferEvent,
    dump_labels,
    dump_sanctions,
    dump_transfers,
    transfers_digest,
)

REGIMES = ("Race", "TacticalReactive", "StrategicMigration", "LongTail")
DAY = 86_400
_MICRO = Decimal("0.000001")


def regime_bands(boundaries=DEFAULT_BOUNDARIES) -> dict[str, tuple[float, float]]:
    b1, b2, b3 = boundaries
    return {
        "Race": (10.0, float(b1)),
        "TacticalReactive": (float(b1), float(b2)),
        "StrategicMigration": (float(b2), float(b3)),
        "LongTail": (float(b3), 4.0 * b3),
    }


@dataclass(frozen=True)
class SynthConfig:
    addresses: int = 100
    seed: int = 0
    planted_tau: float = 300.0
    intra_gap_max: int = 150
    intra_gap_median: float = 20.0
    inter_gap_min: int = 600
    inter_gap_max: int = 30 * DAY
    episodes: tuple[int, int] = (2, 6)
    txs_per_episode: tuple[int, int] = (1, 8)
    regime_mix: dict = field(default_factory=lambda: {
        "Race": 0.1, "TacticalReactive": 0.3, "StrategicMigration": 0.4, "LongTail": 0.2})
    decoys_per_kind: int = 3
    usdt_share: float = 0.7
    material_prob: float = 0.4
    reverted_prob: float = 0.1
    post_freeze_prob: float = 0.2
    labeled_evader_prob: float = 0.1
    alpha: float = 0.10
    beta: int = 1000
    start_time: int = 1_600_000_000

    def __post_init__(self) -> None:
        if self.addresses < 1:
            raise ValueError("need at least one address")
        if not 1 <= self.intra_gap_max <= self.planted_tau <= self.inter_gap_min < self.inter_gap_max:
            raise ValueError("need intra_gap_max <= planted_tau <= inter_gap_min < inter_gap_max")
        lo, hi = self.episodes
        if not 1 <= lo <= hi:
            raise ValueError("bad episodes range")
        lo, hi = self.txs_per_episode
        if not 1 <= lo <= hi:
            raise ValueError("bad txs_per_episode range")
        if set(self.regime_mix) - set(REGIMES):
            raise ValueError(f"unknown regimes in mix: {set(self.regime_mix) - set(REGIMES)}")
        total = sum(self.regime_mix.values())
        if total <= 0 or any(v < 0 for v in self.regime_mix.values()):
            raise ValueError("regime mix weights must be nonnegative with positive sum")
        if self.decoys_per_kind < 0:
            raise ValueError("decoys_per_kind must be nonnegative")


@dataclass
class SynthData:
    transfers: list[TransferEvent]
    sanctions: list[SanctionEvent]
    labels: dict[str, AddressCategory]
    ground_truth: dict


class _Gen:
    def __init__(self, cfg: SynthConfig):
        self.cfg = cfg
        self.rng = random.Random(cfg.seed)
        self.seq = 0
        self.transfers: list[tuple[int, int, TransferEvent]] = []

    def address(self) -> str:
        return f"0x{self.rng.getrandbits(160):040x}"

    def tx_id(self) -> str:
        self.seq += 1
        digest = hashlib.sha256(f"{self.cfg.seed}:{self.seq}".encode()).hexdigest()
        return "0x" + digest

    def usd(self, lo: float, hi: float) -> Decimal:
        """Log-uniform amount in [lo, hi) with six decimals."""
        x = math.exp(self.rng.uniform(math.log(lo), math.log(hi)))
        return Decimal(int(x * 1_000_000)) * _MICRO

    def loguniform(self, lo: float, hi: float) -> float:
        return math.exp(self.rng.uniform(math.log(lo), math.log(hi)))

    def emit(self, token, t, src, dst, amount, reverted=False) -> str:
        tx = self.tx_id()
        ev = TransferEvent(token, tx, t, src, dst, amount, reverted)
        self.transfers.append((t, self.seq, ev))
        return tx

    def intra_gap(self) -> int:
        c = self.cfg
        g = round(c.intra_gap_median * math.exp(self.rng.gauss(0.0, 0.6)))
        return max(1, min(c.intra_gap_max - 1, g))

    def inter_gap(self) -> int:
        c = self.cfg
        return int(self.loguniform(c.inter_gap_min + 1, c.inter_gap_max))


def _pick(rng: random.Random, weights: dict) -> str:
    names = [r for r in REGIMES if weights.get(r, 0) > 0]
    return rng.choices(names, weights=[weights[r] for r in names])[0]


def _evader(g: _Gen, token: str, addr: str, t_exec: int, regime: str, bands) -> tuple[list[dict], float]:
    cfg, rng = g.cfg, g.rng
    lo, hi = bands[regime]
    final_delta = int(round(g.loguniform(lo * 1.25, hi / 1.25)))

    n_eps = rng.randint(*cfg.episodes)
    # kinds per episode, oldest first; the last one is the material drain
    plans = []
    for e in range(n_eps):
        material = e == n_eps - 1 or rng.random() < cfg.material_prob
        m = rng.randint(*cfg.txs_per_episode)
        if material:
            m = max(m, 2)
            n_in = rng.randint(1, m - 1)
            kinds = ["in"] * n_in + ["out"] * (m - n_in)
        else:
            kinds = [rng.choice(("in", "dust")) for _ in range(m)]
        if e == 0:
            kinds[0] = "in"
        if m >= 2 and rng.random() < cfg.reverted_prob:
            kinds.insert(rng.randint(1, len(kinds) - 1), "reverted")
        plans.append((material, kinds))

    # timestamps, built backwards from the final outflow
    times: list[list[int]] = []
    end = t_exec - final_delta
    for material, kinds in reversed(plans):
        ts = [end]
        for _ in range(len(kinds) - 1):
            ts.append(ts[-1] - g.intra_gap())
        times.append(ts[::-1])
        end = ts[-1] - g.inter_gap()
    times.reverse()

    episodes = []
    balance = Decimal(0)
    for (material, kinds), ts in zip(plans, times):
        b_start, inflow, outflow = balance, Decimal(0), Decimal(0)
        tx_ids, out_times = [], []
        n_out = kinds.count("out")
        target = Decimal(0)
        out_done = 0
        for kind, t in zip(kinds, ts):
            peer = g.address()
            if kind == "in" or (kind == "dust" and balance < 500):
                amt = g.usd(5_000, 2_000_000) if material or kind == "in" else g.usd(5, 400)
                tx_ids.append(g.emit(token, t, peer, addr, amt))
                balance += amt
                inflow += amt
            elif kind == "dust":
                amt = g.usd(1, 400)
                tx_ids.append(g.emit(token, t, addr, peer, amt))
                balance -= amt
                outflow += amt
                out_times.append(t)
            elif kind == "reverted":
                tx_ids.append(g.emit(token, t, addr, peer, g.usd(10, 10_000), reverted=True))
            else:  # material outflow
                if out_done == 0:
                    frac = Decimal(str(round(rng.uniform(0.3, 1.0), 4)))
                    target = (balance * frac).quantize(_MICRO)
                share = target if out_done == n_out - 1 else (
                    target * Decimal(str(round(rng.uniform(0.2, 0.6), 4)))).quantize(_MICRO)
                share = min(share, balance)
                target -= share
                out_done += 1
                tx_ids.append(g.emit(token, t, addr, peer, share))
                balance -= share
                outflow += share
                out_times.append(t)
        liquidity = b_start + inflow
        final_out = out_times[-1] if out_times else None
        delta = t_exec - final_out if final_out is not None and final_out < t_exec else None
        episodes.append({
            "address": addr,
            "token": token,
            "tx_ids": tx_ids,
            "V_out": str(outflow),
            "L_episode": str(liquidity),
            "delta": delta,
            "_liquidity": liquidity,
            "_outflow": outflow,
        })

    if rng.random() < cfg.post_freeze_prob:
        t = t_exec + g.inter_gap()
        amt = g.usd(100, 50_000)
        tx = g.emit(token, t, g.address(), addr, amt)
        episodes.append({"address": addr, "token": token, "tx_ids": [tx],
                         "V_out": "0.000000", "L_episode": str(balance + amt), "delta": None,
                         "_liquidity": balance + amt, "_outflow": Decimal(0)})
    return episodes, final_delta


def _band_of(delta: int, boundaries) -> str:
    b1, b2, b3 = boundaries
    if delta <= b1:
        return "Race"
    if delta <= b2:
        return "TacticalReactive"
    if delta <= b3:
        return "StrategicMigration"
    return "LongTail"


def synth_generate(cfg: SynthConfig | None = None) -> SynthData:
    cfg = cfg or SynthConfig()
    g = _Gen(cfg)
    rng = g.rng
    bands = regime_bands()
    alpha = Decimal(str(cfg.alpha))
    beta = Decimal(cfg.beta)
    horizon = cfg.start_time + 2 * 365 * DAY

    sanctions: list[SanctionEvent] = []
    labels: dict[str, AddressCategory] = {}
    truth_eps: list[dict] = []
    evaders: list[dict] = []

    def t_submit_for(token: str, t_exec: int) -> int | None:
        return t_exec - rng.randint(60, 6 * 3600) if token == "USDT" else None

    for _ in range(cfg.addresses):
        token = "USDT" if rng.random() < cfg.usdt_share else "USDC"
        addr = g.address()
        t_exec = horizon + rng.randint(0, 180 * DAY)
        regime = _pick(rng, cfg.regime_mix)
        eps, final_delta = _evader(g, token, addr, t_exec, regime, bands)
        sanctions.append(SanctionEvent(token, addr, SanctionKind.BLACKLIST, t_exec, t_submit_for(token, t_exec)))
        if rng.random() < cfg.labeled_evader_prob:
            labels[addr] = rng.choice((AddressCategory.OTHER, AddressCategory.UNKNOWN))
        for ep in eps:
            liq, out = ep.pop("_liquidity"), ep.pop("_outflow")
            ep["is_evasion"] = bool(liq > 0 and out >= beta and out >= alpha * liq)
            ep["regime"] = (_band_of(ep["delta"], DEFAULT_BOUNDARIES)
                            if ep["is_evasion"] and ep["delta"] is not None else None)
            truth_eps.append(ep)
        evaders.append({"address": addr, "token": token, "t_exec": t_exec,
                        "planted_regime": regime, "planted_delta": final_delta})

    decoys: dict[str, list[str]] = {"revoked": [], "recovery": [], "inert": [], "infrastructure": []}
    infra_cycle = (AddressCategory.MIXER_CORE, AddressCategory.INTERMEDIARY,
                   AddressCategory.EXCHANGE_DEPOSIT_CLUSTER)
    for i in range(cfg.decoys_per_kind):
        for kind in decoys:
            token = "USDT" if kind == "recovery" or rng.random() < cfg.usdt_share else "USDC"
            addr = g.address()
            t_exec = horizon + rng.randint(0, 180 * DAY)
            sanctions.append(SanctionEvent(token, addr, SanctionKind.BLACKLIST, t_exec, t_submit_for(token, t_exec)))
            t0 = t_exec - rng.randint(DAY, 30 * DAY)
            if kind == "revoked":
                amt = g.usd(5_000, 100_000)
                g.emit(token, t0, g.address(), addr, amt)
                g.emit(token, t0 + g.intra_gap(), addr, g.address(), amt)
                sanctions.append(SanctionEvent(token, addr, SanctionKind.UNBLACKLIST, t_exec + rng.randint(DAY, 60 * DAY)))
            elif kind == "recovery":
                g.emit(token, t0, g.address(), addr, g.usd(1_000, 500_000))
                sanctions.append(SanctionEvent(token, addr, SanctionKind.DESTROY_FUNDS, t_exec + 3600))
                sanctions.append(SanctionEvent(token, addr, SanctionKind.REISSUE, t_exec + 7200))
            elif kind == "inert":
                g.emit(token, t0, addr, g.address(), g.usd(10, 1_000), reverted=True)
            else:
                labels[addr] = infra_cycle[i % len(infra_cycle)]
                t = t0
                for _ in range(rng.randint(3, 8)):
                    g.emit(token, t, g.address(), addr, g.usd(1_000, 100_000))
                    t += g.intra_gap()
            decoys[kind].append(addr)

    g.transfers.sort(key=lambda p: (p[0], p[1]))
    transfers = [ev for _, _, ev in g.transfers]
    sanctions.sort(key=lambda s: (s.t_exec, s.address, s.kind.value))
    truth = {
        "seed": cfg.seed,
        "planted_tau": cfg.planted_tau,
        "config": _config_dict(cfg),
        "transfers_digest": transfers_digest(transfers),
        "evaders": evaders,
        "decoys": decoys,
        "episodes": truth_eps,
    }
    return SynthData(transfers, sanctions, labels, truth)


def _config_dict(cfg: SynthConfig) -> dict:
    d = asdict(cfg)
    d["episodes"] = list(cfg.episodes)
    d["txs_per_episode"] = list(cfg.txs_per_episode)
    return d


SYNTH_FILES = ("transfers.jsonl", "sanctions.jsonl", "labels.csv", "ground_truth.json")


def synth_payloads(data: SynthData) -> dict[str, str]:
    return {
        "transfers.jsonl": dump_transfers(data.transfers),
        "sanctions.jsonl": dump_sanctions(data.sanctions),
        "labels.csv": dump_labels(data.labels),
        "ground_truth.json": json.dumps(data.ground_truth, sort_keys=True, indent=2) + "\n",
    }


def write_synth(data: SynthData, out_dir: str | Path) -> dict[str, Path]:
    from ..runio import atomic_write_text

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}
    for name, text in synth_payloads(data).items():
        paths[name] = out / name
        atomic_write_text(paths[name], text)
    return paths
