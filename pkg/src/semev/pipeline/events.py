"""Ledger rows, their file formats, and per-address history reconstruction.

Transfers and sanctions are JSONL, labels are a two-column CSV.  Amounts
are exact decimals with at most six fractional digits.
"""

from __future__ import annotations

import csv
import enum
import hashlib
import io
import json
import logging
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Iterable, Iterator

log = logging.getLogger(__name__)

AMOUNT_EXP = Decimal("0.000001")
ZERO = Decimal(0)

TRANSFER_KEYS = ("token", "tx_id", "block_time", "from_addr", "to_addr", "amount", "reverted")
SANCTION_KEYS = ("token", "address", "kind", "t_submit", "t_exec")


class SanctionKind(str, enum.Enum):
    BLACKLIST = "Blacklist"
    UNBLACKLIST = "Unblacklist"
    DESTROY_FUNDS = "DestroyFunds"
    REISSUE = "Reissue"


class AddressCategory(str, enum.Enum):
    INTERMEDIARY = "Intermediary"
    EXCHANGE_DEPOSIT_CLUSTER = "ExchangeDepositCluster"
    MIXER_CORE = "MixerCore"
    OTHER = "Other"
    UNKNOWN = "Unknown"


class MalformedRowError(ValueError):
    def __init__(self, source: str, line: int, reason: str):
        super().__init__(f"{source}:{line}: {reason}")
        self.source = source
        self.line = line
        self.reason = reason


@dataclass(frozen=True, slots=True)
class TransferEvent:
    token: str
    tx_id: str
    block_time: int
    from_addr: str
    to_addr: str
    amount: Decimal
    reverted: bool = False

    def __post_init__(self) -> None:
        if self.amount < 0:
            raise ValueError(f"negative amount in {self.tx_id}")
        if self.block_time <= 0:
            raise ValueError(f"block_time must be positive in {self.tx_id}")


@dataclass(frozen=True, slots=True)
class SanctionEvent:
    token: str
    address: str
    kind: SanctionKind
    t_exec: int
    t_submit: int | None = None

    def __post_init__(self) -> None:
        if self.t_submit is not None and self.t_submit > self.t_exec:
            raise ValueError(f"t_submit after t_exec for {self.address}")


@dataclass(frozen=True, slots=True)
class AddressLabel:
    address: str
    category: AddressCategory


def to_amount(value) -> Decimal:
    if isinstance(value, bool):
        raise ValueError("amount must be numeric")
    try:
        amount = Decimal(str(value)) if not isinstance(value, Decimal) else value
    except InvalidOperation as exc:
        raise ValueError(f"bad amount {value!r}") from exc
    if not amount.is_finite():
        raise ValueError(f"bad amount {value!r}")
    if amount.as_tuple().exponent < -6 and amount != amount.quantize(AMOUNT_EXP):
        raise ValueError(f"amount {value!r} has more than 6 fractional digits")
    if amount < 0:
        raise ValueError(f"negative amount {value!r}")
    return amount.quantize(AMOUNT_EXP)


def _int_field(obj: dict, key: str, *, nullable: bool = False) -> int | None:
    value = obj[key]
    if value is None and nullable:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, Decimal)):
        raise ValueError(f"{key} must be an integer")
    if isinstance(value, Decimal):
        if value != value.to_integral_value():
            raise ValueError(f"{key} must be an integer")
        value = int(value)
    return value


def _str_field(obj: dict, key: str) -> str:
    value = obj[key]
    if not isinstance(value, str) or not value:
        raise ValueError(f"{key} must be a nonempty string")
    return value


def transfer_from_dict(obj: dict) -> TransferEvent:
    if not isinstance(obj, dict) or set(obj) != set(TRANSFER_KEYS):
        raise ValueError(f"expected keys {sorted(TRANSFER_KEYS)}")
    if not isinstance(obj["reverted"], bool):
        raise ValueError("reverted must be a boolean")
    return TransferEvent(
        token=_str_field(obj, "token"),
        tx_id=_str_field(obj, "tx_id"),
        block_time=_int_field(obj, "block_time"),
        from_addr=_str_field(obj, "from_addr"),
        to_addr=_str_field(obj, "to_addr"),
        amount=to_amount(obj["amount"]),
        reverted=obj["reverted"],
    )


def sanction_from_dict(obj: dict) -> SanctionEvent:
    if not isinstance(obj, dict) or set(obj) != set(SANCTION_KEYS):
        raise ValueError(f"expected keys {sorted(SANCTION_KEYS)}")
    return SanctionEvent(
        token=_str_field(obj, "token"),
        address=_str_field(obj, "address"),
        kind=SanctionKind(obj["kind"]),
        t_exec=_int_field(obj, "t_exec"),
        t_submit=_int_field(obj, "t_submit", nullable=True),
    )


def _iter_jsonl(lines: Iterable[str], source: str, parse) -> Iterator:
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line, parse_float=Decimal)
            yield parse(obj)
        except (ValueError, KeyError, TypeError) as exc:
            raise MalformedRowError(source, lineno, str(exc)) from exc


def read_transfers(path: str | Path) -> list[TransferEvent]:
    with open(path, encoding="utf-8") as fh:
        return list(_iter_jsonl(fh, str(path), transfer_from_dict))


def read_sanctions(path: str | Path) -> list[SanctionEvent]:
    with open(path, encoding="utf-8") as fh:
        return list(_iter_jsonl(fh, str(path), sanction_from_dict))


def read_labels(path: str | Path) -> dict[str, AddressCategory]:
    labels: dict[str, AddressCategory] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return labels
        if [h.strip() for h in header] != ["address", "category"]:
            raise MalformedRowError(str(path), 1, "header must be address,category")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                address, category = row
                cat = AddressCategory(category.strip())
            except ValueError as exc:
                raise MalformedRowError(str(path), lineno, str(exc)) from exc
            if labels.get(address, cat) is not cat:
                raise MalformedRowError(str(path), lineno, f"conflicting labels for {address}")
            labels[address] = cat
    return labels


def transfer_line(ev: TransferEvent) -> str:
    obj = {
        "token": ev.token,
        "tx_id": ev.tx_id,
        "block_time": ev.block_time,
        "from_addr": ev.from_addr,
        "to_addr": ev.to_addr,
        "amount": str(ev.amount.quantize(AMOUNT_EXP)),
        "reverted": ev.reverted,
    }
    return json.dumps(obj, separators=(",", ":"))


def sanction_line(ev: SanctionEvent) -> str:
    obj = {
        "token": ev.token,
        "address": ev.address,
        "kind": ev.kind.value,
        "t_submit": ev.t_submit,
        "t_exec": ev.t_exec,
    }
    return json.dumps(obj, separators=(",", ":"))


def dump_transfers(events: Iterable[TransferEvent]) -> str:
    return "".join(transfer_line(e) + "\n" for e in events)


def dump_sanctions(events: Iterable[SanctionEvent]) -> str:
    return "".join(sanction_line(e) + "\n" for e in events)


def dump_labels(labels: dict[str, AddressCategory]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("address", "category"))
    for address in sorted(labels):
        writer.writerow((address, labels[address].value))
    return buf.getvalue()


def transfers_digest(events: Iterable[TransferEvent]) -> str:
    """sha256 of the canonical JSONL form; independent of source formatting."""
    h = hashlib.sha256()
    for ev in events:
        h.update(transfer_line(ev).encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()


@dataclass(frozen=True, slots=True)
class HistoryEntry:
    tx_id: str
    block_time: int
    inflow: Decimal
    outflow: Decimal
    balance: Decimal
    reverted: bool


@dataclass
class AddressHistory:
    address: str
    token: str
    entries: list[HistoryEntry] = field(default_factory=list)
    quarantined: bool = False

    def balances(self) -> list[Decimal]:
        return [e.balance for e in self.entries]

    def inflow_before(self, t: int) -> Decimal:
        return sum((e.inflow for e in self.entries if e.block_time < t and not e.reverted), ZERO)


Key = tuple[str, str]  # (address, token)


@dataclass
class Ledger:
    histories: dict[Key, AddressHistory]
    sanctions: dict[Key, list[SanctionEvent]]
    labels: dict[str, AddressCategory]

    @property
    def quarantined(self) -> set[Key]:
        return {k for k, h in self.histories.items() if h.quarantined}


def ingest_events(
    transfers: Iterable[TransferEvent],
    sanctions: Iterable[SanctionEvent] = (),
    labels: dict[str, AddressCategory] | Iterable[AddressLabel] | None = None,
    track: Iterable[Key] | None = None,
) -> Ledger:
    """Build ordered histories with running balances for tracked (address, token) keys.

    By default the tracked keys are the sanctioned ones.  Reverted transfers
    stay in the history with zero flow.  A history whose balance goes negative
    is quarantined.
    """
    by_key: dict[Key, list[SanctionEvent]] = {}
    for ev in sanctions:
        by_key.setdefault((ev.address, ev.token), []).append(ev)
    for evs in by_key.values():
        evs.sort(key=lambda e: e.t_exec)

    keys = set(track) if track is not None else set(by_key)
    histories = {k: AddressHistory(*k) for k in sorted(keys)}

    ordered = sorted(enumerate(transfers), key=lambda p: (p[1].block_time, p[0]))
    for _, ev in ordered:
        touched = {(ev.from_addr, ev.token), (ev.to_addr, ev.token)} & keys
        for key in sorted(touched):
            hist = histories[key]
            inflow = ev.amount if (ev.to_addr == key[0] and not ev.reverted) else ZERO
            outflow = ev.amount if (ev.from_addr == key[0] and not ev.reverted) else ZERO
            prev = hist.entries[-1].balance if hist.entries else ZERO
            balance = prev + inflow - outflow
            if balance < 0 and not hist.quarantined:
                log.warning("negative balance for %s/%s at %s; quarantined", key[0], key[1], ev.tx_id)
                hist.quarantined = True
            hist.entries.append(HistoryEntry(ev.tx_id, ev.block_time, inflow, outflow, balance, ev.reverted))

    if labels is None:
        label_map: dict[str, AddressCategory] = {}
    elif isinstance(labels, dict):
        label_map = dict(labels)
    else:
        label_map = {lab.address: lab.category for lab in labels}
    return Ledger(histories, by_key, label_map)
