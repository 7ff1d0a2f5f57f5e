"""Phase I (semantic) and Phase II (adversarial) address filtering."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .events import AddressCategory, Key, Ledger, SanctionEvent, SanctionKind

log = logging.getLogger(__name__)

INFRASTRUCTURE = frozenset({
    AddressCategory.INTERMEDIARY,
    AddressCategory.MIXER_CORE,
    AddressCategory.EXCHANGE_DEPOSIT_CLUSTER,
})


@dataclass
class FilterResult:
    retained: list[Key]
    removed: dict[Key, str] = field(default_factory=dict)


def first_blacklist(events: list[SanctionEvent]) -> SanctionEvent | None:
    for ev in events:
        if ev.kind is SanctionKind.BLACKLIST:
            return ev
    return None


def _is_revoked(events: list[SanctionEvent]) -> bool:
    seen_blacklist = False
    for ev in events:
        if ev.kind is SanctionKind.BLACKLIST:
            seen_blacklist = True
        elif ev.kind is SanctionKind.UNBLACKLIST and seen_blacklist:
            return True
    return False


def _is_recovery(events: list[SanctionEvent]) -> bool:
    # Blacklist -> DestroyFunds -> Reissue as a time-ordered subsequence
    want = (SanctionKind.BLACKLIST, SanctionKind.DESTROY_FUNDS, SanctionKind.REISSUE)
    i = 0
    for ev in events:
        if ev.kind is want[i]:
            i += 1
            if i == len(want):
                return True
    return False


def semantic_filter(ledger: Ledger) -> FilterResult:
    """Keep sanctioned keys whose blacklist looks like real enforcement."""
    result = FilterResult([])
    for key in sorted(ledger.sanctions):
        events = ledger.sanctions[key]
        hist = ledger.histories.get(key)
        if first_blacklist(events) is None:
            reason = "no blacklist event"
        elif _is_revoked(events):
            reason = "revoked: unblacklisted later"
        elif _is_recovery(events):
            reason = "recovery workflow: blacklist, destroy, reissue"
        elif hist is not None and hist.quarantined:
            reason = "quarantined: negative running balance"
        else:
            result.retained.append(key)
            continue
        result.removed[key] = reason
        log.debug("semantic filter drops %s/%s: %s", key[0], key[1], reason)
    return result


def adversarial_filter(
    ledger: Ledger,
    sed: FilterResult | list[Key],
    labels: dict[str, AddressCategory] | None = None,
) -> FilterResult:
    """Drop shared infrastructure and addresses that never received funds pre-freeze."""
    labels = ledger.labels if labels is None else labels
    keys = sed.retained if isinstance(sed, FilterResult) else list(sed)
    result = FilterResult([])
    for key in keys:
        category = labels.get(key[0], AddressCategory.UNKNOWN)
        t_exec = first_blacklist(ledger.sanctions[key]).t_exec
        hist = ledger.histories.get(key)
        if category in INFRASTRUCTURE:
            reason = f"non-strategic intermediary ({category.value})"
        elif hist is None or hist.inflow_before(t_exec) == 0:
            reason = "inert: no inflow before enforcement"
        else:
            result.retained.append(key)
            continue
        result.removed[key] = reason
        log.debug("adversarial filter drops %s/%s: %s", key[0], key[1], reason)
    return result
