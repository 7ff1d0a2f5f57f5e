from __future__ import annotations

import itertools
from decimal import Decimal

from semev.pipeline.events import SanctionEvent, SanctionKind, TransferEvent

_ids = itertools.count()


def tx(t: int, src: str, dst: str, amount, token: str = "USDT", reverted: bool = False) -> TransferEvent:
    return TransferEvent(token, f"tx{next(_ids):06d}", t, src, dst, Decimal(str(amount)), reverted)


def sanction(addr: str, t_exec: int, kind: SanctionKind = SanctionKind.BLACKLIST, token: str = "USDT",
             t_submit: int | None = None) -> SanctionEvent:
    return SanctionEvent(token, addr, kind, t_exec, t_submit)
