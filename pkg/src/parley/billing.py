"""Escrow holds, settlement with commission split, and a double-entry ledger.

Money only moves at settlement. A hold reserves the worst-case charge up
front, so a buyer can never owe more than they could pay when the
session started; at settlement the buyer debit equals the seller credit
plus the platform commission, every settlement's entries sum to zero,
and settling the same session twice returns the original receipt
without posting anything.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .errors import DuplicateHold, InsufficientFunds, NotEnded, UnknownAccount
from .kernel import (
    DEFAULT_CURRENCY,
    Money,
    Rate,
    RateKind,
    compute_charge,
    split_commission,
)

PLATFORM_ACCOUNT = "platform"


class HoldState(str, Enum):
    OPEN = "open"
    CAPTURED = "captured"
    RELEASED = "released"


@dataclass
class Hold:
    """An escrow reservation against the buyer's balance, capped up front."""

    hold_id: str
    session_id: str
    buyer_id: str
    seller_id: str
    rate: Rate
    cap: Money
    opened_at: int
    state: HoldState = HoldState.OPEN

    def to_dict(self) -> dict:
        return {
            "hold_id": self.hold_id,
            "session_id": self.session_id,
            "buyer_id": self.buyer_id,
            "seller_id": self.seller_id,
            "rate": self.rate.to_dict(),
            "cap": self.cap.to_dict(),
            "opened_at": self.opened_at,
            "state": self.state.value,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Hold":
        return cls(
            hold_id=data["hold_id"],
            session_id=data["session_id"],
            buyer_id=data["buyer_id"],
            seller_id=data["seller_id"],
            rate=Rate.from_dict(data["rate"]),
            cap=Money.from_dict(data["cap"]),
            opened_at=int(data["opened_at"]),
            state=HoldState(data["state"]),
        )


@dataclass(frozen=True)
class LedgerEntry:
    """One signed posting; a settlement's entries always sum to zero."""

    entry_id: str
    settlement_id: str
    account_id: str
    delta: int
    posted_at: int

    def to_dict(self) -> dict:
        return {
            "entry_id": self.entry_id,
            "settlement_id": self.settlement_id,
            "account_id": self.account_id,
            "delta": self.delta,
            "posted_at": self.posted_at,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LedgerEntry":
        return cls(
            entry_id=data["entry_id"],
            settlement_id=data["settlement_id"],
            account_id=data["account_id"],
            delta=int(data["delta"]),
            posted_at=int(data["posted_at"]),
        )


@dataclass(frozen=True)
class SettlementReceipt:
    settlement_id: str
    session_id: str
    charge: Money
    commission: Money
    seller_credit: Money
    settled_at: int

    def to_dict(self) -> dict:
        return {
            "settlement_id": self.settlement_id,
            "session_id": self.session_id,
            "charge": self.charge.to_dict(),
            "commission": self.commission.to_dict(),
            "seller_credit": self.seller_credit.to_dict(),
            "settled_at": self.settled_at,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SettlementReceipt":
        return cls(
            settlement_id=data["settlement_id"],
            session_id=data["session_id"],
            charge=Money.from_dict(data["charge"]),
            commission=Money.from_dict(data["commission"]),
            seller_credit=Money.from_dict(data["seller_credit"]),
            settled_at=int(data["settled_at"]),
        )


def hold_cap_for(rate: Rate, hold_cap_minutes: int) -> Money:
    """Worst-case charge reserved at session open."""
    if rate.kind is RateKind.PER_CASE:
        return rate.amount
    return Money(rate.amount.amount * hold_cap_minutes, rate.amount.currency)


class Ledger:
    """Balances, escrow holds, and immutable settlement postings."""

    def __init__(
        self,
        *,
        commission_bps: int = 2000,
        hold_cap_minutes: int = 30,
        endowment_cents: int = 10_000,
        currency: str = DEFAULT_CURRENCY,
    ) -> None:
        if not 0 <= commission_bps <= 10_000:
            raise ValueError("commission_bps must be within [0, 10000]")
        if hold_cap_minutes <= 0:
            raise ValueError("hold_cap_minutes must be positive")
        if endowment_cents < 0:
            raise ValueError("endowment_cents must be >= 0")
        self.commission_bps = commission_bps
        self.hold_cap_minutes = hold_cap_minutes
        self.endowment_cents = endowment_cents
        self.currency = currency
        self._endowments: dict[str, int] = {PLATFORM_ACCOUNT: 0}
        self._posted: dict[str, int] = {}
        self._entries: list[LedgerEntry] = []
        self._holds: dict[str, Hold] = {}
        self._open_hold_cents: dict[str, int] = {}
        self._receipts: dict[str, SettlementReceipt] = {}
        self._hold_seq = 0
        self._entry_seq = 0

    # --- accounts ---

    def create_account(self, account_id: str) -> None:
        self._endowments.setdefault(account_id, self.endowment_cents)

    def has_account(self, account_id: str) -> bool:
        return account_id in self._endowments

    def available(self, account_id: str) -> Money:
        if account_id not in self._endowments:
            raise UnknownAccount(f"no such account: {account_id}")
        cents = (
            self._endowments[account_id]
            + self._posted.get(account_id, 0)
            - self._open_hold_cents.get(account_id, 0)
        )
        return Money(cents, self.currency)

    def held(self, account_id: str) -> Money:
        if account_id not in self._endowments:
            raise UnknownAccount(f"no such account: {account_id}")
        return Money(self._open_hold_cents.get(account_id, 0), self.currency)

    def balance(self, account_id: str) -> dict:
        return {
            "account_id": account_id,
            "available": self.available(account_id).to_dict(),
            "held": self.held(account_id).to_dict(),
        }

    # --- escrow ---

    def open_hold(self, session_id: str, buyer_id: str, seller_id: str, rate: Rate, now: int) -> Hold:
        if session_id in self._holds:
            raise DuplicateHold(f"session {session_id} already has a hold")
        if buyer_id not in self._endowments:
            raise UnknownAccount(f"no such account: {buyer_id}")
        cap = hold_cap_for(rate, self.hold_cap_minutes)
        if self.available(buyer_id).amount < cap.amount:
            raise InsufficientFunds(
                f"hold needs {cap.amount} cents, only "
                f"{self.available(buyer_id).amount} available"
            )
        self._hold_seq += 1
        hold = Hold(
            hold_id=f"hld-{self._hold_seq:06d}",
            session_id=session_id,
            buyer_id=buyer_id,
            seller_id=seller_id,
            rate=rate,
            cap=cap,
            opened_at=now,
        )
        self._holds[session_id] = hold
        self._open_hold_cents[buyer_id] = self._open_hold_cents.get(buyer_id, 0) + cap.amount
        return hold

    def hold_for_session(self, session_id: str) -> Optional[Hold]:
        return self._holds.get(session_id)

    def release_hold(self, session_id: str) -> None:
        hold = self._holds.get(session_id)
        if hold is None or hold.state is not HoldState.OPEN:
            return
        hold.state = HoldState.RELEASED
        self._open_hold_cents[hold.buyer_id] -= hold.cap.amount

    # --- settlement ---

    def accrued_charge(self, session_id: str, metered_seconds: int) -> Money:
        """The charge the session would settle at right now, clamped to the hold cap."""
        hold = self._holds.get(session_id)
        if hold is None:
            return Money(0, self.currency)
        charge = compute_charge(hold.rate, metered_seconds)
        if charge.amount > hold.cap.amount:
            return hold.cap
        return charge

    def settle_session(self, session_id: str, metered_seconds: int, now: int) -> SettlementReceipt:
        """Capture the hold and post the zero-sum settlement entries.

        Idempotent: a repeat call returns the original receipt untouched.
        """
        settlement_id = f"stl-{session_id}"
        existing = self._receipts.get(settlement_id)
        if existing is not None:
            return existing
        hold = self._holds.get(session_id)
        if hold is None:
            raise NotEnded(f"session {session_id} has no hold to settle against")
        charge = self.accrued_charge(session_id, metered_seconds)
        commission, seller_credit = split_commission(charge, self.commission_bps)
        if charge.amount > 0:
            self._post(settlement_id, hold.buyer_id, -charge.amount, now)
            self._post(settlement_id, hold.seller_id, seller_credit.amount, now)
            self._post(settlement_id, PLATFORM_ACCOUNT, commission.amount, now)
            if hold.state is HoldState.OPEN:
                hold.state = HoldState.CAPTURED
                self._open_hold_cents[hold.buyer_id] -= hold.cap.amount
        else:
            self.release_hold(session_id)
        receipt = SettlementReceipt(
            settlement_id=settlement_id,
            session_id=session_id,
            charge=charge,
            commission=commission,
            seller_credit=seller_credit,
            settled_at=now,
        )
        self._receipts[settlement_id] = receipt
        return receipt

    def receipt_for_session(self, session_id: str) -> Optional[SettlementReceipt]:
        return self._receipts.get(f"stl-{session_id}")

    def _post(self, settlement_id: str, account_id: str, delta: int, now: int) -> None:
        if delta == 0:
            return
        self._entry_seq += 1
        entry = LedgerEntry(
            entry_id=f"ent-{self._entry_seq:08d}",
            settlement_id=settlement_id,
            account_id=account_id,
            delta=delta,
            posted_at=now,
        )
        self._entries.append(entry)
        self._posted[account_id] = self._posted.get(account_id, 0) + delta

    # --- reporting ---

    def statement(self, account_id: str, from_ts: int, to_ts: int) -> list[LedgerEntry]:
        """Entries for an account with ``from_ts <= posted_at < to_ts``."""
        if account_id not in self._endowments:
            raise UnknownAccount(f"no such account: {account_id}")
        rows = [
            e
            for e in self._entries
            if e.account_id == account_id and from_ts <= e.posted_at < to_ts
        ]
        rows.sort(key=lambda e: (e.posted_at, e.entry_id))
        return rows

    def entries(self) -> list[LedgerEntry]:
        return list(self._entries)

    def account_ids(self) -> list[str]:
        return sorted(self._endowments)

    def conservation_residual(self) -> int:
        """Sum over accounts of (available + held - endowment); zero when sound."""
        total = 0
        for account_id in self._endowments:
            total += (
                self.available(account_id).amount
                + self.held(account_id).amount
                - self._endowments[account_id]
            )
        return total

    # --- state transfer ---

    def to_state(self) -> dict:
        return {
            "endowments": {k: self._endowments[k] for k in sorted(self._endowments)},
            "entries": [e.to_dict() for e in self._entries],
            "holds": {k: self._holds[k].to_dict() for k in sorted(self._holds)},
            "receipts": {k: self._receipts[k].to_dict() for k in sorted(self._receipts)},
            "hold_seq": self._hold_seq,
            "entry_seq": self._entry_seq,
        }

    def load_state(self, state: dict) -> None:
        self._endowments = {k: int(v) for k, v in state["endowments"].items()}
        self._entries = [LedgerEntry.from_dict(e) for e in state["entries"]]
        self._posted = {}
        for entry in self._entries:
            self._posted[entry.account_id] = self._posted.get(entry.account_id, 0) + entry.delta
        self._holds = {k: Hold.from_dict(v) for k, v in state["holds"].items()}
        self._open_hold_cents = {}
        for hold in self._holds.values():
            if hold.state is HoldState.OPEN:
                self._open_hold_cents[hold.buyer_id] = (
                    self._open_hold_cents.get(hold.buyer_id, 0) + hold.cap.amount
                )
        self._receipts = {k: SettlementReceipt.from_dict(v) for k, v in state["receipts"].items()}
        self._hold_seq = int(state["hold_seq"])
        self._entry_seq = int(state["entry_seq"])
