"""Shared primitives: integer money, rates, clocks, and event records.

Everything that touches money stays in integer minor units (cents). The
only divisions anywhere are charge proration (round half up) and
commission splitting (floor toward the platform), both exact integer
operations, so sums reconcile to the cent.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from typing import Optional, Protocol

DEFAULT_CURRENCY = "USD"


@dataclass(frozen=True)
class Money:
    """A non-negative amount in minor currency units (cents)."""

    amount: int
    currency: str = DEFAULT_CURRENCY

    def __post_init__(self) -> None:
        if not isinstance(self.amount, int) or isinstance(self.amount, bool):
            raise TypeError(f"money amount must be int, got {type(self.amount).__name__}")
        if self.amount < 0:
            raise ValueError("money amount must be >= 0")

    def to_dict(self) -> dict:
        return {"amount": self.amount, "currency": self.currency}

    @classmethod
    def from_dict(cls, data: dict) -> "Money":
        return cls(amount=int(data["amount"]), currency=data.get("currency", DEFAULT_CURRENCY))

    def __str__(self) -> str:
        return fmt_cents(self.amount)


def fmt_cents(amount: int) -> str:
    """Format minor units as a dollar string, e.g. 730000 -> ``$7,300.00``."""
    sign = "-" if amount < 0 else ""
    units, cents = divmod(abs(amount), 100)
    return f"{sign}${units:,}.{cents:02d}"


class RateKind(str, Enum):
    """How a listing is priced: metered by the minute, or flat per case."""

    PER_MINUTE = "per_minute"
    PER_CASE = "per_case"


@dataclass(frozen=True)
class Rate:
    """Seller pricing for a listing."""

    kind: RateKind
    amount: Money

    @classmethod
    def per_minute(cls, cents: int, currency: str = DEFAULT_CURRENCY) -> "Rate":
        return cls(RateKind.PER_MINUTE, Money(cents, currency))

    @classmethod
    def per_case(cls, cents: int, currency: str = DEFAULT_CURRENCY) -> "Rate":
        return cls(RateKind.PER_CASE, Money(cents, currency))

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "amount": self.amount.to_dict()}

    @classmethod
    def from_dict(cls, data: dict) -> "Rate":
        return cls(RateKind(data["kind"]), Money.from_dict(data["amount"]))


def compute_charge(rate: Rate, metered_seconds: int) -> Money:
    """Charge for a conversation that metered the given number of seconds.

    Per-minute rates prorate to whole seconds with round-half-up on the
    final cent; per-case rates cost the flat amount regardless of
    duration.
    """
    if metered_seconds < 0:
        raise ValueError("metered_seconds must be >= 0")
    if rate.kind is RateKind.PER_CASE:
        return rate.amount
    cents = (rate.amount.amount * metered_seconds + 30) // 60
    return Money(cents, rate.amount.currency)


def split_commission(charge: Money, commission_bps: int) -> tuple[Money, Money]:
    """Split a charge into (platform share, seller credit).

    The platform share floors, so any rounding remainder goes to the
    seller and the two parts always sum to the charge exactly.
    """
    if not 0 <= commission_bps <= 10_000:
        raise ValueError("commission_bps must be within [0, 10000]")
    platform = charge.amount * commission_bps // 10_000
    return Money(platform, charge.currency), Money(charge.amount - platform, charge.currency)


def normalized_hourly_rate(rate: Rate) -> Optional[Money]:
    """A per-minute price expressed per hour; undefined for flat pricing."""
    if rate.kind is RateKind.PER_CASE:
        return None
    return Money(rate.amount.amount * 60, rate.amount.currency)


class Clock(Protocol):
    """Source of the current time as whole unix seconds."""

    def now(self) -> int:
        """Return the current unix timestamp; reads never go backwards."""
        ...


class SystemClock:
    """Wall clock truncated to whole seconds, clamped to be monotonic."""

    def __init__(self) -> None:
        self._last = 0
        self._lock = threading.Lock()

    def now(self) -> int:
        with self._lock:
            current = int(time.time())
            if current < self._last:
                current = self._last
            self._last = current
            return current


class SimulatedClock:
    """Manually advanced clock for deterministic runs."""

    DEFAULT_EPOCH = 1_767_225_600  # 2026-01-01T00:00:00Z

    def __init__(self, start: int = DEFAULT_EPOCH) -> None:
        self._now = start
        self._lock = threading.Lock()

    def now(self) -> int:
        with self._lock:
            return self._now

    def advance(self, seconds: int) -> int:
        if seconds < 0:
            raise ValueError("cannot advance a clock backwards")
        with self._lock:
            self._now += seconds
            return self._now

    def set(self, timestamp: int) -> int:
        with self._lock:
            if timestamp < self._now:
                raise ValueError(f"cannot move clock backwards ({timestamp} < {self._now})")
            self._now = timestamp
            return self._now


def to_rfc3339(timestamp: int) -> str:
    """Render a unix timestamp as an RFC 3339 UTC string."""
    return datetime.fromtimestamp(timestamp, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def from_rfc3339(text: str) -> int:
    """Parse an RFC 3339 string back to a unix timestamp."""
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    parsed = datetime.fromisoformat(text)
    if parsed.tzinfo is None:
        parsed = parsed.replace(tzinfo=timezone.utc)
    return int(parsed.timestamp())


@dataclass(frozen=True)
class EventRecord:
    """One line of the append-only event log."""

    seq: int
    occurred_at: int
    kind: str
    payload: dict

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "occurred_at": to_rfc3339(self.occurred_at),
            "kind": self.kind,
            "payload": self.payload,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EventRecord":
        return cls(
            seq=int(data["seq"]),
            occurred_at=from_rfc3339(data["occurred_at"]),
            kind=str(data["kind"]),
            payload=dict(data["payload"]),
        )
