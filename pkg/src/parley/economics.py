"""Transaction-cost instrumentation and seller income arithmetic.

The market's design premise is that search, bargaining, and enforcement
costs can be driven near zero: search is one query, prices are posted
(zero negotiation steps, enforced as an invariant), and escrow plus
ratings replace contract enforcement. This module records those costs
per transaction and provides the exact integer income calculators used
to size seller earnings and loan payback horizons.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional

from .errors import InvariantViolation
from .kernel import Money, Rate, RateKind


@dataclass(frozen=True)
class SearchCost:
    query_count: int = 0
    time_to_select_s: int = 0


@dataclass(frozen=True)
class BargainingCost:
    negotiation_steps: int = 0


@dataclass(frozen=True)
class EnforcementCost:
    escrow_used: bool = False
    rating_posted: bool = False


@dataclass(frozen=True)
class TransactionTrace:
    """Per-session record of the three classic transaction-cost buckets."""

    session_id: str
    search: SearchCost = field(default_factory=SearchCost)
    bargaining: BargainingCost = field(default_factory=BargainingCost)
    enforcement: EnforcementCost = field(default_factory=EnforcementCost)

    def __post_init__(self) -> None:
        if self.search.query_count < 0 or self.search.time_to_select_s < 0:
            raise InvariantViolation("search costs cannot be negative")
        if self.bargaining.negotiation_steps != 0:
            raise InvariantViolation(
                "posted-price market: negotiation_steps must be exactly 0"
            )

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "search": {
                "query_count": self.search.query_count,
                "time_to_select_s": self.search.time_to_select_s,
            },
            "bargaining": {"negotiation_steps": self.bargaining.negotiation_steps},
            "enforcement": {
                "escrow_used": self.enforcement.escrow_used,
                "rating_posted": self.enforcement.rating_posted,
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TransactionTrace":
        return cls(
            session_id=data["session_id"],
            search=SearchCost(
                query_count=int(data["search"]["query_count"]),
                time_to_select_s=int(data["search"]["time_to_select_s"]),
            ),
            bargaining=BargainingCost(
                negotiation_steps=int(data["bargaining"]["negotiation_steps"])
            ),
            enforcement=EnforcementCost(
                escrow_used=bool(data["enforcement"]["escrow_used"]),
                rating_posted=bool(data["enforcement"]["rating_posted"]),
            ),
        )


class TraceStore:
    """At most one transaction trace per session."""

    def __init__(self) -> None:
        self._traces: dict[str, TransactionTrace] = {}

    def record(self, trace: TransactionTrace) -> TransactionTrace:
        self._traces[trace.session_id] = trace
        return trace

    def get(self, session_id: str) -> Optional[TransactionTrace]:
        return self._traces.get(session_id)

    def mark_rating_posted(self, session_id: str) -> None:
        trace = self._traces.get(session_id)
        if trace is None or trace.enforcement.rating_posted:
            return
        self._traces[session_id] = TransactionTrace(
            session_id=trace.session_id,
            search=trace.search,
            bargaining=trace.bargaining,
            enforcement=EnforcementCost(
                escrow_used=trace.enforcement.escrow_used, rating_posted=True
            ),
        )

    def traces(self) -> list[TransactionTrace]:
        return [self._traces[k] for k in sorted(self._traces)]

    # --- aggregates ---

    def aggregate_rows(self) -> list[dict]:
        """Summary statistics per cost bucket: count, mean, p50, p95."""
        traces = self.traces()
        buckets = {
            "search.query_count": [t.search.query_count for t in traces],
            "search.time_to_select_s": [t.search.time_to_select_s for t in traces],
            "bargaining.negotiation_steps": [
                t.bargaining.negotiation_steps for t in traces
            ],
            "enforcement.escrow_used": [int(t.enforcement.escrow_used) for t in traces],
            "enforcement.rating_posted": [int(t.enforcement.rating_posted) for t in traces],
        }
        rows = []
        for bucket, values in buckets.items():
            rows.append(
                {
                    "bucket": bucket,
                    "count": len(values),
                    "mean": (sum(values) / len(values)) if values else 0.0,
                    "p50": percentile(values, 50),
                    "p95": percentile(values, 95),
                }
            )
        return rows

    def aggregate_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.DictWriter(buffer, fieldnames=["bucket", "count", "mean", "p50", "p95"])
        writer.writeheader()
        for row in self.aggregate_rows():
            writer.writerow(row)
        return buffer.getvalue()

    def to_state(self) -> dict:
        return {"traces": [t.to_dict() for t in self.traces()]}

    def load_state(self, state: dict) -> None:
        self._traces = {}
        for raw in state["traces"]:
            trace = TransactionTrace.from_dict(raw)
            self._traces[trace.session_id] = trace


def percentile(values: list[int], p: int) -> int:
    """Nearest-rank percentile; 0 for an empty series."""
    if not values:
        return 0
    ordered = sorted(values)
    rank = max(1, math.ceil(p / 100 * len(ordered)))
    return ordered[rank - 1]


# --- income arithmetic -----------------------------------------------------


@dataclass(frozen=True)
class IncomeScenario:
    """A seller working a per-minute rate a fixed number of minutes per day."""

    rate: Rate
    minutes_per_day: int
    days: int = 365
    commission_bps: int = 0

    def __post_init__(self) -> None:
        if self.rate.kind is not RateKind.PER_MINUTE:
            raise ValueError("income scenarios are defined for per-minute rates")
        if self.minutes_per_day < 0 or self.days < 0:
            raise ValueError("minutes_per_day and days must be >= 0")
        if not 0 <= self.commission_bps <= 10_000:
            raise ValueError("commission_bps must be within [0, 10000]")


def daily_gross(scenario: IncomeScenario) -> Money:
    return Money(
        scenario.rate.amount.amount * scenario.minutes_per_day,
        scenario.rate.amount.currency,
    )


def daily_net(scenario: IncomeScenario) -> Money:
    """Gross minus the platform's floored commission, per day."""
    gross = daily_gross(scenario)
    commission = gross.amount * scenario.commission_bps // 10_000
    return Money(gross.amount - commission, gross.currency)


def annual_income(scenario: IncomeScenario) -> Money:
    net = daily_net(scenario)
    return Money(net.amount * scenario.days, net.currency)


def days_to_recoup(loan: Money, scenario: IncomeScenario) -> Optional[int]:
    """Days of net earnings needed to cover a loan; None if it never recoups."""
    if loan.amount <= 0:
        return 0
    net = daily_net(scenario).amount
    if net == 0:
        return None
    return -(-loan.amount // net)
