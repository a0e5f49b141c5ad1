"""Two-sided marketplace for live, per-minute-metered conversations.

Sellers list conversational micro-services at posted per-minute or
per-case rates; buyers find them, hold live metered sessions over a
realtime channel, pay through escrowed settlement, and rate the result.
State is event-sourced: an append-only log is the single source of
truth, and replaying it reproduces a deployment exactly.
"""

from .billing import Hold, HoldState, Ledger, LedgerEntry, SettlementReceipt
from .config import ConfigError, PlatformConfig
from .economics import (
    BargainingCost,
    EnforcementCost,
    IncomeScenario,
    SearchCost,
    TransactionTrace,
    annual_income,
    daily_net,
    days_to_recoup,
)
from .eventlog import EventRecord, FileEventLog, MemoryEventLog, read_log
from .kernel import (
    Clock,
    Money,
    Rate,
    RateKind,
    SimulatedClock,
    SystemClock,
    compute_charge,
    fmt_cents,
    normalized_hourly_rate,
    split_commission,
)
from .marketplace import Marketplace, audit_log
from .matching import MatchQuery, MatchResult, MatchWeights
from .registry import Account, AvailabilityWindow, Registry, ServiceLevel, ServiceListing
from .reputation import Rating, ReputationBook, SellerSummary
from .sessions import (
    Appointment,
    EndReason,
    Session,
    SessionEngine,
    SessionState,
    StateChange,
)

__version__ = "0.1.0"

__all__ = [
    "Account",
    "Appointment",
    "AvailabilityWindow",
    "BargainingCost",
    "Clock",
    "ConfigError",
    "EndReason",
    "EnforcementCost",
    "EventRecord",
    "FileEventLog",
    "Hold",
    "HoldState",
    "IncomeScenario",
    "Ledger",
    "LedgerEntry",
    "Marketplace",
    "MatchQuery",
    "MatchResult",
    "MatchWeights",
    "MemoryEventLog",
    "Money",
    "PlatformConfig",
    "Rate",
    "RateKind",
    "Rating",
    "Registry",
    "ReputationBook",
    "SearchCost",
    "SellerSummary",
    "ServiceLevel",
    "ServiceListing",
    "Session",
    "SessionEngine",
    "SessionState",
    "SettlementReceipt",
    "SimulatedClock",
    "StateChange",
    "SystemClock",
    "TransactionTrace",
    "annual_income",
    "audit_log",
    "compute_charge",
    "daily_net",
    "days_to_recoup",
    "fmt_cents",
    "normalized_hourly_rate",
    "read_log",
    "split_commission",
    "__version__",
]
