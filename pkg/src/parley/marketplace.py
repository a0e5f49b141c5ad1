"""Composition root: every subsystem wired over an event-sourced core.

Each mutating operation runs under one lock in two phases: a clock sweep
applies any overdue timeouts (logged as a ``tick`` event only when it
changed something), then the command itself executes validate-first and
is appended to the log only on success. Replaying the log re-executes
the same commands with their recorded clock values, so a replayed
instance matches the live one field for field — timestamps live in the
events, never in the replayer's clock.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
from typing import Callable, Iterable, Optional

from .billing import Ledger, SettlementReceipt
from .config import PlatformConfig
from .economics import EnforcementCost, TraceStore, TransactionTrace
from .errors import CorruptLog, PlatformError, SeqOutOfRange, UnknownSession
from .eventlog import (
    EventRecord,
    FileEventLog,
    MemoryEventLog,
    read_log,
    read_snapshot,
    write_snapshot,
)
from .kernel import Clock, Money, Rate, SimulatedClock
from .matching import MatchIndex, MatchQuery, MatchResult
from .matching import search as run_search
from .registry import Account, AvailabilityWindow, Registry, ServiceLevel, ServiceListing
from .reputation import Rating, ReputationBook, SellerSummary
from .sessions import Appointment, Session, SessionEngine, SessionState, StateChange

logger = logging.getLogger(__name__)

Listener = Callable[[dict], None]


class Marketplace:
    """One deployment of the market: stores, engine, ledger, and the log."""

    def __init__(
        self,
        config: PlatformConfig,
        *,
        clock: Optional[Clock] = None,
        log=None,
    ) -> None:
        self.config = config
        self.clock: Clock = clock if clock is not None else SimulatedClock()
        self.log = log if log is not None else MemoryEventLog()
        self._lock = threading.RLock()
        self._listeners: list[Listener] = []
        self._build_stores()
        self._handlers: dict[str, Callable[[dict, int], object]] = {
            "register_account": self._do_register_account,
            "create_listing": self._do_create_listing,
            "deactivate_listing": self._do_deactivate_listing,
            "set_availability": self._do_set_availability,
            "request_session": self._do_request_session,
            "respond": self._do_respond,
            "book_appointment": self._do_book_appointment,
            "cancel_appointment": self._do_cancel_appointment,
            "join": self._do_join,
            "heartbeat": self._do_heartbeat,
            "end_session": self._do_end_session,
            "rate_session": self._do_rate_session,
            "record_trace": self._do_record_trace,
        }

    def _build_stores(self) -> None:
        config = self.config
        self._registry = Registry(
            max_accounts_per_fingerprint=config.max_accounts_per_fingerprint,
            currency=config.currency,
        )
        self._ledger = Ledger(
            commission_bps=config.commission_bps,
            hold_cap_minutes=config.hold_cap_minutes,
            endowment_cents=config.endowment_cents,
            currency=config.currency,
        )
        self._engine = SessionEngine(
            self._registry,
            self._ledger,
            pending_timeout_s=config.pending_timeout_s,
            appointment_grace_s=config.appointment_grace_s,
            heartbeat_grace_s=config.heartbeat_grace_s,
            seller_capacity=config.seller_capacity,
        )
        self._reputation = ReputationBook()
        self._traces = TraceStore()
        self._index = MatchIndex()

    # --- construction ---

    @classmethod
    def create(cls, config: PlatformConfig, *, clock: Optional[Clock] = None, log=None) -> "Marketplace":
        """Start fresh, or resume by replaying an existing non-empty log."""
        log = log if log is not None else MemoryEventLog()
        records = log.records()
        if records:
            return cls.replay_records(records, clock=clock, log=log)
        market = cls(config, clock=clock, log=log)
        market.log.append(market.clock.now(), "init", {"config": config.to_dict(), "version": 1})
        return market

    @classmethod
    def replay_records(
        cls,
        records: Iterable[EventRecord],
        *,
        clock: Optional[Clock] = None,
        log=None,
    ) -> "Marketplace":
        records = list(records)
        if not records or records[0].kind != "init" or records[0].seq != 1:
            raise CorruptLog(1, "log must begin with an init event at seq 1")
        config = PlatformConfig.from_dict(records[0].payload["config"])
        market = cls(config, clock=clock, log=log)
        for record in records[1:]:
            market._replay_record(record)
        return market

    @classmethod
    def replay(cls, log, *, upto: Optional[int] = None, clock: Optional[Clock] = None) -> "Marketplace":
        """Rebuild state purely from a log; the result gets its own fresh log."""
        records = log.records()
        if upto is not None:
            if not 1 <= upto <= len(records):
                raise SeqOutOfRange(f"log has {len(records)} events, asked for {upto}")
            records = records[:upto]
        return cls.replay_records(records)

    @classmethod
    def from_snapshot(
        cls, snapshot_path: str, log, *, clock: Optional[Clock] = None
    ) -> "Marketplace":
        """Restore from a snapshot, then replay only the log tail after it."""
        as_of_seq, state = read_snapshot(snapshot_path)
        records = log.records()
        if as_of_seq > len(records):
            raise SeqOutOfRange(
                f"snapshot is at seq {as_of_seq} but log has only {len(records)} events"
            )
        config = PlatformConfig.from_dict(state["config"])
        market = cls(config, clock=clock, log=log)
        market.load_state(state)
        for record in records[as_of_seq:]:
            market._replay_record(record)
        return market

    def _replay_record(self, record: EventRecord) -> None:
        try:
            self._run_command(record.kind, record.payload, record.occurred_at)
        except PlatformError as exc:
            raise CorruptLog(
                record.seq, f"replay diverged at seq {record.seq}: {exc.code}: {exc}"
            ) from exc

    # --- command plumbing ---

    def add_listener(self, listener: Listener) -> None:
        """Subscribe to post-commit state notices (live instances only)."""
        self._listeners.append(listener)

    def _fan_out(self, notices: list[dict]) -> None:
        for notice in notices:
            for listener in self._listeners:
                try:
                    listener(notice)
                except Exception:
                    logger.exception("marketplace listener failed")

    def _drain_and_instrument(self) -> list[dict]:
        notices = self._engine.notices[:]
        self._engine.notices.clear()
        for notice in notices:
            if notice["state"] == SessionState.SETTLED.value:
                session_id = notice["session_id"]
                if self._traces.get(session_id) is None:
                    self._traces.record(
                        TransactionTrace(
                            session_id=session_id,
                            enforcement=EnforcementCost(escrow_used=True, rating_posted=False),
                        )
                    )
        return notices

    def _run_command(self, kind: str, payload: dict, now: int) -> tuple[object, list[dict]]:
        if kind == "tick":
            result: object = self._engine.tick(now)
        elif kind == "init":
            raise CorruptLog(0, "duplicate init event")
        else:
            handler = self._handlers.get(kind)
            if handler is None:
                raise CorruptLog(0, f"unknown command kind {kind!r}")
            result = handler(payload, now)
        notices = self._drain_and_instrument()
        if kind == "rate_session":
            self._traces.mark_rating_posted(payload["session_id"])
        return result, notices

    def _sweep(self, now: int) -> None:
        changes = self._engine.tick(now)
        notices = self._drain_and_instrument()
        if changes:
            self.log.append(now, "tick", {"changes": [c.to_dict() for c in changes]})
            self._maybe_snapshot()
        self._fan_out(notices)

    def _execute(self, kind: str, payload: dict) -> object:
        now = self.clock.now()
        with self._lock:
            if kind != "tick":
                self._sweep(now)
            result, notices = self._run_command(kind, payload, now)
            if kind != "tick" or result:
                self.log.append(now, kind, payload)
                self._maybe_snapshot()
            self._fan_out(notices)
            return result

    def _maybe_snapshot(self) -> None:
        every = self.config.snapshot_every
        if (
            every > 0
            and isinstance(self.log, FileEventLog)
            and self.log.last_seq % every == 0
        ):
            write_snapshot(self.snapshot_path(), self.log.last_seq, self.to_state())

    def snapshot_path(self) -> str:
        return getattr(self.log, "path", "events.jsonl") + ".snap"

    # --- mutating operations ---

    def register_account(self, display_name: str, fingerprint: str) -> Account:
        return self._execute(
            "register_account",
            {"display_name": display_name, "fingerprint": fingerprint},
        )

    def create_listing(
        self, seller_id: str, title: str, description: str, tags: list[str], rate: Rate
    ) -> ServiceListing:
        return self._execute(
            "create_listing",
            {
                "seller_id": seller_id,
                "title": title,
                "description": description,
                "tags": list(tags),
                "rate": rate.to_dict(),
            },
        )

    def deactivate_listing(self, seller_id: str, listing_id: str) -> ServiceListing:
        return self._execute(
            "deactivate_listing", {"seller_id": seller_id, "listing_id": listing_id}
        )

    def set_availability(
        self, seller_id: str, listing_id: str, windows: list
    ) -> list[AvailabilityWindow]:
        normalized = []
        for w in windows:
            if isinstance(w, dict):
                start, end, level = w["start"], w["end"], w["level"]
            else:
                start, end, level = w
            normalized.append(
                {"start": int(start), "end": int(end), "level": ServiceLevel(level).value}
            )
        return self._execute(
            "set_availability",
            {"seller_id": seller_id, "listing_id": listing_id, "windows": normalized},
        )

    def request_session(self, buyer_id: str, listing_id: str) -> Session:
        return self._execute(
            "request_session", {"buyer_id": buyer_id, "listing_id": listing_id}
        )

    def respond(self, seller_id: str, session_id: str, decision: str) -> Session:
        return self._execute(
            "respond",
            {"seller_id": seller_id, "session_id": session_id, "decision": decision},
        )

    def book_appointment(self, buyer_id: str, listing_id: str, slot_start: int) -> Appointment:
        return self._execute(
            "book_appointment",
            {"buyer_id": buyer_id, "listing_id": listing_id, "slot_start": int(slot_start)},
        )

    def cancel_appointment(self, party_id: str, session_id: str) -> Session:
        return self._execute(
            "cancel_appointment", {"party_id": party_id, "session_id": session_id}
        )

    def join(self, party_id: str, session_id: str) -> Session:
        return self._execute("join", {"party_id": party_id, "session_id": session_id})

    def heartbeat(self, party_id: str, session_id: str) -> Session:
        return self._execute("heartbeat", {"party_id": party_id, "session_id": session_id})

    def end_session(self, party_id: str, session_id: str) -> Session:
        return self._execute("end_session", {"party_id": party_id, "session_id": session_id})

    def tick(self) -> list[StateChange]:
        return self._execute("tick", {})

    def rate_session(self, buyer_id: str, session_id: str, stars: int, review: str = "") -> Rating:
        return self._execute(
            "rate_session",
            {
                "buyer_id": buyer_id,
                "session_id": session_id,
                "stars": stars,
                "review": review,
            },
        )

    def record_trace(
        self,
        session_id: str,
        *,
        search: Optional[dict] = None,
        bargaining: Optional[dict] = None,
        enforcement: Optional[dict] = None,
    ) -> TransactionTrace:
        return self._execute(
            "record_trace",
            {
                "session_id": session_id,
                "search": dict(search or {}),
                "bargaining": dict(bargaining or {}),
                "enforcement": dict(enforcement or {}),
            },
        )

    # --- command handlers (also the replay path) ---

    def _do_register_account(self, payload: dict, now: int) -> Account:
        account = self._registry.register_account(
            payload["display_name"], payload["fingerprint"], now
        )
        self._ledger.create_account(account.account_id)
        return account

    def _do_create_listing(self, payload: dict, now: int) -> ServiceListing:
        listing = self._registry.create_listing(
            payload["seller_id"],
            payload["title"],
            payload["description"],
            payload["tags"],
            Rate.from_dict(payload["rate"]),
            now,
        )
        self._index.index_listing(listing)
        return listing

    def _do_deactivate_listing(self, payload: dict, now: int) -> ServiceListing:
        listing = self._registry.deactivate_listing(
            payload["seller_id"], payload["listing_id"]
        )
        self._index.remove_listing(listing.listing_id)
        return listing

    def _do_set_availability(self, payload: dict, now: int) -> list[AvailabilityWindow]:
        windows = [
            (w["start"], w["end"], ServiceLevel(w["level"])) for w in payload["windows"]
        ]
        return self._registry.set_availability(
            payload["seller_id"], payload["listing_id"], windows
        )

    def _do_request_session(self, payload: dict, now: int) -> Session:
        return self._engine.request_session(payload["buyer_id"], payload["listing_id"], now)

    def _do_respond(self, payload: dict, now: int) -> Session:
        return self._engine.respond(
            payload["seller_id"], payload["session_id"], payload["decision"], now
        )

    def _do_book_appointment(self, payload: dict, now: int) -> Appointment:
        return self._engine.book_appointment(
            payload["buyer_id"], payload["listing_id"], payload["slot_start"], now
        )

    def _do_cancel_appointment(self, payload: dict, now: int) -> Session:
        return self._engine.cancel_appointment(payload["party_id"], payload["session_id"], now)

    def _do_join(self, payload: dict, now: int) -> Session:
        return self._engine.join(payload["party_id"], payload["session_id"], now)

    def _do_heartbeat(self, payload: dict, now: int) -> Session:
        return self._engine.heartbeat(payload["party_id"], payload["session_id"], now)

    def _do_end_session(self, payload: dict, now: int) -> Session:
        return self._engine.end_session(payload["party_id"], payload["session_id"], now)

    def _do_rate_session(self, payload: dict, now: int) -> Rating:
        session = self._engine.get_session(payload["session_id"])
        return self._reputation.rate_session(
            session, payload["buyer_id"], payload["stars"], payload["review"], now
        )

    def _do_record_trace(self, payload: dict, now: int) -> TransactionTrace:
        self._engine.get_session(payload["session_id"])
        trace = TransactionTrace.from_dict(
            {
                "session_id": payload["session_id"],
                "search": {
                    "query_count": payload["search"].get("query_count", 0),
                    "time_to_select_s": payload["search"].get("time_to_select_s", 0),
                },
                "bargaining": {
                    "negotiation_steps": payload["bargaining"].get("negotiation_steps", 0)
                },
                "enforcement": {
                    "escrow_used": payload["enforcement"].get("escrow_used", False),
                    "rating_posted": payload["enforcement"].get("rating_posted", False),
                },
            }
        )
        return self._traces.record(trace)

    # --- reads ---

    def get_account(self, account_id: str) -> Account:
        with self._lock:
            return self._registry.get_account(account_id)

    def account_by_token(self, token: str) -> Optional[Account]:
        with self._lock:
            return self._registry.account_by_token(token)

    def get_listing(self, listing_id: str) -> ServiceListing:
        with self._lock:
            return self._registry.get_listing(listing_id)

    def listings(self) -> list[ServiceListing]:
        with self._lock:
            return self._registry.listings()

    def listing_windows(self, listing_id: str) -> list[AvailabilityWindow]:
        with self._lock:
            return self._registry.windows_for_listing(listing_id)

    def level_now(self, listing_id: str) -> Optional[ServiceLevel]:
        with self._lock:
            return self._registry.level_at(listing_id, self.clock.now())

    def listing_detail(self, listing_id: str) -> dict:
        with self._lock:
            listing = self._registry.get_listing(listing_id)
            windows = self._registry.windows_for_listing(listing_id)
            seller = self._registry.get_account(listing.seller_id)
            summary = self._reputation.seller_summary(listing.seller_id)
            ratings = self._reputation.ratings_for_seller(listing.seller_id)
            level = self._registry.level_at(listing_id, self.clock.now())
            return {
                "listing": listing.to_dict(),
                "windows": [w.to_dict() for w in windows],
                "seller": seller.public_dict(),
                "seller_summary": summary.to_dict(),
                "reviews": [r.to_dict() for r in ratings],
                "level_now": level.value if level else None,
            }

    def search(
        self,
        text: str,
        *,
        max_results: int = 20,
        max_per_minute_cents: Optional[int] = None,
    ) -> list[MatchResult]:
        with self._lock:
            query = MatchQuery(
                text=text,
                max_results=max_results,
                max_per_minute=None
                if max_per_minute_cents is None
                else Money(int(max_per_minute_cents), self.config.currency),
            )
            return run_search(
                query,
                self.clock.now(),
                self._index,
                self._registry.get_listing,
                self._registry.level_at,
                self._reputation.average,
                self.config.match_weights,
            )

    def get_session(self, session_id: str) -> Session:
        with self._lock:
            return self._engine.get_session(session_id)

    def get_appointment(self, appointment_id: str) -> Appointment:
        with self._lock:
            return self._engine.get_appointment(appointment_id)

    def sessions_for_account(self, account_id: str) -> list[Session]:
        with self._lock:
            self._registry.get_account(account_id)
            return self._engine.sessions_for_account(account_id)

    def balance(self, account_id: str) -> dict:
        with self._lock:
            return self._ledger.balance(account_id)

    def statement(self, account_id: str, from_ts: int, to_ts: int) -> list:
        with self._lock:
            return self._ledger.statement(account_id, from_ts, to_ts)

    def receipt_for_session(self, session_id: str) -> Optional[SettlementReceipt]:
        with self._lock:
            self._engine.get_session(session_id)
            return self._ledger.receipt_for_session(session_id)

    def seller_summary(self, seller_id: str) -> SellerSummary:
        with self._lock:
            self._registry.get_account(seller_id)
            return self._reputation.seller_summary(seller_id)

    def rating_for_session(self, session_id: str) -> Optional[Rating]:
        with self._lock:
            self._engine.get_session(session_id)
            return self._reputation.rating_for_session(session_id)

    def trace_for_session(self, session_id: str) -> Optional[TransactionTrace]:
        with self._lock:
            self._engine.get_session(session_id)
            return self._traces.get(session_id)

    def trace_rows(self) -> list[dict]:
        with self._lock:
            return self._traces.aggregate_rows()

    def trace_csv(self) -> str:
        with self._lock:
            return self._traces.aggregate_csv()

    def meter_snapshot(self, session_id: str) -> dict:
        with self._lock:
            session = self._engine.get_session(session_id)
            accrued = self._ledger.accrued_charge(session_id, session.metered_seconds)
            return {
                "session_id": session_id,
                "state": session.state.value,
                "metered_seconds": session.metered_seconds,
                "accrued_charge": accrued.to_dict(),
            }

    def conservation_residual(self) -> int:
        with self._lock:
            return self._ledger.conservation_residual()

    # --- state transfer and audit ---

    def to_state(self) -> dict:
        with self._lock:
            return {
                "config": self.config.to_dict(),
                "registry": self._registry.to_state(),
                "sessions": self._engine.to_state(),
                "ledger": self._ledger.to_state(),
                "reputation": self._reputation.to_state(),
                "traces": self._traces.to_state(),
            }

    def load_state(self, state: dict) -> None:
        with self._lock:
            self._registry.load_state(state["registry"])
            self._engine.load_state(state["sessions"])
            self._ledger.load_state(state["ledger"])
            self._reputation.load_state(state["reputation"])
            self._traces.load_state(state["traces"])
            self._index = MatchIndex()
            for listing in self._registry.listings():
                if listing.active:
                    self._index.index_listing(listing)

    def state_digest(self) -> str:
        blob = json.dumps(self.to_state(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def state_at(self, seq: int) -> dict:
        """State as of a historical sequence number, via prefix replay."""
        records = self.log.records()
        if not 1 <= seq <= len(records):
            raise SeqOutOfRange(f"log has {len(records)} events, asked for {seq}")
        return Marketplace.replay_records(records[:seq]).to_state()

    def write_state_snapshot(self, path: Optional[str] = None) -> str:
        with self._lock:
            target = path or self.snapshot_path()
            write_snapshot(target, self.log.last_seq, self.to_state())
            return target

    def session_census(self) -> dict[str, int]:
        with self._lock:
            census: dict[str, int] = {}
            for session in self._engine.sessions():
                census[session.state.value] = census.get(session.state.value, 0) + 1
            return census

    def close(self) -> None:
        self.log.close()


def audit_log(path: str) -> dict:
    """Strictly replay a log file and report integrity facts about it."""
    records = read_log(path, recover=False)
    market = Marketplace.replay_records(records)
    return {
        "event_count": len(records),
        "state_digest": market.state_digest(),
        "conservation_residual": market.conservation_residual(),
        "accounts": len(market._registry.to_state()["accounts"]),
        "session_census": market.session_census(),
    }
