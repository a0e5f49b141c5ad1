"""Session lifecycle: request, respond, appointments, live metering, settlement.

One state machine drives all three availability tiers. Every timeout is
computed from the caller-supplied clock value — nothing in this module
reads wall time — so identical inputs always produce identical
histories. Metering is mutual-acknowledgment: a second counts only once
both parties have acknowledged past it, so neither side can bill the
other for dead air.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .billing import Ledger
from .errors import (
    AppointmentRequired,
    DeadlinePassed,
    InvariantViolation,
    JoinWindowClosed,
    NotJoinable,
    NotL3Window,
    NotLive,
    NotPending,
    NotScheduled,
    NotYourSession,
    SelfDealing,
    SellerBusy,
    SellerOffDuty,
    SlotMisaligned,
    SlotUnavailable,
    UnknownBuyer,
    UnknownSession,
)
from .kernel import RateKind
from .registry import Registry, ServiceLevel

SLOT_SECONDS = 300


class SessionState(str, Enum):
    REQUESTED = "requested"
    PENDING = "pending"
    SCHEDULED = "scheduled"
    ACCEPTED = "accepted"
    LIVE = "live"
    ENDED = "ended"
    SETTLED = "settled"
    REJECTED = "rejected"
    EXPIRED = "expired"
    CANCELED = "canceled"


TERMINAL_STATES = frozenset(
    {SessionState.SETTLED, SessionState.REJECTED, SessionState.EXPIRED, SessionState.CANCELED}
)

LEGAL_TRANSITIONS: dict[SessionState, frozenset[SessionState]] = {
    SessionState.REQUESTED: frozenset(
        {SessionState.ACCEPTED, SessionState.PENDING, SessionState.REJECTED}
    ),
    SessionState.PENDING: frozenset(
        {SessionState.ACCEPTED, SessionState.REJECTED, SessionState.EXPIRED}
    ),
    SessionState.SCHEDULED: frozenset(
        {SessionState.ACCEPTED, SessionState.EXPIRED, SessionState.CANCELED}
    ),
    SessionState.ACCEPTED: frozenset({SessionState.LIVE, SessionState.EXPIRED}),
    SessionState.LIVE: frozenset({SessionState.ENDED}),
    SessionState.ENDED: frozenset({SessionState.SETTLED}),
    SessionState.SETTLED: frozenset(),
    SessionState.REJECTED: frozenset(),
    SessionState.EXPIRED: frozenset(),
    SessionState.CANCELED: frozenset(),
}


class EndReason(str, Enum):
    BUYER_ENDED = "BuyerEnded"
    SELLER_ENDED = "SellerEnded"
    HEARTBEAT_LOSS = "HeartbeatLoss"
    APPOINTMENT_NO_SHOW = "AppointmentNoShow"
    ADMIN_ABORT = "AdminAbort"


@dataclass
class Session:
    session_id: str
    buyer_id: str
    seller_id: str
    listing_id: str
    level: ServiceLevel
    state: SessionState
    requested_at: int
    respond_deadline: Optional[int] = None
    appointment_id: Optional[str] = None
    accepted_at: Optional[int] = None
    started_at: Optional[int] = None
    ended_at: Optional[int] = None
    metered_seconds: int = 0
    end_reason: Optional[EndReason] = None
    buyer_joined: bool = False
    seller_joined: bool = False
    buyer_ack: Optional[int] = None
    seller_ack: Optional[int] = None

    def is_party(self, account_id: str) -> bool:
        return account_id in (self.buyer_id, self.seller_id)

    def counterparty(self, account_id: str) -> str:
        return self.seller_id if account_id == self.buyer_id else self.buyer_id

    def mutual_ack(self) -> Optional[int]:
        if self.buyer_ack is None or self.seller_ack is None:
            return None
        return min(self.buyer_ack, self.seller_ack)

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "buyer_id": self.buyer_id,
            "seller_id": self.seller_id,
            "listing_id": self.listing_id,
            "level": self.level.value,
            "state": self.state.value,
            "requested_at": self.requested_at,
            "respond_deadline": self.respond_deadline,
            "appointment_id": self.appointment_id,
            "accepted_at": self.accepted_at,
            "started_at": self.started_at,
            "ended_at": self.ended_at,
            "metered_seconds": self.metered_seconds,
            "end_reason": self.end_reason.value if self.end_reason else None,
            "buyer_joined": self.buyer_joined,
            "seller_joined": self.seller_joined,
            "buyer_ack": self.buyer_ack,
            "seller_ack": self.seller_ack,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Session":
        return cls(
            session_id=data["session_id"],
            buyer_id=data["buyer_id"],
            seller_id=data["seller_id"],
            listing_id=data["listing_id"],
            level=ServiceLevel(data["level"]),
            state=SessionState(data["state"]),
            requested_at=int(data["requested_at"]),
            respond_deadline=data["respond_deadline"],
            appointment_id=data["appointment_id"],
            accepted_at=data["accepted_at"],
            started_at=data["started_at"],
            ended_at=data["ended_at"],
            metered_seconds=int(data["metered_seconds"]),
            end_reason=EndReason(data["end_reason"]) if data["end_reason"] else None,
            buyer_joined=bool(data["buyer_joined"]),
            seller_joined=bool(data["seller_joined"]),
            buyer_ack=data["buyer_ack"],
            seller_ack=data["seller_ack"],
        )


@dataclass(frozen=True)
class Appointment:
    appointment_id: str
    session_id: str
    listing_id: str
    buyer_id: str
    seller_id: str
    slot_start: int
    grace_seconds: int

    @property
    def join_deadline(self) -> int:
        return self.slot_start + self.grace_seconds

    def to_dict(self) -> dict:
        return {
            "appointment_id": self.appointment_id,
            "session_id": self.session_id,
            "listing_id": self.listing_id,
            "buyer_id": self.buyer_id,
            "seller_id": self.seller_id,
            "slot_start": self.slot_start,
            "grace_seconds": self.grace_seconds,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Appointment":
        return cls(
            appointment_id=data["appointment_id"],
            session_id=data["session_id"],
            listing_id=data["listing_id"],
            buyer_id=data["buyer_id"],
            seller_id=data["seller_id"],
            slot_start=int(data["slot_start"]),
            grace_seconds=int(data["grace_seconds"]),
        )


@dataclass(frozen=True)
class StateChange:
    """One transition applied by the clock sweep."""

    session_id: str
    from_state: SessionState
    to_state: SessionState
    reason: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "from_state": self.from_state.value,
            "to_state": self.to_state.value,
            "reason": self.reason,
        }


ENGAGED_STATES = frozenset({SessionState.PENDING, SessionState.ACCEPTED, SessionState.LIVE})


class SessionEngine:
    """Drives every session through the lifecycle table above.

    The engine owns no clock; callers pass ``now`` explicitly. After any
    state change the engine appends a notice to ``self.notices`` so the
    composition layer can fan out realtime frames and instrumentation.
    """

    def __init__(
        self,
        registry: Registry,
        ledger: Ledger,
        *,
        pending_timeout_s: int = 60,
        appointment_grace_s: int = 120,
        heartbeat_grace_s: int = 5,
        seller_capacity: int = 1,
    ) -> None:
        self._registry = registry
        self._ledger = ledger
        self.pending_timeout_s = pending_timeout_s
        self.appointment_grace_s = appointment_grace_s
        self.heartbeat_grace_s = heartbeat_grace_s
        self.seller_capacity = seller_capacity
        self._sessions: dict[str, Session] = {}
        self._appointments: dict[str, Appointment] = {}
        self._slot_index: dict[tuple[str, int], str] = {}
        self._active: set[str] = set()
        self._session_seq = 0
        self._appointment_seq = 0
        self.notices: list[dict] = []

    # --- lookups ---

    def get_session(self, session_id: str) -> Session:
        session = self._sessions.get(session_id)
        if session is None:
            raise UnknownSession(f"no such session: {session_id}")
        return session

    def get_appointment(self, appointment_id: str) -> Appointment:
        appointment = self._appointments.get(appointment_id)
        if appointment is None:
            raise UnknownSession(f"no such appointment: {appointment_id}")
        return appointment

    def sessions(self) -> list[Session]:
        return [self._sessions[key] for key in sorted(self._sessions)]

    def sessions_for_account(self, account_id: str) -> list[Session]:
        return [s for s in self.sessions() if s.is_party(account_id)]

    def engaged_count(self, seller_id: str) -> int:
        return sum(
            1
            for sid in self._active
            if (s := self._sessions[sid]).seller_id == seller_id and s.state in ENGAGED_STATES
        )

    # --- request / respond ---

    def request_session(self, buyer_id: str, listing_id: str, now: int) -> Session:
        if not self._registry.has_account(buyer_id):
            raise UnknownBuyer(f"no such buyer: {buyer_id}")
        listing = self._registry.get_listing(listing_id)
        if buyer_id == listing.seller_id:
            raise SelfDealing("cannot open a session against your own listing")
        if not listing.active:
            raise SellerOffDuty(f"listing {listing_id} is inactive")
        level = self._registry.level_at(listing_id, now)
        if level is None:
            raise SellerOffDuty(f"listing {listing_id} has no availability window now")
        if level is ServiceLevel.APPOINTMENT:
            raise AppointmentRequired(f"listing {listing_id} takes appointments only right now")
        if self.engaged_count(listing.seller_id) >= self.seller_capacity:
            raise SellerBusy(f"seller {listing.seller_id} is at capacity")

        session_id = f"ses-{self._session_seq + 1:06d}"
        self._ledger.open_hold(session_id, buyer_id, listing.seller_id, listing.rate, now)
        self._session_seq += 1
        session = Session(
            session_id=session_id,
            buyer_id=buyer_id,
            seller_id=listing.seller_id,
            listing_id=listing_id,
            level=level,
            state=SessionState.REQUESTED,
            requested_at=now,
        )
        self._sessions[session_id] = session
        self._active.add(session_id)
        if level is ServiceLevel.UNCONDITIONAL:
            self._transition(session, SessionState.ACCEPTED)
            session.accepted_at = now
        else:
            self._transition(session, SessionState.PENDING)
            session.respond_deadline = now + self.pending_timeout_s
        return session

    def respond(self, seller_id: str, session_id: str, decision: str, now: int) -> Session:
        session = self.get_session(session_id)
        if seller_id != session.seller_id:
            raise NotYourSession(f"{seller_id} is not the seller of {session_id}")
        if session.state is SessionState.EXPIRED:
            raise DeadlinePassed(f"response deadline for {session_id} has passed")
        if session.state is not SessionState.PENDING:
            raise NotPending(f"session {session_id} is {session.state.value}, not pending")
        if decision == "accept":
            self._transition(session, SessionState.ACCEPTED)
            session.accepted_at = now
        elif decision == "reject":
            self._finalize(session, SessionState.REJECTED)
            self._ledger.release_hold(session_id)
        else:
            raise ValueError(f"decision must be accept or reject, got {decision!r}")
        return session

    # --- appointments ---

    def book_appointment(self, buyer_id: str, listing_id: str, slot_start: int, now: int) -> Appointment:
        if not self._registry.has_account(buyer_id):
            raise UnknownBuyer(f"no such buyer: {buyer_id}")
        listing = self._registry.get_listing(listing_id)
        if buyer_id == listing.seller_id:
            raise SelfDealing("cannot book an appointment on your own listing")
        if not listing.active:
            raise SellerOffDuty(f"listing {listing_id} is inactive")
        if slot_start % SLOT_SECONDS != 0:
            raise SlotMisaligned(f"slot_start must align to {SLOT_SECONDS}s boundaries")
        if slot_start <= now:
            raise SlotUnavailable("appointments must be booked for a future slot")
        if self._registry.level_at(listing_id, slot_start) is not ServiceLevel.APPOINTMENT:
            raise NotL3Window(f"slot {slot_start} is not inside an appointment window")
        holder = self._slot_index.get((listing_id, slot_start))
        if holder is not None and self._sessions[holder].state not in TERMINAL_STATES:
            raise SlotUnavailable(f"slot {slot_start} on {listing_id} is already booked")

        session_id = f"ses-{self._session_seq + 1:06d}"
        self._ledger.open_hold(session_id, buyer_id, listing.seller_id, listing.rate, now)
        self._session_seq += 1
        self._appointment_seq += 1
        appointment = Appointment(
            appointment_id=f"apt-{self._appointment_seq:06d}",
            session_id=session_id,
            listing_id=listing_id,
            buyer_id=buyer_id,
            seller_id=listing.seller_id,
            slot_start=slot_start,
            grace_seconds=self.appointment_grace_s,
        )
        session = Session(
            session_id=session_id,
            buyer_id=buyer_id,
            seller_id=listing.seller_id,
            listing_id=listing_id,
            level=ServiceLevel.APPOINTMENT,
            state=SessionState.SCHEDULED,
            requested_at=now,
            appointment_id=appointment.appointment_id,
        )
        self._sessions[session_id] = session
        self._appointments[appointment.appointment_id] = appointment
        self._slot_index[(listing_id, slot_start)] = session_id
        self._active.add(session_id)
        self._notice(session)
        return appointment

    def cancel_appointment(self, party_id: str, session_id: str, now: int) -> Session:
        session = self.get_session(session_id)
        if not session.is_party(party_id):
            raise NotYourSession(f"{party_id} is not a party to {session_id}")
        if session.state is not SessionState.SCHEDULED:
            raise NotScheduled(f"session {session_id} is {session.state.value}, not scheduled")
        self._finalize(session, SessionState.CANCELED)
        self._ledger.release_hold(session_id)
        return session

    # --- joining and live flow ---

    def join(self, party_id: str, session_id: str, now: int) -> Session:
        session = self.get_session(session_id)
        if not session.is_party(party_id):
            raise NotYourSession(f"{party_id} is not a party to {session_id}")

        if session.state is SessionState.EXPIRED and session.end_reason is EndReason.APPOINTMENT_NO_SHOW:
            raise JoinWindowClosed(f"appointment grace for {session_id} elapsed")
        if session.state not in (SessionState.ACCEPTED, SessionState.SCHEDULED):
            raise NotJoinable(f"session {session_id} is {session.state.value}")

        if session.appointment_id is not None:
            appointment = self._appointments[session.appointment_id]
            if now < appointment.slot_start:
                raise NotJoinable(
                    f"appointment opens at {appointment.slot_start}, not before"
                )

        if session.state is SessionState.SCHEDULED:
            self._transition(session, SessionState.ACCEPTED)
            session.accepted_at = now

        if party_id == session.buyer_id:
            session.buyer_joined = True
        else:
            session.seller_joined = True

        if session.buyer_joined and session.seller_joined and session.state is SessionState.ACCEPTED:
            self._transition(session, SessionState.LIVE)
            session.started_at = now
            session.buyer_ack = now
            session.seller_ack = now
        return session

    def heartbeat(self, party_id: str, session_id: str, now: int) -> Session:
        session = self.get_session(session_id)
        if not session.is_party(party_id):
            raise NotYourSession(f"{party_id} is not a party to {session_id}")
        if session.state is not SessionState.LIVE:
            raise NotLive(f"session {session_id} is {session.state.value}")
        self._ack(session, party_id, now)
        self._enforce_cap(session, now)
        return session

    def end_session(self, party_id: str, session_id: str, now: int) -> Session:
        session = self.get_session(session_id)
        if not session.is_party(party_id):
            raise NotYourSession(f"{party_id} is not a party to {session_id}")
        if session.state is not SessionState.LIVE:
            raise NotLive(f"session {session_id} is {session.state.value}")
        self._ack(session, party_id, now)
        reason = (
            EndReason.BUYER_ENDED if party_id == session.buyer_id else EndReason.SELLER_ENDED
        )
        self._end_live(session, reason, now)
        return session

    # --- the clock sweep ---

    def tick(self, now: int) -> list[StateChange]:
        """Apply every overdue time-based transition as of ``now``.

        Idempotent: a second sweep at the same instant changes nothing.
        Sessions are visited in id order so histories are reproducible.
        """
        changes: list[StateChange] = []
        for session_id in sorted(self._active):
            session = self._sessions.get(session_id)
            if session is None or session.state in TERMINAL_STATES:
                continue
            before = session.state

            if session.state is SessionState.PENDING:
                if now > session.respond_deadline:
                    self._finalize(session, SessionState.EXPIRED)
                    self._ledger.release_hold(session_id)
                    changes.append(StateChange(session_id, before, session.state, "RespondTimeout"))
                continue

            if session.state in (SessionState.SCHEDULED, SessionState.ACCEPTED):
                deadline = self._join_deadline(session)
                if deadline is not None and now > deadline:
                    session.end_reason = (
                        EndReason.APPOINTMENT_NO_SHOW if session.appointment_id else None
                    )
                    self._finalize(session, SessionState.EXPIRED)
                    self._ledger.release_hold(session_id)
                    reason = (
                        EndReason.APPOINTMENT_NO_SHOW.value
                        if session.appointment_id
                        else "JoinTimeout"
                    )
                    changes.append(StateChange(session_id, before, session.state, reason))
                continue

            if session.state is SessionState.LIVE:
                stale = (now - session.buyer_ack > self.heartbeat_grace_s) or (
                    now - session.seller_ack > self.heartbeat_grace_s
                )
                if stale:
                    self._end_live(session, EndReason.HEARTBEAT_LOSS, now)
                    changes.append(
                        StateChange(session_id, before, session.state, EndReason.HEARTBEAT_LOSS.value)
                    )
        return changes

    def _join_deadline(self, session: Session) -> Optional[int]:
        if session.appointment_id is not None:
            return self._appointments[session.appointment_id].join_deadline
        if session.state is SessionState.ACCEPTED:
            return session.accepted_at + self.pending_timeout_s
        return None

    # --- internals ---

    def _ack(self, session: Session, party_id: str, now: int) -> None:
        if party_id == session.buyer_id:
            session.buyer_ack = max(session.buyer_ack, now)
        else:
            session.seller_ack = max(session.seller_ack, now)
        session.metered_seconds = session.mutual_ack() - session.started_at

    def _enforce_cap(self, session: Session, now: int) -> None:
        hold = self._ledger.hold_for_session(session.session_id)
        if hold is None or hold.rate.kind is not RateKind.PER_MINUTE:
            return
        accrued = self._ledger.accrued_charge(session.session_id, session.metered_seconds)
        if accrued.amount >= hold.cap.amount:
            self._end_live(session, EndReason.ADMIN_ABORT, now)

    def _end_live(self, session: Session, reason: EndReason, now: int) -> None:
        self._transition(session, SessionState.ENDED)
        session.ended_at = now
        session.end_reason = reason
        receipt = self._ledger.settle_session(session.session_id, session.metered_seconds, now)
        self._finalize(session, SessionState.SETTLED)
        self.notices[-1]["settlement_id"] = receipt.settlement_id

    def _transition(self, session: Session, to_state: SessionState) -> None:
        if to_state not in LEGAL_TRANSITIONS[session.state]:
            raise InvariantViolation(
                f"illegal transition {session.state.value} -> {to_state.value}"
            )
        session.state = to_state
        self._notice(session)

    def _finalize(self, session: Session, to_state: SessionState) -> None:
        self._transition(session, to_state)
        self._active.discard(session.session_id)

    def _notice(self, session: Session) -> None:
        self.notices.append(
            {
                "event": "state",
                "session_id": session.session_id,
                "state": session.state.value,
            }
        )

    # --- state transfer ---

    def to_state(self) -> dict:
        return {
            "sessions": [self._sessions[k].to_dict() for k in sorted(self._sessions)],
            "appointments": [self._appointments[k].to_dict() for k in sorted(self._appointments)],
            "session_seq": self._session_seq,
            "appointment_seq": self._appointment_seq,
        }

    def load_state(self, state: dict) -> None:
        self._sessions = {}
        self._active = set()
        for raw in state["sessions"]:
            session = Session.from_dict(raw)
            self._sessions[session.session_id] = session
            if session.state not in TERMINAL_STATES:
                self._active.add(session.session_id)
        self._appointments = {}
        self._slot_index = {}
        for raw in state["appointments"]:
            appointment = Appointment.from_dict(raw)
            self._appointments[appointment.appointment_id] = appointment
            self._slot_index[(appointment.listing_id, appointment.slot_start)] = (
                appointment.session_id
            )
        self._session_seq = int(state["session_seq"])
        self._appointment_seq = int(state["appointment_seq"])
