"""HTTP and realtime-channel surface over the marketplace.

REST endpoints map one-to-one onto platform operations. Each live
session gets a WebSocket channel per party that relays signaling and
chat frames opaquely between the two sides; every client frame doubles
as a liveness heartbeat, and the server mints ``meter`` frames (running
seconds and accrued charge) and a final ``ended`` frame itself — the
client never computes money.
"""

from __future__ import annotations

import asyncio
import json
import threading
from contextlib import asynccontextmanager
from typing import Literal, Optional, Union

from fastapi import Depends, FastAPI, Query, Request, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel, Field

from . import errors
from .errors import ChannelRefused, InvalidRate, PlatformError
from .kernel import Money, Rate, RateKind, to_rfc3339
from .marketplace import Marketplace
from .registry import Account
from .sessions import Session, SessionState

MAX_FRAME_BODY_BYTES = 64 * 1024
CLIENT_FRAME_TYPES = ("offer", "answer", "candidate", "chat")
CHANNEL_TERMINAL_STATES = ("settled", "rejected", "expired", "canceled")

WS_POLICY_VIOLATION = 1008
WS_TOO_BIG = 1009

# One status per error code; a test walks the errors module to keep this total.
ERROR_STATUS: dict[str, int] = {
    # unknown or unowned resources read as absent
    "UnknownAccount": 404,
    "UnknownSeller": 404,
    "UnknownBuyer": 404,
    "UnknownListing": 404,
    "UnknownSession": 404,
    "NotYourAccount": 404,
    "NotYourListing": 404,
    "NotYourSession": 404,
    "SeqOutOfRange": 404,
    # well-formed requests that conflict with current state
    "ExcessiveAccounts": 409,
    "SelfDealing": 409,
    "SellerOffDuty": 409,
    "AppointmentRequired": 409,
    "SellerBusy": 409,
    "InsufficientFunds": 409,
    "DuplicateHold": 409,
    "NotPending": 409,
    "DeadlinePassed": 409,
    "SlotUnavailable": 409,
    "NotL3Window": 409,
    "NotScheduled": 409,
    "NotJoinable": 409,
    "JoinWindowClosed": 409,
    "NotLive": 409,
    "NotEnded": 409,
    "NotSettled": 409,
    "DuplicateRating": 409,
    "OverlappingWindows": 409,
    "ChannelRefused": 409,
    # malformed or semantically invalid input
    "InvalidFingerprint": 422,
    "InvalidListing": 422,
    "InvalidRate": 422,
    "InvalidWindow": 422,
    "EmptyQuery": 422,
    "SlotMisaligned": 422,
    "StarsOutOfRange": 422,
    "ReviewTooLong": 422,
    "InvariantViolation": 422,
    "FrameTooLarge": 422,
    # infrastructure faults
    "CorruptLog": 500,
    "StorageFailure": 500,
}


class AuthRequired(Exception):
    """Missing or unrecognized bearer token."""


# --- request bodies ---


class RegisterBody(BaseModel):
    display_name: str
    fingerprint: str


class MoneyBody(BaseModel):
    amount: int
    currency: Optional[str] = None


class RateBody(BaseModel):
    kind: str
    amount: Union[int, MoneyBody]


class ListingBody(BaseModel):
    title: str
    description: str = ""
    tags: list[str] = Field(default_factory=list)
    rate: RateBody


class WindowBody(BaseModel):
    start: int
    end: int
    level: str


class AvailabilityBody(BaseModel):
    windows: list[WindowBody]


class SessionBody(BaseModel):
    listing_id: str


class RespondBody(BaseModel):
    decision: Literal["accept", "reject"]


class AppointmentBody(BaseModel):
    listing_id: str
    slot_start: int


class RatingBody(BaseModel):
    stars: int
    review: str = ""


def parse_rate(body: RateBody, currency: str) -> Rate:
    try:
        kind = RateKind(body.kind)
    except ValueError as exc:
        raise InvalidRate(f"unknown rate kind {body.kind!r}") from exc
    if isinstance(body.amount, MoneyBody):
        cents = body.amount.amount
        currency = body.amount.currency or currency
    else:
        cents = body.amount
    try:
        amount = Money(cents, currency)
    except (TypeError, ValueError) as exc:
        raise InvalidRate(str(exc)) from exc
    return Rate(kind, amount)


def session_payload(market: Marketplace, session: Session) -> dict:
    data = session.to_dict()
    data["accrued_charge"] = market.meter_snapshot(session.session_id)["accrued_charge"]
    return data


# --- the realtime channel hub ---


class Connection:
    def __init__(self, session_id: str, party_id: str) -> None:
        self.session_id = session_id
        self.party_id = party_id
        self.queue: asyncio.Queue = asyncio.Queue()
        # The loop the channel handler (and thus the queue consumer) runs
        # on.  Deliveries may originate from other threads, so wakeups must
        # be scheduled onto this exact loop.
        self.loop = asyncio.get_running_loop()


class ChannelHub:
    """Routes server-side frames to connected parties across threads.

    Mutating commands run in worker threads (REST) or a channel's event
    loop, so delivery always goes through ``call_soon_threadsafe`` onto the
    owning loop of each per-connection queue.
    """

    def __init__(self) -> None:
        self._connections: dict[tuple[str, str], Connection] = {}
        self._lock = threading.Lock()

    def register(self, session_id: str, party_id: str) -> Connection:
        with self._lock:
            key = (session_id, party_id)
            if key in self._connections:
                raise ChannelRefused(f"{party_id} already has a channel for {session_id}")
            connection = Connection(session_id, party_id)
            self._connections[key] = connection
            return connection

    def unregister(self, session_id: str, party_id: str) -> None:
        with self._lock:
            self._connections.pop((session_id, party_id), None)

    def deliver(self, session_id: str, party_id: str, frame: Optional[dict]) -> None:
        """Queue a frame (or a ``None`` close sentinel) for one party."""
        with self._lock:
            connection = self._connections.get((session_id, party_id))
        if connection is None:
            return
        connection.loop.call_soon_threadsafe(connection.queue.put_nowait, frame)


def create_app(market: Marketplace, *, background_tick: bool = False) -> FastAPI:
    """Build the ASGI app bound to one marketplace instance."""

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        task = asyncio.create_task(tick_forever()) if background_tick else None
        try:
            yield
        finally:
            if task is not None:
                task.cancel()

    app = FastAPI(title="parley", version="0.1.0", lifespan=lifespan)
    hub = ChannelHub()
    app.state.market = market
    app.state.hub = hub

    def mint_frame(frame_type: str, session_id: str, sender: str, body: object) -> dict:
        return {
            "frame_type": frame_type,
            "session_id": session_id,
            "sender": sender,
            "body": body,
            "sent_at": to_rfc3339(market.clock.now()),
        }

    def meter_frame(session_id: str) -> dict:
        snapshot = market.meter_snapshot(session_id)
        return mint_frame(
            "meter",
            session_id,
            "server",
            {
                "metered_seconds": snapshot["metered_seconds"],
                "accrued_charge": snapshot["accrued_charge"],
                "state": snapshot["state"],
            },
        )

    def on_notice(notice: dict) -> None:
        session_id = notice["session_id"]
        state = notice["state"]
        if state == SessionState.LIVE.value:
            frame = meter_frame(session_id)
            session = market.get_session(session_id)
            hub.deliver(session_id, session.buyer_id, frame)
            hub.deliver(session_id, session.seller_id, frame)
        elif state in CHANNEL_TERMINAL_STATES:
            session = market.get_session(session_id)
            frame = mint_frame(
                "ended",
                session_id,
                "server",
                {
                    "state": state,
                    "end_reason": session.end_reason.value if session.end_reason else None,
                    "settlement_id": notice.get("settlement_id"),
                },
            )
            for party in (session.buyer_id, session.seller_id):
                hub.deliver(session_id, party, frame)
                hub.deliver(session_id, party, None)

    market.add_listener(on_notice)

    async def tick_forever() -> None:
        loop = asyncio.get_running_loop()
        while True:
            await asyncio.sleep(1)
            await loop.run_in_executor(None, market.tick)

    # --- error envelopes ---

    @app.exception_handler(PlatformError)
    async def platform_error(request: Request, exc: PlatformError) -> JSONResponse:
        status = ERROR_STATUS.get(exc.code, 500)
        return JSONResponse(status_code=status, content={"code": exc.code, "message": str(exc)})

    @app.exception_handler(AuthRequired)
    async def auth_required(request: Request, exc: AuthRequired) -> JSONResponse:
        return JSONResponse(
            status_code=401,
            content={"code": "Unauthenticated", "message": "bearer token required"},
        )

    def require_account(request: Request) -> Account:
        header = request.headers.get("authorization", "")
        if header.lower().startswith("bearer "):
            token = header[7:].strip()
            account = market.account_by_token(token)
            if account is not None:
                return account
        raise AuthRequired()

    # --- accounts ---

    @app.post("/accounts", status_code=201)
    def register_account(body: RegisterBody) -> dict:
        account = market.register_account(body.display_name, body.fingerprint)
        return {"account": account.public_dict(), "token": account.token}

    @app.get("/accounts/{account_id}/balance")
    def account_balance(account_id: str, caller: Account = Depends(require_account)) -> dict:
        if caller.account_id != account_id:
            raise errors.NotYourAccount(f"{account_id} belongs to someone else")
        return market.balance(account_id)

    @app.get("/accounts/{account_id}/statement")
    def account_statement(
        account_id: str,
        caller: Account = Depends(require_account),
        from_ts: int = Query(default=0, alias="from"),
        to_ts: int = Query(default=1 << 62, alias="to"),
    ) -> dict:
        if caller.account_id != account_id:
            raise errors.NotYourAccount(f"{account_id} belongs to someone else")
        entries = market.statement(account_id, from_ts, to_ts)
        return {"account_id": account_id, "entries": [e.to_dict() for e in entries]}

    @app.get("/accounts/{account_id}/sessions")
    def account_sessions(account_id: str, caller: Account = Depends(require_account)) -> dict:
        if caller.account_id != account_id:
            raise errors.NotYourAccount(f"{account_id} belongs to someone else")
        sessions = market.sessions_for_account(account_id)
        return {"sessions": [session_payload(market, s) for s in sessions]}

    # --- listings and search ---

    @app.post("/listings", status_code=201)
    def create_listing(body: ListingBody, caller: Account = Depends(require_account)) -> dict:
        rate = parse_rate(body.rate, market.config.currency)
        listing = market.create_listing(
            caller.account_id, body.title, body.description, body.tags, rate
        )
        return listing.to_dict()

    @app.put("/listings/{listing_id}/availability")
    def set_availability(
        listing_id: str, body: AvailabilityBody, caller: Account = Depends(require_account)
    ) -> dict:
        windows = market.set_availability(
            caller.account_id,
            listing_id,
            [{"start": w.start, "end": w.end, "level": w.level} for w in body.windows],
        )
        return {"listing_id": listing_id, "windows": [w.to_dict() for w in windows]}

    @app.get("/listings/{listing_id}")
    def get_listing(listing_id: str) -> dict:
        return market.listing_detail(listing_id)

    @app.get("/search")
    def search(
        q: str = Query(default=""),
        max_price: Optional[int] = Query(default=None),
        max_results: int = Query(default=20),
    ) -> dict:
        results = market.search(q, max_results=max_results, max_per_minute_cents=max_price)
        cards = []
        for result in results:
            detail = market.listing_detail(result.listing_id)
            cards.append(
                {
                    **result.to_dict(),
                    "listing": detail["listing"],
                    "seller": detail["seller"],
                    "seller_summary": detail["seller_summary"],
                    "level_now": detail["level_now"],
                }
            )
        return {"query": q, "results": cards}

    # --- sessions ---

    @app.post("/sessions", status_code=201)
    def request_session(body: SessionBody, caller: Account = Depends(require_account)) -> dict:
        session = market.request_session(caller.account_id, body.listing_id)
        return session_payload(market, session)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str, caller: Account = Depends(require_account)) -> dict:
        session = market.get_session(session_id)
        if not session.is_party(caller.account_id):
            raise errors.NotYourSession(f"{caller.account_id} is not a party to {session_id}")
        payload = session_payload(market, session)
        rating = market.rating_for_session(session_id)
        payload["rating"] = rating.to_dict() if rating else None
        return payload

    @app.post("/sessions/{session_id}/respond")
    def respond(
        session_id: str, body: RespondBody, caller: Account = Depends(require_account)
    ) -> dict:
        session = market.respond(caller.account_id, session_id, body.decision)
        return session_payload(market, session)

    @app.post("/sessions/{session_id}/end")
    def end_session(session_id: str, caller: Account = Depends(require_account)) -> dict:
        session = market.end_session(caller.account_id, session_id)
        receipt = market.receipt_for_session(session_id)
        return {
            "session": session_payload(market, session),
            "receipt": receipt.to_dict() if receipt else None,
        }

    @app.get("/sessions/{session_id}/receipt")
    def get_receipt(session_id: str, caller: Account = Depends(require_account)) -> dict:
        session = market.get_session(session_id)
        if not session.is_party(caller.account_id):
            raise errors.NotYourSession(f"{caller.account_id} is not a party to {session_id}")
        receipt = market.receipt_for_session(session_id)
        if receipt is None:
            raise errors.NotSettled(f"session {session_id} has not settled")
        return receipt.to_dict()

    @app.post("/sessions/{session_id}/rating", status_code=201)
    def rate_session(
        session_id: str, body: RatingBody, caller: Account = Depends(require_account)
    ) -> dict:
        rating = market.rate_session(caller.account_id, session_id, body.stars, body.review)
        return rating.to_dict()

    # --- appointments ---

    @app.post("/appointments", status_code=201)
    def book_appointment(
        body: AppointmentBody, caller: Account = Depends(require_account)
    ) -> dict:
        appointment = market.book_appointment(caller.account_id, body.listing_id, body.slot_start)
        session = market.get_session(appointment.session_id)
        return {
            "appointment": appointment.to_dict(),
            "session": session_payload(market, session),
        }

    # --- instrumentation ---

    @app.get("/metrics/transaction-costs")
    def transaction_costs(
        caller: Account = Depends(require_account),
        format: str = Query(default="json"),
    ):
        if format == "csv":
            return PlainTextResponse(market.trace_csv(), media_type="text/csv")
        return {"rows": market.trace_rows()}

    # --- the channel ---

    async def refuse(ws: WebSocket, code: str) -> None:
        await ws.close(code=WS_POLICY_VIOLATION, reason=code)

    @app.websocket("/sessions/{session_id}/channel")
    async def channel(ws: WebSocket, session_id: str, token: str = Query(default="")) -> None:
        await ws.accept()
        account = market.account_by_token(token) if token else None
        if account is None:
            await refuse(ws, "Unauthenticated")
            return
        try:
            session = market.get_session(session_id)
        except PlatformError as exc:
            await refuse(ws, exc.code)
            return
        party_id = account.account_id
        if not session.is_party(party_id):
            await refuse(ws, "ChannelRefused")
            return
        if session.state.value in CHANNEL_TERMINAL_STATES or session.state is SessionState.ENDED:
            await refuse(ws, "ChannelRefused")
            return

        try:
            connection = hub.register(session_id, party_id)
        except PlatformError as exc:
            await refuse(ws, exc.code)
            return

        pump: Optional[asyncio.Task] = None
        try:
            if session.state is not SessionState.LIVE:
                try:
                    market.join(party_id, session_id)
                except PlatformError as exc:
                    await refuse(ws, exc.code)
                    return
            pump = asyncio.create_task(_pump(ws, connection))
            await _receive_loop(ws, session_id, party_id)
        except WebSocketDisconnect:
            pass
        finally:
            hub.unregister(session_id, party_id)
            if pump is not None:
                pump.cancel()

    async def _pump(ws: WebSocket, connection: Connection) -> None:
        while True:
            frame = await connection.queue.get()
            if frame is None:
                try:
                    await ws.close(code=1000, reason="ended")
                except RuntimeError:
                    pass
                return
            try:
                await ws.send_json(frame)
            except RuntimeError:
                return

    async def _receive_loop(ws: WebSocket, session_id: str, party_id: str) -> None:
        while True:
            raw = await ws.receive_text()
            if len(raw.encode("utf-8")) > MAX_FRAME_BODY_BYTES + 4096:
                await ws.close(code=WS_TOO_BIG, reason="FrameTooLarge")
                return
            try:
                frame = json.loads(raw)
                frame_type = frame["frame_type"]
            except (ValueError, KeyError, TypeError):
                await ws.close(code=WS_POLICY_VIOLATION, reason="BadFrame")
                return
            if frame_type not in CLIENT_FRAME_TYPES:
                await ws.close(code=WS_POLICY_VIOLATION, reason="BadFrame")
                return
            body = frame.get("body")
            if len(json.dumps(body).encode("utf-8")) > MAX_FRAME_BODY_BYTES:
                await ws.close(code=WS_TOO_BIG, reason="FrameTooLarge")
                return

            session = market.get_session(session_id)
            if session.state is SessionState.LIVE:
                try:
                    market.heartbeat(party_id, session_id)
                except PlatformError:
                    # The session ended under us; the ended frame is queued.
                    continue
            live = market.get_session(session_id).state is SessionState.LIVE

            keepalive = frame_type == "chat" and body in (None, {})
            if not keepalive:
                relay = mint_frame(frame_type, session_id, party_id, body)
                hub.deliver(session_id, session.counterparty(party_id), relay)
            if live:
                hub.deliver(session_id, party_id, meter_frame(session_id))

    return app
