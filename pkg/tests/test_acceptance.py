"""End-to-end acceptance gates.

Each test checks one headline guarantee of the platform and prints a
single PASS/FAIL verdict line (echoed again in the terminal summary).
The checks favour independent re-derivation: charges against exact
rational arithmetic, rankings against a brute-force rescorer, and the
session automaton against a locally restated transition table.
"""

from __future__ import annotations

import json
import random
import time
from fractions import Fraction

import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient
from starlette.websockets import WebSocketDisconnect

from parley import Marketplace, PlatformConfig, Rate, ServiceLevel, SimulatedClock
from parley.billing import PLATFORM_ACCOUNT, Ledger
from parley.cli import main as cli_main
from parley.economics import IncomeScenario, daily_net, days_to_recoup
from parley.errors import AppointmentRequired, ExcessiveAccounts, PlatformError
from parley.eventlog import FileEventLog
from parley.gateway import create_app
from parley.kernel import Money
from parley.matching import MatchWeights
from parley.scenarios import Scenario, ScenarioRunner

from conftest import ACCEPTANCE_LINES, assert_replay_equivalent
from test_eventlog import random_history
from test_matching import (
    DEFAULT_WEIGHTS,
    module_search,
    oracle_search,
    random_catalog,
    random_query,
)


def verdict(criterion: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'}  {criterion} — {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


# --- 1. income arithmetic ---------------------------------------------------


def test_income_arithmetic():
    started = time.perf_counter()
    result = CliRunner().invoke(
        cli_main,
        [
            "calc",
            "annual-income",
            "--rate-cents",
            "100",
            "--minutes-per-day",
            "200",
            "--days",
            "365",
            "--commission-bps",
            "0",
            "--json",
        ],
    )
    elapsed = time.perf_counter() - started
    data = json.loads(result.output)
    ok = (
        result.exit_code == 0
        and data["annual_income"] == "$73,000.00"
        and data["annual_income_cents"] == 7_300_000
        and elapsed < 1.0
    )
    verdict(
        "income arithmetic",
        ok,
        f"100¢/min × 200 min/day × 365 days → {data['annual_income']} "
        f"(exact integers, {elapsed:.3f}s)",
    )


# --- 2. loan recoup ----------------------------------------------------------


def test_loan_recoup_sweep():
    started = time.perf_counter()
    plan = IncomeScenario(rate=Rate.per_minute(100), minutes_per_day=10)
    net = daily_net(plan).amount
    worst = 0
    for loan in range(1, 60_001):
        days = days_to_recoup(Money(loan), plan)
        assert days == -(-loan // net)  # exact ceiling against the daily net
        worst = max(worst, days)
    elapsed = time.perf_counter() - started
    ok = worst <= 60 and days_to_recoup(Money(60_000), plan) == 60 and elapsed < 5.0
    verdict(
        "loan recoup",
        ok,
        f"every loan 1..60000¢ at 10 min/day × 100¢/min repays in ≤ {worst} days "
        f"({elapsed:.2f}s)",
    )


# --- 3. conservation ---------------------------------------------------------


def charge_oracle(rate: Rate, seconds: int) -> int:
    if rate.kind.value == "per_case":
        return rate.amount.amount
    return int(Fraction(rate.amount.amount * seconds, 60) + Fraction(1, 2))


def test_conservation_suite():
    started = time.perf_counter()
    sessions_per_bps = 2_000
    total = 0
    for bps in (0, 1, 2000, 9999, 10000):
        rng = random.Random(86_400 + bps)
        ledger = Ledger(commission_bps=bps, endowment_cents=10**9)
        buyers = [f"acct-b{i:02d}" for i in range(20)]
        sellers = [f"acct-s{i:02d}" for i in range(20)]
        for account in buyers + sellers:
            ledger.create_account(account)
        commissions = 0
        now = 0
        for n in range(sessions_per_bps):
            session_id = f"ses-{bps}-{n:05d}"
            rate = Rate.per_minute(rng.randint(1, 10_000))
            seconds = rng.randint(0, 7_200)
            buyer, seller = rng.choice(buyers), rng.choice(sellers)
            hold = ledger.open_hold(session_id, buyer, seller, rate, now)
            receipt = ledger.settle_session(session_id, seconds, now + seconds)
            charge = receipt.charge.amount
            assert charge == receipt.commission.amount + receipt.seller_credit.amount
            assert charge == min(charge_oracle(rate, seconds), hold.cap.amount)
            assert receipt.commission.amount == charge * bps // 10_000
            commissions += receipt.commission.amount
            now += 1
            total += 1
        by_settlement: dict[str, int] = {}
        for entry in ledger.entries():
            by_settlement[entry.settlement_id] = (
                by_settlement.get(entry.settlement_id, 0) + entry.delta
            )
        assert all(delta == 0 for delta in by_settlement.values())
        assert ledger.conservation_residual() == 0
        assert ledger.available(PLATFORM_ACCOUNT).amount == commissions
    elapsed = time.perf_counter() - started
    ok = total == 10_000 and elapsed < 30.0
    verdict(
        "conservation",
        ok,
        f"{total} randomized settlements over 5 commission rates: every "
        f"settlement zero-sum, charge = commission + credit, residual 0 "
        f"({elapsed:.2f}s)",
    )


# --- 4. session automaton ----------------------------------------------------

# The legal transition set, restated here independently of the engine.
REFERENCE_TRANSITIONS: dict[str, set[str]] = {
    "requested": {"accepted", "pending", "rejected"},
    "pending": {"accepted", "rejected", "expired"},
    "scheduled": {"accepted", "expired", "canceled"},
    "accepted": {"live", "expired"},
    "live": {"ended"},
    "ended": {"settled"},
    "settled": set(),
    "rejected": set(),
    "expired": set(),
    "canceled": set(),
}

TRACE_OPS = (
    "advance",
    "advance",
    "lurch",
    "tick",
    "join_buyer",
    "join_seller",
    "join_both",
    "respond",
    "respond_wrong_party",
    "beat_buyer",
    "beat_seller",
    "beat_both",
    "end",
    "end_twice",
    "cancel",
    "warp_to_slot",
)


def run_trace(market, clock, rng, buyer, seller, listings, next_slot):
    """One random operation/tick trace against a single session."""
    kind = rng.choice(("L1", "L1", "L2", "L2", "L3"))
    slot = None
    if kind == "L3":
        slot = max(((clock.now() // 300) + 2) * 300, next_slot[0])
        next_slot[0] = slot + 300
        appointment = market.book_appointment(
            buyer.account_id, listings["L3"].listing_id, slot
        )
        session_id = appointment.session_id
    else:
        session_id = market.request_session(
            buyer.account_id, listings[kind].listing_id
        ).session_id

    for _ in range(rng.randrange(3, 12)):
        op = rng.choice(TRACE_OPS)
        try:
            if op == "advance":
                clock.advance(rng.choice((1, 1, 2, 5)))
            elif op == "lurch":
                clock.advance(rng.choice((31, 61, 121, 301)))
            elif op == "tick":
                market.tick()
            elif op == "join_buyer":
                market.join(buyer.account_id, session_id)
            elif op == "join_seller":
                market.join(seller.account_id, session_id)
            elif op == "join_both":
                market.join(buyer.account_id, session_id)
                market.join(seller.account_id, session_id)
            elif op == "respond":
                market.respond(
                    seller.account_id, session_id, rng.choice(("accept", "reject"))
                )
            elif op == "respond_wrong_party":
                market.respond(buyer.account_id, session_id, "accept")
            elif op == "beat_buyer":
                market.heartbeat(buyer.account_id, session_id)
            elif op == "beat_seller":
                market.heartbeat(seller.account_id, session_id)
            elif op == "beat_both":
                clock.advance(1)
                market.heartbeat(buyer.account_id, session_id)
                market.heartbeat(seller.account_id, session_id)
            elif op == "end":
                market.end_session(
                    rng.choice((buyer, seller)).account_id, session_id
                )
            elif op == "end_twice":
                market.end_session(buyer.account_id, session_id)
                market.end_session(buyer.account_id, session_id)
            elif op == "cancel" and kind == "L3":
                market.cancel_appointment(
                    rng.choice((buyer, seller)).account_id, session_id
                )
            elif op == "warp_to_slot" and slot is not None:
                target = slot + rng.choice((0, 60, 119, 120, 121))
                if target > clock.now():
                    clock.set(target)
        except PlatformError:
            pass  # rejected commands must leave no transition behind
    return session_id, kind


def run_trace_batch(seed: int, batch_size: int):
    rng = random.Random(seed)
    clock = SimulatedClock()
    market = Marketplace.create(
        PlatformConfig(
            max_accounts_per_fingerprint=10,
            seller_capacity=batch_size + 1,
            endowment_cents=10**9,
        ),
        clock=clock,
    )
    notices: list[tuple[str, str]] = []
    market.add_listener(lambda n: notices.append((n["session_id"], n["state"])))
    seller = market.register_account("Sam", "fp-s")
    buyer = market.register_account("Carol", "fp-b")
    listings = {}
    now = clock.now()
    for kind, level in (
        ("L1", ServiceLevel.UNCONDITIONAL),
        ("L2", ServiceLevel.CONDITIONAL),
        ("L3", ServiceLevel.APPOINTMENT),
    ):
        listing = market.create_listing(
            seller.account_id, f"Window {kind}", "", [], Rate.per_minute(100)
        )
        market.set_availability(
            seller.account_id, listing.listing_id, [(now, now + 10**9, level)]
        )
        listings[kind] = listing

    born: dict[str, str] = {}
    next_slot = [0]
    for _ in range(batch_size):
        session_id, kind = run_trace(
            market, clock, rng, buyer, seller, listings, next_slot
        )
        born[session_id] = kind
    # Flush every straggler through its timeout so paths complete.
    clock.advance(10**6)
    market.tick()
    return market, notices, born


def test_session_automaton():
    started = time.perf_counter()
    traces = 0
    transitions = 0
    illegal: list[str] = []
    for seed in range(200):
        market, notices, born = run_trace_batch(seed, batch_size=50)
        paths: dict[str, list[str]] = {}
        for session_id, state in notices:
            paths.setdefault(session_id, []).append(state)
        for session_id, kind in born.items():
            seen = paths.get(session_id, [])
            if kind == "L3":
                assert seen and seen[0] == "scheduled"
                path = seen
            else:
                path = ["requested"] + seen
            for a, b in zip(path, path[1:]):
                transitions += 1
                if b not in REFERENCE_TRANSITIONS[a]:
                    illegal.append(f"{session_id}: {a} -> {b}")
            if kind == "L1" and ("pending" in path or "rejected" in path):
                illegal.append(f"{session_id}: L1 path {path}")
            ended, settled = path.count("ended"), path.count("settled")
            if ended != settled or settled > 1 or (ended and path[-1] != "settled"):
                illegal.append(f"{session_id}: ended×{ended} settled×{settled}")
            traces += 1
        # No session may be left mid-flight after the flush.
        census = market.session_census()
        for state in ("pending", "accepted", "live", "ended"):
            assert census.get(state, 0) == 0, census

    # Idempotency probe: settling the same session twice changes nothing.
    ledger = Ledger(commission_bps=2000, endowment_cents=10**6)
    ledger.create_account("acct-b")
    ledger.create_account("acct-s")
    ledger.open_hold("ses-1", "acct-b", "acct-s", Rate.per_minute(100), now=0)
    first = ledger.settle_session("ses-1", 90, now=90)
    posted = len(ledger.entries())
    second = ledger.settle_session("ses-1", 7_200, now=9_999)
    assert second.to_dict() == first.to_dict()
    assert len(ledger.entries()) == posted
    assert ledger.conservation_residual() == 0

    elapsed = time.perf_counter() - started
    ok = traces >= 10_000 and not illegal
    verdict(
        "session automaton",
        ok,
        f"{traces} random op/tick traces, {transitions} observed transitions, "
        f"{len(illegal)} illegal; L1 never pends/rejects; ended→settled exactly "
        f"once, double-settle inert ({elapsed:.2f}s)",
    )
    assert not illegal, illegal[:5]


# --- 5. service-level semantics ----------------------------------------------


def service_level_script():
    clock = SimulatedClock()
    market = Marketplace.create(
        PlatformConfig(max_accounts_per_fingerprint=10), clock=clock
    )
    facts: dict[str, object] = {}
    seller = market.register_account("Sam", "fp-s")
    buyer = market.register_account("Carol", "fp-b")
    base = clock.now()
    listings = {}
    for kind, level in (
        ("L1", ServiceLevel.UNCONDITIONAL),
        ("L2", ServiceLevel.CONDITIONAL),
        ("L3", ServiceLevel.APPOINTMENT),
    ):
        listing = market.create_listing(
            seller.account_id, f"Window {kind}", "", [], Rate.per_minute(100)
        )
        market.set_availability(
            seller.account_id, listing.listing_id, [(base, base + 30 * 86_400, level)]
        )
        listings[kind] = listing

    # L1: accepted instantly, no seller involvement possible.
    s1 = market.request_session(buyer.account_id, listings["L1"].listing_id)
    facts["l1_state"] = s1.state.value
    facts["l1_accepted_immediately"] = s1.accepted_at == s1.requested_at == clock.now()
    market.end_session(buyer.account_id, _go_live(market, clock, s1.session_id))

    # L2: accept works at exactly the 60 s deadline.
    s2 = market.request_session(buyer.account_id, listings["L2"].listing_id)
    facts["l2_state"] = s2.state.value
    facts["l2_deadline_offset"] = s2.respond_deadline - clock.now()
    clock.advance(60)
    facts["l2_tick_at_deadline"] = [c.to_dict() for c in market.tick()]
    facts["l2_accept_at_deadline"] = market.respond(
        seller.account_id, s2.session_id, "accept"
    ).state.value
    market.end_session(seller.account_id, _go_live(market, clock, s2.session_id))

    # L2: reject is terminal.
    s3 = market.request_session(buyer.account_id, listings["L2"].listing_id)
    facts["l2_reject"] = market.respond(
        seller.account_id, s3.session_id, "reject"
    ).state.value

    # L2: the timeout fires the first instant past 60 s, not before.
    s4 = market.request_session(buyer.account_id, listings["L2"].listing_id)
    clock.advance(60)
    facts["l2_timeout_not_before"] = [c.to_dict() for c in market.tick()]
    clock.advance(1)
    facts["l2_timeout"] = [c.to_dict() for c in market.tick()]

    # L3: direct requests are refused; bookings expire as no-shows
    # the first instant past slot + 120 s grace.
    try:
        market.request_session(buyer.account_id, listings["L3"].listing_id)
        facts["l3_direct_request"] = "allowed"
    except AppointmentRequired:
        facts["l3_direct_request"] = "AppointmentRequired"
    slot = ((clock.now() // 300) + 2) * 300
    appointment = market.book_appointment(
        buyer.account_id, listings["L3"].listing_id, slot
    )
    facts["l3_booked_state"] = market.get_session(appointment.session_id).state.value
    clock.set(slot + 120)
    facts["l3_noshow_not_before"] = [c.to_dict() for c in market.tick()]
    clock.advance(1)
    facts["l3_noshow"] = [c.to_dict() for c in market.tick()]
    facts["l3_noshow_charge"] = market.meter_snapshot(appointment.session_id)[
        "accrued_charge"
    ]
    return market, facts


def _go_live(market, clock, session_id: str) -> str:
    session = market.get_session(session_id)
    market.join(session.buyer_id, session_id)
    market.join(session.seller_id, session_id)
    return session_id


def test_service_level_semantics():
    started = time.perf_counter()
    market_a, facts_a = service_level_script()
    market_b, facts_b = service_level_script()
    elapsed = time.perf_counter() - started

    assert facts_a["l1_state"] == "accepted"
    assert facts_a["l1_accepted_immediately"] is True
    assert facts_a["l2_state"] == "pending"
    assert facts_a["l2_deadline_offset"] == 60
    assert facts_a["l2_tick_at_deadline"] == []
    assert facts_a["l2_accept_at_deadline"] == "accepted"
    assert facts_a["l2_reject"] == "rejected"
    assert facts_a["l2_timeout_not_before"] == []
    (timeout,) = facts_a["l2_timeout"]
    assert (timeout["from_state"], timeout["to_state"]) == ("pending", "expired")
    assert timeout["reason"] == "RespondTimeout"
    assert facts_a["l3_direct_request"] == "AppointmentRequired"
    assert facts_a["l3_booked_state"] == "scheduled"
    assert facts_a["l3_noshow_not_before"] == []
    (noshow,) = facts_a["l3_noshow"]
    assert (noshow["from_state"], noshow["to_state"]) == ("scheduled", "expired")
    assert noshow["reason"] == "AppointmentNoShow"
    assert facts_a["l3_noshow_charge"]["amount"] == 0

    deterministic = (
        facts_a == facts_b
        and market_a.state_digest() == market_b.state_digest()
        and Marketplace.replay(market_a.log).state_digest() == market_a.state_digest()
    )
    verdict(
        "service levels",
        deterministic,
        "L1 auto-accepts; L2 accept/reject honoured through exactly 60s then "
        "expires; L3 refuses direct requests and no-shows after the 120s grace; "
        f"two runs byte-identical ({elapsed:.2f}s)",
    )


# --- 6. metering through the live channel -------------------------------------


KEEPALIVE = {"frame_type": "chat", "body": {}}


def open_channel_pair(client, clock, market, fingerprint_tag):
    seller = client.post(
        "/accounts",
        json={"display_name": "Sam", "fingerprint": f"fp-s-{fingerprint_tag}"},
    ).json()
    buyer = client.post(
        "/accounts",
        json={"display_name": "Carol", "fingerprint": f"fp-b-{fingerprint_tag}"},
    ).json()
    listing = client.post(
        "/listings",
        json={
            "title": f"Live help {fingerprint_tag}",
            "rate": {"kind": "per_minute", "amount": 100},
        },
        headers={"Authorization": f"Bearer {seller['token']}"},
    ).json()
    now = clock.now()
    client.put(
        f"/listings/{listing['listing_id']}/availability",
        json={"windows": [{"start": now, "end": now + 86_400, "level": "L1"}]},
        headers={"Authorization": f"Bearer {seller['token']}"},
    )
    session = client.post(
        "/sessions",
        json={"listing_id": listing["listing_id"]},
        headers={"Authorization": f"Bearer {buyer['token']}"},
    ).json()
    return session["session_id"], buyer, seller


def test_metering_through_the_channel():
    started = time.perf_counter()
    clock = SimulatedClock()
    market = Marketplace.create(
        PlatformConfig(max_accounts_per_fingerprint=5), clock=clock
    )
    client = TestClient(create_app(market))

    # 90 seconds of mutual 1 Hz keepalives bill exactly 150¢.
    session_id, buyer, seller = open_channel_pair(client, clock, market, "a")
    connect = lambda sid, who: client.websocket_connect(
        f"/sessions/{sid}/channel?token={who['token']}"
    )
    with connect(session_id, buyer) as bws, connect(session_id, seller) as sws:
        assert bws.receive_json()["body"]["state"] == "live"
        assert sws.receive_json()["body"]["state"] == "live"
        last = None
        for _ in range(90):
            clock.advance(1)
            bws.send_json(KEEPALIVE)
            bws.receive_json()
            sws.send_json(KEEPALIVE)
            last = sws.receive_json()
        assert last["body"]["metered_seconds"] == 90
        assert last["body"]["accrued_charge"]["amount"] == 150
        receipt = client.post(
            f"/sessions/{session_id}/end",
            headers={"Authorization": f"Bearer {buyer['token']}"},
        ).json()["receipt"]
        for ws in (bws, sws):
            assert ws.receive_json()["frame_type"] == "ended"
            with pytest.raises(WebSocketDisconnect):
                ws.receive_json()
    mutual_charge = receipt["charge"]["amount"]

    # One-sided silence: the call dies on the first probe past the grace
    # window and bills only the mutually acknowledged seconds.
    session_id, buyer, seller = open_channel_pair(client, clock, market, "b")
    with connect(session_id, buyer) as bws, connect(session_id, seller) as sws:
        bws.receive_json()
        sws.receive_json()
        for _ in range(30):
            clock.advance(1)
            bws.send_json(KEEPALIVE)
            bws.receive_json()
            sws.send_json(KEEPALIVE)
            sws.receive_json()
        grace = market.config.heartbeat_grace_s
        frame = None
        for _ in range(grace + 1):  # the seller falls silent
            clock.advance(1)
            bws.send_json(KEEPALIVE)
            frame = bws.receive_json()
        assert frame["frame_type"] == "ended"
        assert frame["body"]["end_reason"] == "HeartbeatLoss"
    lost = market.get_session(session_id)
    lost_receipt = market.receipt_for_session(session_id)
    elapsed = time.perf_counter() - started
    ok = (
        mutual_charge == 150
        and lost.metered_seconds == 30
        and lost_receipt.charge.amount == 50
    )
    verdict(
        "metering",
        ok,
        f"90s mutual 1Hz over the channel → {mutual_charge}¢; one-sided silence "
        f"ends past the {market.config.heartbeat_grace_s}s grace billing the 30 "
        f"mutual seconds → {lost_receipt.charge.amount}¢ ({elapsed:.2f}s)",
    )


# --- 7. fraud cap -------------------------------------------------------------


def test_fraud_cap():
    started = time.perf_counter()
    registrations = 0
    for cap in (1, 2, 3):
        for sequence in range(30):
            rng = random.Random(cap * 1_000 + sequence)
            market = Marketplace.create(
                PlatformConfig(max_accounts_per_fingerprint=cap),
                clock=SimulatedClock(),
            )
            counts: dict[str, int] = {}
            for n in range(60):
                fingerprint = f"fp-{rng.randrange(8)}"
                registrations += 1
                if counts.get(fingerprint, 0) >= cap:
                    with pytest.raises(ExcessiveAccounts):
                        market.register_account(f"Acct {n}", fingerprint)
                else:
                    market.register_account(f"Acct {n}", fingerprint)
                    counts[fingerprint] = counts.get(fingerprint, 0) + 1
            assert all(v <= cap for v in counts.values())
    elapsed = time.perf_counter() - started
    verdict(
        "fraud cap",
        True,
        f"caps 1..3 × 30 random sequences × 60 registrations ({registrations} "
        f"total): per-fingerprint count never exceeds the cap ({elapsed:.2f}s)",
    )


# --- 8. matching oracle --------------------------------------------------------


def test_matching_oracle():
    started = time.perf_counter()
    rng = random.Random(52_000)
    compared = 0
    for _ in range(1_000):
        catalog, levels, ratings = random_catalog(rng)
        text = random_query(rng)
        max_price = rng.choice([None, rng.randint(1, 5_000)])
        expected = oracle_search(
            catalog, levels, ratings, DEFAULT_WEIGHTS, text, max_per_minute=max_price
        )
        got = module_search(
            catalog, levels, ratings, DEFAULT_WEIGHTS, text, max_per_minute=max_price
        )
        assert [r.listing_id for r in got] == [lid for lid, _ in expected]
        for result, (_, score) in zip(got, expected):
            assert result.total_score == pytest.approx(score, rel=0, abs=1e-12)
        compared += len(got)

    reordered = 0
    for _ in range(1_000):
        catalog, levels, ratings = random_catalog(rng)
        text = random_query(rng)
        base = module_search(catalog, levels, ratings, DEFAULT_WEIGHTS, text)
        factor = rng.choice([0.01, 0.5, 4.0, 250.0])
        scaled = module_search(
            catalog,
            levels,
            ratings,
            MatchWeights(
                lexical=DEFAULT_WEIGHTS.lexical * factor,
                reputation=DEFAULT_WEIGHTS.reputation * factor,
                price=DEFAULT_WEIGHTS.price * factor,
                availability=DEFAULT_WEIGHTS.availability * factor,
            ),
            text,
        )
        if [r.listing_id for r in base] != [r.listing_id for r in scaled]:
            reordered += 1

    demoted = 0
    checked = 0
    for _ in range(1_000):
        catalog, levels, ratings = random_catalog(rng)
        text = random_query(rng)
        base = module_search(catalog, levels, ratings, DEFAULT_WEIGHTS, text)
        if not base:
            continue
        target = rng.choice(base)
        seller_id = next(
            lst.seller_id for lst in catalog if lst.listing_id == target.listing_id
        )
        boosted = dict(ratings)
        boosted[seller_id] = Fraction(5)
        after = module_search(catalog, levels, boosted, DEFAULT_WEIGHTS, text)
        rank_after = next(
            r.rank for r in after if r.listing_id == target.listing_id
        )
        checked += 1
        if rank_after > target.rank:
            demoted += 1

    elapsed = time.perf_counter() - started
    ok = compared > 1_000 and reordered == 0 and demoted == 0 and checked > 500
    verdict(
        "matching oracle",
        ok,
        f"1000 catalogs ≤50 listings equal brute-force rescoring ({compared} "
        f"rows); positive weight scaling reordered {reordered}/1000; a 5-star "
        f"boost demoted {demoted}/{checked} ({elapsed:.2f}s)",
    )


# --- 9. replay determinism ------------------------------------------------------


def test_replay_determinism(tmp_path):
    started = time.perf_counter()

    # Every scenario run replays field-for-field from its own log.
    for name in ("buyer_workflow", "seller_workflow"):
        path = str(tmp_path / f"{name}.jsonl")
        runner = ScenarioRunner(
            Scenario.builtin(name), log=FileEventLog(path, fsync=False)
        )
        report = runner.run()
        assert report["replay_matches"] is True
        twin = Marketplace.replay(FileEventLog(path, fsync=False))
        assert twin.to_state() == runner.market.to_state()
        runner.market.close()

    # Property runs replay too.
    for seed in range(8):
        assert_replay_equivalent(random_history(seed))

    # Snapshot + tail equals a full replay.
    path = str(tmp_path / "snapshot_run.jsonl")
    clock = SimulatedClock()
    market = Marketplace.create(
        PlatformConfig(max_accounts_per_fingerprint=10),
        clock=clock,
        log=FileEventLog(path, fsync=False),
    )
    seller = market.register_account("Sam", "fp-s")
    buyer = market.register_account("Carol", "fp-b")
    listing = market.create_listing(
        seller.account_id, "Quick consult", "", [], Rate.per_minute(100)
    )
    market.set_availability(
        seller.account_id,
        listing.listing_id,
        [(clock.now(), clock.now() + 86_400, ServiceLevel.UNCONDITIONAL)],
    )
    snap = market.write_state_snapshot(str(tmp_path / "mid.snap"))
    session = market.request_session(buyer.account_id, listing.listing_id)
    market.join(buyer.account_id, session.session_id)
    market.join(seller.account_id, session.session_id)
    for _ in range(45):
        clock.advance(1)
        market.heartbeat(buyer.account_id, session.session_id)
        market.heartbeat(seller.account_id, session.session_id)
    market.end_session(buyer.account_id, session.session_id)
    market.close()
    tail_log = FileEventLog(path, fsync=False)
    restored = Marketplace.from_snapshot(snap, tail_log)
    full = Marketplace.replay(tail_log)
    identical = restored.to_state() == full.to_state()

    elapsed = time.perf_counter() - started
    verdict(
        "replay determinism",
        identical,
        "scenario and property runs replay field-for-field; snapshot + tail "
        f"equals full replay ({elapsed:.2f}s)",
    )


# --- 10. canonical workflows ------------------------------------------------------


def test_canonical_workflows():
    started = time.perf_counter()
    outcomes = {}
    for name in ("buyer_workflow", "seller_workflow"):
        result = CliRunner().invoke(cli_main, ["scenario", name])
        outcomes[name] = result.exit_code
        assert "replay     match" in result.output
    elapsed = time.perf_counter() - started
    ok = set(outcomes.values()) == {0}
    verdict(
        "canonical workflows",
        ok,
        f"builtin buyer and seller scripts exit "
        f"{sorted(outcomes.values())} ({elapsed:.2f}s)",
    )
