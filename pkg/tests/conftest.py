"""Shared fixtures and cross-cutting assertion helpers."""

from __future__ import annotations

import pytest

from parley import Marketplace, PlatformConfig, Rate, ServiceLevel, SimulatedClock


# Verdict lines collected by the acceptance suite, echoed at the end of the
# run so each criterion's pass/fail is visible even with output capture on.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config) -> None:
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def clock() -> SimulatedClock:
    return SimulatedClock()


@pytest.fixture
def market(clock: SimulatedClock) -> Marketplace:
    return Marketplace.create(PlatformConfig(), clock=clock)


def assert_replay_equivalent(market: Marketplace) -> None:
    """The master invariant: replaying the log reproduces live state exactly."""
    twin = Marketplace.replay(market.log)
    assert twin.to_state() == market.to_state()
    assert twin.state_digest() == market.state_digest()


def open_call(
    market: Marketplace,
    clock: SimulatedClock,
    *,
    rate: Rate | None = None,
    level: ServiceLevel = ServiceLevel.UNCONDITIONAL,
    window_seconds: int = 24 * 3600,
):
    """Register a seller and buyer, list one service, and return the handles."""
    seller = market.register_account("Sam", "fp-seller")
    buyer = market.register_account("Carol", "fp-buyer")
    listing = market.create_listing(
        seller.account_id,
        "Fix a leaking kitchen trap",
        "Walk you through tightening the slip nuts under the sink.",
        ["plumbing", "diy"],
        rate or Rate.per_minute(100),
    )
    now = clock.now()
    market.set_availability(
        seller.account_id,
        listing.listing_id,
        [(now, now + window_seconds, level)],
    )
    return seller, buyer, listing


def run_live_seconds(
    market: Marketplace, clock: SimulatedClock, session_id: str, seconds: int
) -> None:
    """Drive a live session with mutual 1 Hz heartbeats for the given span."""
    session = market.get_session(session_id)
    for _ in range(seconds):
        clock.advance(1)
        market.heartbeat(session.buyer_id, session_id)
        market.heartbeat(session.seller_id, session_id)
