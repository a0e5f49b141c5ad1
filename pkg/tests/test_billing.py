"""Escrow holds, idempotent settlement, and exact conservation.

The conservation property is the backbone: across thousands of seeded
random sessions at every interesting commission rate, money is moved
but never created or destroyed.
"""

from __future__ import annotations

import random

import pytest

from parley import Ledger, Rate
from parley.billing import PLATFORM_ACCOUNT, HoldState, hold_cap_for
from parley.errors import DuplicateHold, InsufficientFunds, UnknownAccount
from parley.kernel import compute_charge

NOW = 1_767_225_600


def fresh(**kwargs) -> Ledger:
    ledger = Ledger(**kwargs)
    ledger.create_account("buyer")
    ledger.create_account("seller")
    return ledger


class TestAccountsAndBalances:
    def test_endowment_seeds_available(self):
        ledger = fresh(endowment_cents=5000)
        assert ledger.available("buyer").amount == 5000
        assert ledger.held("buyer").amount == 0

    def test_platform_account_starts_at_zero(self):
        ledger = fresh()
        assert ledger.available(PLATFORM_ACCOUNT).amount == 0

    def test_create_account_is_idempotent(self):
        ledger = fresh()
        ledger.create_account("buyer")  # a second create must not re-endow
        assert ledger.available("buyer").amount == ledger.endowment_cents

    def test_unknown_account(self):
        with pytest.raises(UnknownAccount):
            fresh().available("nobody")


class TestHolds:
    def test_cap_is_rate_times_cap_minutes(self):
        assert hold_cap_for(Rate.per_minute(100), 30).amount == 3000
        assert hold_cap_for(Rate.per_case(2500), 30).amount == 2500

    def test_open_hold_reserves_the_cap(self):
        ledger = fresh()
        ledger.open_hold("ses-1", "buyer", "seller", Rate.per_minute(100), NOW)
        assert ledger.held("buyer").amount == 3000
        assert ledger.available("buyer").amount == 7000

    def test_insufficient_funds(self):
        ledger = fresh(endowment_cents=2999)
        with pytest.raises(InsufficientFunds):
            ledger.open_hold("ses-1", "buyer", "seller", Rate.per_minute(100), NOW)

    def test_exact_funds_suffice(self):
        ledger = fresh(endowment_cents=3000)
        ledger.open_hold("ses-1", "buyer", "seller", Rate.per_minute(100), NOW)
        assert ledger.available("buyer").amount == 0

    def test_one_hold_per_session(self):
        ledger = fresh()
        ledger.open_hold("ses-1", "buyer", "seller", Rate.per_minute(1), NOW)
        with pytest.raises(DuplicateHold):
            ledger.open_hold("ses-1", "buyer", "seller", Rate.per_minute(1), NOW)

    def test_release_restores_available(self):
        ledger = fresh()
        ledger.open_hold("ses-1", "buyer", "seller", Rate.per_minute(100), NOW)
        ledger.release_hold("ses-1")
        assert ledger.available("buyer").amount == 10000
        assert ledger.held("buyer").amount == 0

    def test_release_is_idempotent(self):
        ledger = fresh()
        ledger.open_hold("ses-1", "buyer", "seller", Rate.per_minute(100), NOW)
        ledger.release_hold("ses-1")
        ledger.release_hold("ses-1")
        assert ledger.available("buyer").amount == 10000

    def test_holds_stack_across_sessions(self):
        ledger = fresh()
        ledger.open_hold("ses-1", "buyer", "seller", Rate.per_minute(100), NOW)
        ledger.open_hold("ses-2", "buyer", "seller", Rate.per_minute(200), NOW)
        assert ledger.held("buyer").amount == 9000
        with pytest.raises(InsufficientFunds):
            ledger.open_hold("ses-3", "buyer", "seller", Rate.per_minute(100), NOW)


class TestAccrual:
    def test_accrues_with_metered_seconds(self):
        ledger = fresh()
        ledger.open_hold("ses-1", "buyer", "seller", Rate.per_minute(100), NOW)
        assert ledger.accrued_charge("ses-1", 0).amount == 0
        assert ledger.accrued_charge("ses-1", 90).amount == 150

    def test_clamps_at_the_cap(self):
        ledger = fresh(hold_cap_minutes=1)
        ledger.open_hold("ses-1", "buyer", "seller", Rate.per_minute(100), NOW)
        assert ledger.accrued_charge("ses-1", 3600).amount == 100

    def test_no_hold_means_no_charge(self):
        assert fresh().accrued_charge("ses-404", 90).amount == 0


class TestSettlement:
    def test_canonical_split(self):
        ledger = fresh(commission_bps=2000)
        ledger.open_hold("ses-1", "buyer", "seller", Rate.per_minute(100), NOW)
        receipt = ledger.settle_session("ses-1", 90, NOW + 90)
        assert receipt.settlement_id == "stl-ses-1"
        assert receipt.charge.amount == 150
        assert receipt.commission.amount == 30
        assert receipt.seller_credit.amount == 120
        assert ledger.available("buyer").amount == 9850
        assert ledger.available("seller").amount == 10120
        assert ledger.available(PLATFORM_ACCOUNT).amount == 30
        assert ledger.held("buyer").amount == 0

    def test_entries_are_zero_sum(self):
        ledger = fresh()
        ledger.open_hold("ses-1", "buyer", "seller", Rate.per_minute(100), NOW)
        ledger.settle_session("ses-1", 90, NOW + 90)
        entries = ledger.entries()
        assert len(entries) == 3
        assert sum(e.delta for e in entries) == 0
        assert {e.account_id for e in entries} == {"buyer", "seller", PLATFORM_ACCOUNT}

    def test_idempotent_resettle(self):
        ledger = fresh()
        ledger.open_hold("ses-1", "buyer", "seller", Rate.per_minute(100), NOW)
        first = ledger.settle_session("ses-1", 90, NOW + 90)
        before = len(ledger.entries())
        again = ledger.settle_session("ses-1", 5000, NOW + 5000)  # different args ignored
        assert again == first
        assert len(ledger.entries()) == before

    def test_zero_charge_settle_posts_nothing(self):
        ledger = fresh()
        ledger.open_hold("ses-1", "buyer", "seller", Rate.per_minute(100), NOW)
        receipt = ledger.settle_session("ses-1", 0, NOW)
        assert receipt.charge.amount == 0
        assert ledger.entries() == []
        assert ledger.available("buyer").amount == 10000
        assert ledger.held("buyer").amount == 0

    def test_charge_clamped_to_cap_at_settlement(self):
        ledger = fresh(hold_cap_minutes=1)
        ledger.open_hold("ses-1", "buyer", "seller", Rate.per_minute(100), NOW)
        receipt = ledger.settle_session("ses-1", 3600, NOW + 3600)
        assert receipt.charge.amount == 100

    def test_hold_is_captured_not_released(self):
        ledger = fresh()
        hold = ledger.open_hold("ses-1", "buyer", "seller", Rate.per_minute(100), NOW)
        ledger.settle_session("ses-1", 90, NOW + 90)
        assert hold.state is HoldState.CAPTURED

    def test_per_case_settles_flat(self):
        ledger = fresh()
        ledger.open_hold("ses-1", "buyer", "seller", Rate.per_case(2500), NOW)
        receipt = ledger.settle_session("ses-1", 3, NOW + 3)
        assert receipt.charge.amount == 2500
        assert receipt.commission.amount == 500

    def test_platform_accumulates_commissions(self):
        ledger = fresh(commission_bps=2000, endowment_cents=10**9)
        total = 0
        for i in range(50):
            sid = f"ses-{i}"
            ledger.open_hold(sid, "buyer", "seller", Rate.per_minute(100 + i), NOW)
            receipt = ledger.settle_session(sid, 60 + i, NOW + i)
            total += receipt.commission.amount
        assert ledger.available(PLATFORM_ACCOUNT).amount == total


class TestStatement:
    def test_window_is_half_open_and_sorted(self):
        ledger = fresh()
        for i, sid in enumerate(("ses-1", "ses-2", "ses-3")):
            ledger.open_hold(sid, "buyer", "seller", Rate.per_minute(10), NOW + i)
            ledger.settle_session(sid, 60, NOW + 10 * i)
        entries = ledger.statement("buyer", NOW, NOW + 20)
        assert [e.posted_at for e in entries] == [NOW, NOW + 10]
        assert all(e.account_id == "buyer" for e in entries)
        everything = ledger.statement("buyer", NOW, NOW + 100)
        assert [e.posted_at for e in everything] == sorted(e.posted_at for e in everything)


class TestConservation:
    def test_ten_thousand_random_sessions(self):
        rng = random.Random(424242)
        settled = 0
        for bps in (0, 1, 2000, 9999, 10000):
            ledger = Ledger(commission_bps=bps, endowment_cents=10**10)
            buyers = [f"buyer-{i}" for i in range(20)]
            sellers = [f"seller-{i}" for i in range(20)]
            for account in buyers + sellers:
                ledger.create_account(account)
            for i in range(2000):
                sid = f"ses-{i}"
                rate = Rate.per_minute(rng.randint(1, 10000))
                ledger.open_hold(sid, rng.choice(buyers), rng.choice(sellers), rate, NOW + i)
                seconds = rng.randint(0, 7200)
                before = len(ledger.entries())
                receipt = ledger.settle_session(sid, seconds, NOW + i)
                new_entries = ledger.entries()[before:]
                assert sum(e.delta for e in new_entries) == 0
                assert receipt.charge.amount == (
                    receipt.commission.amount + receipt.seller_credit.amount
                )
                expected = compute_charge(rate, seconds).amount
                cap = rate.amount.amount * ledger.hold_cap_minutes
                assert receipt.charge.amount == min(expected, cap)
                settled += 1
            assert ledger.conservation_residual() == 0
        assert settled == 10000
