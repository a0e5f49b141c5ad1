"""Ratings: who may rate, when, and how averages aggregate."""

from __future__ import annotations

from fractions import Fraction

import pytest

from parley import (
    Marketplace,
    PlatformConfig,
    SimulatedClock,
)
from parley.errors import (
    DuplicateRating,
    NotSettled,
    NotYourSession,
    ReviewTooLong,
    StarsOutOfRange,
)
from parley.reputation import MAX_REVIEW_LEN

from conftest import open_call, run_live_seconds


def settled_session(stars_sessions: int = 1):
    clock = SimulatedClock()
    market = Marketplace.create(
        PlatformConfig(max_accounts_per_fingerprint=10), clock=clock
    )
    seller, buyer, listing = open_call(market, clock)
    session_ids = []
    for _ in range(stars_sessions):
        session = market.request_session(buyer.account_id, listing.listing_id)
        market.join(buyer.account_id, session.session_id)
        market.join(seller.account_id, session.session_id)
        run_live_seconds(market, clock, session.session_id, 5)
        market.end_session(buyer.account_id, session.session_id)
        session_ids.append(session.session_id)
    return market, clock, seller, buyer, session_ids


class TestGating:
    def test_buyer_rates_a_settled_session(self):
        market, clock, seller, buyer, (sid,) = settled_session()
        rating = market.rate_session(buyer.account_id, sid, 5, "great help")
        assert rating.stars == 5
        assert rating.seller_id == seller.account_id
        assert market.rating_for_session(sid).review == "great help"

    def test_seller_cannot_rate(self):
        market, clock, seller, buyer, (sid,) = settled_session()
        with pytest.raises(NotYourSession):
            market.rate_session(seller.account_id, sid, 5)

    def test_unsettled_session_cannot_be_rated(self):
        market, clock, seller, buyer, (sid,) = settled_session()
        listing = market.listings()[0]
        fresh = market.request_session(buyer.account_id, listing.listing_id)
        with pytest.raises(NotSettled):
            market.rate_session(buyer.account_id, fresh.session_id, 5)

    def test_one_rating_per_session(self):
        market, clock, seller, buyer, (sid,) = settled_session()
        market.rate_session(buyer.account_id, sid, 4)
        with pytest.raises(DuplicateRating):
            market.rate_session(buyer.account_id, sid, 5)

    @pytest.mark.parametrize("stars", [0, 6, -1, 100])
    def test_stars_out_of_range(self, stars):
        market, clock, seller, buyer, (sid,) = settled_session()
        with pytest.raises(StarsOutOfRange):
            market.rate_session(buyer.account_id, sid, stars)

    def test_review_length_cap(self):
        market, clock, seller, buyer, (sid,) = settled_session()
        with pytest.raises(ReviewTooLong):
            market.rate_session(buyer.account_id, sid, 5, "x" * (MAX_REVIEW_LEN + 1))
        market.rate_session(buyer.account_id, sid, 5, "x" * MAX_REVIEW_LEN)

    def test_empty_review_is_fine(self):
        market, clock, seller, buyer, (sid,) = settled_session()
        rating = market.rate_session(buyer.account_id, sid, 3)
        assert rating.review == ""


class TestAggregation:
    def test_unrated_seller_has_no_average(self):
        market, clock, seller, buyer, _ = settled_session()
        summary = market.seller_summary(seller.account_id)
        assert summary.rating_count == 0
        assert summary.average is None
        assert summary.to_dict()["average"] is None

    def test_average_is_exact(self):
        market, clock, seller, buyer, sids = settled_session(stars_sessions=3)
        for sid, stars in zip(sids, (5, 4, 4)):
            market.rate_session(buyer.account_id, sid, stars)
        summary = market.seller_summary(seller.account_id)
        assert summary.rating_count == 3
        assert summary.average == Fraction(13, 3)
        assert summary.to_dict()["average"] == pytest.approx(13 / 3)

    def test_ratings_attach_to_the_seller(self):
        market, clock, seller, buyer, sids = settled_session(stars_sessions=2)
        for sid in sids:
            market.rate_session(buyer.account_id, sid, 5)
        ratings = market.listing_detail(market.listings()[0].listing_id)["reviews"]
        assert len(ratings) == 2
        assert all(r["seller_id"] == seller.account_id for r in ratings)
