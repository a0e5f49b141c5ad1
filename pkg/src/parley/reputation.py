"""Post-settlement ratings and exact seller reputation aggregates.

Only the buyer of a settled session may rate it, once. Averages are kept
as exact integer sums and exposed as fractions, so aggregation order can
never change a seller's standing by a rounding hair.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .errors import (
    DuplicateRating,
    NotSettled,
    NotYourSession,
    ReviewTooLong,
    StarsOutOfRange,
)
from .sessions import Session, SessionState

MAX_REVIEW_LEN = 2000


@dataclass(frozen=True)
class Rating:
    session_id: str
    rater_id: str
    seller_id: str
    stars: int
    review: str
    created_at: int

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "rater_id": self.rater_id,
            "seller_id": self.seller_id,
            "stars": self.stars,
            "review": self.review,
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Rating":
        return cls(
            session_id=data["session_id"],
            rater_id=data["rater_id"],
            seller_id=data["seller_id"],
            stars=int(data["stars"]),
            review=data["review"],
            created_at=int(data["created_at"]),
        )


@dataclass(frozen=True)
class SellerSummary:
    seller_id: str
    rating_count: int
    stars_total: int

    @property
    def average(self) -> Optional[Fraction]:
        if self.rating_count == 0:
            return None
        return Fraction(self.stars_total, self.rating_count)

    def to_dict(self) -> dict:
        avg = self.average
        return {
            "seller_id": self.seller_id,
            "rating_count": self.rating_count,
            "stars_total": self.stars_total,
            "average": None if avg is None else float(avg),
        }


class ReputationBook:
    """Ratings keyed by session, plus running per-seller totals."""

    def __init__(self) -> None:
        self._ratings: dict[str, Rating] = {}
        self._by_seller: dict[str, list[str]] = {}

    def rate_session(
        self, session: Session, rater_id: str, stars: int, review: str, now: int
    ) -> Rating:
        if rater_id != session.buyer_id:
            raise NotYourSession(f"{rater_id} is not the buyer of {session.session_id}")
        if session.state is not SessionState.SETTLED:
            raise NotSettled(f"session {session.session_id} is {session.state.value}")
        if session.session_id in self._ratings:
            raise DuplicateRating(f"session {session.session_id} is already rated")
        if not isinstance(stars, int) or isinstance(stars, bool) or not 1 <= stars <= 5:
            raise StarsOutOfRange("stars must be an integer from 1 to 5")
        review = "" if review is None else str(review)
        if len(review) > MAX_REVIEW_LEN:
            raise ReviewTooLong(f"review exceeds {MAX_REVIEW_LEN} characters")
        rating = Rating(
            session_id=session.session_id,
            rater_id=rater_id,
            seller_id=session.seller_id,
            stars=stars,
            review=review,
            created_at=now,
        )
        self._ratings[session.session_id] = rating
        self._by_seller.setdefault(session.seller_id, []).append(session.session_id)
        return rating

    def rating_for_session(self, session_id: str) -> Optional[Rating]:
        return self._ratings.get(session_id)

    def ratings_for_seller(self, seller_id: str) -> list[Rating]:
        return [self._ratings[sid] for sid in self._by_seller.get(seller_id, [])]

    def seller_summary(self, seller_id: str) -> SellerSummary:
        ratings = self.ratings_for_seller(seller_id)
        return SellerSummary(
            seller_id=seller_id,
            rating_count=len(ratings),
            stars_total=sum(r.stars for r in ratings),
        )

    def average(self, seller_id: str) -> Optional[Fraction]:
        return self.seller_summary(seller_id).average

    def to_state(self) -> dict:
        return {"ratings": [self._ratings[k].to_dict() for k in sorted(self._ratings)]}

    def load_state(self, state: dict) -> None:
        self._ratings = {}
        self._by_seller = {}
        for raw in state["ratings"]:
            rating = Rating.from_dict(raw)
            self._ratings[rating.session_id] = rating
            self._by_seller.setdefault(rating.seller_id, []).append(rating.session_id)
