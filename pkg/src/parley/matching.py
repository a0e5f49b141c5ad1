"""Lexical search over active listings with transparent score fusion.

Ranking is fully deterministic and explainable: a BM25 lexical score
(normalized within each query by the best candidate), the seller's
average star rating, price attractiveness on the normalized hourly
rate, and the availability tier in force at query time are fused with
configurable non-negative weights. Ties break by listing id, so equal
inputs always produce the same ordering.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

from .errors import EmptyQuery
from .kernel import Money, RateKind, normalized_hourly_rate
from .registry import ServiceLevel, ServiceListing

BM25_K1 = 1.5
BM25_B = 0.75

AVAILABILITY_SCORE = {
    ServiceLevel.UNCONDITIONAL: 1.0,
    ServiceLevel.CONDITIONAL: 0.6,
    ServiceLevel.APPOINTMENT: 0.3,
}

NEUTRAL_REPUTATION = 0.5
PER_CASE_PRICE_SCORE = 0.5

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Lowercase alphanumeric tokens, in order, duplicates preserved."""
    return _TOKEN_RE.findall(str(text).lower())


@dataclass(frozen=True)
class MatchWeights:
    """Non-negative fusion weights; relative size is all that matters."""

    lexical: float = 0.5
    reputation: float = 0.25
    price: float = 0.15
    availability: float = 0.10

    def __post_init__(self) -> None:
        for name in ("lexical", "reputation", "price", "availability"):
            if getattr(self, name) < 0:
                raise ValueError(f"match weight {name} must be >= 0")

    def to_dict(self) -> dict:
        return {
            "lexical": self.lexical,
            "reputation": self.reputation,
            "price": self.price,
            "availability": self.availability,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MatchWeights":
        return cls(**{k: float(v) for k, v in data.items()})


@dataclass(frozen=True)
class MatchQuery:
    text: str
    max_results: int = 20
    max_per_minute: Optional[Money] = None


@dataclass(frozen=True)
class MatchResult:
    listing_id: str
    rank: int
    total_score: float
    parts: dict = field(hash=False)

    def to_dict(self) -> dict:
        return {
            "listing_id": self.listing_id,
            "rank": self.rank,
            "total_score": self.total_score,
            "parts": dict(self.parts),
        }


def listing_tokens(listing: ServiceListing) -> list[str]:
    return tokenize(" ".join((listing.title, listing.description, " ".join(listing.tags))))


class MatchIndex:
    """Inverted token index over the searchable listing corpus."""

    def __init__(self) -> None:
        self._docs: dict[str, list[str]] = {}
        self._postings: dict[str, set[str]] = {}

    def index_listing(self, listing: ServiceListing) -> None:
        self.remove_listing(listing.listing_id)
        tokens = listing_tokens(listing)
        self._docs[listing.listing_id] = tokens
        for token in set(tokens):
            self._postings.setdefault(token, set()).add(listing.listing_id)

    def remove_listing(self, listing_id: str) -> None:
        tokens = self._docs.pop(listing_id, None)
        if tokens is None:
            return
        for token in set(tokens):
            bucket = self._postings.get(token)
            if bucket is not None:
                bucket.discard(listing_id)
                if not bucket:
                    del self._postings[token]

    def doc_count(self) -> int:
        return len(self._docs)

    def doc_frequency(self, token: str) -> int:
        return len(self._postings.get(token, ()))

    def doc_tokens(self, listing_id: str) -> list[str]:
        return self._docs.get(listing_id, [])

    def average_doc_len(self) -> float:
        if not self._docs:
            return 0.0
        return sum(len(t) for t in self._docs.values()) / len(self._docs)

    def candidates(self, tokens: list[str]) -> set[str]:
        found: set[str] = set()
        for token in set(tokens):
            found |= self._postings.get(token, set())
        return found


def bm25_score(index: MatchIndex, listing_id: str, query_tokens: list[str]) -> float:
    """BM25 with idf = ln(1 + (N - df + 0.5) / (df + 0.5)); always > 0 on a hit."""
    doc = index.doc_tokens(listing_id)
    if not doc:
        return 0.0
    total_docs = index.doc_count()
    avg_len = index.average_doc_len()
    doc_len = len(doc)
    score = 0.0
    for token in sorted(set(query_tokens)):
        term_freq = doc.count(token)
        if term_freq == 0:
            continue
        doc_freq = index.doc_frequency(token)
        idf = math.log(1.0 + (total_docs - doc_freq + 0.5) / (doc_freq + 0.5))
        denom = term_freq + BM25_K1 * (1.0 - BM25_B + BM25_B * doc_len / avg_len)
        score += idf * term_freq * (BM25_K1 + 1.0) / denom
    return score


def search(
    query: MatchQuery,
    now: int,
    index: MatchIndex,
    get_listing: Callable[[str], ServiceListing],
    level_at: Callable[[str, int], Optional[ServiceLevel]],
    average_rating: Callable[[str], Optional[Fraction]],
    weights: MatchWeights,
) -> list[MatchResult]:
    """Rank listings for a query at a moment in time.

    Only listings that are active, currently inside an availability
    window, within the optional price ceiling, and sharing at least one
    token with the query are candidates; everything else is invisible.
    """
    query_tokens = tokenize(query.text)
    if not query_tokens:
        raise EmptyQuery("query has no searchable tokens")

    candidates: list[tuple[ServiceListing, ServiceLevel]] = []
    for listing_id in sorted(index.candidates(query_tokens)):
        listing = get_listing(listing_id)
        if not listing.active:
            continue
        level = level_at(listing_id, now)
        if level is None:
            continue
        if (
            query.max_per_minute is not None
            and listing.rate.kind is RateKind.PER_MINUTE
            and listing.rate.amount.amount > query.max_per_minute.amount
        ):
            continue
        candidates.append((listing, level))
    if not candidates:
        return []

    lexical_raw = {
        listing.listing_id: bm25_score(index, listing.listing_id, query_tokens)
        for listing, _ in candidates
    }
    max_lexical = max(lexical_raw.values())

    hourly = {
        listing.listing_id: normalized_hourly_rate(listing.rate) for listing, _ in candidates
    }
    hourly_amounts = [m.amount for m in hourly.values() if m is not None]
    max_hourly = max(hourly_amounts) if hourly_amounts else 0

    scored: list[MatchResult] = []
    for listing, level in candidates:
        listing_id = listing.listing_id
        lexical = lexical_raw[listing_id] / max_lexical if max_lexical > 0 else 0.0

        avg = average_rating(listing.seller_id)
        reputation = float((avg - 1) / 4) if avg is not None else NEUTRAL_REPUTATION

        rate_hourly = hourly[listing_id]
        if rate_hourly is None:
            price = PER_CASE_PRICE_SCORE
        elif max_hourly == 0:
            price = 1.0
        else:
            price = 1.0 - rate_hourly.amount / max_hourly

        availability = AVAILABILITY_SCORE[level]

        parts = {
            "lexical": lexical,
            "reputation": reputation,
            "price": price,
            "availability": availability,
        }
        total = (
            weights.lexical * lexical
            + weights.reputation * reputation
            + weights.price * price
            + weights.availability * availability
        )
        scored.append(MatchResult(listing_id=listing_id, rank=0, total_score=total, parts=parts))

    scored.sort(key=lambda r: (-r.total_score, r.listing_id))
    limited = scored[: max(0, int(query.max_results))]
    return [
        MatchResult(
            listing_id=r.listing_id, rank=i + 1, total_score=r.total_score, parts=r.parts
        )
        for i, r in enumerate(limited)
    ]
