"""Accounts, service listings, and availability windows.

Account creation is capped per financial-instrument fingerprint, which
is the platform's one fraud lever: a new display name is cheap, a new
payment instrument is not. Availability windows are half-open
``[start, end)`` and may not overlap within a listing, so any instant
maps to at most one service level.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

from .errors import (
    ExcessiveAccounts,
    InvalidFingerprint,
    InvalidListing,
    InvalidRate,
    InvalidWindow,
    NotYourListing,
    OverlappingWindows,
    UnknownAccount,
    UnknownListing,
    UnknownSeller,
)
from .kernel import DEFAULT_CURRENCY, Rate, RateKind

MAX_TITLE_LEN = 120


class ServiceLevel(str, Enum):
    """Availability tier for a window of a listing's calendar.

    L1 sessions connect immediately and the seller cannot decline; L2
    gives the seller a short accept/reject window; L3 requires a booked
    appointment slot.
    """

    UNCONDITIONAL = "L1"
    CONDITIONAL = "L2"
    APPOINTMENT = "L3"


@dataclass(frozen=True)
class Account:
    account_id: str
    display_name: str
    fingerprint: str
    token: str
    created_at: int

    def public_dict(self) -> dict:
        return {
            "account_id": self.account_id,
            "display_name": self.display_name,
            "created_at": self.created_at,
        }

    def to_dict(self) -> dict:
        return {
            "account_id": self.account_id,
            "display_name": self.display_name,
            "fingerprint": self.fingerprint,
            "token": self.token,
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Account":
        return cls(**data)


@dataclass(frozen=True)
class AvailabilityWindow:
    """Half-open interval ``[start, end)`` during which a level applies."""

    window_id: str
    listing_id: str
    start: int
    end: int
    level: ServiceLevel

    def contains(self, timestamp: int) -> bool:
        return self.start <= timestamp < self.end

    def to_dict(self) -> dict:
        return {
            "window_id": self.window_id,
            "listing_id": self.listing_id,
            "start": self.start,
            "end": self.end,
            "level": self.level.value,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AvailabilityWindow":
        return cls(
            window_id=data["window_id"],
            listing_id=data["listing_id"],
            start=int(data["start"]),
            end=int(data["end"]),
            level=ServiceLevel(data["level"]),
        )


@dataclass(frozen=True)
class ServiceListing:
    listing_id: str
    seller_id: str
    title: str
    description: str
    tags: tuple[str, ...]
    rate: Rate
    active: bool
    created_at: int

    def to_dict(self) -> dict:
        return {
            "listing_id": self.listing_id,
            "seller_id": self.seller_id,
            "title": self.title,
            "description": self.description,
            "tags": list(self.tags),
            "rate": self.rate.to_dict(),
            "active": self.active,
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ServiceListing":
        return cls(
            listing_id=data["listing_id"],
            seller_id=data["seller_id"],
            title=data["title"],
            description=data["description"],
            tags=tuple(data["tags"]),
            rate=Rate.from_dict(data["rate"]),
            active=bool(data["active"]),
            created_at=int(data["created_at"]),
        )


def mint_token(account_id: str, fingerprint: str) -> str:
    digest = hashlib.sha256(f"{account_id}:{fingerprint}".encode()).hexdigest()
    return "tok_" + digest[:32]


class Registry:
    """Account and listing store enforcing the per-fingerprint cap."""

    def __init__(self, *, max_accounts_per_fingerprint: int = 1, currency: str = DEFAULT_CURRENCY) -> None:
        self._fingerprint_cap = max_accounts_per_fingerprint
        self._currency = currency
        self._accounts: dict[str, Account] = {}
        self._by_token: dict[str, str] = {}
        self._by_fingerprint: dict[str, int] = {}
        self._listings: dict[str, ServiceListing] = {}
        self._windows: dict[str, list[AvailabilityWindow]] = {}
        self._account_seq = 0
        self._listing_seq = 0
        self._window_seq = 0

    # --- accounts ---

    def register_account(self, display_name: str, fingerprint: str, now: int) -> Account:
        if not isinstance(fingerprint, str) or not fingerprint.strip():
            raise InvalidFingerprint("fingerprint must be a non-empty string")
        if self._by_fingerprint.get(fingerprint, 0) >= self._fingerprint_cap:
            raise ExcessiveAccounts(
                f"fingerprint already backs {self._fingerprint_cap} account(s)"
            )
        self._account_seq += 1
        account_id = f"acct-{self._account_seq:06d}"
        account = Account(
            account_id=account_id,
            display_name=str(display_name),
            fingerprint=fingerprint,
            token=mint_token(account_id, fingerprint),
            created_at=now,
        )
        self._accounts[account_id] = account
        self._by_token[account.token] = account_id
        self._by_fingerprint[fingerprint] = self._by_fingerprint.get(fingerprint, 0) + 1
        return account

    def get_account(self, account_id: str) -> Account:
        account = self._accounts.get(account_id)
        if account is None:
            raise UnknownAccount(f"no such account: {account_id}")
        return account

    def account_by_token(self, token: str) -> Optional[Account]:
        account_id = self._by_token.get(token)
        return self._accounts.get(account_id) if account_id else None

    def has_account(self, account_id: str) -> bool:
        return account_id in self._accounts

    # --- listings ---

    def create_listing(
        self,
        seller_id: str,
        title: str,
        description: str,
        tags: list[str] | tuple[str, ...],
        rate: Rate,
        now: int,
    ) -> ServiceListing:
        if seller_id not in self._accounts:
            raise UnknownSeller(f"no such seller: {seller_id}")
        title = str(title).strip()
        if not title or len(title) > MAX_TITLE_LEN:
            raise InvalidListing(f"title must be 1..{MAX_TITLE_LEN} characters")
        if not isinstance(rate, Rate) or rate.kind not in (RateKind.PER_MINUTE, RateKind.PER_CASE):
            raise InvalidRate("rate must be per_minute or per_case")
        if rate.amount.currency != self._currency:
            raise InvalidRate(f"rate currency must be {self._currency}")
        self._listing_seq += 1
        listing = ServiceListing(
            listing_id=f"lst-{self._listing_seq:06d}",
            seller_id=seller_id,
            title=title,
            description=str(description),
            tags=tuple(sorted({str(t).strip().lower() for t in tags if str(t).strip()})),
            rate=rate,
            active=True,
            created_at=now,
        )
        self._listings[listing.listing_id] = listing
        self._windows[listing.listing_id] = []
        return listing

    def get_listing(self, listing_id: str) -> ServiceListing:
        listing = self._listings.get(listing_id)
        if listing is None:
            raise UnknownListing(f"no such listing: {listing_id}")
        return listing

    def listings(self) -> list[ServiceListing]:
        return [self._listings[key] for key in sorted(self._listings)]

    def listings_for_seller(self, seller_id: str) -> list[ServiceListing]:
        return [l for l in self.listings() if l.seller_id == seller_id]

    def deactivate_listing(self, seller_id: str, listing_id: str) -> ServiceListing:
        listing = self.get_listing(listing_id)
        if listing.seller_id != seller_id:
            raise NotYourListing(f"{seller_id} does not own {listing_id}")
        updated = replace(listing, active=False)
        self._listings[listing_id] = updated
        return updated

    # --- availability ---

    def set_availability(
        self,
        seller_id: str,
        listing_id: str,
        windows: list[tuple[int, int, ServiceLevel]],
    ) -> list[AvailabilityWindow]:
        """Replace the listing's calendar atomically.

        Every window is validated before any is stored, so a rejected
        call leaves the previous calendar untouched.
        """
        listing = self.get_listing(listing_id)
        if listing.seller_id != seller_id:
            raise NotYourListing(f"{seller_id} does not own {listing_id}")
        normalized: list[tuple[int, int, ServiceLevel]] = []
        for start, end, level in windows:
            start, end = int(start), int(end)
            if start >= end:
                raise InvalidWindow(f"window [{start}, {end}) is empty or inverted")
            normalized.append((start, end, ServiceLevel(level)))
        normalized.sort(key=lambda w: w[0])
        for (_, prev_end, _), (next_start, _, _) in zip(normalized, normalized[1:]):
            if next_start < prev_end:
                raise OverlappingWindows(
                    f"windows overlap at {next_start} on listing {listing_id}"
                )
        built: list[AvailabilityWindow] = []
        for start, end, level in normalized:
            self._window_seq += 1
            built.append(
                AvailabilityWindow(
                    window_id=f"win-{self._window_seq:06d}",
                    listing_id=listing_id,
                    start=start,
                    end=end,
                    level=level,
                )
            )
        self._windows[listing_id] = built
        return list(built)

    def windows_for_listing(self, listing_id: str) -> list[AvailabilityWindow]:
        self.get_listing(listing_id)
        return list(self._windows.get(listing_id, []))

    def level_at(self, listing_id: str, timestamp: int) -> Optional[ServiceLevel]:
        """The service level in force at ``timestamp``, or None if off duty."""
        self.get_listing(listing_id)
        for window in self._windows.get(listing_id, []):
            if window.contains(timestamp):
                return window.level
        return None

    # --- state transfer ---

    def to_state(self) -> dict:
        return {
            "accounts": [self._accounts[k].to_dict() for k in sorted(self._accounts)],
            "listings": [self._listings[k].to_dict() for k in sorted(self._listings)],
            "windows": {
                key: [w.to_dict() for w in self._windows[key]] for key in sorted(self._windows)
            },
            "account_seq": self._account_seq,
            "listing_seq": self._listing_seq,
            "window_seq": self._window_seq,
        }

    def load_state(self, state: dict) -> None:
        self._accounts = {}
        self._by_token = {}
        self._by_fingerprint = {}
        for raw in state["accounts"]:
            account = Account.from_dict(raw)
            self._accounts[account.account_id] = account
            self._by_token[account.token] = account.account_id
            self._by_fingerprint[account.fingerprint] = (
                self._by_fingerprint.get(account.fingerprint, 0) + 1
            )
        self._listings = {}
        for raw in state["listings"]:
            listing = ServiceListing.from_dict(raw)
            self._listings[listing.listing_id] = listing
        self._windows = {
            key: [AvailabilityWindow.from_dict(w) for w in rows]
            for key, rows in state["windows"].items()
        }
        self._account_seq = int(state["account_seq"])
        self._listing_seq = int(state["listing_seq"])
        self._window_seq = int(state["window_seq"])
