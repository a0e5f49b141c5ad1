"""Domain error vocabulary shared by every subsystem.

Each error carries a stable ``code`` (its class name) that clients can
branch on and that the HTTP gateway maps to exactly one status code; a
test walks this module to assert the mapping is total.
"""

from __future__ import annotations


class PlatformError(Exception):
    """Base class for all domain errors raised by platform operations."""

    def __init__(self, message: str = "") -> None:
        super().__init__(message or self.__class__.__name__)

    @property
    def code(self) -> str:
        return self.__class__.__name__


# --- identity and registration ---------------------------------------------


class InvalidFingerprint(PlatformError):
    """The financial-instrument fingerprint is empty or malformed."""


class ExcessiveAccounts(PlatformError):
    """The per-fingerprint account cap has been reached."""


class UnknownAccount(PlatformError):
    """No account with that id exists."""


class UnknownSeller(PlatformError):
    """No seller account with that id exists."""


class UnknownBuyer(PlatformError):
    """No buyer account with that id exists."""


class NotYourAccount(PlatformError):
    """The caller is not the owner of the referenced account."""


# --- listings and availability ----------------------------------------------


class UnknownListing(PlatformError):
    """No listing with that id exists."""


class NotYourListing(PlatformError):
    """The caller does not own the referenced listing."""


class InvalidListing(PlatformError):
    """Listing fields fail validation (empty or oversized title)."""


class InvalidRate(PlatformError):
    """The rate is malformed: unknown kind, bad currency, or negative."""


class InvalidWindow(PlatformError):
    """An availability window is degenerate (start is not before end)."""


class OverlappingWindows(PlatformError):
    """Two availability windows on one listing overlap in time."""


# --- search -------------------------------------------------------------------


class EmptyQuery(PlatformError):
    """The search text contains no indexable tokens."""


# --- session lifecycle --------------------------------------------------------


class UnknownSession(PlatformError):
    """No session with that id exists."""


class NotYourSession(PlatformError):
    """The caller is not a party to the referenced session."""


class SelfDealing(PlatformError):
    """A seller may not open a session against their own listing."""


class SellerOffDuty(PlatformError):
    """The listing is inactive or has no availability window right now."""


class AppointmentRequired(PlatformError):
    """The current window is appointment-only; book a slot instead."""


class SellerBusy(PlatformError):
    """The seller is already engaged to capacity."""


class NotPending(PlatformError):
    """The session is not awaiting a seller decision."""


class DeadlinePassed(PlatformError):
    """The response deadline for the pending request has elapsed."""


class SlotMisaligned(PlatformError):
    """Appointment slots must start on a five-minute boundary."""


class SlotUnavailable(PlatformError):
    """The slot is in the past or already booked."""


class NotL3Window(PlatformError):
    """The slot does not fall inside an appointment-level window."""


class NotScheduled(PlatformError):
    """The session is not a booked appointment awaiting its slot."""


class NotJoinable(PlatformError):
    """The session is not in a state (or window) that allows joining."""


class JoinWindowClosed(PlatformError):
    """The appointment's grace period elapsed before both parties joined."""


class NotLive(PlatformError):
    """The session is not currently live."""


class NotEnded(PlatformError):
    """The session has not ended, so it cannot settle."""


# --- billing ------------------------------------------------------------------


class InsufficientFunds(PlatformError):
    """The buyer's available balance cannot cover the escrow hold."""


class DuplicateHold(PlatformError):
    """A hold already exists for this session."""


# --- reputation ----------------------------------------------------------------


class NotSettled(PlatformError):
    """Only settled sessions can be rated."""


class DuplicateRating(PlatformError):
    """This session has already been rated."""


class StarsOutOfRange(PlatformError):
    """Ratings must be an integer between 1 and 5."""


class ReviewTooLong(PlatformError):
    """Review text exceeds the 2000-character limit."""


# --- instrumentation ------------------------------------------------------------


class InvariantViolation(PlatformError):
    """A recorded value contradicts a structural invariant of the market."""


# --- persistence -----------------------------------------------------------------


class CorruptLog(PlatformError):
    """The event log fails validation at a specific sequence number."""

    def __init__(self, seq: int, message: str = "") -> None:
        super().__init__(message or f"event log corrupt at seq {seq}")
        self.seq = seq


class SeqOutOfRange(PlatformError):
    """The requested sequence number is beyond the end of the log."""


class StorageFailure(PlatformError):
    """The underlying storage refused a read or write."""


# --- realtime channel --------------------------------------------------------------


class ChannelRefused(PlatformError):
    """The channel cannot open: wrong state, wrong party, or duplicate."""


class FrameTooLarge(PlatformError):
    """A channel frame body exceeds the 64 KiB limit."""
