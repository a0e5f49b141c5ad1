"""Deployment configuration with validated defaults."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields

from .kernel import DEFAULT_CURRENCY
from .matching import MatchWeights


class ConfigError(Exception):
    """The configuration file or overrides are unusable."""


@dataclass(frozen=True)
class PlatformConfig:
    listen_addr: str = "127.0.0.1:8775"
    commission_bps: int = 2000
    max_accounts_per_fingerprint: int = 1
    hold_cap_minutes: int = 30
    pending_timeout_s: int = 60
    appointment_grace_s: int = 120
    heartbeat_grace_s: int = 5
    seller_capacity: int = 1
    endowment_cents: int = 10_000
    currency: str = DEFAULT_CURRENCY
    log_path: str = "events.jsonl"
    snapshot_every: int = 1000
    match_weights: MatchWeights = field(default_factory=MatchWeights)

    def __post_init__(self) -> None:
        if not 0 <= self.commission_bps <= 10_000:
            raise ConfigError("commission_bps must be within [0, 10000]")
        positives = (
            "max_accounts_per_fingerprint",
            "hold_cap_minutes",
            "pending_timeout_s",
            "appointment_grace_s",
            "heartbeat_grace_s",
            "seller_capacity",
            "snapshot_every",
        )
        for name in positives:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.endowment_cents < 0:
            raise ConfigError("endowment_cents must be >= 0")
        host, _, port = self.listen_addr.rpartition(":")
        if not host or not port.isdigit() or not 0 < int(port) < 65536:
            raise ConfigError(f"listen_addr must be host:port, got {self.listen_addr!r}")

    @property
    def host(self) -> str:
        return self.listen_addr.rpartition(":")[0]

    @property
    def port(self) -> int:
        return int(self.listen_addr.rpartition(":")[2])

    def to_dict(self) -> dict:
        data = {
            f.name: getattr(self, f.name) for f in fields(self) if f.name != "match_weights"
        }
        data["match_weights"] = self.match_weights.to_dict()
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "PlatformConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        kwargs = dict(data)
        if "match_weights" in kwargs:
            try:
                kwargs["match_weights"] = MatchWeights.from_dict(kwargs["match_weights"])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad match_weights: {exc}") from exc
        try:
            return cls(**kwargs)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_file(cls, path: str) -> "PlatformConfig":
        try:
            with open(path, "r", encoding="utf-8") as handle:
                data = json.load(handle)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except ValueError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must be a JSON object")
        return cls.from_dict(data)
