"""Deterministic scenario scripts driving a marketplace on a simulated clock.

A scenario is a JSON document: a list of steps, each with a time offset,
an acting alias, an action, arguments, and optional expectations. The
runner executes it against a fresh in-memory deployment, records every
expectation outcome, and finishes by replaying the event log to prove
the run reproduces — the report is pure data, so the same script always
yields byte-identical results.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Optional

from .config import ConfigError, PlatformConfig
from .errors import NotSettled, PlatformError
from .kernel import Money, Rate, RateKind, SimulatedClock
from .marketplace import Marketplace

MUTATING_ACTIONS = {
    "register_account",
    "create_listing",
    "deactivate_listing",
    "set_availability",
    "request_session",
    "respond",
    "book_appointment",
    "cancel_appointment",
    "join",
    "heartbeat",
    "end_session",
    "rate_session",
    "record_trace",
    "tick",
}
READ_ACTIONS = {"search", "balance", "receipt", "session", "summary"}
MACRO_ACTIONS = {"converse"}
KNOWN_ACTIONS = MUTATING_ACTIONS | READ_ACTIONS | MACRO_ACTIONS


class ScenarioParseError(Exception):
    """The scenario document is structurally unusable."""


@dataclass(frozen=True)
class Step:
    index: int
    at: int
    actor: Optional[str]
    action: str
    args: dict
    expect: Optional[dict]
    save: dict


@dataclass(frozen=True)
class Scenario:
    name: str
    seed: int
    config: dict
    steps: tuple[Step, ...] = field(default_factory=tuple)

    @classmethod
    def parse(cls, doc: dict) -> "Scenario":
        if not isinstance(doc, dict):
            raise ScenarioParseError("scenario must be a JSON object")
        name = doc.get("name")
        if not isinstance(name, str) or not name:
            raise ScenarioParseError("scenario needs a non-empty name")
        seed = doc.get("seed", 0)
        if not isinstance(seed, int):
            raise ScenarioParseError("seed must be an integer")
        config = doc.get("config", {})
        if not isinstance(config, dict):
            raise ScenarioParseError("config overrides must be an object")
        raw_steps = doc.get("steps")
        if not isinstance(raw_steps, list) or not raw_steps:
            raise ScenarioParseError("scenario needs a non-empty steps list")
        steps: list[Step] = []
        last_at = 0
        for index, raw in enumerate(raw_steps):
            if not isinstance(raw, dict):
                raise ScenarioParseError(f"step {index} must be an object")
            at = raw.get("at", last_at)
            if not isinstance(at, int) or at < 0:
                raise ScenarioParseError(f"step {index}: 'at' must be a non-negative integer")
            if at < last_at:
                raise ScenarioParseError(
                    f"step {index}: offsets must be non-decreasing ({at} < {last_at})"
                )
            last_at = at
            action = raw.get("action")
            if action not in KNOWN_ACTIONS:
                raise ScenarioParseError(f"step {index}: unknown action {action!r}")
            actor = raw.get("actor")
            if action != "tick" and not isinstance(actor, str):
                raise ScenarioParseError(f"step {index}: action {action} needs an actor")
            args = raw.get("args", {})
            if not isinstance(args, dict):
                raise ScenarioParseError(f"step {index}: args must be an object")
            expect = raw.get("expect")
            if expect is not None and not isinstance(expect, dict):
                raise ScenarioParseError(f"step {index}: expect must be an object")
            save = raw.get("save", {})
            if not isinstance(save, dict):
                raise ScenarioParseError(f"step {index}: save must be an object")
            steps.append(
                Step(
                    index=index,
                    at=at,
                    actor=actor,
                    action=action,
                    args=args,
                    expect=expect,
                    save=save,
                )
            )
        return cls(name=name, seed=seed, config=config, steps=tuple(steps))

    @classmethod
    def from_file(cls, path: str) -> "Scenario":
        try:
            with open(path, "r", encoding="utf-8") as handle:
                doc = json.load(handle)
        except OSError as exc:
            raise ScenarioParseError(f"cannot read scenario {path}: {exc}") from exc
        except ValueError as exc:
            raise ScenarioParseError(f"scenario {path} is not valid JSON: {exc}") from exc
        return cls.parse(doc)

    @classmethod
    def builtin(cls, name: str) -> "Scenario":
        package = resources.files("parley").joinpath("data/scenarios")
        candidate = package.joinpath(f"{name}.json")
        if not candidate.is_file():
            raise ScenarioParseError(
                f"no built-in scenario {name!r}; available: {', '.join(builtin_names())}"
            )
        return cls.parse(json.loads(candidate.read_text(encoding="utf-8")))


def builtin_names() -> list[str]:
    package = resources.files("parley").joinpath("data/scenarios")
    return sorted(p.name[: -len(".json")] for p in package.iterdir() if p.name.endswith(".json"))


class ScenarioRunner:
    """Executes one scenario against a fresh marketplace."""

    def __init__(self, scenario: Scenario, *, log=None) -> None:
        self.scenario = scenario
        try:
            config = PlatformConfig.from_dict(scenario.config)
        except ConfigError as exc:
            raise ScenarioParseError(f"bad config overrides: {exc}") from exc
        self.clock = SimulatedClock()
        self.base = self.clock.now()
        self.market = Marketplace.create(config, clock=self.clock, log=log)
        self.aliases: dict[str, str] = {}
        self.vars: dict[str, Any] = {}

    def run(self) -> dict:
        passed = 0
        failures: list[dict] = []
        for step in self.scenario.steps:
            reason = self._run_step(step)
            if reason is None:
                passed += 1
            else:
                failures.append(
                    {"step": step.index, "at": step.at, "action": step.action, "reason": reason}
                )
        live_digest = self.market.state_digest()
        replay_digest = Marketplace.replay(self.market.log).state_digest()
        return {
            "name": self.scenario.name,
            "seed": self.scenario.seed,
            "steps_total": len(self.scenario.steps),
            "steps_passed": passed,
            "steps_failed": len(failures),
            "failures": failures,
            "event_count": self.market.log.last_seq,
            "final_state_digest": live_digest,
            "replay_matches": replay_digest == live_digest,
        }

    # --- step execution ---

    def _run_step(self, step: Step) -> Optional[str]:
        target = self.base + step.at
        if target < self.clock.now():
            return f"clock would move backwards to {step.at}"
        if target > self.clock.now():
            self.clock.set(target)
        try:
            args = self._resolve(step.args)
        except KeyError as exc:
            return f"unbound reference {exc.args[0]!r}"
        try:
            result = self._dispatch(step, args)
        except PlatformError as exc:
            if step.expect and step.expect.get("error") == exc.code:
                return None
            return f"unexpected error {exc.code}: {exc}"
        except ScenarioParseError as exc:
            return str(exc)
        except Exception as exc:  # a crash is always a failure, never an expectation
            return f"crashed: {type(exc).__name__}: {exc}"
        if step.expect and "error" in step.expect:
            return f"expected error {step.expect['error']}, got success"
        data = jsonify(result)
        if step.expect:
            for path, wanted in step.expect.get("fields", {}).items():
                wanted = self._resolve(wanted)
                try:
                    actual = walk_path(data, path)
                except (KeyError, IndexError, TypeError):
                    return f"missing field {path}"
                if actual != wanted:
                    return f"field {path}: expected {wanted!r}, got {actual!r}"
        for var, path in step.save.items():
            try:
                self.vars[var] = walk_path(data, path)
            except (KeyError, IndexError, TypeError):
                return f"cannot save {var}: no field {path}"
        return None

    def _dispatch(self, step: Step, args: dict) -> Any:
        market = self.market
        action = step.action
        if action == "register_account":
            account = market.register_account(args["display_name"], args["fingerprint"])
            self.aliases[step.actor] = account.account_id
            return account
        if action == "tick":
            return market.tick()

        actor_id = self.aliases.get(step.actor)
        if actor_id is None:
            raise ScenarioParseError(f"actor {step.actor!r} has not registered")

        if action == "create_listing":
            rate_spec = args.get("rate", {})
            cents = rate_spec["amount"]
            if isinstance(cents, dict):
                cents = cents["amount"]
            rate = Rate(RateKind(rate_spec["kind"]), Money(int(cents), market.config.currency))
            return market.create_listing(
                actor_id,
                args.get("title", ""),
                args.get("description", ""),
                args.get("tags", []),
                rate,
            )
        if action == "deactivate_listing":
            return market.deactivate_listing(actor_id, args["listing_id"])
        if action == "set_availability":
            windows = [self._window(w) for w in args.get("windows", [])]
            return market.set_availability(actor_id, args["listing_id"], windows)
        if action == "search":
            return market.search(
                args.get("text", ""),
                max_results=args.get("max_results", 20),
                max_per_minute_cents=args.get("max_price"),
            )
        if action == "request_session":
            return market.request_session(actor_id, args["listing_id"])
        if action == "respond":
            return market.respond(actor_id, args["session_id"], args["decision"])
        if action == "book_appointment":
            slot = args.get("slot_start")
            if slot is None:
                slot = self.base + int(args["slot_offset"])
            return market.book_appointment(actor_id, args["listing_id"], slot)
        if action == "cancel_appointment":
            return market.cancel_appointment(actor_id, args["session_id"])
        if action == "join":
            return market.join(actor_id, args["session_id"])
        if action == "heartbeat":
            return market.heartbeat(actor_id, args["session_id"])
        if action == "end_session":
            return market.end_session(actor_id, args["session_id"])
        if action == "rate_session":
            return market.rate_session(
                actor_id, args["session_id"], args["stars"], args.get("review", "")
            )
        if action == "record_trace":
            return market.record_trace(
                args["session_id"],
                search=args.get("search"),
                bargaining=args.get("bargaining"),
                enforcement=args.get("enforcement"),
            )
        if action == "balance":
            return market.balance(actor_id)
        if action == "receipt":
            receipt = market.receipt_for_session(args["session_id"])
            if receipt is None:
                raise NotSettled(f"session {args['session_id']} has not settled")
            return receipt
        if action == "session":
            return market.get_session(args["session_id"])
        if action == "summary":
            return market.seller_summary(args.get("seller_id", actor_id))
        if action == "converse":
            return self._converse(args["session_id"], int(args["seconds"]))
        raise ScenarioParseError(f"unhandled action {action!r}")

    def _converse(self, session_id: str, seconds: int) -> dict:
        """Advance one second at a time with both parties heartbeating."""
        session = self.market.get_session(session_id)
        for _ in range(seconds):
            self.clock.advance(1)
            self.market.heartbeat(session.buyer_id, session_id)
            self.market.heartbeat(session.seller_id, session_id)
        return self.market.meter_snapshot(session_id)

    def _window(self, spec: dict) -> dict:
        if "start_offset" in spec or "end_offset" in spec:
            return {
                "start": self.base + int(spec["start_offset"]),
                "end": self.base + int(spec["end_offset"]),
                "level": spec["level"],
            }
        return {"start": spec["start"], "end": spec["end"], "level": spec["level"]}

    def _resolve(self, value: Any) -> Any:
        if isinstance(value, str) and value.startswith("$"):
            name = value[1:]
            if name in self.vars:
                return self.vars[name]
            if name in self.aliases:
                return self.aliases[name]
            raise KeyError(name)
        if isinstance(value, dict):
            return {k: self._resolve(v) for k, v in value.items()}
        if isinstance(value, list):
            return [self._resolve(v) for v in value]
        return value


def jsonify(result: Any) -> Any:
    if result is None or isinstance(result, (bool, int, float, str)):
        return result
    if isinstance(result, dict):
        return {k: jsonify(v) for k, v in result.items()}
    if isinstance(result, (list, tuple)):
        return [jsonify(v) for v in result]
    to_dict = getattr(result, "to_dict", None)
    if callable(to_dict):
        return jsonify(to_dict())
    return str(result)


def walk_path(data: Any, path: str) -> Any:
    current = data
    for part in str(path).split("."):
        if isinstance(current, list):
            current = current[int(part)]
        else:
            current = current[part]
    return current


def run_scenario(scenario: Scenario, *, log=None) -> dict:
    return ScenarioRunner(scenario, log=log).run()
