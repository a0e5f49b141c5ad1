"""Operator command line: serve the API, run scenarios, calculators, audits.

Exit codes: 0 success, 1 failed expectations or corrupt/inconsistent
state, 2 usage or configuration problems, 3 environment problems (port
in use, unreadable files).
"""

from __future__ import annotations

import json
import socket
import sys

import click

from .config import ConfigError, PlatformConfig
from .economics import IncomeScenario, annual_income, daily_gross, daily_net, days_to_recoup
from .errors import CorruptLog, StorageFailure
from .eventlog import FileEventLog
from .kernel import Money, Rate, SystemClock, fmt_cents
from .marketplace import Marketplace, audit_log
from .scenarios import Scenario, ScenarioParseError, ScenarioRunner, builtin_names

EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_ENV = 3


@click.group()
@click.version_option(package_name="parley")
def main() -> None:
    """Marketplace for live, per-minute-metered conversations."""


@main.command()
@click.option("--config", "config_path", type=click.Path(), default=None, help="JSON config file.")
@click.option("--listen", "listen_addr", default=None, help="Override listen_addr (host:port).")
def serve(config_path: str | None, listen_addr: str | None) -> None:
    """Run the HTTP gateway; resumes state from the event log if present."""
    try:
        config = PlatformConfig.from_file(config_path) if config_path else PlatformConfig()
        if listen_addr:
            overrides = config.to_dict()
            overrides["listen_addr"] = listen_addr
            config = PlatformConfig.from_dict(overrides)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_USAGE)

    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        probe.bind((config.host, config.port))
    except OSError as exc:
        click.echo(f"cannot listen on {config.listen_addr}: {exc}", err=True)
        sys.exit(EXIT_ENV)
    finally:
        probe.close()

    try:
        log = FileEventLog(config.log_path, fsync=True, recover=True)
        market = Marketplace.create(config, clock=SystemClock(), log=log)
    except CorruptLog as exc:
        click.echo(f"event log corrupt at seq {exc.seq}: {exc}", err=True)
        sys.exit(EXIT_FAIL)
    except StorageFailure as exc:
        click.echo(f"storage error: {exc}", err=True)
        sys.exit(EXIT_ENV)

    from .gateway import create_app
    import uvicorn

    app = create_app(market, background_tick=True)
    click.echo(f"listening on {config.listen_addr}")
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")


@main.command()
@click.argument("source")
@click.option("--log", "log_path", type=click.Path(), default=None, help="Write the event log here.")
@click.option("--json", "as_json", is_flag=True, help="Emit the report as JSON.")
def scenario(source: str, log_path: str | None, as_json: bool) -> None:
    """Run a scenario script (a file path or a built-in name)."""
    try:
        if source in builtin_names():
            script = Scenario.builtin(source)
        else:
            script = Scenario.from_file(source)
        log = FileEventLog(log_path, fsync=False) if log_path else None
        report = ScenarioRunner(script, log=log).run()
    except ScenarioParseError as exc:
        click.echo(f"scenario error: {exc}", err=True)
        sys.exit(EXIT_USAGE)
    except StorageFailure as exc:
        click.echo(f"storage error: {exc}", err=True)
        sys.exit(EXIT_ENV)

    if as_json:
        click.echo(json.dumps(report, indent=2, sort_keys=True))
    else:
        click.echo(f"scenario   {report['name']} (seed {report['seed']})")
        click.echo(f"steps      {report['steps_passed']}/{report['steps_total']} passed")
        for failure in report["failures"]:
            click.echo(
                f"  step {failure['step']} (+{failure['at']}s {failure['action']}): "
                f"{failure['reason']}"
            )
        click.echo(f"events     {report['event_count']}")
        click.echo(f"digest     {report['final_state_digest']}")
        click.echo(f"replay     {'match' if report['replay_matches'] else 'MISMATCH'}")
    if report["steps_failed"] or not report["replay_matches"]:
        sys.exit(EXIT_FAIL)


@main.group()
def calc() -> None:
    """Income and payback calculators."""


def _scenario_from_options(rate_cents: int, minutes_per_day: int, days: int, commission_bps: int) -> IncomeScenario:
    try:
        return IncomeScenario(
            rate=Rate.per_minute(rate_cents),
            minutes_per_day=minutes_per_day,
            days=days,
            commission_bps=commission_bps,
        )
    except ValueError as exc:
        click.echo(f"bad parameters: {exc}", err=True)
        sys.exit(EXIT_USAGE)


@calc.command("annual-income")
@click.option("--rate-cents", required=True, type=int, help="Per-minute rate in cents.")
@click.option("--minutes-per-day", required=True, type=int)
@click.option("--days", default=365, type=int, show_default=True)
@click.option("--commission-bps", default=0, type=int, show_default=True)
@click.option("--json", "as_json", is_flag=True)
def calc_annual_income(
    rate_cents: int, minutes_per_day: int, days: int, commission_bps: int, as_json: bool
) -> None:
    """What a seller nets per year at a rate and daily workload."""
    scenario = _scenario_from_options(rate_cents, minutes_per_day, days, commission_bps)
    gross = daily_gross(scenario)
    net = daily_net(scenario)
    annual = annual_income(scenario)
    if as_json:
        click.echo(
            json.dumps(
                {
                    "rate_cents": rate_cents,
                    "minutes_per_day": minutes_per_day,
                    "days": days,
                    "commission_bps": commission_bps,
                    "daily_gross_cents": gross.amount,
                    "daily_net_cents": net.amount,
                    "annual_income_cents": annual.amount,
                    "annual_income": fmt_cents(annual.amount),
                },
                indent=2,
                sort_keys=True,
            )
        )
        return
    click.echo(f"rate           {fmt_cents(rate_cents)}/min")
    click.echo(f"minutes/day    {minutes_per_day}")
    click.echo(f"days           {days}")
    click.echo(f"commission     {commission_bps / 100:.2f}%")
    click.echo(f"daily gross    {fmt_cents(gross.amount)}")
    click.echo(f"daily net      {fmt_cents(net.amount)}")
    click.echo(f"annual income  {fmt_cents(annual.amount)}")


@calc.command("recoup")
@click.option("--loan-cents", required=True, type=int, help="Loan principal in cents.")
@click.option("--rate-cents", required=True, type=int, help="Per-minute rate in cents.")
@click.option("--minutes-per-day", required=True, type=int)
@click.option("--commission-bps", default=0, type=int, show_default=True)
@click.option("--json", "as_json", is_flag=True)
def calc_recoup(
    loan_cents: int, rate_cents: int, minutes_per_day: int, commission_bps: int, as_json: bool
) -> None:
    """How many days of selling it takes to pay back a loan."""
    scenario = _scenario_from_options(rate_cents, minutes_per_day, 365, commission_bps)
    if loan_cents < 0:
        click.echo("bad parameters: loan must be >= 0", err=True)
        sys.exit(EXIT_USAGE)
    days = days_to_recoup(Money(loan_cents), scenario)
    net = daily_net(scenario)
    verdict = "never" if days is None else f"{days} days"
    if as_json:
        click.echo(
            json.dumps(
                {
                    "loan_cents": loan_cents,
                    "rate_cents": rate_cents,
                    "minutes_per_day": minutes_per_day,
                    "commission_bps": commission_bps,
                    "daily_net_cents": net.amount,
                    "days_to_recoup": days,
                    "verdict": verdict,
                },
                indent=2,
                sort_keys=True,
            )
        )
        return
    click.echo(f"loan          {fmt_cents(loan_cents)}")
    click.echo(f"daily net     {fmt_cents(net.amount)}")
    click.echo(f"payback in    {verdict}")


@main.command()
@click.argument("log_path", type=click.Path())
@click.option("--json", "as_json", is_flag=True)
def audit(log_path: str, as_json: bool) -> None:
    """Strictly replay an event log and verify its integrity."""
    try:
        report = audit_log(log_path)
    except CorruptLog as exc:
        click.echo(f"corrupt log at seq {exc.seq}: {exc}", err=True)
        sys.exit(EXIT_FAIL)
    except StorageFailure as exc:
        click.echo(f"storage error: {exc}", err=True)
        sys.exit(EXIT_ENV)

    sound = report["conservation_residual"] == 0
    if as_json:
        click.echo(json.dumps({**report, "conserved": sound}, indent=2, sort_keys=True))
    else:
        click.echo(f"events        {report['event_count']}")
        click.echo(f"accounts      {report['accounts']}")
        census = ", ".join(f"{k}={v}" for k, v in sorted(report["session_census"].items()))
        click.echo(f"sessions      {census or 'none'}")
        click.echo(f"digest        {report['state_digest']}")
        click.echo(f"conservation  {'ok' if sound else 'VIOLATED'}")
    if not sound:
        sys.exit(EXIT_FAIL)


if __name__ == "__main__":
    main()
