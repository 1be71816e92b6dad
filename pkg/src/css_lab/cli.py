"""Command line entry point ``css-lab``."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from threadpoolctl import threadpool_limits

from .harness import (
    EXIT_CONFIG,
    EXIT_INSTABILITY,
    EXIT_OK,
    SCENARIOS,
    ConfigError,
    ScenarioConfig,
    emit_reports,
    run_scenario,
)

log = logging.getLogger("css_lab")


def parse_override(item: str) -> tuple[str, object]:
    """``key=value`` with ``value`` read as JSON when possible, else as a string."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    key, raw = item.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigError(f"override {item!r} has an empty key")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="css-lab", description="Run a self-dual Chern-Simons-Schroedinger scenario.")
    p.add_argument("--scenario", required=True, choices=SCENARIOS)
    p.add_argument("--config", type=Path, help="flat JSON configuration file")
    p.add_argument("--out", type=Path, help="output directory (overrides out_dir)")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                   help="override one configuration key; repeatable")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def load_config(args) -> ScenarioConfig:
    data = {}
    if args.config is not None:
        try:
            text = args.config.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
    if data.get("scenario", args.scenario) != args.scenario:
        raise ConfigError(f"config file names scenario {data['scenario']!r}, command line {args.scenario!r}")
    data["scenario"] = args.scenario
    for item in args.override:
        key, value = parse_override(item)
        data[key] = value
    if args.out is not None:
        data["out_dir"] = str(args.out)
    return ScenarioConfig.from_mapping(data)


def _thread_cap() -> int | None:
    raw = os.environ.get("CSS_LAB_THREADS")
    if raw is None or raw == "":
        return None
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"CSS_LAB_THREADS must be a positive integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigError(f"CSS_LAB_THREADS must be a positive integer, got {raw!r}")
    return n


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args)
        cap = _thread_cap()
    except ConfigError as exc:
        print(f"css-lab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    with threadpool_limits(limits=cap):
        report = run_scenario(config)
    try:
        emit_reports(report, config.out_dir)
    except OSError as exc:
        print(f"css-lab: cannot write reports to {config.out_dir}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if report.exit_code == EXIT_INSTABILITY:
        print(f"css-lab: {report.status}: {report.message}", file=sys.stderr)
        return EXIT_INSTABILITY
    print(json.dumps({"status": report.status, "out_dir": str(config.out_dir)}))
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
