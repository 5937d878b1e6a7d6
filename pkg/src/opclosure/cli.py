"""Command-line driver.

Subcommands:

* ``run <config>``    -- run a scenario config (a path, or the name of a
                         shipped config such as ``fig3_N0``);
* ``verify``          -- run the fast verification battery;
* ``list-scenarios``  -- show the shipped configs.

The environment variable ``OPCLOSURE_OUTPUT_ROOT`` relocates all outputs.
Exit code is 0 when every check passed, 1 otherwise.
"""

from __future__ import annotations

import argparse
import sys
from importlib import resources
from pathlib import Path

from .config import ConfigError, ScenarioConfig, load_config, parse_config
from .scenarios import run_scenario

__all__ = ["main"]


def _bundled_configs():
    root = resources.files("opclosure") / "configs"
    return sorted(p for p in root.iterdir() if p.name.endswith(".cfg"))


def _resolve_config(name: str) -> ScenarioConfig:
    path = Path(name)
    if path.exists():
        return load_config(path)
    for candidate in _bundled_configs():
        if candidate.name in (name, f"{name}.cfg") or candidate.name == name + ".cfg":
            return parse_config(candidate.read_text())
    raise ConfigError(f"no such config file or shipped config: {name!r}")


def _cmd_run(args) -> int:
    try:
        config = _resolve_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    report = run_scenario(config)
    print(report.summary_text(), end="")
    print(f"outputs in {report.output_dir}")
    return 0 if report.ok else 1


def _cmd_verify(_args) -> int:
    config = ScenarioConfig(scenario="verify", output_dir="output/verify",
                            snapshot_times=(), t_final=0.0)
    report = run_scenario(config)
    print(report.summary_text(), end="")
    passed = sum(1 for _, ok, _ in report.checks if ok)
    print(f"{passed}/{len(report.checks)} checks passed")
    return 0 if report.ok else 1


def _cmd_list(_args) -> int:
    for candidate in _bundled_configs():
        scenario = closure = ""
        for line in candidate.read_text().splitlines():
            if line.startswith("scenario="):
                scenario = line.split("=", 1)[1]
            if line.startswith("closure="):
                closure = line.split("=", 1)[1]
        name = candidate.name.removesuffix(".cfg")
        extra = f" ({closure})" if closure else ""
        print(f"{name:12s} scenario={scenario}{extra}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="opclosure",
        description="Moment-closure scenarios: 1D slab closures, the 2D lattice "
                    "benchmark, the analytic model system, and verification suites.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario config")
    p_run.add_argument("config", help="config path or shipped config name")
    p_run.set_defaults(func=_cmd_run)

    p_verify = sub.add_parser("verify", help="run the verification battery")
    p_verify.set_defaults(func=_cmd_verify)

    p_list = sub.add_parser("list-scenarios", help="list shipped configs")
    p_list.set_defaults(func=_cmd_list)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
