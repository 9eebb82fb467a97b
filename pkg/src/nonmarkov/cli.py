"""Command-line entry point: one subcommand per scenario.

Flags override the matching config fields. On failure a JSON error record is
printed to stderr (and written to ``<out>/error.json``) and the exit status is
non-zero: 2 for invalid input, 1 for failures while running.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from pathlib import Path

from .config import SCENARIOS, ConfigError, ScenarioConfig
from .records import emit
from .scenarios import run_scenario


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="YAML or JSON scenario config")
    p.add_argument("--seed", type=int, help="root RNG seed (default 42)")
    p.add_argument("--out", type=Path, default=Path("results"), help="output directory (default ./results)")
    p.add_argument("--format", choices=("csv", "json"), help="csv tables or a single json document (default json)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nonmarkov", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="scenario", required=True)

    p = sub.add_parser("bounds-sweep", help="check D^2/2 <= J <= D on random pairs")
    _add_common(p)
    p.add_argument("--pairs", type=int)

    p = sub.add_parser("robustness-map", help="measure of antipodal pure pairs over the sphere")
    _add_common(p)
    p.add_argument("--quantifier", action="append", help="repeatable, e.g. --quantifier td --quantifier jsd")
    p.add_argument("--n-theta", type=int)
    p.add_argument("--n-phi", type=int)
    p.add_argument("--points", type=int)
    p.add_argument("--t-end", type=float)

    p = sub.add_parser("divisibility-report", help="CP/P divisibility of a family on a grid")
    _add_common(p)
    p.add_argument("--points", type=int)
    p.add_argument("--t-end", type=float)

    p = sub.add_parser("domain-section", help="PD / NCD labels on a planar section")
    _add_common(p)
    p.add_argument("--diag", type=float, nargs=3)
    p.add_argument("--shift", type=float, nargs=3)
    p.add_argument("--axis", choices=("x", "y", "z"))
    p.add_argument("--offset", type=float)
    p.add_argument("--resolution", type=int)
    p.add_argument("--budget", type=int)

    for name, text in (
        ("counterexample", "full counterexample pipeline: divisibility and measures"),
        ("measure", "revival measures of a family"),
    ):
        p = sub.add_parser(name, help=text)
        _add_common(p)
        p.add_argument("--quantifier", action="append")
        p.add_argument("--directions", type=int)
        p.add_argument("--full-pairs", type=int)
        p.add_argument("--points", type=int)
        p.add_argument("--t-end", type=float)
    return parser


def _overrides(args) -> dict:
    over: dict = {}

    def put(section, key, value):
        if value is not None:
            over.setdefault(section, {})[key] = value

    if args.seed is not None:
        over["seed"] = args.seed
    if getattr(args, "quantifier", None):
        over["quantifiers"] = args.quantifier
    put("sweep", "pairs", getattr(args, "pairs", None))
    put("robustness", "n_theta", getattr(args, "n_theta", None))
    put("robustness", "n_phi", getattr(args, "n_phi", None))
    put("grid", "points", getattr(args, "points", None))
    put("grid", "stop", getattr(args, "t_end", None))
    put("map", "diag", getattr(args, "diag", None))
    put("map", "shift", getattr(args, "shift", None))
    put("section", "axis", getattr(args, "axis", None))
    put("section", "offset", getattr(args, "offset", None))
    put("section", "resolution", getattr(args, "resolution", None))
    put("section", "budget", getattr(args, "budget", None))
    put("search", "directions", getattr(args, "directions", None))
    put("search", "full_pairs", getattr(args, "full_pairs", None))
    put("output", "format", args.format)
    return over


def _load(args) -> ScenarioConfig:
    raw = {}
    if args.config is not None:
        import yaml

        try:
            raw = yaml.safe_load(args.config.read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config must be a mapping")
    for key, value in _overrides(args).items():
        if isinstance(value, dict):
            section = raw.setdefault(key, {})
            if not isinstance(section, dict):
                raise ConfigError(f"{key} must be a mapping")
            section.update(value)
        else:
            raw[key] = value
    return ScenarioConfig.from_dict(raw, args.scenario)


def _fail(args, kind: str, exc: BaseException, code: int) -> int:
    record = {"error": {"type": kind, "exception": type(exc).__name__, "message": str(exc)}, "scenario": args.scenario}
    text = json.dumps(record, sort_keys=True)
    print(text, file=sys.stderr)
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "error.json").write_text(text + "\n")
    except OSError:
        pass
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args)
    except (ConfigError, ValueError, TypeError) as exc:
        return _fail(args, "invalid-config", exc, 2)
    try:
        record = run_scenario(cfg)
        paths = emit(record, args.out, cfg.output.get("format", "json"))
    except (ValueError, TypeError) as exc:
        return _fail(args, "invalid-input", exc, 2)
    except Exception as exc:  # noqa: BLE001
        traceback.print_exc(file=sys.stderr)
        return _fail(args, "runtime-error", exc, 1)
    print(json.dumps({"scenario": cfg.scenario, "files": [str(p) for p in paths]}, indent=1))
    return 0


if __name__ == "__main__":
    sys.exit(main())
