"""Declarative scenario configuration.

A config is one YAML (or JSON) document. Every section is optional and has
per-scenario defaults; unknown keys anywhere are rejected so that a typo
cannot silently fall back to a default.

Example::

    schema_version: 1
    scenario: counterexample
    seed: 42
    grid: {start: 0, stop: 4, points: 4000}
    search: {directions: 2048, full_pairs: 100000}
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .dynamics import (
    DephasingModel,
    PhaseCovariantFamily,
    compose_families,
    counterexample_family,
    dephasing_as_family,
    identity_family,
    piecewise_rate_family,
)
from .qubit import AffineMap
from .quantifiers import QuantifierId

SCHEMA_VERSION = 1
SCENARIOS = ("bounds-sweep", "robustness-map", "divisibility-report", "domain-section", "counterexample", "measure")


class ConfigError(ValueError):
    pass


_SECTIONS = {
    "grid": {"start", "stop", "points"},
    "search": {"directions", "full_pairs", "full_quantifiers", "refine", "refine_top"},
    "map": {"diag", "shift"},
    "section": {"axis", "offset", "resolution", "budget"},
    "sweep": {"pairs"},
    "robustness": {"n_theta", "n_phi"},
    "output": {"dir", "format"},
}
_TOP = {"schema_version", "scenario", "seed", "family", "quantifiers"} | set(_SECTIONS)

_FAMILY_KEYS = {
    "counterexample": {"mu1", "mu2", "a_par", "a_perp", "a_kappa", "alpha"},
    "dephasing": {"coupling", "ohmicity", "cutoff", "system_frequency", "prefactor"},
    "phase-covariant-parametric": {"rates", "durations"},
    "composed": {"first", "second", "t1"},
    "identity": set(),
}

_DEFAULTS = {
    "bounds-sweep": {"sweep": {"pairs": 100_000}},
    "robustness-map": {
        "family": {"kind": "dephasing"},
        "quantifiers": ["TD", "JSD", "SqrtJSD"],
        "grid": {"start": 0.0, "stop": 20.0, "points": 2000},
        "robustness": {"n_theta": 65, "n_phi": 16},
    },
    "divisibility-report": {
        "family": {"kind": "counterexample"},
        "grid": {"start": 0.0, "stop": 4.0, "points": 4000},
    },
    "domain-section": {
        "map": {"diag": [1.1, 1.1, 0.1], "shift": [0.0, 0.0, 0.0]},
        "section": {"axis": "y", "offset": 0.0, "resolution": 256, "budget": 10_000},
    },
    "counterexample": {
        "family": {"kind": "counterexample"},
        "quantifiers": ["TD", "Helstrom", "JSD", "SqrtJSD", "HolevoSkew", "QuantumSkew"],
        "grid": {"start": 0.0, "stop": 4.0, "points": 4000},
        "search": {
            "directions": 2048,
            "full_pairs": 100_000,
            "full_quantifiers": ["TD", "JSD", "HolevoSkew", "QuantumSkew"],
            "refine": True,
            "refine_top": 8,
        },
    },
    "measure": {
        "family": {"kind": "counterexample"},
        "quantifiers": ["TD", "JSD"],
        "grid": {"start": 0.0, "stop": 4.0, "points": 4000},
        "search": {"directions": 2048, "full_pairs": 0, "refine": True, "refine_top": 8},
    },
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "family":
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _check_keys(where: str, got: dict, allowed: set):
    if not isinstance(got, dict):
        raise ConfigError(f"{where} must be a mapping")
    extra = set(got) - allowed
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(extra)}")


def _validate_family(entry, where="family"):
    _check_keys(where, entry, {"kind"} | set().union(*_FAMILY_KEYS.values()))
    kind = entry.get("kind")
    if kind not in _FAMILY_KEYS:
        raise ConfigError(f"{where}.kind must be one of {sorted(_FAMILY_KEYS)}, got {kind!r}")
    _check_keys(f"{where} ({kind})", entry, {"kind"} | _FAMILY_KEYS[kind])
    if kind == "composed":
        for part in ("first", "second"):
            if part not in entry:
                raise ConfigError(f"{where}.{part} is required")
            _validate_family(entry[part], f"{where}.{part}")
        if not float(entry.get("t1", 0)) > 0:
            raise ConfigError(f"{where}.t1 must be positive")
    if kind == "phase-covariant-parametric":
        rates = entry.get("rates")
        if not rates or any(len(r) != 3 for r in rates):
            raise ConfigError(f"{where}.rates must be a list of [g+, g-, gz] triples")
        if len(entry.get("durations", [])) != len(rates) - 1:
            raise ConfigError(f"{where}.durations needs one entry per rate triple but the last")


@dataclass
class ScenarioConfig:
    scenario: str
    seed: int = 42
    family: dict | None = None
    quantifiers: list = field(default_factory=list)
    grid: dict = field(default_factory=dict)
    search: dict = field(default_factory=dict)
    map: dict = field(default_factory=dict)
    section: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    robustness: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    @classmethod
    def from_dict(cls, raw: dict, scenario: str | None = None) -> "ScenarioConfig":
        raw = dict(raw or {})
        _check_keys("config", raw, _TOP)
        version = raw.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {version}; expected {SCHEMA_VERSION}")
        name = raw.get("scenario", scenario)
        if scenario is not None and name != scenario:
            raise ConfigError(f"config is for scenario {name!r}, not {scenario!r}")
        if name not in SCENARIOS:
            raise ConfigError(f"unknown scenario {name!r}; expected one of {list(SCENARIOS)}")
        for sec, keys in _SECTIONS.items():
            if sec in raw:
                _check_keys(sec, raw[sec], keys)
        merged = _merge(_DEFAULTS[name], raw)
        merged["scenario"] = name
        cfg = cls(**{k: v for k, v in merged.items()})
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path, scenario: str | None = None) -> "ScenarioConfig":
        try:
            raw = yaml.safe_load(Path(path).read_text())
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from None
        return cls.from_dict(raw or {}, scenario)

    def validate(self):
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        if self.family is not None:
            _validate_family(self.family)
        for q in list(self.quantifiers) + list(self.search.get("full_quantifiers", [])):
            try:
                QuantifierId.parse(str(q))
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        if self.grid:
            g = self.grid
            if not (int(g.get("points", 0)) >= 2 and float(g["stop"]) > float(g["start"]) >= 0):
                raise ConfigError("grid needs 0 <= start < stop and points >= 2")
        if self.section and int(self.section.get("resolution", 32)) < 32:
            raise ConfigError("section.resolution must be at least 32")
        if self.robustness and min(self.robustness.get("n_theta", 8), self.robustness.get("n_phi", 8)) < 8:
            raise ConfigError("robustness resolution must be at least 8")
        if self.map:
            for key in ("diag", "shift"):
                if len(self.map.get(key, [])) != 3:
                    raise ConfigError(f"map.{key} needs three entries")
        fmt = self.output.get("format")
        if fmt is not None and fmt not in ("csv", "json"):
            raise ConfigError("output.format must be csv or json")

    def time_grid(self) -> np.ndarray:
        g = self.grid
        return np.linspace(float(g["start"]), float(g["stop"]), int(g["points"]))

    def build_family(self) -> PhaseCovariantFamily:
        return build_family(self.family)

    def affine_map(self) -> AffineMap:
        return AffineMap(np.array(self.map["diag"], dtype=float), np.array(self.map["shift"], dtype=float))

    def quantifier_ids(self, key: str = "quantifiers") -> list[QuantifierId]:
        items = self.quantifiers if key == "quantifiers" else self.search.get(key, self.quantifiers)
        return [QuantifierId.parse(str(q)) for q in items]

    def to_dict(self) -> dict:
        out = {"schema_version": self.schema_version, "scenario": self.scenario, "seed": self.seed}
        for k in ("family", "quantifiers", "grid", "search", "map", "section", "sweep", "robustness", "output"):
            v = getattr(self, k)
            if v:
                out[k] = copy.deepcopy(v)
        return out


def build_family(entry: dict) -> PhaseCovariantFamily:
    _validate_family(entry)
    kind = entry["kind"]
    args = {k: v for k, v in entry.items() if k != "kind"}
    if kind == "counterexample":
        return counterexample_family(**{k: float(v) for k, v in args.items()})
    if kind == "dephasing":
        return dephasing_as_family(DephasingModel(**{k: float(v) for k, v in args.items()}))
    if kind == "phase-covariant-parametric":
        return piecewise_rate_family([tuple(map(float, r)) for r in args["rates"]], [float(d) for d in args.get("durations", [])])
    if kind == "composed":
        return compose_families(build_family(args["first"]), build_family(args["second"]), float(args["t1"]))
    return identity_family()
