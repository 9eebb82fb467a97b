"""Seeded, reproducible scenarios that produce :class:`ResultRecord` objects."""

from __future__ import annotations

import time
from importlib import metadata as _pkg_metadata

import numpy as np

from . import domains, dynamics, measure
from .config import ScenarioConfig
from .qubit import EPS
from .quantifiers import SUPPORT_EPS, Kind, jsd, trace_distance
from .records import ResultRecord, Table
from .sampling import SAMPLING_CONVENTION, random_pairs, spawn_rngs

BOUNDS_SLACK = 1e-10


def _version() -> str:
    try:
        return _pkg_metadata.version("artifact")
    except _pkg_metadata.PackageNotFoundError:
        return "unknown"


def conventions() -> dict:
    return {
        "entropy_base": 2,
        "eigenvalue_clamp_eps": EPS,
        "support_eps": SUPPORT_EPS,
        "delta_rev": measure.DELTA_REV,
        "zero_measure_threshold": measure.ZERO_MEASURE,
        "revival_integral": "sum of grid increments above delta_rev",
        "cp_tol": dynamics.CP_TOL,
        "divisibility_tol": dynamics.DIV_TOL,
        "p_boundary": "sqrt(g+ g-) + 2 gz in (-tol, tol] is labelled P-boundary",
        "fd_step": dynamics.FD_STEP,
        "rng": "numpy Philox; worker streams from SeedSequence(seed).spawn",
        "state_sampling": SAMPLING_CONVENTION,
        "full_pair_sampling": "each state pure with probability 1/2, otherwise uniform in the ball",
        "dephasing_exponent": "Gamma(t) = prefactor * int_0^(50 W) J(w) (1 - cos wt) / w^2 dw (zero temperature); |gamma| = exp(-Gamma)",
        "dephasing_quadrature": "scipy.integrate.quad, epsrel 1e-9, epsabs 1e-14",
        "asymptotic_discrimination": "1 - exp(-N S ln 2) with S in bits",
        "ncd_partner_sampling": domains.PARTNER_SAMPLING,
    }


def _metadata(cfg: ScenarioConfig, budgets: dict, extra: dict | None = None) -> dict:
    meta = {
        "package_version": _version(),
        "scenario": cfg.scenario,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "conventions": conventions(),
        "budgets": budgets,
    }
    if extra:
        meta.update(extra)
    return meta


def _search(cfg: ScenarioConfig, directions: int, full_pairs: int) -> measure.SearchConfig:
    s = cfg.search
    return measure.SearchConfig(
        directions=directions,
        full_pairs=full_pairs,
        refine=bool(s.get("refine", True)),
        refine_top=int(s.get("refine_top", 8)),
        seed=cfg.seed,
    )


def _family_table(family, grid) -> Table:
    par, perp, kap = family.functions(grid)
    cp = dynamics.cp_check(family, grid)
    rows = zip(grid, par, perp, kap, cp)
    return Table([("t", "time"), ("eta_par", "1"), ("eta_perp", "1"), ("kappa_z", "1"), ("cp", "bool")], list(rows))


def _divisibility_table(verdict) -> Table:
    cols = [
        ("t", "time"),
        ("gamma_plus", "1/time"),
        ("gamma_minus", "1/time"),
        ("gamma_z", "1/time"),
        ("p_condition", "1/time"),
        ("label", "class"),
    ]
    rows = zip(verdict.times, verdict.gamma_plus, verdict.gamma_minus, verdict.gamma_z, verdict.p_condition, verdict.labels)
    return Table(cols, list(rows))


def _verdict_summary(verdict, family, grid) -> dict:
    labels, counts = np.unique(verdict.labels, return_counts=True)
    return {
        "first_violation": verdict.first_violation,
        "first_singular": verdict.first_singular,
        "cp_all": bool(np.all(dynamics.cp_check(family, grid))),
        "label_counts": {str(k): int(v) for k, v in zip(labels, counts)},
    }


_REPORT_COLS = [
    ("stage", "name"),
    ("quantifier", "name"),
    ("N", "quantifier units"),
    ("N_raw", "quantifier units"),
    ("detected", "bool"),
    ("param", "1"),
    ("r1_x", "1"),
    ("r1_y", "1"),
    ("r1_z", "1"),
    ("r2_x", "1"),
    ("r2_y", "1"),
    ("r2_z", "1"),
    ("evaluated", "pairs"),
]


def _report_row(stage, rep: measure.RevivalReport):
    r1 = np.asarray(rep.pair[0], dtype=float)
    r2 = np.asarray(rep.pair[-1], dtype=float)
    return (stage, rep.quantifier, rep.total, rep.raw_total, rep.detected, rep.param, *r1, *r2, rep.evaluated)


def _interval_rows(stage, rep):
    return [(stage, rep.quantifier, a, b, g) for a, b, g in rep.intervals]


_INTERVAL_COLS = [("stage", "name"), ("quantifier", "name"), ("start", "time"), ("end", "time"), ("gain", "quantifier units")]


def run_bounds_sweep(cfg: ScenarioConfig) -> ResultRecord:
    n = int(cfg.sweep["pairs"])
    (rng,) = spawn_rngs(cfg.seed, 1)
    a, b = random_pairs(rng, n)
    d = trace_distance(a, b)
    j = jsd(a, b)
    lower = 0.5 * d**2 - j
    upper = j - d
    lower_ok = lower <= BOUNDS_SLACK
    upper_ok = upper <= BOUNDS_SLACK
    table = Table(
        [("D", "1"), ("J", "bit"), ("lower_ok", "bool"), ("upper_ok", "bool")],
        list(zip(d, j, lower_ok, upper_ok)),
    )
    summary = {
        "pairs": n,
        "all_ok": bool(lower_ok.all() and upper_ok.all()),
        "violations": int(np.count_nonzero(~(lower_ok & upper_ok))),
        "max_lower_excess": float(lower.max()),
        "max_upper_excess": float(upper.max()),
    }
    return ResultRecord(cfg.scenario, _metadata(cfg, {"pairs": n}, {"slack": BOUNDS_SLACK}), {"pairs": table}, summary)


def run_robustness_map(cfg: ScenarioConfig) -> ResultRecord:
    family = cfg.build_family()
    grid = cfg.time_grid()
    nt, nphi = int(cfg.robustness["n_theta"]), int(cfg.robustness["n_phi"])
    rows = []
    summary = {}
    for q in cfg.quantifier_ids():
        rm = measure.robustness_map(q, family, grid, nt, nphi)
        for i, th in enumerate(rm.theta):
            for k, ph in enumerate(rm.phi):
                rows.append((rm.quantifier, th, ph, rm.values[i, k], rm.raw[i, k], rm.scaled[i, k], rm.relative[i, k]))
        prof = rm.polar_profile()
        summary[rm.quantifier] = {
            "max": float(rm.values.max()),
            "argmax_theta": float(rm.theta[int(np.argmax(prof))]),
            "pole_values": [float(prof[0]), float(prof[-1])],
            "plateau_width_50": rm.plateau_width(0.5),
            "reference_scale": rm.reference,
        }
    table = Table(
        [
            ("quantifier", "name"),
            ("theta", "rad"),
            ("phi", "rad"),
            ("N", "quantifier units"),
            ("N_raw", "quantifier units"),
            ("N_scaled", "reference units"),
            ("N_relative", "1"),
        ],
        rows,
    )
    budgets = {"n_theta": nt, "n_phi": nphi, "grid_points": len(grid)}
    return ResultRecord(cfg.scenario, _metadata(cfg, budgets, {"family": family.params}), {"map": table}, summary)


def run_divisibility_report(cfg: ScenarioConfig) -> ResultRecord:
    family = cfg.build_family()
    grid = cfg.time_grid()
    verdict = dynamics.p_div_check(family, grid)
    tables = {"family": _family_table(family, grid), "divisibility": _divisibility_table(verdict)}
    summary = _verdict_summary(verdict, family, grid)
    budgets = {"grid_points": len(grid)}
    return ResultRecord(cfg.scenario, _metadata(cfg, budgets, {"family": family.params}), tables, summary)


def run_domain_section(cfg: ScenarioConfig) -> ResultRecord:
    m = cfg.affine_map()
    sec_cfg = cfg.section
    sec = domains.domain_section(
        m,
        axis=sec_cfg["axis"],
        offset=float(sec_cfg["offset"]),
        resolution=int(sec_cfg["resolution"]),
        budget=int(sec_cfg["budget"]),
        seed=cfg.seed,
    )
    free = [a for a in "xyz" if a != sec.axis]
    rows = []
    for i, v in enumerate(sec.v):
        for j, u in enumerate(sec.u):
            rows.append((u, v, sec.labels[i, j], sec.gains[i, j]))
    table = Table([(free[0], "1"), (free[1], "1"), ("label", "class"), ("best_gain", "bit")], rows)
    summary = {"counts": sec.counts(), "max_image_norm": domains.max_image_norm(m)[0]}
    big = np.flatnonzero(np.abs(m.diag) > 1)
    if m.is_unital and big.size:
        i = int(big[np.argmax(np.abs(m.diag[big]))])
        r, s = domains.unital_noncontractive_pair(abs(m.diag[i]), i)
        summary["unital_pair"] = {
            "pair": [r.tolist(), s.tolist()],
            "jsd_before": float(jsd(r, s)),
            "jsd_after": float(jsd(m(r), m(s))),
        }
    budgets = {"partners_random": sec.budget, "partners_deterministic": 27, "resolution": len(sec.u)}
    return ResultRecord(cfg.scenario, _metadata(cfg, budgets), {"section": table}, summary)


def _measure_stages(cfg, family, grid, stages):
    rows, intervals, summary = [], [], {}
    for stage, quantifiers, search in stages:
        if not quantifiers or (search.directions <= 0 and search.full_pairs <= 0):
            continue
        reports = measure.nm_measures(quantifiers, family, grid, search)
        summary[stage] = {}
        for rep in reports:
            rows.append(_report_row(stage, rep))
            intervals.extend(_interval_rows(stage, rep))
            summary[stage][rep.quantifier] = {"N": rep.total, "N_raw": rep.raw_total, "detected": rep.detected}
    return Table(_REPORT_COLS, rows), Table(_INTERVAL_COLS, intervals), summary


def run_counterexample(cfg: ScenarioConfig) -> ResultRecord:
    family = cfg.build_family()
    grid = cfg.time_grid()
    verdict = dynamics.p_div_check(family, grid)
    s = cfg.search
    stages = [
        ("antipodal", cfg.quantifier_ids(), _search(cfg, int(s["directions"]), 0)),
        ("full", cfg.quantifier_ids("full_quantifiers"), _search(cfg, 0, int(s["full_pairs"]))),
    ]
    reports, intervals, msummary = _measure_stages(cfg, family, grid, stages)
    summary = {"divisibility": _verdict_summary(verdict, family, grid), "measures": msummary}
    sep = {}
    for stage, vals in msummary.items():
        trace_based = [v["N"] for k, v in vals.items() if k.split(":")[0] in (Kind.TD.value, Kind.HELSTROM.value)]
        entropic = [v["N"] for k, v in vals.items() if k.split(":")[0] in (Kind.JSD.value, Kind.HOLEVO_SKEW.value, Kind.QUANTUM_SKEW.value)]
        sep[stage] = {
            "trace_revival": max(trace_based, default=0.0),
            "entropic_max": max(entropic, default=0.0),
            "separated": bool(trace_based and max(trace_based) > measure.ZERO_MEASURE and max(entropic, default=0.0) <= measure.ZERO_MEASURE),
        }
    summary["separation"] = sep
    tables = {
        "family": _family_table(family, grid),
        "divisibility": _divisibility_table(verdict),
        "measures": reports,
        "intervals": intervals,
    }
    budgets = {
        "directions": int(s["directions"]),
        "full_pairs": int(s["full_pairs"]),
        "param_grid": list(measure.PARAM_GRID),
        "grid_points": len(grid),
    }
    return ResultRecord(cfg.scenario, _metadata(cfg, budgets, {"family": family.params}), tables, summary)


def run_measure(cfg: ScenarioConfig) -> ResultRecord:
    family = cfg.build_family()
    grid = cfg.time_grid()
    s = cfg.search
    search = _search(cfg, int(s.get("directions", 2048)), int(s.get("full_pairs", 0)))
    reports, intervals, summary = _measure_stages(cfg, family, grid, [("search", cfg.quantifier_ids(), search)])
    budgets = {"directions": search.directions, "full_pairs": search.full_pairs, "param_grid": list(search.param_grid)}
    meta = _metadata(cfg, budgets, {"family": family.params})
    return ResultRecord(cfg.scenario, meta, {"measures": reports, "intervals": intervals}, summary)


_RUNNERS = {
    "bounds-sweep": run_bounds_sweep,
    "robustness-map": run_robustness_map,
    "divisibility-report": run_divisibility_report,
    "domain-section": run_domain_section,
    "counterexample": run_counterexample,
    "measure": run_measure,
}


def run_scenario(cfg: ScenarioConfig) -> ResultRecord:
    """Run one scenario; the payload depends only on the config (seed included)."""
    start = time.perf_counter()
    record = _RUNNERS[cfg.scenario](cfg)
    record.metadata["runtime_seconds"] = round(time.perf_counter() - start, 3)
    return record

