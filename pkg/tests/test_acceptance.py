"""Acceptance checks, one test per criterion.

The counterexample scenario runs twice at full budget (10^5 pairs with a
19-point parameter sweep), so this module takes several minutes.
"""

import json
import math
import time

import numpy as np
import pytest

from nonmarkov import domains
from nonmarkov.config import ScenarioConfig
from nonmarkov.dynamics import (
    DephasingModel,
    RateTriple,
    counterexample_family,
    dephasing_as_family,
    piecewise_rate_family,
    rates,
    reconstruct_from_rates,
)
from nonmarkov.measure import DELTA_REV, ZERO_MEASURE, revival_sums, unital_jsd_td_identity
from nonmarkov.qubit import AffineMap
from nonmarkov.quantifiers import (
    QuantifierId,
    helstrom_norm,
    holevo_skew,
    jsd,
    quantum_skew,
    sqrt_jsd,
    trace_distance,
    triangle_constants,
)
from nonmarkov.sampling import (
    NONPOSITIVE_SAMPLING,
    make_rng,
    random_nonpositive_maps,
    random_pairs,
    random_pure_states,
    random_rate_segments,
    random_states,
)
from nonmarkov.scenarios import run_scenario

pytestmark = pytest.mark.slow

SLACK = 1e-10


def scenario(name, **overrides):
    return run_scenario(ScenarioConfig.from_dict(dict(overrides), name))


@pytest.fixture(scope="module")
def counterexample_run():
    start = time.perf_counter()
    record = scenario("counterexample", seed=42)
    return record, time.perf_counter() - start


def test_criterion_01_bounds_sweep():
    rec = scenario("bounds-sweep")
    assert rec.summary["pairs"] == 100_000
    assert rec.summary["all_ok"], rec.summary
    assert rec.summary["max_lower_excess"] <= SLACK
    assert rec.summary["max_upper_excess"] <= SLACK
    assert rec.metadata["runtime_seconds"] < 10


def test_criterion_02_coincidences():
    r1, r2 = random_pairs(make_rng(2), 10_000)
    np.testing.assert_allclose(helstrom_norm(0.5, r1, r2), trace_distance(r1, r2), rtol=0, atol=1e-12)
    j = jsd(r1, r2)
    np.testing.assert_allclose(holevo_skew(0.5, r1, r2), j, rtol=0, atol=1e-12)
    np.testing.assert_allclose(quantum_skew(0.5, r1, r2), j, rtol=0, atol=1e-12)


def test_criterion_03_triangle_like_inequalities():
    rng = make_rng(3)
    a, b, c = (random_states(rng, 100_000) for _ in range(3))
    excess = {"sqrt_jsd": np.max(sqrt_jsd(a, b) - sqrt_jsd(a, c) - sqrt_jsd(c, b))}
    excess["jsd_fourth_root"] = np.max(jsd(a, b) - jsd(a, c) - 2**0.25 * jsd(b, c) ** 0.25)
    for mu in (0.25, 0.5, 0.75):
        eta_s, eta_k = triangle_constants(mu)
        s_bc = np.maximum(quantum_skew(mu, b, c), 0)
        k_bc = np.maximum(holevo_skew(mu, b, c), 0)
        excess[f"S_{mu}"] = np.max(quantum_skew(mu, a, b) - quantum_skew(mu, a, c) - eta_s * s_bc**0.25)
        excess[f"K_{mu}"] = np.max(holevo_skew(mu, a, b) - holevo_skew(mu, a, c) - eta_k * k_bc**0.25)
    bad = {k: v for k, v in excess.items() if v > SLACK}
    assert not bad, bad


def test_criterion_04_unital_identity():
    family = dephasing_as_family(DephasingModel(coupling=3.0, ohmicity=3.0, cutoff=1.0))
    grid = np.linspace(0.0, 20.0, 2000)
    worst = max(unital_jsd_td_identity(r, family, grid) for r in random_pure_states(make_rng(4), 100))
    assert worst < 1e-10


def test_criterion_05_cp_divisible_monotone():
    rng = make_rng(5)
    grid = np.linspace(0.0, 4.0, 400)
    quantifiers = [
        QuantifierId.parse(q)
        for q in (
            "TD",
            "Helstrom:0.25",
            "Helstrom:0.75",
            "JSD",
            "SqrtJSD",
            "HolevoSkew:0.25",
            "HolevoSkew:0.75",
            "QuantumSkew:0.25",
            "QuantumSkew:0.75",
        )
    ]
    worst_increment = {q.label: 0.0 for q in quantifiers}
    false_revivals = {q.label: 0 for q in quantifiers}
    for _ in range(1000):
        family = piecewise_rate_family(random_rate_segments(rng, 4), list(rng.uniform(0.2, 1.0, 3)))
        r1, r2 = random_pairs(rng, 16, pure_fraction=0.5)
        for q in quantifiers:
            above_tol, _ = revival_sums(q, family, r1, r2, grid, floor=1e-8)
            measured, _ = revival_sums(q, family, r1, r2, grid, floor=DELTA_REV)
            worst_increment[q.label] = max(worst_increment[q.label], float(above_tol.max()))
            false_revivals[q.label] += int(np.count_nonzero(measured > 0))
    assert all(v == 0 for v in worst_increment.values()), worst_increment
    assert all(v == 0 for v in false_revivals.values()), false_revivals


def test_criterion_06_counterexample_divisibility():
    rec = scenario("divisibility-report")
    assert rec.summary["cp_all"]
    assert rec.summary["first_violation"] == pytest.approx(2.2, abs=0.1)
    assert rec.metadata["runtime_seconds"] < 5


def test_criterion_07_counterexample_separation(counterexample_run):
    record, seconds = counterexample_run
    measures = record.summary["measures"]
    assert set(measures) == {"antipodal", "full"}
    assert record.metadata["budgets"]["directions"] == 2048
    assert record.metadata["budgets"]["full_pairs"] == 100_000
    for stage, values in measures.items():
        assert values["TD"]["N"] > 1e-4, (stage, values["TD"])
        for name, v in values.items():
            if name.split(":")[0] in ("JSD", "HolevoSkew", "QuantumSkew"):
                assert v["N"] < 1e-6, (stage, name, v)
    assert seconds < 600


def test_criterion_08_dephasing_robustness_map():
    rec = scenario("robustness-map")
    s = rec.summary
    for q in ("TD", "JSD", "SqrtJSD"):
        assert s[q]["argmax_theta"] == pytest.approx(math.pi / 2, abs=1e-12), q
        assert s[q]["pole_values"] == [0.0, 0.0], q
    assert 1e-2 / 5 <= s["TD"]["max"] <= 1e-2 * 5
    assert 1e-3 / 5 <= s["JSD"]["max"] <= 1e-3 * 5
    assert s["JSD"]["plateau_width_50"] > s["TD"]["plateau_width_50"]


def test_criterion_09_domain_inclusion():
    rec = scenario("domain-section")
    table = rec.tables["section"]
    x, z = np.array(table.column("x")), np.array(table.column("z"))
    labels = np.array(table.column("label"))
    assert len(x) == 256 * 256
    gap = labels == domains.IN_PD_NOT_NCD
    assert gap.any()
    for pole in (0.9, -0.9):
        assert np.min(np.hypot(x[gap], z[gap] - pole)) < 0.05, pole
    m = AffineMap(np.array([1.1, 1.1, 0.1]), np.zeros(3))
    r = np.array([1 / 1.1, 0.0, 0.0])
    assert domains.ncd_membership(m, r).member
    assert rec.summary["unital_pair"]["jsd_after"] == pytest.approx(1.0, abs=1e-10)
    assert float(jsd(m(r), m(-r))) == pytest.approx(1.0, abs=1e-10)


def test_criterion_10_noncontractive_pair_sweep():
    maps = random_nonpositive_maps(make_rng(10), 1000)
    failures = []
    for i, m in enumerate(maps):
        res = domains.find_noncontractive_pair(m, seed=i)
        if not res.found:
            failures.append({"map": i, "diag": m.diag.tolist(), "shift": m.shift.tolist(), **res.to_dict()})
    if failures:
        print(f"sampling: {NONPOSITIVE_SAMPLING}")
        print(json.dumps(failures, indent=1))
    assert len(failures) <= 10, failures


def test_criterion_11_rates_round_trip():
    family = counterexample_family()
    step = 1e-3

    def rate_fn(t):
        g = rates(family, np.array([t]))
        return RateTriple(g.gamma_plus[0], g.gamma_minus[0], g.gamma_z[0])

    try:
        times, states = reconstruct_from_rates(rate_fn, [1.0, 1.0, 0.0], 4.0, step)
    except ValueError as exc:
        par, _, _ = family.functions(np.linspace(0, 4, 4001))
        crossing = np.linspace(0, 4, 4001)[np.argmax(par <= 0)]
        pytest.fail(
            f"rates are undefined on part of [0, 4]: {exc}. eta_par changes sign near t = {crossing:.4f}, "
            "so the map is not invertible there and the rate equations cannot be integrated through it"
        )
    par, perp, kap = family.functions(times)
    err = np.max(np.abs(states - np.stack([par, perp, kap], axis=1)))
    assert err < 1e-5


def test_criterion_12_determinism(counterexample_run):
    first, _ = counterexample_run
    second = scenario("counterexample", seed=42)
    assert first.payload_bytes() == second.payload_bytes()
