import json
import math

import numpy as np
import pytest
import yaml
from hypothesis import given
from hypothesis import strategies as st

from nonmarkov.cli import main
from nonmarkov.config import SCENARIOS, ConfigError, ScenarioConfig, build_family
from nonmarkov.dynamics import eval_map
from nonmarkov.records import ResultRecord, Table, emit, load, read_table_csv, write_table_csv
from nonmarkov.scenarios import run_scenario

cells = st.one_of(
    st.floats(allow_nan=True, allow_infinity=True),
    st.integers(-(2**53), 2**53),
    st.booleans(),
    st.text(alphabet="abcxyz-_ .", min_size=1, max_size=8).filter(lambda s: s.strip() == s and s not in ("nan", "inf", "-inf", "true", "false")).filter(lambda s: not _numeric(s)),
)


def _numeric(s):
    try:
        float(s)
        return True
    except ValueError:
        return False


def small(scenario, **extra):
    base = {
        "bounds-sweep": {"sweep": {"pairs": 500}},
        "robustness-map": {"grid": {"start": 0, "stop": 10, "points": 200}, "robustness": {"n_theta": 9, "n_phi": 8}},
        "divisibility-report": {"grid": {"start": 0, "stop": 4, "points": 200}},
        "domain-section": {"section": {"resolution": 32, "budget": 200}},
        "counterexample": {"grid": {"start": 0, "stop": 4, "points": 400}, "search": {"directions": 64, "full_pairs": 64}},
        "measure": {"grid": {"start": 0, "stop": 4, "points": 400}, "search": {"directions": 32}},
    }[scenario]
    return ScenarioConfig.from_dict({**base, **extra}, scenario)


class TestConfig:
    def test_defaults(self):
        cfg = ScenarioConfig.from_dict({}, "counterexample")
        assert cfg.seed == 42 and cfg.search["directions"] == 2048 and cfg.search["full_pairs"] == 100_000
        assert cfg.time_grid().size == 4000 and cfg.time_grid()[-1] == 4.0
        assert ScenarioConfig.from_dict({}, "robustness-map").robustness["n_theta"] % 2 == 1

    @pytest.mark.parametrize("raw,match", [
        ({"bogus": 1}, "unknown key"),
        ({"grid": {"start": 0, "stop": 4, "step": 1}}, "unknown key"),
        ({"schema_version": 2}, "schema_version"),
        ({"scenario": "nope"}, "not"),
        ({"grid": {"start": 4, "stop": 0, "points": 10}}, "grid"),
        ({"family": {"kind": "mystery"}}, "kind"),
        ({"family": {"kind": "dephasing", "mu1": 3}}, "unknown key"),
        ({"quantifiers": ["fidelity"]}, "unknown quantifier|fidelity"),
        ({"seed": -1}, "seed"),
        ({"family": {"kind": "composed", "first": {"kind": "identity"}, "t1": 1}}, "second"),
    ])
    def test_rejects(self, raw, match):
        with pytest.raises(ConfigError, match=match):
            ScenarioConfig.from_dict(raw, "measure")

    def test_section_resolution(self):
        with pytest.raises(ConfigError):
            ScenarioConfig.from_dict({"section": {"resolution": 8}}, "domain-section")

    def test_file_round_trip(self, tmp_path):
        cfg = small("measure", seed=7, quantifiers=["TD", "HolevoSkew:0.3"])
        path = tmp_path / "c.yaml"
        path.write_text(yaml.safe_dump(cfg.to_dict()))
        again = ScenarioConfig.from_file(path)
        assert again.to_dict() == cfg.to_dict()
        assert [q.label() for q in again.quantifier_ids()] == ["TD", "HolevoSkew:0.3"]

    def test_json_is_accepted(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"scenario": "bounds-sweep", "sweep": {"pairs": 10}}))
        assert ScenarioConfig.from_file(path).sweep["pairs"] == 10

    def test_family_kinds(self):
        comp = build_family({"kind": "composed", "first": {"kind": "phase-covariant-parametric", "rates": [[1, 0.5, 0.2]], "durations": []}, "second": {"kind": "identity"}, "t1": 1.0})
        assert comp.name == "composed"
        assert build_family({"kind": "counterexample", "alpha": 6}).params["alpha"] == 6
        dep = build_family({"kind": "dephasing", "ohmicity": 1})
        assert eval_map(dep, 1.0).diag[2] == 1
        with pytest.raises(ConfigError):
            build_family({"kind": "phase-covariant-parametric", "rates": [[1, 2]], "durations": []})


class TestRecords:
    def test_empty_table_header_only(self, tmp_path):
        path = write_table_csv(Table([("D", "1"), ("J", "bit")]), tmp_path / "t.csv")
        assert path.read_text() == "D [1],J [bit]\n"
        assert read_table_csv(path) == Table([("D", "1"), ("J", "bit")])

    def test_row_width(self):
        with pytest.raises(ValueError):
            Table([("a", "1")], [(1, 2)])

    @given(st.lists(st.tuples(cells, cells, cells), max_size=20))
    def test_csv_round_trip(self, rows):
        import tempfile
        from pathlib import Path

        table = Table([("a", "1"), ("b name", "bit"), ("c", "time")], rows)
        with tempfile.TemporaryDirectory() as d:
            path = write_table_csv(table, Path(d) / "t.csv")
            assert read_table_csv(path) == table

    @pytest.mark.parametrize("fmt", ["csv", "json"])
    def test_emit_load(self, tmp_path, fmt):
        rec = ResultRecord(
            "demo",
            {"seed": 1, "delta": 1e-9},
            {"t": Table([("x", "1"), ("flag", "bool"), ("name", "label")], [(0.1, True, "a"), (math.inf, False, "b"), (math.nan, True, "c"), (np.float64(1 / 3), False, "d")])},
            {"value": np.float64(2.5), "inf": math.inf},
        )
        paths = emit(rec, tmp_path, fmt)
        main_file = [p for p in paths if p.suffix == ".json"][0]
        back = load(main_file)
        assert back.tables == rec.tables
        assert back.payload_bytes() == rec.payload_bytes()
        text = "".join(p.read_text() for p in paths)
        assert "NaN" not in text and "Infinity" not in text

    def test_unknown_format(self, tmp_path):
        with pytest.raises(ValueError):
            emit(ResultRecord("x", {}, {}), tmp_path, "xml")


class TestScenarios:
    @pytest.mark.parametrize("scenario", SCENARIOS)
    def test_runs_and_is_deterministic(self, scenario, tmp_path):
        a = run_scenario(small(scenario))
        b = run_scenario(small(scenario))
        assert a.payload_bytes() == b.payload_bytes()
        meta = a.metadata
        assert meta["seed"] == 42 and "budgets" in meta
        conv = meta["conventions"]
        for key in ("entropy_base", "delta_rev", "eigenvalue_clamp_eps", "dephasing_exponent", "rng", "state_sampling"):
            assert key in conv
        for table in a.tables.values():
            assert all(name and unit for name, unit in table.columns)
        for fmt in ("csv", "json"):
            paths = emit(a, tmp_path / fmt, fmt)
            main_file = [p for p in paths if p.suffix == ".json"][0]
            assert load(main_file).tables == a.tables

    def test_seed_changes_payload(self):
        assert run_scenario(small("bounds-sweep", seed=1)).payload_bytes() != run_scenario(small("bounds-sweep", seed=2)).payload_bytes()

    def test_bounds_summary(self):
        rec = run_scenario(small("bounds-sweep"))
        assert rec.summary["all_ok"] and rec.summary["pairs"] == 500

    def test_domain_summary(self):
        s = run_scenario(small("domain-section")).summary
        assert s["unital_pair"]["jsd_after"] == pytest.approx(1.0, abs=1e-10)
        assert s["max_image_norm"] == pytest.approx(1.1)


class TestCli:
    def test_bounds_sweep(self, tmp_path, capsys):
        assert main(["bounds-sweep", "--pairs", "100", "--out", str(tmp_path), "--format", "csv"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert any(f.endswith("bounds-sweep.pairs.csv") for f in out["files"])
        rec = load(tmp_path / "bounds-sweep.meta.json")
        assert len(rec.tables["pairs"].rows) == 100

    def test_config_and_override(self, tmp_path):
        cfg = tmp_path / "c.yaml"
        cfg.write_text("scenario: divisibility-report\ngrid: {start: 0, stop: 4, points: 100}\n")
        assert main(["divisibility-report", "--config", str(cfg), "--points", "50", "--out", str(tmp_path)]) == 0
        rec = load(tmp_path / "divisibility-report.json")
        assert rec.metadata["config"]["grid"]["points"] == 50

    def test_invalid_config_exit_code(self, tmp_path, capsys):
        assert main(["domain-section", "--resolution", "8", "--out", str(tmp_path)]) == 2
        err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert err["error"]["type"] == "invalid-config"
        assert json.loads((tmp_path / "error.json").read_text()) == err

    def test_unknown_key_in_file(self, tmp_path):
        cfg = tmp_path / "c.yaml"
        cfg.write_text("sweep: {pairs: 10, colour: red}\n")
        assert main(["bounds-sweep", "--config", str(cfg), "--out", str(tmp_path)]) == 2

    def test_mismatched_scenario(self, tmp_path):
        cfg = tmp_path / "c.yaml"
        cfg.write_text("scenario: measure\n")
        assert main(["bounds-sweep", "--config", str(cfg), "--out", str(tmp_path)]) == 2

    def test_invalid_input(self, tmp_path, capsys):
        # RelEnt passes validation but has no revival measure
        assert main(["measure", "--quantifier", "RelEnt", "--directions", "8", "--points", "50", "--out", str(tmp_path)]) == 2
        assert json.loads(capsys.readouterr().err.strip().splitlines()[-1])["error"]["type"] == "invalid-input"

    def test_module_entry(self):
        import subprocess
        import sys

        res = subprocess.run([sys.executable, "-m", "nonmarkov", "--help"], capture_output=True, text=True)
        assert res.returncode == 0
        for name in SCENARIOS:
            assert name in res.stdout
