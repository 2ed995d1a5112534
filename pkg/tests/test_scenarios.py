import json
import math

import numpy as np
import pytest

from pmefront.cli import main as cli_main
from pmefront.errors import ScenarioError
from pmefront.model import audit_assumptions
from pmefront.scenarios import (
    PRESET_NAMES,
    load_scenario,
    preset,
    run_scenario,
    save_scenario,
    scenario_from_config,
)

MINIMAL = {
    "name": "tiny",
    "dimension": 1,
    "grid": 64,
    "domain": [-2.5, 2.5],
    "m_values": [2, 5],
    "horizon": 0.1,
    "init": {"kind": "barenblatt", "params": {"radius": 1.0, "t_offset": 0.5}},
}


class TestParsing:
    def test_minimal_with_defaults(self):
        s = scenario_from_config(dict(MINIMAL))
        assert s.m_values == (2.0, 5.0)
        assert s.cfl_fraction == 0.4
        assert s.save_count == 11
        assert not s.include_limit

    def test_m_values_sorted(self):
        doc = dict(MINIMAL)
        doc["m_values"] = [80, 10]
        s = scenario_from_config(doc)
        assert s.m_values == (10.0, 80.0)

    def test_unknown_key_rejected_by_name(self):
        doc = dict(MINIMAL)
        doc["drift"] = {"kindd": "rotation"}
        with pytest.raises(ScenarioError, match="drift.kindd"):
            scenario_from_config(doc)

    def test_unknown_top_level_key(self):
        doc = dict(MINIMAL)
        doc["gird"] = 64
        with pytest.raises(ScenarioError, match="gird"):
            scenario_from_config(doc)

    def test_missing_required(self):
        doc = dict(MINIMAL)
        del doc["horizon"]
        with pytest.raises(ScenarioError, match="horizon"):
            scenario_from_config(doc)

    def test_infinite_sentinel(self):
        doc = dict(MINIMAL)
        doc["m_values"] = [10, "infinite"]
        s = scenario_from_config(doc)
        assert s.include_limit
        assert s.m_values == (10.0,)

    def test_json_roundtrip(self, tmp_path):
        s = scenario_from_config(dict(MINIMAL))
        path = tmp_path / "scenario.json"
        save_scenario(s, path)
        back = load_scenario(path)
        assert back == s

    def test_toml_parsing(self, tmp_path):
        text = "\n".join([
            'name = "toml-case"',
            "dimension = 1",
            "grid = 64",
            "domain = [-2.0, 2.0]",
            "m_values = [2.0]",
            "horizon = 0.1",
            "[init]",
            'kind = "smooth_bump"',
            "[init.params]",
            "radius = 0.8",
        ])
        path = tmp_path / "scenario.toml"
        path.write_text(text)
        s = load_scenario(path)
        assert s.name == "toml-case"
        assert s.init_params["radius"] == 0.8

    def test_missing_file(self, tmp_path):
        with pytest.raises(ScenarioError, match="does not exist"):
            load_scenario(tmp_path / "nope.toml")


class TestPresets:
    def test_list_is_closed(self):
        for name in PRESET_NAMES:
            s = preset(name)
            assert s.name == name
        with pytest.raises(ScenarioError):
            preset("not-a-preset")

    def test_barenblatt_audit_uses_fallback_route(self):
        s = preset("barenblatt")
        rep = audit_assumptions(s.model_spec(2.0))
        assert not rep.satisfied["cond"]          # sigma = 0 for b = f = 0
        assert rep.satisfied["alt_floor_route"]   # non-increasing p-only source
        assert rep.satisfied["ab_available"]

    def test_annulus_core_matches_profile(self):
        # limit density: 1/2 + |x|^2/2 inside the unit disk, 1 on the ring
        s = preset("annulus_core")
        spec = s.model_spec(80.0)
        g = spec.grid(128)
        rho = spec.init.limit_density(g).values
        X, Y = g.meshgrid()
        r = np.sqrt(X**2 + Y**2)
        inner = r < 0.9
        assert np.allclose(rho[inner], 0.5 + 0.5 * r[inner] ** 2)
        ring = (r > 1.1) & (r < 1.9)
        assert np.all(rho[ring] == 1.0)
        assert np.all(rho[r > 2.1] == 0.0)

    def test_subquadratic_bump_passes_growth_check(self):
        s = preset("subquadratic_bump")
        spec = s.model_spec(2.0)
        g = spec.grid(256)
        report = spec.init.verify_subquadratic_growth(g, 2.0)
        assert report["gamma0"] == 1.0 and report["sigma0"] == 0.5
        assert report["ok"]

    def test_r11_preset_passes_semiconvexity_audit(self):
        s = preset("r11_compatible")
        for m in (2.0, 40.0):
            rep = audit_assumptions(s.model_spec(m))
            assert rep.satisfied["r11"]

    def test_interior_ball_smallness_condition(self):
        # sigma > 2 d sup|grad b| with the rotation rate of the preset
        s = preset("interior_ball_patch")
        rep = audit_assumptions(s.model_spec(10.0))
        grad_b = 0.05 * math.sqrt(2.0)
        assert rep.sigma > 2 * 2 * grad_b


@pytest.fixture(scope="module")
def tiny(tmp_path_factory):
    out = tmp_path_factory.mktemp("runs")
    s = scenario_from_config(dict(MINIMAL))
    from dataclasses import replace

    s = replace(s, output_dir=str(out), save_count=3,
                diagnostics=("ab", "oscillation"))
    manifest = run_scenario(s)
    return s, manifest, out


class TestRunScenario:

    def test_manifest_inventory_complete(self, tiny):
        import hashlib
        from pathlib import Path

        s, manifest, out = tiny
        root = Path(s.output_dir) / s.digest()[:12]
        on_disk = {str(p.relative_to(root)) for p in root.rglob("*")
                   if p.is_file() and p.name != "manifest.json"}
        assert on_disk == set(manifest.files)
        for rel, digest in manifest.files.items():
            data = (root / rel).read_bytes()
            assert hashlib.sha256(data).hexdigest() == digest

    def test_reports_pass(self, tiny):
        s, manifest, out = tiny
        assert manifest.all_passed

    def test_rerun_is_bit_identical(self, tiny):
        s, manifest, out = tiny
        manifest2 = run_scenario(s)
        assert manifest.files == manifest2.files

    def test_empty_diagnostics_runs_only(self, tmp_path):
        from dataclasses import replace

        s = scenario_from_config(dict(MINIMAL))
        s = replace(s, output_dir=str(tmp_path), save_count=2, diagnostics=())
        manifest = run_scenario(s)
        assert manifest.summary == {}
        assert any(k.startswith("run_m_") for k in manifest.timings)

    def test_parallel_jobs_match_sequential(self, tiny, tmp_path):
        from dataclasses import replace

        s, manifest, out = tiny
        s2 = replace(s, output_dir=str(tmp_path))
        m2 = run_scenario(s2, jobs=2)
        assert m2.files == manifest.files


class TestCli:
    def test_preset_list(self, capsys):
        assert cli_main(["preset", "list"]) == 0
        out = capsys.readouterr().out
        for name in PRESET_NAMES:
            assert name in out

    def test_preset_show(self, capsys):
        assert cli_main(["preset", "show", "barenblatt"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["name"] == "barenblatt"

    def test_audit_verb(self, capsys):
        assert cli_main(["audit", "r11_compatible"]) == 0
        assert "sigma" in capsys.readouterr().out

    def test_run_and_report(self, tmp_path, capsys):
        scen = dict(MINIMAL)
        scen["diagnostics"] = ["ab"]
        scen["save_count"] = 3
        path = tmp_path / "s.json"
        path.write_text(json.dumps(scen))
        rc = cli_main(["--out", str(tmp_path / "o"), "run", str(path)])
        out = capsys.readouterr().out
        assert rc == 0
        run_dir = out.splitlines()[0].split()[-1]
        assert cli_main(["report", run_dir]) == 0
        assert "ab: PASS" in capsys.readouterr().out
