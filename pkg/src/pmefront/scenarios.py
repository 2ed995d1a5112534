"""Scenario files, presets, sweep orchestration, and report emission.

A scenario pins one problem family (drift, source, initial data, domain,
horizon), the exponent sweep, and the diagnostic selection.  Scenario files
are TOML or JSON with strict key checking; rerunning an identical scenario
rewrites byte-identical reports under the same content-hash directory.
"""
from __future__ import annotations

import hashlib
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from .errors import ScenarioError
from .forcing import drift_from_config, source_from_config
from .grids import write_mask_rle, write_snapshot
from .heleshaw import LimitConfig, PsorConfig, run_limit
from .model import InitialData, ModelSpec, audit_assumptions
from .pme import SolveConfig, Trajectory, run

ARTIFACT_VERSION = "0.1.0"

DIAGNOSTIC_NAMES = (
    "ab",
    "streamline",
    "expansion",
    "nondegeneracy",
    "convergence",
    "dimension",
    "oscillation",
)

_SCHEMA = {
    "name": str,
    "dimension": int,
    "grid": int,
    "domain": list,
    "m_values": list,
    "include_limit": bool,
    "drift": {"kind": str, "params": dict},
    "source": {"kind": str, "params": dict},
    "init": {"kind": str, "params": dict, "support_radius": (int, float), "mollify_cells": int},
    "horizon": (int, float),
    "save_count": int,
    "cfl_fraction": (int, float),
    "psor": {"relaxation": (int, float), "tol_residual": (int, float), "max_sweeps": int},
    "diagnostics": list,
    "eta0": (int, float),
    "radii_cells": list,
    "time_weight": (int, float, type(None)),
    "output_dir": str,
    "seed": int,
}


@dataclass(frozen=True)
class Scenario:
    name: str
    dimension: int
    grid: int
    domain: tuple[float, float]
    m_values: tuple[float, ...]
    include_limit: bool
    drift_kind: str
    drift_params: dict
    source_kind: str
    source_params: dict
    init_kind: str
    init_params: dict
    horizon: float
    save_count: int = 11
    cfl_fraction: float = 0.4
    psor_relaxation: float = 1.7
    psor_tol: float = 1e-8
    psor_max_sweeps: int = 20000
    diagnostics: tuple[str, ...] = ()
    eta0: float | None = None
    radii_cells: tuple[int, ...] = (3, 4, 6, 8, 12, 16)
    time_weight: float | None = None
    init_support_radius: float = 1.0
    init_mollify_cells: int = 2
    output_dir: str = "out"
    seed: int = 0

    def __post_init__(self):
        if list(self.m_values) != sorted(self.m_values):
            raise ScenarioError("m_values must be sorted ascending")
        for d in self.diagnostics:
            if d not in DIAGNOSTIC_NAMES:
                raise ScenarioError(f"unknown diagnostic {d!r}")

    @property
    def eta(self) -> float:
        return self.eta0 if self.eta0 is not None else 0.1 * self.horizon

    @property
    def save_times(self) -> tuple[float, ...]:
        return tuple(float(t) for t in np.linspace(0.0, self.horizon, self.save_count))

    def model_spec(self, m: float) -> ModelSpec:
        return ModelSpec(
            m=m,
            dimension=self.dimension,
            domain_lo=self.domain[0],
            domain_hi=self.domain[1],
            horizon=self.horizon,
            drift=drift_from_config(self.drift_kind, self.drift_params, self.dimension),
            source=source_from_config(self.source_kind, self.source_params),
            init=InitialData(self.init_kind, dict(self.init_params),
                             self.init_support_radius, self.init_mollify_cells),
        )

    def to_config(self) -> dict:
        doc = {
            "name": self.name,
            "dimension": self.dimension,
            "grid": self.grid,
            "domain": list(self.domain),
            "m_values": list(self.m_values),
            "include_limit": self.include_limit,
            "drift": {"kind": self.drift_kind, "params": dict(self.drift_params)},
            "source": {"kind": self.source_kind, "params": dict(self.source_params)},
            "init": {
                "kind": self.init_kind,
                "params": dict(self.init_params),
                "support_radius": self.init_support_radius,
                "mollify_cells": self.init_mollify_cells,
            },
            "horizon": self.horizon,
            "save_count": self.save_count,
            "cfl_fraction": self.cfl_fraction,
            "psor": {
                "relaxation": self.psor_relaxation,
                "tol_residual": self.psor_tol,
                "max_sweeps": self.psor_max_sweeps,
            },
            "diagnostics": list(self.diagnostics),
            "radii_cells": list(self.radii_cells),
            "output_dir": self.output_dir,
            "seed": self.seed,
        }
        if self.eta0 is not None:
            doc["eta0"] = self.eta0
        if self.time_weight is not None:
            doc["time_weight"] = self.time_weight
        return doc

    def digest(self) -> str:
        """Content hash of the scenario physics; where it is written is not part
        of the identity, so the same sweep lands in the same hash directory
        under any output root."""
        doc = self.to_config()
        doc.pop("output_dir", None)
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode("utf-8")).hexdigest()


def _check_keys(doc: dict, schema: dict, path: str = ""):
    for key, val in doc.items():
        here = f"{path}.{key}" if path else key
        if key not in schema:
            raise ScenarioError(f"unknown key {here!r}")
        want = schema[key]
        if isinstance(want, dict):
            if not isinstance(val, dict):
                raise ScenarioError(f"key {here!r} must be a table")
            _check_keys(val, want, here)
        elif want is dict:
            if not isinstance(val, dict):
                raise ScenarioError(f"key {here!r} must be a table")
        elif isinstance(want, tuple):
            if isinstance(val, bool) and bool not in want:
                raise ScenarioError(f"key {here!r} has wrong type bool")
            if not isinstance(val, want):
                raise ScenarioError(f"key {here!r} has wrong type {type(val).__name__}")
        else:
            if want in (int, float) and isinstance(val, bool):
                raise ScenarioError(f"key {here!r} has wrong type bool")
            if not isinstance(val, want):
                raise ScenarioError(f"key {here!r} has wrong type {type(val).__name__}")


def scenario_from_config(doc: dict) -> Scenario:
    _check_keys(doc, _SCHEMA)
    missing = [k for k in ("name", "dimension", "grid", "domain", "m_values", "horizon") if k not in doc]
    if missing:
        raise ScenarioError(f"missing required key(s): {missing}")
    drift = doc.get("drift", {"kind": "zero", "params": {}})
    source = doc.get("source", {"kind": "zero", "params": {}})
    init = doc.get("init", {"kind": "patch", "params": {}})
    psor = doc.get("psor", {})
    m_values = []
    for m in doc["m_values"]:
        if isinstance(m, str):
            if m != "infinite":
                raise ScenarioError(f"bad m value {m!r}; use numbers or 'infinite'")
            continue  # handled by include_limit
        m_values.append(float(m))
    include_limit = bool(doc.get("include_limit", any(m == "infinite" for m in doc["m_values"])))
    return Scenario(
        name=doc["name"],
        dimension=int(doc["dimension"]),
        grid=int(doc["grid"]),
        domain=(float(doc["domain"][0]), float(doc["domain"][1])),
        m_values=tuple(sorted(m_values)),
        include_limit=include_limit,
        drift_kind=drift.get("kind", "zero"),
        drift_params=dict(drift.get("params", {})),
        source_kind=source.get("kind", "zero"),
        source_params=dict(source.get("params", {})),
        init_kind=init.get("kind", "patch"),
        init_params=dict(init.get("params", {})),
        init_support_radius=float(init.get("support_radius", 1.0)),
        init_mollify_cells=int(init.get("mollify_cells", 2)),
        horizon=float(doc["horizon"]),
        save_count=int(doc.get("save_count", 11)),
        cfl_fraction=float(doc.get("cfl_fraction", 0.4)),
        psor_relaxation=float(psor.get("relaxation", 1.7)),
        psor_tol=float(psor.get("tol_residual", 1e-8)),
        psor_max_sweeps=int(psor.get("max_sweeps", 20000)),
        diagnostics=tuple(doc.get("diagnostics", [])),
        eta0=float(doc["eta0"]) if "eta0" in doc else None,
        radii_cells=tuple(int(k) for k in doc.get("radii_cells", (3, 4, 6, 8, 12, 16))),
        time_weight=doc.get("time_weight"),
        output_dir=doc.get("output_dir", "out"),
        seed=int(doc.get("seed", 0)),
    )


def load_scenario(path) -> Scenario:
    """Parse a TOML or JSON scenario file with strict key validation."""
    path = Path(path)
    if not path.exists():
        raise ScenarioError(f"scenario file {path} does not exist")
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json":
        doc = json.loads(text)
    else:
        try:
            import tomllib  # py311+
        except ModuleNotFoundError:
            import tomli as tomllib
        doc = tomllib.loads(text)
    try:
        return scenario_from_config(doc)
    except ScenarioError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc


def save_scenario(s: Scenario, path):
    Path(path).write_text(json.dumps(s.to_config(), sort_keys=True, indent=2), encoding="utf-8")


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

def preset(name: str, grid: int | None = None) -> Scenario:
    """A fully specified scenario from the closed preset list."""
    if name == "barenblatt":
        s = Scenario(
            name="barenblatt",
            dimension=1, grid=256, domain=(-2.5, 2.5),
            m_values=(2.0, 10.0, 40.0, 80.0), include_limit=False,
            drift_kind="zero", drift_params={},
            source_kind="zero", source_params={},
            init_kind="barenblatt", init_params={"radius": 1.0, "t_offset": 0.5},
            horizon=0.5, save_count=6,
            diagnostics=("ab", "streamline", "nondegeneracy", "oscillation", "dimension"),
        )
    elif name == "rotation_drift":
        s = Scenario(
            name="rotation_drift",
            dimension=2, grid=128, domain=(-4.0, 4.0),
            m_values=(2.0, 10.0, 20.0, 40.0, 80.0), include_limit=True,
            drift_kind="rotation", drift_params={"omega": 0.2},
            source_kind="constant", source_params={"rate": 1.0},
            init_kind="smooth_bump",
            init_params={"radius": 1.0, "gamma0": 1.0, "sigma0": 0.5},
            horizon=0.5, save_count=11,
            diagnostics=("ab", "streamline", "expansion", "nondegeneracy",
                         "convergence", "dimension", "oscillation"),
        )
    elif name == "annulus_core":
        s = Scenario(
            name="annulus_core",
            dimension=2, grid=128, domain=(-3.0, 3.0),
            m_values=(80.0,), include_limit=True,
            drift_kind="zero", drift_params={},
            source_kind="logistic", source_params={"cap": 2.0, "slope": 1.0},
            init_kind="annulus_plus_core", init_params={},
            horizon=0.06, save_count=13,  # save grid hits t = 0.05 exactly
            eta0=0.0,
            diagnostics=("convergence",),
        )
    elif name == "subquadratic_bump":
        s = Scenario(
            name="subquadratic_bump",
            dimension=1, grid=256, domain=(-3.0, 3.0),
            m_values=(2.0, 10.0, 40.0), include_limit=False,
            drift_kind="zero", drift_params={},
            source_kind="constant", source_params={"rate": 1.0},
            init_kind="smooth_bump",
            init_params={"radius": 1.0, "gamma0": 1.0, "sigma0": 0.5},
            horizon=0.5, save_count=9,
            diagnostics=("ab", "streamline", "expansion", "oscillation"),
        )
    elif name == "r11_compatible":
        s = Scenario(
            name="r11_compatible",
            dimension=1, grid=256, domain=(-3.0, 3.0),
            m_values=(2.0, 10.0, 40.0, 80.0), include_limit=False,
            drift_kind="zero", drift_params={},
            source_kind="constant", source_params={"rate": 1.0},
            init_kind="smooth_bump",
            init_params={"radius": 1.0, "gamma0": 0.2, "sigma0": 1.0, "exponent": 1.0,
                         "amplitude": 0.4},
            horizon=0.5, save_count=9,
            diagnostics=("ab", "streamline", "expansion", "oscillation"),
        )
    elif name == "interior_ball_patch":
        s = Scenario(
            name="interior_ball_patch",
            dimension=2, grid=128, domain=(-3.0, 3.0),
            m_values=(10.0, 40.0), include_limit=True,
            drift_kind="rotation", drift_params={"omega": 0.05},
            source_kind="constant", source_params={"rate": 1.0},
            init_kind="patch", init_params={"radius": 1.0, "amplitude": 1.0},
            horizon=0.3, save_count=7,
            diagnostics=("streamline", "expansion", "convergence", "oscillation"),
        )
    else:
        raise ScenarioError(f"unknown preset {name!r}")
    if grid is not None:
        s = replace(s, grid=int(grid))
    return s


PRESET_NAMES = ("barenblatt", "rotation_drift", "annulus_core", "subquadratic_bump",
                "r11_compatible", "interior_ball_patch")


# ---------------------------------------------------------------------------
# runner
# ---------------------------------------------------------------------------

@dataclass
class RunManifest:
    scenario_hash: str
    artifact_version: str
    timings: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    def as_dict(self):
        return {
            "scenario_hash": self.scenario_hash,
            "artifact_version": self.artifact_version,
            "timings": self.timings,
            "files": self.files,
            "summary": self.summary,
            "failures": self.failures,
        }

    @property
    def all_passed(self) -> bool:
        return not self.failures and all(
            v.get("passed", True) for v in self.summary.values()
        )


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _json_report(path: Path, payload: dict):
    path.write_text(json.dumps(payload, sort_keys=True, indent=1, allow_nan=True,
                               default=_json_default), encoding="utf-8")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj)}")


def _csv_report(path: Path, header: list[str], rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(v) if isinstance(v, float) else str(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def run_scenario(s: Scenario, jobs: int = 1, keep_snapshots: bool = True) -> RunManifest:
    """Execute the exponent sweep plus diagnostics and write all artifacts."""
    out_root = Path(s.output_dir) / s.digest()[:12]
    out_root.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(scenario_hash=s.digest(), artifact_version=ARTIFACT_VERSION)
    doc = s.to_config()
    doc.pop("output_dir", None)  # the copy inside the run directory is self-locating
    (out_root / "scenario.json").write_text(
        json.dumps(doc, sort_keys=True, indent=2), encoding="utf-8")

    saves = s.save_times
    solve_cfg = SolveConfig(cfl_fraction=s.cfl_fraction, save_times=saves)
    limit_cfg = LimitConfig(
        cfl_fraction=s.cfl_fraction, save_times=saves,
        psor=PsorConfig(s.psor_relaxation, s.psor_tol, s.psor_max_sweeps),
    )

    trajs: dict[float, Trajectory] = {}
    limit_traj = None
    audits = {}

    def _run_one(m):
        spec = s.model_spec(m)
        grid = spec.grid(s.grid)
        tic = time.perf_counter()
        if spec.is_limit:
            result = run_limit(spec, grid, limit_cfg)
        else:
            rep = audit_assumptions(spec)
            if not rep.satisfied["ab_available"]:
                raise ScenarioError(
                    f"audit failed for m={m}: neither the positivity condition nor "
                    f"the drift-free fallback holds"
                )
            audits[m] = rep
            result = run(spec, grid, solve_cfg, audit=rep)
        return m, result, time.perf_counter() - tic

    labels = list(s.m_values) + ([math.inf] if s.include_limit else [])
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, labels))
    else:
        results = [_run_one(m) for m in labels]
    for m, result, wall in results:
        key = "inf" if m == math.inf else m
        manifest.timings[f"run_m_{key}"] = wall
        if m == math.inf:
            limit_traj = result
        else:
            trajs[m] = result

    if keep_snapshots:
        snap_dir = out_root / "snapshots"
        snap_dir.mkdir(exist_ok=True)
        for m, traj in trajs.items():
            for k, (t, rho, p) in enumerate(traj.snapshots):
                write_snapshot(snap_dir / f"m{m:g}_t{k:03d}_rho.snap", rho, f"rho[m={m:g}]")
                write_snapshot(snap_dir / f"m{m:g}_t{k:03d}_p.snap", p, f"p[m={m:g}]")
        if limit_traj is not None:
            for k, (t, st, pavg) in enumerate(limit_traj.snapshots):
                write_snapshot(snap_dir / f"minf_t{k:03d}_rho.snap", st.rho, "rho[limit]")
                write_snapshot(snap_dir / f"minf_t{k:03d}_p.snap", st.p, "p[limit]")
                write_snapshot(snap_dir / f"minf_t{k:03d}_pavg.snap", pavg, "pavg[limit]")

    # run manifests per finite m
    for m, traj in trajs.items():
        times, masses = zip(*traj.mass_series)
        stride = max(1, len(times) // 2048)
        payload = {
            "scenario_hash": s.digest(),
            "m": m,
            "steps": len(traj.step_log),
            "dt": {
                "count": len(traj.step_log),
                "min": min(traj.step_log) if traj.step_log else None,
                "max": max(traj.step_log) if traj.step_log else None,
                "sum": sum(traj.step_log),
            },
            "mass_series": [[times[i], masses[i]] for i in range(0, len(times), stride)],
            "mass_final": masses[-1],
            "clamped_mass": traj.clamped_mass,
            "min_before_clamp": traj.min_before_clamp,
        }
        _json_report(out_root / f"run_m{m:g}.json", payload)
    if limit_traj is not None:
        payload = {
            "scenario_hash": s.digest(),
            "psor_log": [[t, sw, res] for t, sw, res in limit_traj.psor_log],
            "mass_series": [[t, mm] for t, mm in limit_traj.mass_series],
            "complementarity_l1": [
                [t, st.complementarity_l1()] for t, st, _ in limit_traj.snapshots
            ],
        }
        _json_report(out_root / "run_minf.json", payload)

    reports = out_root / "reports"
    reports.mkdir(exist_ok=True)
    eta0 = s.eta

    for diag in s.diagnostics:
        tic = time.perf_counter()
        try:
            if diag == "ab":
                payload = {}
                ok = True
                for m, traj in trajs.items():
                    spec = s.model_spec(m)
                    rep = dg.ab_check(traj, spec, eta0, audits.get(m))
                    payload[f"m_{m:g}"] = rep.as_dict()
                    ok = ok and rep.passed
                payload["passed"] = ok
                _json_report(reports / "ab.json", payload)
                manifest.summary["ab"] = {"passed": ok}
            elif diag == "streamline":
                payload = {}
                ok = True
                for m, traj in trajs.items():
                    spec = s.model_spec(m)
                    rep = dg.streamline_check(traj, spec, eta0, audits.get(m))
                    payload[f"m_{m:g}"] = rep.as_dict()
                    ok = ok and rep.all_contained and rep.decay_fraction >= 0.95
                if limit_traj is not None:
                    spec = s.model_spec(math.inf)
                    rep = dg.streamline_check(limit_traj, spec, eta0)
                    payload["m_inf"] = rep.as_dict()
                    ok = ok and rep.all_contained
                payload["passed"] = ok
                _json_report(reports / "streamline.json", payload)
                manifest.summary["streamline"] = {"passed": ok}
            elif diag == "expansion":
                payload = {}
                ok = True
                spacing = saves[1] - saves[0] if len(saves) > 1 else s.horizon
                eta_exp = max(eta0, 2.0 * spacing)
                for m, traj in trajs.items():
                    spec = s.model_spec(m)
                    rep = dg.strict_expansion_measure(traj, spec, eta_exp)
                    payload[f"m_{m:g}"] = rep.as_dict()
                    ok = ok and rep.backward_positive_fraction >= 0.95
                payload["passed"] = ok
                _json_report(reports / "expansion.json", payload)
                manifest.summary["expansion"] = {"passed": ok}
            elif diag == "nondegeneracy":
                payload = {}
                ok = True
                grid = s.model_spec(s.m_values[0]).grid(s.grid)
                radii = [k * grid.dx for k in s.radii_cells]
                t_probe = max(t for t in saves if t >= eta0 - 1e-14)
                for m, traj in trajs.items():
                    spec = s.model_spec(m)
                    rep = dg.avg_pressure_probe(traj, spec, t_probe, radii)
                    payload[f"m_{m:g}"] = rep.as_dict()
                    ok = ok and (not rep.pooled_fit.conclusive or rep.pooled_fit.slope <= 1.9)
                    rows = list(zip(rep.radii, [np.exp(rep.pooled_fit.intercept) * r **
                                                rep.pooled_fit.slope for r in rep.radii]))
                    _csv_report(reports / f"nondegeneracy_m{m:g}.csv",
                                ["radius", "fit_average"], rows)
                payload["passed"] = ok
                _json_report(reports / "nondegeneracy.json", payload)
                manifest.summary["nondegeneracy"] = {"passed": ok}
            elif diag == "convergence":
                table = dg.convergence_report(trajs, limit_traj, eta0, s.time_weight)
                payload = table.as_dict()
                ok = True
                grid = s.model_spec(s.m_values[0]).grid(s.grid)
                # pairwise distances must not grow along the sweep (one cell slack)
                ms = list(s.m_values)
                for t in [tt for tt in saves if tt >= eta0 - 1e-14]:
                    seq = []
                    for a, b in zip(ms, ms[1:]):
                        d = table.per_time_hausdorff.get((a, b), {}).get(t)
                        if d is not None:
                            seq.append(d)
                    for d1, d2 in zip(seq, seq[1:]):
                        ok = ok and d2 <= d1 + grid.dx + 1e-12
                payload["passed"] = ok
                _json_report(reports / "convergence.json", payload)
                rows = []
                for (a, b), sub in sorted(table.per_time_hausdorff.items(), key=str):
                    for t, d in sub.items():
                        rows.append((a, b, t, d))
                _csv_report(reports / "convergence_hausdorff.csv",
                            ["m", "l", "t", "hausdorff"], rows)
                manifest.summary["convergence"] = {"passed": ok}
            elif diag == "dimension":
                payload = {}
                ok = True
                t_dim = saves[-1]
                for m, traj in trajs.items():
                    grid = traj.grid
                    rec = dg.trajectory_support(traj, t_dim)
                    radii = [k * grid.dx for k in s.radii_cells if k >= 3]
                    try:
                        est = dg.covering_dimension(rec, radii, m=m)
                    except ValueError as exc:
                        payload[f"m_{m:g}"] = {"skipped": str(exc)}
                        continue
                    payload[f"m_{m:g}"] = est.as_dict()
                    if est.fit.conclusive:
                        ok = ok and est.dimension <= (grid.dimension - 1) + 0.25
                    _csv_report(reports / f"dimension_m{m:g}.csv",
                                ["radius", "count"], list(zip(est.radii, est.counts)))
                payload["passed"] = ok
                _json_report(reports / "dimension.json", payload)
                manifest.summary["dimension"] = {"passed": ok}
            elif diag == "oscillation":
                payload = {}
                ok = True
                grid = s.model_spec(s.m_values[0]).grid(s.grid)
                radii = [k * grid.dx for k in s.radii_cells if k >= 1]
                for m, traj in trajs.items():
                    rep = dg.oscillation_propagation(traj, radii)
                    payload[f"m_{m:g}"] = {
                        "fitted_c": rep.fitted_c,
                        "passed": rep.passed,
                    }
                    sigma = dg.oscillation_exponent(traj.snapshots[0][1], radii)
                    payload[f"m_{m:g}"]["initial_exponent"] = sigma.as_dict()
                    ok = ok and rep.passed
                payload["passed"] = ok
                _json_report(reports / "oscillation.json", payload)
                manifest.summary["oscillation"] = {"passed": ok}
        except Exception as exc:  # keep the manifest even when a diagnostic dies
            manifest.failures.append({"diagnostic": diag, "error": repr(exc)})
        manifest.timings[f"diag_{diag}"] = time.perf_counter() - tic

    # frontier CSV exports for the last snapshot of each run
    for m, traj in trajs.items():
        rec = dg.trajectory_support(traj, saves[-1])
        pts = rec.boundary.grid.points()[rec.boundary.bits.ravel()]
        rows = [tuple(p) + (saves[-1],) for p in pts]
        header = ["x", "t"] if s.dimension == 1 else ["x", "y", "t"]
        _csv_report(out_root / "reports" / f"frontier_m{m:g}.csv", header, rows)
        write_mask_rle(out_root / "reports" / f"support_m{m:g}.json.rle", rec.support)

    inventory = {}
    for path in sorted(out_root.rglob("*")):
        if path.is_file() and path.name != "manifest.json":
            inventory[str(path.relative_to(out_root))] = _sha256(path)
    manifest.files = inventory
    _json_report(out_root / "manifest.json", manifest.as_dict())
    return manifest
