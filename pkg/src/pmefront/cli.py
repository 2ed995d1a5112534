"""Command line entry point.

Verbs:
  audit <scenario>          run the assumption audit for every finite m
  run <scenario>            run the sweep plus selected diagnostics
  preset list               list the preset names
  preset show <name>        print a preset as a scenario config
  report <dir>              re-render the pass/fail summary from a manifest

A scenario argument is either a preset name or a path to a TOML/JSON file.
Exit code 0 means every selected diagnostic passed its declared tolerance.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .model import audit_assumptions
from .scenarios import PRESET_NAMES, load_scenario, preset, run_scenario


def _resolve_scenario(arg: str, args):
    if arg in PRESET_NAMES:
        s = preset(arg)
    else:
        s = load_scenario(arg)
    if args.grid is not None:
        s = replace(s, grid=args.grid)
    if args.horizon is not None:
        s = replace(s, horizon=args.horizon)
    if args.out is not None:
        s = replace(s, output_dir=args.out)
    if args.seed is not None:
        s = replace(s, seed=args.seed)
    return s


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="pmefront", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--grid", type=int, default=None, help="override cells per axis")
    parser.add_argument("--horizon", type=float, default=None, help="override time horizon")
    parser.add_argument("--out", type=str, default=None, help="override output directory")
    parser.add_argument("--jobs", type=int, default=1, help="concurrent runs in the sweep")
    parser.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    sub = parser.add_subparsers(dest="verb", required=True)

    p_audit = sub.add_parser("audit", help="audit the standing assumptions")
    p_audit.add_argument("scenario")
    p_run = sub.add_parser("run", help="run the sweep and diagnostics")
    p_run.add_argument("scenario")
    p_preset = sub.add_parser("preset", help="inspect presets")
    p_preset.add_argument("action", choices=("list", "show"))
    p_preset.add_argument("name", nargs="?")
    p_report = sub.add_parser("report", help="summarize an output directory")
    p_report.add_argument("dir")

    args = parser.parse_args(argv)

    if args.verb == "preset":
        if args.action == "list":
            for name in PRESET_NAMES:
                print(name)
            return 0
        if not args.name:
            print("preset show needs a name", file=sys.stderr)
            return 2
        print(json.dumps(preset(args.name).to_config(), sort_keys=True, indent=2))
        return 0

    if args.verb == "audit":
        s = _resolve_scenario(args.scenario, args)
        ok = True
        for m in s.m_values:
            rep = audit_assumptions(s.model_spec(m))
            print(f"m={m:g}: sigma={rep.sigma:.6g} sigma_tilde={rep.sigma_tilde:.6g} "
                  f"p_max={rep.p_max:.6g}")
            for key, val in sorted(rep.satisfied.items()):
                print(f"    {key}: {val}")
            ok = ok and rep.satisfied["ab_available"]
        return 0 if ok else 1

    if args.verb == "run":
        s = _resolve_scenario(args.scenario, args)
        manifest = run_scenario(s, jobs=max(1, args.jobs))
        out = Path(s.output_dir) / s.digest()[:12]
        print(f"wrote {out}")
        for name, entry in sorted(manifest.summary.items()):
            print(f"  {name}: {'PASS' if entry.get('passed', True) else 'FAIL'}")
        for failure in manifest.failures:
            print(f"  ERROR in {failure['diagnostic']}: {failure['error']}")
        return 0 if manifest.all_passed else 1

    if args.verb == "report":
        path = Path(args.dir) / "manifest.json"
        if not path.exists():
            print(f"no manifest at {path}", file=sys.stderr)
            return 2
        doc = json.loads(path.read_text(encoding="utf-8"))
        print(f"scenario hash: {doc['scenario_hash']}")
        ok = not doc["failures"]
        for name, entry in sorted(doc["summary"].items()):
            passed = entry.get("passed", True)
            ok = ok and passed
            print(f"  {name}: {'PASS' if passed else 'FAIL'}")
        for failure in doc["failures"]:
            print(f"  ERROR in {failure['diagnostic']}: {failure['error']}")
        print(f"files: {len(doc['files'])}")
        return 0 if ok else 1

    return 2  # pragma: no cover


if __name__ == "__main__":
    raise SystemExit(main())
