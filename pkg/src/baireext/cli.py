"""Command-line runner: executes a scenario end to end (space, approximation
pipeline, extension, verification plan) and emits deterministic artifacts.

    baireext run --scenario S1 --out results/
    baireext list
    baireext describe S2

Outputs per run: <out>/<name>_field.csv (or .json), <out>/<name>_manifest.json
with all certification reports and a verdict, <out>/<name>_diag.jsonl with
per-stage pipeline diagnostics.  Identical config + seed reproduces the files
byte for byte; the exit code is 0 exactly when no check failed.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from .extension import build_extension, field_to_csv, smooth_extension
from .pipeline import baire_approximate
from .scenarios import Scenario, ScenarioConfig, get_scenario, list_scenarios
from .verify import check_boundedness, check_continuity, check_nt, check_ucpc

__all__ = ["main", "run_scenario"]

_CONFIG_KEYS = ("grid", "norm", "mode", "tol", "steps", "seed")


def run_scenario(
    name: str,
    cfg: ScenarioConfig,
    out_dir: Optional[Path] = None,
    fmt: str = "csv",
) -> tuple[dict, int]:
    """Run one scenario; returns (manifest, exit_code) and writes artifacts."""
    scenario = get_scenario(name)
    if cfg.mode is not None and cfg.mode not in scenario.supported_modes:
        raise ValueError(
            f"scenario {name} supports modes {scenario.supported_modes}, not {cfg.mode!r}"
        )
    data = scenario.build(cfg)
    bundle = data.bundle

    diag_lines: list[dict] = []
    items = baire_approximate(bundle, data.n_seq, diag=diag_lines.append)

    field = None
    if data.run_extension:
        field = build_extension(
            data.space, items, bundle.f_values, data.query_idx, bundle.norm_tag
        )
        field = smooth_extension(field)

    values_seq = np.stack([it.values for it in items])
    reports = []
    for chk in data.plan:
        if chk.kind == "nt":
            rep = check_nt(field, chk.path, cfg.tol)
        elif chk.kind == "continuity":
            rep = check_continuity(
                field, chk.path, cfg.tol, declared_continuity=bundle.continuity_idx
            )
        elif chk.kind == "boundedness":
            rep = check_boundedness(field, chk.anchor_y, chk.r, chk.sup_cert)
        elif chk.kind == "ucpc":
            rep = check_ucpc(
                bundle.hspace, values_seq, bundle.f_values, chk.y0, tag=bundle.norm_tag
            )
        else:
            raise ValueError(f"unknown planned check kind {chk.kind!r}")
        reports.append(rep)

    statuses = [r.status for r in reports]
    if "fail" in statuses:
        verdict = "fail"
    elif "inconclusive" in statuses:
        verdict = "pass-with-inconclusive"
    else:
        verdict = "pass"
    manifest = {
        "scenario": name,
        "seed": cfg.seed,
        "grid": cfg.grid,
        "norm": cfg.norm,
        "mode": cfg.mode or scenario.default_mode,
        "tol": cfg.tol,
        "steps": cfg.steps,
        "n_seq": data.n_seq,
        "reports": [r.to_dict() for r in reports],
        "counts": {
            "pass": statuses.count("pass"),
            "fail": statuses.count("fail"),
            "inconclusive": statuses.count("inconclusive"),
        },
        "verdict": verdict,
    }

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        if field is not None:
            if fmt == "csv":
                (out_dir / f"{name}_field.csv").write_text(
                    field_to_csv(field, data.primary_anchor_y)
                )
            else:
                rows = _field_rows_json(field, data.primary_anchor_y)
                (out_dir / f"{name}_field.json").write_text(
                    json.dumps(rows, sort_keys=True)
                )
        (out_dir / f"{name}_manifest.json").write_text(
            json.dumps(manifest, sort_keys=True, indent=2) + "\n"
        )
        (out_dir / f"{name}_diag.jsonl").write_text(
            "".join(json.dumps(d, sort_keys=True) + "\n" for d in diag_lines)
        )
    return manifest, (0 if verdict != "fail" else 1)


def _field_rows_json(field, anchor_y: int) -> list[dict]:
    from .extension import alp5_rhs, nt_quotient

    q_nt = nt_quotient(field, anchor_y)
    rhs = alp5_rhs(field, anchor_y)
    rows = []
    for q in range(field.n_queries):
        x = int(field.query_idx[q])
        coords = (
            [float(c) for c in field.space.coords[x]]
            if field.space.coords is not None
            else [x]
        )
        rows.append(
            {
                "x": coords,
                "dist_h": float(field.dist_h[q]),
                "n_of_x": int(field.n_of_x[q]),
                "u_index": int(field.u_x[q]),
                "g": [float(v) for v in field.g[q]],
                "g_smooth": [float(v) for v in field.g_smooth[q]],
                "q_nt": float(q_nt[q]),
                "alp5_rhs": float(rhs[q]),
                "alp5_slack": float(rhs[q] - q_nt[q]),
            }
        )
    return rows


def _describe(scenario: Scenario) -> str:
    lines = [
        f"{scenario.name}: {scenario.title}",
        f"  properties: {', '.join(scenario.properties)}",
        f"  modes: default={scenario.default_mode}, supported={', '.join(scenario.supported_modes)}",
        "",
        "  " + scenario.summary,
    ]
    return "\n".join(lines)


def _merge_config(args: argparse.Namespace) -> ScenarioConfig:
    base = dataclasses.asdict(ScenarioConfig())
    if args.config:
        loaded = json.loads(Path(args.config).read_text())
        for key in loaded:
            if key not in _CONFIG_KEYS and key not in ("scenario", "out", "format"):
                raise ValueError(f"unknown config key {key!r}")
        base.update({k: loaded[k] for k in _CONFIG_KEYS if k in loaded})
    for k in _CONFIG_KEYS:
        v = getattr(args, k, None)
        if v is not None:
            base[k] = v
    return ScenarioConfig(**base)


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="baireext",
        description="Approximation and extension of pointwise limits on sampled "
        "metric spaces, with a certification harness.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario end to end")
    p_run.add_argument("--scenario", help="scenario name (see `list`)")
    p_run.add_argument("--config", help="JSON config file; flags override it")
    p_run.add_argument("--grid", type=int, help="grid points per axis (default 201)")
    p_run.add_argument("--norm", choices=["l2", "linf"], help="target-space norm")
    p_run.add_argument("--mode", choices=["finite", "sampled"], help="space mode")
    p_run.add_argument("--tol", type=float, help="decay tolerance (default 5e-2)")
    p_run.add_argument("--steps", type=int, help="path steps (default 12)")
    p_run.add_argument("--seed", type=int, help="run seed (default 0)")
    p_run.add_argument("--out", help="output directory (default ./out)")
    p_run.add_argument("--format", choices=["csv", "json"], help="field table format")

    sub.add_parser("list", help="list the built-in scenarios")
    p_desc = sub.add_parser("describe", help="show one scenario card")
    p_desc.add_argument("name")

    args = parser.parse_args(argv)

    if args.command == "list":
        for sc in list_scenarios():
            print(f"{sc.name}  {sc.title:28s}  [{', '.join(sc.properties)}]")
        return 0
    if args.command == "describe":
        try:
            print(_describe(get_scenario(args.name)))
        except KeyError as exc:
            print(exc.args[0], file=sys.stderr)
            return 2
        return 0

    # run
    name = args.scenario
    if not name and args.config:
        name = json.loads(Path(args.config).read_text()).get("scenario")
    if not name:
        print("run needs --scenario (or a config with a scenario key)", file=sys.stderr)
        return 2
    cfg = _merge_config(args)
    out = args.out
    if out is None and args.config:
        out = json.loads(Path(args.config).read_text()).get("out")
    fmt = args.format
    if fmt is None and args.config:
        fmt = json.loads(Path(args.config).read_text()).get("format")
    try:
        manifest, code = run_scenario(name, cfg, Path(out or "out"), fmt or "csv")
    except KeyError as exc:
        print(exc.args[0], file=sys.stderr)
        return 2
    counts = manifest["counts"]
    print(
        f"{name}: {manifest['verdict']} "
        f"(pass={counts['pass']} fail={counts['fail']} inconclusive={counts['inconclusive']})"
    )
    return code


if __name__ == "__main__":
    sys.exit(main())
