"""Command-line front end for running and validating experiments.

Subcommands: ``run`` a config file, ``compare`` a shipped multi-algorithm
preset, ``sweep`` a shipped bias-level preset (optionally step-size
gridding first), and ``validate-config``. Output files land in --out-dir,
falling back to $GOSSIPOPT_OUT_DIR and then ./out.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from .errors import ConfigurationError
from .runner import (
    RunResult,
    config_as_dict,
    emit_csv,
    emit_plot_script,
    grid_search,
    load_config,
    preset_configs,
    run,
)

DEFAULT_OUT_DIR = "out"
OUT_DIR_ENV = "GOSSIPOPT_OUT_DIR"


def _out_dir(arg: str | None) -> Path:
    path = Path(arg or os.environ.get(OUT_DIR_ENV) or DEFAULT_OUT_DIR)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_outputs(out_dir: Path, labelled: list[tuple[str, RunResult]], extra: dict | None = None) -> None:
    csv_paths = []
    summary = {"runs": []}
    if extra:
        summary.update(extra)
    for label, result in labelled:
        for seed_run in result.seed_runs:
            name = f"{label}_seed{seed_run.seed}.csv"
            emit_csv(seed_run.records, str(out_dir / name))
            csv_paths.append(name)
        summary["runs"].append(
            {
                "label": label,
                "config": config_as_dict(result.config),
                "spectral_gap": result.spectral_gap,
                "seeds": [sr.summary for sr in result.seed_runs],
                "aggregate": result.aggregate,
            }
        )
    with open(out_dir / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    emit_plot_script(csv_paths, str(out_dir / "plots.gp"))
    for label, result in labelled:
        agg = result.aggregate
        print(
            f"{label}: final loss {agg['mean_final_loss']:.6g} "
            f"(se {agg['se_final_loss']:.2g}), grad norm sq floor "
            f"{agg['mean_floor_grad_norm_sq']:.6g}"
        )
        for check in result.seed_runs[0].summary["guard"]:
            status = "ok" if check["ok"] else "EXCEEDED"
            print(
                f"  guard {check['name']}: value {check['value']:.4g} "
                f"vs bound {check['bound']:.4g} [{status}]"
            )
    print(f"wrote {len(csv_paths)} CSV files, summary.json, plots.gp to {out_dir}")


def _apply_overrides(cfg, args):
    if getattr(args, "iterations", None):
        cfg = replace(cfg, iterations=args.iterations)
    if getattr(args, "seeds", None):
        cfg = replace(cfg, seeds=tuple(int(s) for s in args.seeds.split(",")))
    return cfg


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    cfg = _apply_overrides(cfg, args)
    result = run(cfg, seed_override=args.seed_override)
    _write_outputs(_out_dir(args.out_dir), [("run", result)])
    return 0


def cmd_compare(args) -> int:
    out_dir = _out_dir(args.out_dir)
    labelled = []
    for label, cfg in preset_configs(args.preset):
        cfg = _apply_overrides(cfg, args)
        labelled.append((label, run(cfg)))
    _write_outputs(out_dir, labelled, extra={"preset": args.preset})
    return 0


def cmd_sweep(args) -> int:
    out_dir = _out_dir(args.out_dir)
    configs = preset_configs(args.preset)
    grid_report = None
    if args.grid:
        etas = [float(tok) for tok in args.grid.split(",")]
        _, probe_cfg = configs[0]
        probe_cfg = _apply_overrides(probe_cfg, args)
        grid_report = grid_search(probe_cfg, etas)
        best = grid_report[0]["step_size"]
        print(f"grid selected step size {best:g}")
        configs = [
            (label, replace(cfg, algo=replace(cfg.algo, step_size=best)))
            for label, cfg in configs
        ]
    labelled = []
    for label, cfg in configs:
        cfg = _apply_overrides(cfg, args)
        labelled.append((label, run(cfg)))
    extra = {"preset": args.preset}
    if grid_report is not None:
        extra["grid"] = grid_report
    _write_outputs(out_dir, labelled, extra=extra)
    return 0


def cmd_validate(args) -> int:
    try:
        load_config(args.config)
    except ConfigurationError as exc:
        print(f"invalid: {exc}")
        return 1
    print("ok")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gossipopt",
        description="Seeded decentralized-optimization experiments over gossip networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed-override", type=int, default=None)
    p_run.add_argument("--out-dir", default=None)
    p_run.add_argument("--iterations", type=int, default=None)
    p_run.add_argument("--seeds", default=None)
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="run a multi-algorithm preset")
    p_cmp.add_argument("--preset", default="paper-fig1")
    p_cmp.add_argument("--out-dir", default=None)
    p_cmp.add_argument("--iterations", type=int, default=None)
    p_cmp.add_argument("--seeds", default=None)
    p_cmp.set_defaults(func=cmd_compare)

    p_swp = sub.add_parser("sweep", help="run a bias-level preset, optionally grid-tuning first")
    p_swp.add_argument("--preset", default="paper-fig2")
    p_swp.add_argument("--out-dir", default=None)
    p_swp.add_argument("--iterations", type=int, default=None)
    p_swp.add_argument("--seeds", default=None)
    p_swp.add_argument("--grid", default=None, help="comma-separated step sizes to try first")
    p_swp.set_defaults(func=cmd_sweep)

    p_val = sub.add_parser("validate-config", help="check a config file and exit")
    p_val.add_argument("--config", required=True)
    p_val.set_defaults(func=cmd_validate)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
