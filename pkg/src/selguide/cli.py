"""Command-line entry point: ``selguide {sample,sweep,bench,tune,validate-config}``.

Exit codes: 0 on success, 1 on configuration errors, 2 on runtime errors.
Output files never contain wall-clock figures, so reruns are byte-identical;
wall time appears only in the printed summary line.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path
from typing import Any, Sequence

from . import config as cfg
from .errors import ConfigError, SelguideError
from .experiments import bench, gs_tune, scale_grid, window_sweep
from .sampler import run_batch, run_seeds

SCHEMA_VERSION = 1

SAMPLE_COLUMNS = ("seed", "x...", "nfe", "simulated_time")
SWEEP_COLUMNS = ("start_frac", "end_frac", "nfe", "endpoint_mse", "sliced_w2")
BENCH_COLUMNS = ("f", "f_effective", "nfe", "simulated_time", "saving", "predicted_saving", "endpoint_mse", "sliced_w2")
TUNE_COLUMNS = ("scale", "endpoint_mse")


def _cell(value: Any) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def _write_json(path: Path, payload: dict) -> None:
    payload = {"schema_version": SCHEMA_VERSION, **payload}
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _prepare_out(out: Path, settings: cfg.Settings) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.echo").write_text(settings.echo())
    return out


def cmd_sample(settings: cfg.Settings, out: Path) -> str:
    config = settings.run_config()
    seeds = run_seeds(config.seed, settings.seeds("sample"))
    result = run_batch(config, seeds)
    dim = config.mixture.dim
    header = ["seed"] + [f"x{k}" for k in range(dim)] + ["nfe", "simulated_time"]
    _write_csv(
        out / "samples.csv",
        header,
        ([seed, *map(float, x), result.nfe_total, result.simulated_time] for seed, x in result.pairs()),
    )
    if result.states is not None:
        n = config.num_steps
        rows = []
        for b, seed in enumerate(result.seeds):
            for i in range(n + 1):
                skipped = result.skip_flags[i - 1] if i else False
                rows.append([int(seed), i, n - i, skipped, *map(float, result.states[i, b])])
        _write_csv(out / "trajectory.csv", ["seed", "iteration", "t", "skipped"] + [f"x{k}" for k in range(dim)], rows)
    _write_json(
        out / "summary.json",
        {
            "command": "sample",
            "n_samples": len(seeds),
            "nfe_total": result.nfe_total,
            "skipped_iterations": sum(result.skip_flags),
            "simulated_time": result.simulated_time,
        },
    )
    return (
        f"sample: {len(seeds)} runs, nfe={result.nfe_total}, simulated={result.simulated_time:.4f}s/run, "
        f"wall={result.wall_time:.3f}s"
    )


def cmd_sweep(settings: cfg.Settings, out: Path) -> str:
    config = settings.run_config()
    n_seeds = settings.seeds("sweep")
    result = window_sweep(
        config,
        width_frac=settings["sweep.width"],
        n_positions=settings["sweep.positions"],
        n_seeds=n_seeds,
        reference_size=settings["sweep.reference_size"],
        n_projections=settings["sweep.projections"],
    )
    _write_csv(out / "sweep.csv", SWEEP_COLUMNS, ((r.start_frac, r.end_frac, r.nfe, r.endpoint_mse, r.sliced_w2) for r in result.rows))
    _write_json(
        out / "summary.json",
        {
            "command": "sweep",
            "n_seeds": n_seeds,
            "baseline_sliced_w2": result.baseline_sliced_w2,
            "positions": [
                {"start_frac": r.start_frac, "end_frac": r.end_frac, "nfe": r.nfe, "endpoint_mse": r.endpoint_mse, "sliced_w2": r.sliced_w2}
                for r in result.rows
            ],
        },
    )
    mses = ", ".join(f"{r.endpoint_mse:.3g}" for r in result.rows)
    return f"sweep: {len(result.rows)} windows x {n_seeds} seeds, endpoint_mse by position = [{mses}]"


def cmd_bench(settings: cfg.Settings, out: Path) -> str:
    config = settings.run_config()
    n_seeds = settings.seeds("bench")
    result = bench(
        config,
        fractions=settings["bench.fractions"],
        n_seeds=n_seeds,
        warmup=settings["bench.warmup"],
        reference_size=settings["bench.reference_size"],
        n_projections=settings["bench.projections"],
    )
    _write_csv(
        out / "bench.csv",
        BENCH_COLUMNS,
        ((r.f, r.f_effective, r.nfe, r.simulated_time, r.saving, r.predicted_saving, r.endpoint_mse, r.sliced_w2) for r in result.rows),
    )
    fit = result.fit
    _write_json(
        out / "summary.json",
        {
            "command": "bench",
            "n_seeds": n_seeds,
            "baseline_time": result.baseline_time,
            "cost_unet_fraction": result.cost_unet_fraction,
            "fitted_u": None if fit is None else fit.u,
            "fit_clamped": None if fit is None else fit.clamped,
            "fit_max_residual": None if fit is None else fit.max_residual,
            "rows": [
                {"f": r.f, "nfe": r.nfe, "simulated_time": r.simulated_time, "saving": r.saving}
                for r in result.rows
            ],
        },
    )
    savings = ", ".join(f"{r.f:g}:{100 * r.saving:.1f}%" for r in result.rows if r.f > 0)
    wall = result.wall_time_per_run.get(0.0, 0.0)
    return f"bench: baseline {result.baseline_time:.2f}s simulated, savings [{savings}], wall {1e3 * wall:.2f}ms/run"


def cmd_tune(settings: cfg.Settings, out: Path) -> str:
    config = settings.run_config()
    n_seeds = settings.seeds("tune")
    try:
        grid = scale_grid(settings["tune.scale_min"], settings["tune.scale_max"], settings["tune.scale_step"])
    except ValueError as exc:
        raise ConfigError(f"tune: {exc}", "tune.scale_step") from exc
    result = gs_tune(config, settings["tune.skip_last"], grid, n_seeds)
    _write_csv(out / "tune.csv", TUNE_COLUMNS, result.curve)
    _write_json(
        out / "summary.json",
        {
            "command": "tune",
            "n_seeds": n_seeds,
            "skip_last": result.skip_frac,
            "baseline_scale": result.baseline_scale,
            "best_scale": result.best_scale,
            "divergence_at_baseline_scale": result.divergence(result.baseline_scale) if result.baseline_scale in dict(result.curve) else None,
            "divergence_at_best_scale": result.divergence(result.best_scale),
        },
    )
    return f"tune: skip-last {result.skip_frac:g}, best scale {result.best_scale:g} (baseline {result.baseline_scale:g})"


COMMANDS = {"sample": cmd_sample, "sweep": cmd_sweep, "bench": cmd_bench, "tune": cmd_tune}


class _Parser(argparse.ArgumentParser):
    """Usage errors are configuration errors: exit 1, not argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="selguide", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in (*COMMANDS, "validate-config"):
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="INI config file")
        p.add_argument("--out", type=Path, help="output directory (default: runs/<command>)")
        p.add_argument("--seeds", type=int, help="number of seeded runs")
        p.add_argument("--seed", type=int, help="master seed; run k uses seed + k")
        p.add_argument("--skip-last", type=float, metavar="FRAC", help="skip the unconditional pass on the last FRAC of iterations")
        p.add_argument("--scale", type=float, help="guidance scale")
        p.add_argument("--sampler", choices=("ddpm", "ddim"))
        p.add_argument("--steps", type=int, help="number of denoising steps")
    return parser


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    out: dict[str, Any] = {}
    if getattr(args, "steps", None) is not None:
        out["schedule.num_steps"] = args.steps
    if getattr(args, "scale", None) is not None:
        out["guidance.scale"] = args.scale
    if getattr(args, "sampler", None) is not None:
        out["run.sampler"] = args.sampler
    if getattr(args, "seed", None) is not None:
        out["run.seed"] = args.seed
    if getattr(args, "seeds", None) is not None:
        out["run.seeds"] = args.seeds
    if getattr(args, "skip_last", None) is not None:
        out["guidance.skip_start_frac"] = 1.0 - args.skip_last
        out["guidance.skip_end_frac"] = 1.0
        if args.command == "tune":
            out["tune.skip_last"] = args.skip_last
    return out


def cli_main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = cfg.load(args.config, _overrides(args))
        if getattr(args, "skip_last", None) is not None and not 0.0 <= args.skip_last <= 1.0:
            raise ConfigError("--skip-last must lie in [0, 1]", "guidance.skip_start_frac")
        if args.command == "validate-config":
            settings.run_config()
            print(f"config ok: {args.config or '<defaults>'}")
            return 0
        settings.run_config()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    out = args.out or Path("runs") / args.command
    try:
        _prepare_out(out, settings)
        summary = COMMANDS[args.command](settings, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (SelguideError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(summary)
    return 0


def main() -> None:
    sys.exit(cli_main())
