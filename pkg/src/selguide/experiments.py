"""Window-placement sweep, savings benchmark and guidance-scale retuning.

Each experiment is a pure function of its config and seeds: seeds are
``base.seed + k`` and reference draws come from a generator keyed on
``base.seed``, so reruns reproduce every number exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateFit, InvalidSweep
from .guidance import GuidanceSpec, skipped_count
from .metrics import UnetFractionFit, endpoint_mse, fit_unet_fraction, predicted_saving, sliced_w2
from .sampler import BatchRun, RunConfig, run_batch, run_seeds

_REFERENCE_STREAM = 0x5E1EC7


def reference_set(base: RunConfig, size: int) -> np.ndarray:
    """Direct draws from the conditioned components (or the whole mixture)."""
    gen = np.random.default_rng([base.seed, _REFERENCE_STREAM])
    return base.mixture.sample(size, gen, base.condition)


@dataclass(frozen=True)
class SweepRow:
    start_frac: float
    end_frac: float
    nfe: int
    endpoint_mse: float
    sliced_w2: float


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...]
    n_seeds: int
    baseline_sliced_w2: float

    @property
    def window_positions(self) -> list[tuple[float, float]]:
        return [(r.start_frac, r.end_frac) for r in self.rows]


def sweep_windows(num_steps: int, width_frac: float, n_positions: int) -> list[tuple[float, float]]:
    """Equal-length windows spread evenly from the start to the end of the loop.

    Placement is done in iteration-index space so every window holds exactly
    ``floor(width_frac * N)`` iterations.
    """
    if n_positions < 1:
        raise InvalidSweep("n_positions must be at least 1")
    if not 0.0 <= width_frac <= 1.0 or width_frac * n_positions > 1.0 + 1e-9:
        raise InvalidSweep(f"{n_positions} windows of width {width_frac} do not fit in [0, 1]")
    count = skipped_count(GuidanceSpec.skip_last(width_frac), num_steps)
    free = num_steps - count
    windows = []
    for k in range(n_positions):
        start = 0 if n_positions == 1 else round(k * free / (n_positions - 1))
        windows.append((start / num_steps, (start + count) / num_steps))
    return windows


def window_sweep(
    base: RunConfig,
    width_frac: float = 0.25,
    n_positions: int = 4,
    n_seeds: int = 200,
    reference_size: int = 4000,
    n_projections: int = 128,
) -> SweepResult:
    """Compare same-seed runs with the skip window at different loop positions.

    The baseline is ``base`` with no skip window; every position uses the same
    guidance scale and the same number of skipped iterations.
    """
    seeds = run_seeds(base.seed, n_seeds)
    scale = base.guidance.scale
    baseline = run_batch(base.replace(guidance=GuidanceSpec(scale)), seeds)
    reference = reference_set(base, reference_size)
    rows = []
    for start, end in sweep_windows(base.num_steps, width_frac, n_positions):
        run = run_batch(base.replace(guidance=GuidanceSpec(scale, start, end)), seeds)
        rows.append(
            SweepRow(
                start_frac=start,
                end_frac=end,
                nfe=run.nfe_total,
                endpoint_mse=endpoint_mse(baseline.pairs(), run.pairs()),
                sliced_w2=sliced_w2(run.endpoints, reference, n_projections, base.seed),
            )
        )
    return SweepResult(
        rows=tuple(rows),
        n_seeds=n_seeds,
        baseline_sliced_w2=sliced_w2(baseline.endpoints, reference, n_projections, base.seed),
    )


@dataclass(frozen=True)
class BenchRow:
    f: float
    f_effective: float
    nfe: int
    simulated_time: float
    saving: float
    predicted_saving: float
    endpoint_mse: float
    sliced_w2: float


@dataclass(frozen=True)
class BenchResult:
    rows: tuple[BenchRow, ...]
    baseline_time: float
    cost_unet_fraction: float
    fit: UnetFractionFit | None
    wall_time_per_run: dict[float, float]  # informational only, never serialized

    @property
    def fitted_u(self) -> float | None:
        return None if self.fit is None else self.fit.u


def bench(
    base: RunConfig,
    fractions: Sequence[float] = (0.0, 0.2, 0.3, 0.4, 0.5),
    n_seeds: int = 50,
    warmup: int = 10,
    reference_size: int = 4000,
    n_projections: int = 128,
) -> BenchResult:
    """Mean simulated time per image when skipping the last ``f`` of the loop.

    ``warmup`` runs are executed (and discarded) before the timed batches; they
    only matter for the informational wall-clock figures.
    """
    fractions = [float(f) for f in fractions]
    if 0.0 not in fractions:
        raise ValueError("fractions must include 0 for the baseline row")
    if any(not 0.0 <= f <= 1.0 for f in fractions):
        raise ValueError("fractions must lie in [0, 1]")
    n = base.num_steps
    seeds = run_seeds(base.seed, n_seeds)
    if warmup > 0:
        run_batch(base, run_seeds(base.seed + n_seeds, warmup))
    reference = reference_set(base, reference_size)

    runs: dict[float, BatchRun] = {}
    for f in sorted(set(fractions)):
        runs[f] = run_batch(base.replace(guidance=GuidanceSpec.skip_last(f, base.guidance.scale)), seeds)
    baseline = runs[0.0]
    u_cost = base.cost.unet_fraction

    rows = []
    for f, run in runs.items():
        # Every run in a batch shares one skip pattern, so the per-run time is the mean.
        mean_time = run.simulated_time
        f_eff = skipped_count(GuidanceSpec.skip_last(f), n) / n
        rows.append(
            BenchRow(
                f=f,
                f_effective=f_eff,
                nfe=run.nfe_total,
                simulated_time=mean_time,
                saving=1.0 - mean_time / baseline.simulated_time if baseline.simulated_time else 0.0,
                predicted_saving=predicted_saving(f_eff, u_cost),
                endpoint_mse=endpoint_mse(baseline.pairs(), run.pairs()),
                sliced_w2=sliced_w2(run.endpoints, reference, n_projections, base.seed),
            )
        )
    try:
        fit = fit_unet_fraction([(r.f_effective, r.saving) for r in rows])
    except DegenerateFit:
        fit = None
    return BenchResult(
        rows=tuple(rows),
        baseline_time=baseline.simulated_time,
        cost_unet_fraction=u_cost,
        fit=fit,
        wall_time_per_run={f: r.wall_time / len(seeds) for f, r in runs.items()},
    )


@dataclass(frozen=True)
class TuneResult:
    best_scale: float
    curve: tuple[tuple[float, float], ...]  # (scale, mean endpoint MSE)
    baseline_scale: float
    skip_frac: float

    def divergence(self, scale: float) -> float:
        return dict(self.curve)[scale]


def scale_grid(start: float, stop: float, step: float) -> list[float]:
    """Inclusive arithmetic grid, rounded to 10 decimals so 7.5 + k * 0.1 hits its labels."""
    if step <= 0 or stop < start:
        raise ValueError("need step > 0 and stop >= start")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + k * step, 10) for k in range(count)]


def gs_tune(base: RunConfig, f: float, scales: Sequence[float], n_seeds: int = 200) -> TuneResult:
    """Find the guidance scale that best restores the unskipped baseline.

    The baseline runs at ``base.guidance.scale`` with no skip window. Each
    candidate scale is applied to the non-skipped iterations of a run that
    skips the last ``f`` of the loop. Ties go to the smaller scale.
    """
    if not scales:
        raise ValueError("scale grid must be non-empty")
    if not 0.0 < f <= 1.0:
        raise ValueError("skip fraction must lie in (0, 1]")
    seeds = run_seeds(base.seed, n_seeds)
    baseline_scale = base.guidance.scale
    baseline = run_batch(base.replace(guidance=GuidanceSpec(baseline_scale)), seeds).pairs()
    curve = []
    for s in sorted(float(s) for s in scales):
        run = run_batch(base.replace(guidance=GuidanceSpec.skip_last(f, s)), seeds)
        curve.append((s, endpoint_mse(baseline, run.pairs())))
    best_scale, best = curve[0]
    for s, d in curve[1:]:
        if d < best:
            best_scale, best = s, d
    return TuneResult(best_scale, tuple(curve), baseline_scale, f)
