"""Classifier-free guidance and the selective (conditional-only) window.

Inside the skip window the unconditional evaluation is dropped and the
conditional prediction is used as-is, which equals guidance at scale 1 and
costs one model evaluation instead of two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidGuidance
from .oracle import CostModel, NoiseFn, NoisePrediction, VirtualClock, simulated_eval

# Fractions whose product with N lands this close to an integer are treated as
# exact, so "last 0.3 of 50" means 15 iterations despite 0.7 * 50 < 35 in binary.
_SNAP = 1e-9


@dataclass(frozen=True)
class GuidanceSpec:
    """Guidance scale plus the fractional skip window ``[skip_start_frac, skip_end_frac)``."""

    scale: float = 7.5
    skip_start_frac: float = 0.0
    skip_end_frac: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.scale) or self.scale < 0:
            raise InvalidGuidance(f"scale must be finite and non-negative, got {self.scale}")
        if not (0.0 <= self.skip_start_frac <= self.skip_end_frac <= 1.0):
            raise InvalidGuidance(
                f"need 0 <= skip_start_frac <= skip_end_frac <= 1, got "
                f"({self.skip_start_frac}, {self.skip_end_frac})"
            )

    @classmethod
    def skip_last(cls, frac: float, scale: float = 7.5) -> "GuidanceSpec":
        """Window covering the final ``frac`` of the denoising loop."""
        if not 0.0 <= frac <= 1.0:
            raise InvalidGuidance(f"skip fraction must lie in [0, 1], got {frac}")
        return cls(scale, 1.0 - frac, 1.0)

    def with_scale(self, scale: float) -> "GuidanceSpec":
        return GuidanceSpec(scale, self.skip_start_frac, self.skip_end_frac)


def _scaled(frac: float, n: int) -> float:
    v = frac * n
    r = round(v)
    return float(r) if abs(v - r) <= _SNAP * max(1, n) else v


def window_bounds(spec: GuidanceSpec, total_iters: int) -> tuple[int, int]:
    """Iteration-index bounds ``[lo, hi)`` of the skip window.

    The start rounds up and the end rounds down, so the window holds exactly
    the iterations whose share ``[i/N, (i+1)/N)`` of the loop falls inside the
    fractional window. "Last f" then skips ``floor(f * N)`` iterations and
    windows of equal width hold equal iteration counts.
    """
    lo = math.ceil(_scaled(spec.skip_start_frac, total_iters))
    hi = math.floor(_scaled(spec.skip_end_frac, total_iters))
    return lo, max(lo, hi)


def in_skip_window(iter_index: int, total_iters: int, spec: GuidanceSpec) -> bool:
    if not 0 <= iter_index < total_iters:
        raise IndexError(f"iteration {iter_index} outside 0..{total_iters - 1}")
    lo, hi = window_bounds(spec, total_iters)
    return lo <= iter_index < hi


def skipped_count(spec: GuidanceSpec, total_iters: int) -> int:
    lo, hi = window_bounds(spec, total_iters)
    return hi - lo


def total_nfe(spec: GuidanceSpec, total_iters: int) -> int:
    return 2 * total_iters - skipped_count(spec, total_iters)


def cfg_combine(eps_uncond, eps_cond, scale: float) -> np.ndarray:
    """``eps_uncond + scale * (eps_cond - eps_uncond)``, component-wise."""
    eps_uncond = np.asarray(eps_uncond, dtype=np.float64)
    eps_cond = np.asarray(eps_cond, dtype=np.float64)
    if eps_uncond.shape != eps_cond.shape:
        raise DimensionMismatch(f"shape {eps_uncond.shape} vs {eps_cond.shape}")
    if not math.isfinite(scale):
        raise InvalidGuidance("scale must be finite")
    return eps_uncond + scale * (eps_cond - eps_uncond)


def _evaluate(fn: NoiseFn, x, t, cost: CostModel | None, clock: VirtualClock | None) -> np.ndarray:
    if clock is None:
        return np.asarray(fn(x, t), dtype=np.float64)
    return simulated_eval(fn, cost or CostModel(), clock, x, t).epsilon


def guided_eps(
    cond_eval: NoiseFn,
    uncond_eval: NoiseFn,
    x,
    t: int,
    scale: float,
    cost: CostModel | None = None,
    clock: VirtualClock | None = None,
) -> NoisePrediction:
    """Plain classifier-free guidance: always two evaluations."""
    before = clock.elapsed if clock is not None else 0.0
    eps_u = _evaluate(uncond_eval, x, t, cost, clock)
    eps_c = _evaluate(cond_eval, x, t, cost, clock)
    spent = clock.elapsed - before if clock is not None else 0.0
    return NoisePrediction(cfg_combine(eps_u, eps_c, scale), 2, spent)


def selective_eps(
    cond_eval: NoiseFn,
    uncond_eval: NoiseFn,
    x,
    t: int,
    iter_index: int,
    total_iters: int,
    spec: GuidanceSpec,
    cost: CostModel | None = None,
    clock: VirtualClock | None = None,
) -> NoisePrediction:
    """Guided noise prediction that skips the unconditional branch inside the window.

    When ``clock`` is given, each model evaluation is charged to it at
    ``cost.eval_cost`` and reported in ``simulated_cost``.
    """
    if in_skip_window(iter_index, total_iters, spec):
        before = clock.elapsed if clock is not None else 0.0
        eps_c = _evaluate(cond_eval, x, t, cost, clock)
        spent = clock.elapsed - before if clock is not None else 0.0
        return NoisePrediction(eps_c, 1, spent)
    return guided_eps(cond_eval, uncond_eval, x, t, spec.scale, cost, clock)
