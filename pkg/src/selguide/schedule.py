"""Discrete variance-preserving noise schedules.

Step indices run ``t = 1..N`` with ``t = N`` the noisiest state. Arrays in
:class:`ScheduleParams` are zero-based, so ``betas[t - 1]`` is beta_t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import InvalidScheduleConfig

ScheduleKind = Literal["linear", "cosine"]

COSINE_OFFSET = 0.008
COSINE_MAX_BETA = 0.999


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ScheduleParams:
    """Immutable beta / alpha / alpha-bar tables for an N-step schedule."""

    num_steps: int
    betas: np.ndarray
    alphas: np.ndarray
    alpha_bars: np.ndarray

    def alpha_bar(self, t: int) -> float:
        """Cumulative signal coefficient at step ``t``; ``alpha_bar(0) == 1``."""
        if t == 0:
            return 1.0
        self._check_step(t)
        return float(self.alpha_bars[t - 1])

    def beta(self, t: int) -> float:
        self._check_step(t)
        return float(self.betas[t - 1])

    def alpha(self, t: int) -> float:
        self._check_step(t)
        return float(self.alphas[t - 1])

    def _check_step(self, t: int) -> None:
        if not 1 <= t <= self.num_steps:
            raise IndexError(f"step {t} outside 1..{self.num_steps}")


def _linear_betas(num_steps: int, beta_min: float, beta_max: float) -> np.ndarray:
    if not (0.0 < beta_min <= beta_max < 1.0):
        raise InvalidScheduleConfig(
            f"linear schedule needs 0 < beta_min <= beta_max < 1, got ({beta_min}, {beta_max})"
        )
    return np.linspace(beta_min, beta_max, num_steps)


def _cosine_betas(num_steps: int) -> np.ndarray:
    def f(t):
        return math.cos((t / num_steps + COSINE_OFFSET) / (1 + COSINE_OFFSET) * math.pi / 2) ** 2

    f0 = f(0)
    ab = [f(t) / f0 for t in range(num_steps + 1)]
    betas = [min(1.0 - ab[t] / ab[t - 1], COSINE_MAX_BETA) for t in range(1, num_steps + 1)]
    return np.array(betas)


def from_betas(betas) -> ScheduleParams:
    """Build and validate a schedule from an explicit beta sequence."""
    betas = np.asarray(betas, dtype=np.float64)
    if betas.ndim != 1 or betas.size == 0:
        raise InvalidScheduleConfig("betas must be a non-empty 1-D sequence")
    if not np.all((betas > 0.0) & (betas < 1.0)):
        raise InvalidScheduleConfig("every beta must lie in (0, 1)")
    alphas = 1.0 - betas
    alpha_bars = np.cumprod(alphas)
    if np.any(np.diff(alpha_bars) >= 0.0) or not (0.0 < alpha_bars[-1] <= alpha_bars[0] < 1.0):
        raise InvalidScheduleConfig("alpha_bars must be strictly decreasing inside (0, 1)")
    return ScheduleParams(
        num_steps=int(betas.size),
        betas=_frozen(betas),
        alphas=_frozen(alphas),
        alpha_bars=_frozen(alpha_bars),
    )


def build_schedule(
    kind: ScheduleKind = "linear",
    num_steps: int = 50,
    beta_min: float = 1e-4,
    beta_max: float = 0.02,
) -> ScheduleParams:
    """Construct a linear or cosine schedule.

    Args:
        kind: ``"linear"`` spaces betas evenly from ``beta_min`` to ``beta_max``
            inclusive; ``"cosine"`` uses the squared-cosine alpha-bar profile
            (offset 0.008, betas clipped to 0.999) and ignores the bounds.
        num_steps: Number of diffusion steps N, at least 1.
        beta_min: First beta of a linear schedule.
        beta_max: Last beta of a linear schedule.

    Raises:
        InvalidScheduleConfig: On a bad kind, step count or beta bounds.
    """
    if isinstance(num_steps, bool) or not isinstance(num_steps, (int, np.integer)) or num_steps < 1:
        raise InvalidScheduleConfig(f"num_steps must be a positive integer, got {num_steps!r}")
    num_steps = int(num_steps)
    if kind == "linear":
        betas = _linear_betas(num_steps, beta_min, beta_max)
    elif kind == "cosine":
        betas = _cosine_betas(num_steps)
    else:
        raise InvalidScheduleConfig(f"unknown schedule kind {kind!r}")
    return from_betas(betas)
