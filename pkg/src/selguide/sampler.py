"""Reverse denoising loop with selective guidance.

Runs are vectorized over seeds: a batch of B seeds advances together, and row
``b`` of every array is bit-for-bit what a single run with ``seeds[b]`` would
produce. All runs in a batch share one skip pattern, so they also share NFE
and simulated time.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Literal, Sequence

import numpy as np

from . import rng
from .errors import DimensionMismatch, UnknownLabel
from .guidance import GuidanceSpec, guided_eps, in_skip_window, selective_eps
from .oracle import (
    CostModel,
    MixtureModel,
    VirtualClock,
    default_mixture,
    mixture_oracle,
    simulated_eval,
)
from .schedule import ScheduleParams, build_schedule

SamplerKind = Literal["ddpm", "ddim"]


def reverse_step_ddpm(x_t, eps_hat, t: int, schedule: ScheduleParams, noise) -> np.ndarray:
    """Ancestral DDPM update with ``sigma_t = sqrt(beta_t)`` and no noise at ``t = 1``."""
    x_t = np.asarray(x_t, dtype=np.float64)
    eps_hat = np.asarray(eps_hat, dtype=np.float64)
    if x_t.shape != eps_hat.shape:
        raise DimensionMismatch(f"x_t {x_t.shape} vs eps_hat {eps_hat.shape}")
    beta = schedule.beta(t)
    ab = schedule.alpha_bar(t)
    x_prev = (x_t - (beta / math.sqrt(1.0 - ab)) * eps_hat) / math.sqrt(schedule.alpha(t))
    if t > 1:
        noise = np.asarray(noise, dtype=np.float64)
        if noise.shape != x_t.shape:
            raise DimensionMismatch(f"noise {noise.shape} vs x_t {x_t.shape}")
        x_prev = x_prev + math.sqrt(beta) * noise
    return x_prev


def reverse_step_ddim(x_t, eps_hat, t: int, schedule: ScheduleParams) -> np.ndarray:
    """Deterministic DDIM (eta = 0) update, with ``alpha_bar_0 = 1``."""
    x_t = np.asarray(x_t, dtype=np.float64)
    eps_hat = np.asarray(eps_hat, dtype=np.float64)
    if x_t.shape != eps_hat.shape:
        raise DimensionMismatch(f"x_t {x_t.shape} vs eps_hat {eps_hat.shape}")
    ab = schedule.alpha_bar(t)
    ab_prev = schedule.alpha_bar(t - 1)
    x0 = (x_t - math.sqrt(1.0 - ab) * eps_hat) / math.sqrt(ab)
    return math.sqrt(ab_prev) * x0 + math.sqrt(1.0 - ab_prev) * eps_hat


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines a sampling run.

    ``condition=None`` runs plain unconditional sampling (one evaluation per
    iteration, guidance ignored); it exists for fidelity checks.
    """

    schedule: ScheduleParams = field(default_factory=build_schedule)
    guidance: GuidanceSpec = field(default_factory=GuidanceSpec)
    mixture: MixtureModel = field(default_factory=default_mixture)
    condition: int | None = 0
    sampler_kind: SamplerKind = "ddpm"
    seed: int = 0
    cost: CostModel = field(default_factory=CostModel)
    record_trajectory: bool = False

    def __post_init__(self):
        if self.condition is not None and self.condition not in self.mixture.labels:
            raise UnknownLabel(self.condition)
        if self.sampler_kind not in ("ddpm", "ddim"):
            raise ValueError(f"unknown sampler {self.sampler_kind!r}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def num_steps(self) -> int:
        return self.schedule.num_steps

    def replace(self, **changes) -> "RunConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class Trajectory:
    seed: int
    endpoint: np.ndarray
    skip_flags: tuple[bool, ...]
    nfe_total: int
    simulated_time: float
    wall_time: float
    states: np.ndarray | None = None  # x_N .. x_0, shape (N + 1, d)


@dataclass(frozen=True)
class BatchRun:
    """Result of running one config over many seeds."""

    seeds: np.ndarray
    endpoints: np.ndarray  # (B, d)
    skip_flags: tuple[bool, ...]
    nfe_total: int
    simulated_time: float  # per run
    wall_time: float  # whole batch, informational
    states: np.ndarray | None = None  # (N + 1, B, d)

    def trajectory(self, b: int) -> Trajectory:
        return Trajectory(
            seed=int(self.seeds[b]),
            endpoint=self.endpoints[b],
            skip_flags=self.skip_flags,
            nfe_total=self.nfe_total,
            simulated_time=self.simulated_time,
            wall_time=self.wall_time / len(self.seeds),
            states=None if self.states is None else self.states[:, b, :],
        )

    def pairs(self) -> list[tuple[int, np.ndarray]]:
        return [(int(s), e) for s, e in zip(self.seeds, self.endpoints)]


def run_batch(config: RunConfig, seeds: Sequence[int], selective: bool = True) -> BatchRun:
    """Run the reverse loop for every seed in ``seeds``.

    Iteration ``i`` visits step ``t = N - i``. Each iteration charges
    ``cost.iter_overhead`` plus ``cost.eval_cost`` per model evaluation to a
    per-run virtual clock.

    Args:
        config: Run configuration; ``config.seed`` is ignored in favour of ``seeds``.
        seeds: 64-bit seeds, one per run.
        selective: ``False`` forces the plain two-evaluation guidance path on
            every iteration regardless of the skip window.
    """
    seeds = np.asarray(seeds, dtype=np.uint64).reshape(-1)
    schedule, spec, cost = config.schedule, config.guidance, config.cost
    n, dim = schedule.num_steps, config.mixture.dim
    uncond = mixture_oracle(config.mixture, schedule)
    cond = mixture_oracle(config.mixture, schedule, config.condition) if config.condition is not None else None

    clock = VirtualClock()
    flags = []
    started = time.perf_counter()
    x = rng.normal_draws(seeds, n, rng.SLOT_INIT, dim)
    states = [x] if config.record_trajectory else None
    for i in range(n):
        t = n - i
        clock.charge(cost.iter_overhead)
        if cond is None:
            flags.append(False)
            eps = simulated_eval(uncond, cost, clock, x, t).epsilon
        elif selective:
            flags.append(in_skip_window(i, n, spec))
            eps = selective_eps(cond, uncond, x, t, i, n, spec, cost, clock).epsilon
        else:
            flags.append(False)
            eps = guided_eps(cond, uncond, x, t, spec.scale, cost, clock).epsilon
        if config.sampler_kind == "ddpm":
            noise = rng.normal_draws(seeds, t, rng.SLOT_STEP_NOISE, dim) if t > 1 else None
            x = reverse_step_ddpm(x, eps, t, schedule, noise)
        else:
            x = reverse_step_ddim(x, eps, t, schedule)
        if states is not None:
            states.append(x)
    wall = time.perf_counter() - started
    return BatchRun(
        seeds=seeds,
        endpoints=x,
        skip_flags=tuple(flags),
        nfe_total=clock.evaluations,
        simulated_time=clock.elapsed,
        wall_time=wall,
        states=None if states is None else np.stack(states),
    )


def run_sampling(config: RunConfig) -> Trajectory:
    """Single sampling run seeded by ``config.seed``."""
    return run_batch(config, [config.seed]).trajectory(0)


def run_seeds(master_seed: int, count: int) -> list[int]:
    """Run seeds ``master_seed + k`` for ``k < count``."""
    return [(master_seed + k) % 2**64 for k in range(count)]
