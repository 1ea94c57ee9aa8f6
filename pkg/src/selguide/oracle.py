"""Exact noise predictions for a labeled diagonal Gaussian mixture.

Under the VP forward process ``x_t = sqrt(ab) x_0 + sqrt(1 - ab) eps`` each
mixture component stays Gaussian, with mean ``sqrt(ab) mean_k`` and variance
``ab var_k + 1 - ab``. The minimum-MSE noise prediction is therefore
``-sqrt(1 - ab) * grad log p_t(x)``, available in closed form. This stands in
for a trained conditional / unconditional denoiser.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionMismatch, InvalidMixture, UnknownLabel
from .schedule import ScheduleParams

NoiseFn = Callable[[np.ndarray, int], np.ndarray]


@dataclass(frozen=True)
class Component:
    weight: float
    mean: tuple[float, ...]
    var: tuple[float, ...]
    label: int


@dataclass(frozen=True)
class MixtureModel:
    """Labeled Gaussian mixture with diagonal covariances."""

    dim: int
    components: tuple[Component, ...]

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidMixture("dim must be positive")
        if not self.components:
            raise InvalidMixture("mixture needs at least one component")
        for c in self.components:
            if len(c.mean) != self.dim or len(c.var) != self.dim:
                raise DimensionMismatch(f"component mean/var must have length {self.dim}")
            if not c.weight > 0:
                raise InvalidMixture("component weights must be positive")
            if not all(v > 0 for v in c.var):
                raise InvalidMixture("component variances must be positive")
            if c.label < 0:
                raise InvalidMixture("labels must be non-negative integers")
        total = math.fsum(c.weight for c in self.components)
        if abs(total - 1.0) > 1e-9:
            raise InvalidMixture(f"weights sum to {total!r}, expected 1")

    @property
    def labels(self) -> tuple[int, ...]:
        return tuple(sorted({c.label for c in self.components}))

    def arrays(self, condition: int | None = None):
        """Return ``(log_weights, means, vars)`` for the (optionally restricted) mixture."""
        comps = self.components
        if condition is not None:
            comps = [c for c in comps if c.label == condition]
            if not comps:
                raise UnknownLabel(condition)
        w = np.array([c.weight for c in comps])
        w = w / w.sum()
        means = np.array([c.mean for c in comps], dtype=np.float64)
        var = np.array([c.var for c in comps], dtype=np.float64)
        return np.log(w), means, var

    def restrict(self, condition: int) -> "MixtureModel":
        comps = [c for c in self.components if c.label == condition]
        if not comps:
            raise UnknownLabel(condition)
        total = math.fsum(c.weight for c in comps)
        return MixtureModel(
            self.dim,
            tuple(Component(c.weight / total, c.mean, c.var, c.label) for c in comps),
        )

    def sample(self, n: int, rng: np.random.Generator, condition: int | None = None) -> np.ndarray:
        """Draw ``n`` points directly from the (optionally restricted) mixture."""
        log_w, means, var = self.arrays(condition)
        k = rng.choice(len(means), size=n, p=np.exp(log_w))
        return means[k] + np.sqrt(var[k]) * rng.standard_normal((n, self.dim))

    def to_dict(self) -> dict:
        return {
            "components": [
                {"weight": c.weight, "mean": list(c.mean), "var": list(c.var), "label": c.label}
                for c in self.components
            ]
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MixtureModel":
        try:
            raw = data["components"]
            comps = tuple(
                Component(
                    weight=float(c["weight"]),
                    mean=tuple(float(v) for v in c["mean"]),
                    var=tuple(float(v) for v in c["var"]),
                    label=int(c["label"]),
                )
                for c in raw
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidMixture(f"malformed mixture definition: {exc}") from exc
        if not comps:
            raise InvalidMixture("mixture needs at least one component")
        return cls(dim=len(comps[0].mean), components=comps)

    @classmethod
    def from_file(cls, path: str | Path) -> "MixtureModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def default_mixture(radius: float = 4.0) -> MixtureModel:
    """Four unit-variance components on a circle; label 0 on the upper half, label 1 below."""
    comps = []
    for k in range(4):
        angle = math.pi / 4 + k * math.pi / 2
        comps.append(
            Component(0.25, (radius * math.cos(angle), radius * math.sin(angle)), (1.0, 1.0), k // 2)
        )
    return MixtureModel(2, tuple(comps))


def _check_x(model: MixtureModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0 or x.shape[-1] != model.dim:
        raise DimensionMismatch(f"expected trailing dimension {model.dim}, got shape {x.shape}")
    return x


def epsilon_at(model: MixtureModel, x, alpha_bar: float, condition: int | None = None) -> np.ndarray:
    """Exact noise prediction at an explicit noise level ``alpha_bar``.

    ``x`` may be a single point ``(d,)`` or a batch ``(B, d)``.
    """
    x = _check_x(model, x)
    log_w, means, var = model.arrays(condition)
    m_t = math.sqrt(alpha_bar) * means
    v_t = alpha_bar * var + (1.0 - alpha_bar)
    diff = x[..., None, :] - m_t
    log_comp = log_w - 0.5 * np.sum(diff * diff / v_t + np.log(2.0 * np.pi * v_t), axis=-1)
    log_comp = log_comp - np.max(log_comp, axis=-1, keepdims=True)
    resp = np.exp(log_comp)
    resp = resp / np.sum(resp, axis=-1, keepdims=True)
    score = -np.sum(resp[..., None] * (diff / v_t), axis=-2)
    return -math.sqrt(1.0 - alpha_bar) * score


def gm_epsilon(
    model: MixtureModel,
    x,
    t: int,
    schedule: ScheduleParams,
    condition: int | None = None,
) -> np.ndarray:
    """Exact conditional (``condition`` given) or unconditional noise prediction at step ``t``.

    Raises:
        UnknownLabel: ``condition`` matches no component.
        DimensionMismatch: ``x`` has the wrong trailing dimension.
    """
    return epsilon_at(model, x, schedule.alpha_bar(t), condition)


def log_marginal_density(model: MixtureModel, x, alpha_bar: float, condition: int | None = None):
    """``log p_t(x)`` evaluated directly from the component densities."""
    x = _check_x(model, x)
    log_w, means, var = model.arrays(condition)
    v_t = alpha_bar * var + (1.0 - alpha_bar)
    diff = x[..., None, :] - math.sqrt(alpha_bar) * means
    log_comp = log_w - 0.5 * np.sum(diff * diff / v_t + np.log(2.0 * np.pi * v_t), axis=-1)
    top = np.max(log_comp, axis=-1)
    return top + np.log(np.sum(np.exp(log_comp - top[..., None]), axis=-1))


def mixture_oracle(model: MixtureModel, schedule: ScheduleParams, condition: int | None = None) -> NoiseFn:
    """Bind ``gm_epsilon`` into a ``(x, t) -> eps`` noise-prediction function."""
    model.arrays(condition)  # fail fast on unknown labels

    def predict(x, t):
        return gm_epsilon(model, x, t, schedule, condition)

    return predict


# --- simulated cost -------------------------------------------------------


@dataclass(frozen=True)
class CostModel:
    """Simulated seconds charged per noise-model evaluation and per loop iteration."""

    eval_cost: float = 0.0811
    iter_overhead: float = 0.0366

    def __post_init__(self):
        if not (self.eval_cost >= 0 and self.iter_overhead >= 0):
            raise ValueError("eval_cost and iter_overhead must be non-negative")

    @property
    def unet_fraction(self) -> float:
        """Share of a full guided iteration spent in the two model evaluations."""
        full = 2.0 * self.eval_cost + self.iter_overhead
        return 0.0 if full == 0 else 2.0 * self.eval_cost / full

    @classmethod
    def calibrated(cls, baseline_time: float, unet_fraction: float, num_steps: int) -> "CostModel":
        """Solve ``N (2e + o) = baseline_time`` and ``2e / (2e + o) = unet_fraction``."""
        per_iter = baseline_time / num_steps
        return cls(eval_cost=unet_fraction * per_iter / 2.0, iter_overhead=(1.0 - unet_fraction) * per_iter)


class VirtualClock:
    """Deterministic accumulator of simulated seconds. One per run."""

    def __init__(self):
        self.elapsed = 0.0
        self.evaluations = 0

    def charge(self, seconds: float, evaluations: int = 0) -> None:
        self.elapsed += seconds
        self.evaluations += evaluations


@dataclass(frozen=True)
class NoisePrediction:
    epsilon: np.ndarray
    nfe: int
    simulated_cost: float


def simulated_eval(
    inner: Callable[..., np.ndarray],
    cost: CostModel,
    clock: VirtualClock,
    *args,
    n_evals: int = 1,
) -> NoisePrediction:
    """Call ``inner(*args)`` and charge ``n_evals`` model evaluations to ``clock``.

    ``n_evals`` is 2 when ``inner`` is a batched conditional + unconditional
    pair. The returned epsilon is exactly what ``inner`` produced.
    """
    eps = inner(*args)
    seconds = cost.eval_cost * n_evals
    clock.charge(seconds, n_evals)
    return NoisePrediction(eps, n_evals, seconds)
