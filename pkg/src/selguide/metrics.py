"""Divergence between sample sets and the compute-savings model."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateFit, DimensionMismatch, EmptySet, SeedMismatch

# Published (fraction of iterations optimized, measured saving) rows for a
# 50-iteration guided pipeline, and the published per-image times behind them.
PUBLISHED_SAVINGS = ((0.2, 0.082), (0.3, 0.121), (0.4, 0.162), (0.5, 0.203))
PUBLISHED_TIMES = {0.0: 9.94, 0.2: 9.13, 0.3: 8.74, 0.4: 8.33, 0.5: 7.92}


@dataclass(frozen=True)
class DivergenceReport:
    endpoint_mse: float
    sliced_w2: float
    n_pairs: int
    n_points: int


def endpoint_mse(baseline: Iterable[tuple[int, np.ndarray]], variant: Iterable[tuple[int, np.ndarray]]) -> float:
    """Mean squared Euclidean distance between same-seed endpoints.

    Raises:
        SeedMismatch: The two sets do not cover the same seeds.
        DimensionMismatch: Paired endpoints differ in shape.
    """
    base = {int(s): np.asarray(e, dtype=np.float64) for s, e in baseline}
    var = {int(s): np.asarray(e, dtype=np.float64) for s, e in variant}
    if base.keys() != var.keys():
        raise SeedMismatch(f"seed sets differ: {sorted(base.keys() ^ var.keys())[:5]}")
    if not base:
        raise EmptySet("no endpoint pairs")
    total = 0.0
    for seed in sorted(base):
        a, b = base[seed], var[seed]
        if a.shape != b.shape:
            raise DimensionMismatch(f"seed {seed}: {a.shape} vs {b.shape}")
        total += float(np.sum((a - b) ** 2))
    return total / len(base)


def _projection_directions(dim: int, n_projections: int, seed: int) -> np.ndarray:
    g = np.random.default_rng(seed).standard_normal((n_projections, dim))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _w2_squared_1d(pa: np.ndarray, pb: np.ndarray) -> np.ndarray:
    """Squared 1-D W2 between empirical measures, column-wise over projections.

    ``pa`` is ``(n, P)`` and ``pb`` is ``(m, P)``, both sorted along axis 0.
    Uses the quantile coupling on the merged grid of CDF jumps, so unequal
    sample sizes are handled exactly.
    """
    n, m = len(pa), len(pb)
    if n == m:
        return np.mean((pa - pb) ** 2, axis=0)
    # CDF jump levels in units of 1 / (n m), kept integral for exactness.
    levels = np.union1d(np.arange(1, n + 1) * m, np.arange(1, m + 1) * n)
    widths = np.diff(levels, prepend=0) / (n * m)
    ia = (levels + m - 1) // m - 1
    ib = (levels + n - 1) // n - 1
    return np.sum(widths[:, None] * (pa[ia] - pb[ib]) ** 2, axis=0)


def sliced_w2(a, b, n_projections: int = 128, seed: int = 0) -> float:
    """Monte-Carlo sliced Wasserstein-2 distance between two point sets.

    Averages the squared 1-D W2 over ``n_projections`` random unit directions
    (drawn from ``seed``) and returns the square root.
    """
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise EmptySet("sliced_w2 needs two non-empty point sets")
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatch(f"dimension {a.shape[1]} vs {b.shape[1]}")
    if n_projections < 1:
        raise ValueError("n_projections must be at least 1")
    dirs = _projection_directions(a.shape[1], n_projections, seed)
    pa = np.sort(a @ dirs.T, axis=0)
    pb = np.sort(b @ dirs.T, axis=0)
    return math.sqrt(float(np.mean(_w2_squared_1d(pa, pb))))


def divergence_report(baseline_pairs, variant_pairs, reference, n_projections: int = 128, seed: int = 0) -> DivergenceReport:
    variant_points = np.array([e for _, e in variant_pairs])
    return DivergenceReport(
        endpoint_mse=endpoint_mse(baseline_pairs, variant_pairs),
        sliced_w2=sliced_w2(variant_points, reference, n_projections, seed),
        n_pairs=len(variant_points),
        n_points=len(reference),
    )


# --- savings model --------------------------------------------------------


def predicted_saving(f: float, u: float) -> float:
    """Fractional time saved by skipping the unconditional pass on a fraction ``f`` of iterations."""
    return f * u / 2.0


@dataclass(frozen=True)
class SavingsModel:
    unet_fraction: float

    @classmethod
    def from_published(cls) -> "SavingsModel":
        return cls(fit_unet_fraction(PUBLISHED_SAVINGS).u)

    def predicted_saving(self, f: float) -> float:
        return predicted_saving(f, self.unet_fraction)


@dataclass(frozen=True)
class UnetFractionFit:
    u: float
    raw_u: float
    clamped: bool
    max_residual: float


def fit_unet_fraction(table: Sequence[tuple[float, float]]) -> UnetFractionFit:
    """Least-squares fit of ``saving = f * u / 2`` through the origin.

    ``u = 2 * sum(f * s) / sum(f ** 2)``, clamped to ``[0, 1]``; ``clamped``
    flags when the data implied a value outside that range. Residuals are
    measured against the clamped fit.
    """
    rows = [(float(f), float(s)) for f, s in table]
    sff = math.fsum(f * f for f, _ in rows)
    if sff == 0.0:
        raise DegenerateFit("need at least one row with f > 0")
    raw = 2.0 * math.fsum(f * s for f, s in rows) / sff
    u = min(max(raw, 0.0), 1.0)
    resid = max(abs(s - predicted_saving(f, u)) for f, s in rows)
    return UnetFractionFit(u=u, raw_u=raw, clamped=u != raw, max_residual=resid)


# Least-squares UNet share over the published rows (about 0.811).
PUBLISHED_UNET_FRACTION = fit_unet_fraction(PUBLISHED_SAVINGS).u
