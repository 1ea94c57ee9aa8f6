"""Counter-based Gaussian draws (Philox4x32-10).

Every draw is a pure function of ``(seed, step, slot)``, so two runs with the
same seed see the same noise at a given step no matter what happened at the
steps before it. That is what lets a baseline run and a selectively-guided run
be compared draw for draw.
"""

from __future__ import annotations

import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint32(0x9E3779B9)
_W1 = np.uint32(0xBB67AE85)
_MASK32 = np.uint64(0xFFFFFFFF)
_ROUNDS = 10

SLOT_INIT = 0
SLOT_STEP_NOISE = 1


def philox4x32(counter, key) -> np.ndarray:
    """Philox4x32-10 block function.

    Args:
        counter: uint32 array of shape ``(..., 4)``.
        key: uint32 array broadcastable to shape ``(..., 2)``.

    Returns:
        uint32 array of shape ``(..., 4)``.
    """
    counter = np.asarray(counter, dtype=np.uint32)
    key = np.asarray(key, dtype=np.uint32)
    shape = np.broadcast_shapes(counter.shape[:-1], key.shape[:-1])
    c0, c1, c2, c3 = (np.broadcast_to(counter[..., i], shape).astype(np.uint32) for i in range(4))
    k0 = np.broadcast_to(key[..., 0], shape).astype(np.uint32)
    k1 = np.broadcast_to(key[..., 1], shape).astype(np.uint32)
    with np.errstate(over="ignore"):
        for r in range(_ROUNDS):
            if r:
                k0 = k0 + _W0
                k1 = k1 + _W1
            p0 = _M0 * c0.astype(np.uint64)
            p1 = _M1 * c2.astype(np.uint64)
            hi0 = (p0 >> np.uint64(32)).astype(np.uint32)
            lo0 = (p0 & _MASK32).astype(np.uint32)
            hi1 = (p1 >> np.uint64(32)).astype(np.uint32)
            lo1 = (p1 & _MASK32).astype(np.uint32)
            c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return np.stack([c0, c1, c2, c3], axis=-1)


def _seed_key(seeds) -> np.ndarray:
    seeds = np.asarray(seeds, dtype=np.uint64)
    return np.stack(
        [(seeds & _MASK32).astype(np.uint32), (seeds >> np.uint64(32)).astype(np.uint32)], axis=-1
    )


def _uniform53(hi: np.ndarray, lo: np.ndarray) -> np.ndarray:
    # 53-bit uniforms in the open interval (0, 1).
    k = (hi.astype(np.uint64) >> np.uint64(5)) * np.uint64(1 << 26) + (lo.astype(np.uint64) >> np.uint64(6))
    return (k.astype(np.float64) + 0.5) / float(1 << 53)


def normal_draws(seeds, step: int, slot: int, dim: int) -> np.ndarray:
    """Standard-normal draws keyed by position.

    Args:
        seeds: One 64-bit seed per run, shape ``(B,)`` (a scalar gives ``B = 1``).
        step: Diffusion step the draw belongs to.
        slot: Draw slot within the step (see ``SLOT_*``).
        dim: Number of normals per run.

    Returns:
        float64 array of shape ``(B, dim)``. Row ``b`` depends only on
        ``(seeds[b], step, slot)``.
    """
    seeds = np.atleast_1d(np.asarray(seeds, dtype=np.uint64))
    n_blocks = (dim + 1) // 2
    counter = np.zeros((seeds.size, n_blocks, 4), dtype=np.uint32)
    counter[..., 0] = np.arange(n_blocks, dtype=np.uint32)
    counter[..., 1] = np.uint32(slot)
    counter[..., 2] = np.uint32(step)
    bits = philox4x32(counter, _seed_key(seeds)[:, None, :])
    u1 = _uniform53(bits[..., 0], bits[..., 1])
    u2 = _uniform53(bits[..., 2], bits[..., 3])
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    z = np.stack([radius * np.cos(angle), radius * np.sin(angle)], axis=-1)
    return z.reshape(seeds.size, 2 * n_blocks)[:, :dim]
