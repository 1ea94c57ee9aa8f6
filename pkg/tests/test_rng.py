import numpy as np
import pytest

from selguide import rng


# Known-answer vectors for Philox4x32-10 from the Random123 distribution.
@pytest.mark.parametrize(
    "counter, key, expected",
    [
        ([0, 0, 0, 0], [0, 0], [0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8]),
        ([0xFFFFFFFF] * 4, [0xFFFFFFFF] * 2, [0x408F276D, 0x41C83B0E, 0xA20BC7C6, 0x6D5451FD]),
        (
            [0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344],
            [0xA4093822, 0x299F31D0],
            [0xD16CFE09, 0x94FDCCEB, 0x5001E420, 0x24126EA1],
        ),
    ],
)
def test_philox_known_answers(counter, key, expected):
    assert rng.philox4x32(counter, key).tolist() == expected


def test_draws_depend_only_on_position():
    batch = rng.normal_draws([3, 99, 2**64 - 1], step=17, slot=1, dim=3)
    for row, seed in enumerate([3, 99, 2**64 - 1]):
        single = rng.normal_draws(seed, step=17, slot=1, dim=3)
        np.testing.assert_array_equal(batch[row], single[0])


def test_draws_differ_across_keys():
    base = rng.normal_draws(5, 10, 0, 4)
    assert not np.array_equal(base, rng.normal_draws(6, 10, 0, 4))
    assert not np.array_equal(base, rng.normal_draws(5, 11, 0, 4))
    assert not np.array_equal(base, rng.normal_draws(5, 10, 1, 4))
    # odd dimensions are a prefix of the next even one
    np.testing.assert_array_equal(rng.normal_draws(5, 10, 0, 3), base[:, :3])


def test_draws_are_standard_normal():
    z = rng.normal_draws(np.arange(50_000), step=7, slot=1, dim=2).ravel()
    assert abs(z.mean()) < 4 / np.sqrt(z.size)
    assert abs(z.var() - 1) < 4 * np.sqrt(2 / z.size)
    # tail mass beyond 2 sigma: 4.55%
    tail = np.mean(np.abs(z) > 2)
    assert abs(tail - 0.0455) < 4 * np.sqrt(0.0455 * 0.9545 / z.size)
