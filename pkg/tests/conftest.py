"""Shared fixtures: the three reference processes most tests measure."""

import numpy as np
import pytest

from ergolab.systems import (
    BernoulliShift,
    FinitePermutation,
    RotationCoding,
    generator_partition,
    sample_trajectory,
)

GOLDEN = 0.6180339887498949


@pytest.fixture(scope="session")
def iid_traj():
    """One million fair coin flips, the reference mixing process."""
    base = BernoulliShift([0.5, 0.5])
    return sample_trajectory(base, generator_partition(base), 1_000_000, seed=71)


@pytest.fixture(scope="session")
def sturmian_traj():
    """Golden-rotation coding, the reference zero-entropy process."""
    rot = RotationCoding(GOLDEN, grid=2)
    return sample_trajectory(rot, generator_partition(rot), 1_000_000, seed=72)


@pytest.fixture(scope="session")
def period2_traj():
    """The two-point swap, the reference periodic process."""
    swap = FinitePermutation([1, 0])
    return sample_trajectory(swap, generator_partition(swap), 100_000, seed=73)
