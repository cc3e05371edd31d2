"""Finite-state system models and seeded trajectory samplers.

Every model presents the same minimal surface: a natural state space
{0, ..., n_states-1}, an invariant weight vector over it, and a deterministic
sampler ``sample_states(length, seed, burn_in)`` producing a stationary
trajectory of natural states.  ``sample_trajectory`` then reads the orbit
through a partition.

Composite models (skew products, relative products, the two-fiber triple)
index their states as flattened products.  Their samplers reuse the base
sampler with the same seed, so discarding fiber coordinates of a composite
trajectory reproduces the base trajectory bit for bit.

Fibers are discrete circle grids of m points; fiber maps are grid rotations
or general grid bijections.  Rotation angles for the circle-rotation base are
stored as exact rationals p/q (q capped at 2^31), so orbits are integer
arithmetic and never drift.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Tuple

import numpy as np

from .core import Alphabet, Partition, check_measure
from .errors import (
    DimensionError,
    ParameterError,
    ReturnTimeOverflowError,
    ValidationError,
)
from .seeds import derive_seed

MAX_DENOMINATOR = 2 ** 31
INDUCE_HORIZON_DEFAULT = 10_000_000
# role tags for deriving independent streams from one trajectory seed
ROLE_FIBER_U = 1
ROLE_FIBER_V = 2


@dataclass(frozen=True)
class TrajectorySample:
    """A partition-label trajectory together with its provenance."""

    labels: np.ndarray
    seed: int
    burn_in: int
    alphabet: Alphabet

    def __len__(self):
        return self.labels.size


class SystemModel:
    """Shared sampling plumbing; concrete models implement _sample_full."""

    n_states: int

    def state_weights(self) -> np.ndarray:
        raise NotImplementedError

    def _sample_full(self, total: int, seed: int) -> np.ndarray:
        raise NotImplementedError

    def sample_states(self, length: int, seed: int, burn_in: int = 0) -> np.ndarray:
        if length < 1:
            raise ParameterError("trajectory length must be >= 1")
        if burn_in < 0:
            raise ParameterError("burn_in must be >= 0")
        return self._sample_full(length + burn_in, int(seed))[burn_in:]


def sample_trajectory(system: SystemModel, partition: Partition, length: int,
                      seed: int, burn_in: int = 0) -> TrajectorySample:
    """Read a stationary orbit of ``system`` through ``partition``."""
    if partition.n_states != system.n_states:
        raise DimensionError(
            f"partition over {partition.n_states} states, system has {system.n_states}"
        )
    states = system.sample_states(length, seed, burn_in)
    return TrajectorySample(
        partition.labels[states], int(seed), burn_in, Alphabet(partition.cell_count)
    )


# ---------------------------------------------------------------------------
# base models
# ---------------------------------------------------------------------------

class BernoulliShift(SystemModel):
    """Independent draws from a fixed symbol law."""

    def __init__(self, p):
        self.p = check_measure(np.asarray(p, dtype=float))
        self.n_states = self.p.size
        self._cum = np.cumsum(self.p)

    def state_weights(self) -> np.ndarray:
        return self.p.copy()

    def _sample_full(self, total, seed):
        rng = np.random.default_rng(seed)
        # inverse-CDF keeps the draw count equal to the trajectory length
        u = rng.random(total)
        return np.searchsorted(self._cum, u, side="right").astype(np.int64)


class MarkovShift(SystemModel):
    """A stationary finite Markov chain.

    The row-stochastic transition matrix is validated; the stationary vector
    is computed from the leading left eigenvector unless supplied, in which
    case it is checked to be stationary within 1e-9.
    """

    def __init__(self, transition, stationary=None):
        P = np.asarray(transition, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise DimensionError("transition matrix must be square")
        if np.any(P < 0) or not np.allclose(P.sum(axis=1), 1.0, atol=1e-9):
            raise ValidationError("rows of the transition matrix must be probability vectors")
        self.transition = P
        self.n_states = P.shape[0]
        if stationary is None:
            stationary = self._leading_left_eigvec(P)
        pi = check_measure(np.asarray(stationary, dtype=float), self.n_states)
        if not np.allclose(pi @ P, pi, atol=1e-9):
            raise ValidationError("supplied vector is not stationary for the chain")
        self.stationary = pi
        self._cum_rows = np.cumsum(P, axis=1)
        self._cum_pi = np.cumsum(pi)

    @staticmethod
    def _leading_left_eigvec(P):
        vals, vecs = np.linalg.eig(P.T)
        k = int(np.argmin(np.abs(vals - 1.0)))
        v = np.real(vecs[:, k])
        v = np.abs(v)
        return v / v.sum()

    def state_weights(self) -> np.ndarray:
        return self.stationary.copy()

    def _sample_full(self, total, seed):
        rng = np.random.default_rng(seed)
        u = rng.random(total)
        out = np.empty(total, dtype=np.int64)
        s = int(np.searchsorted(self._cum_pi, u[0], side="right"))
        out[0] = s
        rows = self._cum_rows
        for t in range(1, total):
            s = int(np.searchsorted(rows[s], u[t], side="right"))
            out[t] = s
        return out


class RotationCoding(SystemModel):
    """Circle rotation read through a uniform grid of coding cells.

    The angle is snapped to a rational p/q with q <= 2^31 (continued-fraction
    truncation when a float is given), the orbit is tracked as an exact
    integer multiple of 1/q, and the natural states are the ``grid`` coding
    cells [j/g, (j+1)/g).  With grid=2 and an irrational-like angle the label
    sequence is the classical binary rotation coding.
    """

    def __init__(self, angle, grid: int = 2):
        if isinstance(angle, tuple):
            frac = Fraction(angle[0], angle[1])
        elif isinstance(angle, Fraction):
            frac = angle
        else:
            frac = Fraction(float(angle)).limit_denominator(MAX_DENOMINATOR)
        frac = frac % 1
        if frac.denominator > MAX_DENOMINATOR:
            raise ParameterError(f"angle denominator exceeds {MAX_DENOMINATOR}")
        self.p = int(frac.numerator)
        self.q = int(frac.denominator)
        if grid < 1 or grid > self.q:
            raise ParameterError("grid must be between 1 and the angle denominator")
        self.grid = int(grid)
        self.n_states = self.grid

    @property
    def angle(self) -> Fraction:
        return Fraction(self.p, self.q)

    def _cell_bounds(self) -> np.ndarray:
        """Fine-point index range starts for each coding cell (length grid+1)."""
        j = np.arange(self.grid + 1, dtype=np.int64)
        return -(-j * self.q // self.grid)  # ceil(j*q/g)

    def state_weights(self) -> np.ndarray:
        bounds = self._cell_bounds()
        return np.diff(bounds) / self.q

    def _fine_orbit(self, total, n0):
        t = np.arange(total, dtype=np.int64)
        return (n0 + t * self.p) % self.q

    def _labels_of_fine(self, fine):
        return fine * self.grid // self.q

    def _sample_full(self, total, seed):
        rng = np.random.default_rng(seed)
        n0 = int(rng.integers(self.q))
        return self._labels_of_fine(self._fine_orbit(total, n0)).astype(np.int64)


class FinitePermutation(SystemModel):
    """A permutation of n points with uniform invariant measure."""

    def __init__(self, perm):
        perm = np.asarray(perm, dtype=np.int64)
        n = perm.size
        if not np.array_equal(np.sort(perm), np.arange(n)):
            raise ValidationError("not a permutation")
        self.perm = perm
        self.n_states = n

    def state_weights(self) -> np.ndarray:
        return np.full(self.n_states, 1.0 / self.n_states)

    def inverse(self) -> np.ndarray:
        inv = np.empty(self.n_states, dtype=np.int64)
        inv[self.perm] = np.arange(self.n_states)
        return inv

    def _cycle_of(self, start: int) -> np.ndarray:
        cyc = [start]
        x = int(self.perm[start])
        while x != start:
            cyc.append(x)
            x = int(self.perm[x])
        return np.asarray(cyc, dtype=np.int64)

    def _sample_full(self, total, seed):
        rng = np.random.default_rng(seed)
        start = int(rng.integers(self.n_states))
        cyc = self._cycle_of(start)
        return cyc[np.arange(total, dtype=np.int64) % cyc.size]


# ---------------------------------------------------------------------------
# cocycles and skew products
# ---------------------------------------------------------------------------

@dataclass
class CocycleSpec:
    """A base-cell-driven family of fiber maps on the m-point grid.

    ``driver`` partitions the base natural states; each driver cell carries
    one fiber map.  Rotation cocycles store per-cell step counts; general
    cocycles store per-cell grid bijections (rows of ``perms``).
    """

    kind: str
    m: int
    driver: Partition
    steps: Optional[np.ndarray] = None
    perms: Optional[np.ndarray] = None
    seed: Optional[int] = field(default=None)

    def __post_init__(self):
        if self.kind not in ("constant", "cell_driven", "random"):
            raise ValidationError(f"unknown cocycle kind {self.kind!r}")
        if self.m < 1:
            raise ParameterError("fiber size must be >= 1")
        if (self.steps is None) == (self.perms is None):
            raise ValidationError("exactly one of steps/perms must be given")
        c = self.driver.cell_count
        if self.steps is not None:
            self.steps = np.asarray(self.steps, dtype=np.int64) % self.m
            if self.steps.shape != (c,):
                raise DimensionError("one rotation step count per driver cell")
        else:
            self.perms = np.asarray(self.perms, dtype=np.int64)
            if self.perms.shape != (c, self.m):
                raise DimensionError("one grid bijection per driver cell")
            for row in self.perms:
                if not np.array_equal(np.sort(row), np.arange(self.m)):
                    raise ValidationError("fiber map is not a bijection of the grid")

    @property
    def is_rotation(self) -> bool:
        return self.steps is not None

    def step_sequence(self, base_states: np.ndarray) -> np.ndarray:
        """Rotation increments along a base trajectory (rotation cocycles)."""
        if not self.is_rotation:
            raise ParameterError("not a rotation cocycle")
        return self.steps[self.driver.labels[base_states]]

    def fiber_path(self, base_states: np.ndarray, u0: int) -> np.ndarray:
        """Evolve one fiber point along a base trajectory."""
        total = base_states.size
        if self.is_rotation:
            inc = self.step_sequence(base_states)
            shift = np.concatenate([[0], np.cumsum(inc[:-1])])
            return (u0 + shift) % self.m
        cells = self.driver.labels[base_states]
        out = np.empty(total, dtype=np.int64)
        u = int(u0)
        for t in range(total):
            out[t] = u
            u = int(self.perms[cells[t], u])
        return out

    def fiber_paths_all(self, base_states: np.ndarray) -> np.ndarray:
        """Evolve the whole grid at once; shape (len(base_states), m).

        Row t maps the time-0 grid position to its time-t position, which is
        the composed fiber map over the first t steps.
        """
        total = base_states.size
        if self.is_rotation:
            inc = self.step_sequence(base_states)
            shift = np.concatenate([[0], np.cumsum(inc[:-1])])
            return (np.arange(self.m, dtype=np.int64)[None, :] + shift[:, None]) % self.m
        cells = self.driver.labels[base_states]
        out = np.empty((total, self.m), dtype=np.int64)
        cur = np.arange(self.m, dtype=np.int64)
        for t in range(total):
            out[t] = cur
            cur = self.perms[cells[t]][cur]
        return out


def constant_cocycle(n_base_states: int, m: int, steps: Optional[int] = None,
                     perm=None) -> CocycleSpec:
    driver = Partition.trivial(n_base_states)
    if steps is not None:
        return CocycleSpec("constant", m, driver, steps=np.asarray([steps]))
    return CocycleSpec("constant", m, driver, perms=np.asarray([perm]))


def frozen_cocycle(n_base_states: int, m: int) -> CocycleSpec:
    """The identity fiber map everywhere (zero rotation on every cell)."""
    return constant_cocycle(n_base_states, m, steps=0)


def cell_driven_cocycle(driver: Partition, m: int, steps=None, perms=None) -> CocycleSpec:
    if steps is not None:
        return CocycleSpec("cell_driven", m, driver, steps=np.asarray(steps))
    return CocycleSpec("cell_driven", m, driver, perms=np.asarray(perms))


def random_rotation_cocycle(driver: Partition, m: int, seed: int) -> CocycleSpec:
    """One uniform grid rotation per driver cell, drawn from the given seed."""
    rng = np.random.default_rng(derive_seed(seed, 0, role=7))
    steps = rng.integers(0, m, size=driver.cell_count)
    return CocycleSpec("random", m, driver, steps=steps, seed=int(seed))


def random_permutation_cocycle(driver: Partition, m: int, seed: int) -> CocycleSpec:
    """One uniform grid bijection per driver cell, drawn from the given seed.

    Unlike rotations these do not commute, so the composed fiber map along a
    typical base word spreads over far more of the bijection group.
    """
    rng = np.random.default_rng(derive_seed(seed, 0, role=7))
    perms = np.stack([rng.permutation(m) for _ in range(driver.cell_count)])
    return CocycleSpec("random", m, driver, perms=perms, seed=int(seed))


class SkewProduct(SystemModel):
    """Base system with a cocycle acting on an m-point fiber grid.

    Natural state = base_state * m + fiber_position.  The fiber map applied
    at time t is the one attached to the driver cell of the time-t base
    state, and the update runs fiber-first: (x, u) -> (Tx, S_x u).
    """

    def __init__(self, base: SystemModel, cocycle: CocycleSpec):
        if cocycle.driver.n_states != base.n_states:
            raise DimensionError(
                "cocycle driver partitions a different base state space"
            )
        self.base = base
        self.cocycle = cocycle
        self.m = cocycle.m
        self.n_states = base.n_states * cocycle.m

    def state_weights(self) -> np.ndarray:
        fiber = np.full(self.m, 1.0 / self.m)
        return np.outer(self.base.state_weights(), fiber).ravel()

    def split_states(self, states: np.ndarray):
        return states // self.m, states % self.m

    def _sample_full_components(self, total, seed):
        base_states = self.base._sample_full(total, seed)
        rng = np.random.default_rng(derive_seed(seed, 0, role=ROLE_FIBER_U))
        u0 = int(rng.integers(self.m))
        return base_states, self.cocycle.fiber_path(base_states, u0)

    def _sample_full(self, total, seed):
        base_states, u = self._sample_full_components(total, seed)
        return base_states * self.m + u

    def sample_components(self, length, seed, burn_in=0):
        b, u = self._sample_full_components(length + burn_in, int(seed))
        return b[burn_in:], u[burn_in:]


def skew_product(base: SystemModel, cocycle: CocycleSpec) -> SkewProduct:
    return SkewProduct(base, cocycle)


class RelIndepProduct(SystemModel):
    """Two independent fiber copies over one base orbit.

    Natural state = (base_state * m + u) * m + v.  The (base, u) marginal is
    sampled identically to the underlying skew product with the same seed;
    v starts from an independently derived stream and feels the same cocycle.
    """

    def __init__(self, extension: SkewProduct):
        self.extension = extension
        self.base = extension.base
        self.cocycle = extension.cocycle
        self.m = extension.m
        self.n_states = extension.n_states * extension.m

    def state_weights(self) -> np.ndarray:
        fiber = np.full(self.m, 1.0 / self.m)
        return np.outer(self.extension.state_weights(), fiber).ravel()

    def _sample_full_components(self, total, seed):
        base_states, u = self.extension._sample_full_components(total, seed)
        rng = np.random.default_rng(derive_seed(seed, 0, role=ROLE_FIBER_V))
        v0 = int(rng.integers(self.m))
        return base_states, u, self.cocycle.fiber_path(base_states, v0)

    def _sample_full(self, total, seed):
        b, u, v = self._sample_full_components(total, seed)
        return (b * self.m + u) * self.m + v

    def sample_components(self, length, seed, burn_in=0):
        b, u, v = self._sample_full_components(length + burn_in, int(seed))
        return b[burn_in:], u[burn_in:], v[burn_in:]


def relative_independent_product(extension: SkewProduct) -> RelIndepProduct:
    return RelIndepProduct(extension)


class TfTriple(SystemModel):
    """Base system driving one rotation applied to two fiber coordinates.

    A three-cell assignment over the base states gives the exponent
    f(x) in {0, +1, -1}; both grid coordinates advance by f(x) copies of a
    fixed grid rotation each step.  The two nonzero cells must carry equal
    base measure, below 1/4.
    """

    def __init__(self, base: SystemModel, plus_states, minus_states,
                 angle, m: int):
        self.base = base
        self.m = int(m)
        if self.m < 2:
            raise ParameterError("fiber grid needs at least 2 points")
        w = base.state_weights()
        plus = np.asarray(sorted(set(int(i) for i in plus_states)), dtype=np.int64)
        minus = np.asarray(sorted(set(int(i) for i in minus_states)), dtype=np.int64)
        if plus.size and minus.size and np.intersect1d(plus, minus).size:
            raise ValidationError("plus and minus cells overlap")
        mu_plus = float(w[plus].sum()) if plus.size else 0.0
        mu_minus = float(w[minus].sum()) if minus.size else 0.0
        if abs(mu_plus - mu_minus) > 1e-9:
            raise ValidationError(
                f"cells must have equal measure, got {mu_plus} vs {mu_minus}"
            )
        if mu_plus >= 0.25:
            raise ValidationError("nonzero cells must have measure < 1/4")
        self.rotation_steps = int(round(float(angle) * self.m)) % self.m
        f = np.zeros(base.n_states, dtype=np.int64)
        f[plus] = 1
        f[minus] = -1
        self.f_values = f
        self.cell_measure = mu_plus
        self.n_states = base.n_states * self.m * self.m

    def state_weights(self) -> np.ndarray:
        fiber = np.full(self.m * self.m, 1.0 / (self.m * self.m))
        return np.outer(self.base.state_weights(), fiber).ravel()

    def _sample_full_components(self, total, seed):
        base_states = self.base._sample_full(total, seed)
        rng1 = np.random.default_rng(derive_seed(seed, 0, role=ROLE_FIBER_U))
        rng2 = np.random.default_rng(derive_seed(seed, 0, role=ROLE_FIBER_V))
        z1 = int(rng1.integers(self.m))
        z2 = int(rng2.integers(self.m))
        inc = self.f_values[base_states] * self.rotation_steps
        shift = np.concatenate([[0], np.cumsum(inc[:-1])])
        return base_states, (z1 + shift) % self.m, (z2 + shift) % self.m

    def _sample_full(self, total, seed):
        b, z1, z2 = self._sample_full_components(total, seed)
        return (b * self.m + z1) * self.m + z2

    def sample_components(self, length, seed, burn_in=0):
        b, z1, z2 = self._sample_full_components(length + burn_in, int(seed))
        return b[burn_in:], z1[burn_in:], z2[burn_in:]


def t_f_triple(base, plus_states, minus_states, angle, m) -> TfTriple:
    return TfTriple(base, plus_states, minus_states, angle, m)


# ---------------------------------------------------------------------------
# induced (first-return) systems
# ---------------------------------------------------------------------------

class Induced(SystemModel):
    """First-return system on a subset of natural states.

    States are the members of the return set, relabelled 0..|A|-1, weighted
    by the base measure conditioned on A.  Sampling simulates the base orbit
    and reads off successive visits; if a stretch of ``horizon`` steps shows
    too few visits the sampler raises instead of silently truncating.
    """

    def __init__(self, base: SystemModel, return_set,
                 horizon: int = INDUCE_HORIZON_DEFAULT):
        self.base = base
        members = np.asarray(sorted(set(int(i) for i in return_set)), dtype=np.int64)
        if members.size == 0:
            raise ValidationError("return set is empty")
        if members.min() < 0 or members.max() >= base.n_states:
            raise ValidationError("return set member out of range")
        w = base.state_weights()
        if float(w[members].sum()) <= 0:
            raise ValidationError("return set has zero measure")
        self.members = members
        self.horizon = int(horizon)
        self.n_states = members.size
        self._relabel = -np.ones(base.n_states, dtype=np.int64)
        self._relabel[members] = np.arange(members.size)

    def state_weights(self) -> np.ndarray:
        w = self.base.state_weights()[self.members]
        return w / w.sum()

    def _visits(self, n_visits: int, seed: int):
        """Simulate until n_visits hits, doubling the window as needed."""
        w = self.base.state_weights()
        mu_a = float(w[self.members].sum())
        guess = max(int(n_visits / mu_a * 1.5) + 16, 64)
        while True:
            total = min(guess, self.horizon)
            orbit = self.base._sample_full(total, seed)
            hit = np.flatnonzero(self._relabel[orbit] >= 0)
            if hit.size >= n_visits:
                return orbit, hit
            if total >= self.horizon:
                raise ReturnTimeOverflowError(
                    self.horizon,
                    f"only {hit.size} of {n_visits} returns within horizon {self.horizon}",
                )
            guess *= 2

    def sample_returns(self, n_returns: int, seed: int):
        """(return-state, return-time) pairs for n_returns completed returns.

        Return times are gaps between consecutive visits; the opening
        partial gap from the stationary start is not a return and is
        dropped.
        """
        if n_returns < 1:
            raise ParameterError("need at least one return")
        orbit, hit = self._visits(n_returns + 1, seed)
        states = self._relabel[orbit[hit[1: n_returns + 1]]]
        times = np.diff(hit[: n_returns + 1])
        return states.astype(np.int64), times.astype(np.int64)

    def _sample_full(self, total, seed):
        orbit, hit = self._visits(total, seed)
        return self._relabel[orbit[hit[:total]]]


def induce(base: SystemModel, return_set, horizon: int = INDUCE_HORIZON_DEFAULT) -> Induced:
    return Induced(base, return_set, horizon)


# ---------------------------------------------------------------------------
# partitions over composite spaces, conditional expectation
# ---------------------------------------------------------------------------

def dyadic_fiber_partition(m: int, depth: int) -> Partition:
    """Split the m-point grid into 2^depth equal arcs."""
    cells = 2 ** depth
    if depth < 0 or m % cells != 0:
        raise ParameterError(f"grid of {m} points does not split into {cells} arcs")
    labels = np.arange(m, dtype=np.int64) * cells // m
    return Partition(labels, cells)


def product_partition(base_part: Partition, fiber_part: Partition) -> Partition:
    """Partition of a skew product from base and fiber partitions."""
    fc = fiber_part.cell_count
    labels = (base_part.labels[:, None] * fc + fiber_part.labels[None, :]).ravel()
    return Partition(labels, base_part.cell_count * fc)


def lifted_base_partition(base_part: Partition, m: int) -> Partition:
    return product_partition(base_part, Partition.trivial(m))


def generator_partition(system: SystemModel, fiber_depth: int = 1) -> Partition:
    """The natural observation partition of a model.

    Plain models: one cell per natural state.  Composites: base states
    crossed with dyadic fiber arcs of the given depth (applied to each fiber
    coordinate).
    """
    if isinstance(system, SkewProduct):
        base = generator_partition(system.base)
        return product_partition(base, dyadic_fiber_partition(system.m, fiber_depth))
    if isinstance(system, (RelIndepProduct, TfTriple)):
        if isinstance(system, RelIndepProduct):
            base = generator_partition(system.base)
        else:
            base = generator_partition(system.base)
        q = dyadic_fiber_partition(system.m, fiber_depth)
        return product_partition(product_partition(base, q), q)
    return Partition.identity(system.n_states)


def conditional_expectation(extension: SkewProduct, f, base_state: int) -> float:
    """Exact average of f(y, u) over the fiber grid above one base state.

    ``f`` may be a callable of (base_state, fiber_index) or an array of
    shape (n_base_states, m).
    """
    m = extension.m
    if callable(f):
        return float(sum(f(base_state, u) for u in range(m)) / m)
    arr = np.asarray(f, dtype=float)
    if arr.shape != (extension.base.n_states, m):
        raise DimensionError("value table must be (n_base_states, m)")
    return float(arr[base_state].mean())


# ---------------------------------------------------------------------------
# trajectory files and system specification files
# ---------------------------------------------------------------------------

def write_trajectory(path, sample: TrajectorySample):
    """Header ``alphabet=<k> length=<n>`` then one symbol per line."""
    with open(path, "w") as fh:
        fh.write(f"alphabet={sample.alphabet.size} length={sample.labels.size}\n")
        fh.write("\n".join(str(int(s)) for s in sample.labels))
        fh.write("\n")


def read_trajectory(path) -> TrajectorySample:
    with open(path) as fh:
        header = fh.readline().strip()
        fields = dict(item.split("=") for item in header.split())
        try:
            k = int(fields["alphabet"])
            n = int(fields["length"])
        except (KeyError, ValueError) as exc:
            raise ValidationError(f"bad trajectory header: {header!r}") from exc
        labels = np.array([int(line) for line in fh if line.strip()], dtype=np.int64)
    if labels.size != n:
        raise ValidationError(f"trajectory declares {n} symbols, found {labels.size}")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise ValidationError("trajectory symbol outside declared alphabet")
    return TrajectorySample(labels, seed=-1, burn_in=0, alphabet=Alphabet(k))


def read_cocycle_csv(path) -> dict:
    """CSV with columns cell,rotation_steps -> {cell: steps}."""
    table = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["cell", "rotation_steps"]:
            raise ValidationError("cocycle CSV must start with cell,rotation_steps")
        for row in reader:
            if not row:
                continue
            table[int(row[0])] = int(row[1])
    if not table:
        raise ValidationError("empty cocycle table")
    return table


def write_cocycle_csv(path, steps: Sequence[int]):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["cell", "rotation_steps"])
        for cell, s in enumerate(steps):
            writer.writerow([cell, int(s)])


def _load_toml(path) -> dict:
    try:
        import tomllib as toml_loader
    except ModuleNotFoundError:
        import tomli as toml_loader
    with open(path, "rb") as fh:
        return toml_loader.load(fh)


def _build_base(section: dict) -> SystemModel:
    variant = section.get("variant")
    if variant == "bernoulli":
        return BernoulliShift(section["p"])
    if variant == "markov":
        return MarkovShift(section["transition"], section.get("stationary"))
    if variant == "rotation":
        angle = section["angle"]
        if isinstance(angle, list):
            angle = (int(angle[0]), int(angle[1]))
        return RotationCoding(angle, grid=section.get("grid", 2))
    if variant == "permutation":
        return FinitePermutation(section["perm"])
    raise ValidationError(f"unknown base variant {variant!r}")


def _build_cocycle(section: dict, base: SystemModel, spec_dir) -> CocycleSpec:
    kind = section.get("kind")
    m = int(section["m"])
    driver = Partition.identity(base.n_states)
    if kind == "constant":
        return constant_cocycle(base.n_states, m, steps=int(section.get("steps", 0)))
    if kind == "frozen":
        return frozen_cocycle(base.n_states, m)
    if kind == "cell_driven":
        if "table" in section:
            import os

            table = read_cocycle_csv(os.path.join(spec_dir, section["table"]))
        elif "cells" in section:
            table = {int(c): int(s) for c, s in section["cells"]}
        else:
            raise ValidationError("cell_driven cocycle needs a table or cells")
        steps = [table.get(c, 0) for c in range(driver.cell_count)]
        return cell_driven_cocycle(driver, m, steps=steps)
    if kind == "random":
        return random_rotation_cocycle(driver, m, int(section["seed"]))
    if kind == "random_permutation":
        return random_permutation_cocycle(driver, m, int(section["seed"]))
    raise ValidationError(f"unknown cocycle kind {kind!r}")


def load_system(path) -> SystemModel:
    """Build a system model from a TOML specification file.

    Top-level ``[system]`` names the variant.  Plain variants carry their
    parameters inline; composite variants (skew, rel_product, induced,
    tf_triple) read their base from ``[base]`` plus a variant-specific
    section (``[cocycle]``, ``[induce]``, ``[tf]``).
    """
    import os

    doc = _load_toml(path)
    spec_dir = os.path.dirname(os.path.abspath(path))
    sys_sec = doc.get("system", {})
    variant = sys_sec.get("variant")
    if variant in ("bernoulli", "markov", "rotation", "permutation"):
        return _build_base(sys_sec)
    if variant in ("skew", "rel_product"):
        base = _build_base(doc["base"])
        ext = SkewProduct(base, _build_cocycle(doc["cocycle"], base, spec_dir))
        return ext if variant == "skew" else RelIndepProduct(ext)
    if variant == "induced":
        base = _build_base(doc["base"])
        ind = doc.get("induce", {})
        return Induced(base, ind["set"], int(ind.get("horizon", INDUCE_HORIZON_DEFAULT)))
    if variant == "tf_triple":
        base = _build_base(doc["base"])
        tf = doc["tf"]
        return TfTriple(base, tf["plus_cells"], tf["minus_cells"],
                        float(tf["angle"]), int(tf["m"]))
    raise ValidationError(f"unknown system variant {variant!r}")
