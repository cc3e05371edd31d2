"""Finite measure-algebra primitives: alphabets, words, partitions, and
empirical word distributions.

Everything here lives on a finite state space {0, ..., n_states-1} carrying a
probability vector, or on finite words over an integer alphabet.  These are
the ground types the samplers, metrics and diagnostics build on.

Conventions
-----------
* A measure is a 1-d nonnegative numpy array summing to 1 (checked to 1e-9).
* A set of states may be passed as an iterable of indices or a boolean mask.
* Words are tuples of ints in range(alphabet.size); empirical distributions
  keep their integer window counts so weights sum to 1 in exact arithmetic.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np

from .errors import DimensionError, InsufficientDataError, ValidationError

MEASURE_ATOL = 1e-9
WEIGHT_SUM_ATOL = 1e-12


@dataclass(frozen=True)
class Alphabet:
    """A finite symbol set {0, ..., size-1}."""

    size: int

    def __post_init__(self):
        if self.size < 1:
            raise ValidationError(f"alphabet size must be >= 1, got {self.size}")

    def __contains__(self, symbol) -> bool:
        return 0 <= int(symbol) < self.size


@dataclass(frozen=True)
class Word:
    """A finite word over an integer alphabet.

    Symbols are stored as a tuple so words are hashable and usable as
    distribution keys.  Construction validates every symbol against the
    alphabet.
    """

    symbols: Tuple[int, ...]
    alphabet: Alphabet

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(int(s) for s in self.symbols))
        for s in self.symbols:
            if s not in self.alphabet:
                raise ValidationError(
                    f"symbol {s} outside alphabet of size {self.alphabet.size}"
                )

    @classmethod
    def of(cls, symbols: Sequence[int], alphabet_size: Optional[int] = None) -> "Word":
        syms = tuple(int(s) for s in symbols)
        if alphabet_size is None:
            alphabet_size = (max(syms) + 1) if syms else 1
        return cls(syms, Alphabet(alphabet_size))

    def __len__(self) -> int:
        return len(self.symbols)

    def to_array(self) -> np.ndarray:
        return np.asarray(self.symbols, dtype=np.int64)


def as_mask(states, n_states: int) -> np.ndarray:
    """Normalize a state-set argument (indices or boolean mask) to a mask."""
    arr = np.asarray(states)
    if arr.dtype == bool:
        if arr.shape != (n_states,):
            raise DimensionError(
                f"boolean mask has shape {arr.shape}, expected ({n_states},)"
            )
        return arr.copy()
    mask = np.zeros(n_states, dtype=bool)
    if arr.size:
        idx = arr.astype(np.int64).ravel()
        if idx.min() < 0 or idx.max() >= n_states:
            raise ValidationError("state index out of range")
        mask[idx] = True
    return mask


def check_measure(mu, n_states: Optional[int] = None) -> np.ndarray:
    mu = np.asarray(mu, dtype=float)
    if mu.ndim != 1:
        raise DimensionError("measure must be a 1-d weight vector")
    if n_states is not None and mu.shape[0] != n_states:
        raise DimensionError(f"measure has {mu.shape[0]} weights, expected {n_states}")
    if np.any(mu < -MEASURE_ATOL):
        raise ValidationError("measure has a negative weight")
    if abs(mu.sum() - 1.0) > MEASURE_ATOL:
        raise ValidationError(f"measure weights sum to {mu.sum()}, expected 1")
    return mu


@dataclass
class Partition:
    """A labelled partition of {0, ..., n_states-1}.

    ``labels[i]`` is the cell of state i; cells are 0..cell_count-1 and every
    cell is nonempty.
    """

    labels: np.ndarray
    cell_count: int

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.ndim != 1:
            raise ValidationError("labels must be a 1-d array")
        if self.cell_count < 1:
            raise ValidationError("cell_count must be >= 1")
        if self.labels.size == 0:
            raise ValidationError("partition of an empty space")
        if self.labels.min() < 0 or self.labels.max() >= self.cell_count:
            raise ValidationError("cell label out of range")
        present = np.unique(self.labels)
        if present.size != self.cell_count:
            raise ValidationError("every cell must be nonempty")

    @property
    def n_states(self) -> int:
        return self.labels.size

    @classmethod
    def from_labels(cls, labels) -> "Partition":
        labels = np.asarray(labels, dtype=np.int64)
        return cls(labels, int(labels.max()) + 1 if labels.size else 1)

    @classmethod
    def identity(cls, n_states: int) -> "Partition":
        """The finest partition: each state its own cell."""
        return cls(np.arange(n_states, dtype=np.int64), n_states)

    @classmethod
    def trivial(cls, n_states: int) -> "Partition":
        return cls(np.zeros(n_states, dtype=np.int64), 1)

    def cell_members(self, cell: int) -> np.ndarray:
        return np.flatnonzero(self.labels == cell)

    def cell_measures(self, mu) -> np.ndarray:
        mu = check_measure(mu, self.n_states)
        return np.bincount(self.labels, weights=mu, minlength=self.cell_count)

    def __eq__(self, other):
        return (
            isinstance(other, Partition)
            and self.cell_count == other.cell_count
            and np.array_equal(self.labels, other.labels)
        )


def join(p: Partition, q: Partition) -> Partition:
    """Common refinement of two partitions of the same space.

    The joined cell labels are compacted in lexicographic order of the
    (p-label, q-label) pairs, so the result is independent of any prior
    labelling history.
    """
    if p.n_states != q.n_states:
        raise DimensionError(
            f"cannot join partitions of {p.n_states} and {q.n_states} states"
        )
    pair_code = p.labels * q.cell_count + q.labels
    # np.unique sorts ascending, which is exactly lexicographic in (p, q)
    _, compact = np.unique(pair_code, return_inverse=True)
    return Partition.from_labels(compact)


def join_all(parts: Sequence[Partition]) -> Partition:
    if not parts:
        raise ValidationError("join_all needs at least one partition")
    out = parts[0]
    for p in parts[1:]:
        out = join(out, p)
    return out


@dataclass
class FiniteAlgebra:
    """The algebra generated by a partition, represented by its atoms."""

    atoms: Tuple[Tuple[int, ...], ...]
    n_states: int

    def __post_init__(self):
        seen = np.zeros(self.n_states, dtype=bool)
        for atom in self.atoms:
            if len(atom) == 0:
                raise ValidationError("empty atom")
            for i in atom:
                if not 0 <= i < self.n_states:
                    raise ValidationError("atom member out of range")
                if seen[i]:
                    raise ValidationError("atoms must be disjoint")
                seen[i] = True
        if not seen.all():
            raise ValidationError("atoms must cover the space")

    @classmethod
    def from_partition(cls, part: Partition) -> "FiniteAlgebra":
        atoms = tuple(
            tuple(int(i) for i in part.cell_members(c)) for c in range(part.cell_count)
        )
        return cls(atoms, part.n_states)

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)


def measure_algebra_distance(a, b, mu) -> float:
    """d_mu(A, B) = mu(A symmetric-difference B) for two state sets."""
    mu = check_measure(mu)
    n = mu.shape[0]
    ma = as_mask(a, n)
    mb = as_mask(b, n)
    return float(mu[ma ^ mb].sum())


def distance_to_algebra(e, algebra: FiniteAlgebra, mu) -> float:
    """Distance from a set to the nearest union of atoms of a finite algebra.

    The objective mu(E symdiff B) over unions B of atoms decomposes over
    atoms, so the per-atom greedy rule (include atom a exactly when
    mu(a & E) > mu(a - E)) is an exact minimizer, not a heuristic.
    """
    mu = check_measure(mu, algebra.n_states)
    mask_e = as_mask(e, algebra.n_states)
    total = 0.0
    for atom in algebra.atoms:
        idx = np.asarray(atom, dtype=np.int64)
        inter = float(mu[idx][mask_e[idx]].sum())
        outer = float(mu[idx].sum()) - inter
        # each atom contributes min(mu(a & E), mu(a - E)) to the optimum
        total += outer if inter > outer else inter
    return total


def nearest_algebra_set(e, algebra: FiniteAlgebra, mu) -> np.ndarray:
    """The union of atoms achieving distance_to_algebra, as a boolean mask."""
    mu = check_measure(mu, algebra.n_states)
    mask_e = as_mask(e, algebra.n_states)
    best = np.zeros(algebra.n_states, dtype=bool)
    for atom in algebra.atoms:
        idx = np.asarray(atom, dtype=np.int64)
        inter = float(mu[idx][mask_e[idx]].sum())
        outer = float(mu[idx].sum()) - inter
        if inter > outer:
            best[idx] = True
    return best


@dataclass
class WordDistribution:
    """A probability distribution on words of one fixed length.

    ``weights`` maps symbol tuples to probabilities.  When built from a
    sample the exact integer window counts are retained in ``counts`` with
    their ``total``, so the weights are ratios of integers and sum to 1
    exactly in rational arithmetic.
    """

    length: int
    alphabet: Alphabet
    weights: Dict[Tuple[int, ...], float]
    counts: Optional[Dict[Tuple[int, ...], int]] = field(default=None, repr=False)
    total: Optional[int] = field(default=None, repr=False)

    def __post_init__(self):
        if self.length < 1:
            raise ValidationError("word length must be >= 1")
        s = 0.0
        for w, p in self.weights.items():
            if len(w) != self.length:
                raise ValidationError(
                    f"word {w} has length {len(w)}, distribution is over length {self.length}"
                )
            for sym in w:
                if sym not in self.alphabet:
                    raise ValidationError(f"symbol {sym} outside alphabet")
            if p < 0:
                raise ValidationError("negative weight")
            s += p
        if abs(s - 1.0) > max(WEIGHT_SUM_ATOL, 1e-12 * len(self.weights)):
            raise ValidationError(f"weights sum to {s}, expected 1")
        if self.counts is not None:
            if self.total != sum(self.counts.values()):
                raise ValidationError("counts do not sum to total")

    @classmethod
    def from_counts(cls, counts: Dict[Tuple[int, ...], int], alphabet_size: int) -> "WordDistribution":
        if not counts:
            raise ValidationError("empty count table")
        total = sum(counts.values())
        length = len(next(iter(counts)))
        weights = {w: c / total for w, c in counts.items()}
        return cls(length, Alphabet(alphabet_size), weights, dict(counts), total)

    @classmethod
    def from_weights(cls, weights: Dict[Tuple[int, ...], float], alphabet_size: int) -> "WordDistribution":
        if not weights:
            raise ValidationError("empty weight table")
        length = len(next(iter(weights)))
        return cls(length, Alphabet(alphabet_size), dict(weights))

    def support(self):
        """Support words in a fixed deterministic (lexicographic) order."""
        return sorted(self.weights)

    def exact_weight_sum(self) -> Fraction:
        """Sum of weights in rational arithmetic (requires counts)."""
        if self.counts is None:
            raise ValidationError("no exact counts on this distribution")
        return sum(
            (Fraction(c, self.total) for c in self.counts.values()), Fraction(0)
        )

    def arrays(self):
        """Support as an (s, length) int array plus the weight vector."""
        words = self.support()
        mat = np.asarray(words, dtype=np.int64).reshape(len(words), self.length)
        w = np.asarray([self.weights[t] for t in words], dtype=float)
        return mat, w


def window_codes(sample: np.ndarray, n: int, alphabet_size: int) -> np.ndarray:
    """Encode all length-n sliding windows as base-k integers."""
    if alphabet_size ** n > 2 ** 62:
        raise ValidationError(
            f"window code {alphabet_size}^{n} exceeds 63-bit range; shorten the block"
        )
    powers = alphabet_size ** np.arange(n - 1, -1, -1, dtype=np.int64)
    win = np.lib.stride_tricks.sliding_window_view(sample, n)
    return win @ powers


def decode_word(code: int, n: int, alphabet_size: int) -> Tuple[int, ...]:
    syms = []
    for _ in range(n):
        syms.append(int(code % alphabet_size))
        code //= alphabet_size
    return tuple(reversed(syms))


def window_keys(sample: np.ndarray, n: int, alphabet_size: int) -> np.ndarray:
    """Integer keys for all length-n windows, equal iff the windows are.

    Key order follows lexicographic word order.  Short blocks use one base-k
    code directly; longer blocks are split into code chunks that are folded
    left to right, re-ranking after each fold so intermediate products stay
    inside int64 regardless of n.
    """
    sample = np.asarray(sample, dtype=np.int64)
    count = sample.size - n + 1
    if count < 1:
        raise InsufficientDataError(
            f"sample of length {sample.size} has no window of length {n}"
        )
    chunk = max(1, int(62 / math.log2(max(alphabet_size, 2))))
    if n <= chunk:
        return window_codes(sample, n, alphabet_size)
    widths = [chunk] * (n // chunk)
    if n % chunk:
        widths.append(n % chunk)
    keys = None
    start = 0
    for width in widths:
        codes = window_codes(sample, width, alphabet_size)[start: start + count]
        if keys is None:
            keys = codes
        else:
            _, rank = np.unique(keys, return_inverse=True)
            _, crank = np.unique(codes, return_inverse=True)
            keys = rank * (int(crank.max()) + 1) + crank
        start += width
    return keys


def empirical_word_distribution(sample, n: int, alphabet_size: Optional[int] = None) -> WordDistribution:
    """Sliding-window empirical distribution of length-n blocks.

    Counts every window position (overlapping), keeps the exact integer
    counts, and raises if the sample has no complete window.
    """
    arr = np.asarray(sample, dtype=np.int64)
    if arr.ndim != 1:
        raise DimensionError("sample must be a 1-d symbol array")
    if n < 1:
        raise ValidationError("block length must be >= 1")
    if arr.size < n:
        raise InsufficientDataError(
            f"sample of length {arr.size} has no window of length {n}"
        )
    if alphabet_size is None:
        alphabet_size = int(arr.max()) + 1 if arr.size else 1
    if arr.min() < 0 or arr.max() >= alphabet_size:
        raise ValidationError("sample symbol outside alphabet")
    keys = window_keys(arr, n, alphabet_size)
    _, first, cnt = np.unique(keys, return_index=True, return_counts=True)
    counts = {
        tuple(int(s) for s in arr[pos: pos + n]): int(k)
        for pos, k in zip(first, cnt)
    }
    return WordDistribution.from_counts(counts, alphabet_size)


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------

def write_word_file(path, words: Sequence[Word]):
    """Write words to a text file.

    Format: a header line ``alphabet=<k> length=<n>`` followed by one word
    per line, symbols space-separated in base 10.  All words must share one
    alphabet and one length.
    """
    if not words:
        raise ValidationError("nothing to write")
    k = words[0].alphabet.size
    n = len(words[0])
    for w in words:
        if w.alphabet.size != k or len(w) != n:
            raise ValidationError("all words in a file share alphabet and length")
    with open(path, "w") as fh:
        fh.write(f"alphabet={k} length={n}\n")
        for w in words:
            fh.write(" ".join(str(s) for s in w.symbols) + "\n")


def read_word_file(path):
    """Read a word file written by write_word_file. Returns a list of Words."""
    with open(path) as fh:
        header = fh.readline().strip()
        fields = dict(item.split("=") for item in header.split())
        try:
            k = int(fields["alphabet"])
            n = int(fields["length"])
        except (KeyError, ValueError) as exc:
            raise ValidationError(f"bad word-file header: {header!r}") from exc
        words = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            syms = tuple(int(tok) for tok in line.split())
            if len(syms) != n:
                raise ValidationError(
                    f"word of length {len(syms)} in a file declaring length {n}"
                )
            words.append(Word(syms, Alphabet(k)))
    return words


def write_distribution_csv(path, dist: WordDistribution):
    """Write a word distribution as CSV with columns word,probability.

    The word field holds the symbols space-separated; rows are emitted in
    lexicographic word order so equal distributions produce equal files.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["word", "probability"])
        for w in dist.support():
            writer.writerow([" ".join(str(s) for s in w), repr(dist.weights[w])])


def read_distribution_csv(path, alphabet_size: Optional[int] = None) -> WordDistribution:
    weights: Dict[Tuple[int, ...], float] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["word", "probability"]:
            raise ValidationError("distribution CSV must start with word,probability")
        for row in reader:
            if not row:
                continue
            word = tuple(int(tok) for tok in row[0].split())
            weights[word] = float(row[1])
    if not weights:
        raise ValidationError("empty distribution file")
    if alphabet_size is None:
        alphabet_size = max(max(w) for w in weights) + 1
    return WordDistribution.from_weights(weights, alphabet_size)
