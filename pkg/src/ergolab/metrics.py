"""Distances between words, between word distributions, and between finite
maps.

Two word metrics are provided on equal-length words: the normalized Hamming
distance and the match-based distance 1 - LCS/n, which forgives index shifts
(deleting a symbol and resuming the alignment costs 1/n, not a cascade of
mismatches).  Each lifts to distributions as the smallest expected distance
over couplings of the two laws.

The coupling optimum is solved exactly while the cost table stays small
(at most ``exact_limit`` entries, default 10^4) and is otherwise bracketed
by a greedy upper bound and a marginal-discrepancy lower bound.  A bracketed
result is always flagged; nothing silently degrades to an approximation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .core import WordDistribution, as_mask, check_measure
from .errors import DimensionError, ErgolabError, ParameterError, ValidationError

EXACT_LIMIT_DEFAULT = 10_000
# beyond this many cost entries even the greedy bracket is refused
BRACKET_LIMIT = 4_000_000
MARGINAL_ATOL = 1e-10


def _as_word_array(w) -> np.ndarray:
    arr = np.asarray(getattr(w, "symbols", w), dtype=np.int64)
    if arr.ndim != 1 or arr.size == 0:
        raise DimensionError("expected a nonempty 1-d word")
    return arr


def dbar_words(u, v) -> float:
    """Normalized Hamming distance between equal-length words."""
    a, b = _as_word_array(u), _as_word_array(v)
    if a.size != b.size:
        raise DimensionError(f"word lengths differ: {a.size} vs {b.size}")
    return float(np.mean(a != b))


def lcs_length(u, v) -> int:
    """Length of the longest common subsequence, O(n^2) dynamic program."""
    a, b = _as_word_array(u), _as_word_array(v)
    prev = np.zeros(b.size + 1, dtype=np.int32)
    for sym in a:
        cand = np.maximum(prev[1:], prev[:-1] + (b == sym))
        # row values are nondecreasing in j, so a running max resolves the
        # in-row dependence C[i][j] >= C[i][j-1]
        prev[1:] = np.maximum.accumulate(cand)
    return int(prev[-1])


def fbar_words(u, v) -> float:
    """1 - LCS/n between equal-length words."""
    a, b = _as_word_array(u), _as_word_array(v)
    if a.size != b.size:
        raise DimensionError(f"word lengths differ: {a.size} vs {b.size}")
    return 1.0 - lcs_length(a, b) / a.size


def lcs_matrix(words_a: np.ndarray, words_b: np.ndarray) -> np.ndarray:
    """All-pairs LCS lengths between the rows of two word matrices.

    Processes the left rows in blocks so the working DP tensor stays inside
    a fixed memory budget whatever the support sizes.
    """
    words_a = np.asarray(words_a, dtype=np.int64)
    words_b = np.asarray(words_b, dtype=np.int64)
    if words_a.shape[1] != words_b.shape[1]:
        raise DimensionError("word matrices must share the word length")
    na, nb = words_a.shape[0], words_b.shape[0]
    n = words_a.shape[1]
    out = np.empty((na, nb), dtype=np.int32)
    block = max(1, (1 << 23) // max(nb * (n + 1), 1))
    for lo in range(0, na, block):
        hi = min(lo + block, na)
        prev = np.zeros((hi - lo, nb, n + 1), dtype=np.int32)
        for i in range(n):
            eq = (words_a[lo:hi, i][:, None, None] == words_b[None, :, :]).astype(np.int32)
            cand = np.maximum(prev[:, :, 1:], prev[:, :, :-1] + eq)
            prev[:, :, 1:] = np.maximum.accumulate(cand, axis=2)
        out[lo:hi] = prev[:, :, -1]
    return out


def dbar_cost_matrix(words_a: np.ndarray, words_b: np.ndarray) -> np.ndarray:
    words_a = np.asarray(words_a, dtype=np.int64)
    words_b = np.asarray(words_b, dtype=np.int64)
    if words_a.shape[1] != words_b.shape[1]:
        raise DimensionError("word matrices must share the word length")
    return (words_a[:, None, :] != words_b[None, :, :]).mean(axis=2)


def fbar_cost_matrix(words_a: np.ndarray, words_b: np.ndarray) -> np.ndarray:
    n = words_a.shape[1]
    return 1.0 - lcs_matrix(words_a, words_b) / n


@dataclass
class Coupling:
    """A joint distribution on pairs of support words with fixed marginals."""

    matrix: np.ndarray
    left_words: List[Tuple[int, ...]]
    right_words: List[Tuple[int, ...]]

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float)
        if self.matrix.shape != (len(self.left_words), len(self.right_words)):
            raise DimensionError("coupling matrix shape does not match supports")
        if np.any(self.matrix < -MARGINAL_ATOL):
            raise ValidationError("coupling has a negative entry")

    def check_marginals(self, p: np.ndarray, q: np.ndarray, atol: float = MARGINAL_ATOL):
        if not np.allclose(self.matrix.sum(axis=1), p, atol=atol):
            raise ValidationError("left marginal mismatch")
        if not np.allclose(self.matrix.sum(axis=0), q, atol=atol):
            raise ValidationError("right marginal mismatch")


@dataclass
class TransportResult:
    """Outcome of a coupling-optimal distance computation.

    ``method`` is "exact" when the optimum was solved, "bounded" when only
    the (lower, upper) bracket is available; ``value`` then conservatively
    reports the upper bound and the result is flagged.
    """

    value: float
    lower: float
    upper: float
    method: str
    support_shape: Tuple[int, int]
    flags: List[str] = field(default_factory=list)
    coupling: Optional[Coupling] = None

    def __float__(self) -> float:
        return float(self.value)

    def to_dict(self) -> dict:
        return {
            "value": float(self.value),
            "lower": float(self.lower),
            "upper": float(self.upper),
            "method": self.method,
            "support_shape": list(self.support_shape),
            "flags": list(self.flags),
        }


def solve_transport(p: np.ndarray, q: np.ndarray, costs: np.ndarray,
                    want_coupling: bool = False):
    """Exact minimum-cost coupling via the transportation LP (HiGHS).

    Returns (optimal value, coupling matrix or None).  Deterministic for
    fixed inputs.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    costs = np.asarray(costs, dtype=float)
    m, n = costs.shape
    if p.shape != (m,) or q.shape != (n,):
        raise DimensionError("marginal lengths do not match the cost matrix")
    if abs(p.sum() - q.sum()) > 1e-9:
        raise ValidationError("marginals have different total mass")
    rows = []
    cols = []
    data = []
    for i in range(m):
        rows.extend([i] * n)
        cols.extend(range(i * n, (i + 1) * n))
        data.extend([1.0] * n)
    for j in range(n):
        rows.extend([m + j] * m)
        cols.extend(range(j, m * n, n))
        data.extend([1.0] * m)
    a_eq = sparse.coo_matrix((data, (rows, cols)), shape=(m + n, m * n))
    b_eq = np.concatenate([p, q])
    res = linprog(costs.ravel(), A_eq=a_eq.tocsr(), b_eq=b_eq,
                  bounds=(0, None), method="highs")
    if res.status != 0:
        raise ErgolabError(f"transport LP failed with status {res.status}: {res.message}")
    plan = None
    if want_coupling:
        plan = np.clip(res.x.reshape(m, n), 0.0, None)
    return float(res.fun), plan


def _greedy_upper(p: np.ndarray, q: np.ndarray, costs: np.ndarray) -> float:
    """Feasible coupling by cheapest-cell-first allocation; an upper bound."""
    order = np.argsort(costs.ravel(), kind="stable")
    rp = p.copy()
    rq = q.copy()
    total = 0.0
    n = costs.shape[1]
    for cell in order:
        i, j = divmod(int(cell), n)
        take = min(rp[i], rq[j])
        if take > 0:
            total += take * costs[i, j]
            rp[i] -= take
            rq[j] -= take
    return total


def _position_marginals(words: np.ndarray, w: np.ndarray, alphabet: int) -> np.ndarray:
    """Per-position symbol laws of a word distribution, shape (n, alphabet)."""
    s, n = words.shape
    out = np.zeros((n, alphabet))
    for t in range(n):
        out[t] = np.bincount(words[:, t], weights=w, minlength=alphabet)
    return out


def _dbar_lower(pw, p, qw, q) -> float:
    # any coupling mismatches coordinate t with prob >= TV of the two
    # position-t symbol laws; average over t
    alphabet = int(max(pw.max(), qw.max())) + 1
    mp = _position_marginals(pw, p, alphabet)
    mq = _position_marginals(qw, q, alphabet)
    return float(np.abs(mp - mq).sum(axis=1).mean() / 2.0)


def _fbar_lower(pw, p, qw, q) -> float:
    # 1 - LCS/n >= symbol-count discrepancy / 2n for each pair, so the
    # expected cost is at least the discrepancy of the mean count profiles
    alphabet = int(max(pw.max(), qw.max())) + 1
    n = pw.shape[1]
    cp = np.zeros(alphabet)
    cq = np.zeros(alphabet)
    for c in range(alphabet):
        cp[c] = ((pw == c).sum(axis=1) * p).sum()
        cq[c] = ((qw == c).sum(axis=1) * q).sum()
    return float(np.abs(cp - cq).sum() / (2.0 * n))


def _distribution_distance(dist_p: WordDistribution, dist_q: WordDistribution,
                           kind: str, exact_limit: int, want_coupling: bool) -> TransportResult:
    if dist_p.length != dist_q.length:
        raise DimensionError(
            f"distributions are over lengths {dist_p.length} and {dist_q.length}"
        )
    pw, p = dist_p.arrays()
    qw, q = dist_q.arrays()
    shape = (pw.shape[0], qw.shape[0])
    cells = shape[0] * shape[1]
    if cells > BRACKET_LIMIT:
        raise ParameterError(
            f"support product {cells} exceeds the bracketing limit {BRACKET_LIMIT}"
        )
    cost_fn = dbar_cost_matrix if kind == "dbar" else fbar_cost_matrix
    costs = cost_fn(pw, qw)
    if cells <= exact_limit:
        value, plan = solve_transport(p, q, costs, want_coupling=want_coupling)
        coupling = None
        if plan is not None:
            coupling = Coupling(plan, [tuple(w) for w in pw], [tuple(w) for w in qw])
            coupling.check_marginals(p, q, atol=1e-8)
        value = max(value, 0.0)
        return TransportResult(value, value, value, "exact", shape, [], coupling)
    upper = _greedy_upper(p, q, costs)
    lower = _dbar_lower(pw, p, qw, q) if kind == "dbar" else _fbar_lower(pw, p, qw, q)
    lower = min(lower, upper)
    return TransportResult(
        upper, lower, upper, "bounded", shape,
        [f"support {shape[0]}x{shape[1]} above exact limit {exact_limit}; bracket only"],
    )


def dbar_distributions(dist_p: WordDistribution, dist_q: WordDistribution,
                       exact_limit: int = EXACT_LIMIT_DEFAULT,
                       want_coupling: bool = False) -> TransportResult:
    """Smallest expected Hamming distance over couplings of two block laws."""
    return _distribution_distance(dist_p, dist_q, "dbar", exact_limit, want_coupling)


def fbar_distributions(dist_p: WordDistribution, dist_q: WordDistribution,
                       exact_limit: int = EXACT_LIMIT_DEFAULT,
                       want_coupling: bool = False) -> TransportResult:
    """Smallest expected (1 - LCS/n) over couplings of two block laws."""
    return _distribution_distance(dist_p, dist_q, "fbar", exact_limit, want_coupling)


def weak_distance(s, t, sets: Sequence, terms: Optional[int] = None,
                  mu=None) -> float:
    """Weak-topology distance between two finite maps.

    sum over leading sets A_1, A_2, ... of 2^-j * (mu(S A_j symdiff T A_j)
    + mu(S^-1 A_j symdiff T^-1 A_j)).  ``s`` and ``t`` may be permutation
    arrays or objects exposing one via ``.perm``; the measure defaults to
    uniform.
    """
    sp = np.asarray(getattr(s, "perm", s), dtype=np.int64)
    tp = np.asarray(getattr(t, "perm", t), dtype=np.int64)
    if sp.shape != tp.shape or sp.ndim != 1:
        raise DimensionError("maps must be permutations of one state space")
    n = sp.size
    for perm in (sp, tp):
        if not np.array_equal(np.sort(perm), np.arange(n)):
            raise ValidationError("map is not a permutation")
    if mu is None:
        mu = np.full(n, 1.0 / n)
    mu = check_measure(mu, n)
    if terms is None:
        terms = len(sets)
    if not 1 <= terms <= len(sets):
        raise ParameterError(f"terms must be in 1..{len(sets)}")
    sinv = np.empty(n, dtype=np.int64)
    tinv = np.empty(n, dtype=np.int64)
    sinv[sp] = np.arange(n)
    tinv[tp] = np.arange(n)
    total = 0.0
    for j in range(1, terms + 1):
        mask = as_mask(sets[j - 1], n)
        fwd = np.zeros(n, dtype=bool)
        fwd[sp[mask]] = True
        gwd = np.zeros(n, dtype=bool)
        gwd[tp[mask]] = True
        bwd = np.zeros(n, dtype=bool)
        bwd[sinv[mask]] = True
        cwd = np.zeros(n, dtype=bool)
        cwd[tinv[mask]] = True
        total += 2.0 ** (-j) * (
            float(mu[fwd ^ gwd].sum()) + float(mu[bwd ^ cwd].sum())
        )
    return total
