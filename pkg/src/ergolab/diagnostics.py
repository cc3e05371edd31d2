"""Finite-sample diagnostics for mixing-type behavior of sampled processes.

Each statistic here is the desk-scale analogue of an asymptotic property:
it runs on one finite trajectory at explicit window sizes and tolerances and
returns a report carrying the measured numbers, a verdict where one is
defined, and health flags (occupancy shortfalls, bracketed transport calls,
undersampled entropies).  A verdict concerns the sampled ergodic component
at the stated parameters, nothing more.

Conditional statistics observe an occupancy floor: conditioning cells seen
fewer than ``occupancy_floor`` times are set aside and their mass counts
against the favorable side of the verdict, so sparse conditioning can only
hurt, never fabricate, a pass.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core import WordDistribution, window_codes, window_keys
from .entropy import conditional_block_entropy
from .errors import DimensionError, ParameterError, ValidationError
from .metrics import (
    EXACT_LIMIT_DEFAULT,
    dbar_distributions,
    fbar_cost_matrix,
    fbar_distributions,
)
from .systems import SkewProduct, TrajectorySample

OCCUPANCY_FLOOR_DEFAULT = 100


@dataclass
class DiagnosticReport:
    """Uniform result record emitted by the top-level diagnostics."""

    statistic: str
    params: Dict
    values: Dict
    verdict: Optional[bool]
    seed: Optional[int]
    flags: List[str] = field(default_factory=list)
    trace: Optional[List[Dict]] = None

    def to_dict(self, with_trace: bool = False) -> dict:
        out = {
            "statistic": self.statistic,
            "params": dict(self.params),
            "values": dict(self.values),
            "verdict": self.verdict,
            "seed": self.seed,
            "flags": list(self.flags),
        }
        if with_trace and self.trace is not None:
            out["trace"] = [dict(r) for r in self.trace]
        return out


def _labels_of(sample) -> Tuple[np.ndarray, int]:
    if isinstance(sample, TrajectorySample) or hasattr(sample, "labels"):
        return np.asarray(sample.labels, dtype=np.int64), sample.alphabet.size
    arr = np.asarray(sample, dtype=np.int64)
    if arr.ndim != 1:
        raise DimensionError("sample must be 1-d")
    return arr, int(arr.max()) + 1 if arr.size else 1


def _value_table(values, n_base: int, m: int, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.shape != (n_base, m):
        raise DimensionError(f"{name} must have shape ({n_base}, {m})")
    return arr


def product_set(base_states, fiber_points, n_base: int, m: int) -> np.ndarray:
    """Indicator table of (base subset) x (fiber subset), shape (n_base, m)."""
    mask = np.zeros((n_base, m), dtype=bool)
    rows = np.asarray(list(base_states), dtype=np.int64)
    cols = np.asarray(list(fiber_points), dtype=np.int64)
    mask[np.ix_(rows, cols)] = True
    return mask


def fiber_half_set(n_base: int, m: int, half: int = 0) -> np.ndarray:
    """All base states crossed with one half of the fiber grid."""
    if half not in (0, 1):
        raise ParameterError("half must be 0 or 1")
    lo, hi = (0, m // 2) if half == 0 else (m // 2, m)
    return product_set(range(n_base), range(lo, hi), n_base, m)


# ---------------------------------------------------------------------------
# anchor scheduling and fiber-evolved indicator matrices
# ---------------------------------------------------------------------------

def _anchors(total: int, left: int, right: int, n_anchors: int) -> np.ndarray:
    """Evenly spread anchor times t with t-left and t+right-1 in range."""
    lo = left
    hi = total - right
    if hi < lo:
        raise ParameterError(
            f"trajectory of {total} steps too short for window [-{left}, {right})"
        )
    count = min(n_anchors, hi - lo + 1)
    if count == 1:
        return np.asarray([lo], dtype=np.int64)
    stride = (hi - lo) // (count - 1)
    return lo + stride * np.arange(count, dtype=np.int64)


def _evolved_indicator(table: np.ndarray, base_states: np.ndarray,
                       t: int, length: int, cocycle, prefix) -> np.ndarray:
    """Rows i of the (length, m) matrix give table(state_{t+i}, fiber at t+i)
    as a function of the fiber position at time t."""
    m = table.shape[1]
    rows = table[base_states[t: t + length]]
    if prefix is not None:
        off = (prefix[t: t + length] - prefix[t]) % m
        cols = (np.arange(m, dtype=np.int64)[None, :] + off[:, None]) % m
        return np.take_along_axis(rows, cols, axis=1)
    out = np.empty((length, m), dtype=table.dtype)
    cur = np.arange(m, dtype=np.int64)
    cells = cocycle.driver.labels[base_states]
    for i in range(length):
        out[i] = rows[i, cur]
        cur = cocycle.perms[cells[t + i]][cur]
    return out


def _rotation_prefix(ext: SkewProduct, base_states: np.ndarray):
    if ext.cocycle.is_rotation:
        inc = ext.cocycle.step_sequence(base_states)
        return np.concatenate([[0], np.cumsum(inc)])
    return None


# ---------------------------------------------------------------------------
# EA: relative weak mixing over a factor, conditioned on base windows
# ---------------------------------------------------------------------------

def ea_statistic(ext: SkewProduct, set_c, set_d, L: int, M: int,
                 sample_length: Optional[int] = None, seed: int = 0,
                 n_anchors: int = 192) -> float:
    """Window-averaged correlation statistic for relative weak mixing.

    For indicator tables C and D over (base state, fiber point), computes

        (1/L^2) sum_{i,j<L} int E(f_i f_j | base window) E(g_i g_j | base window)
        - (int E(f|base) E(g|base))^2

    where f_i is the indicator of C carried i steps forward, the conditional
    expectations are exact fiber-grid averages grouped by the base label
    window of width 2M+1 around each anchor, and the base integral is a
    Birkhoff average over anchors.  Values near 0 indicate the extension
    relatively mixes the pair; rigid fiber behavior keeps the value away
    from 0.
    """
    if L < 1 or M < 0:
        raise ParameterError("need L >= 1 and M >= 0")
    n_base, m = ext.base.n_states, ext.m
    C = _value_table(set_c, n_base, m, "set_c").astype(float)
    D = _value_table(set_d, n_base, m, "set_d").astype(float)
    if sample_length is None:
        sample_length = max(1 << 16, 8 * L) + L + 2 * M + 1
    base_states = ext.base.sample_states(sample_length, seed)
    anchors = _anchors(sample_length, M, max(L, M + 1), n_anchors)
    prefix = _rotation_prefix(ext, base_states)
    window = 2 * M + 1
    if n_base ** window > 2 ** 62:
        raise ValidationError("conditioning window exceeds the 63-bit code range")
    wcodes = window_codes(base_states, window, n_base)
    cell_of_anchor = wcodes[anchors - M]
    order = np.argsort(cell_of_anchor, kind="stable")
    cbar = C.mean(axis=1)
    dbar_ = D.mean(axis=1)
    a = float(np.mean(cbar[base_states[anchors]] * dbar_[base_states[anchors]]))
    total = 0.0
    i = 0
    n = anchors.size
    while i < n:
        j = i
        code = cell_of_anchor[order[i]]
        g_a = np.zeros((L, L))
        g_b = np.zeros((L, L))
        while j < n and cell_of_anchor[order[j]] == code:
            t = int(anchors[order[j]])
            mat_a = _evolved_indicator(C, base_states, t, L, ext.cocycle, prefix)
            mat_b = _evolved_indicator(D, base_states, t, L, ext.cocycle, prefix)
            g_a += mat_a @ mat_a.T
            g_b += mat_b @ mat_b.T
            j += 1
        total += float(np.vdot(g_a, g_b)) / (j - i)
        i = j
    value = total / (n * L * L * m * m) - a * a
    return value


def default_pair_family(ext: SkewProduct) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Test pairs mixing fiber halves with a base-refined variant."""
    n_base, m = ext.base.n_states, ext.m
    half = fiber_half_set(n_base, m, 0)
    mixed = product_set(range(n_base // 2 + 1), range(m // 2, m), n_base, m)
    return [(half, half), (mixed, half)]


def rwm_verdict(ext: SkewProduct, pairs=None,
                L_schedule: Sequence[int] = (64, 256, 1024), M: int = 2,
                tol: float = 0.05, sample_length: Optional[int] = None,
                seed: int = 0, n_anchors: int = 192,
                early_stop: bool = True) -> DiagnosticReport:
    """Pass iff every test pair's EA statistic dips below tol somewhere on
    the window schedule.  The trace records every evaluated (pair, L, EA)."""
    if pairs is None:
        pairs = default_pair_family(ext)
    schedule = sorted(int(x) for x in L_schedule)
    if not schedule:
        raise ParameterError("empty window schedule")
    trace: List[Dict] = []
    per_pair: List[float] = []
    for idx, (c, d) in enumerate(pairs):
        best = np.inf
        for L in schedule:
            ea = ea_statistic(ext, c, d, L, M, sample_length=sample_length,
                              seed=seed, n_anchors=n_anchors)
            trace.append({"pair": idx, "L": L, "ea": ea})
            best = min(best, ea)
            if early_stop and best < tol:
                break
        per_pair.append(best)
    verdict = all(b < tol for b in per_pair)
    return DiagnosticReport(
        statistic="rwm",
        params={"L_schedule": schedule, "M": M, "tol": tol,
                "n_pairs": len(pairs), "n_anchors": n_anchors},
        values={f"pair_{i}_min_ea": b for i, b in enumerate(per_pair)},
        verdict=verdict,
        seed=seed,
        trace=trace,
    )


# ---------------------------------------------------------------------------
# relative L^2 deviation over a factor (full relative-product form)
# ---------------------------------------------------------------------------

def factor_rwm_statistic(ext: SkewProduct, f, g, n_steps: int,
                         sample_length: Optional[int] = None, seed: int = 0,
                         n_anchors: int = 256) -> float:
    """L^2 deviation of relative-product ergodic averages from independence.

    Averages f(x_i, u_i) g(x_i, v_i) over n_steps along the orbit for every
    fiber pair (u, v) exactly (m^2 pairs), and returns the squared L^2
    deviation from a = int E(f|base) E(g|base), averaged over base anchors.
    Constant functions give exactly 0; a rigid fiber keeps the value pinned
    at its enumerable limit for every n_steps.
    """
    if n_steps < 1:
        raise ParameterError("n_steps must be >= 1")
    n_base, m = ext.base.n_states, ext.m
    F = _value_table(f, n_base, m, "f")
    G = _value_table(g, n_base, m, "g")
    if sample_length is None:
        sample_length = max(1 << 15, 4 * n_steps) + n_steps + 1
    base_states = ext.base.sample_states(sample_length, seed)
    anchors = _anchors(sample_length, 0, n_steps, n_anchors)
    prefix = _rotation_prefix(ext, base_states)
    fbar = F.mean(axis=1)
    gbar = G.mean(axis=1)
    a = float(np.mean(fbar[base_states[anchors]] * gbar[base_states[anchors]]))
    acc = 0.0
    for t in anchors:
        mat_f = _evolved_indicator(F, base_states, int(t), n_steps, ext.cocycle, prefix)
        mat_g = _evolved_indicator(G, base_states, int(t), n_steps, ext.cocycle, prefix)
        pair_avg = (mat_f.T @ mat_g) / n_steps
        dev = pair_avg - a
        acc += float(np.mean(dev * dev))
    return acc / anchors.size


# ---------------------------------------------------------------------------
# conditional-law diagnostics: VWB (dbar) and VLB (fbar)
# ---------------------------------------------------------------------------

@dataclass
class ConditionalLawReport:
    """Conditioned-vs-unconditional block-law comparison.

    Unpacks as (good_mass, worst_distance, verdict).  ``unresolved_mass``
    is the mass of pasts below the occupancy floor; it is not in the good
    set, so heavy unresolved mass alone fails the verdict.
    """

    good_mass: float
    worst_distance: float
    verdict: bool
    unresolved_mass: float
    n_pasts: int
    n_resolved: int
    flags: List[str] = field(default_factory=list)
    trace: Optional[List[Dict]] = None

    def __iter__(self):
        return iter((self.good_mass, self.worst_distance, self.verdict))


def _conditional_law_report(sample, n_block: int, k_past: int, eps: float,
                            metric: str, exact_limit: int,
                            occupancy_floor: int) -> ConditionalLawReport:
    arr, alphabet = _labels_of(sample)
    if n_block < 1 or k_past < 1:
        raise ParameterError("need n_block >= 1 and k_past >= 1")
    if not 0 < eps < 1:
        raise ParameterError("eps must be in (0, 1)")
    span = k_past + n_block
    if arr.size < span + 1:
        raise ParameterError(f"sample too short for window span {span}")
    count = arr.size - span + 1
    past_keys = window_keys(arr, k_past, alphabet)[:count]
    fut_keys = window_keys(arr, n_block, alphabet)[k_past: k_past + count]
    _, fut_first, fut_inv, fut_cnt = np.unique(
        fut_keys, return_index=True, return_inverse=True, return_counts=True)
    fut_words = [
        tuple(int(s) for s in arr[k_past + pos: k_past + pos + n_block])
        for pos in fut_first
    ]
    uncond_counts = {w: int(k) for w, k in zip(fut_words, fut_cnt)}
    uncond = WordDistribution.from_counts(uncond_counts, alphabet)
    order = np.argsort(past_keys, kind="stable")
    sorted_pasts = past_keys[order]
    boundaries = np.flatnonzero(np.concatenate([[True], np.diff(sorted_pasts) != 0]))
    boundaries = np.append(boundaries, sorted_pasts.size)
    distance_fn = dbar_distributions if metric == "dbar" else fbar_distributions
    flags: List[str] = []
    trace: List[Dict] = []
    good_mass = 0.0
    unresolved = 0.0
    worst = 0.0
    n_resolved = 0
    bracketed = False
    for b in range(boundaries.size - 1):
        members = order[boundaries[b]: boundaries[b + 1]]
        mass = members.size / count
        rep = int(members[0])
        past_word = tuple(int(s) for s in arr[rep: rep + k_past])
        if members.size < occupancy_floor:
            unresolved += mass
            trace.append({"past": past_word, "count": int(members.size),
                          "distance": None, "good": False, "resolved": False})
            continue
        n_resolved += 1
        sub = np.bincount(fut_inv[members], minlength=len(fut_words))
        cond_counts = {fut_words[i]: int(sub[i]) for i in np.flatnonzero(sub)}
        cond = WordDistribution.from_counts(cond_counts, alphabet)
        res = distance_fn(uncond, cond, exact_limit=exact_limit)
        if res.method != "exact":
            bracketed = True
        d = res.value
        is_good = d < eps
        if is_good:
            good_mass += mass
        else:
            worst = max(worst, d)
        trace.append({"past": past_word, "count": int(members.size),
                      "distance": d, "good": bool(is_good), "resolved": True})
    if unresolved > 0:
        flags.append(
            f"unresolved mass {unresolved:.4f} below occupancy floor {occupancy_floor}"
        )
    if bracketed:
        flags.append("some conditional distances are bracketed upper bounds")
    verdict = good_mass > 1.0 - eps
    return ConditionalLawReport(good_mass, worst, verdict, unresolved,
                                boundaries.size - 1, n_resolved, flags, trace)


def vwb_statistic(sample, n_block: int, k_past: int, eps: float,
                  exact_limit: int = EXACT_LIMIT_DEFAULT,
                  occupancy_floor: int = OCCUPANCY_FLOOR_DEFAULT) -> ConditionalLawReport:
    """Very-weak-Bernoulli style check: conditional future block laws must
    sit within eps of the unconditional law in coupling dbar for pasts of
    total mass above 1-eps."""
    return _conditional_law_report(sample, n_block, k_past, eps, "dbar",
                                   exact_limit, occupancy_floor)


def vlb_statistic(sample, n_block: int, k_past: int, eps: float,
                  exact_limit: int = EXACT_LIMIT_DEFAULT,
                  occupancy_floor: int = OCCUPANCY_FLOOR_DEFAULT) -> ConditionalLawReport:
    """Loosely-Bernoulli style check: same comparison in coupling fbar,
    which forgives index shifts between blocks."""
    return _conditional_law_report(sample, n_block, k_past, eps, "fbar",
                                   exact_limit, occupancy_floor)


@dataclass
class ZeroEntropyVlbReport:
    """Greedy fbar-clique capture of the block law.

    Unpacks as (good_mass, verdict).  ``clique_size`` counts the words
    accepted into the mutually fbar-close set.
    """

    good_mass: float
    verdict: bool
    clique_size: int
    support: int
    flags: List[str] = field(default_factory=list)
    trace: Optional[List[Dict]] = None

    def __iter__(self):
        return iter((self.good_mass, self.verdict))


def vlb_zero_entropy(sample, n_block: int, eps: float,
                     max_support: int = 4096) -> ZeroEntropyVlbReport:
    """Zero-entropy form: grow a set of pairwise fbar-close blocks greedily
    by descending mass (ties broken lexicographically) and pass iff the set
    captures mass above 1-eps."""
    arr, alphabet = _labels_of(sample)
    if not 0 < eps < 1:
        raise ParameterError("eps must be in (0, 1)")
    from .core import empirical_word_distribution

    dist = empirical_word_distribution(arr, n_block, alphabet)
    words = sorted(dist.weights, key=lambda w: (-dist.weights[w], w))
    if len(words) > max_support:
        raise ParameterError(
            f"support {len(words)} exceeds max_support {max_support}"
        )
    mat = np.asarray(words, dtype=np.int64)
    # cost rows are computed lazily against the clique built so far; the
    # full all-pairs table is never needed and can be large at this n_block
    clique: List[int] = []
    mass = 0.0
    trace: List[Dict] = []
    for i, w in enumerate(words):
        if clique:
            row = fbar_cost_matrix(mat[i: i + 1], mat[clique])[0]
            ok = bool(np.all(row < eps))
        else:
            ok = True
        if ok:
            clique.append(i)
            mass += dist.weights[w]
        trace.append({"word": w, "weight": dist.weights[w], "accepted": bool(ok)})
    flags = []
    windows = arr.size - n_block + 1
    if windows < 50 * len(words):
        flags.append(f"support {len(words)} large for {windows} windows")
    verdict = mass > 1.0 - eps
    return ZeroEntropyVlbReport(mass, verdict, len(clique), len(words), flags, trace)


# ---------------------------------------------------------------------------
# finite K-property check
# ---------------------------------------------------------------------------

@dataclass
class KPropertyReport:
    """Two-condition entropy check for K-style behavior at finite windows."""

    verdict: bool
    cond_growth: bool
    cond_remote: bool
    h_hat: float
    growth_lhs: float
    growth_rhs: float
    remote_lhs: float
    remote_rhs: float
    flags: List[str] = field(default_factory=list)

    def __iter__(self):
        return iter((self.verdict, self.cond_growth, self.cond_remote))


def k_property_check(sample, n_block: int, k0: int, k1: int,
                     eps: float = 0.1, delta: float = 0.1) -> KPropertyReport:
    """Finite-window K check at measured entropy rate.

    Condition 1 (growth): H(n_block future | k1-past) must stay below
    (n_block + k0) h_hat + delta, with h_hat the measured one-step
    conditional entropy rate; the overlap of the windows makes the wider
    conditioned block collapse to this form.  Condition 2 (remote past):
    conditioning only on the window ending k0 steps back must leave the
    future block entropy within eps of unconditional.
    """
    if not 1 <= k0 <= k1:
        raise ParameterError("need 1 <= k0 <= k1")
    h_hat_est = conditional_block_entropy(sample, 1, k1)
    est_growth = conditional_block_entropy(sample, n_block, k1)
    est_remote = conditional_block_entropy(sample, n_block, k1 - k0 + 1, gap=k0 - 1)
    est_uncond = conditional_block_entropy(sample, n_block, 0)
    growth_rhs = (n_block + k0) * h_hat_est.value + delta
    remote_rhs = est_uncond.value - eps
    cond_growth = est_growth.value < growth_rhs
    cond_remote = est_remote.value > remote_rhs
    flags = sorted(set(h_hat_est.flags + est_growth.flags
                       + est_remote.flags + est_uncond.flags))
    return KPropertyReport(
        verdict=bool(cond_growth and cond_remote),
        cond_growth=bool(cond_growth),
        cond_remote=bool(cond_remote),
        h_hat=h_hat_est.value,
        growth_lhs=est_growth.value,
        growth_rhs=growth_rhs,
        remote_lhs=est_remote.value,
        remote_rhs=remote_rhs,
        flags=flags,
    )


# ---------------------------------------------------------------------------
# relative mixing over the base factor
# ---------------------------------------------------------------------------

@dataclass
class RelativeMixingResult:
    """L^2 size of the conditional covariance at one time shift.

    ``value`` uses the direct product form, ``centered_value`` recenters g
    by its fiber average first; the two are algebraically identical and
    ``agreement_gap`` records the floating-point daylight between them.
    """

    value: float
    centered_value: float
    agreement_gap: float
    n_steps: int
    flags: List[str] = field(default_factory=list)

    def __float__(self):
        return self.value

    def __iter__(self):
        return iter((self.value, self.centered_value))


def relative_mixing_statistic(ext: SkewProduct, f, g, n_steps: int,
                              sample_length: Optional[int] = None,
                              seed: int = 0, n_anchors: int = 512) -> RelativeMixingResult:
    """|| E(f o T^n . g | base) - E(f o T^n | base) E(g | base) ||_2.

    Fiber averages are exact grid sums; the L^2 norm over the base is a
    Birkhoff average over anchors.  If g is base-measurable the centered
    form vanishes identically (its integrand is exactly zero), which is the
    cancellation the centered variant exists to witness.
    """
    if n_steps < 0:
        raise ParameterError("n_steps must be >= 0")
    n_base, m = ext.base.n_states, ext.m
    F = _value_table(f, n_base, m, "f")
    G = _value_table(g, n_base, m, "g")
    if sample_length is None:
        sample_length = max(1 << 15, 4 * (n_steps + 1))
    base_states = ext.base.sample_states(sample_length, seed)
    anchors = _anchors(sample_length, 0, n_steps + 1, n_anchors)
    prefix = _rotation_prefix(ext, base_states)
    g_centered = G - G.mean(axis=1, keepdims=True)
    acc_direct = 0.0
    acc_centered = 0.0
    for t_ in anchors:
        t = int(t_)
        mat_f = _evolved_indicator(F, base_states, t, n_steps + 1, ext.cocycle, prefix)
        f_n = mat_f[n_steps]
        g_row = G[base_states[t]]
        gc_row = g_centered[base_states[t]]
        e_fg = float(np.mean(f_n * g_row))
        e_f = float(np.mean(f_n))
        e_g = float(np.mean(g_row))
        acc_direct += (e_fg - e_f * e_g) ** 2
        acc_centered += float(np.mean(f_n * gc_row)) ** 2
    value = float(np.sqrt(acc_direct / anchors.size))
    centered = float(np.sqrt(acc_centered / anchors.size))
    return RelativeMixingResult(value, centered, abs(value - centered), n_steps)
