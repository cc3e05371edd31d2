"""Seeded batch experiments over sampled cocycle extensions.

Each experiment draws a family of fiber cocycles over a fixed base, runs one
diagnostic per trial, and reports per-trial records plus aggregate pass
rates.  Rates are sampling frequencies over the drawn family; they are
empirical analogues of category statements about typical extensions and are
labeled as such in the report, never as verification of those statements.

Determinism contract: the master seed expands to per-trial seeds through a
fixed 64-bit hash of the trial index, every trial is a pure function of its
payload, and reduction is ordered by trial index, so equal configs produce
equal results at any worker count.
"""

from __future__ import annotations

import csv
import importlib.metadata
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .core import Partition
from .diagnostics import (
    fiber_half_set,
    k_property_check,
    relative_mixing_statistic,
    rwm_verdict,
    vlb_statistic,
    vlb_zero_entropy,
    vwb_statistic,
)
from .entropy import analytic_entropy, entropy_rate_estimate
from .errors import ParameterError, PreconditionError, ValidationError
from .seeds import derive_seed
from .systems import (
    _build_base,
    _load_toml,
    constant_cocycle,
    frozen_cocycle,
    generator_partition,
    random_permutation_cocycle,
    random_rotation_cocycle,
    sample_trajectory,
    skew_product,
)

try:
    TOOL_VERSION = importlib.metadata.version("ergolab")
except importlib.metadata.PackageNotFoundError:
    TOOL_VERSION = "0.0.0"

ROLE_TRIAL = 3
ROLE_BASE_SAMPLE = 4

KINDS = ("entropy", "rwm", "preservation")
CLASSES = ("vwb", "vlb", "kcheck", "relmix")

GOLDEN = 0.6180339887498949


@dataclass
class ExperimentConfig:
    """Everything a batch run depends on, in plain serializable fields."""

    kind: str
    trials: int = 30
    seed: int = 20260825
    sample_length: int = 1_000_000
    workers: int = 1
    klass: Optional[str] = None
    base: Dict = field(default_factory=dict)
    cocycles: Dict = field(default_factory=dict)
    diagnostics: Dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown experiment kind {self.kind!r}")
        if self.trials < 1:
            raise ValidationError("trials must be >= 1")
        if self.kind == "preservation" and self.klass not in CLASSES:
            raise ValidationError(
                f"preservation needs class in {CLASSES}, got {self.klass!r}"
            )

    def to_dict(self) -> dict:
        return asdict(self)


def default_config(kind: str, klass: Optional[str] = None) -> ExperimentConfig:
    """Fully populated defaults for each experiment kind.

    The numbers here are the desk-scale operating points: window sizes where
    the analytic bounds that justify each check hold with slack, trial
    counts where binomial noise cannot blur the expected rates, and sample
    lengths keeping a full batch in the minutes range on one core.
    """
    bernoulli = {"variant": "bernoulli", "p": [0.5, 0.5]}
    if kind == "entropy":
        # m=4 fiber at N=16: the zero-entropy boundary term is capped at
        # log(4)/16 = 0.087 < margin while 4^16 blocks stay resolvable at
        # 10^6 windows, so an entropy-adding fiber is actually detectable
        return ExperimentConfig(
            kind="entropy", trials=50, sample_length=1_000_000,
            base=dict(bernoulli), cocycles={"family": "rotation", "m": 4},
            diagnostics={"entropy": {"n_block": 16, "fiber_depth": 1,
                                     "margin": 0.1}},
        )
    if kind == "rwm":
        return ExperimentConfig(
            kind="rwm", trials=30, sample_length=1 << 17,
            base=dict(bernoulli), cocycles={"family": "rotation", "m": 8},
            diagnostics={"rwm": {"L_schedule": [64, 256, 1024], "M": 2,
                                 "tol": 0.05, "n_anchors": 96}},
        )
    if kind == "preservation":
        if klass == "vwb":
            return ExperimentConfig(
                kind="preservation", klass="vwb", trials=30,
                sample_length=1_000_000, base=dict(bernoulli),
                cocycles={"family": "frozen", "m": 16},
                diagnostics={"vwb": {"n_block": 6, "k_past": 6, "eps": 0.1}},
            )
        if klass == "kcheck":
            # non-commuting fiber maps: the composed map across the
            # conditioning gap then spreads over the whole grid, so the
            # remote window loses track of the fiber phase.  Rotations keep
            # a coset trace the remote past can read off, which kills the
            # remote-independence half of the check
            return ExperimentConfig(
                kind="preservation", klass="kcheck", trials=30,
                sample_length=1_000_000, base=dict(bernoulli),
                cocycles={"family": "permutation", "m": 4},
                diagnostics={"kcheck": {"n_block": 4, "k0": 6, "k1": 12,
                                        "eps": 0.1, "delta": 0.1}},
            )
        if klass == "vlb":
            # the 2-point fiber keeps the realignment cost of a fiber-phase
            # offset inside eps at this block length; larger grids push the
            # resynchronization stretch past the clique tolerance
            return ExperimentConfig(
                kind="preservation", klass="vlb", trials=30,
                sample_length=200_000,
                base={"variant": "rotation", "angle": GOLDEN, "grid": 2},
                cocycles={"family": "rotation", "m": 2},
                diagnostics={"vlb": {"n_block": 64, "eps": 0.25,
                                     "zero_entropy": True, "k_past": 8}},
            )
        if klass == "relmix":
            return ExperimentConfig(
                kind="preservation", klass="relmix", trials=30,
                sample_length=1 << 17, base=dict(bernoulli),
                cocycles={"family": "rotation", "m": 16},
                diagnostics={
                    "relmix": {"n_steps": 64, "tol": 0.05},
                    "kcheck": {"n_block": 4, "k0": 6, "k1": 12,
                               "eps": 0.1, "delta": 0.1},
                },
            )
    raise ValidationError(f"no defaults for kind={kind!r} class={klass!r}")


def load_config(path) -> ExperimentConfig:
    """Read a TOML config; the ERGOLAB_SEED env var overrides the seed."""
    doc = _load_toml(path)
    exp = doc.get("experiment", {})
    kind = exp.get("kind")
    klass = exp.get("class")
    cfg = default_config(kind, klass)
    for key in ("trials", "seed", "sample_length", "workers"):
        if key in exp:
            setattr(cfg, key, int(exp[key]))
    if "base" in doc:
        cfg.base = dict(doc["base"])
    if "cocycles" in doc:
        cfg.cocycles = {**cfg.cocycles, **doc["cocycles"]}
    for name, params in doc.get("diagnostic", {}).items():
        merged = dict(cfg.diagnostics.get(name, {}))
        merged.update(params)
        cfg.diagnostics[name] = merged
    env = os.environ.get("ERGOLAB_SEED")
    if env is not None:
        cfg.seed = int(env)
    cfg.__post_init__()
    return cfg


@dataclass
class ExperimentResult:
    config: Dict
    trials: List[Dict]
    rates: Dict
    version: str

    def to_json_dict(self) -> dict:
        return {"config": self.config, "trials": self.trials,
                "rates": self.rates, "version": self.version}

    @classmethod
    def from_json_dict(cls, doc: dict) -> "ExperimentResult":
        return cls(config=doc["config"], trials=doc["trials"],
                   rates=doc["rates"], version=doc["version"])


def wilson_interval(passes: int, n: int, z: float = 1.959963984540054):
    """95 percent binomial confidence interval for a pass rate."""
    if n == 0:
        return 0.0, 1.0
    p_hat = passes / n
    denom = 1.0 + z * z / n
    center = (p_hat + z * z / (2 * n)) / denom
    half = z * math.sqrt(p_hat * (1 - p_hat) / n + z * z / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def _plain(obj):
    """Recursively strip numpy types so rows survive a JSON round trip."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def _make_cocycle(spec: Dict, base, trial_seed: int):
    family = spec.get("family", "rotation")
    m = int(spec.get("m", 16))
    if family == "rotation":
        driver = Partition.identity(base.n_states)
        return random_rotation_cocycle(driver, m, seed=trial_seed)
    if family == "permutation":
        driver = Partition.identity(base.n_states)
        return random_permutation_cocycle(driver, m, seed=trial_seed)
    if family == "frozen":
        return frozen_cocycle(base.n_states, m)
    if family == "constant":
        return constant_cocycle(base.n_states, m, steps=int(spec.get("steps", 1)))
    raise ValidationError(f"unknown cocycle family {family!r}")


def _sample_class_report(klass: str, traj, params: Dict):
    """Run one trajectory-based class diagnostic; returns (verdict, value, values, flags)."""
    if klass == "vwb":
        rep = vwb_statistic(traj, int(params["n_block"]), int(params["k_past"]),
                            float(params["eps"]))
        return rep.verdict, rep.good_mass, {
            "good_mass": rep.good_mass, "worst_distance": rep.worst_distance,
            "unresolved_mass": rep.unresolved_mass, "n_pasts": rep.n_pasts,
        }, rep.flags
    if klass == "vlb":
        if params.get("zero_entropy", True):
            rep = vlb_zero_entropy(traj, int(params["n_block"]), float(params["eps"]))
            return rep.verdict, rep.good_mass, {
                "good_mass": rep.good_mass, "clique_size": rep.clique_size,
                "support": rep.support,
            }, rep.flags
        rep = vlb_statistic(traj, int(params["n_block"]), int(params["k_past"]),
                            float(params["eps"]))
        return rep.verdict, rep.good_mass, {
            "good_mass": rep.good_mass, "worst_distance": rep.worst_distance,
            "unresolved_mass": rep.unresolved_mass, "n_pasts": rep.n_pasts,
        }, rep.flags
    if klass == "kcheck":
        rep = k_property_check(traj, int(params["n_block"]), int(params["k0"]),
                               int(params["k1"]), eps=float(params["eps"]),
                               delta=float(params["delta"]))
        margin = min(rep.growth_rhs - rep.growth_lhs,
                     rep.remote_lhs - rep.remote_rhs)
        return rep.verdict, margin, {
            "h_hat": rep.h_hat, "growth_lhs": rep.growth_lhs,
            "growth_rhs": rep.growth_rhs, "remote_lhs": rep.remote_lhs,
            "remote_rhs": rep.remote_rhs,
        }, rep.flags
    raise ParameterError(f"no trajectory diagnostic for class {klass!r}")


def _run_trial(payload: Dict) -> Dict:
    kind = payload["kind"]
    trial = int(payload["trial"])
    tseed = derive_seed(int(payload["seed"]), trial, role=ROLE_TRIAL)
    base = _build_base(payload["base"])
    cocycle = _make_cocycle(payload["cocycles"], base, tseed)
    ext = skew_product(base, cocycle)
    length = int(payload["sample_length"])
    diags = payload["diagnostics"]
    if kind == "entropy":
        params = diags["entropy"]
        part = generator_partition(ext, int(params["fiber_depth"]))
        traj = sample_trajectory(ext, part, length, seed=tseed)
        est = entropy_rate_estimate(traj, int(params["n_block"]))
        h_base = float(payload["h_base"])
        margin = float(params["margin"])
        verdict = est.value <= h_base + margin
        row = {"diagnostic": "entropy", "verdict": verdict, "value": est.value,
               "values": {"h_ext": est.value, "h_base": h_base,
                          "margin": margin, "stderr": est.stderr_proxy},
               "flags": list(est.flags)}
    elif kind == "rwm":
        params = diags["rwm"]
        rep = rwm_verdict(ext, L_schedule=params["L_schedule"],
                          M=int(params["M"]), tol=float(params["tol"]),
                          sample_length=length, seed=tseed,
                          n_anchors=int(params["n_anchors"]))
        row = {"diagnostic": "rwm", "verdict": rep.verdict,
               "value": max(rep.values.values()), "values": rep.values,
               "flags": list(rep.flags)}
    elif kind == "preservation":
        klass = payload["klass"]
        if klass == "relmix":
            params = diags["relmix"]
            f = fiber_half_set(base.n_states, ext.m, 0)
            rep = relative_mixing_statistic(ext, f, f, int(params["n_steps"]),
                                            sample_length=length, seed=tseed)
            verdict = rep.value < float(params["tol"])
            row = {"diagnostic": "relmix", "verdict": verdict,
                   "value": rep.value,
                   "values": {"value": rep.value,
                              "centered_value": rep.centered_value,
                              "agreement_gap": rep.agreement_gap},
                   "flags": list(rep.flags)}
        else:
            part = generator_partition(ext, 1)
            traj = sample_trajectory(ext, part, length, seed=tseed)
            verdict, value, values, flags = _sample_class_report(
                klass, traj, diags[klass])
            row = {"diagnostic": klass, "verdict": verdict, "value": value,
                   "values": values, "flags": flags}
    else:
        raise ValidationError(f"unknown experiment kind {kind!r}")
    row["trial"] = trial
    row["seed"] = tseed
    return _plain(row)


def _run_batch(cfg: ExperimentConfig, extra: Optional[Dict] = None) -> ExperimentResult:
    payload = {"kind": cfg.kind, "seed": cfg.seed, "klass": cfg.klass,
               "sample_length": cfg.sample_length, "base": cfg.base,
               "cocycles": cfg.cocycles, "diagnostics": cfg.diagnostics}
    if extra:
        payload.update(extra)
    payloads = [{**payload, "trial": i} for i in range(cfg.trials)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            rows = list(pool.map(_run_trial, payloads))
    else:
        rows = [_run_trial(p) for p in payloads]
    rows.sort(key=lambda r: r["trial"])
    passes = sum(1 for r in rows if r["verdict"])
    lo, hi = wilson_interval(passes, len(rows))
    rates = {"pass_rate": passes / len(rows), "passes": passes,
             "trials": len(rows), "ci95_low": lo, "ci95_high": hi,
             "note": "empirical analogue over a sampled cocycle family"}
    return ExperimentResult(config=_plain(cfg.to_dict()), trials=rows,
                            rates=_plain(rates), version=TOOL_VERSION)


def run_entropy_genericity(cfg: ExperimentConfig) -> ExperimentResult:
    """Fraction of sampled extensions whose estimated entropy rate stays
    within the margin of the base rate.  Zero-entropy fiber maps cannot push
    the rate up, so failures can only come from the estimator itself."""
    if cfg.kind != "entropy":
        raise ValidationError("config kind must be 'entropy'")
    base = _build_base(cfg.base)
    h_base = analytic_entropy(base)
    if h_base is None:
        params = cfg.diagnostics["entropy"]
        pre_seed = derive_seed(cfg.seed, 0, role=ROLE_BASE_SAMPLE)
        traj = sample_trajectory(base, generator_partition(base),
                                 cfg.sample_length, seed=pre_seed)
        h_base = entropy_rate_estimate(traj, int(params["n_block"])).value
    return _run_batch(cfg, extra={"h_base": float(h_base)})


def run_rwm_genericity(cfg: ExperimentConfig) -> ExperimentResult:
    """Pass rate of the relative-weak-mixing verdict over the cocycle family."""
    if cfg.kind != "rwm":
        raise ValidationError("config kind must be 'rwm'")
    return _run_batch(cfg)


def run_class_preservation(cfg: ExperimentConfig,
                           klass: Optional[str] = None) -> ExperimentResult:
    """Pass rate of one class diagnostic on sampled extensions of a base
    that itself passes the diagnostic.

    The base sample is checked first at the configured parameters; a failing
    base refuses the run, because preservation of a property the base lacks
    is not a meaningful measurement.  The relmix class preconditions on the
    K check instead, the base-side hypothesis under which relative mixing of
    extensions is the expected behavior.
    """
    if cfg.kind != "preservation":
        raise ValidationError("config kind must be 'preservation'")
    klass = klass or cfg.klass
    if klass not in CLASSES:
        raise ValidationError(f"class must be one of {CLASSES}")
    cfg.klass = klass
    base = _build_base(cfg.base)
    pre_seed = derive_seed(cfg.seed, 0, role=ROLE_BASE_SAMPLE)
    base_traj = sample_trajectory(base, generator_partition(base),
                                  cfg.sample_length, seed=pre_seed)
    pre_class = "kcheck" if klass == "relmix" else klass
    verdict, value, values, _flags = _sample_class_report(
        pre_class, base_traj, cfg.diagnostics[pre_class])
    if not verdict:
        raise PreconditionError(
            f"base sample fails {pre_class} at the configured parameters "
            f"(primary value {value:.4f}); refusing the preservation run"
        )
    return _run_batch(cfg)


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    if cfg.kind == "entropy":
        return run_entropy_genericity(cfg)
    if cfg.kind == "rwm":
        return run_rwm_genericity(cfg)
    return run_class_preservation(cfg)


# ---------------------------------------------------------------------------
# report files
# ---------------------------------------------------------------------------

CSV_COLUMNS = ["trial", "seed", "diagnostic", "verdict", "value", "flags", "detail"]


def emit_report(result: ExperimentResult, out_dir,
                formats=("csv", "json")) -> List[str]:
    """Write trials.csv and result.json; both byte-stable for equal configs."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    if "csv" in formats:
        path = os.path.join(out_dir, "trials.csv")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for row in result.trials:
                verdict = row.get("verdict")
                writer.writerow([
                    row["trial"],
                    row["seed"],
                    row["diagnostic"],
                    "" if verdict is None else str(bool(verdict)).lower(),
                    repr(float(row["value"])),
                    ";".join(row.get("flags", [])),
                    json.dumps(row.get("values", {}), sort_keys=True,
                               separators=(",", ":")),
                ])
        written.append(path)
    if "json" in formats:
        path = os.path.join(out_dir, "result.json")
        with open(path, "w") as fh:
            fh.write(json.dumps(result.to_json_dict(), sort_keys=True, indent=2))
            fh.write("\n")
        written.append(path)
    return written
