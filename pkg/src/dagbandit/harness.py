"""Dataset generation, experiment configuration, seeded replication runner
and report emission.

A run writes one JSON record per replication (streaming-safe JSON lines) and
prints an aligned aggregate summary.  Identical configuration and base seed
give byte-identical records, wall-time fields excluded.
"""

from __future__ import annotations

import dataclasses
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import engine as _engine
from .bai import BaiParams, BaiReport, full_dag, initial_dag, run_bai
from .bli import BliParams, BliReport, run_bli
from .bounds import ExplorationFn
from .feature_space import (
    FeatureLattice,
    FixedDepthLattice,
    FixedDepthTree,
    RaveTable,
    fuse_run,
)
from .oracles import (
    Dataset,
    load_csv,
    load_madelon,
    make_fs_oracles,
    make_sigmoid_bernoulli_oracles,
    sigmoid_mean,
)
from .theory import (
    GapsUndefinedError,
    InapplicableBoundError,
    gaps,
    h_eps,
    second_term_thm1,
    tau_max_thm2,
    tau_ub_thm1,
    value_map,
)

__all__ = [
    "APPENDIX_B_SCORES",
    "ExperimentConfig",
    "gen_linear",
    "run_experiment",
    "sweep_b",
    "theory_report",
]

# Benchmark feature scores used by the fixed lattice/tree comparisons.
APPENDIX_B_SCORES = (-0.3, 0.0, 0.03, 0.3, 0.4, 0.5)


def gen_linear(seed: int = 0) -> Dataset:
    """Synthetic linear dataset: 300 examples, 30 features.

    Columns x, y, z are uniform on [0,1]; labels are the sign of
    0.1x - 0.8y + 0.6z.  Seven redundant columns are noisy copies of x, y, z
    in rotation (sigma = 0.05, clipped to [0,1]) and twenty more are
    independent uniform noise.
    """
    rng = np.random.default_rng(seed)
    xyz = rng.random((300, 3))
    redundant = np.empty((300, 7))
    for i in range(7):
        base = xyz[:, i % 3]
        redundant[:, i] = np.clip(base + rng.normal(0.0, 0.05, size=300), 0.0, 1.0)
    noise = rng.random((300, 20))
    X = np.hstack([xyz, redundant, noise])
    labels = (0.1 * xyz[:, 0] - 0.8 * xyz[:, 1] + 0.6 * xyz[:, 2] > 0).astype(np.int64)
    names = (
        ["x", "y", "z"]
        + [f"r{i}" for i in range(7)]
        + [f"n{i}" for i in range(20)]
    )
    return Dataset(X=X, y=labels, feature_names=names)


@dataclass
class ExperimentConfig:
    """One experiment: an algorithm, a domain, oracles and run parameters."""

    algorithm: str  # bai | bli | fuse
    domain: str = "lattice"  # lattice | tree | flat | fs
    epsilon: float = 0.0
    delta: float = 0.1
    b: float = 0.0
    beta: str = "practical"  # theory | practical
    reps: int = 1
    base_seed: int = 0
    max_steps: int = 100_000_000
    jobs: int = 1
    out: str | None = None
    # domain knobs
    scores: tuple = APPENDIX_B_SCORES
    n_features: int = 6
    d_l: int = 3
    dataset_path: str | None = None
    dataset_seed: int = 0
    # oracle knobs
    m: int = 50
    k: int = 5
    q: float = 0.9
    # bli / fuse knobs
    init_width: int = 7
    c_l: float = 100.0
    budget: int = 0
    engine: str = "auto"  # auto | python | kernel

    def __post_init__(self) -> None:
        if self.algorithm not in ("bai", "bli", "fuse"):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.domain not in ("lattice", "tree", "flat", "fs"):
            raise ValueError(f"unknown domain {self.domain!r}")
        if self.beta not in ("theory", "practical"):
            raise ValueError(f"unknown beta variant {self.beta!r}")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")


def _build_domain(config: ExperimentConfig):
    if config.domain == "lattice":
        return FixedDepthLattice(config.n_features, config.d_l)
    if config.domain == "tree":
        return FixedDepthTree(config.n_features, config.d_l)
    if config.domain == "flat":
        return FixedDepthLattice(config.n_features, config.n_features)
    raise ValueError("fs domain is built from the dataset")


def _load_dataset(config: ExperimentConfig) -> Dataset:
    path = config.dataset_path
    if path is None or path == "linear":
        return gen_linear(config.dataset_seed)
    if ":" in str(path) and str(path).startswith("madelon:"):
        data_path, labels_path = str(path)[len("madelon:") :].split(",")
        return load_madelon(data_path, labels_path)
    return load_csv(path)


def _mu_fn(config: ExperimentConfig):
    if config.domain == "flat":
        return lambda key: 0.5
    scores = config.scores
    return lambda key: sigmoid_mean(scores, key)


def _kernel_eligible(config: ExperimentConfig) -> bool:
    return config.algorithm == "bai" and config.domain in ("lattice", "tree", "flat")


def _report_record(report, config: ExperimentConfig, key_str) -> dict:
    rec = dataclasses.asdict(report)
    rec["recommended"] = key_str(report.recommended)
    rec.pop("recommended_id", None)
    rec.pop("per_stage_samples", None)
    rec["algorithm"] = config.algorithm
    return rec


def _one_rep(config: ExperimentConfig, seed: int):
    beta = ExplorationFn(config.beta, config.delta)
    if config.algorithm == "bai":
        if _kernel_eligible(config) and config.engine in ("auto", "kernel"):
            domain = _build_domain(config)
            ed = _engine.build_enumerated(domain, _mu_fn(config))
            n_init = ed.n_nodes if config.b == 0.0 else ed.n_init_depth_one()
            beta_mode = (
                _engine.BETA_THEORY
                if config.beta == "theory"
                else _engine.BETA_PRACTICAL
            )
            report, _ = _engine.kernel_run_bai(
                ed, n_init, config.epsilon, config.delta, config.b,
                beta_mode, _engine.SAMPLE_WIDEST, config.max_steps, seed,
            )
            return report, domain
        if config.domain == "fs":
            data = _load_dataset(config)
            domain = FeatureLattice(data.n_features)
            oracles = make_fs_oracles(data, m=config.m, k=config.k, q=config.q)
            dag = initial_dag(domain, beta)
        else:
            domain = _build_domain(config)
            oracles = make_sigmoid_bernoulli_oracles(config.scores)
            if config.b == 0.0:
                dag = full_dag(domain, beta)
            else:
                dag = initial_dag(domain, beta)
        params = BaiParams(
            epsilon=config.epsilon, delta=config.delta, b=config.b,
            max_steps=config.max_steps, seed=seed,
        )
        return run_bai(dag, domain, oracles, params), domain
    if config.algorithm == "bli":
        if config.domain == "fs":
            data = _load_dataset(config)
            domain = FeatureLattice(data.n_features)
            oracles = make_fs_oracles(data, m=config.m, k=config.k, q=config.q)
            rave = RaveTable(c_l=config.c_l)
        else:
            domain = _build_domain(config)
            oracles = make_sigmoid_bernoulli_oracles(config.scores)
            rave = None
        dag = initial_dag(domain, beta)
        params = BliParams(
            epsilon=config.epsilon, delta=config.delta, b=config.b,
            max_steps=config.max_steps, seed=seed, init_width=config.init_width,
        )
        return run_bli(dag, domain, oracles, params, rave=rave), domain
    # fuse
    data = _load_dataset(config)
    domain = FeatureLattice(data.n_features)
    oracles = make_fs_oracles(data, m=config.m, k=config.k, q=config.q)
    report = fuse_run(
        domain, oracles,
        budget=config.budget, b=config.b if config.b > 0 else 0.3,
        c_l=config.c_l, seed=seed,
    )
    return report, domain


def _worker(args):
    config_dict, seed = args
    config = ExperimentConfig(**config_dict)
    report, domain = _one_rep(config, seed)
    return _report_record(report, config, domain.key_str)


def run_experiment(config: ExperimentConfig) -> list[dict]:
    """Execute seeded replications (seeds base_seed + i), write JSON-line
    records and print an aggregate summary.  Returns the records."""
    seeds = [config.base_seed + i for i in range(config.reps)]
    records: list[dict] = []
    failures = 0
    if config.jobs > 1:
        args = [(dataclasses.asdict(config), s) for s in seeds]
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            for rec in pool.map(_worker, args):
                records.append(rec)
    else:
        for seed in seeds:
            try:
                report, domain = _one_rep(config, seed)
            except Exception as exc:  # per-run error records, keep going
                records.append({"seed": seed, "error": str(exc)})
                failures += 1
                continue
            records.append(_report_record(report, config, domain.key_str))
    if config.out:
        with open(config.out, "w") as fh:
            for rec in records:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
    _print_summary(records, file=sys.stdout)
    if failures == len(records) and failures > 0:
        raise RuntimeError("all replications failed")
    return records


def summarize(records: list[dict]) -> dict:
    ok = [r for r in records if "error" not in r]
    out = {"reps": len(records), "failed": len(records) - len(ok)}
    if not ok:
        return out
    for field_name in ("samples", "node_updates", "node_updates_naive", "expansions"):
        vals = [r[field_name] for r in ok if field_name in r]
        if vals:
            out[f"{field_name}_mean"] = float(np.mean(vals))
            out[f"{field_name}_std"] = float(np.std(vals))
    recos = [r["recommended"] for r in ok if "recommended" in r]
    out["recommendations"] = {r: recos.count(r) for r in sorted(set(recos))}
    if any("value_estimate" in r for r in ok):
        vals = [r["value_estimate"] for r in ok if r.get("value_estimate") == r.get("value_estimate")]
        if vals:
            out["value_mean"] = float(np.mean(vals))
        out["n_features_mean"] = float(np.mean([r["n_features"] for r in ok if "n_features" in r]))
    out["all_stopped"] = all(r.get("stopped", False) for r in ok)
    return out


def _print_summary(records: list[dict], file) -> None:
    agg = summarize(records)
    print(f"reps: {agg['reps']}  failed: {agg['failed']}", file=file)
    for key in (
        "samples_mean", "samples_std", "node_updates_mean",
        "node_updates_naive_mean", "expansions_mean", "value_mean",
        "n_features_mean",
    ):
        if key in agg:
            print(f"{key:24s} {agg[key]:,.2f}", file=file)
    if "recommendations" in agg:
        print("recommendations:", file=file)
        for reco, count in agg["recommendations"].items():
            print(f"  {reco:24s} {count}", file=file)
    if "all_stopped" in agg:
        print(f"all_stopped: {agg['all_stopped']}", file=file)


def theory_report(
    domain_kind: str,
    scores,
    d_l: int,
    epsilon: float,
    delta: float,
    b: float | None = None,
    n_features: int | None = None,
) -> dict:
    """Exact complexity quantities for an enumerable benchmark domain."""
    if n_features is None:
        n_features = len(scores)
    if domain_kind == "lattice":
        domain = FixedDepthLattice(n_features, d_l)
        n_leaves = domain.n_leaves()
    elif domain_kind == "tree":
        domain = FixedDepthTree(n_features, d_l)
        n_leaves = domain.n_leaves()
    else:
        raise ValueError(f"unknown theory domain {domain_kind!r}")
    values = value_map(domain, lambda k: sigmoid_mean(scores, k))
    out: dict = {"domain": domain_kind, "n_leaves": n_leaves}
    try:
        g = gaps(domain, values)
        delta_star = g.delta_star
        out["delta_star"] = delta_star
    except GapsUndefinedError:
        delta_star = 0.0
        out["delta_star"] = None
    h = h_eps(domain, values, epsilon, delta_star=delta_star)
    out["h_eps"] = h
    out["tau_ub"] = tau_ub_thm1(h, n_leaves, delta)
    second, undefined = second_term_thm1(domain, values, epsilon, delta_star=delta_star)
    out["thm1_second_term"] = second
    out["thm1_second_term_undefined_leaves"] = undefined
    if b is not None:
        gap = max(delta_star, epsilon)
        try:
            exact, closed = tau_max_thm2(delta, gap, b)
            out["tau_max"] = exact
            out["tau_max_closed_form"] = closed
        except (InapplicableBoundError, ValueError) as exc:
            out["tau_max"] = None
            out["tau_max_note"] = str(exc)
    return out


def sweep_b(
    b_values,
    reps: int = 10,
    n_features: int = 15,
    epsilon: float = 0.05,
    delta: float = 0.1,
    base_seed: int = 0,
    max_steps: int = 100_000_000,
) -> list[dict]:
    """Expansion-parameter sweep on the flat-value domain (|L0| arms, all
    means 0.5): per b, the empirical mean stopping time over seeded runs and
    the Theorem-2 bound."""
    domain = FixedDepthLattice(n_features, n_features)
    ed = _engine.build_enumerated(domain, lambda key: 0.5)
    n_init = ed.n_init_depth_one()
    rows: list[dict] = []
    for b in b_values:
        taus = []
        violations = 0
        for i in range(reps):
            report, v = _engine.kernel_run_bai(
                ed, n_init, epsilon, delta, b, _engine.BETA_THEORY,
                _engine.SAMPLE_WIDEST, max_steps, base_seed + i,
                check_prop1=True,
            )
            taus.append(report.samples)
            violations += v
        try:
            tau_max, tau_closed = tau_max_thm2(delta, epsilon, b)
        except InapplicableBoundError as exc:
            tau_max, tau_closed = None, None
        rows.append(
            {
                "b": b,
                "mean_samples": float(np.mean(taus)),
                "std_samples": float(np.std(taus)),
                "tau_max": tau_max,
                "tau_max_closed_form": tau_closed,
                "prop1_violations": violations,
                "reps": reps,
            }
        )
    return rows
