"""Training corpus construction, per-cell evaluation and parameter sweeps."""
from __future__ import annotations

import csv
import json
import logging
import math
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from . import __version__
from .classifiers import (MlpModel, TrainConfig, extract_labels, ffnn_predict, fit_gmm,
                          gmm_classify, train_ffnn, upper_triangle)
from .estimators import estimate
from .features import FeatureSet, build_features, fit_scaler
from .graphs import Graph, erdos_renyi, laplacian_weights, load_edge_list, watts_strogatz
from .moments import analytic_lag_moments, empirical_lag_moments
from .noise import jittered_noise, offset_noise
from .simulator import SimConfig, restrict, simulate

log = logging.getLogger(__name__)

AXES = {"observed_count": "observed_count", "connection_p": "p",
        "beta": "beta", "sample_count": "n"}
MATRIX_ESTIMATORS = {"one_lag_gmm": "one_lag", "nig_gmm": "nig",
                     "precision_gmm": "precision", "granger_gmm": "granger"}
FFNN_ESTIMATORS = {"ffnn_k": "k", "ffnn_f_only": "f"}
ESTIMATORS = tuple(MATRIX_ESTIMATORS) + tuple(FFNN_ESTIMATORS)
TRAIN_BETAS = tuple(range(0, 55, 5))
DESK_N = 100_000
FULL_SCALE_N = 500_000


@dataclass(frozen=True)
class FrozenParams:
    """Every parameter of one evaluation cell except the swept one."""

    n_nodes: int = 30
    p: float = 0.7
    rho: float = 0.8
    observed_count: int = 20
    beta: float = 0.0
    sigma_gap_sq: float = 1.0
    jitter: float = 0.0
    n: int = DESK_N
    d: int = -50
    m: int = 50
    burn_in: int = 1000
    graph: str = "erdos_renyi"
    ring_degree: int = 4
    rewire_p: float = 0.1
    edge_list: Optional[str] = None
    analytic: bool = False

    def with_axis(self, axis: str, value) -> "FrozenParams":
        name = AXES[axis]
        kind = type(getattr(self, name))
        return replace(self, **{name: kind(value)})


@dataclass(frozen=True)
class TrainParams:
    corpus_seed: int = 0
    n_nodes: int = 50
    p: float = 0.5
    rho: float = 0.8
    n: int = DESK_N
    betas: tuple = TRAIN_BETAS
    hidden_sizes: tuple = (32, 32)
    learning_rate: float = 0.05
    epochs: int = 50
    batch_size: int = 256
    seed: int = 0
    class_weighting: bool = True

    def train_config(self) -> TrainConfig:
        return TrainConfig(hidden_sizes=self.hidden_sizes, learning_rate=self.learning_rate,
                           epochs=self.epochs, batch_size=self.batch_size, seed=self.seed,
                           class_weighting=self.class_weighting)


@dataclass
class SweepConfig:
    axis: str
    axis_values: list
    frozen: FrozenParams = field(default_factory=FrozenParams)
    estimators: tuple = ("one_lag_gmm", "nig_gmm", "precision_gmm", "granger_gmm", "ffnn_k")
    seeds_per_cell: int = 5
    master_seed: int = 0
    output_path: str = "report.csv"
    train: TrainParams = field(default_factory=TrainParams)
    workers: int = 1

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"unknown axis {self.axis!r}; expected one of {sorted(AXES)}")
        if not self.axis_values:
            raise ValueError("axis_values must be nonempty")
        if any(b <= a for a, b in zip(self.axis_values, self.axis_values[1:])):
            raise ValueError("axis_values must be strictly increasing")
        if self.seeds_per_cell < 1:
            raise ValueError("seeds_per_cell must be at least 1")
        unknown = set(self.estimators) - set(ESTIMATORS)
        if unknown:
            raise ValueError(f"unknown estimators {sorted(unknown)}")
        self.estimators = tuple(self.estimators)

    @classmethod
    def from_dict(cls, raw: dict) -> "SweepConfig":
        raw = dict(raw)
        frozen = FrozenParams(**raw.pop("frozen", {}))
        train = raw.pop("train", {})
        for key in ("betas", "hidden_sizes"):
            if key in train:
                train[key] = tuple(train[key])
        return cls(frozen=frozen, train=TrainParams(**train), **raw)

    @classmethod
    def load(cls, path) -> "SweepConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["estimators"] = list(self.estimators)
        return out


@dataclass(frozen=True)
class CellResult:
    axis_value: float
    estimator: str
    seed: int
    accuracy: float
    error: str = ""


@dataclass
class AccuracyReport:
    axis: str
    rows: list

    def aggregates(self) -> dict:
        """``(axis_value, estimator) -> (median, q25, q75)`` over successful seeds."""
        groups: dict = {}
        for r in self.rows:
            if not r.error:
                groups.setdefault((r.axis_value, r.estimator), []).append(r.accuracy)
        return {key: (float(np.median(v)), float(np.percentile(v, 25)), float(np.percentile(v, 75)))
                for key, v in sorted(groups.items())}

    def median(self, axis_value, estimator) -> float:
        return self.aggregates()[(axis_value, estimator)][0]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["axis_value", "estimator", "seed", "accuracy", "error"])
            for r in self.rows:
                w.writerow([r.axis_value, r.estimator, r.seed,
                            "" if r.error else repr(r.accuracy), r.error])

    @classmethod
    def from_csv(cls, path, axis: str = "") -> "AccuracyReport":
        rows = []
        with open(path, newline="") as fh:
            for rec in csv.DictReader(fh):
                err = rec.get("error", "")
                rows.append(CellResult(float(rec["axis_value"]), rec["estimator"], int(rec["seed"]),
                                       math.nan if err else float(rec["accuracy"]), err))
        return cls(axis, rows)


def accuracy(predicted, truth) -> float:
    """Fraction of unordered observed pairs whose connected/disconnected label matches.

    Either argument may be a symmetric boolean matrix (its strict upper triangle is
    used) or a flat vector of unordered-pair labels in the same order.
    """
    pred, true = (np.asarray(x, dtype=bool) for x in (predicted, truth))
    pred = upper_triangle(pred) if pred.ndim == 2 else pred
    true = upper_triangle(true) if true.ndim == 2 else true
    if pred.shape != true.shape:
        raise ValueError(f"pair sets differ: {pred.shape} vs {true.shape}")
    if pred.size == 0:
        raise ValueError("no pairs to score")
    return float((pred == true).mean())


def cell_seed(master: int, axis_index: int, estimator_index: int, replicate: int) -> int:
    """Counter-based seed, independent of execution order."""
    ss = np.random.SeedSequence([master, axis_index, estimator_index, replicate])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def make_graph(frozen: FrozenParams, seed: int) -> Graph:
    if frozen.graph == "erdos_renyi":
        return erdos_renyi(frozen.n_nodes, frozen.p, seed)
    if frozen.graph == "watts_strogatz":
        return watts_strogatz(frozen.n_nodes, frozen.ring_degree, frozen.rewire_p, seed)
    if frozen.graph == "edge_list":
        if not frozen.edge_list:
            raise ValueError("graph='edge_list' requires an edge_list path")
        with open(frozen.edge_list, "rb") as fh:
            return load_edge_list(fh)
    raise ValueError(f"unknown graph family {frozen.graph!r}")


def standardize_per_dataset(fs: FeatureSet) -> FeatureSet:
    """Standard-scale the design block over this dataset's own pairs.

    This is the drift correction applied to every time series before the pooled
    (stored) scaler; it removes offsets shared by all pairs of one network.
    """
    return fit_scaler(fs)


def build_training_corpus(seed: int, params: TrainParams = TrainParams(), feature: str = "k",
                          d: int = -50, m: int = 50, sigma_gap_sq: float = 1.0) -> FeatureSet:
    """Pool labelled, scaled pair features from one random network excited at every offset.

    One Erdos-Renyi graph is weighted by the Laplacian rule; for each offset in
    ``params.betas`` a fully observed series is simulated, features are
    standardised per dataset, and finally one scaler is fitted on the pool.
    """
    rng = np.random.default_rng(seed)
    g = erdos_renyi(params.n_nodes, params.p, int(rng.integers(2**32)))
    a = laplacian_weights(g, params.rho)
    labels = extract_labels(a, range(params.n_nodes)).labels
    blocks, pairs = [], []
    for beta in params.betas:
        noise = offset_noise(params.n_nodes, sigma_gap_sq, float(beta))
        ts = simulate(a, noise, params.n, SimConfig(extra_tail=max(m, -d), seed=int(rng.integers(2**32))))
        fs = standardize_per_dataset(build_features(empirical_lag_moments(ts, d, m), feature))
        blocks.append(fs.design)
        pairs.append(fs.pairs)
        log.info("training corpus: beta=%g done", beta)
    x = np.vstack(blocks)
    pooled = FeatureSet(pairs=np.vstack(pairs), **{feature: x},
                        labels=np.tile(labels, len(params.betas)))
    return fit_scaler(pooled)


def train_model(params: TrainParams = TrainParams(), feature: str = "k", d: int = -50, m: int = 50) -> MlpModel:
    corpus = build_training_corpus(params.corpus_seed, params, feature, d, m)
    return train_ffnn(corpus, params.train_config())


def _gmm_decision(est) -> np.ndarray:
    sym = est.symmetrized()
    if est.kind == "precision":
        # partial correlations are negative for coupled pairs; classify by magnitude
        sym = np.abs(sym)
    values = upper_triangle(sym)
    if values.size < 4 or np.ptp(values) == 0:
        return np.zeros(sym.shape, dtype=bool)
    return gmm_classify(fit_gmm(values), sym)


def evaluate_cell(frozen: FrozenParams, estimator: str, seed: int,
                  models: Optional[dict] = None) -> float:
    """Accuracy of one estimator on one freshly generated network/series."""
    ss = np.random.SeedSequence(seed)
    graph_seed, noise_seed, sim_seed, obs_seed = (int(s.generate_state(1)[0]) for s in ss.spawn(4))
    g = make_graph(frozen, graph_seed)
    n_nodes = g.node_count
    a = laplacian_weights(g, frozen.rho)
    if frozen.jitter > 0:
        noise = jittered_noise(n_nodes, frozen.sigma_gap_sq, frozen.beta, frozen.jitter, noise_seed)
    else:
        noise = offset_noise(n_nodes, frozen.sigma_gap_sq, frozen.beta)
    s_count = min(frozen.observed_count, n_nodes)
    s = sorted(np.random.default_rng(obs_seed).permutation(n_nodes)[:s_count].tolist())
    if frozen.analytic:
        moments = analytic_lag_moments(a, noise, frozen.d, frozen.m, s)
    else:
        reach = max(frozen.m, -frozen.d)
        ts = simulate(a, noise, frozen.n, SimConfig(burn_in=frozen.burn_in, extra_tail=reach, seed=sim_seed))
        moments = empirical_lag_moments(restrict(ts, s), frozen.d, frozen.m)
    truth = a.restrict(s) != 0
    if estimator in MATRIX_ESTIMATORS:
        pred = _gmm_decision(estimate(moments, MATRIX_ESTIMATORS[estimator]))
    elif estimator in FFNN_ESTIMATORS:
        model = (models or {}).get(estimator)
        if model is None:
            raise ValueError(f"estimator {estimator!r} needs a trained model")
        fs = standardize_per_dataset(build_features(moments, FFNN_ESTIMATORS[estimator]))
        pred = ffnn_predict(model, fs).adjacency(s)
    else:
        raise ValueError(f"unknown estimator {estimator!r}")
    return accuracy(pred, truth)


def _run_cell(job):
    frozen, axis_value, estimator, rep, seed, models = job
    try:
        acc = evaluate_cell(frozen, estimator, seed, models)
        return CellResult(axis_value, estimator, rep, acc)
    except Exception as exc:  # recorded per cell; the sweep carries on
        log.warning("cell (%s, %s, %d) failed: %s", axis_value, estimator, rep, exc)
        return CellResult(axis_value, estimator, rep, math.nan, f"{type(exc).__name__}: {exc}")


def run_sweep(cfg: SweepConfig, models: Optional[dict] = None, write: bool = True) -> AccuracyReport:
    """Evaluate every (axis value, estimator, replicate) cell and write the report files."""
    models = dict(models or {})
    for name in cfg.estimators:
        if name in FFNN_ESTIMATORS and name not in models:
            log.info("training %s", name)
            models[name] = train_model(cfg.train, FFNN_ESTIMATORS[name], cfg.frozen.d, cfg.frozen.m)
    jobs = []
    for ai, value in enumerate(cfg.axis_values):
        frozen = cfg.frozen.with_axis(cfg.axis, value)
        for ei, name in enumerate(cfg.estimators):
            needed = {name: models[name]} if name in models else None
            for rep in range(cfg.seeds_per_cell):
                jobs.append((frozen, float(value), name, rep,
                             cell_seed(cfg.master_seed, ai, ei, rep), needed))
    started = time.time()
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            rows = list(pool.map(_run_cell, jobs))
    else:
        rows = [_run_cell(j) for j in jobs]
    order = {name: i for i, name in enumerate(cfg.estimators)}
    rows.sort(key=lambda r: (r.axis_value, order[r.estimator], r.seed))
    report = AccuracyReport(cfg.axis, rows)
    if write:
        write_outputs(cfg, report, time.time() - started)
    return report


def write_outputs(cfg: SweepConfig, report: AccuracyReport, elapsed: float) -> None:
    path = cfg.output_path
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    report.to_csv(path)
    stem = os.path.splitext(path)[0]
    meta = {
        "config": cfg.to_dict(),
        "cell_seeds": {f"{ai}/{ei}/{rep}": cell_seed(cfg.master_seed, ai, ei, rep)
                       for ai in range(len(cfg.axis_values))
                       for ei in range(len(cfg.estimators))
                       for rep in range(cfg.seeds_per_cell)},
        "aggregates": [{"axis_value": k[0], "estimator": k[1], "median": v[0], "q25": v[1], "q75": v[2]}
                       for k, v in report.aggregates().items()],
        "elapsed_seconds": elapsed,
        "versions": {"lagnet": __version__, "numpy": np.__version__,
                     "python": platform.python_version()},
    }
    with open(stem + ".meta.json", "w") as fh:
        json.dump(meta, fh, indent=2)
    from .plotting import write_svg

    write_svg(report, stem + ".svg", xlabel=cfg.axis)
