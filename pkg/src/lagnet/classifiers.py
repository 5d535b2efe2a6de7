"""Pair classifiers: a two-component 1-D Gaussian mixture and a small feedforward network."""
from __future__ import annotations

import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .features import FeatureSet, Scaler
from .graphs import InteractionMatrix

VAR_FLOOR = 1e-12
MLP_MAGIC = b"LAGNET-MLP-1\n"


# --------------------------------------------------------------------------- GMM

@dataclass(frozen=True)
class Gmm1d:
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    iterations_run: int
    final_log_likelihood: float
    log_likelihoods: tuple = field(default=(), repr=False)

    def posterior(self, x) -> np.ndarray:
        """Responsibilities, shape ``(len(x), 2)``."""
        logp = _component_logpdf(np.asarray(x, dtype=float).ravel(), self)
        return np.exp(logp - _logsumexp(logp)[:, None])

    @property
    def upper(self) -> int:
        return int(np.argmax(self.means))


def _component_logpdf(x, model) -> np.ndarray:
    w, mu, var = model.weights, model.means, model.variances
    return (np.log(w) - 0.5 * np.log(2 * np.pi * var)
            - 0.5 * (x[:, None] - mu) ** 2 / var)


def _logsumexp(a) -> np.ndarray:
    top = a.max(axis=1)
    return top + np.log(np.exp(a - top[:, None]).sum(axis=1))


def fit_gmm(values, max_iters: int = 500, tol: float = 1e-9) -> Gmm1d:
    """Expectation maximisation for a two-component 1-D Gaussian mixture.

    Starts from the 10th/90th percentiles as means, equal weights and the overall
    variance for both components; stops once the total log-likelihood improves by
    less than ``tol``.
    """
    x = np.asarray(values, dtype=float).ravel()
    if x.size < 4:
        raise ValueError("fit_gmm needs at least 4 values")
    if np.ptp(x) == 0:
        raise ValueError("fit_gmm: all values are equal")
    var0 = max(float(x.var()), VAR_FLOOR)
    model = Gmm1d(weights=np.array([0.5, 0.5]),
                  means=np.percentile(x, [10, 90]).astype(float),
                  variances=np.array([var0, var0]), iterations_run=0,
                  final_log_likelihood=-math.inf)
    lls = [float(_logsumexp(_component_logpdf(x, model)).sum())]
    it = 0
    while it < max_iters:
        it += 1
        logp = _component_logpdf(x, model)
        norm = _logsumexp(logp)
        resp = np.exp(logp - norm[:, None])
        nk = np.maximum(resp.sum(axis=0), 1e-300)
        weights = nk / nk.sum()
        means = (resp * x[:, None]).sum(axis=0) / nk
        variances = np.maximum((resp * (x[:, None] - means) ** 2).sum(axis=0) / nk, VAR_FLOOR)
        model = Gmm1d(weights, means, variances, it, -math.inf)
        lls.append(float(_logsumexp(_component_logpdf(x, model)).sum()))
        if lls[-1] - lls[-2] < tol:
            break
    return Gmm1d(model.weights, model.means, model.variances, it, lls[-1], tuple(lls))


def upper_triangle(m: np.ndarray) -> np.ndarray:
    return m[np.triu_indices(m.shape[0], 1)]


def gmm_classify(model: Gmm1d, est) -> np.ndarray:
    """Connected iff the larger-mean component owns the symmetrised entry with posterior > 1/2.

    ``est`` is a :class:`MatrixEstimate` or an already symmetric square array.
    """
    sym = est.symmetrized() if hasattr(est, "symmetrized") else np.asarray(est, dtype=float)
    post = model.posterior(sym.ravel())[:, model.upper].reshape(sym.shape)
    out = post > 0.5
    np.fill_diagonal(out, False)
    return out & out.T


# --------------------------------------------------------------------------- MLP

@dataclass(frozen=True)
class TrainConfig:
    hidden_sizes: tuple = (32, 32)
    learning_rate: float = 0.05
    epochs: int = 50
    batch_size: int = 256
    seed: int = 0
    class_weighting: bool = True

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if not self.hidden_sizes or min(self.hidden_sizes) < 1:
            raise ValueError("hidden_sizes must be positive")
        if self.learning_rate <= 0 or self.epochs < 1 or self.batch_size < 1:
            raise ValueError("learning_rate, epochs and batch_size must be positive")


@dataclass
class MlpModel:
    """ReLU hidden layers and a single logistic output unit."""

    weights: list
    biases: list
    scaler: Optional[Scaler] = None
    config: TrainConfig = field(default_factory=TrainConfig)
    loss_trace: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("need one bias vector per weight matrix")
        for w, b in zip(self.weights, self.biases):
            if w.shape[1] != b.shape[0]:
                raise ValueError("bias size does not match layer width")
        for w0, w1 in zip(self.weights, self.weights[1:]):
            if w0.shape[1] != w1.shape[0]:
                raise ValueError("consecutive layer sizes disagree")
        if self.weights[-1].shape[1] != 1:
            raise ValueError("output layer must have a single unit")

    @property
    def layer_sizes(self) -> list:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(serialize_mlp(self))

    @classmethod
    def load(cls, path) -> "MlpModel":
        with open(path, "rb") as fh:
            return deserialize_mlp(fh.read())


def init_mlp(input_dim: int, cfg: TrainConfig) -> MlpModel:
    """He-initialised weights, zero biases."""
    rng = np.random.default_rng(cfg.seed)
    sizes = [input_dim, *cfg.hidden_sizes, 1]
    weights = [rng.standard_normal((a, b)) * math.sqrt(2.0 / a) for a, b in zip(sizes, sizes[1:])]
    biases = [np.zeros(b) for b in sizes[1:]]
    return MlpModel(weights, biases, config=cfg)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def forward(model: MlpModel, x: np.ndarray):
    """Return the output probabilities and the per-layer activations needed for backprop."""
    acts = [x]
    h = x
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        h = np.maximum(h @ w + b, 0.0)
        acts.append(h)
    z = h @ model.weights[-1] + model.biases[-1]
    return _sigmoid(z[:, 0]), z[:, 0], acts


def weighted_bce(z: np.ndarray, y: np.ndarray, sample_w: np.ndarray) -> float:
    # log(1 + e^z) - y z, computed stably
    per = np.logaddexp(0.0, z) - y * z
    return float((sample_w * per).sum() / sample_w.sum())


def loss_and_grads(model: MlpModel, x: np.ndarray, y: np.ndarray, sample_w: np.ndarray):
    """Class-weighted binary cross-entropy and its gradients w.r.t. every weight and bias."""
    prob, z, acts = forward(model, x)
    loss = weighted_bce(z, y, sample_w)
    delta = ((prob - y) * sample_w / sample_w.sum())[:, None]
    gw, gb = [None] * len(model.weights), [None] * len(model.biases)
    for layer in range(len(model.weights) - 1, -1, -1):
        gw[layer] = acts[layer].T @ delta
        gb[layer] = delta.sum(axis=0)
        if layer:
            delta = (delta @ model.weights[layer].T) * (acts[layer] > 0)
    return loss, gw, gb


def class_weights(y: np.ndarray, enabled: bool) -> np.ndarray:
    if not enabled:
        return np.ones_like(y, dtype=float)
    pos = y.sum()
    neg = y.size - pos
    w = np.ones_like(y, dtype=float)
    if pos and neg:
        w[y == 1] = y.size / (2.0 * pos)
        w[y == 0] = y.size / (2.0 * neg)
    return w


def train_ffnn(train: FeatureSet, cfg: TrainConfig = TrainConfig()) -> MlpModel:
    """Mini-batch gradient descent on class-weighted cross-entropy.

    ``train`` should already be scaled; its scaler is stored with the model and
    re-applied by :func:`ffnn_predict`. Shuffling uses a generator seeded from
    ``cfg.seed`` so runs are reproducible.
    """
    if train.labels is None:
        raise ValueError("training features carry no labels")
    x = np.asarray(train.design, dtype=float)
    y = train.labels.astype(float)
    if x.shape[0] != y.shape[0]:
        raise ValueError("feature rows and labels disagree in length")
    model = init_mlp(x.shape[1], cfg)
    model.scaler = train.scaler
    sample_w = class_weights(y, cfg.class_weighting)
    rng = np.random.default_rng([cfg.seed, 1])
    lr = cfg.learning_rate
    for _ in range(cfg.epochs):
        order = rng.permutation(x.shape[0])
        for start in range(0, x.shape[0], cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            _, gw, gb = loss_and_grads(model, x[idx], y[idx], sample_w[idx])
            for layer in range(len(model.weights)):
                model.weights[layer] -= lr * gw[layer]
                model.biases[layer] -= lr * gb[layer]
        _, z, _ = forward(model, x)
        model.loss_trace.append(weighted_bce(z, y, sample_w))
    return model


@dataclass(frozen=True)
class PairPrediction:
    pairs: np.ndarray
    probabilities: np.ndarray
    decisions: np.ndarray

    def adjacency(self, observed) -> np.ndarray:
        """Symmetric boolean matrix over ``observed`` (positions follow its sorted order)."""
        pos = {int(node): r for r, node in enumerate(sorted(int(i) for i in observed))}
        out = np.zeros((len(pos), len(pos)), dtype=bool)
        for (i, j), d in zip(self.pairs, self.decisions):
            out[pos[int(i)], pos[int(j)]] = d
        return out


def ffnn_predict(model: MlpModel, fs: FeatureSet, cutoff: float = 0.5, scale: bool = True) -> PairPrediction:
    """Per-pair connection probabilities; decisions are OR-symmetrised over ``(i, j)``/``(j, i)``."""
    x = np.asarray(fs.design, dtype=float)
    if x.shape[1] != model.input_dim:
        raise ValueError(f"features have dimension {x.shape[1]}, model expects {model.input_dim}")
    if scale and model.scaler is not None:
        x = model.scaler.transform(x)
    prob, _, _ = forward(model, x)
    raw = prob > cutoff
    lookup = {(int(i), int(j)): r for r, (i, j) in enumerate(fs.pairs)}
    decisions = raw.copy()
    for r, (i, j) in enumerate(fs.pairs):
        mirror = lookup.get((int(j), int(i)))
        if mirror is not None:
            decisions[r] = raw[r] or raw[mirror]
    return PairPrediction(fs.pairs, prob, decisions)


def extract_labels(a: InteractionMatrix, s) -> FeatureSet:
    """Ground-truth connectivity ``A_ij != 0`` for every ordered pair of distinct nodes in ``s``."""
    from .features import ordered_pairs

    pairs = ordered_pairs(sorted(int(i) for i in s))
    labels = a.entries[pairs[:, 0], pairs[:, 1]] != 0
    return FeatureSet(pairs=pairs, labels=labels)


# ------------------------------------------------------------------ serialization

def serialize_mlp(model: MlpModel) -> bytes:
    """Magic line, one JSON header line, then little-endian float64 payload.

    Payload order: each layer's weights (row-major) then biases, followed by the
    scaler mean and scale when present.
    """
    header = {
        "layer_sizes": model.layer_sizes,
        "activation": {"hidden": "relu", "output": "logistic"},
        "has_scaler": model.scaler is not None,
        "config": asdict(model.config),
        "loss_trace": [float(v) for v in model.loss_trace],
    }
    buf = io.BytesIO()
    buf.write(MLP_MAGIC)
    buf.write(json.dumps(header).encode() + b"\n")
    arrays = []
    for w, b in zip(model.weights, model.biases):
        arrays += [w, b]
    if model.scaler is not None:
        arrays += [model.scaler.mean, model.scaler.scale]
    for arr in arrays:
        buf.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return buf.getvalue()


def deserialize_mlp(blob: bytes) -> MlpModel:
    if not blob.startswith(MLP_MAGIC):
        raise ValueError("not a LAGNET-MLP-1 model file")
    rest = blob[len(MLP_MAGIC):]
    nl = rest.index(b"\n")
    header = json.loads(rest[:nl])
    payload = np.frombuffer(rest[nl + 1:], dtype="<f8")
    sizes = header["layer_sizes"]
    pos = 0

    def take(count):
        nonlocal pos
        out = payload[pos:pos + count].astype(float)
        if out.size != count:
            raise ValueError("model file is truncated")
        pos += count
        return out

    weights, biases = [], []
    for a, b in zip(sizes, sizes[1:]):
        weights.append(take(a * b).reshape(a, b))
        biases.append(take(b))
    scaler = None
    if header["has_scaler"]:
        scaler = Scaler(take(sizes[0]), take(sizes[0]))
    if pos != payload.size:
        raise ValueError("trailing data in model file")
    cfg = TrainConfig(**header["config"])
    return MlpModel(weights, biases, scaler=scaler, config=cfg, loss_trace=list(header["loss_trace"]))

