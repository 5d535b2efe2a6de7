import math

import numpy as np
import pytest

from lagnet.classifiers import (MLP_MAGIC, MlpModel, TrainConfig, class_weights, deserialize_mlp, extract_labels,
                                ffnn_predict, fit_gmm, gmm_classify, init_mlp, loss_and_grads, serialize_mlp,
                                train_ffnn, upper_triangle)
from lagnet.estimators import estimate
from lagnet.features import FeatureSet, fit_scaler, ordered_pairs
from lagnet.graphs import Graph, laplacian_weights
from lagnet.moments import analytic_lag_moments

from instances import feasible_jittered


def _graph(n, edges):
    adj = np.zeros((n, n), dtype=bool)
    for i, j in edges:
        adj[i, j] = adj[j, i] = True
    return Graph(adj)


# ----------------------------------------------------------------------- GMM

def test_gmm_two_deltas():
    model = fit_gmm([0.0] * 50 + [1.0] * 50)
    lo, hi = sorted(model.means)
    assert abs(lo) <= 1e-3 and abs(hi - 1) <= 1e-3
    np.testing.assert_allclose(model.weights, 0.5, atol=1e-3)
    assert abs(model.weights.sum() - 1) <= 1e-12 and (model.variances >= 1e-12).all()


def test_gmm_single_gaussian_stays_centred():
    x = np.random.default_rng(0).standard_normal(2000)
    model = fit_gmm(x)
    # every M-step makes the weighted component mean equal the sample mean
    assert abs(model.weights @ model.means - x.mean()) <= 1e-12
    # the likelihood ridge is nearly flat, so the split stays well inside one sample deviation
    assert np.abs(model.means - x.mean()).max() <= x.std()


def test_gmm_mixture_recovery_and_monotone():
    rng = np.random.default_rng(1)
    x = np.concatenate([rng.normal(0, 0.1, 5000), rng.normal(5, 0.1, 5000)])
    model = fit_gmm(x)
    np.testing.assert_allclose(np.sort(model.means), [0, 5], atol=0.05)
    assert np.all(np.diff(model.log_likelihoods) >= -1e-10)
    assert model.final_log_likelihood == model.log_likelihoods[-1]


def test_gmm_rejects_degenerate():
    with pytest.raises(ValueError):
        fit_gmm([2.0] * 10)
    with pytest.raises(ValueError):
        fit_gmm([1.0, 2.0])


def test_gmm_classify_examples():
    vals = np.array([[0, 1, 0, 0], [1, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 0]], dtype=float)
    model = fit_gmm(upper_triangle(vals))
    out = gmm_classify(model, vals)
    assert np.array_equal(out, vals > 0.5) and np.array_equal(out, out.T)
    low = np.full((4, 4), -10.0)
    assert not gmm_classify(model, low).any()


def test_gmm_classify_feasible_analytic_nig():
    rng = np.random.default_rng(21)
    s = list(range(8))
    a, noise = feasible_jittered(rng, 8, 0.8, s, margin=0.5)
    est = estimate(analytic_lag_moments(a, noise, 0, 3, s), "nig")
    model = fit_gmm(upper_triangle(est.symmetrized()))
    assert np.array_equal(gmm_classify(model, est), a.support.adjacency)


# ----------------------------------------------------------------------- MLP

def _blobs(rng, n=200, dim=4):
    # unit-variance blobs whose means sit 5 sigma either side of the hyperplane x_0 = 0
    y = rng.random(n) < 0.5
    x = rng.standard_normal((n, dim))
    x[:, 0] += np.where(y, 5.0, -5.0)
    return FeatureSet(ordered_pairs(range(15))[:n], f=x, labels=y)


def test_gradient_matches_central_differences():
    rng = np.random.default_rng(2)
    model = init_mlp(6, TrainConfig(hidden_sizes=(5, 4), seed=3))
    for b in model.biases:
        b += rng.normal(0, 0.1, b.shape)
    x = rng.standard_normal((30, 6))
    y = (rng.random(30) < 0.4).astype(float)
    w = class_weights(y, True)
    _, gw, gb = loss_and_grads(model, x, y, w)
    h = 1e-5
    for params, grads in ((model.weights, gw), (model.biases, gb)):
        for p, g in zip(params, grads):
            flat, gflat = p.reshape(-1), g.reshape(-1)
            for idx in rng.choice(flat.size, size=min(10, flat.size), replace=False):
                old = flat[idx]
                flat[idx] = old + h
                up = loss_and_grads(model, x, y, w)[0]
                flat[idx] = old - h
                down = loss_and_grads(model, x, y, w)[0]
                flat[idx] = old
                fd = (up - down) / (2 * h)
                denom = max(abs(fd), abs(gflat[idx]), 1e-8)
                assert abs(fd - gflat[idx]) / denom <= 1e-4


def test_separable_toy_training():
    raw = _blobs(np.random.default_rng(4))
    train = fit_scaler(raw)
    model = train_ffnn(train, TrainConfig())
    pred = ffnn_predict(model, raw)
    assert np.mean((pred.probabilities > 0.5) == train.labels) == 1.0
    assert len(model.loss_trace) == 50 and model.loss_trace[-1] < model.loss_trace[0]


def test_single_label_set_predicts_majority():
    x = np.random.default_rng(5).standard_normal((40, 3))
    raw = FeatureSet(ordered_pairs(range(7))[:40], f=x, labels=np.ones(40, dtype=bool))
    model = train_ffnn(fit_scaler(raw), TrainConfig(epochs=5))
    assert ffnn_predict(model, raw).decisions.all()


def test_training_errors_and_determinism():
    train = fit_scaler(_blobs(np.random.default_rng(6), n=60))
    with pytest.raises(ValueError, match="labels"):
        train_ffnn(FeatureSet(train.pairs, f=train.f))
    cfg = TrainConfig(epochs=3, seed=9)
    m1, m2 = train_ffnn(train, cfg), train_ffnn(train, cfg)
    for w1, w2 in zip(m1.weights, m2.weights):
        assert w1.tobytes() == w2.tobytes()
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0)


def test_zero_weight_model_outputs_logistic_bias():
    model = init_mlp(3, TrainConfig(hidden_sizes=(4,)))
    for w in model.weights:
        w[:] = 0.0
    model.biases[-1][:] = 0.7
    fs = FeatureSet(ordered_pairs(range(3)), f=np.random.default_rng(0).standard_normal((6, 3)))
    pred = ffnn_predict(model, fs)
    np.testing.assert_allclose(pred.probabilities, 1 / (1 + math.exp(-0.7)), rtol=1e-15)
    with pytest.raises(ValueError, match="dimension"):
        ffnn_predict(model, FeatureSet(fs.pairs, f=np.zeros((6, 2))))


def test_predictions_are_or_symmetrised():
    rng = np.random.default_rng(7)
    model = init_mlp(2, TrainConfig(hidden_sizes=(3,), seed=1))
    fs = FeatureSet(ordered_pairs(range(5)), f=rng.standard_normal((20, 2)) * 3)
    pred = ffnn_predict(model, fs)
    adj = pred.adjacency(range(5))
    assert np.array_equal(adj, adj.T)
    raw = pred.probabilities > 0.5
    assert pred.decisions.sum() >= raw.sum()


def test_serialization_round_trip(tmp_path):
    train = _blobs(np.random.default_rng(8), n=80)
    model = train_ffnn(fit_scaler(train), TrainConfig(epochs=2))
    blob = serialize_mlp(model)
    assert blob.startswith(MLP_MAGIC)
    back = deserialize_mlp(blob)
    assert back.layer_sizes == model.layer_sizes and back.config == model.config
    path = tmp_path / "m.bin"
    model.save(path)
    loaded = MlpModel.load(path)
    p0 = ffnn_predict(model, train).probabilities
    assert ffnn_predict(loaded, train).probabilities.tobytes() == p0.tobytes()
    assert ffnn_predict(back, train).probabilities.tobytes() == p0.tobytes()
    with pytest.raises(ValueError):
        deserialize_mlp(b"junk")
    with pytest.raises(ValueError, match="truncated"):
        deserialize_mlp(blob[:-16])


# -------------------------------------------------------------------- labels

def test_extract_labels_examples():
    tri = laplacian_weights(_graph(3, [(0, 1), (1, 2), (0, 2)]), 0.5)
    assert extract_labels(tri, range(3)).labels.all()
    empty = laplacian_weights(_graph(3, []), 0.5)
    assert not extract_labels(empty, range(3)).labels.any()
    path = laplacian_weights(_graph(3, [(0, 1), (1, 2)]), 0.5)
    fs = extract_labels(path, [2, 0])
    assert fs.pairs.tolist() == [[0, 2], [2, 0]] and not fs.labels.any()
