"""Per-pair lag-moment features and standard scaling.

For an ordered pair ``(i, j)`` of observed nodes:

* ``f`` reads entry ``(i, j)`` of every lag moment ``R_d .. R_m``;
* ``t`` reads entry ``(i, j)`` of the inverse of every lag moment;
* ``k`` is ``f`` followed by ``t``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .estimators import ridge_inverse
from .moments import LagMoments

DEGENERATE_STD = 1e-15


@dataclass(frozen=True)
class Scaler:
    mean: np.ndarray
    scale: np.ndarray

    def transform(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.mean.shape[0]:
            raise ValueError(f"feature dimension {x.shape[-1]} != scaler dimension {self.mean.shape[0]}")
        return (x - self.mean) / self.scale


def fit_standard(x: np.ndarray) -> Scaler:
    """Per-column mean and population standard deviation; near-constant columns get scale 1."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("need at least two rows to fit a scaler")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    scale = np.where(std < DEGENERATE_STD, 1.0, std)
    return Scaler(mean, scale)


@dataclass(frozen=True)
class FeatureSet:
    """Feature vectors for the ordered pairs ``pairs`` (array of shape ``(P, 2)``).

    Node ids in ``pairs`` are the original network ids, not column positions.
    """

    pairs: np.ndarray
    f: Optional[np.ndarray] = None
    t: Optional[np.ndarray] = None
    k: Optional[np.ndarray] = None
    labels: Optional[np.ndarray] = None
    scaler: Optional[Scaler] = None

    def __len__(self) -> int:
        return self.pairs.shape[0]

    @property
    def design(self) -> np.ndarray:
        """The richest block present: ``k``, else ``f``, else ``t``."""
        for block in (self.k, self.f, self.t):
            if block is not None:
                return block
        raise ValueError("feature set holds no feature vectors")

    @property
    def design_name(self) -> str:
        for name in ("k", "f", "t"):
            if getattr(self, name) is not None:
                return name
        raise ValueError("feature set holds no feature vectors")

    def with_design(self, values: np.ndarray) -> "FeatureSet":
        return replace(self, **{self.design_name: values})

    def with_labels(self, labels) -> "FeatureSet":
        labels = np.asarray(labels, dtype=bool)
        if labels.shape != (len(self),):
            raise ValueError(f"expected {len(self)} labels, got {labels.shape}")
        return replace(self, labels=labels)

    def to_csv(self, path) -> None:
        x = self.design
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["pair_i", "pair_j", "label"] + [f"k_{c}" for c in range(x.shape[1])])
            for r, (i, j) in enumerate(self.pairs):
                label = "" if self.labels is None else int(self.labels[r])
                w.writerow([int(i), int(j), label] + [repr(float(v)) for v in x[r]])


def ordered_pairs(observed) -> np.ndarray:
    obs = np.asarray(observed, dtype=int)
    p, q = np.nonzero(~np.eye(obs.size, dtype=bool))
    return np.column_stack([obs[p], obs[q]])


def _pair_positions(moments: LagMoments):
    dim = moments.dim
    observed = moments.observed or tuple(range(dim))
    p, q = np.nonzero(~np.eye(dim, dtype=bool))
    return ordered_pairs(observed), p, q


def build_f(moments: LagMoments) -> FeatureSet:
    pairs, p, q = _pair_positions(moments)
    stack = moments.stack()
    return FeatureSet(pairs=pairs, f=np.ascontiguousarray(stack[:, p, q].T))


def build_t(moments: LagMoments) -> FeatureSet:
    pairs, p, q = _pair_positions(moments)
    inv = []
    for k in moments.lags:
        try:
            inv.append(ridge_inverse(moments[k], f"lag-{k} moment"))
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError(f"T features: inversion failed at lag {k}") from exc
    stack = np.stack(inv)
    return FeatureSet(pairs=pairs, t=np.ascontiguousarray(stack[:, p, q].T))


def build_k(f: FeatureSet, t: FeatureSet) -> FeatureSet:
    """Concatenate ``f`` then ``t`` vectors pair by pair."""
    if f.f is None or t.t is None:
        raise ValueError("build_k expects an F feature set followed by a T feature set")
    if not np.array_equal(f.pairs, t.pairs):
        raise ValueError("F and T feature sets cover different pairs")
    labels = f.labels if f.labels is not None else t.labels
    return FeatureSet(pairs=f.pairs, f=f.f, t=t.t, k=np.hstack([f.f, t.t]), labels=labels)


def build_features(moments: LagMoments, kind: str = "k") -> FeatureSet:
    if kind == "f":
        return build_f(moments)
    if kind == "t":
        return build_t(moments)
    if kind == "k":
        return build_k(build_f(moments), build_t(moments))
    raise ValueError(f"unknown feature kind {kind!r}")


def fit_scaler(fs: FeatureSet) -> FeatureSet:
    """Standardise the design block; the fitted scaler travels with the result."""
    if len(fs) < 2:
        raise ValueError("fit_scaler needs at least two pairs")
    scaler = fit_standard(fs.design)
    return replace(fs.with_design(scaler.transform(fs.design)), scaler=scaler)


def apply_scaler(fs: FeatureSet, scaler: Scaler) -> FeatureSet:
    return replace(fs.with_design(scaler.transform(fs.design)), scaler=scaler)
