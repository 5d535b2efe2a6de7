"""Empirical and model-implied lag covariance matrices.

The empirical ``k``-lag moment over ``n`` samples is

    R_k = (1/n) * sum_{l=0}^{n-1} y(l+k) y(l)^T        (k >= 0)

and negative lags are defined as transposes, ``R_{-k} = R_k^T``. The series
must carry ``max lag`` samples beyond the normalisation count.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .graphs import InteractionMatrix
from .noise import NoiseModel
from .simulator import TimeSeries

LYAPUNOV_TOL = 1e-13
LYAPUNOV_MAX_ITER = 1_000_000


@dataclass(frozen=True)
class LagMoments:
    d: int
    m: int
    matrices: dict = field(repr=False)
    sample_count: Optional[int]
    source: str
    observed: tuple = ()

    def __post_init__(self):
        missing = [k for k in range(self.d, self.m + 1) if k not in self.matrices]
        if missing:
            raise ValueError(f"missing lag matrices for {missing}")
        dims = {mat.shape for mat in self.matrices.values()}
        if len(dims) != 1:
            raise ValueError(f"lag matrices disagree in shape: {dims}")
        if self.source not in ("empirical", "analytic"):
            raise ValueError(f"unknown source {self.source!r}")

    @property
    def lags(self) -> range:
        return range(self.d, self.m + 1)

    @property
    def dim(self) -> int:
        return next(iter(self.matrices.values())).shape[0]

    def __getitem__(self, k: int) -> np.ndarray:
        try:
            return self.matrices[k]
        except KeyError:
            raise KeyError(f"lag {k} outside [{self.d}, {self.m}]") from None

    def stack(self) -> np.ndarray:
        """All lag matrices as an array of shape ``(m - d + 1, dim, dim)``."""
        return np.stack([self.matrices[k] for k in self.lags])

    def dump(self, directory) -> None:
        os.makedirs(directory, exist_ok=True)
        for k in self.lags:
            np.savetxt(os.path.join(directory, f"R_{k}.csv"), self.matrices[k],
                       delimiter=",", fmt="%.17g")

    @classmethod
    def load(cls, directory, source: str = "empirical") -> "LagMoments":
        mats = {}
        for name in os.listdir(directory):
            if name.startswith("R_") and name.endswith(".csv"):
                mats[int(name[2:-4])] = np.loadtxt(os.path.join(directory, name),
                                                   delimiter=",", ndmin=2)
        if not mats:
            raise ValueError(f"no R_<k>.csv files in {directory}")
        return cls(min(mats), max(mats), mats, None, source)


def lag_moment(y: np.ndarray, k: int, n: int) -> np.ndarray:
    """Single ``R_k`` for ``k >= 0`` from a ``(samples, dim)`` array."""
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if k < 0:
        return lag_moment(y, -k, n).T.copy()
    if y.shape[0] < n + k:
        raise ValueError(f"need {n + k} samples for lag {k} over n={n}, have {y.shape[0]}")
    return (y[k:k + n].T @ y[:n]) / n


def empirical_lag_moments(ts: TimeSeries, d: int, m: int, n: Optional[int] = None) -> LagMoments:
    """Empirical moments for lags ``d..m`` over the observed columns of ``ts``.

    ``n`` defaults to ``ts.sample_count - m`` so the whole series is used.
    """
    if d > 1:
        raise ValueError(f"d must be <= 1, got {d}")
    if m < 3:
        raise ValueError(f"m must be >= 3, got {m}")
    reach = max(m, -d)
    if n is None:
        n = ts.sample_count - reach
    if n < 1 or ts.sample_count < n + reach:
        raise ValueError(
            f"insufficient samples: lag {reach} needs {max(n, 1) + reach}, have {ts.sample_count}")
    y = ts.samples
    mats = {}
    for k in range(0, reach + 1):
        r = (y[k:k + n].T @ y[:n]) / n
        if d <= k <= m:
            mats[k] = r
        if d <= -k <= m and k > 0:
            mats[-k] = r.T.copy()
    for mat in mats.values():
        mat.setflags(write=False)
    return LagMoments(d, m, mats, n, "empirical", ts.observed)


def _entries(a) -> np.ndarray:
    return a.entries if isinstance(a, InteractionMatrix) else np.asarray(a, dtype=float)


def stationary_covariance(a, noise: NoiseModel, tol: float = LYAPUNOV_TOL) -> np.ndarray:
    """Solve ``R0 = A R0 A^T + Sigma_eff`` by fixed-point iteration from ``Sigma_eff``.

    ``Sigma_eff`` includes the isotropic exogenous variance of ``noise``.
    """
    mat = _entries(a)
    q = noise.effective_covariance
    r = q.copy()
    for _ in range(LYAPUNOV_MAX_ITER):
        nxt = mat @ r @ mat.T + q
        delta = np.abs(nxt - r).max()
        r = nxt
        if delta <= tol * max(1.0, np.abs(r).max()):
            break
    else:
        raise RuntimeError("Lyapunov iteration did not converge; is rho(A) < 1?")
    return 0.5 * (r + r.T)


def analytic_lag_moment(a, r0: np.ndarray, k: int) -> np.ndarray:
    """``A^k R0`` for ``k >= 0`` and its transpose for negative ``k``."""
    mat = _entries(a)
    out = np.asarray(r0, dtype=float).copy()
    for _ in range(abs(k)):
        out = mat @ out
    return out if k >= 0 else out.T.copy()


def analytic_lag_moments(a, noise: NoiseModel, d: int, m: int, s=None) -> LagMoments:
    """Model-implied moments for lags ``d..m`` restricted to node set ``s``."""
    mat = _entries(a)
    dim = mat.shape[0]
    s = tuple(range(dim)) if s is None else tuple(sorted(int(i) for i in s))
    idx = np.ix_(s, s)
    r0 = stationary_covariance(mat, noise)
    mats = {}
    cur = r0
    for k in range(0, max(m, -d) + 1):
        if k:
            cur = mat @ cur
        sub = cur[idx]
        if d <= k <= m:
            mats[k] = sub.copy()
        if d <= -k <= m and k > 0:
            mats[-k] = sub.T.copy()
    return LagMoments(d, m, mats, None, "analytic", s)
