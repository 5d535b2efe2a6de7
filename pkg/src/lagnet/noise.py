"""Spatially colored, temporally white Gaussian noise with homogeneous variance.

A noise covariance with equal diagonal entries ``sigma^2`` and strictly smaller
off-diagonals splits uniquely into

    cov = sigma_gap_sq * I + beta * 1 1^T + sigma_bar

where ``sigma_gap_sq = sigma^2 - max off-diagonal`` and ``beta`` is the mean
off-diagonal value, so the off-diagonals of ``sigma_bar`` average to zero.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

DIAG_TOL = 1e-10
DOMINANCE_TOL = 1e-10
PSD_TOL = 1e-10
EIG_CLAMP = 1e-12


@dataclass(frozen=True)
class NoiseModel:
    covariance: np.ndarray
    sigma_sq: float
    sigma_gap_sq: float
    beta: float
    sigma_bar: np.ndarray
    xi_variance: float = 0.0

    @property
    def n_nodes(self) -> int:
        return self.covariance.shape[0]

    @property
    def effective_gap(self) -> float:
        """Variance gap after adding isotropic exogenous excitation."""
        return self.sigma_gap_sq + self.xi_variance

    @property
    def effective_covariance(self) -> np.ndarray:
        return self.covariance + self.xi_variance * np.eye(self.n_nodes)

    def off_diagonals(self) -> np.ndarray:
        return off_diagonals(self.covariance)

    def with_exogenous(self, xi_variance: float) -> "NoiseModel":
        if xi_variance < 0:
            raise ValueError("xi_variance must be nonnegative")
        return replace(self, xi_variance=float(xi_variance))


def off_diagonals(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m)
    return m[~np.eye(m.shape[0], dtype=bool)]


def decompose_covariance(cov, xi_variance: float = 0.0) -> NoiseModel:
    """Split a homogeneous-variance covariance into gap, offset and residual parts.

    Raises:
        ValueError: if the diagonal is not constant, some off-diagonal is not
            strictly below the diagonal, or the matrix is not symmetric PSD.
    """
    cov = np.array(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValueError(f"covariance must be square, got shape {cov.shape}")
    n = cov.shape[0]
    if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-12):
        raise ValueError("covariance must be symmetric")
    diag = cov.diagonal()
    if diag.max() - diag.min() > DIAG_TOL:
        raise ValueError(
            f"heterogeneous diagonal: variances span [{diag.min()}, {diag.max()}]")
    sigma_sq = float(diag.mean())
    if n > 1:
        off = off_diagonals(cov)
        max_off = float(off.max())
        beta = float(off.mean())
    else:
        max_off, beta = 0.0, 0.0
    gap = sigma_sq - max_off
    if gap <= DOMINANCE_TOL:
        raise ValueError(
            f"off-diagonal {max_off} is not strictly below the variance {sigma_sq}")
    min_eig = float(np.linalg.eigvalsh(cov).min())
    if min_eig < -PSD_TOL:
        raise ValueError(f"covariance is not PSD (min eigenvalue {min_eig})")
    sigma_bar = cov - gap * np.eye(n) - beta * np.ones((n, n))
    cov.setflags(write=False)
    sigma_bar.setflags(write=False)
    return NoiseModel(covariance=cov, sigma_sq=sigma_sq, sigma_gap_sq=gap, beta=beta,
                      sigma_bar=sigma_bar, xi_variance=float(xi_variance))


def offset_noise(n_nodes: int, sigma_gap_sq: float, beta: float) -> NoiseModel:
    """``sigma_gap_sq * I + beta * 1 1^T``: equicorrelated noise with zero residual."""
    if n_nodes < 1:
        raise ValueError("n_nodes must be positive")
    if sigma_gap_sq <= 0:
        raise ValueError("sigma_gap_sq must be positive")
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    cov = sigma_gap_sq * np.eye(n_nodes) + beta * np.ones((n_nodes, n_nodes))
    return decompose_covariance(cov)


def jittered_noise(n_nodes: int, sigma_gap_sq: float, beta: float, jitter: float,
                   seed: int, max_tries: int = 100) -> NoiseModel:
    """Offset noise plus a zero-mean Gram perturbation of the off-diagonals.

    The perturbation is ``G G^T`` for a standard normal ``G``, scaled so its largest
    off-diagonal magnitude equals ``jitter``, with the off-diagonal mean removed
    (its diagonal is left at the common value, keeping variances homogeneous).
    Draws that break positive semidefiniteness or strict diagonal dominance are
    rejected.
    """
    base = offset_noise(n_nodes, sigma_gap_sq, beta)
    if jitter < 0:
        raise ValueError("jitter must be nonnegative")
    if jitter == 0 or n_nodes < 2:
        return base
    rng = np.random.default_rng(seed)
    mask = ~np.eye(n_nodes, dtype=bool)
    for _ in range(max_tries):
        g = rng.standard_normal((n_nodes, n_nodes))
        gram = g @ g.T
        pert = np.zeros_like(gram)
        pert[mask] = gram[mask]
        pert *= jitter / np.abs(pert[mask]).max()
        pert[mask] -= pert[mask].mean()
        pert = 0.5 * (pert + pert.T)
        try:
            return decompose_covariance(base.covariance + pert)
        except ValueError:
            continue
    raise ValueError(
        f"could not draw a valid jittered covariance in {max_tries} tries "
        f"(jitter={jitter} too large for sigma_gap_sq={sigma_gap_sq})")


def psd_sqrt(cov: np.ndarray) -> np.ndarray:
    """Symmetric square root via eigendecomposition, clamping tiny eigenvalues to zero."""
    w, v = np.linalg.eigh(np.asarray(cov, dtype=float))
    w = np.where(w < EIG_CLAMP, 0.0, w)
    return (v * np.sqrt(w)) @ v.T


def sample_noise(model: NoiseModel, count: int, seed) -> np.ndarray:
    """Draw ``count`` i.i.d. ``N(0, model.covariance)`` vectors as rows of an array.

    ``seed`` may also be a ``numpy.random.Generator`` to continue an existing stream.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    root = psd_sqrt(model.covariance)
    z = rng.standard_normal((count, model.n_nodes))
    return z @ root
