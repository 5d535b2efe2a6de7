"""Matrix-valued structure estimators and the colored-noise feasibility analysis."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .graphs import InteractionMatrix
from .moments import LagMoments
from .noise import NoiseModel, off_diagonals

KINDS = ("one_lag", "nig", "precision", "granger")
COND_LIMIT = 1e12
RIDGE_SCALE = 1e-8
SERIES_TOL = 1e-14
SERIES_MAX_TERMS = 100_000


@dataclass(frozen=True)
class MatrixEstimate:
    values: np.ndarray
    kind: str
    sample_count: int | None = None

    def symmetrized(self) -> np.ndarray:
        return 0.5 * (self.values + self.values.T)

    def to_csv(self, path) -> None:
        np.savetxt(path, self.values, delimiter=",", fmt="%.17g")


@dataclass(frozen=True)
class FeasibilityReport:
    error_matrix: np.ndarray
    osc_error: float
    lhs: float
    rhs: float
    feasible: bool
    consistency_bound: float

    def to_text(self) -> str:
        lines = [f"{k}={getattr(self, k)!r}" for k in
                 ("lhs", "rhs", "feasible", "osc_error", "consistency_bound")]
        return "\n".join(lines) + "\n"


def osc(values) -> float:
    """Oscillation ``max - min`` of a nonempty collection of reals."""
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        raise ValueError("osc of an empty sequence")
    return float(arr.max() - arr.min())


def _osc_off(m: np.ndarray) -> float:
    off = off_diagonals(m)
    return osc(off) if off.size else 0.0


def ridge_inverse(m: np.ndarray, what: str = "matrix") -> np.ndarray:
    """Invert ``m``, adding ``lambda I`` (``lambda = 1e-8 |trace| / dim``) when ill-conditioned."""
    m = np.asarray(m, dtype=float)
    if np.linalg.cond(m) > COND_LIMIT:
        dim = m.shape[0]
        lam = RIDGE_SCALE * abs(np.trace(m)) / dim
        if lam == 0.0:
            # lag moments can have zero trace; fall back to the entry scale
            lam = RIDGE_SCALE * np.abs(m).max()
        if lam == 0.0:
            raise np.linalg.LinAlgError(f"{what} is identically zero")
        m = m + lam * np.eye(dim)
        if not np.isfinite(np.linalg.cond(m)) or np.linalg.cond(m) > 1.0 / np.finfo(float).eps:
            raise np.linalg.LinAlgError(f"{what} is singular even after ridge")
    return np.linalg.inv(m)


def estimate(moments: LagMoments, kind: str) -> MatrixEstimate:
    """One of ``one_lag`` (R1), ``nig`` (R1 - R3), ``precision`` (R0^-1), ``granger`` (R1 R0^-1)."""
    if kind == "one_lag":
        values = moments[1].copy()
    elif kind == "nig":
        values = moments[1] - moments[3]
    elif kind == "precision":
        values = ridge_inverse(moments[0], "lag-0 moment")
    elif kind == "granger":
        values = moments[1] @ ridge_inverse(moments[0], "lag-0 moment")
    else:
        raise ValueError(f"unknown estimator kind {kind!r}; expected one of {KINDS}")
    return MatrixEstimate(values, kind, moments.sample_count)


def _sorted_index(s, n: int) -> np.ndarray:
    s = np.array(sorted(set(int(i) for i in s)), dtype=int)
    if s.size == 0:
        raise ValueError("node set must be nonempty")
    if s[0] < 0 or s[-1] >= n:
        raise ValueError(f"node ids must lie in [0, {n})")
    return s


def error_matrix(a: InteractionMatrix, noise: NoiseModel, s: Sequence[int]) -> np.ndarray:
    """Limiting error of the normalised ``R1 - R3`` estimator on node set ``s``.

    Equals ``(beta * rho * 1 1^T + [(I - A^2) sum_i A^{i+1} Sigma_bar A^i]_S) / gap``
    where ``gap`` includes any exogenous variance. The series stops once a term's
    largest magnitude falls below 1e-14.
    """
    mat = a.entries
    n = mat.shape[0]
    idx = _sorted_index(s, n)
    gap = noise.effective_gap
    series = np.zeros((n, n))
    if np.any(noise.sigma_bar):
        term = mat @ noise.sigma_bar
        for _ in range(SERIES_MAX_TERMS):
            series += term
            if np.abs(term).max() < SERIES_TOL:
                break
            term = mat @ term @ mat
    full = noise.beta * a.rho * np.ones((n, n)) + (np.eye(n) - mat @ mat) @ series
    return full[np.ix_(idx, idx)] / gap


def feasibility_rhs(a: InteractionMatrix) -> float:
    rho = a.rho
    if rho == 0.0 or math.isinf(a.a_plus_min):
        return math.inf
    return a.a_plus_min * (1.0 - rho**2) / (2.0 * rho * (rho**2 + 1.0))


def feasibility_margin(a: InteractionMatrix, noise: NoiseModel, s: Sequence[int]) -> FeasibilityReport:
    """Both sides of the noise feasibility inequality plus the resulting error oscillation."""
    err = error_matrix(a, noise, s)
    off = noise.off_diagonals()
    lhs = (osc(off) if off.size else 0.0) / noise.effective_gap
    rhs = feasibility_rhs(a)
    return FeasibilityReport(error_matrix=err, osc_error=_osc_off(err), lhs=lhs, rhs=rhs,
                             feasible=bool(lhs <= rhs), consistency_bound=a.a_plus_min / 2.0)


def min_exogenous_variance(a: InteractionMatrix, noise: NoiseModel) -> float:
    """Smallest isotropic variance that, added to the gap, satisfies the feasibility inequality.

    Uses the closed form ``max(0, Osc(Off) / rhs - gap)`` and then nudges upwards by
    ulps so the floating-point check in :func:`feasibility_margin` holds exactly.
    """
    off = noise.off_diagonals()
    spread = osc(off) if off.size else 0.0
    rhs = feasibility_rhs(a)
    gap = noise.sigma_gap_sq
    if spread / gap <= rhs:
        return 0.0
    xi = max(0.0, spread / rhs - gap)
    while spread / (gap + xi) > rhs:
        xi = np.nextafter(xi, math.inf)
    return float(xi)


def threshold_support(est: MatrixEstimate, threshold: float) -> np.ndarray:
    """Symmetric boolean support: off-diagonals whose symmetrised value exceeds ``threshold``."""
    if math.isnan(threshold):
        raise ValueError("threshold must not be NaN")
    sym = est.symmetrized()
    out = sym > threshold
    np.fill_diagonal(out, False)
    return out


def oracle_threshold(a: InteractionMatrix, noise: NoiseModel, s: Sequence[int]) -> float:
    """Threshold for the unnormalised ``R1 - R3`` estimate implied by the limiting error.

    Sits half a minimal coupling above the smallest off-diagonal error, scaled back by
    the variance gap; exact recovery follows whenever the error oscillation is below
    half the minimal coupling.
    """
    err = error_matrix(a, noise, s)
    off = off_diagonals(err)
    e_min = float(off.min()) if off.size else 0.0
    return noise.effective_gap * (e_min + a.a_plus_min / 2.0)


def largest_gap_threshold(values) -> float:
    """Midpoint of the widest gap between consecutive sorted values."""
    v = np.sort(np.asarray(values, dtype=float).ravel())
    if v.size < 2:
        raise ValueError("need at least two values")
    k = int(np.argmax(np.diff(v)))
    return float(0.5 * (v[k] + v[k + 1]))
