"""Trajectories of ``y(l+1) = A y(l) + x(l+1) [+ xi(l+1)]`` and partial observation."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .graphs import InteractionMatrix
from .noise import NoiseModel, psd_sqrt

DEFAULT_BURN_IN = 1000
DEFAULT_TAIL = 50
_CHUNK = 1 << 15


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Samples ``y(0..n-1)`` as rows; columns follow ``observed`` node ids."""

    samples: np.ndarray
    observed: tuple

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim == 1:
            samples = samples[:, None]
        observed = tuple(int(i) for i in self.observed)
        if samples.shape[0] < 1:
            raise ValueError("a time series needs at least one sample")
        if not observed:
            raise ValueError("observed set must be nonempty")
        if any(b <= a for a, b in zip(observed, observed[1:])) or observed[0] < 0:
            raise ValueError("observed ids must be nonnegative and strictly increasing")
        if samples.shape[1] != len(observed):
            raise ValueError(
                f"{samples.shape[1]} columns but {len(observed)} observed ids")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "observed", observed)

    @classmethod
    def full(cls, samples) -> "TimeSeries":
        samples = np.asarray(samples, dtype=float)
        if samples.ndim == 1:
            samples = samples[:, None]
        return cls(samples, tuple(range(samples.shape[1])))

    @property
    def sample_count(self) -> int:
        return self.samples.shape[0]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"y{i}" for i in self.observed])
            for t, row in enumerate(self.samples):
                w.writerow([t] + [repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path) -> "TimeSeries":
        with open(path, newline="") as fh:
            header = next(csv.reader(fh))
        if not header or header[0] != "t" or not all(h.startswith("y") for h in header[1:]):
            raise ValueError(f"{path}: expected header 't,y<i>,...'")
        observed = tuple(int(h[1:]) for h in header[1:])
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 1:], observed)


@dataclass(frozen=True)
class SimConfig:
    burn_in: int = DEFAULT_BURN_IN
    extra_tail: int = DEFAULT_TAIL
    seed: int = 0

    def __post_init__(self):
        if self.burn_in < 0 or self.extra_tail < 0:
            raise ValueError("burn_in and extra_tail must be nonnegative")


def simulate(a, noise: NoiseModel, n: int, cfg: Optional[SimConfig] = None) -> TimeSeries:
    """Run the linear recursion from ``y(0) = 0``.

    Returns ``n + cfg.extra_tail`` samples after discarding ``cfg.burn_in`` steps.
    ``a`` is an :class:`InteractionMatrix` or a plain square array.
    When ``noise.xi_variance > 0`` an independent isotropic term is added each step.
    """
    cfg = cfg or SimConfig()
    entries = a.entries if isinstance(a, InteractionMatrix) else np.asarray(a, dtype=float)
    dim = noise.n_nodes
    if entries.shape != (dim, dim):
        raise ValueError(f"interaction matrix {entries.shape} does not match noise dimension {dim}")
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(cfg.seed)
    root = psd_sqrt(noise.covariance)
    xi_sd = np.sqrt(noise.xi_variance)
    total = cfg.burn_in + n + cfg.extra_tail
    out = np.empty((n + cfg.extra_tail, dim))
    at = np.ascontiguousarray(entries.T)
    y = np.zeros(dim)
    step = 0
    while step < total:
        m = min(_CHUNK, total - step)
        drive = rng.standard_normal((m, dim)) @ root
        if xi_sd > 0:
            drive += xi_sd * rng.standard_normal((m, dim))
        for row in drive:
            y = y @ at + row
            if step >= cfg.burn_in:
                out[step - cfg.burn_in] = y
            step += 1
    return TimeSeries(out, tuple(range(dim)))


def restrict(ts: TimeSeries, s: Sequence[int]) -> TimeSeries:
    """Keep only the columns of node ids in ``s`` (given in any order)."""
    s = sorted(set(int(i) for i in s))
    if not s:
        raise ValueError("observed subset must be nonempty")
    pos = {node: k for k, node in enumerate(ts.observed)}
    missing = [i for i in s if i not in pos]
    if missing:
        raise ValueError(f"nodes {missing} are not in the observed set")
    cols = [pos[i] for i in s]
    return TimeSeries(ts.samples[:, cols], tuple(s))
