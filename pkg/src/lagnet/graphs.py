"""Undirected graph generators, edge-list ingestion and the Laplacian weighting rule."""
from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass
from typing import IO, Union

import numpy as np

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph stored as a dense boolean adjacency matrix."""

    adjacency: np.ndarray

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=bool)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1] or adj.shape[0] < 1:
            raise ValueError(f"adjacency must be a non-empty square matrix, got {adj.shape}")
        if not np.array_equal(adj, adj.T):
            raise ValueError("adjacency must be symmetric")
        if adj.diagonal().any():
            raise ValueError("adjacency must have an empty diagonal")
        adj.setflags(write=False)
        object.__setattr__(self, "adjacency", adj)

    @property
    def node_count(self) -> int:
        return self.adjacency.shape[0]

    @property
    def edge_count(self) -> int:
        return int(np.triu(self.adjacency, 1).sum())

    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    def edges(self) -> list[tuple[int, int]]:
        i, j = np.nonzero(np.triu(self.adjacency, 1))
        return list(zip(i.tolist(), j.tolist()))

    def is_connected(self) -> bool:
        seen = np.zeros(self.node_count, dtype=bool)
        stack = [0]
        seen[0] = True
        while stack:
            u = stack.pop()
            for v in np.flatnonzero(self.adjacency[u] & ~seen):
                seen[v] = True
                stack.append(int(v))
        return bool(seen.all())

    def to_edge_list(self) -> str:
        return "".join(f"{i} {j}\n" for i, j in self.edges())


@dataclass(frozen=True)
class InteractionMatrix:
    """Symmetric nonnegative coupling matrix ``A = rho * A_bar`` with unit-row-sum ``A_bar``.

    ``a_plus_min`` is the smallest nonzero off-diagonal entry (``inf`` when the
    support graph has no edges).
    """

    entries: np.ndarray
    rho: float
    a_plus_min: float
    support: Graph

    @property
    def n_nodes(self) -> int:
        return self.entries.shape[0]

    def restrict(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=int)
        return self.entries[np.ix_(s, s)]


def _edges_to_graph(n: int, rows, cols) -> Graph:
    adj = np.zeros((n, n), dtype=bool)
    adj[rows, cols] = True
    adj[cols, rows] = True
    return Graph(adj)


def erdos_renyi(n_nodes: int, p: float, seed: int) -> Graph:
    """G(n, p): every unordered pair is connected independently with probability ``p``."""
    if n_nodes < 2:
        raise ValueError("n_nodes must be at least 2")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n_nodes, 1)
    keep = rng.random(iu.size) < p
    return _edges_to_graph(n_nodes, iu[keep], ju[keep])


def watts_strogatz(n_nodes: int, ring_degree: int, rewire_p: float, seed: int) -> Graph:
    """Ring lattice with ``ring_degree`` neighbours per node, then edge rewiring.

    Each lattice edge ``(u, u+j)`` is rewired with probability ``rewire_p`` to
    ``(u, w)`` with ``w`` drawn uniformly among nodes that are neither ``u`` nor
    already adjacent to it. A rewiring that has no admissible target is skipped, so
    the edge count is always ``n_nodes * ring_degree / 2``.
    """
    if ring_degree <= 0 or ring_degree % 2:
        raise ValueError(f"ring_degree must be a positive even integer, got {ring_degree}")
    if ring_degree >= n_nodes:
        raise ValueError("ring_degree must be smaller than n_nodes")
    if not 0.0 <= rewire_p <= 1.0:
        raise ValueError(f"rewire_p must lie in [0, 1], got {rewire_p}")
    rng = np.random.default_rng(seed)
    adj = np.zeros((n_nodes, n_nodes), dtype=bool)
    nodes = np.arange(n_nodes)
    for j in range(1, ring_degree // 2 + 1):
        adj[nodes, (nodes + j) % n_nodes] = True
        adj[(nodes + j) % n_nodes, nodes] = True
    for j in range(1, ring_degree // 2 + 1):
        for u in range(n_nodes):
            v = (u + j) % n_nodes
            if rng.random() >= rewire_p or not adj[u, v]:
                continue
            candidates = np.flatnonzero(~adj[u])
            candidates = candidates[candidates != u]
            if candidates.size == 0:
                continue
            w = int(rng.choice(candidates))
            adj[u, v] = adj[v, u] = False
            adj[u, w] = adj[w, u] = True
    g = Graph(adj)
    if not g.is_connected():
        log.warning("watts_strogatz(n=%d, k=%d, p=%g, seed=%d) produced a disconnected graph",
                    n_nodes, ring_degree, rewire_p, seed)
    return g


def load_edge_list(source: Union[IO[bytes], IO[str], bytes, str]) -> Graph:
    """Parse whitespace separated ``i j`` lines (0-based ids) into a symmetric graph.

    Blank lines and ``#`` comments are skipped. ``source`` may be a binary or text
    stream, or the raw content itself.
    """
    if isinstance(source, (bytes, str)):
        data = source
    else:
        data = source.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    rows, cols = [], []
    for lineno, raw in enumerate(io.StringIO(data), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'i j', got {line!r}")
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            raise ValueError(f"line {lineno}: non-integer node id in {line!r}") from None
        if i < 0 or j < 0:
            raise ValueError(f"line {lineno}: negative node id in {line!r}")
        if i == j:
            raise ValueError(f"line {lineno}: self-loop on node {i} is not allowed")
        rows.append(i)
        cols.append(j)
    if not rows:
        raise ValueError("no edges")
    n = 1 + max(max(rows), max(cols))
    return _edges_to_graph(n, np.array(rows), np.array(cols))


def laplacian_weights(g: Graph, rho: float) -> InteractionMatrix:
    """Weight ``g`` as ``A = rho * (I - L / (d_max + 1))``.

    ``L`` is the combinatorial Laplacian, so ``A_bar`` is symmetric, nonnegative,
    has unit row sums and a strictly positive diagonal; isolated nodes keep a pure
    self-loop. ``rho = 0`` yields the zero matrix (no dynamics).
    """
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"rho must lie in [0, 1), got {rho}")
    adj = g.adjacency.astype(float)
    deg = adj.sum(axis=1)
    lap = np.diag(deg) - adj
    a_bar = np.eye(g.node_count) - lap / (deg.max() + 1.0)
    entries = rho * a_bar
    off = entries[g.adjacency]
    a_plus_min = float(off.min()) if off.size and rho > 0 else math.inf
    entries.setflags(write=False)
    return InteractionMatrix(entries=entries, rho=float(rho), a_plus_min=a_plus_min, support=g)


def spectral_radius(m: np.ndarray, tol: float = 1e-12, max_iter: int = 100_000) -> float:
    """Spectral radius of a symmetric matrix by power iteration on ``m @ m``.

    Squaring makes the dominant eigenvalue unique even when ``+r`` and ``-r`` are
    both eigenvalues.
    """
    m = np.asarray(m, dtype=float)
    sq = m @ m
    v = np.ones(m.shape[0]) + np.linspace(0.0, 0.1, m.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = sq @ v
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0
        w /= nrm
        if abs(nrm - lam) <= tol * max(nrm, 1.0):
            lam = nrm
            break
        lam, v = nrm, w
    return math.sqrt(lam)
