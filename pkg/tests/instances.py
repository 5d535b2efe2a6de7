"""Random model instances shared by several test modules."""
import numpy as np

from lagnet.estimators import feasibility_margin
from lagnet.graphs import erdos_renyi, laplacian_weights
from lagnet.noise import decompose_covariance, jittered_noise, offset_noise


def random_model(rng, n_nodes, rho, jitter=0.0, beta=None, p=None):
    """Connected-enough ER graph with Laplacian weights plus offset/jittered noise."""
    while True:
        g = erdos_renyi(n_nodes, p if p is not None else float(rng.uniform(0.2, 0.8)),
                        int(rng.integers(2**31)))
        if g.edge_count:
            break
    a = laplacian_weights(g, rho)
    beta = float(rng.uniform(0.0, 10.0)) if beta is None else beta
    seed = int(rng.integers(2**31))
    noise = jittered_noise(n_nodes, 1.0, beta, jitter, seed) if jitter else offset_noise(n_nodes, 1.0, beta)
    return a, noise


def random_subset(rng, n_nodes, min_size=2):
    size = int(rng.integers(min_size, n_nodes + 1))
    return sorted(rng.choice(n_nodes, size=size, replace=False).tolist())


def scaled_noise(base, pert, scale):
    return decompose_covariance(base.covariance + scale * pert)


def feasible_jittered(rng, n_nodes, rho, s, margin=1.0):
    """Jittered noise scaled (by bisection) to sit at ``margin`` x the largest feasible spread."""
    a, base = random_model(rng, n_nodes, rho)
    pert = jittered_noise(n_nodes, 1.0, base.beta, 0.1, int(rng.integers(2**31))).covariance - base.covariance
    lo, hi = 0.0, 1e3
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        try:
            ok = feasibility_margin(a, scaled_noise(base, pert, mid), s).feasible
        except ValueError:
            ok = False
        lo, hi = (mid, hi) if ok else (lo, mid)
    return a, scaled_noise(base, pert, lo * margin)


def infeasible_jittered(rng, n_nodes, rho):
    while True:
        a, noise = random_model(rng, n_nodes, rho, jitter=float(rng.uniform(0.2, 0.45)))
        if not feasibility_margin(a, noise, range(n_nodes)).feasible:
            return a, noise


def oracle_nig(a, noise, s):
    """``[A (I - A^2) R0]_S`` with ``R0`` from the vectorised Lyapunov solve (no fixed-point code)."""
    m = a.entries
    n = m.shape[0]
    r0 = np.linalg.solve(np.eye(n * n) - np.kron(m, m), noise.effective_covariance.ravel()).reshape(n, n)
    full = m @ (np.eye(n) - m @ m) @ r0
    return full[np.ix_(s, s)]
