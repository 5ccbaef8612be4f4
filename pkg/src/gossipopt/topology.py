"""Gossip mixing matrices for standard graph families.

Builds symmetric doubly stochastic weights, computes the spectral gap
that governs how fast one gossip round shrinks disagreement, and exposes
the contraction quantities used by the property tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ContractViolationError, TopologyError

RING = "ring"
COMPLETE = "complete"
PATH = "path"
STAR = "star"
CUSTOM = "custom"
TOPOLOGIES = (RING, COMPLETE, PATH, STAR, CUSTOM)

UNIFORM_NEIGHBOR = "uniform_neighbor"
LAZY_METROPOLIS = "lazy_metropolis"
SCHEMES = (UNIFORM_NEIGHBOR, LAZY_METROPOLIS)

_GAP_FLOOR = 1e-12
_DENSE_EIG_LIMIT = 64


@dataclass
class MixingMatrix:
    """Symmetric doubly stochastic gossip weights with the cached spectral gap."""

    weights: np.ndarray
    spectral_gap: float

    @property
    def n(self) -> int:
        return self.weights.shape[0]


def ring_adjacency(n: int) -> np.ndarray:
    adj = np.zeros((n, n), dtype=bool)
    for i in range(n):
        adj[i, (i + 1) % n] = adj[(i + 1) % n, i] = True
    return adj


def path_adjacency(n: int) -> np.ndarray:
    adj = np.zeros((n, n), dtype=bool)
    for i in range(n - 1):
        adj[i, i + 1] = adj[i + 1, i] = True
    return adj


def star_adjacency(n: int) -> np.ndarray:
    adj = np.zeros((n, n), dtype=bool)
    adj[0, 1:] = adj[1:, 0] = True
    return adj


def complete_adjacency(n: int) -> np.ndarray:
    adj = np.ones((n, n), dtype=bool)
    np.fill_diagonal(adj, False)
    return adj


def parse_edge_list(text: str, n: int | None = None) -> np.ndarray:
    """Read an undirected edge list, one 0-based "i j" pair per line."""
    edges = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise TopologyError(f"line {lineno}: expected 'i j', got {line!r}")
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            raise TopologyError(f"line {lineno}: non-integer endpoint in {line!r}") from None
        if i < 0 or j < 0:
            raise TopologyError(f"line {lineno}: negative vertex id in {line!r}")
        if i == j:
            raise TopologyError(f"line {lineno}: self-loop {i}")
        edges.append((i, j))
    if not edges:
        raise TopologyError("edge list is empty")
    size = n if n is not None else 1 + max(max(e) for e in edges)
    adj = np.zeros((size, size), dtype=bool)
    for i, j in edges:
        if i >= size or j >= size:
            raise TopologyError(f"vertex id {max(i, j)} exceeds graph size {size}")
        adj[i, j] = adj[j, i] = True
    return adj


def _check_adjacency(adj: np.ndarray) -> np.ndarray:
    adj = np.asarray(adj, dtype=bool)
    n = adj.shape[0]
    if adj.ndim != 2 or adj.shape[1] != n:
        raise TopologyError(f"adjacency must be square, got shape {adj.shape}")
    if not np.array_equal(adj, adj.T):
        raise TopologyError("adjacency must be symmetric")
    if np.any(np.diag(adj)):
        raise TopologyError("adjacency must not contain self-loops")
    # breadth-first reachability from vertex 0
    reached = np.zeros(n, dtype=bool)
    reached[0] = True
    frontier = reached.copy()
    while frontier.any():
        frontier = (adj[frontier].any(axis=0)) & ~reached
        reached |= frontier
    if not reached.all():
        raise TopologyError("graph is disconnected")
    return adj


def build_mixing_matrix(
    kind: str,
    n: int,
    scheme: str = UNIFORM_NEIGHBOR,
    adjacency: np.ndarray | None = None,
) -> MixingMatrix:
    """Build the gossip weights for a named topology.

    ``uniform_neighbor`` gives every neighbor and the node itself weight
    1/(degree+1); it requires a regular graph (ring, complete). The lazy
    Metropolis scheme handles arbitrary connected graphs and keeps
    self-weights at least 1/2, which rules out a degenerate -1 eigenvalue.
    """
    if kind not in TOPOLOGIES:
        raise ConfigurationError(f"unknown topology {kind!r}")
    if scheme not in SCHEMES:
        raise ConfigurationError(f"unknown weight scheme {scheme!r}")
    if kind == RING:
        if n < 3:
            raise ConfigurationError(f"ring needs n >= 3 agents, got {n}")
        adj = ring_adjacency(n)
    elif kind == COMPLETE:
        if n < 2:
            raise ConfigurationError(f"complete graph needs n >= 2 agents, got {n}")
        adj = complete_adjacency(n)
    elif kind == PATH:
        if n < 2:
            raise ConfigurationError(f"path needs n >= 2 agents, got {n}")
        adj = path_adjacency(n)
    elif kind == STAR:
        if n < 2:
            raise ConfigurationError(f"star needs n >= 2 agents, got {n}")
        adj = star_adjacency(n)
    else:
        if adjacency is None:
            raise ConfigurationError("custom topology needs an adjacency matrix")
        adj = np.asarray(adjacency)
        if adj.shape[0] != n:
            raise ConfigurationError(
                f"adjacency size {adj.shape[0]} does not match n={n}"
            )
    adj = _check_adjacency(adj)
    degrees = adj.sum(axis=1)
    if scheme == UNIFORM_NEIGHBOR:
        if len(set(degrees.tolist())) != 1:
            raise ConfigurationError(
                "uniform_neighbor weights need a regular graph; "
                "use lazy_metropolis instead"
            )
        w = 1.0 / (degrees[0] + 1)
        weights = np.where(adj, w, 0.0)
        np.fill_diagonal(weights, w)
    else:
        weights = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                if adj[i, j]:
                    weights[i, j] = weights[j, i] = 1.0 / (2.0 * max(degrees[i], degrees[j]))
        np.fill_diagonal(weights, 1.0 - weights.sum(axis=1))
    validate_mixing_weights(weights)
    gap = compute_spectral_gap(weights)
    return MixingMatrix(weights=weights, spectral_gap=gap)


def validate_mixing_weights(weights: np.ndarray, tol: float = 1e-12) -> None:
    """Check symmetry, nonnegativity, and both stochasticity sums."""
    w = np.asarray(weights)
    n = w.shape[0]
    if w.ndim != 2 or w.shape[1] != n:
        raise ContractViolationError(f"weights must be square, got shape {w.shape}")
    if np.min(w) < -tol:
        raise ContractViolationError(f"negative weight {np.min(w)}")
    if np.max(np.abs(w - w.T)) > tol:
        raise ContractViolationError("weights must be symmetric")
    ones = np.ones(n)
    if np.max(np.abs(w @ ones - ones)) > tol:
        raise ContractViolationError("row sums deviate from 1")
    if np.max(np.abs(ones @ w - ones)) > tol:
        raise ContractViolationError("column sums deviate from 1")


def _power_iteration_norm(mat: np.ndarray, tol: float = _GAP_FLOOR, max_iter: int = 100000) -> float:
    """Spectral norm of a symmetric matrix by power iteration (fixed seed)."""
    n = mat.shape[0]
    rng = np.random.default_rng(0x5EED)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    estimate = 0.0
    for _ in range(max_iter):
        w = mat @ v
        norm = np.linalg.norm(w)
        if norm < tol:
            return 0.0
        v = w / norm
        if abs(norm - estimate) <= tol * max(1.0, norm):
            return norm
        estimate = norm
    return estimate


def compute_spectral_gap(weights: np.ndarray) -> float:
    """1 minus the largest nonprincipal eigenvalue magnitude.

    Small matrices get a full symmetric eigendecomposition; larger ones a
    power iteration on the weights with the consensus direction projected
    out. Raises when the gap closes (disconnected or degenerate mixing).
    """
    w = np.asarray(weights, dtype=float)
    n = w.shape[0]
    if n <= _DENSE_EIG_LIMIT:
        vals = np.linalg.eigvalsh(w)
        # drop a single principal eigenvalue (it equals 1 for valid weights)
        rest = np.delete(vals, np.argmax(vals))
        second = float(np.max(np.abs(rest))) if rest.size else 0.0
    else:
        deflated = w - np.full((n, n), 1.0 / n)
        second = _power_iteration_norm(deflated)
    gap = 1.0 - second
    if gap <= _GAP_FLOOR:
        raise TopologyError(f"zero spectral gap (|lambda_2| = {second})")
    return gap


def contraction_check(mix: MixingMatrix, Z: np.ndarray) -> tuple[float, float]:
    """One-gossip shrink quantities: (||Z W - Zbar||_F, (1-gap) ||Z - Zbar||_F).

    The property tests assert lhs <= rhs (+ slack) for every valid mixing
    matrix; consensus deviation can only contract.
    """
    Z = np.asarray(Z, dtype=float)
    if Z.ndim != 2 or Z.shape[1] != mix.n:
        raise ContractViolationError(
            f"state has shape {Z.shape}, expected (d, {mix.n})"
        )
    zbar = Z.mean(axis=1, keepdims=True)
    lhs = float(np.linalg.norm(Z @ mix.weights - zbar))
    rhs = (1.0 - mix.spectral_gap) * float(np.linalg.norm(Z - zbar))
    return lhs, rhs
