"""Communication topologies and doubly stochastic mixing matrices.

The mixing matrix drives every consensus update: each round an agent
replaces its state with a weighted average of its neighbors' states.  The
spectral norm ``sigma`` of ``W - (1/n) 11^T`` is the per-round contraction
factor of disagreement; ``sigma < 1`` on any connected graph.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

STOCHASTICITY_TOL = 1e-12


@dataclass(frozen=True)
class Topology:
    """Undirected connected graph over nodes 0..n-1.

    Edges are stored normalized as (i, j) with i < j, no self-loops.
    """

    n: int
    edges: frozenset

    def neighbors(self, i: int) -> list:
        out = []
        for a, b in self.edges:
            if a == i:
                out.append(b)
            elif b == i:
                out.append(a)
        return sorted(out)

    def degree(self, i: int) -> int:
        return sum(1 for a, b in self.edges if i in (a, b))

    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.n, self.n))
        for a, b in self.edges:
            adj[a, b] = adj[b, a] = 1.0
        return adj


@dataclass(frozen=True)
class MixingMatrix:
    """Doubly stochastic symmetric weight matrix with cached spectral norm."""

    n: int
    w: np.ndarray
    sigma: float


def _normalize_edges(n: int, edges) -> frozenset:
    out = set()
    for i, j in edges:
        i, j = int(i), int(j)
        if i == j:
            raise ValueError(f"self-loop ({i},{i}) is not allowed")
        if not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"edge ({i},{j}) references a node outside 0..{n - 1}")
        out.add((min(i, j), max(i, j)))
    return frozenset(out)


def _is_connected(n: int, edges: frozenset) -> bool:
    if n == 1:
        return True
    adj = {i: [] for i in range(n)}
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == n


def build_topology(kind: str, n: int, custom_edges=None) -> Topology:
    """Build a named topology family, or validate a custom edge list.

    The star places node 0 at the center.  Custom graphs must be connected;
    a disconnected edge list is rejected rather than silently producing a
    non-contracting mixing matrix.
    """
    if n < 1:
        raise ValueError(f"node count must be >= 1, got {n}")
    if kind == "complete":
        edges = {(i, j) for i in range(n) for j in range(i + 1, n)}
    elif kind == "ring":
        if n == 1:
            edges = set()
        elif n == 2:
            edges = {(0, 1)}
        else:
            edges = {(i, (i + 1) % n) for i in range(n)}
    elif kind == "star":
        edges = {(0, i) for i in range(1, n)}
    elif kind == "custom":
        if custom_edges is None:
            raise ValueError("custom topology requires an edge list")
        edges = custom_edges
    else:
        raise ValueError(f"unknown topology kind {kind!r}")
    norm = _normalize_edges(n, edges)
    if not _is_connected(n, norm):
        raise ValueError(f"graph with n={n} and edges {sorted(norm)} is not connected")
    return Topology(n=n, edges=norm)


def metropolis_weights(topo: Topology) -> MixingMatrix:
    """Metropolis-Hastings weights: symmetric and doubly stochastic for any
    connected graph.

    w[i][j] = 1 / (1 + max(deg_i, deg_j)) on edges, diagonal absorbs the rest.
    """
    n = topo.n
    deg = [topo.degree(i) for i in range(n)]
    w = np.zeros((n, n))
    for i, j in topo.edges:
        w[i, j] = w[j, i] = 1.0 / (1.0 + max(deg[i], deg[j]))
    for i in range(n):
        w[i, i] = 1.0 - w[i].sum()
    w.flags.writeable = False
    return MixingMatrix(n=n, w=w, sigma=spectral_gap(w))


def spectral_gap(w: np.ndarray) -> float:
    """Spectral norm of W - (1/n) 11^T.

    For a symmetric doubly stochastic W this is the second-largest
    eigenvalue modulus of W.
    """
    w = np.asarray(w, dtype=float)
    n = w.shape[0]
    if w.shape != (n, n):
        raise ValueError(f"expected a square matrix, got shape {w.shape}")
    if not np.allclose(w, w.T, atol=1e-12):
        raise ValueError("mixing matrix must be symmetric")
    dev = w - np.full((n, n), 1.0 / n)
    try:
        eigs = np.linalg.eigvalsh(dev)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"eigensolver failed on {n}x{n} mixing matrix: {exc}") from exc
    return float(np.max(np.abs(eigs)))


@dataclass(frozen=True)
class StochasticityReport:
    max_row_dev: float
    max_col_dev: float
    min_entry: float
    passed: bool


def validate_doubly_stochastic(w: np.ndarray, tol: float = STOCHASTICITY_TOL) -> StochasticityReport:
    """Check row sums, column sums and nonnegativity of a weight matrix."""
    w = np.asarray(w, dtype=float)
    row_dev = float(np.max(np.abs(w.sum(axis=1) - 1.0)))
    col_dev = float(np.max(np.abs(w.sum(axis=0) - 1.0)))
    min_entry = float(w.min())
    passed = row_dev <= tol and col_dev <= tol and min_entry >= 0.0
    return StochasticityReport(row_dev, col_dev, min_entry, passed)


def parse_edge_list(text: str) -> list:
    """Parse an edge list of the form "0-1,1-2,2-0"."""
    edges = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            a, b = part.split("-")
            edges.append((int(a), int(b)))
        except ValueError as exc:
            raise ValueError(f"bad edge {part!r}, expected 'i-j'") from exc
    return edges
