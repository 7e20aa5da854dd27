"""Graphs, derived operators and an exhaustive Max-Cut oracle.

Cut convention used everywhere in the package::

    cut(z) = 1/2 * sum_{(i,j) in E} w_ij (1 - z_i z_j),   z_i in {+1, -1}

so that ``z^T L z == 4 * cut(z)`` for the Laplacian ``L = D - A``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import GraphGenerationError, ResourceCapError

ORACLE_MAX_NODES = 26
RRG_MAX_RETRIES = 200

__all__ = [
    "Graph",
    "LineGraphView",
    "CutAssignment",
    "cut_value",
    "random_regular",
    "max_cut_oracle",
    "line_graph_view",
    "power_adjacency",
    "read_edgelist",
    "write_edgelist",
    "spins_to_bits",
    "bits_to_spins",
]


@dataclass(frozen=True)
class Graph:
    """Undirected, simple graph with optional real edge weights.

    Edges are stored canonically as ``(i, j, w)`` with ``i < j``, sorted.
    """

    n: int
    edges: tuple[tuple[int, int, float], ...] = ()

    def __post_init__(self):
        if self.n < 0:
            raise ValueError(f"node count must be non-negative, got {self.n}")
        canon = {}
        for e in self.edges:
            if len(e) == 2:
                i, j, w = int(e[0]), int(e[1]), 1.0
            else:
                i, j, w = int(e[0]), int(e[1]), float(e[2])
            if i == j:
                raise ValueError(f"self-loop on node {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge ({i}, {j}) out of range for n={self.n}")
            key = (min(i, j), max(i, j))
            if key in canon:
                raise ValueError(f"duplicate edge {key}")
            if not np.isfinite(w):
                raise ValueError(f"non-finite weight on edge {key}")
            canon[key] = w
        object.__setattr__(self, "edges", tuple((i, j, canon[(i, j)]) for i, j in sorted(canon)))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Sequence[float]]) -> "Graph":
        return cls(n, tuple(tuple(e) for e in edges))

    @property
    def m(self) -> int:
        return len(self.edges)

    @cached_property
    def edge_index(self) -> np.ndarray:
        """``(m, 2)`` int array of endpoints."""
        if not self.edges:
            return np.zeros((0, 2), dtype=np.int64)
        return np.array([(i, j) for i, j, _ in self.edges], dtype=np.int64)

    @cached_property
    def weights(self) -> np.ndarray:
        return np.array([w for _, _, w in self.edges], dtype=float)

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    @property
    def is_unweighted(self) -> bool:
        return bool(np.all(self.weights == 1.0))

    @cached_property
    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        if self.edges:
            i, j = self.edge_index.T
            a[i, j] = self.weights
            a[j, i] = self.weights
        a.setflags(write=False)
        return a

    @cached_property
    def degrees(self) -> np.ndarray:
        d = self.adjacency.sum(axis=1)
        d.setflags(write=False)
        return d

    @property
    def degree(self) -> np.ndarray:
        """Diagonal degree matrix ``D``."""
        return np.diag(self.degrees)

    @cached_property
    def laplacian(self) -> np.ndarray:
        lap = np.diag(self.degrees) - self.adjacency
        lap.setflags(write=False)
        return lap

    @cached_property
    def neighbours(self) -> tuple[tuple[int, ...], ...]:
        nb: list[list[int]] = [[] for _ in range(self.n)]
        for i, j, _ in self.edges:
            nb[i].append(j)
            nb[j].append(i)
        return tuple(tuple(sorted(x)) for x in nb)

    def relabel(self, perm: Sequence[int]) -> "Graph":
        """Return the graph with node ``v`` renamed to ``perm[v]``."""
        perm = list(perm)
        if sorted(perm) != list(range(self.n)):
            raise ValueError("perm must be a permutation of range(n)")
        return Graph(self.n, tuple((perm[i], perm[j], w) for i, j, w in self.edges))

    def cut_value(self, z: Sequence[int]) -> float:
        return cut_value(self, z)


@dataclass(frozen=True)
class CutAssignment:
    """A spin assignment ``z`` and its cut value."""

    z: np.ndarray
    cut_value: float

    @property
    def bits(self) -> np.ndarray:
        return spins_to_bits(self.z)


@dataclass(frozen=True)
class LineGraphView:
    """Directed line graph of ``G`` with the operators LGNN layers consume.

    ``directed_nodes[k] = (i, j)`` is the directed edge ``i -> j``; each
    undirected edge ``(i, j)`` contributes ``(i -> j)`` at index ``2e`` and
    ``(j -> i)`` at ``2e + 1``.
    """

    directed_nodes: tuple[tuple[int, int], ...]
    B: np.ndarray
    S: np.ndarray
    U: np.ndarray
    B_powers: tuple[np.ndarray, ...] = field(default=())

    @property
    def size(self) -> int:
        return len(self.directed_nodes)

    @cached_property
    def degrees(self) -> np.ndarray:
        """Out-degree of each line-graph node under ``B``."""
        return self.B.sum(axis=1)


def spins_to_bits(z) -> np.ndarray:
    z = np.asarray(z)
    return ((z + 1) // 2).astype(np.int64)


def bits_to_spins(x) -> np.ndarray:
    x = np.asarray(x)
    return (2 * x - 1).astype(np.int64)


def cut_value(g: Graph, z: Sequence[int]) -> float:
    z = np.asarray(z)
    if z.shape != (g.n,):
        raise ValueError(f"assignment has shape {z.shape}, expected ({g.n},)")
    if g.m == 0:
        return 0.0
    i, j = g.edge_index.T
    return float(0.5 * np.sum(g.weights * (1 - z[i] * z[j])))


def _stub_matching(n: int, k: int, rng: np.random.Generator) -> set[tuple[int, int]] | None:
    stubs = np.repeat(np.arange(n), k)
    rng.shuffle(stubs)
    pairs = stubs.reshape(-1, 2)
    edges = set()
    for a, b in pairs:
        if a == b:
            return None
        key = (int(min(a, b)), int(max(a, b)))
        if key in edges:
            return None
        edges.add(key)
    return edges


def random_regular(n: int, k: int, seed: int = 0, max_retries: int = RRG_MAX_RETRIES) -> Graph:
    """Sample a simple ``k``-regular graph on ``n`` nodes.

    Configuration (pairing) model: shuffle ``n*k`` stubs, pair them up and
    reject the whole matching if it contains a self-loop or a multi-edge.
    The same ``seed`` always yields the same edge set.
    """
    if k < 0 or n <= 0:
        raise ValueError(f"need n > 0 and k >= 0, got n={n}, k={k}")
    if k >= n:
        raise ValueError(f"degree k={k} must be smaller than node count n={n}")
    if (n * k) % 2:
        raise ValueError(f"n*k must be even, got n={n}, k={k}")
    rng = np.random.default_rng(seed)
    for _ in range(max_retries):
        edges = _stub_matching(n, k, rng)
        if edges is not None:
            return Graph(n, tuple((i, j, 1.0) for i, j in sorted(edges)))
    raise GraphGenerationError(
        f"configuration model failed {max_retries} times for n={n}, k={k}, seed={seed}"
    )


def max_cut_oracle(g: Graph, chunk_bits: int = 16) -> CutAssignment:
    """Exact Max-Cut by exhaustive enumeration with ``z_0 = +1`` fixed.

    The first maximiser in enumeration order is returned, independent of
    ``chunk_bits``.
    """
    if g.n > ORACLE_MAX_NODES:
        raise ResourceCapError(f"oracle limited to n <= {ORACLE_MAX_NODES}, got n={g.n}")
    if g.n == 0:
        return CutAssignment(np.zeros(0, dtype=np.int64), 0.0)
    if g.m == 0:
        return CutAssignment(np.ones(g.n, dtype=np.int64), 0.0)
    free = g.n - 1
    total = 1 << free
    chunk = 1 << min(chunk_bits, free)
    # bit k of the counter is node k+1; node 0 is pinned to bit value 0
    ei, ej = g.edge_index.T
    w = g.weights
    best_val, best_idx = -np.inf, 0
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        bits = np.zeros((idx.size, g.n), dtype=np.int8)
        for v in range(1, g.n):
            bits[:, v] = (idx >> (v - 1)) & 1
        crossing = bits[:, ei] ^ bits[:, ej]
        vals = crossing @ w
        k = int(np.argmax(vals))
        if vals[k] > best_val:
            best_val, best_idx = float(vals[k]), int(idx[k])
    bits = np.array([0] + [(best_idx >> (v - 1)) & 1 for v in range(1, g.n)], dtype=np.int64)
    z = 1 - 2 * bits
    return CutAssignment(z, cut_value(g, z))


def _binary_powers(m: np.ndarray, count: int) -> tuple[np.ndarray, ...]:
    # support of M^(2^j) via repeated boolean squaring
    out = []
    cur = (m != 0).astype(np.int64)
    for _ in range(count):
        cur = np.minimum(1, cur @ cur)
        out.append(cur.astype(float))
    return tuple(out)


def power_adjacency(g: Graph, J: int) -> tuple[np.ndarray, ...]:
    """``A_j = min(1, A^(2^j))`` for ``j = 1..J`` (so ``A_1`` comes from ``A^2``)."""
    if J < 1:
        raise ValueError(f"hop count J must be >= 1, got {J}")
    return _binary_powers(g.adjacency, J)


def line_graph_view(g: Graph, J: int = 0) -> LineGraphView:
    """Directed line graph: non-backtracking ``B``, incidences ``S``/``U``, powers ``B_j``."""
    if g.m < 1:
        raise ValueError("line graph needs at least one edge")
    nodes: list[tuple[int, int]] = []
    for i, j, _ in g.edges:
        nodes.append((i, j))
        nodes.append((j, i))
    src = np.array([a for a, _ in nodes])
    dst = np.array([b for _, b in nodes])
    B = ((dst[:, None] == src[None, :]) & (src[:, None] != dst[None, :])).astype(float)
    cols = np.arange(len(nodes))
    U = np.zeros((g.n, len(nodes)))
    U[src, cols] = 1.0
    S = U.copy()
    S[dst, cols] = -1.0
    powers = _binary_powers(B, J) if J > 0 else ()
    for mat in (B, S, U, *powers):
        mat.setflags(write=False)
    return LineGraphView(tuple(nodes), B, S, U, powers)


def write_edgelist(g: Graph, path: str | Path) -> None:
    """Write ``n m`` then one ``i j [w]`` line per edge, sorted."""
    lines = [f"{g.n} {g.m}"]
    for i, j, w in g.edges:
        lines.append(f"{i} {j}" if w == 1.0 else f"{i} {j} {w!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_edgelist(path: str | Path) -> Graph:
    rows = [
        ln.split()
        for ln in Path(path).read_text(encoding="utf-8").splitlines()
        if ln.strip() and not ln.lstrip().startswith("#")
    ]
    if not rows or len(rows[0]) != 2:
        raise ValueError(f"{path}: header must be 'n m'")
    n, m = int(rows[0][0]), int(rows[0][1])
    body = rows[1:]
    if len(body) != m:
        raise ValueError(f"{path}: header declares {m} edges, found {len(body)}")
    edges = []
    for r in body:
        if len(r) not in (2, 3):
            raise ValueError(f"{path}: bad edge line {' '.join(r)!r}")
        edges.append((int(r[0]), int(r[1]), float(r[2]) if len(r) == 3 else 1.0))
    return Graph(n, tuple(edges))
