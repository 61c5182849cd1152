"""Time-varying directed communication graphs and their mixing matrices.

Round graphs are strongly connected digraphs with self-loops. Each round
gets a pair of weight matrices: a row-stochastic A (decision mixing over
in-neighbors) and a column-stochastic B (tracker mixing over out-neighbors),
both with uniform neighbor weights. The absolute-probability sequences
phi_t (defined backwards by phi_{t+1}^T A_t = phi_t^T) and pi_t (defined
forwards by pi_{t+1} = B_t pi_t, pi_0 = 1/n) weight the consensus and
tracking error norms.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, DiagnosticsError

STOCHASTICITY_TOL = 1e-12
PHI_TOL = 1e-10

# rng stream tag so graph draws never collide with sampling streams
_GRAPH_TAG = 11


def _reachable(n: int, adj: list[list[int]], start: int) -> bool:
    seen = bytearray(n)
    seen[start] = 1
    queue = deque([start])
    count = 1
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = 1
                count += 1
                queue.append(v)
    return count == n


def _strongly_connected(n: int, edges: Iterable[tuple[int, int]]) -> bool:
    fwd: list[list[int]] = [[] for _ in range(n)]
    rev: list[list[int]] = [[] for _ in range(n)]
    for j, i in edges:
        if j != i:
            fwd[j].append(i)
            rev[i].append(j)
    return _reachable(n, fwd, 0) and _reachable(n, rev, 0)


@dataclass(frozen=True)
class Digraph:
    """Strongly connected digraph with self-loops on every node.

    An edge (j, i) means node i receives from node j. Self-loops are part
    of ``edges``; the constructor adds and validates them.
    """

    n: int
    edges: frozenset

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "Digraph":
        if n < 2:
            raise ConfigError(f"digraph needs n >= 2 agents, got n={n}")
        full = set()
        for j, i in edges:
            if not (0 <= j < n and 0 <= i < n):
                raise ConfigError(f"edge ({j}, {i}) outside node range 0..{n - 1}")
            full.add((int(j), int(i)))
        full.update((i, i) for i in range(n))
        if not _strongly_connected(n, full):
            raise ConfigError("digraph is not strongly connected")
        return cls(n=n, edges=frozenset(full))

    def in_neighbors(self, i: int) -> list[int]:
        return sorted(j for j, k in self.edges if k == i and j != i)

    def out_neighbors(self, i: int) -> list[int]:
        return sorted(k for j, k in self.edges if j == i and k != i)

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)


def complete_digraph(n: int) -> Digraph:
    return Digraph.from_edges(n, ((j, i) for j in range(n) for i in range(n)))


def ring_digraph(n: int) -> Digraph:
    return Digraph.from_edges(n, ((i, (i + 1) % n) for i in range(n)))


def random_base_digraph(n: int, edge_prob: float, seed: int) -> Digraph:
    """Seeded Erdos-style base digraph, made strongly connected by a ring."""
    if not 0.0 <= edge_prob <= 1.0:
        raise ConfigError(f"edge_prob must be in [0, 1], got {edge_prob}")
    rng = np.random.default_rng([seed, _GRAPH_TAG, 0])
    edges = {(i, (i + 1) % n) for i in range(n)}
    for j in range(n):
        for i in range(n):
            if i != j and rng.random() < edge_prob:
                edges.add((j, i))
    return Digraph.from_edges(n, edges)


def generate_round_graph(
    base: Digraph, keep_prob: float, seed: int, t: int
) -> Digraph:
    """Sample the round-t graph by keeping each base edge with ``keep_prob``.

    Deterministic given (seed, t). If the sampled subgraph is not strongly
    connected, a random directed Hamiltonian cycle drawn from the same
    stream is unioned in, so the result is valid after exactly one repair.
    """
    if not 0.0 < keep_prob <= 1.0:
        raise ConfigError(f"keep_prob must be in (0, 1], got {keep_prob}")
    if keep_prob == 1.0:
        return base
    rng = np.random.default_rng([seed, _GRAPH_TAG, t])
    kept = set()
    for j, i in base.sorted_edges():
        if j == i:
            continue
        if rng.random() < keep_prob:
            kept.add((j, i))
    n = base.n
    loops = {(i, i) for i in range(n)}
    if not _strongly_connected(n, kept | loops):
        order = rng.permutation(n)
        kept.update(
            (int(order[k]), int(order[(k + 1) % n])) for k in range(n)
        )
    return Digraph.from_edges(n, kept)


@dataclass(frozen=True)
class MixingPair:
    """Round-t digraph with its row-stochastic A and column-stochastic B."""

    t: int
    graph: Digraph
    A: np.ndarray
    B: np.ndarray
    a_min: float
    b_min: float

    def validate(self, tol: float = STOCHASTICITY_TOL) -> None:
        n = self.graph.n
        row_err = np.abs(self.A.sum(axis=1) - 1.0).max()
        col_err = np.abs(self.B.sum(axis=0) - 1.0).max()
        if row_err > tol:
            raise ConfigError(f"A rows deviate from 1 by {row_err:.3e}")
        if col_err > tol:
            raise ConfigError(f"B columns deviate from 1 by {col_err:.3e}")
        for i in range(n):
            for j in range(n):
                has_edge = (j, i) in self.graph.edges
                if has_edge != (self.A[i, j] > 0) or has_edge != (self.B[i, j] > 0):
                    raise ConfigError(
                        f"sparsity pattern mismatch at entry ({i}, {j})"
                    )
        if self.a_min <= 0 or self.b_min <= 0:
            raise ConfigError("mixing weights must have positive minimum")


def build_mixing_pair(g: Digraph, t: int = 0) -> MixingPair:
    """Uniform-weight mixing matrices for a round graph.

    A[i, j] = 1/(indeg(i)+1) over j in in-neighbors of i plus i itself;
    B[j, i] = 1/(outdeg(i)+1) over j in out-neighbors of i plus i itself.
    """
    n = g.n
    A = np.zeros((n, n))
    B = np.zeros((n, n))
    for i in range(n):
        in_nbrs = g.in_neighbors(i)
        w = 1.0 / (len(in_nbrs) + 1)
        A[i, i] = w
        for j in in_nbrs:
            A[i, j] = w
    for i in range(n):
        out_nbrs = g.out_neighbors(i)
        w = 1.0 / (len(out_nbrs) + 1)
        B[i, i] = w
        for j in out_nbrs:
            B[j, i] = w
    pair = MixingPair(
        t=t,
        graph=g,
        A=A,
        B=B,
        a_min=float(A[A > 0].min()),
        b_min=float(B[B > 0].min()),
    )
    pair.validate()
    return pair


def pi_sequence(pairs: Sequence[MixingPair]) -> np.ndarray:
    """Column-stochastic absolute-probability sequence pi_0..pi_T.

    pi_0 = 1/n and pi_{t+1} = B_t pi_t, so the output has len(pairs)+1 rows.
    """
    if not pairs:
        raise ConfigError("pi_sequence needs at least one mixing pair")
    n = pairs[0].graph.n
    out = np.empty((len(pairs) + 1, n))
    out[0] = 1.0 / n
    for k, pair in enumerate(pairs):
        out[k + 1] = pair.B @ out[k]
    return out


def phi_sequence(
    pairs: Sequence[MixingPair], t: int, tol: float = PHI_TOL
) -> np.ndarray:
    """Row-stochastic absolute-probability vector phi_t.

    Accumulates the backward product A_{t+W-1} ... A_t with a growing
    window W until the rows of the product agree to ``tol`` in the
    infinity norm, then returns the (normalized) common row.
    """
    if tol <= 0:
        raise ConfigError(f"tolerance must be positive, got {tol}")
    if not 0 <= t < len(pairs):
        raise ConfigError(f"round {t} outside the provided horizon")
    P = pairs[t].A.copy()
    disc = float((P.max(axis=0) - P.min(axis=0)).max())
    k = t + 1
    while disc >= tol:
        if k >= len(pairs):
            raise DiagnosticsError(
                f"phi window exhausted at round {t}: row discrepancy "
                f"{disc:.3e} after {k - t} factors (tol {tol:.1e})"
            )
        P = pairs[k].A @ P
        disc = float((P.max(axis=0) - P.min(axis=0)).max())
        k += 1
    phi = P.mean(axis=0)
    return phi / phi.sum()


def phi_table(
    pairs: Sequence[MixingPair], rounds: int, tol: float = PHI_TOL
) -> np.ndarray:
    """phi_t for every t in 0..rounds via one backward sweep.

    All rows share the same top end of the product chain, which makes the
    defining relation phi_{t+1}^T A_t = phi_t^T exact to floating point.
    ``pairs`` must extend far enough past ``rounds`` for the products to
    reach the rank-one regime.
    """
    if rounds >= len(pairs):
        raise ConfigError("phi_table needs pairs covering every requested round")
    n = pairs[0].graph.n
    out = np.empty((rounds + 1, n))
    worst = 0.0
    P = np.eye(n)
    for t in range(len(pairs) - 1, -1, -1):
        P = P @ pairs[t].A
        if t <= rounds:
            disc = float((P.max(axis=0) - P.min(axis=0)).max())
            worst = max(worst, disc)
            row = P.mean(axis=0)
            out[t] = row / row.sum()
    if worst >= tol:
        raise DiagnosticsError(
            f"phi horizon too short: worst row discrepancy {worst:.3e} "
            f"(tol {tol:.1e}); extend the graph sequence"
        )
    return out


@dataclass(frozen=True)
class ProbSequences:
    """phi/pi tables for a run horizon, one row per round."""

    phi: np.ndarray
    pi: np.ndarray
    window: int

    def eta(self) -> float:
        return float(np.min(np.sum(self.phi * self.pi, axis=1)))


@dataclass(frozen=True)
class GraphStats:
    """Diameter and maximal edge utility of a round graph."""

    diameter: int
    max_edge_utility: int


def _bfs_distances(n: int, adj: list[list[int]], src: int) -> list[int]:
    dist = [-1] * n
    dist[src] = 0
    queue = deque([src])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def graph_stats(g: Digraph) -> GraphStats:
    """BFS diameter and canonical-shortest-path edge utility.

    The canonical path to a node picks the minimum-index predecessor at
    distance d-1, so the edge counts are deterministic. Utility of an edge
    is the number of ordered node pairs whose canonical path traverses it.
    """
    n = g.n
    adj = [g.out_neighbors(u) for u in range(n)]
    radj = [g.in_neighbors(u) for u in range(n)]
    usage: dict[tuple[int, int], int] = {}
    diameter = 1
    for src in range(n):
        dist = _bfs_distances(n, adj, src)
        diameter = max(diameter, max(dist))
        for dst in range(n):
            if dst == src:
                continue
            # walk canonical predecessors back to the source
            v = dst
            while v != src:
                u = min(p for p in radj[v] if dist[p] == dist[v] - 1)
                usage[(u, v)] = usage.get((u, v), 0) + 1
                v = u
    return GraphStats(diameter=int(diameter), max_edge_utility=max(usage.values()))


def save_graph_sequence(path, graphs: Sequence[Digraph]) -> None:
    """Line-oriented export: header "n T", then one "t: j i" line per edge."""
    if not graphs:
        raise ConfigError("cannot export an empty graph sequence")
    n = graphs[0].n
    lines = [f"{n} {len(graphs)}"]
    for t, g in enumerate(graphs):
        if g.n != n:
            raise ConfigError("graph sequence mixes different agent counts")
        lines.extend(f"{t}: {j} {i}" for j, i in g.sorted_edges())
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_graph_sequence(path) -> list[Digraph]:
    with open(path, "r", encoding="ascii") as fh:
        raw = [ln.strip() for ln in fh if ln.strip()]
    if not raw:
        raise ConfigError(f"{path}: empty graph sequence file")
    try:
        n, n_rounds = (int(tok) for tok in raw[0].split())
    except ValueError as exc:
        raise ConfigError(f"{path}: bad header {raw[0]!r}") from exc
    per_round: list[set] = [set() for _ in range(n_rounds)]
    for ln in raw[1:]:
        try:
            head, tail = ln.split(":")
            t = int(head)
            j, i = (int(tok) for tok in tail.split())
        except ValueError as exc:
            raise ConfigError(f"{path}: bad edge line {ln!r}") from exc
        if not 0 <= t < n_rounds:
            raise ConfigError(f"{path}: round {t} outside header range")
        per_round[t].add((j, i))
    return [Digraph.from_edges(n, edges) for edges in per_round]
