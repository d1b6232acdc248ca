"""Undirected propagation networks and their path statistics.

Graphs are immutable after construction: dense integer node ids 0..n-1,
sorted adjacency lists, connectivity enforced.  The two statistics that
drive timer parameterization are the diameter (always exact, via BFS)
and the longest-simple-path length (exact by exhaustive search on small
graphs or by closed form for the constructor topologies, otherwise the
conservative upper bound n-1).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .errors import ConnectivityError, ParameterError, TopologyError

DEFAULT_EXACT_SEARCH_CAP = 64


@dataclass(frozen=True)
class Graph:
    """Connected undirected graph with dense ids and sorted adjacency."""

    node_count: int
    edges: frozenset  # frozenset of (i, j) tuples with i < j
    adjacency: tuple  # tuple of tuples, sorted ascending per node
    name: str | None = None  # constructor tag like "ring:16", None for custom

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def degree(self, i: int) -> int:
        return len(self.adjacency[i])


@dataclass(frozen=True)
class TopologyStats:
    """Diameter and longest-simple-path length, both in edge counts."""

    diameter: int
    longest_simple_path: int
    lg_is_exact: bool


def _make_graph(n: int, edge_pairs, name=None) -> Graph:
    edges = set()
    for i, j in edge_pairs:
        if not (0 <= i < n and 0 <= j < n):
            raise TopologyError(f"edge ({i},{j}) out of range for n={n}")
        if i == j:
            raise TopologyError(f"self-loop at node {i}")
        edges.add((i, j) if i < j else (j, i))
    if not edges:
        raise TopologyError("empty edge list")
    adj = [[] for _ in range(n)]
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = [False] * n
    queue = deque([0])
    seen[0] = True
    count = 1
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                count += 1
                queue.append(v)
    if count != n:
        missing = [i for i in range(n) if not seen[i]]
        raise ConnectivityError(f"graph is disconnected; unreachable nodes {missing[:8]}")
    return Graph(
        node_count=n,
        edges=frozenset(edges),
        adjacency=tuple(tuple(sorted(a)) for a in adj),
        name=name,
    )


def build_ring(n: int) -> Graph:
    """Cycle graph on n >= 3 nodes; every node has degree 2."""
    if n < 3:
        raise TopologyError(f"ring needs n >= 3, got {n}")
    return _make_graph(n, [(i, (i + 1) % n) for i in range(n)], name=f"ring:{n}")


def build_grid(rows: int, cols: int) -> Graph:
    """4-neighbor lattice without wraparound, nodes in row-major order."""
    if rows < 2 or cols < 2:
        raise TopologyError(f"grid needs rows, cols >= 2, got {rows}x{cols}")
    edges = []
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            if c + 1 < cols:
                edges.append((i, i + 1))
            if r + 1 < rows:
                edges.append((i, i + cols))
    return _make_graph(rows * cols, edges, name=f"grid:{rows}x{cols}")


def build_hypercube(dim: int) -> Graph:
    """2^dim nodes; i and j adjacent iff their ids differ in exactly one bit."""
    if dim < 2:
        raise TopologyError(f"hypercube needs dim >= 2, got {dim}")
    n = 1 << dim
    edges = []
    for i in range(n):
        for b in range(dim):
            j = i ^ (1 << b)
            if i < j:
                edges.append((i, j))
    return _make_graph(n, edges, name=f"hypercube:{dim}")


def from_edge_list(n: int, edges) -> Graph:
    """Normalized graph from a raw pair list: dedup, symmetric, connected."""
    if n < 2:
        raise TopologyError(f"need n >= 2, got {n}")
    edges = list(edges)
    if not edges:
        raise TopologyError("empty edge list")
    return _make_graph(n, edges)


def diameter(g: Graph) -> int:
    """Exact diameter via BFS from every node."""
    best = 0
    for src in range(g.node_count):
        dist = [-1] * g.node_count
        dist[src] = 0
        queue = deque([src])
        while queue:
            u = queue.popleft()
            for v in g.adjacency[u]:
                if dist[v] < 0:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        best = max(best, max(dist))
    return best


def longest_simple_path_exact(g: Graph) -> int:
    """Exhaustive DFS over simple paths; exponential, small graphs only."""
    n = g.node_count
    adj_bits = [0] * n
    for i in range(n):
        for j in g.adjacency[i]:
            adj_bits[i] |= 1 << j
    best = 0
    target = n - 1

    def dfs(node, visited, length):
        nonlocal best
        if length > best:
            best = length
            if best == target:
                return True
        cand = adj_bits[node] & ~visited
        while cand:
            low = cand & -cand
            cand ^= low
            if dfs(low.bit_length() - 1, visited | low, length + 1):
                return True
        return False

    for start in range(n):
        if dfs(start, 1 << start, 0):
            break
    return best


def _closed_form_lg(g: Graph) -> int | None:
    # Rings, grids, and hypercubes all admit a Hamiltonian path.
    if g.name is None:
        return None
    kind = g.name.split(":", 1)[0]
    if kind in ("ring", "grid", "hypercube"):
        return g.node_count - 1
    return None


def topology_stats(g: Graph, lg_override: int | None = None,
                   exact_cap: int = DEFAULT_EXACT_SEARCH_CAP) -> TopologyStats:
    """Diameter (always exact) and longest simple path (exact when feasible).

    Closed forms short-circuit the exhaustive search for constructor-built
    rings/grids/hypercubes; otherwise the search runs when n <= exact_cap.
    Above the cap the override is used if given, else the bound n-1 with
    lg_is_exact=False.
    """
    d = diameter(g)
    if lg_override is not None and lg_override < d:
        raise ParameterError(
            f"lg_override={lg_override} is below the diameter {d}")
    closed = _closed_form_lg(g)
    if closed is not None:
        return TopologyStats(diameter=d, longest_simple_path=closed, lg_is_exact=True)
    if g.node_count <= exact_cap:
        return TopologyStats(diameter=d, longest_simple_path=longest_simple_path_exact(g),
                             lg_is_exact=True)
    if lg_override is not None:
        return TopologyStats(diameter=d, longest_simple_path=lg_override, lg_is_exact=False)
    return TopologyStats(diameter=d, longest_simple_path=g.node_count - 1, lg_is_exact=False)


def parse_topology(spec: str) -> Graph:
    """Build a graph from a name like ring:16, grid:4x4, or hypercube:6."""
    try:
        kind, _, arg = spec.partition(":")
        if kind == "ring":
            return build_ring(int(arg))
        if kind == "grid":
            rows, cols = arg.lower().split("x")
            return build_grid(int(rows), int(cols))
        if kind == "hypercube":
            return build_hypercube(int(arg))
    except (ValueError, TypeError) as exc:
        raise TopologyError(f"cannot parse topology spec {spec!r}: {exc}") from exc
    raise TopologyError(f"unknown topology kind in spec {spec!r}")


def read_edge_list(path) -> Graph:
    """Read the text format: first line 'n m', then m lines 'i j'."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise TopologyError(f"{path}: expected header 'n m'")
        n, m = int(header[0]), int(header[1])
        edges = []
        for _ in range(m):
            parts = fh.readline().split()
            if len(parts) != 2:
                raise TopologyError(f"{path}: truncated edge list")
            edges.append((int(parts[0]), int(parts[1])))
    return from_edge_list(n, edges)


def write_edge_list(g: Graph, path) -> None:
    edges = sorted(g.edges)
    with open(path, "w") as fh:
        fh.write(f"{g.node_count} {len(edges)}\n")
        for i, j in edges:
            fh.write(f"{i} {j}\n")
