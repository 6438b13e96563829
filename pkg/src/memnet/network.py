"""Graphs, r-stage neighbourhoods and connection-weight matrices.

Nodes are addressed 1..N externally (files, labels, error messages) and
mapped to 0-based indices internally. All containers are frozen after
construction and can be shared freely across workers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    DuplicateCoordinates,
    MissingDistances,
    ValidationError,
)


@dataclass(frozen=True)
class Graph:
    """Undirected graph with optional node coordinates and edge distances.

    Parameters
    ----------
    num_nodes : int
        Number of nodes N; nodes are labelled 1..N.
    edges : frozenset of (int, int)
        Unordered pairs stored as (min, max), 1-indexed, no self loops.
    coords : ndarray, optional
        (N, 2) array of node coordinates.
    distances : dict, optional
        Positive edge length per edge key (min, max). When present, must
        be defined exactly on the edge set.
    labels : tuple of str, optional
        Display labels; defaults to "1".."N".
    """

    num_nodes: int
    edges: frozenset
    coords: np.ndarray | None = None
    distances: dict | None = None
    labels: tuple = field(default=None)

    def __post_init__(self):
        if self.num_nodes < 1:
            raise ValidationError("graph needs at least one node")
        for i, j in self.edges:
            if i == j:
                raise ValidationError(f"self-loop at node {i}")
            if not (1 <= i < j <= self.num_nodes):
                raise ValidationError(f"edge ({i},{j}) outside 1..{self.num_nodes}")
        if self.coords is not None:
            coords = np.asarray(self.coords, dtype=float)
            if coords.shape != (self.num_nodes, 2):
                raise DimensionMismatch("coords must be (N, 2)")
            object.__setattr__(self, "coords", coords)
        if self.distances is not None:
            if set(self.distances) != set(self.edges):
                raise ValidationError("distances must be defined exactly on the edge set")
            for e, d in self.distances.items():
                if not d > 0:
                    raise ValidationError(f"non-positive distance on edge {e}")
        if self.labels is None:
            object.__setattr__(
                self, "labels", tuple(str(i) for i in range(1, self.num_nodes + 1))
            )
        elif len(self.labels) != self.num_nodes:
            raise DimensionMismatch("labels must have one entry per node")

    @property
    def num_edges(self):
        return len(self.edges)

    def adjacency(self) -> np.ndarray:
        """Dense 0/1 adjacency matrix (N, N)."""
        a = np.zeros((self.num_nodes, self.num_nodes))
        for i, j in self.edges:
            a[i - 1, j - 1] = a[j - 1, i - 1] = 1.0
        return a

    def neighbour_lists(self):
        """Adjacency as a list of sorted 1-indexed neighbour lists."""
        nbrs = [[] for _ in range(self.num_nodes)]
        for i, j in self.edges:
            nbrs[i - 1].append(j)
            nbrs[j - 1].append(i)
        return [sorted(n) for n in nbrs]


def graph_from_edges(num_nodes, edge_list, distances=None, coords=None, labels=None):
    """Build a :class:`Graph` from an iterable of (i, j) pairs (1-indexed)."""
    edges = set()
    for i, j in edge_list:
        if i == j:
            raise ValidationError(f"self-loop at node {i}")
        edges.add((min(i, j), max(i, j)))
    dist = None
    if distances is not None:
        dist = {(min(i, j), max(i, j)): d for (i, j), d in distances.items()}
    return Graph(num_nodes, frozenset(edges), coords=coords, distances=dist, labels=labels)


@dataclass(frozen=True)
class NeighbourStructure:
    """Stage-r neighbour sets for every node.

    ``stage_sets[i][r - 1]`` is the frozenset of nodes (1-indexed) at
    shortest-path distance exactly r from node i+1.
    """

    max_stage: int
    stage_sets: tuple  # tuple over nodes of tuples over stages of frozensets

    def stage(self, node: int, r: int) -> frozenset:
        """Neighbour set of ``node`` (1-indexed) at stage ``r`` (1-based)."""
        return self.stage_sets[node - 1][r - 1]


def build_neighbour_stages(graph: Graph, max_stage: int) -> NeighbourStructure:
    """Breadth-first layering of each node's neighbourhood.

    Stage r holds the nodes at shortest-path distance exactly r; stages
    beyond the graph diameter are empty.
    """
    if max_stage < 1:
        raise ValidationError("max_stage must be >= 1")
    nbrs = graph.neighbour_lists()
    all_sets = []
    for start in range(1, graph.num_nodes + 1):
        dist = {start: 0}
        frontier = [start]
        stages = []
        for r in range(1, max_stage + 1):
            nxt = []
            for u in frontier:
                for v in nbrs[u - 1]:
                    if v not in dist:
                        dist[v] = r
                        nxt.append(v)
            stages.append(frozenset(nxt))
            frontier = nxt
        all_sets.append(tuple(stages))
    return NeighbourStructure(max_stage=max_stage, stage_sets=tuple(all_sets))


@dataclass(frozen=True)
class WeightMatrices:
    """Connection-weight matrices W[(r, c)] of shape (N, N).

    Entry (i, l) carries the weight of stage-r neighbour l+1 of node i+1
    under covariate c, zero elsewhere. Rows are stochastic on non-empty
    stages.
    """

    num_nodes: int
    max_stage: int
    num_covariates: int
    matrices: dict  # (r, c) -> ndarray

    def stage_matrix(self, r: int, c: int = 1) -> np.ndarray:
        return self.matrices[(r, c)]


def _shortest_path_distances(graph: Graph, start: int) -> dict:
    """Dijkstra from ``start`` using edge distances (1-indexed nodes)."""
    import heapq

    dist = {start: 0.0}
    heap = [(0.0, start)]
    nbrs = graph.neighbour_lists()
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist.get(u, math.inf):
            continue
        for v in nbrs[u - 1]:
            w = graph.distances[(min(u, v), max(u, v))]
            nd = d + w
            if nd < dist.get(v, math.inf):
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist


def compute_weights(ns: NeighbourStructure, scheme: str, graph: Graph,
                    num_covariates: int = 1) -> WeightMatrices:
    """Connection weights for every stage up to ``ns.max_stage``.

    scheme="equal" gives 1/|stage set| within each (node, stage) group;
    scheme="inverse_distance" weights each stage-r neighbour by the
    reciprocal of its shortest-path distance (edge distances summed along
    the path), normalised within the group. Covariates replicate the same
    weights per channel (C is user-declared structure, not inferred).
    """
    if scheme not in ("equal", "inverse_distance"):
        raise ValidationError(f"unknown weight scheme {scheme!r}")
    n = graph.num_nodes
    if scheme == "inverse_distance":
        if graph.distances is None:
            raise MissingDistances("inverse_distance weights need edge distances")
        spd = {i: _shortest_path_distances(graph, i) for i in range(1, n + 1)}

    mats = {}
    for r in range(1, ns.max_stage + 1):
        w = np.zeros((n, n))
        for i in range(1, n + 1):
            members = sorted(ns.stage(i, r))
            if not members:
                continue
            if scheme == "equal":
                vals = np.full(len(members), 1.0 / len(members))
            else:
                try:
                    raw = np.array([1.0 / spd[i][l] for l in members])
                except KeyError as exc:  # pragma: no cover - unreachable on connected stages
                    raise MissingDistances(f"no path distance from {i} to {exc}") from exc
                vals = raw / raw.sum()
            for l, v in zip(members, vals):
                w[i - 1, l - 1] = v
        for c in range(1, num_covariates + 1):
            mats[(r, c)] = w.copy() if c > 1 else w
    return WeightMatrices(num_nodes=n, max_stage=ns.max_stage,
                          num_covariates=num_covariates, matrices=mats)


def fully_connected(n: int) -> Graph:
    """Complete graph on n >= 2 nodes."""
    if n < 2:
        raise ValidationError("fully connected graph needs n >= 2")
    edges = [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)]
    return graph_from_edges(n, edges)


def _pair_distance(a, b, metric):
    if metric == "euclidean":
        return math.hypot(a[0] - b[0], a[1] - b[1])
    if metric == "greatcircle":
        # coords as (longitude, latitude) in degrees; unit-sphere arc length
        lon1, lat1, lon2, lat2 = map(math.radians, (a[0], a[1], b[0], b[1]))
        s = (math.sin((lat2 - lat1) / 2) ** 2
             + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2)
        return 2 * math.asin(min(1.0, math.sqrt(s)))
    raise ValidationError(f"unknown metric {metric!r}")


def mst_from_coords(coords, metric: str = "euclidean") -> Graph:
    """Minimum spanning tree over pairwise point distances.

    Kruskal on edges sorted by (length, i, j), which breaks ties by the
    lexicographically smallest edge list. The returned graph carries the
    tree-edge distances and the coordinates.
    """
    coords = np.asarray(coords, dtype=float)
    n = coords.shape[0]
    if n < 2:
        raise ValidationError("need at least two points")
    cand = []
    for i in range(1, n + 1):
        for j in range(i + 1, n + 1):
            d = _pair_distance(coords[i - 1], coords[j - 1], metric)
            if d == 0.0:
                raise DuplicateCoordinates(f"nodes {i} and {j} coincide")
            cand.append((d, i, j))
    cand.sort()

    parent = list(range(n + 1))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    chosen = []
    dist = {}
    for d, i, j in cand:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
            chosen.append((i, j))
            dist[(i, j)] = d
            if len(chosen) == n - 1:
                break
    return graph_from_edges(n, chosen, distances=dist, coords=coords)


# -- file formats --------------------------------------------------------

def read_graph_file(path) -> Graph:
    """Parse the plain-text graph format.

    First line ``N <num_nodes>``; each following non-empty line is
    ``i j [dist]`` with 1-indexed endpoints.
    """
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    if not lines or not lines[0].upper().startswith("N"):
        raise ValidationError(f"{path}: first line must be 'N <num_nodes>'")
    try:
        n = int(lines[0].split()[1])
    except (IndexError, ValueError) as exc:
        raise ValidationError(f"{path}: malformed header {lines[0]!r}") from exc
    edges, dist, have_dist = [], {}, False
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) not in (2, 3):
            raise ValidationError(f"{path}: malformed edge line {ln!r}")
        i, j = int(parts[0]), int(parts[1])
        edges.append((i, j))
        if len(parts) == 3:
            have_dist = True
            dist[(min(i, j), max(i, j))] = float(parts[2])
    if have_dist and len(dist) != len(set((min(i, j), max(i, j)) for i, j in edges)):
        raise ValidationError(f"{path}: distances must be given on every edge or none")
    return graph_from_edges(n, edges, distances=dist if have_dist else None)


def write_graph_file(graph: Graph, path):
    """Inverse of :func:`read_graph_file`."""
    with open(path, "w") as fh:
        fh.write(f"N {graph.num_nodes}\n")
        for i, j in sorted(graph.edges):
            if graph.distances is not None:
                fh.write(f"{i} {j} {graph.distances[(i, j)]:.10g}\n")
            else:
                fh.write(f"{i} {j}\n")


def read_coords_file(path) -> np.ndarray:
    """Parse the coordinates CSV with header ``node,x,y``; rows may appear
    in any node order."""
    import csv

    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:3]] != ["node", "x", "y"]:
            raise ValidationError(f"{path}: expected header 'node,x,y'")
        rows = [(int(r[0]), float(r[1]), float(r[2])) for r in reader if r]
    n = len(rows)
    coords = np.full((n, 2), np.nan)
    for node, x, y in rows:
        if not 1 <= node <= n:
            raise ValidationError(f"{path}: node id {node} outside 1..{n}")
        coords[node - 1] = (x, y)
    if np.isnan(coords).any():
        raise ValidationError(f"{path}: missing or duplicate node rows")
    return coords
