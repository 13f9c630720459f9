"""Geographical network search.

Users become nodes of a co-visit graph: two users are linked when enough of
their check-ins lie within ``radius_m`` of each other, the edge weight being
the number of such check-in pairs. The graph is clustered by Louvain
modularity maximisation and the largest communities are kept.
"""

import math
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, Hashable, List, Optional, Sequence, Tuple

import numpy as np

from .community import Kind, make_community
from .ingest import StreamTuple

EARTH_RADIUS_M = 6_371_000.0


class EmptyGraph(ValueError):
    pass


def haversine(p, q) -> float:
    """Great-circle distance in metres between two ``(lat, lon)`` points."""
    lat1, lon1 = map(math.radians, p)
    lat2, lon2 = map(math.radians, q)
    a = (math.sin((lat2 - lat1) / 2) ** 2
         + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2)
    return 2 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(a)))


def _haversine_many(lat1, lon1, lat2, lon2):
    lat1, lon1, lat2, lon2 = map(np.radians, (lat1, lon1, lat2, lon2))
    a = (np.sin((lat2 - lat1) / 2) ** 2
         + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2) ** 2)
    return 2 * EARTH_RADIUS_M * np.arcsin(np.minimum(1.0, np.sqrt(a)))


@dataclass
class GeoGraph:
    """Undirected weighted graph without self-loops; each edge is stored
    once under ``(u, v)`` with ``u < v``."""

    nodes: List[Hashable]
    edges: Dict[Tuple[Hashable, Hashable], float] = field(default_factory=dict)

    def __post_init__(self):
        self.nodes = sorted(set(self.nodes))
        clean = {}
        for (u, v), w in self.edges.items():
            if u == v:
                raise ValueError("self-loops are not allowed")
            if w <= 0:
                raise ValueError("edge weights must be positive")
            key = (u, v) if u < v else (v, u)
            clean[key] = clean.get(key, 0.0) + float(w)
        self.edges = clean

    @property
    def adjacency(self) -> Dict[Hashable, Dict[Hashable, float]]:
        adj = {n: {} for n in self.nodes}
        for (u, v), w in self.edges.items():
            adj[u][v] = w
            adj[v][u] = w
        return adj

    @property
    def total_weight(self) -> float:
        return math.fsum(self.edges.values())

    def degree(self) -> Dict[Hashable, float]:
        deg = {n: 0.0 for n in self.nodes}
        for (u, v), w in self.edges.items():
            deg[u] += w
            deg[v] += w
        return deg

    def dump(self, fh):
        """Write ``u v weight`` lines; isolated nodes are written as ``u``."""
        linked = set()
        for (u, v), w in sorted(self.edges.items()):
            fh.write(f"{u} {v} {w!r}\n")
            linked.update((u, v))
        for n in self.nodes:
            if n not in linked:
                fh.write(f"{n}\n")

    @classmethod
    def load(cls, fh) -> "GeoGraph":
        nodes, edges = [], {}
        for line in fh:
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if len(parts) == 1:
                nodes.append(parts[0])
            elif len(parts) == 3:
                u, v, w = parts
                nodes += [u, v]
                edges[(u, v)] = edges.get((u, v), 0.0) + float(w)
            else:
                raise ValueError(f"bad edge line: {line!r}")
        return cls(nodes, edges)


@dataclass
class Partition:
    assignment: Dict[Hashable, int]
    modularity: float
    history: List[float] = field(default_factory=list)

    @property
    def n_communities(self) -> int:
        return len(set(self.assignment.values()))

    def groups(self) -> Dict[int, List[Hashable]]:
        out = defaultdict(list)
        for node, cid in sorted(self.assignment.items()):
            out[cid].append(node)
        return dict(out)


def build_geo_graph(ts: Sequence[StreamTuple], radius_m: float = 140.0,
                    min_covisits: int = 1) -> GeoGraph:
    if radius_m <= 0:
        raise ValueError("radius_m must be positive")
    pts = sorted((t.geo[0], t.geo[1], t.user_id) for t in ts if t.geo is not None)
    nodes = sorted({u for _, _, u in pts})
    if not pts:
        return GeoGraph(nodes)
    lat = np.array([p[0] for p in pts])
    lon = np.array([p[1] for p in pts])
    users = [p[2] for p in pts]
    # Latitude difference alone lower-bounds the distance, so only points in
    # a latitude band around each point need the full formula.
    band = math.degrees(radius_m / EARTH_RADIUS_M) * (1 + 1e-9)
    counts = defaultdict(int)
    for i in range(len(pts)):
        hi = np.searchsorted(lat, lat[i] + band, side="right")
        if hi <= i + 1:
            continue
        d = _haversine_many(lat[i], lon[i], lat[i + 1:hi], lon[i + 1:hi])
        for j in np.nonzero(d <= radius_m)[0]:
            u, v = users[i], users[i + 1 + j]
            if u != v:
                counts[(u, v) if u < v else (v, u)] += 1
    edges = {k: float(c) for k, c in counts.items() if c >= min_covisits}
    return GeoGraph(nodes, edges)


def modularity(g: GeoGraph, p: Partition) -> float:
    """Weighted Newman modularity of ``p`` on ``g``."""
    m = g.total_weight
    if m == 0:
        raise EmptyGraph("modularity is undefined on a graph without edges")
    missing = set(g.nodes) - set(p.assignment)
    if missing:
        raise ValueError(f"partition misses {len(missing)} nodes")
    internal = defaultdict(float)
    tot = defaultdict(float)
    for (u, v), w in g.edges.items():
        if p.assignment[u] == p.assignment[v]:
            internal[p.assignment[u]] += w
    for n, k in g.degree().items():
        tot[p.assignment[n]] += k
    return math.fsum(internal[c] / m - (tot[c] / (2 * m)) ** 2 for c in tot)


class _Level:
    """Compact graph used inside Louvain; ``loops[i]`` is the weight of
    original edges folded into super-node ``i``."""

    def __init__(self, n, adj, loops):
        self.n = n
        self.adj = adj
        self.loops = loops
        self.k = [2 * loops[i] + math.fsum(adj[i].values()) for i in range(n)]
        self.m = math.fsum(self.k) / 2

    def quality(self, comm):
        inside = defaultdict(float)
        tot = defaultdict(float)
        for i in range(self.n):
            c = comm[i]
            tot[c] += self.k[i]
            inside[c] += self.loops[i]
            for j, w in self.adj[i].items():
                if j > i and comm[j] == c:
                    inside[c] += w
        m = self.m
        return math.fsum(inside[c] / m - (tot[c] / (2 * m)) ** 2 for c in tot)

    def aggregate(self, comm):
        ids = {}
        for c in comm:
            ids.setdefault(c, len(ids))
        n = len(ids)
        adj = [defaultdict(float) for _ in range(n)]
        loops = [0.0] * n
        for i in range(self.n):
            ci = ids[comm[i]]
            loops[ci] += self.loops[i]
            for j, w in self.adj[i].items():
                if j <= i:
                    continue
                cj = ids[comm[j]]
                if ci == cj:
                    loops[ci] += w
                else:
                    adj[ci][cj] += w
                    adj[cj][ci] += w
        return _Level(n, [dict(a) for a in adj], loops), [ids[c] for c in comm]


_GAIN_TOL = 1e-12


def _move_nodes(level, rng):
    comm = list(range(level.n))
    tot = list(level.k)
    m = level.m
    moved_any = False
    while True:
        moved = False
        for i in rng.permutation(level.n):
            i = int(i)
            ki = level.k[i]
            own = comm[i]
            links = defaultdict(float)
            for j, w in level.adj[i].items():
                links[comm[j]] += w
            tot[own] -= ki
            stay = links.get(own, 0.0) / m - tot[own] * ki / (2 * m * m)
            best, best_gain = own, stay
            for c in sorted(links):
                gain = links[c] / m - tot[c] * ki / (2 * m * m)
                if gain > best_gain + _GAIN_TOL:
                    best, best_gain = c, gain
            tot[best] += ki
            if best != own:
                comm[i] = best
                moved = True
        if not moved:
            return comm, moved_any
        moved_any = True


def louvain(g: GeoGraph, seed: int = 0) -> Partition:
    """Two-phase Louvain clustering.

    Nodes are visited in a seeded random order and only move for a strictly
    positive modularity gain; the graph is then collapsed onto the found
    communities and the procedure repeats until nothing moves. The returned
    partition records the modularity after every pass in ``history``.
    """
    if not g.nodes:
        raise EmptyGraph("graph has no nodes")
    if not g.edges:
        raise EmptyGraph("graph has no edges")
    index = {n: i for i, n in enumerate(g.nodes)}
    adj = [dict() for _ in g.nodes]
    for (u, v), w in g.edges.items():
        adj[index[u]][index[v]] = w
        adj[index[v]][index[u]] = w
    level = _Level(len(g.nodes), adj, [0.0] * len(g.nodes))
    rng = np.random.default_rng(seed)

    node_comm = list(range(len(g.nodes)))
    history = [level.quality(list(range(level.n)))]
    while True:
        comm, moved = _move_nodes(level, rng)
        if not moved:
            break
        q = level.quality(comm)
        if q < history[-1] - 1e-12:
            raise AssertionError("modularity decreased during a Louvain pass")
        history.append(q)
        level, mapping = level.aggregate(comm)
        node_comm = [mapping[c] for c in node_comm]

    relabel = {}
    assignment = {}
    for n, c in zip(g.nodes, node_comm):
        assignment[n] = relabel.setdefault(c, len(relabel))
    p = Partition(assignment, 0.0, history)
    p.modularity = modularity(g, p)
    return p


def pairwise_agreement(a: Dict[Hashable, Optional[Hashable]],
                       b: Dict[Hashable, Optional[Hashable]]) -> float:
    """Rand index between two labelings over their common nodes; a ``None``
    label counts as a singleton."""
    nodes = sorted(set(a) & set(b))
    if len(nodes) < 2:
        return 1.0

    def same(lab, u, v):
        return lab[u] is not None and lab[u] == lab[v]

    agree = sum(same(a, u, v) == same(b, u, v) for u, v in combinations(nodes, 2))
    return agree / (len(nodes) * (len(nodes) - 1) / 2)


def geonet_search(ts: Sequence[StreamTuple], radius_m: float = 140.0,
                  min_covisits: int = 1, seed: int = 7, max_communities: int = 10,
                  min_size: int = 2):
    """Cluster the co-visit graph and emit up to ``max_communities`` of the
    largest communities as ``Cluster 1`` .. ``Cluster k`` by descending size.

    Communities smaller than ``min_size`` (isolated users) are not emitted.
    Returns ``(communities, graph, partition)``; partition is ``None`` when
    the graph has no edges.
    """
    g = build_geo_graph(ts, radius_m, min_covisits)
    if not g.edges:
        return [], g, None
    part = louvain(g, seed)
    groups = part.groups()
    ranked = sorted(groups.items(), key=lambda kv: (-len(kv[1]), kv[0]))
    ranked = [(cid, members) for cid, members in ranked if len(members) >= min_size]
    by_user = defaultdict(list)
    for t in ts:
        if t.geo is not None:
            by_user[t.user_id].append(t)
    out = []
    for rank, (_, members) in enumerate(ranked[:max_communities], 1):
        tuples = [t for u in members for t in by_user[u]]
        out.append(make_community(Kind.GEONETS, f"Cluster {rank}", tuples, members))
    return out, g, part
