"""Finite graph substrate: boxes of Z^d, line graphs, balls, shells, clusters.

A box built by :func:`build_grid` stands in for the infinite lattice.  Every
site remembers its degree in the infinite lattice (``full_degree``), so sites
on the sides of the box know how many lattice neighbours lie outside it.
Those missing neighbours are exterior like any other site outside a window
and carry the extreme spin of the boundary mode.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path


class Mode(enum.IntEnum):
    """Boundary mode of a window: exterior is all-minimal or all-maximal."""

    MINUS = -1
    PLUS = 1


class SiteGraph:
    """Undirected graph on dense integer sites ``0..n-1``.

    Parameters
    ----------
    neighbors : sequence of sequences of int
        Adjacency lists. Must be symmetric and irreflexive.
    full_degree : array_like of int, optional
        Degree of each site in the infinite lattice the graph approximates.
        Defaults to the actual degree (the graph is the whole world).
    coords : ndarray, optional
        Integer coordinates per site (metadata; used for translations).
    orbit : array_like of int, optional
        Label of each site's class under the acting group.
    """

    def __init__(self, neighbors, full_degree=None, coords=None, orbit=None,
                 extent=(), endpoints=None, base=None, axis=None, coord_scale=1):
        nbrs = [np.asarray(sorted(set(int(u) for u in nb)), dtype=np.int64) for nb in neighbors]
        n = len(nbrs)
        for v, nb in enumerate(nbrs):
            if np.any(nb == v):
                raise ValueError(f"self-loop at site {v}")
            if np.any((nb < 0) | (nb >= n)):
                raise ValueError(f"neighbour of {v} out of range")
        self.indptr = np.zeros(n + 1, dtype=np.int64)
        self.indptr[1:] = np.cumsum([len(nb) for nb in nbrs])
        self.indices = np.concatenate(nbrs) if n else np.zeros(0, dtype=np.int64)
        for v in range(n):
            for u in self.neighbors(v):
                if v not in self.neighbors(u):
                    raise ValueError(f"adjacency not symmetric at ({v}, {u})")
        deg = np.diff(self.indptr)
        self.full_degree = deg.copy() if full_degree is None else np.asarray(full_degree, dtype=np.int64)
        if np.any(self.full_degree < deg):
            raise ValueError("full_degree below actual degree")
        self.coords = None if coords is None else np.asarray(coords, dtype=np.int64)
        self.orbit = np.zeros(n, dtype=np.int64) if orbit is None else np.asarray(orbit, dtype=np.int64)
        self.extent = tuple(extent)
        self.endpoints = None if endpoints is None else np.asarray(endpoints, dtype=np.int64)
        self.base = base
        self.axis = None if axis is None else np.asarray(axis, dtype=np.int64)
        self.coord_scale = coord_scale
        self._dist_cache: dict[int, np.ndarray] = {}
        self._coord_index = None
        self._csr_matrix = None
        for arr in (self.indptr, self.indices, self.full_degree, self.orbit):
            arr.setflags(write=False)

    @property
    def n_sites(self) -> int:
        return self.indptr.shape[0] - 1

    def __len__(self):
        return self.n_sites

    def __repr__(self):
        kind = "line graph" if self.base is not None else "graph"
        return f"<SiteGraph {kind}: {self.n_sites} sites, {self.n_edges} edges>"

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def degree(self, v: int) -> int:
        return int(self.indptr[v + 1] - self.indptr[v])

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    @property
    def missing(self) -> np.ndarray:
        """Number of lattice neighbours of each site lying outside the box."""
        return self.full_degree - self.degrees

    @property
    def max_degree(self) -> int:
        return int(self.full_degree.max()) if self.n_sites else 0

    @property
    def n_edges(self) -> int:
        return int(self.indices.shape[0] // 2)

    def edges(self) -> np.ndarray:
        """Edges as an ``(n_edges, 2)`` array with ``u < v``, sorted."""
        out = [(v, int(u)) for v in range(self.n_sites) for u in self.neighbors(v) if v < u]
        return np.array(out, dtype=np.int64).reshape(-1, 2)

    def distances(self, v: int) -> np.ndarray:
        """Graph distance from ``v`` to every site (-1 when unreachable)."""
        d = self._dist_cache.get(v)
        if d is None:
            dist = shortest_path(self._csr(), unweighted=True, indices=int(v))
            d = np.where(np.isfinite(dist), dist, -1).astype(np.int64)
            d.setflags(write=False)
            self._dist_cache[v] = d
        return d

    def _csr(self):
        if self._csr_matrix is None:
            n = self.n_sites
            self._csr_matrix = csr_matrix((np.ones(self.indices.shape[0]), self.indices, self.indptr),
                                          shape=(n, n))
        return self._csr_matrix

    def distance(self, u: int, v: int) -> int:
        return int(self.distances(u)[v])

    def site_at(self, coords) -> int:
        """Site with the given coordinates, or -1 if outside the box."""
        if self.coords is None:
            raise ValueError("graph has no coordinates")
        if self._coord_index is None:
            self._coord_index = {tuple(c): i for i, c in enumerate(self.coords.tolist())}
        return self._coord_index.get(tuple(int(c) for c in coords), -1)

    def translate(self, v: int, shift) -> int:
        """Image of site ``v`` under a lattice translation, or -1 if it leaves the box."""
        shift = np.asarray(shift, dtype=np.int64) * self.coord_scale
        return self.site_at(self.coords[v] + shift)

    def translate_many(self, sites, shift) -> np.ndarray:
        return np.array([self.translate(int(v), shift) for v in np.atleast_1d(sites)], dtype=np.int64)


def lattice_sphere_count(d: int, k: int) -> int:
    """Number of points of Z^d at L1 distance exactly ``k`` from the origin."""
    if k == 0:
        return 1
    return sum(2 ** i * math.comb(d, i) * math.comb(k - 1, i - 1) for i in range(1, min(d, k) + 1))


def build_grid(d: int, extent) -> SiteGraph:
    """Box ``[0, extent_0) x ... x [0, extent_{d-1})`` of Z^d with nearest-neighbour edges.

    Sites are numbered in row-major order, so site index order coincides with
    the lexicographic order of coordinates.
    """
    extent = tuple(int(e) for e in np.atleast_1d(extent))
    if d < 1:
        raise ValueError("dimension must be at least 1")
    if len(extent) != d:
        raise ValueError(f"need {d} extents, got {len(extent)}")
    if any(e < 1 for e in extent):
        raise ValueError("extents must be positive")
    coords = np.array(list(itertools.product(*(range(e) for e in extent))), dtype=np.int64).reshape(-1, d)
    strides = np.array([int(np.prod(extent[i + 1:])) for i in range(d)], dtype=np.int64)
    neighbors = []
    for c in coords:
        nb = []
        for i in range(d):
            for step in (-1, 1):
                x = c[i] + step
                if 0 <= x < extent[i]:
                    nb.append(int((c @ strides) + step * strides[i]))
        neighbors.append(nb)
    return SiteGraph(neighbors, full_degree=np.full(len(coords), 2 * d), coords=coords, extent=extent)


def line_graph(g: SiteGraph) -> SiteGraph:
    """Line graph: one site per edge of ``g``, adjacent when the edges share an endpoint.

    For a box, edge ``{v, v + e_i}`` gets doubled-midpoint coordinates
    ``2 v + e_i`` and orbit label ``i`` (edge direction).
    """
    if g.n_edges == 0:
        raise ValueError("graph has no edges")
    if g.coords is not None and g.extent:
        d = g.coords.shape[1]
        ends, axis = [], []
        for v in range(g.n_sites):
            for u in g.neighbors(v):
                if u > v:
                    diff = g.coords[u] - g.coords[v]
                    ends.append((v, int(u)))
                    axis.append(int(np.flatnonzero(diff)[0]))
        ends = np.array(ends, dtype=np.int64)
        axis = np.array(axis, dtype=np.int64)
        coords = 2 * g.coords[ends[:, 0]] + np.eye(d, dtype=np.int64)[axis]
    else:
        ends = g.edges()
        axis, coords, d = None, None, None
    incident = [[] for _ in range(g.n_sites)]
    for e, (x, y) in enumerate(ends):
        incident[x].append(e)
        incident[y].append(e)
    neighbors = []
    for e, (x, y) in enumerate(ends):
        neighbors.append([f for f in incident[x] + incident[y] if f != e])
    full = g.full_degree[ends[:, 0]] + g.full_degree[ends[:, 1]] - 2
    return SiteGraph(neighbors, full_degree=full, coords=coords, orbit=axis, extent=g.extent,
                     endpoints=ends, base=g, axis=axis, coord_scale=2)


@dataclass(frozen=True, eq=False)
class Window:
    """A finite window ``V_{v,r}`` of an ambient graph with a fixed boundary mode.

    ``clipped`` is set when the ball would extend past the sides of the box,
    i.e. the interior is not the full lattice ball.
    """

    ambient: SiteGraph
    interior: np.ndarray
    boundary_mode: Mode = Mode.PLUS
    center: int | None = None
    radius: int | None = None
    clipped: bool = False
    mask: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        interior = np.unique(np.asarray(self.interior, dtype=np.int64))
        if interior.size and (interior[0] < 0 or interior[-1] >= self.ambient.n_sites):
            raise ValueError("window site out of range")
        interior.setflags(write=False)
        mask = np.zeros(self.ambient.n_sites, dtype=bool)
        mask[interior] = True
        mask.setflags(write=False)
        object.__setattr__(self, "interior", interior)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "boundary_mode", Mode(self.boundary_mode))

    def __len__(self):
        return int(self.interior.shape[0])

    def __contains__(self, site):
        return bool(self.mask[site])

    def with_mode(self, mode) -> "Window":
        return Window(self.ambient, self.interior, Mode(mode), self.center, self.radius, self.clipped)

    def local_index(self) -> dict[int, int]:
        return {int(s): i for i, s in enumerate(self.interior)}


def ball(g: SiteGraph, v: int, r: int, mode=Mode.PLUS) -> Window:
    """The ball of radius ``r`` around ``v`` as a window."""
    if not 0 <= v < g.n_sites:
        raise ValueError(f"site {v} not in graph")
    if r < 0:
        raise ValueError("radius must be nonnegative")
    d = g.distances(v)
    inside = (d >= 0) & (d <= r)
    clipped = bool(np.any(g.missing[(d >= 0) & (d < r)] > 0))
    return Window(g, np.flatnonzero(inside), Mode(mode), v, r, clipped)


def sphere_shell(g: SiteGraph, v: int, n: int) -> np.ndarray:
    """Sites at distance exactly ``n`` from ``v`` (``{v}`` for ``n = 0``)."""
    if n < 0:
        raise ValueError("shell index must be nonnegative")
    return np.flatnonzero(g.distances(v) == n)


def max_clean_radius(g: SiteGraph, v: int) -> int:
    """Largest ``r`` for which ``ball(g, v, r)`` is not clipped by the box."""
    d = g.distances(v)
    sides = d[(g.missing > 0) & (d >= 0)]
    return int(sides.min()) if sides.size else int(d.max())


def edge_window(lg: SiteGraph, vertices, mode=Mode.PLUS) -> Window:
    """Window of all edges with at least one endpoint in ``vertices``."""
    if lg.endpoints is None:
        raise ValueError("edge_window needs a line graph")
    vs = np.zeros(lg.base.n_sites, dtype=bool)
    vs[np.asarray(vertices, dtype=np.int64)] = True
    touch = vs[lg.endpoints[:, 0]] | vs[lg.endpoints[:, 1]]
    return Window(lg, np.flatnonzero(touch), Mode(mode))


class UnionFind:
    """Disjoint sets with path compression and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> int:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return ra


@dataclass(frozen=True)
class ClusterLabels:
    """Open clusters of a window of edges.

    ``label`` is indexed by base vertex; vertices not touched by the window
    get -1.  Labels are canonical: the smallest vertex of a cluster labels it,
    and the ghost cluster (if any) is labelled ``n_vertices``.
    """

    label: np.ndarray
    ghost_cluster: int | None
    count_interior: int

    def partition(self) -> frozenset:
        groups: dict[int, set] = {}
        for v, lab in enumerate(self.label.tolist()):
            if lab >= 0:
                groups.setdefault(lab, set()).add(v)
        return frozenset(frozenset(g) for g in groups.values())


def touched_vertices(window: Window) -> np.ndarray:
    """Base vertices that are endpoints of some window edge."""
    ends = window.ambient.endpoints[window.interior]
    return np.unique(ends.ravel())


def boundary_vertices(window: Window) -> np.ndarray:
    """Touched vertices that also meet an edge outside the window.

    These are joined to each other through the exterior when every exterior
    edge is open.
    """
    lg = window.ambient
    if lg.endpoints is None:
        raise ValueError("window is not on a line graph")
    ends = lg.endpoints[window.interior]
    count = np.bincount(ends.ravel(), minlength=lg.base.n_sites)
    touched = np.flatnonzero(count > 0)
    return touched[count[touched] < lg.base.full_degree[touched]]


def clusters(edge_config, window: Window, wired: bool) -> ClusterLabels:
    """Open clusters of the window's edges under wired or free exterior.

    ``edge_config`` is indexed by ambient edge (line-graph site); only the
    entries of window edges are read.  With ``wired`` every boundary vertex
    joins a single ghost cluster and only clusters avoiding it are counted.
    """
    lg = window.ambient
    if lg.endpoints is None:
        raise ValueError("window is not on a line graph")
    cfg = np.asarray(edge_config)
    if cfg.shape != (lg.n_sites,):
        raise ValueError(f"edge_config must have one entry per edge ({lg.n_sites})")
    states = cfg[window.interior]
    if not np.all((states == 0) | (states == 1)):
        raise ValueError("edge states must be 0 or 1 on every window edge")
    nv = lg.base.n_sites
    ghost = nv
    uf = UnionFind(nv + 1)
    for e, s in zip(window.interior.tolist(), states.tolist()):
        if s:
            uf.union(int(lg.endpoints[e, 0]), int(lg.endpoints[e, 1]))
    touched = touched_vertices(window)
    if wired:
        for x in boundary_vertices(window).tolist():
            uf.union(x, ghost)
    root_label: dict[int, int] = {}
    if wired:
        root_label[uf.find(ghost)] = ghost
    label = np.full(nv, -1, dtype=np.int64)
    for x in touched.tolist():
        r = uf.find(x)
        if r not in root_label:
            root_label[r] = x
        label[x] = root_label[r]
    has_ghost = wired and bool(np.any(label == ghost))
    count = len(set(label[touched].tolist()) - {ghost})
    return ClusterLabels(label, ghost if has_ghost else None, count)


def count_clusters_batch(configs, ex, ey, n_vertices, ghost_vertices=()) -> np.ndarray:
    """Cluster counts for many edge configurations at once.

    ``configs`` is ``(N, m)`` over edges with local endpoints ``ex``, ``ey``
    in ``0..n_vertices-1``.  Vertices listed in ``ghost_vertices`` are merged
    with an extra ghost vertex whose cluster is not counted.  Only vertices
    touched by some edge are counted.
    """
    configs = np.asarray(configs, dtype=bool)
    ex = np.asarray(ex, dtype=np.int64)
    ey = np.asarray(ey, dtype=np.int64)
    N = configs.shape[0]
    nv = n_vertices + 1
    ghost = n_vertices
    labels = np.broadcast_to(np.arange(nv), (N, nv)).copy()
    gv = np.asarray(ghost_vertices, dtype=np.int64)
    if gv.size:
        labels[:, gv] = ghost
    rows = np.arange(N)
    # min-label propagation; ghost carries the largest label and is pinned.
    while True:
        changed = False
        for j in range(ex.shape[0]):
            open_ = configs[:, j]
            lx, ly = labels[:, ex[j]], labels[:, ey[j]]
            hi = np.maximum(lx, ly)
            lo = np.where(hi == ghost, ghost, np.minimum(lx, ly))
            upd = open_ & ((lx != lo) | (ly != lo))
            if upd.any():
                changed = True
                labels[rows[upd], ex[j]] = lo[upd]
                labels[rows[upd], ey[j]] = lo[upd]
        # pointer jumping keeps the number of passes small
        new = np.take_along_axis(labels, labels, axis=1)
        if not np.array_equal(new, labels):
            labels = new
            changed = True
        if not changed:
            break
    touched = np.unique(np.concatenate([ex, ey]))
    lab = labels[:, touched]
    lab = np.sort(lab, axis=1)
    distinct = 1 + np.count_nonzero(np.diff(lab, axis=1), axis=1)
    has_ghost = np.any(lab == ghost, axis=1)
    return distinct - has_ghost
