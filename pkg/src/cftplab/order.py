"""Orders on the sites of a window driven by i.i.d. labels.

Two label kinds are supported.  Real labels order sites by the value of a
uniform variable.  Digit labels in ``{1, ..., D}`` order sites by the
sequence of shell sums ``Z_{w,0}, Z_{w,1}, ...`` (the sum of labels over the
sites at distance exactly ``k`` from ``w``), compared lexicographically.
Shell sums are computed lazily and memoized, since two sites are almost
always separated within the first few shells.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

from .lattice import SiteGraph, Window, sphere_shell


def default_digits(graph: SiteGraph) -> int:
    """``3 * Delta**2 + 1`` with ``Delta`` the lattice degree."""
    return 3 * graph.max_degree ** 2 + 1


def default_depth(graph: SiteGraph, sites=None) -> int:
    """Deepest shell that is nonempty around any of ``sites``."""
    sites = range(graph.n_sites) if sites is None else np.atleast_1d(sites)
    return max(int(graph.distances(int(v)).max()) for v in sites)


@dataclass
class OrderLabels:
    """Per-site labels of the whole ambient graph plus the rule comparing them.

    Parameters
    ----------
    kind : {"real", "digits"}
    labels : ndarray
        One label per site of ``graph``.
    graph : SiteGraph
    D : int, optional
        Alphabet size of digit labels.
    depth : int, optional
        Largest shell index a digit comparison may look at; defaults to the
        whole graph.
    """

    kind: str
    labels: np.ndarray
    graph: SiteGraph
    D: int | None = None
    depth: int | None = None
    _memo: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        self.labels = np.asarray(self.labels)
        if self.labels.shape != (self.graph.n_sites,):
            raise ValueError("need one label per site")
        if self.kind == "real":
            if self.labels.size and np.unique(self.labels).size != self.labels.size:
                raise ValueError("real labels must be distinct")
        elif self.kind == "digits":
            if self.D is None or self.D < 2:
                raise ValueError("digit labels need D >= 2")
            if np.any((self.labels < 1) | (self.labels > self.D)):
                raise ValueError(f"digit labels must lie in 1..{self.D}")
            self.labels = self.labels.astype(np.int64)
        else:
            raise ValueError(f"unknown label kind {self.kind!r}")

    @classmethod
    def real(cls, labels, graph):
        return cls("real", labels, graph)

    @classmethod
    def digits(cls, labels, graph, D, depth=None):
        return cls("digits", labels, graph, D, depth)

    @classmethod
    def from_randomness(cls, randomness, graph, time, kind="real", D=None, depth=None):
        """Labels ``B_{u, time}`` of every site, drawn from a :class:`SweepRandomness`."""
        sites = np.arange(graph.n_sites)
        if kind == "real":
            return cls.real(randomness.b(sites, time), graph)
        D = default_digits(graph) if D is None else D
        return cls.digits(randomness.digits(sites, time, D), graph, D, depth)

    def _cap(self, u, v):
        if self.depth is not None:
            return self.depth
        g = self.graph
        return max(int(g.distances(u).max()), int(g.distances(v).max()))

    def shell_sum(self, w: int, k: int) -> int:
        key = (w, k)
        s = self._memo.get(key)
        if s is None:
            s = int(self.labels[sphere_shell(self.graph, w, k)].sum())
            self._memo[key] = s
        return s

    def shell_sums(self, w: int, depth: int) -> np.ndarray:
        return np.array([self.shell_sum(w, k) for k in range(depth + 1)], dtype=np.int64)

    def compare_detail(self, u: int, v: int):
        """``(sign, depth)``: sign is -1 if ``u`` comes first, +1 if ``v`` does,
        0 for an unresolved tie; depth is the deciding shell (None on a tie)."""
        if u == v:
            raise ValueError("compare needs two distinct sites")
        if self.kind == "real":
            return (-1 if self.labels[u] < self.labels[v] else 1), 0
        for k in range(self._cap(u, v) + 1):
            a, b = self.shell_sum(u, k), self.shell_sum(v, k)
            if a != b:
                return (-1 if a < b else 1), k
        return 0, None

    def compare(self, u: int, v: int) -> bool:
        """True when ``u`` precedes (or ties with) ``v``."""
        return self.compare_detail(u, v)[0] <= 0

    def order_radius(self, u: int, v: int):
        """Radius needed to settle the order of ``u`` and ``v``; None if unresolved."""
        if self.kind == "real":
            if u == v:
                raise ValueError("order radius needs two distinct sites")
            return 0
        return self.compare_detail(u, v)[1]


@dataclass(frozen=True)
class SortedWindow:
    """Window sites in update order; ``ties`` counts pairs settled by site index."""

    sites: np.ndarray
    ties: int


def sort_window(labels: OrderLabels, window: Window) -> SortedWindow:
    """Sort the window's interior by the label order.

    Unresolved pairs are ordered by site index and counted in ``ties``.
    """
    sites = [int(s) for s in window.interior]
    ties = 0

    def cmp(u, v):
        nonlocal ties
        sign, _ = labels.compare_detail(u, v)
        if sign == 0:
            ties += 1
            return -1 if u < v else 1
        return sign

    out = sorted(sites, key=functools.cmp_to_key(cmp))
    return SortedWindow(np.array(out, dtype=np.int64), ties)


def _shells(graph: SiteGraph, w: int, depth: int):
    d = graph.distances(w)
    idx = np.argsort(d, kind="stable")
    ds = d[idx]
    ptr = np.searchsorted(ds, np.arange(depth + 2), "left")
    ptr[-1] = np.searchsorted(ds, depth, "right")
    return ptr.astype(np.int64) - ptr[0], idx[ptr[0]:ptr[-1]].astype(np.int64)


def order_radius_samples(graph: SiteGraph, u: int, v: int, D: int, trials: int, seed: int,
                         depth=None, first_replica=0) -> np.ndarray:
    """Order radius of ``u`` and ``v`` under the time-0 digit labels of many replicas.

    Replica ``i`` uses the same labels as
    ``OrderLabels.from_randomness(SweepRandomness(seed, i), graph, 0, "digits", D)``.
    Entries are -1 where the shells up to ``depth`` never separate the two sites.
    """
    from . import _kernels as K
    from .rng import replica_keys

    if u == v:
        raise ValueError("order radius needs two distinct sites")
    if depth is None:
        depth = max(int(graph.distances(u).max()), int(graph.distances(v).max()))
    up, us = _shells(graph, u, depth)
    vp, vs = _shells(graph, v, depth)
    keys = replica_keys(seed, np.arange(first_replica, first_replica + trials))
    out = np.empty(trials, dtype=np.int64)
    K.pair_order_radius_batch(keys, up, us, vp, vs, int(D), out)
    return out
