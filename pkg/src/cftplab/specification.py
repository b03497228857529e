"""Monotone upwards-downwards specifications and their single-site updates.

Three models are provided: the random-cluster model on the edges of a box
(:class:`RandomCluster`), the nearest-neighbour Ising model
(:class:`Ising`) and an Ising model with pair couplings
``beta * dist**-alpha`` truncated at a radius (:class:`LongRangeIsing`).

A configuration is an array over the sites of the ambient graph holding spin
values.  Only the window's interior entries are read; every site outside the
window holds the extreme spin of the window's boundary mode.

Parameters given as :class:`fractions.Fraction` keep every conditional value
rational, so exact comparisons are possible.
"""
from __future__ import annotations

import itertools
import math
import weakref
from abc import ABC, abstractmethod
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .lattice import Mode, SiteGraph, Window, boundary_vertices, clusters, lattice_sphere_count

DEDUP_TOL = 1e-12

KIND_FIELD = 0
KIND_RC = 1


@dataclass(frozen=True)
class SpinSpace:
    """Totally ordered finite spin space, smallest value first."""

    values: tuple

    def __post_init__(self):
        if len(self.values) < 2:
            raise ValueError("need at least two spins")
        if list(self.values) != sorted(self.values) or len(set(self.values)) != len(self.values):
            raise ValueError("spins must be strictly increasing")

    @property
    def size(self) -> int:
        return len(self.values)

    @property
    def minimum(self):
        return self.values[0]

    @property
    def maximum(self):
        return self.values[-1]

    def extreme(self, mode):
        return self.maximum if Mode(mode) == Mode.PLUS else self.minimum

    def index(self, s) -> int:
        return self.values.index(s)


@dataclass(frozen=True)
class FiniteAlphabet:
    """The finite set of conditional cumulative values and its weights.

    ``values`` is ``a_1 < ... < a_m = 1``; ``weights[i] = a_i - a_{i-1}``.
    """

    values: tuple
    weights: tuple

    @classmethod
    def from_values(cls, values, tol=DEDUP_TOL) -> "FiniteAlphabet":
        vals = sorted(set(values) | {1 if all(isinstance(v, Fraction) for v in values) else 1.0})
        exact = all(isinstance(v, (Fraction, int)) for v in vals)
        merged = []
        for v in vals:
            if merged and not exact and abs(v - merged[-1]) <= tol:
                merged[-1] = v  # keep the larger representative so 1 stays exactly 1
                continue
            merged.append(v)
        if not exact:
            merged = [float(v) for v in merged]
            merged[-1] = 1.0
        weights = tuple(b - a for a, b in zip([0] + merged[:-1], merged))
        return cls(tuple(merged), weights)

    def __len__(self):
        return len(self.values)

    @property
    def exact(self) -> bool:
        return all(isinstance(v, (Fraction, int)) for v in self.values)

    def index_of(self, a) -> int:
        """Position of ``a`` in the alphabet; ``ValueError`` if absent."""
        if self.exact and isinstance(a, (Fraction, int)):
            try:
                return self.values.index(a)
            except ValueError:
                raise ValueError(f"{a} is not in the alphabet") from None
        arr = np.asarray([float(v) for v in self.values])
        i = int(np.argmin(np.abs(arr - float(a))))
        if abs(arr[i] - float(a)) > DEDUP_TOL:
            raise ValueError(f"{a} is not in the alphabet")
        return i

    def as_array(self) -> np.ndarray:
        return np.asarray([float(v) for v in self.values])

    def quantize(self, u: float):
        """Smallest alphabet value at or above ``u``; maps Uniform[0,1) to the weights."""
        arr = self.as_array()
        return self.values[int(np.searchsorted(arr, u, side="left"))]


class Specification(ABC):
    """A monotone upwards-downwards specification with finite spin space."""

    spins: SpinSpace

    @abstractmethod
    def conditional_cdf(self, config, site: int, window: Window) -> tuple:
        """``(P[s <= s_1], ..., P[s <= s_k] = 1)`` for the spin at ``site`` given the rest."""

    @abstractmethod
    def finite_alphabet(self, graph: SiteGraph) -> FiniteAlphabet:
        """All values the conditional cdf can take on ``graph``, in closed form."""

    @abstractmethod
    def kernel_arrays(self, window: Window) -> tuple:
        """Flat arrays describing the window for the compiled sweep kernels."""

    def _check_site(self, site, window):
        if site not in window:
            raise ValueError(f"site {site} is not inside the window")

    def update(self, config, site: int, a, window: Window):
        """Inverse-cdf update: the smallest spin whose cdf reaches ``a``."""
        if not 0 <= a <= 1:
            raise ValueError("update value must lie in [0, 1]")
        cdf = self.conditional_cdf(config, site, window)
        for s, c in zip(self.spins.values, cdf):
            if c >= a:
                return s
        return self.spins.maximum

    def finite_update(self, alphabet: FiniteAlphabet, config, site: int, a, window: Window):
        """Update driven by an alphabet value ``a``; rejects values outside the alphabet."""
        i = alphabet.index_of(a)
        a = alphabet.values[i]
        cdf = self.conditional_cdf(config, site, window)
        tol = 0 if alphabet.exact and all(isinstance(c, (Fraction, int)) for c in cdf) else DEDUP_TOL
        for s, c in zip(self.spins.values, cdf):
            if c >= a - tol:
                return s
        return self.spins.maximum

    def extreme_config(self, graph: SiteGraph, mode) -> np.ndarray:
        return np.full(graph.n_sites, self.spins.extreme(mode))

    def to_index(self, values) -> np.ndarray:
        """Spin values to positions in the spin space."""
        lookup = {s: i for i, s in enumerate(self.spins.values)}
        return np.array([lookup[v] for v in np.asarray(values).tolist()], dtype=np.uint8)

    def from_index(self, idx) -> np.ndarray:
        return np.asarray(self.spins.values)[np.asarray(idx, dtype=np.int64)]


def _check_prob(p):
    if not 0 <= p <= 1:
        raise ValueError(f"p must lie in [0, 1], got {p}")


class RandomCluster(Specification):
    """Random-cluster model on the sites of a line graph (edges of the base graph).

    Plus mode is the wired specification, minus mode the free one.  The open
    probability of an edge is ``p`` when its endpoints are joined off the edge
    (through the ghost in plus mode) and ``p / (p + (1 - p) q)`` otherwise.
    """

    spins = SpinSpace((0, 1))

    def __init__(self, p, q):
        _check_prob(p)
        if q < 1:
            raise ValueError(f"q must be at least 1, got {q}")
        self.p = p
        self.q = q

    def __repr__(self):
        return f"RandomCluster(p={self.p}, q={self.q})"

    @property
    def closed_if_connected(self):
        return 1 - self.p

    @property
    def closed_if_separated(self):
        p, q = self.p, self.q
        return (1 - p) * q / (p + (1 - p) * q)

    def conditional_cdf(self, config, site, window):
        self._check_site(site, window)
        cfg = np.array(config, copy=True)
        cfg[site] = 0
        lab = clusters(cfg, window, wired=window.boundary_mode == Mode.PLUS).label
        x, y = window.ambient.endpoints[site]
        closed = self.closed_if_connected if lab[x] == lab[y] else self.closed_if_separated
        return (closed, 1 if isinstance(closed, Fraction) else 1.0)

    def finite_alphabet(self, graph=None):
        return FiniteAlphabet.from_values([self.closed_if_connected, self.closed_if_separated])

    def kernel_arrays(self, window):
        lg = window.ambient
        if lg.endpoints is None:
            raise ValueError("the random-cluster model lives on a line graph")
        ends = lg.endpoints[window.interior]
        verts, local = np.unique(ends.ravel(), return_inverse=True)
        local = local.reshape(-1, 2)
        nv = verts.shape[0]
        inc = [[] for _ in range(nv)]
        for i, (x, y) in enumerate(local.tolist()):
            inc[x].append(i)
            inc[y].append(i)
        inc_ptr = np.zeros(nv + 1, dtype=np.int64)
        inc_ptr[1:] = np.cumsum([len(a) for a in inc])
        inc_idx = np.array([i for a in inc for i in a], dtype=np.int64)
        ghost = np.zeros(nv, dtype=np.bool_)
        if window.boundary_mode == Mode.PLUS:
            ghost[np.searchsorted(verts, boundary_vertices(window))] = True
        probs = np.array([float(self.closed_if_connected), float(self.closed_if_separated)])
        return dict(kind=KIND_RC, ex=local[:, 0].copy(), ey=local[:, 1].copy(),
                    inc_ptr=inc_ptr, inc_idx=inc_idx, ghost=ghost, probs=probs)


class _PairField(Specification):
    """Ising-type models: spins -1/+1, P(-) = 1 / (1 + exp(2 h)) for local field h."""

    spins = SpinSpace((-1, 1))

    @abstractmethod
    def couplings(self, graph: SiteGraph, v: int):
        """``(sites, J, phantom)``: in-box partners with coupling, and the
        summed coupling to lattice partners lying outside the box."""

    def field(self, config, site, window):
        mode_spin = int(window.boundary_mode)
        sites, J, phantom = self.couplings(window.ambient, site)
        spins = np.where(window.mask[sites], np.asarray(config)[sites], mode_spin)
        return float(np.dot(J, spins)) + phantom * mode_spin

    def conditional_cdf(self, config, site, window):
        self._check_site(site, window)
        h = self.field(config, site, window)
        return (1.0 / (1.0 + math.exp(2.0 * h)), 1.0)

    def kernel_arrays(self, window):
        g = window.ambient
        pos = -np.ones(g.n_sites, dtype=np.int64)
        pos[window.interior] = np.arange(len(window))
        mode_spin = int(window.boundary_mode)
        ptr, idx, Js = [0], [], []
        h_ext = np.zeros(len(window))
        for i, v in enumerate(window.interior.tolist()):
            sites, J, phantom = self.couplings(g, v)
            inside = window.mask[sites]
            idx.extend(pos[sites[inside]].tolist())
            Js.extend(np.asarray(J, dtype=float)[inside].tolist())
            ptr.append(len(idx))
            h_ext[i] = (float(np.sum(np.asarray(J, dtype=float)[~inside])) + float(phantom)) * mode_spin
        return dict(kind=KIND_FIELD, nbr_ptr=np.array(ptr, dtype=np.int64),
                    nbr_idx=np.array(idx, dtype=np.int64), nbr_J=np.array(Js, dtype=float), h_ext=h_ext)


class Ising(_PairField):
    """Nearest-neighbour Ising model at inverse temperature ``beta``.

    ``Ising.exact(w)`` builds the model from ``w = exp(2 beta)`` given as a
    Fraction; conditional values are then rational.
    """

    def __init__(self, beta, weight=None):
        if beta < 0:
            raise ValueError(f"beta must be nonnegative, got {beta}")
        self.beta = beta
        self.weight = math.exp(2 * beta) if weight is None else weight

    @classmethod
    def exact(cls, weight) -> "Ising":
        weight = Fraction(weight)
        if weight < 1:
            raise ValueError("exp(2 beta) must be at least 1")
        return cls(math.log(weight) / 2, weight)

    def __repr__(self):
        return f"Ising(beta={self.beta})"

    def couplings(self, graph, v):
        nb = graph.neighbors(v)
        return nb, np.full(nb.shape[0], float(self.beta)), float(self.beta) * int(graph.missing[v])

    def _minus_prob(self, h: int):
        w = self.weight
        if isinstance(w, Fraction):
            return 1 / (1 + w ** h)
        return 1.0 / (1.0 + math.exp(2.0 * self.beta * h))

    def conditional_cdf(self, config, site, window):
        self._check_site(site, window)
        mode_spin = int(window.boundary_mode)
        g = window.ambient
        nb = g.neighbors(site)
        spins = np.where(window.mask[nb], np.asarray(config)[nb], mode_spin)
        h = int(spins.sum()) + int(g.missing[site]) * mode_spin
        m = self._minus_prob(h)
        return (m, 1 if isinstance(m, Fraction) else 1.0)

    def finite_alphabet(self, graph):
        delta = graph.max_degree
        return FiniteAlphabet.from_values([self._minus_prob(h) for h in range(-delta, delta + 1, 2)])


class LongRangeIsing(_PairField):
    """Ising model with couplings ``beta * dist**-alpha`` for graph distance ``1..trunc``.

    Requires a box (coordinates), so that partners beyond the sides of the box
    can be counted and held at the boundary spin.
    """

    def __init__(self, beta, alpha, trunc):
        if beta < 0:
            raise ValueError(f"beta must be nonnegative, got {beta}")
        if trunc < 0:
            raise ValueError(f"truncation radius must be nonnegative, got {trunc}")
        self.beta = float(beta)
        self.alpha = float(alpha)
        self.trunc = int(trunc)
        self._cache = weakref.WeakKeyDictionary()

    def __repr__(self):
        return f"LongRangeIsing(beta={self.beta}, alpha={self.alpha}, trunc={self.trunc})"

    def coupling(self, k):
        return self.beta * float(k) ** (-self.alpha)

    def couplings(self, graph, v):
        per_graph = self._cache.setdefault(graph, {})
        hit = per_graph.get(v)
        if hit is not None:
            return hit
        if graph.coords is None:
            raise ValueError("long-range couplings need a box with coordinates")
        d = graph.distances(v)
        sel = np.flatnonzero((d >= 1) & (d <= self.trunc))
        J = np.array([self.coupling(k) for k in d[sel]])
        dim = graph.coords.shape[1]
        phantom = 0.0
        for k in range(1, self.trunc + 1):
            outside = lattice_sphere_count(dim, k) - int(np.count_nonzero(d == k))
            phantom += outside * self.coupling(k)
        out = (sel, J, phantom)
        per_graph[v] = out
        return out

    def finite_alphabet(self, graph):
        if graph.coords is None:
            raise ValueError("long-range couplings need a box with coordinates")
        dim = graph.coords.shape[1]
        fields = np.zeros(1)
        for k in range(1, self.trunc + 1):
            n = lattice_sphere_count(dim, k)
            steps = self.coupling(k) * np.arange(-n, n + 1, 2)
            fields = np.unique((fields[:, None] + steps[None, :]).ravel())
            fields = _dedup(fields)
        return FiniteAlphabet.from_values([1.0 / (1.0 + math.exp(2.0 * h)) for h in fields])


def _dedup(x: np.ndarray, tol=DEDUP_TOL) -> np.ndarray:
    x = np.sort(x)
    keep = np.ones(x.shape[0], dtype=bool)
    keep[1:] = np.diff(x) > tol
    return x[keep]


def make_model(name: str, **params) -> Specification:
    """Build a model from config keys: ``rc`` (p, q), ``ising`` (beta),
    ``lrising`` (beta, alpha, trunc)."""
    if name == "rc":
        return RandomCluster(params["p"], params["q"])
    if name == "ising":
        return Ising(params["beta"])
    if name == "lrising":
        return LongRangeIsing(params["beta"], params["alpha"], params["trunc"])
    raise ValueError(f"unknown model {name!r}")


def enumerate_window_configs(spec: Specification, window: Window):
    """All interior configurations (spin values), as an ``(S^m, m)`` array."""
    m = len(window)
    return np.array(list(itertools.product(spec.spins.values, repeat=m))).reshape(-1, m)
