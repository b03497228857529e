"""Ground truth by brute force.

Window measures are enumerated from their Gibbs weights, not from the
single-site conditionals in :mod:`cftplab.specification`, so comparing the
two is a genuine check.  Weights are rational whenever the parameters are
(``Fraction`` or ``int``), otherwise floating point.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .lattice import Mode, SiteGraph, Window, boundary_vertices, count_clusters_batch
from .specification import Ising, LongRangeIsing, RandomCluster, Specification

STATE_CAP = 2 ** 20


def _is_rational(*xs) -> bool:
    return all(isinstance(x, (Fraction, int)) and not isinstance(x, bool) for x in xs)


@dataclass
class ExactDistribution:
    """A probability distribution on window configurations.

    ``support[i]`` lists the spins of the window's interior sites (in
    ``sites`` order) for atom ``i``; ``mass[i]`` is its probability.
    """

    sites: np.ndarray
    spins: tuple
    support: np.ndarray
    mass: list

    @property
    def exact(self) -> bool:
        return all(isinstance(x, Fraction) for x in self.mass)

    def probabilities(self) -> np.ndarray:
        return np.array([float(x) for x in self.mass])

    def marginal(self, site) -> dict:
        """Law of the spin at ``site`` as ``{spin: mass}``."""
        j = int(np.searchsorted(self.sites, site))
        if j >= self.sites.size or self.sites[j] != site:
            raise ValueError(f"site {site} not in the window")
        out = {s: (Fraction(0) if self.exact else 0.0) for s in self.spins}
        for row, m in zip(self.support[:, j].tolist(), self.mass):
            out[row] += m
        return out

    def as_dict(self) -> dict:
        return {tuple(row): m for row, m in zip(self.support.tolist(), self.mass)}

    def codes(self) -> np.ndarray:
        """Integer code of each atom (base ``|S|``, first site least significant)."""
        return encode(self.support, self.spins)

    def sample(self, n, rng) -> np.ndarray:
        """``n`` atom indices drawn i.i.d. from the distribution."""
        p = self.probabilities()
        return rng.choice(p.shape[0], size=n, p=p / p.sum())


def encode(rows, spins) -> np.ndarray:
    lookup = {s: i for i, s in enumerate(spins)}
    idx = np.vectorize(lookup.__getitem__, otypes=[np.int64])(np.asarray(rows)) if np.size(rows) else \
        np.zeros(np.shape(rows), dtype=np.int64)
    base = len(spins) ** np.arange(idx.shape[1], dtype=np.int64)
    return idx @ base


def _normalize(weights, exact):
    if exact:
        z = sum(weights, Fraction(0))
        return [Fraction(w) / z for w in weights]
    w = np.asarray(weights, dtype=float)
    return list(w / w.sum())


def _all_configs(spins, m):
    if len(spins) ** m > STATE_CAP:
        raise ValueError(f"{len(spins)}^{m} states exceed the enumeration cap {STATE_CAP}")
    idx = np.array(list(itertools.product(range(len(spins)), repeat=m)), dtype=np.int64).reshape(-1, m)
    return idx[:, ::-1]  # first site varies fastest


def _rc_weights(spec: RandomCluster, window: Window, X):
    lg = window.ambient
    ends = lg.endpoints[window.interior]
    verts, local = np.unique(ends.ravel(), return_inverse=True)
    local = local.reshape(-1, 2)
    ghosts = []
    if window.boundary_mode == Mode.PLUS:
        ghosts = np.searchsorted(verts, boundary_vertices(window))
    k = count_clusters_batch(X.astype(bool), local[:, 0], local[:, 1], verts.size, ghosts)
    o = X.sum(axis=1)
    c = X.shape[1] - o
    p, q = spec.p, spec.q
    exact = _is_rational(p, q)
    table = {}
    weights = []
    for key in zip(o.tolist(), c.tolist(), k.tolist()):
        w = table.get(key)
        if w is None:
            oo, cc, kk = key
            if exact:
                w = Fraction(p) ** oo * (1 - Fraction(p)) ** cc * Fraction(q) ** kk
            else:
                w = float(p) ** oo * (1 - float(p)) ** cc * float(q) ** kk
            table[key] = w
        weights.append(w)
    return weights, exact


def _ising_weights(spec: Ising, window: Window, S):
    g = window.ambient
    sites = window.interior
    pos = {int(v): i for i, v in enumerate(sites)}
    mode = int(window.boundary_mode)
    m = sites.size
    # number of disagreeing pairs that touch the window
    dis = np.zeros(S.shape[0], dtype=np.int64)
    for i, v in enumerate(sites.tolist()):
        for u in g.neighbors(v).tolist():
            j = pos.get(u)
            if j is None:
                dis += S[:, i] != mode
            elif j > i:
                dis += S[:, i] != S[:, j]
        dis += (S[:, i] != mode) * int(g.full_degree[v] - g.degree(v))
    w = spec.weight
    exact = isinstance(w, Fraction)
    if exact:
        table = {d: Fraction(1) / w ** d for d in set(dis.tolist())}
        return [table[d] for d in dis.tolist()], True
    # e^{-2 beta * dis}, shifted for stability
    return list(np.exp(-2.0 * spec.beta * (dis - dis.min()))), False


def _lr_weights(spec: LongRangeIsing, window: Window, S):
    g = window.ambient
    if g.coords is None:
        raise ValueError("long-range weights need coordinates")
    coords = g.coords
    sites = window.interior
    m = sites.size
    d = coords.shape[1]
    L = spec.trunc
    mode = float(window.boundary_mode)
    J = np.zeros((m, m))
    h = np.zeros(m)
    inside = {tuple(c): i for i, c in enumerate(coords[sites].tolist())}
    offsets = [o for o in itertools.product(range(-L, L + 1), repeat=d) if 1 <= sum(map(abs, o)) <= L]
    for i, v in enumerate(sites.tolist()):
        for o in offsets:
            x = tuple(int(a + b) for a, b in zip(coords[v], o))
            k = sum(map(abs, o))
            coupling = spec.beta * k ** (-spec.alpha)
            j = inside.get(x)
            if j is None:
                h[i] += coupling * mode
            elif j > i:
                J[i, j] = coupling
    X = S.astype(float)
    energy = np.einsum("ni,ij,nj->n", X, J, X) + X @ h
    return list(np.exp(energy - energy.max())), False


def enumerate_gibbs(spec: Specification, window: Window) -> ExactDistribution:
    """Exact window measure with the window's boundary mode."""
    m = len(window)
    spins = spec.spins.values
    idx = _all_configs(spins, m)
    S = np.asarray(spins)[idx]
    if isinstance(spec, RandomCluster):
        w, exact = _rc_weights(spec, window, S)
    elif isinstance(spec, LongRangeIsing):
        w, exact = _lr_weights(spec, window, S)
    elif isinstance(spec, Ising):
        w, exact = _ising_weights(spec, window, S)
    else:
        raise TypeError(f"no Gibbs weights for {type(spec).__name__}")
    return ExactDistribution(window.interior.copy(), spins, S, _normalize(w, exact))


def enumerate_potts(graph: SiteGraph, vertices, q: int, weight, boundary_color=None) -> ExactDistribution:
    """Potts measure ``prop. to weight ** (#agreeing pairs)`` on ``vertices``.

    Pairs are edges with an endpoint in ``vertices``; when ``boundary_color``
    is given every other lattice neighbour (inside the box or beyond its
    sides) carries that colour, otherwise only pairs inside ``vertices``
    count.  ``weight = exp(beta)``; colours are ``1..q``.
    """
    if q < 2:
        raise ValueError("q must be at least 2")
    vertices = np.unique(np.asarray(vertices, dtype=np.int64))
    m = vertices.size
    colors = tuple(range(1, q + 1))
    S = np.asarray(colors)[_all_configs(colors, m)]
    pos = {int(v): i for i, v in enumerate(vertices)}
    H = np.zeros(S.shape[0], dtype=np.int64)
    for i, v in enumerate(vertices.tolist()):
        for u in graph.neighbors(v).tolist():
            j = pos.get(u)
            if j is None:
                if boundary_color is not None:
                    H += S[:, i] == boundary_color
            elif j > i:
                H += S[:, i] == S[:, j]
        if boundary_color is not None:
            H += (S[:, i] == boundary_color) * int(graph.full_degree[v] - graph.degree(v))
    exact = _is_rational(weight)
    if exact:
        table = {h: Fraction(weight) ** h for h in set(H.tolist())}
        w = [table[h] for h in H.tolist()]
    else:
        w = list(float(weight) ** (H - H.max()))
    return ExactDistribution(vertices, colors, S, _normalize(w, exact))


def exact_tv(d1, d2):
    """Total variation ``1/2 sum |d1(a) - d2(a)|`` between two laws on the same atoms.

    Accepts dicts ``{atom: mass}`` or :class:`ExactDistribution` objects.
    """
    a = d1.as_dict() if isinstance(d1, ExactDistribution) else dict(d1)
    b = d2.as_dict() if isinstance(d2, ExactDistribution) else dict(d2)
    if set(a) != set(b):
        raise ValueError("distributions live on different atoms")
    total = sum(abs(a[k] - b[k]) for k in a)
    return total / 2


def empirical(codes, n_atoms) -> dict:
    """Empirical law of integer-coded samples, over all ``n_atoms`` codes."""
    counts = np.bincount(np.asarray(codes, dtype=np.int64), minlength=n_atoms)
    return dict(enumerate((counts / counts.sum()).tolist()))


def coded(dist: ExactDistribution) -> dict:
    """``{code: mass}`` for a distribution, matching :func:`empirical` codes."""
    return dict(zip(dist.codes().tolist(), dist.mass))


def conditional_from_enumeration(dist: ExactDistribution, row: int, j: int) -> tuple:
    """Cdf of the spin at position ``j`` given atom ``row`` off ``j``."""
    sup = dist.support
    others = np.delete(np.arange(sup.shape[1]), j)
    same = np.all(sup[:, others] == sup[row, others], axis=1)
    rows = np.flatnonzero(same)
    masses = {s: 0 for s in dist.spins}
    for r in rows.tolist():
        masses[sup[r, j]] += dist.mass[r]
    total = sum(masses.values())
    acc = 0
    cdf = []
    for s in dist.spins:
        acc += masses[s]
        cdf.append(acc / total)
    return tuple(cdf)


@dataclass
class ConditionalReport:
    max_discrepancy: float
    stationarity_error: float
    checked: int


def check_conditional(spec: Specification, window: Window) -> ConditionalReport:
    """Compare the model's conditionals with those of the enumerated measure.

    Every configuration and every interior site is checked.  Also applies one
    exact sweep (site by site, in site order) built from the model's
    conditionals to the enumerated measure and reports how far it moves.
    """
    dist = enumerate_gibbs(spec, window)
    g = window.ambient
    base = spec.extreme_config(g, window.boundary_mode)
    sup = dist.support
    worst = Fraction(0) if dist.exact else 0.0
    spec_cdf = {}
    for row in range(sup.shape[0]):
        cfg = base.copy()
        cfg[window.interior] = sup[row]
        for j, v in enumerate(window.interior.tolist()):
            mine = spec.conditional_cdf(cfg, v, window)
            spec_cdf[row, j] = mine
            ref = conditional_from_enumeration(dist, row, j)
            for a, b in zip(mine, ref):
                worst = max(worst, abs(a - b))
    # one sweep of heat-bath kernels applied to the exact measure
    spins = dist.spins
    k = len(spins)
    codes = dist.codes()
    where = {c: i for i, c in enumerate(codes.tolist())}
    idx = np.vectorize({s: i for i, s in enumerate(spins)}.__getitem__, otypes=[np.int64])(sup)
    mu = list(dist.mass)
    for j in range(sup.shape[1]):
        new = [0] * len(mu)
        step = k ** j
        for row in range(sup.shape[0]):
            if idx[row, j] != 0:
                continue
            fiber = [where[int(codes[row]) + s * step] for s in range(k)]
            total = sum(mu[f] for f in fiber)
            prev = 0
            for s, f in enumerate(fiber):
                c = spec_cdf[f, j][s]
                new[f] = total * (c - prev)
                prev = c
        mu = new
    drift = max(abs(a - b) for a, b in zip(mu, dist.mass))
    return ConditionalReport(float(worst), float(drift), int(sup.shape[0] * sup.shape[1]))


def monotone_coupling_disagreement(m1: dict, m2: dict, spins) -> tuple:
    """Disagreement probability of the quantile coupling of two laws on ordered spins.

    Returns ``(Pr[X != Y], (|S| - 1) * TV)``.
    """
    c1 = np.cumsum([float(m1[s]) for s in spins])
    c2 = np.cumsum([float(m2[s]) for s in spins])
    cuts = np.unique(np.concatenate([[0.0], c1, c2, [1.0]]).clip(0, 1))
    dis = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi <= lo:
            continue
        u = (lo + hi) / 2
        x = int(np.searchsorted(c1, u, side="left"))
        y = int(np.searchsorted(c2, u, side="left"))
        if x != y:
            dis += hi - lo
    return dis, (len(spins) - 1) * float(exact_tv(m1, m2))


def domination_violation(lower: ExactDistribution, upper: ExactDistribution, events=100, rng=None) -> float:
    """Largest ``P_lower(E) - P_upper(E)`` over random increasing events ``E``.

    Each event is the up-set generated by a few random configurations; a
    value at or below zero means no violation was found.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    a = np.asarray(lower.support, dtype=float)
    if not np.array_equal(lower.support, upper.support):
        raise ValueError("distributions live on different atoms")
    pl, pu = lower.probabilities(), upper.probabilities()
    worst = -math.inf
    for _ in range(events):
        gens = a[rng.choice(a.shape[0], size=int(rng.integers(1, 4)))]
        up = np.zeros(a.shape[0], dtype=bool)
        for gvec in gens:
            up |= np.all(a >= gvec, axis=1)
        worst = max(worst, float(pl[up].sum() - pu[up].sum()))
    return worst
