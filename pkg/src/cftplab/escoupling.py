"""Edwards-Sokal colouring and the vertex-to-edge payload factor.

Colouring: each open cluster takes the colour carried by one of its
vertices, either the vertex with the smallest ``z`` label or the
lexicographically smallest vertex.  In a wired window the cluster joined to
the boundary takes the boundary colour.

Payload factor: every edge picks one payload slot from one of its endpoints
in such a way that no slot is used twice, so i.i.d. vertex payloads turn into
i.i.d. edge payloads.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import Mode, SiteGraph, Window, clusters
from .rng import STREAM_SIGMA, STREAM_Z, SweepRandomness


class DuplicateLabelError(ValueError):
    """Two vertices carry the same ``z`` label; draw fresh labels."""


@dataclass(frozen=True)
class ColorSources:
    """Per-vertex representative label ``z`` and colour ``sigma`` in ``1..q``."""

    z: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        if self.z.shape != self.sigma.shape:
            raise ValueError("z and sigma must have the same shape")

    @classmethod
    def draw(cls, seed, n_vertices, q, replica=0) -> "ColorSources":
        rnd = SweepRandomness(seed, replica)
        v = np.arange(n_vertices)
        z = rnd.stream(v, 0, STREAM_Z)
        sigma = 1 + np.floor(rnd.stream(v, 0, STREAM_SIGMA) * q).astype(np.int64)
        if np.unique(z).size != z.size:
            raise DuplicateLabelError("repeated z label")
        return cls(z, sigma)


VARIANTS = ("argmin-z", "lexicographic")


def _representatives(label, z, variant, ghost):
    reps = {}
    for v, lab in enumerate(label.tolist()):
        if lab < 0 or lab == ghost:
            continue
        r = reps.get(lab)
        if r is None or (variant == "argmin-z" and z[v] < z[r]) or (variant == "lexicographic" and v < r):
            reps[lab] = v
    return reps


def es_color(omega, window: Window, sources: ColorSources, variant="argmin-z", boundary_color=1) -> np.ndarray:
    """Colour the vertices touched by a window of edges.

    ``omega`` holds edge states over the ambient line graph.  Returns an array
    over base vertices; untouched vertices get 0.  In plus (wired) mode the
    cluster through the boundary gets ``boundary_color``.  The lexicographic
    variant needs a box, whose row-major numbering makes the smallest site
    index the lexicographically smallest vertex.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    lg = window.ambient
    if variant == "lexicographic" and lg.base.coords is None:
        raise ValueError("lexicographic colouring needs coordinates")
    wired = window.boundary_mode == Mode.PLUS
    cl = clusters(omega, window, wired)
    ghost = lg.base.n_sites
    if variant == "argmin-z":
        touched = cl.label >= 0
        if np.unique(sources.z[touched]).size != int(touched.sum()):
            raise DuplicateLabelError("repeated z label")
    reps = _representatives(cl.label, sources.z, variant, ghost)
    out = np.zeros(lg.base.n_sites, dtype=np.int64)
    for v, lab in enumerate(cl.label.tolist()):
        if lab < 0:
            continue
        out[v] = boundary_color if lab == ghost else sources.sigma[reps[lab]]
    return out


def es_color_batch(states, window: Window, z, sigma, variant="argmin-z", boundary_color=1):
    """Colour many edge configurations of one window.

    ``states`` is ``(N, m)`` over the window's edges (0/1); ``z`` and ``sigma``
    are ``(N, n_vertices)``.  Returns ``(vertices, colors)`` where ``colors``
    is ``(N, len(vertices))`` for the touched vertices.
    """
    lg = window.ambient
    states = np.asarray(states, dtype=np.uint8)
    verts = np.unique(lg.endpoints[window.interior].ravel())
    colors = np.zeros((states.shape[0], verts.size), dtype=np.int64)
    codes = states @ (np.int64(1) << np.arange(states.shape[1], dtype=np.int64))
    wired = window.boundary_mode == Mode.PLUS
    ghost = lg.base.n_sites
    omega = np.zeros(lg.n_sites, dtype=np.int64)
    for code in np.unique(codes).tolist():
        rows = np.flatnonzero(codes == code)
        omega[window.interior] = states[rows[0]]
        lab = clusters(omega, window, wired).label[verts]
        for c in np.unique(lab).tolist():
            members = np.flatnonzero(lab == c)
            if c == ghost:
                colors[np.ix_(rows, members)] = boundary_color
                continue
            vs = verts[members]
            if variant == "argmin-z":
                rep = vs[np.argmin(z[np.ix_(rows, vs)], axis=1)]
            else:
                rep = np.full(rows.size, vs.min())
            colors[np.ix_(rows, members)] = sigma[rows, rep][:, None]
    return verts, colors


@dataclass(frozen=True)
class EdgePayload:
    """Edge payloads with the (vertex, slot) each was taken from; slots are 1-based."""

    edges: np.ndarray
    source: np.ndarray
    slot: np.ndarray
    values: np.ndarray


def edge_factor_psi(graph: SiteGraph, y, z=None, variant="order") -> EdgePayload:
    """Hand each edge a payload slot of one endpoint.

    ``order``: the edge takes slot ``k`` of its endpoint ``u`` with smaller
    ``z``, where ``k`` counts the neighbours ``w`` of ``u`` with
    ``z_u <= z_w <= z_v`` (so the other endpoint counts itself).
    ``direction``: edge ``{v, v + e_i}`` takes slot ``i`` of ``v``.
    """
    y = np.asarray(y)
    edges = graph.edges()
    src = np.empty(edges.shape[0], dtype=np.int64)
    slot = np.empty(edges.shape[0], dtype=np.int64)
    if variant == "order":
        if z is None:
            raise ValueError("order-based payloads need z labels")
        z = np.asarray(z)
        if y.shape[1] < graph.max_degree:
            raise ValueError("need at least max-degree payload slots per vertex")
        if np.unique(z).size != z.size:
            raise DuplicateLabelError("repeated z label")
        for e, (a, b) in enumerate(edges.tolist()):
            u, v = (a, b) if z[a] < z[b] else (b, a)
            nz = z[graph.neighbors(u)]
            src[e] = u
            slot[e] = int(np.count_nonzero((nz >= z[u]) & (nz <= z[v])))
    elif variant == "direction":
        if graph.coords is None:
            raise ValueError("direction-based payloads need coordinates")
        d = graph.coords.shape[1]
        if y.shape[1] < d:
            raise ValueError("need at least d payload slots per vertex")
        for e, (a, b) in enumerate(edges.tolist()):
            diff = graph.coords[b] - graph.coords[a]
            i = int(np.flatnonzero(diff)[0])
            src[e] = a if diff[i] > 0 else b
            slot[e] = i + 1
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return EdgePayload(edges, src, slot, y[src, slot - 1])
