"""Coupled plus/minus dynamics and coupling from the past.

A sweep at time ``t`` updates every site of a window once, in the order
given by the labels ``B_{., t}``, each site through the inverse-cdf update
driven by ``A_{., t}``.  The composition ``f_n`` applies the sweep of time
``n`` first and the sweep of time 1 last, so extending the horizon adds
sweeps further in the past while reusing the draws of times ``1..n``.

Two routes are provided.  :func:`sweep` is a plain Python reference that
goes through :mod:`cftplab.specification` and :mod:`cftplab.order`; the
rest runs compiled kernels on a window compiled by :func:`compile_window`.
Both consume the same stateless draws and agree step for step.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .lattice import Mode, SiteGraph, Window, ball, max_clean_radius
from .order import OrderLabels, default_digits, sort_window
from .rng import SweepRandomness, replica_keys
from .specification import KIND_FIELD, Specification

HORIZON_CAP = 2 ** 20
DEFAULT_DEPTH = 16


class NonCoalescenceError(RuntimeError):
    """The horizon cap was reached before the top and bottom chains met."""


@dataclass(frozen=True)
class Dynamics:
    """How sweeps are driven: order kind, digit alphabet size, update alphabet."""

    order: str = "real"
    D: int | None = None
    finite: bool = False
    depth: int = DEFAULT_DEPTH

    def __post_init__(self):
        if self.order not in ("real", "digits"):
            raise ValueError(f"unknown order {self.order!r}")
        if self.D is not None and self.D < 2:
            raise ValueError("D must be at least 2")

    def digits_for(self, graph: SiteGraph) -> int:
        return default_digits(graph) if self.D is None else self.D


@dataclass(frozen=True, eq=False)
class CompiledWindow:
    """A window flattened for the kernels, plus the bookkeeping to read it back."""

    spec: Specification
    window: Window
    dynamics: Dynamics
    W: tuple
    center_local: int

    @property
    def size(self) -> int:
        return len(self.window)

    def to_config(self, state) -> np.ndarray:
        """Interior state (spin positions) to a full configuration of spin values."""
        cfg = self.spec.extreme_config(self.window.ambient, self.window.boundary_mode)
        cfg[self.window.interior] = self.spec.from_index(state)
        return cfg


def _shell_csr(graph: SiteGraph, sites, depth):
    ptr = [0]
    idx = []
    for w in sites.tolist():
        d = graph.distances(w)
        order = np.argsort(d, kind="stable")
        ds = d[order]
        for k in range(depth + 1):
            lo, hi = np.searchsorted(ds, k, "left"), np.searchsorted(ds, k, "right")
            idx.extend(order[lo:hi].tolist())
            ptr.append(len(idx))
    return np.array(ptr, dtype=np.int64), np.array(idx, dtype=np.int64)


def compile_window(spec: Specification, window: Window, dynamics: Dynamics = Dynamics(),
                   depth=None) -> CompiledWindow:
    """Flatten a window and a model into the tuple the kernels consume."""
    g = window.ambient
    arr = spec.kernel_arrays(window)
    sites = np.ascontiguousarray(window.interior, dtype=np.int64)
    empty_i = np.zeros(0, dtype=np.int64)
    empty_f = np.zeros(0)
    A = spec.finite_alphabet(g).as_array() if dynamics.finite else empty_f
    real = dynamics.order == "real"
    depth = dynamics.depth if depth is None else depth
    if real:
        D, shell_ptr, shell_idx, depth = 2, empty_i, empty_i, 0
    else:
        D = dynamics.digits_for(g)
        shell_ptr, shell_idx = _shell_csr(g, sites, depth)
    if arr["kind"] == KIND_FIELD:
        rc = (empty_i, empty_i, empty_i, empty_i, np.zeros(0, dtype=np.bool_), np.zeros(2), False, 0)
        fld = (arr["nbr_ptr"], arr["nbr_idx"], arr["nbr_J"], arr["h_ext"])
    else:
        rc = (arr["ex"], arr["ey"], arr["inc_ptr"], arr["inc_idx"], arr["ghost"], arr["probs"],
              bool(window.boundary_mode == Mode.PLUS), int(arr["ghost"].shape[0]))
        fld = (np.zeros(1, dtype=np.int64), empty_i, empty_f, empty_f)
    W = (sites, int(arr["kind"]), bool(dynamics.finite), A) + fld + rc[:7] + (
        real, int(D), shell_ptr, shell_idx, int(depth), rc[7])
    center = -1
    if window.center is not None and window.center in window:
        center = int(np.searchsorted(sites, window.center))
    return CompiledWindow(spec, window, dynamics, W, center)


# ---------------------------------------------------------------- reference route

def sweep(config, window: Window, randomness: SweepRandomness, spec: Specification, time: int,
          dynamics: Dynamics = Dynamics()):
    """One sweep at ``time`` computed site by site through the specification.

    Returns the new configuration and the number of order ties.
    """
    cfg = np.array(config, copy=True)
    g = window.ambient
    if len(window) == 0:
        return cfg, 0
    labels = OrderLabels.from_randomness(randomness, g, time, dynamics.order,
                                         dynamics.digits_for(g) if dynamics.order == "digits" else None,
                                         None if dynamics.order == "real" else dynamics.depth)
    ordered = sort_window(labels, window)
    alphabet = spec.finite_alphabet(g) if dynamics.finite else None
    draws = dict(zip(window.interior.tolist(), randomness.a(window.interior, time).tolist()))
    for v in ordered.sites.tolist():
        a = draws[v]
        if alphabet is None:
            cfg[v] = spec.update(cfg, v, a, window)
        else:
            cfg[v] = spec.finite_update(alphabet, cfg, v, alphabet.quantize(a), window)
    return cfg, ordered.ties


def compose(config, window, randomness, spec, n, dynamics=Dynamics()):
    """``f_n`` by the reference route: sweeps of times ``n, ..., 1``."""
    cfg = np.array(config, copy=True)
    for t in range(n, 0, -1):
        cfg, _ = sweep(cfg, window, randomness, spec, t, dynamics)
    return cfg


# ---------------------------------------------------------------- compiled route

def _chunks(total, workers):
    workers = max(1, int(workers))
    bounds = np.linspace(0, total, min(workers, max(total, 1)) + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def fan_out(fn, total, workers=1):
    """Run ``fn(lo, hi)`` over a split of ``range(total)``; results land by index."""
    parts = _chunks(total, workers)
    if len(parts) <= 1:
        for lo, hi in parts:
            fn(lo, hi)
        return
    with ThreadPoolExecutor(max_workers=len(parts)) as pool:
        for f in [pool.submit(fn, lo, hi) for lo, hi in parts]:
            f.result()


def default_workers() -> int:
    return max(1, min(8, os.cpu_count() or 1))


@dataclass
class ChainPair:
    """Top and bottom chains of one window after ``f_n``."""

    mode: Mode
    window: Window
    top: np.ndarray
    bottom: np.ndarray
    horizon: int

    @property
    def coalesced(self) -> bool:
        return bool(np.array_equal(self.top, self.bottom))


def chain_pair(spec, window, seed, n, replica=0, dynamics=Dynamics()) -> ChainPair:
    """Apply ``f_n`` to the maximal and minimal interior states."""
    cw = compile_window(spec, window, dynamics)
    out = trajectories(cw, seed, n, replica)
    return ChainPair(window.boundary_mode, window, cw.to_config(out[-1, 0]), cw.to_config(out[-1, 1]), n)


def trajectories(cw: CompiledWindow, seed, n, replica=0, starts=None) -> np.ndarray:
    """All intermediate states of ``f_n`` from each start row (default: max, min).

    Returns ``(n + 1, rows, m)`` spin positions.
    """
    m = cw.size
    if starts is None:
        starts = np.stack([np.ones(m, dtype=np.uint8), np.zeros(m, dtype=np.uint8)])
    starts = np.ascontiguousarray(starts, dtype=np.uint8)
    out = np.empty((n + 1,) + starts.shape, dtype=np.uint8)
    key = replica_keys(seed, [replica])[0]
    K.trajectory(cw.W, key, int(n), starts, out)
    return out


@dataclass
class SampleBatch:
    """Exact window samples for a range of replicas."""

    window: Window
    states: np.ndarray
    horizons: np.ndarray
    ties: np.ndarray

    @property
    def unresolved(self) -> int:
        return int(np.count_nonzero(self.horizons < 0))


def cftp_samples(spec, window, seed, replicas, dynamics=Dynamics(), horizon_cap=HORIZON_CAP,
                 workers=1, first_replica=0) -> SampleBatch:
    """Monotone CFTP for replicas ``first_replica ..``; capped replicas get horizon -1."""
    cw = compile_window(spec, window, dynamics)
    keys = replica_keys(seed, np.arange(first_replica, first_replica + replicas))
    states = np.zeros((replicas, cw.size), dtype=np.uint8)
    hz = np.zeros(replicas, dtype=np.int64)
    ties = np.zeros(replicas, dtype=np.int64)

    def work(lo, hi):
        K.cftp_batch(cw.W, keys[lo:hi], int(horizon_cap), states[lo:hi], hz[lo:hi], ties[lo:hi])

    fan_out(work, replicas, workers)
    return SampleBatch(window, states, hz, ties)


def cftp_window_sample(spec, window, seed, replica=0, dynamics=Dynamics(), horizon_cap=HORIZON_CAP):
    """One exact sample of the window's measure with its boundary mode.

    Returns the full configuration (extreme outside the window) and the
    horizon at which the top and bottom chains met.
    """
    batch = cftp_samples(spec, window, seed, 1, dynamics, horizon_cap, first_replica=replica)
    if batch.horizons[0] < 0:
        raise NonCoalescenceError(f"no coalescence within {horizon_cap} sweeps")
    cw = compile_window(spec, window, dynamics)
    return cw.to_config(batch.states[0]), int(batch.horizons[0])


# ---------------------------------------------------------------- radii and times

@dataclass
class RadiusReport:
    """Coding radius and diagonal times of one site for one replica.

    ``None`` marks a quantity that was not resolved within its cap.
    """

    site: int
    R_tilde: int | None = None
    T: int | None = None
    T_star: int | None = None
    spin: object = None
    sweeps_used: int = 0
    rng_draws: int = 0
    transcript: list = field(default_factory=list)


class _WindowCache:
    def __init__(self, spec, graph, v, dynamics):
        self.spec, self.graph, self.v, self.dynamics = spec, graph, v, dynamics
        self._cache = {}

    def get(self, r, mode, depth=None):
        key = (r, int(mode), depth)
        cw = self._cache.get(key)
        if cw is None:
            cw = compile_window(self.spec, ball(self.graph, self.v, r, mode), self.dynamics, depth)
            self._cache[key] = cw
        return cw


def default_radius_cap(graph, v):
    return max_clean_radius(graph, v)


def coding_radii(spec, graph, v, seed, replicas, radius_cap=None, dynamics=Dynamics(),
                 horizon_cap=HORIZON_CAP, workers=1, first_replica=0):
    """``R~_v`` for many replicas: the first ``r`` at which the exact plus and
    minus window samples agree at ``v`` under shared randomness.

    Returns ``(radii, plus_spins, minus_spins, ties)``; ``radii`` is -1 when
    unresolved.  ``plus_spins[:, r]`` and ``minus_spins[:, r]`` hold the centre
    spin positions of the two samples (-1 after resolution).
    Raises :class:`NonCoalescenceError` if a CFTP run hits the horizon cap.
    """
    cap = default_radius_cap(graph, v) if radius_cap is None else int(radius_cap)
    cache = _WindowCache(spec, graph, v, dynamics)
    radii = np.full(replicas, -1, dtype=np.int64)
    plus = np.full((replicas, cap + 1), -1, dtype=np.int64)
    minus = np.full((replicas, cap + 1), -1, dtype=np.int64)
    ties = np.zeros(replicas, dtype=np.int64)
    pending = np.arange(replicas)
    for r in range(cap + 1):
        if pending.size == 0:
            break
        got = {}
        for mode in (Mode.PLUS, Mode.MINUS):
            cw = cache.get(r, mode)
            keys = replica_keys(seed, first_replica + pending)
            states = np.zeros((pending.size, cw.size), dtype=np.uint8)
            hz = np.zeros(pending.size, dtype=np.int64)
            tc = np.zeros(pending.size, dtype=np.int64)

            def work(lo, hi, cw=cw, keys=keys, states=states, hz=hz, tc=tc):
                K.cftp_batch(cw.W, keys[lo:hi], int(horizon_cap), states[lo:hi], hz[lo:hi], tc[lo:hi])

            fan_out(work, pending.size, workers)
            if np.any(hz < 0):
                raise NonCoalescenceError(f"no coalescence within {horizon_cap} sweeps at radius {r}")
            got[mode] = states[:, cw.center_local].astype(np.int64)
            ties[pending] += tc
        plus[pending, r] = got[Mode.PLUS]
        minus[pending, r] = got[Mode.MINUS]
        agree = got[Mode.PLUS] == got[Mode.MINUS]
        radii[pending[agree]] = r
        pending = pending[~agree]
    return radii, plus, minus, ties


def coding_radius(spec, graph, v, seed, replica=0, radius_cap=None, dynamics=Dynamics(),
                  horizon_cap=HORIZON_CAP) -> RadiusReport:
    """``R~_v`` for one replica with its per-radius transcript."""
    radii, plus, minus, _ = coding_radii(spec, graph, v, seed, 1, radius_cap, dynamics, horizon_cap,
                                         first_replica=replica)
    rep = RadiusReport(v, None if radii[0] < 0 else int(radii[0]))
    for r in range(plus.shape[1]):
        if plus[0, r] < 0:
            break
        rep.transcript.append((r, spec.spins.values[plus[0, r]], spec.spins.values[minus[0, r]]))
    return rep


def center_pairs(spec, graph, v, seed, replicas, n, r, dynamics=Dynamics(), workers=1,
                 first_replica=0, cache=None, replica_idx=None):
    """Centre spins of ``f_n`` from all-max (plus window) and all-min (minus
    window) of radius ``r``, for many replicas.

    The two windows share their sites, so both chains run in one pass with a
    common update order per time step.
    """
    cache = _WindowCache(spec, graph, v, dynamics) if cache is None else cache
    cp = cache.get(r, Mode.PLUS)
    idx = np.arange(replicas) if replica_idx is None else np.asarray(replica_idx)
    keys = replica_keys(seed, first_replica + idx)
    count = keys.shape[0]
    top = np.zeros(count, dtype=np.uint8)
    bot = np.zeros(count, dtype=np.uint8)
    ties = np.zeros(count, dtype=np.int64)

    def work(lo, hi):
        K.fused_pair_batch(cp.W, keys[lo:hi], int(n), cp.center_local, top[lo:hi], bot[lo:hi], ties[lo:hi])

    fan_out(work, count, workers)
    return top, bot, ties


@dataclass
class PhiEstimate:
    n: int
    r: int
    trials: int
    disagreements: int

    @property
    def phi_hat(self) -> float:
        return self.disagreements / self.trials

    @property
    def stderr(self) -> float:
        s = self.phi_hat
        return math.sqrt(s * (1 - s) / self.trials)


def estimate_phi(spec, graph, n, r, replicas, seed, v=None, dynamics=Dynamics(), workers=1) -> PhiEstimate:
    """Monte Carlo estimate of ``phi(n, r)`` at one deep-interior site ``v``.

    On a transitive lattice every interior site gives the same value, so the
    maximum over sites is replaced by the value at ``v`` (the box centre by
    default).
    """
    if replicas < 1:
        raise ValueError("replicas must be at least 1")
    v = central_site(graph) if v is None else v
    if n == 0:
        return PhiEstimate(0, r, replicas, replicas)
    top, bot, _ = center_pairs(spec, graph, v, seed, replicas, n, r, dynamics, workers)
    return PhiEstimate(n, r, replicas, int(np.count_nonzero(top != bot)))


def central_site(graph: SiteGraph) -> int:
    """A site nearest the middle of the box (for a line graph: a middle edge)."""
    if graph.coords is None:
        return 0
    mid = graph.coords.mean(axis=0)
    return int(np.argmin(np.abs(graph.coords - mid).sum(axis=1)))


@dataclass
class DiagonalTimes:
    """``T`` (and ``T*`` when requested) for a batch of replicas; -1 is unresolved."""

    T: np.ndarray
    spin: np.ndarray
    T_star: np.ndarray | None
    disagree: np.ndarray
    ties: np.ndarray


def diagonal_times(spec, graph, v, seed, replicas, n_cap=None, dynamics=Dynamics(), spacetime=False,
                   workers=1, first_replica=0) -> DiagonalTimes:
    """First ``n`` with ``f_n`` of the radius-``n`` plus and minus windows
    agreeing at ``v``, for many replicas.

    ``disagree[:, n]`` records the disagreement indicator at each ``n``
    (column 0 is always 1).  With ``spacetime`` the digit labels of times
    ``0..n`` must also order every pair of sites of the radius-``n`` ball
    within ``n`` shells, and ``T*`` is twice the first ``n`` where both hold.
    """
    if spacetime and dynamics.order != "digits":
        raise ValueError("space-time radius needs digit labels")
    cap = default_radius_cap(graph, v) if n_cap is None else int(n_cap)
    cache = _WindowCache(spec, graph, v, dynamics)
    T = np.full(replicas, -1, dtype=np.int64)
    spin = np.full(replicas, -1, dtype=np.int64)
    Ts = np.full(replicas, -1, dtype=np.int64) if spacetime else None
    disagree = np.zeros((replicas, cap + 1), dtype=np.uint8)
    disagree[:, 0] = 1
    ties = np.zeros(replicas, dtype=np.int64)
    pending = np.arange(replicas)
    st_pending = np.zeros(0, dtype=np.int64)
    for n in range(1, cap + 1):
        if pending.size:
            top, bot, tc = center_pairs(spec, graph, v, seed, replicas, n, n, dynamics, workers,
                                        first_replica, cache, pending)
            ties[pending] += tc
            agree = top == bot
            disagree[pending[~agree], n] = 1
            T[pending[agree]] = n
            spin[pending[agree]] = top[agree]
            st_pending = np.concatenate([st_pending, pending[agree]])
            pending = pending[~agree]
        if spacetime and st_pending.size:
            cw = cache.get(n, Mode.PLUS, max(n, dynamics.depth))
            keys = replica_keys(seed, first_replica + st_pending)
            ok = np.zeros(st_pending.size, dtype=np.bool_)

            def work(lo, hi, cw=cw, keys=keys, ok=ok, n=n):
                K.orders_resolved_batch(cw.W, keys[lo:hi], n, n, ok[lo:hi])

            fan_out(work, st_pending.size, workers)
            Ts[st_pending[ok]] = 2 * n
            st_pending = st_pending[~ok]
        if pending.size == 0 and st_pending.size == 0:
            break
    return DiagonalTimes(T, spin, Ts, disagree, ties)


def diagonal_T(spec, graph, v, seed, replica=0, n_cap=None, dynamics=Dynamics()):
    """``(T, spin)`` for one replica; ``(None, None)`` when unresolved."""
    d = diagonal_times(spec, graph, v, seed, 1, n_cap, dynamics, first_replica=replica)
    if d.T[0] < 0:
        return None, None
    return int(d.T[0]), spec.spins.values[d.spin[0]]


def space_time_T(spec, graph, v, seed, replica=0, n_cap=None, dynamics=Dynamics(order="digits")):
    """``T*`` for one replica, or None when unresolved."""
    d = diagonal_times(spec, graph, v, seed, 1, n_cap, dynamics, spacetime=True, first_replica=replica)
    return None if d.T_star[0] < 0 else int(d.T_star[0])
