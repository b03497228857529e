"""Stateless counter-based randomness.

Every random quantity used by the dynamics is a pure function of
``(key, site, time, stream)``.  The same draw comes back no matter which
chain, window or horizon asks for it, which is what lets coupling from the
past reuse the past and lets the plus and minus chains share their updates.

The mixing function is the SplitMix64 finalizer applied in a short cascade.
"""
from __future__ import annotations

import numpy as np
from numba import njit

STREAM_A = 0  # single-site update values
STREAM_B = 1  # order labels
STREAM_Z = 2  # Edwards-Sokal representative labels
STREAM_SIGMA = 3  # Edwards-Sokal colours
STREAM_PAYLOAD = 4  # vertex payloads for the edge factor

_G1 = np.uint64(0x9E3779B97F4A7C15)
_G2 = np.uint64(0xD1B54A32D192ED03)
_G3 = np.uint64(0xABC98388FB8FAC03)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_TO_UNIT = 1.0 / 9007199254740992.0  # 2**-53


@njit(cache=True, nogil=True)
def mix64(z):
    z = np.uint64(z)
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True, nogil=True)
def replica_key(seed, replica):
    """Key for one replica: distinct replicas get unrelated streams."""
    k = mix64(np.uint64(seed) * _G1 + _G3)
    return mix64(k ^ ((np.uint64(replica) + _ONE) * _G2))


@njit(cache=True, nogil=True)
def draw_bits(key, site, time, stream):
    h = mix64(np.uint64(key) + (np.uint64(stream) + _ONE) * _G1)
    h = mix64(h ^ ((np.uint64(site) + _ONE) * _G2))
    return mix64(h ^ ((np.uint64(time) + _ONE) * _G3))


@njit(cache=True, nogil=True)
def uniform(key, site, time, stream):
    """A float in [0, 1) with 53 random bits."""
    return float(draw_bits(key, site, time, stream) >> _S11) * _TO_UNIT


@njit(cache=True, nogil=True)
def digit(key, site, time, D):
    """A label uniform on {1, ..., D}, drawn from the order stream."""
    return 1 + int(uniform(key, site, time, STREAM_B) * D)


@njit(cache=True, nogil=True)
def _uniform_many(key, sites, time, stream, out):
    for i in range(sites.shape[0]):
        out[i] = uniform(key, sites[i], time, stream)


@njit(cache=True, nogil=True)
def _digit_many(key, sites, time, D, out):
    for i in range(sites.shape[0]):
        out[i] = digit(key, sites[i], time, D)


class SweepRandomness:
    """The i.i.d. input of the dynamics for one replica.

    ``a(sites, n)`` gives the update draws and ``b(sites, n)`` the real order
    labels at time ``n``; ``digits(sites, n, D)`` gives finite order labels.
    Draws depend on ``(seed, replica, site, n)`` only.
    """

    def __init__(self, seed: int, replica: int = 0):
        if seed < 0 or replica < 0:
            raise ValueError("seed and replica must be nonnegative")
        self.seed = int(seed)
        self.replica = int(replica)
        self.key = int(replica_key(self.seed, self.replica))

    def _draw(self, sites, time, stream):
        sites = np.ascontiguousarray(np.atleast_1d(sites), dtype=np.int64)
        out = np.empty(sites.shape[0])
        _uniform_many(np.uint64(self.key), sites, int(time), int(stream), out)
        return out

    def a(self, sites, time):
        return self._draw(sites, time, STREAM_A)

    def b(self, sites, time):
        return self._draw(sites, time, STREAM_B)

    def stream(self, sites, time, stream):
        return self._draw(sites, time, stream)

    def digits(self, sites, time, D):
        if D < 2:
            raise ValueError("D must be at least 2")
        sites = np.ascontiguousarray(np.atleast_1d(sites), dtype=np.int64)
        out = np.empty(sites.shape[0], dtype=np.int64)
        _digit_many(np.uint64(self.key), sites, int(time), int(D), out)
        return out


@njit(cache=True, nogil=True)
def _replica_keys(seed, idx, out):
    for i in range(idx.shape[0]):
        out[i] = replica_key(seed, idx[i])


def replica_keys(seed: int, replicas) -> np.ndarray:
    """Keys for ``range(replicas)`` or for an explicit array of replica indices."""
    if np.isscalar(replicas):
        idx = np.arange(int(replicas), dtype=np.int64)
    else:
        idx = np.ascontiguousarray(replicas, dtype=np.int64)
    out = np.empty(idx.shape[0], dtype=np.uint64)
    _replica_keys(int(seed), idx, out)
    return out
