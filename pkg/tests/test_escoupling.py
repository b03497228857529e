from fractions import Fraction

import numpy as np
import pytest
from scipy.stats import chi2_contingency, chisquare

from cftplab.escoupling import (ColorSources, DuplicateLabelError, edge_factor_psi, es_color, es_color_batch)
from cftplab.experiments import colour_sources
from cftplab.lattice import Mode, Window, build_grid, clusters, edge_window, line_graph
from cftplab.oracle import enumerate_gibbs, enumerate_potts, exact_tv
from cftplab.specification import RandomCluster

BOX = build_grid(2, (4, 4))
LG = line_graph(BOX)
CENTRE = [5, 6, 9, 10]


def window(mode=Mode.PLUS):
    return edge_window(LG, CENTRE, mode)


def random_sources(rng, q=3):
    return ColorSources(rng.permutation(BOX.n_sites) / BOX.n_sites + 0.01, rng.integers(1, q + 1, BOX.n_sites))


@pytest.mark.parametrize("variant", ["argmin-z", "lexicographic"])
@pytest.mark.parametrize("mode", [Mode.PLUS, Mode.MINUS])
def test_constant_on_clusters(variant, mode):
    rng = np.random.default_rng(0)
    w = window(mode)
    for _ in range(50):
        omega = rng.integers(0, 2, LG.n_sites)
        col = es_color(omega, w, random_sources(rng), variant)
        lab = clusters(omega, w, mode == Mode.PLUS).label
        for c in set(lab[lab >= 0].tolist()):
            assert len(set(col[lab == c].tolist())) == 1
        assert np.all(col[lab < 0] == 0)


def test_ghost_cluster_takes_boundary_colour():
    w = window(Mode.PLUS)
    omega = np.zeros(LG.n_sites, dtype=int)
    col = es_color(omega, w, random_sources(np.random.default_rng(1)), boundary_color=2)
    lab = clusters(omega, w, True).label
    assert np.all(col[lab == BOX.n_sites] == 2)
    assert np.any(lab == BOX.n_sites)


def test_locality():
    rng = np.random.default_rng(2)
    w = window(Mode.MINUS)
    for _ in range(50):
        omega = rng.integers(0, 2, LG.n_sites)
        src = random_sources(rng)
        lab = clusters(omega, w, False).label
        col = es_color(omega, w, src)
        target = int(rng.choice(np.flatnonzero(lab >= 0)))
        other = (lab != lab[target])
        z, sigma = src.z.copy(), src.sigma.copy()
        sigma[other] = rng.integers(1, 4, int(other.sum()))
        z[other] = rng.permutation(int(other.sum())) / 100 + 2
        col2 = es_color(omega, w, ColorSources(z, sigma))
        assert np.array_equal(col[lab == lab[target]], col2[lab == lab[target]])


def test_translation_equivariance():
    rng = np.random.default_rng(3)
    box = build_grid(2, (6, 6))
    lg = line_graph(box)
    verts = np.array([14, 15, 20, 21])
    shift = (1, 1)
    moved = box.translate_many(verts, shift)
    for variant in ("argmin-z", "lexicographic"):
        for _ in range(30):
            w, wt = edge_window(lg, verts), edge_window(lg, moved)
            omega = np.zeros(lg.n_sites, dtype=int)
            omega[w.interior] = rng.integers(0, 2, len(w))
            omega_t = np.zeros(lg.n_sites, dtype=int)
            omega_t[lg.translate_many(w.interior, shift)] = omega[w.interior]
            z = rng.permutation(box.n_sites).astype(float)
            sigma = rng.integers(1, 4, box.n_sites)
            src = np.arange(box.n_sites)
            dst = box.translate_many(src, shift)
            ok = dst >= 0
            z_t, sigma_t = 1e9 + np.arange(box.n_sites), np.ones(box.n_sites, dtype=int)
            z_t[dst[ok]], sigma_t[dst[ok]] = z[src[ok]], sigma[src[ok]]
            a = es_color(omega, w, ColorSources(z, sigma), variant)
            b = es_color(omega_t, wt, ColorSources(z_t, sigma_t), variant)
            assert np.array_equal(a[verts], b[moved])


def test_duplicate_labels_rejected():
    w = window(Mode.MINUS)
    src = ColorSources(np.zeros(BOX.n_sites), np.ones(BOX.n_sites, dtype=int))
    with pytest.raises(DuplicateLabelError):
        es_color(np.zeros(LG.n_sites, dtype=int), w, src)
    with pytest.raises(ValueError):
        es_color(np.zeros(LG.n_sites, dtype=int), w, src, variant="nearest")


def test_batch_matches_single():
    rng = np.random.default_rng(4)
    for mode in (Mode.PLUS, Mode.MINUS):
        w = window(mode)
        states = rng.integers(0, 2, (200, len(w)))
        z, sigma = colour_sources(7, 200, BOX.n_sites, 3)
        for variant in ("argmin-z", "lexicographic"):
            verts, colors = es_color_batch(states, w, z, sigma, variant, boundary_color=1)
            for i in range(200):
                omega = np.zeros(LG.n_sites, dtype=int)
                omega[w.interior] = states[i]
                single = es_color(omega, w, ColorSources(z[i], sigma[i]), variant, boundary_color=1)
                assert np.array_equal(single[verts], colors[i])


def test_free_colouring_gives_free_potts():
    box = build_grid(2, (2, 2))
    lg = line_graph(box)
    w = Window(lg, np.arange(4), Mode.MINUS)
    rc = enumerate_gibbs(RandomCluster(Fraction(1, 2), 3), w)
    n = 60_000
    omega = rc.support[rc.sample(n, np.random.default_rng(5))]
    z, sigma = colour_sources(11, n, 4, 3)
    verts, colors = es_color_batch(omega, w, z, sigma)
    potts = enumerate_potts(box, verts, 3, Fraction(2))
    codes = (colors - 1) @ (3 ** np.arange(4))
    emp = dict(enumerate((np.bincount(codes, minlength=81) / n).tolist()))
    exact = dict(zip(((potts.support - 1) @ (3 ** np.arange(4))).tolist(), potts.probabilities()))
    assert exact_tv(emp, exact) < 0.02


def test_payload_examples():
    path = build_grid(1, (3,))
    y = np.arange(6).reshape(3, 2) * 10
    out = edge_factor_psi(path, y, z=np.array([0.1, 0.5, 0.9]))
    assert out.source.tolist() == [0, 1] and out.slot.tolist() == [1, 1]
    g = build_grid(2, (3, 3))
    y = np.arange(18).reshape(9, 2)
    d = edge_factor_psi(g, y, variant="direction")
    e = int(np.flatnonzero(np.all(g.edges() == sorted((4, g.translate(4, (0, 1)))), axis=1))[0])
    assert d.source[e] == 4 and d.slot[e] == 2 and d.values[e] == y[4, 1]


def test_payload_slots_injective():
    g = build_grid(2, (3, 3))
    rng = np.random.default_rng(6)
    y = rng.random((g.n_sites, g.max_degree))
    for _ in range(10_000):
        out = edge_factor_psi(g, y, z=rng.random(g.n_sites))
        pairs = set(zip(out.source.tolist(), out.slot.tolist()))
        assert len(pairs) == out.edges.shape[0]
        assert out.slot.min() >= 1 and out.slot.max() <= g.max_degree


def test_payload_marginals_are_single_slots():
    g = build_grid(2, (3, 3))
    rng = np.random.default_rng(7)
    vals = []
    for _ in range(4000):
        y = rng.integers(0, 4, (g.n_sites, g.max_degree))
        out = edge_factor_psi(g, y, z=rng.random(g.n_sites))
        vals.append(out.values[[0, 11]])
    vals = np.array(vals)
    # each payload is uniform on 0..3 and the payloads of two disjoint edges are independent
    table = np.zeros((4, 4))
    np.add.at(table, (vals[:, 0], vals[:, 1]), 1)
    assert chisquare(np.bincount(vals[:, 0], minlength=4)).pvalue > 1e-3
    assert chi2_contingency(table).pvalue > 1e-3
