from fractions import Fraction

import numpy as np
import pytest

from cftplab.lattice import Mode, Window, ball, build_grid, line_graph
from cftplab.oracle import (check_conditional, coded, domination_violation, empirical, encode, enumerate_gibbs,
                            enumerate_potts, exact_tv, monotone_coupling_disagreement)
from cftplab.specification import Ising, LongRangeIsing, RandomCluster

SQUARE = line_graph(build_grid(2, (2, 2)))


def test_wired_square_is_product_measure():
    # every vertex of the 2x2 box meets the exterior, so all four are wired together
    d = enumerate_gibbs(RandomCluster(Fraction(1, 2), 2), Window(SQUARE, np.arange(4), Mode.PLUS))
    assert d.exact
    assert all(m == Fraction(1, 16) for m in d.mass)


def test_free_square_by_hand():
    # weight p^o (1-p)^c q^k with p = 1/2: only q^k matters; k = 4 - o except the full cycle (k = 1)
    d = enumerate_gibbs(RandomCluster(Fraction(1, 2), 2), Window(SQUARE, np.arange(4), Mode.MINUS))
    w = {tuple(row): m for row, m in zip(d.support.tolist(), d.mass)}
    raw = {row: Fraction(2) ** (4 - sum(row) if sum(row) < 4 else 1) for row in w}
    Z = sum(raw.values())
    assert all(w[row] == raw[row] / Z for row in w)


def test_potts_two_sites():
    g = build_grid(1, (2,))
    d = enumerate_potts(g, [0, 1], 2, Fraction(3))
    assert d.as_dict()[(1, 1)] == Fraction(3, 8)
    assert d.as_dict()[(1, 2)] == Fraction(1, 8)


def test_potts_boundary_colour_counts_outside_neighbours():
    g = build_grid(1, (1,))
    d = enumerate_potts(g, [0], 2, Fraction(2), boundary_color=1)
    # two missing lattice neighbours both carry colour 1
    assert d.marginal(0) == {1: Fraction(4, 5), 2: Fraction(1, 5)}


def test_ising_single_site_field():
    g = build_grid(2, (3, 3))
    d = enumerate_gibbs(Ising.exact(4), ball(g, 4, 0, Mode.PLUS))
    assert d.marginal(4) == {-1: Fraction(1, 257), 1: Fraction(256, 257)}


@pytest.mark.parametrize("spec,g", [
    (RandomCluster(Fraction(1, 2), 2), SQUARE),
    (RandomCluster(Fraction(3, 10), 2), line_graph(build_grid(2, (3, 3)))),
    (Ising.exact(Fraction(3, 2)), build_grid(2, (3, 3))),
    (LongRangeIsing(0.3, 2.0, 2), build_grid(2, (4, 4))),
])
def test_conditionals_and_stationarity(spec, g):
    v = g.n_sites // 2
    for mode in (Mode.PLUS, Mode.MINUS):
        w = ball(g, v, 1, mode)
        rep = check_conditional(spec, w)
        assert rep.max_discrepancy <= 1e-12
        assert rep.stationarity_error <= 1e-12
        if not isinstance(spec, LongRangeIsing):
            assert rep.max_discrepancy == 0


def test_tv_and_empirical():
    a = {0: 0.5, 1: 0.5}
    b = {0: 0.25, 1: 0.75}
    assert exact_tv(a, b) == 0.25
    with pytest.raises(ValueError):
        exact_tv(a, {0: 1.0})
    emp = empirical([0, 0, 1, 3], 4)
    assert emp == {0: 0.5, 1: 0.25, 2: 0.0, 3: 0.25}
    assert encode(np.array([[0, 1], [1, 1]]), (0, 1)).tolist() == [2, 3]


def test_coded_matches_support():
    d = enumerate_gibbs(RandomCluster(0.4, 2), Window(SQUARE, np.arange(4), Mode.MINUS))
    c = coded(d)
    assert sorted(c) == list(range(16))
    assert sum(c.values()) == pytest.approx(1.0)


def test_monotone_coupling_is_tight_for_two_spins():
    d, bound = monotone_coupling_disagreement({0: 0.3, 1: 0.7}, {0: 0.6, 1: 0.4}, (0, 1))
    assert d == pytest.approx(0.3) and bound == pytest.approx(0.3)


def test_free_is_dominated_by_wired():
    g = line_graph(build_grid(2, (3, 3)))
    w = ball(g, 6, 1)
    spec = RandomCluster(0.4, 2)
    lo = enumerate_gibbs(spec, w.with_mode(Mode.MINUS))
    hi = enumerate_gibbs(spec, w.with_mode(Mode.PLUS))
    assert domination_violation(lo, hi, 200, np.random.default_rng(0)) <= 1e-12
    assert domination_violation(hi, lo, 200, np.random.default_rng(0)) > 0


def test_sample_frequencies():
    d = enumerate_gibbs(Ising(0.3), Window(build_grid(2, (2, 2)), np.arange(4), Mode.MINUS))
    idx = d.sample(50_000, np.random.default_rng(1))
    freq = np.bincount(idx, minlength=16) / idx.size
    assert np.abs(freq - d.probabilities()).max() < 0.01
