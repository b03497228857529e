from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cftplab.cftp import central_site
from cftplab.lattice import Mode, Window, ball, build_grid, line_graph
from cftplab.specification import (FiniteAlphabet, Ising, LongRangeIsing, RandomCluster, SpinSpace,
                                   make_model)

HALF = Fraction(1, 2)


def lg_box(n=6):
    return line_graph(build_grid(2, (n, n)))


def test_rc_closed_probabilities():
    rc = RandomCluster(HALF, 2)
    assert rc.closed_if_connected == HALF
    assert rc.closed_if_separated == Fraction(2, 3)


def test_rc_alphabet_fixture():
    A = RandomCluster(HALF, 2).finite_alphabet(lg_box())
    assert A.values == (HALF, Fraction(2, 3), Fraction(1))
    assert A.weights == (HALF, Fraction(1, 6), Fraction(1, 3))
    assert A.exact


def test_ising_exact_alphabet():
    g = build_grid(2, (5, 5))
    A = Ising.exact(4).finite_alphabet(g)
    assert A.values == tuple(1 / (1 + Fraction(4) ** h) for h in (4, 2, 0, -2, -4)) + (Fraction(1),)
    assert sum(A.weights) == 1


def test_alphabet_lookup_and_quantize():
    A = FiniteAlphabet.from_values([HALF, Fraction(2, 3)])
    assert A.index_of(Fraction(2, 3)) == 1
    with pytest.raises(ValueError):
        A.index_of(Fraction(3, 4))
    assert A.quantize(0.2) == HALF
    assert A.quantize(0.5) == HALF
    assert A.quantize(0.6) == Fraction(2, 3)
    assert A.quantize(0.9) == 1


def test_float_alphabet_dedups_close_values():
    A = FiniteAlphabet.from_values([0.5, 0.5 + 1e-14, 0.75])
    assert len(A) == 3
    assert A.values[-1] == 1.0


def test_spin_space_validation():
    with pytest.raises(ValueError):
        SpinSpace((1,))
    with pytest.raises(ValueError):
        SpinSpace((1, -1))


@pytest.mark.parametrize("kwargs", [dict(p=1.5, q=2), dict(p=0.5, q=0.5)])
def test_rc_rejects_bad_parameters(kwargs):
    with pytest.raises(ValueError):
        RandomCluster(**kwargs)


def test_make_model():
    assert isinstance(make_model("rc", p=0.3, q=2), RandomCluster)
    assert isinstance(make_model("ising", beta=0.2), Ising)
    assert isinstance(make_model("lrising", beta=0.1, alpha=2, trunc=2), LongRangeIsing)
    with pytest.raises(ValueError):
        make_model("potts")


def test_q_one_is_independent():
    lg = lg_box(4)
    w = ball(lg, 10, 2, Mode.PLUS)
    rng = np.random.default_rng(0)
    rc = RandomCluster(0.3, 1)
    for _ in range(20):
        cfg = rng.integers(0, 2, lg.n_sites)
        assert rc.conditional_cdf(cfg, 10, w)[0] == pytest.approx(0.7)


def test_update_is_inverse_cdf():
    g = build_grid(2, (3, 3))
    w = Window(g, np.arange(9), Mode.PLUS)
    ising = Ising(0.4)
    cfg = np.ones(9, dtype=int)
    c = ising.conditional_cdf(cfg, 4, w)[0]
    assert ising.update(cfg, 4, c * 0.999, w) == -1
    assert ising.update(cfg, 4, min(1.0, c * 1.001), w) == 1
    with pytest.raises(ValueError):
        ising.update(cfg, 4, 1.5, w)
    with pytest.raises(ValueError):
        ising.update(cfg, 4, 0.5, ball(g, 0, 0))


def test_finite_update_rejects_outside_alphabet():
    lg = lg_box(3)
    rc = RandomCluster(HALF, 2)
    w = Window(lg, np.arange(lg.n_sites), Mode.MINUS)
    with pytest.raises(ValueError):
        rc.finite_update(rc.finite_alphabet(lg), np.zeros(lg.n_sites, dtype=int), 0, Fraction(3, 5), w)


MODELS = [
    ("rc", lambda: RandomCluster(0.4, 2.5), lambda: lg_box(5)),
    ("ising", lambda: Ising(0.3), lambda: build_grid(2, (5, 5))),
    ("lrising", lambda: LongRangeIsing(0.15, 2.0, 2), lambda: build_grid(2, (6, 6))),
]


@pytest.mark.parametrize("name,make_spec,make_graph", MODELS)
@given(data=st.data())
@settings(max_examples=40, deadline=None)
def test_monotone_in_the_configuration(name, make_spec, make_graph, data):
    spec, g = make_spec(), make_graph()
    seed = data.draw(st.integers(0, 2 ** 32 - 1))
    rng = np.random.default_rng(seed)
    mode = data.draw(st.sampled_from([Mode.PLUS, Mode.MINUS]))
    w = ball(g, g.n_sites // 2, 2, mode)
    vals = np.asarray(spec.spins.values)
    lo = spec.extreme_config(g, mode)
    lo[w.interior] = vals[rng.integers(0, 2, len(w))]
    hi = lo.copy()
    hi[w.interior] = np.maximum(lo[w.interior], vals[rng.integers(0, 2, len(w))])
    v = int(rng.choice(w.interior))
    # a larger configuration gives a stochastically larger spin, i.e. a smaller cdf
    assert spec.conditional_cdf(hi, v, w)[0] <= spec.conditional_cdf(lo, v, w)[0] + 1e-15


@pytest.mark.parametrize("name,make_spec,make_graph", MODELS)
def test_plus_boundary_dominates_minus(name, make_spec, make_graph):
    spec, g = make_spec(), make_graph()
    rng = np.random.default_rng(5)
    vals = np.asarray(spec.spins.values)
    for _ in range(30):
        r = int(rng.integers(0, 3))
        wp, wm = ball(g, g.n_sites // 2, r, Mode.PLUS), ball(g, g.n_sites // 2, r, Mode.MINUS)
        inner = vals[rng.integers(0, 2, len(wp))]
        cp, cm = spec.extreme_config(g, Mode.PLUS), spec.extreme_config(g, Mode.MINUS)
        cp[wp.interior] = inner
        cm[wm.interior] = inner
        v = int(rng.choice(wp.interior))
        assert spec.conditional_cdf(cp, v, wp)[0] <= spec.conditional_cdf(cm, v, wm)[0] + 1e-15


@pytest.mark.parametrize("name,make_spec,make_graph", MODELS)
def test_translation_invariance(name, make_spec, make_graph):
    spec, g = make_spec(), make_graph()
    rng = np.random.default_rng(6)
    v = central_site(g)
    shift = (1, 0)
    u = g.translate(v, shift)
    assert u >= 0
    w, wt = ball(g, v, 1), ball(g, u, 1)
    vals = np.asarray(spec.spins.values)
    for _ in range(20):
        cfg = spec.extreme_config(g, Mode.PLUS)
        cfg[w.interior] = vals[rng.integers(0, 2, len(w))]
        moved = spec.extreme_config(g, Mode.PLUS)
        moved[g.translate_many(w.interior, shift)] = cfg[w.interior]
        assert spec.conditional_cdf(cfg, v, w) == pytest.approx(spec.conditional_cdf(moved, u, wt))


def test_cdf_values_lie_in_alphabet():
    rng = np.random.default_rng(7)
    for spec, g in [(RandomCluster(HALF, 2), lg_box(4)), (Ising.exact(4), build_grid(2, (4, 4)))]:
        A = spec.finite_alphabet(g)
        vals = np.asarray(spec.spins.values, dtype=object)
        for _ in range(100):
            mode = Mode.PLUS if rng.random() < 0.5 else Mode.MINUS
            w = ball(g, int(rng.integers(g.n_sites)), int(rng.integers(0, 3)), mode)
            cfg = spec.extreme_config(g, mode).astype(object)
            cfg[w.interior] = vals[rng.integers(0, 2, len(w))]
            v = int(rng.choice(w.interior))
            assert spec.conditional_cdf(cfg, v, w)[0] in A.values


def test_long_range_couplings_decay():
    lr = LongRangeIsing(0.5, 2.0, 3)
    g = build_grid(2, (9, 9))
    sites, J, phantom = lr.couplings(g, 40)
    assert len(sites) == 4 + 8 + 12
    assert set(np.round(J, 12)) == {0.5, 0.125, round(0.5 / 9, 12)}
    assert phantom == 0
    _, _, phantom_corner = lr.couplings(g, 0)
    assert phantom_corner > 0
