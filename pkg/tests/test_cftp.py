from fractions import Fraction

import numpy as np
import pytest

from cftplab.cftp import (Dynamics, NonCoalescenceError, cftp_samples, cftp_window_sample, center_pairs,
                          central_site, chain_pair, coding_radii, coding_radius, compile_window, compose,
                          diagonal_T, diagonal_times, estimate_phi, space_time_T, trajectories)
from cftplab.lattice import Mode, Window, ball, build_grid, line_graph
from cftplab.oracle import empirical, encode, enumerate_gibbs, exact_tv
from cftplab.rng import SweepRandomness
from cftplab.specification import Ising, LongRangeIsing, RandomCluster

BOX = build_grid(2, (7, 7))
LG = line_graph(BOX)

CASES = [
    (RandomCluster(0.35, 2), LG),
    (RandomCluster(0.6, 4.0), LG),
    (Ising(0.4), BOX),
    (LongRangeIsing(0.2, 2.0, 2), BOX),
]
DYNAMICS = [Dynamics(), Dynamics(order="digits"), Dynamics(order="digits", D=3), Dynamics(finite=True)]


@pytest.mark.parametrize("dyn", DYNAMICS, ids=["real", "digits", "digits-D3", "finite"])
@pytest.mark.parametrize("case", range(len(CASES)))
def test_compiled_sweeps_match_reference(case, dyn):
    spec, g = CASES[case]
    v = central_site(g)
    for mode in (Mode.PLUS, Mode.MINUS):
        w = ball(g, v, 2, mode)
        cw = compile_window(spec, w, dyn)
        for replica in range(6):
            n = 1 + replica % 3
            out = trajectories(cw, 17, n, replica)
            for row, start in ((0, Mode.PLUS), (1, Mode.MINUS)):
                cfg = spec.extreme_config(g, mode)
                cfg[w.interior] = spec.spins.extreme(start)
                ref = compose(cfg, w, SweepRandomness(17, replica), spec, n, dyn)
                assert np.array_equal(cw.to_config(out[-1, row]), ref)


def test_random_starts_stay_sandwiched():
    rng = np.random.default_rng(0)
    for spec, g in CASES:
        w = ball(g, central_site(g), 2, Mode.PLUS)
        cw = compile_window(spec, w)
        for replica in range(30):
            mid = rng.integers(0, 2, (3, len(w))).astype(np.uint8)
            starts = np.vstack([np.ones((1, len(w)), np.uint8), mid, np.zeros((1, len(w)), np.uint8)])
            out = trajectories(cw, 3, 5, replica, starts)
            assert np.all(out[:, 1:4] <= out[:, :1]) and np.all(out[:, 1:4] >= out[:, 4:])


def test_top_output_decreases_as_the_past_extends():
    for spec, g in CASES:
        w = ball(g, central_site(g), 2, Mode.PLUS)
        cw = compile_window(spec, w)
        for replica in range(20):
            prev = None
            for n in (1, 2, 4, 8):
                top = trajectories(cw, 5, n, replica)[-1, 0]
                if prev is not None:
                    assert np.all(top <= prev)
                prev = top


def test_chain_pair_coalesces_eventually():
    spec = RandomCluster(0.3, 2)
    w = ball(LG, central_site(LG), 1, Mode.PLUS)
    cp = chain_pair(spec, w, 1, 32)
    assert cp.coalesced
    assert np.all(cp.bottom <= cp.top)


def test_window_sample_is_a_configuration():
    spec = Ising(0.3)
    w = ball(BOX, 24, 1, Mode.MINUS)
    cfg, horizon = cftp_window_sample(spec, w, 9)
    assert horizon >= 1 and (horizon & (horizon - 1)) == 0
    assert np.all(cfg[~w.mask] == -1)
    assert set(cfg[w.interior].tolist()) <= {-1, 1}


def test_horizon_cap_raises():
    spec = Ising(3.0)
    w = Window(BOX, np.arange(BOX.n_sites), Mode.PLUS)
    batch = cftp_samples(spec, w, 1, 5, horizon_cap=1)
    assert batch.unresolved == 5
    with pytest.raises(NonCoalescenceError):
        cftp_window_sample(spec, w, 1, horizon_cap=1)


@pytest.mark.parametrize("spec,g,sites", [
    (RandomCluster(0.3, 2), line_graph(build_grid(2, (3, 2))), None),
    (Ising(0.5), build_grid(2, (3, 3)), None),
    (LongRangeIsing(0.2, 2.0, 2), build_grid(2, (3, 3)), None),
])
def test_cftp_matches_enumeration(spec, g, sites):
    for mode in (Mode.PLUS, Mode.MINUS):
        w = Window(g, np.arange(g.n_sites), mode)
        batch = cftp_samples(spec, w, 4, 40_000)
        exact = enumerate_gibbs(spec, w)
        codes = encode(spec.from_index(batch.states), exact.spins)
        emp = empirical(codes, len(exact.spins) ** len(w))
        tv = exact_tv(emp, dict(zip(exact.codes().tolist(), exact.probabilities())))
        assert tv < 0.03


def test_workers_do_not_change_results():
    spec = RandomCluster(0.3, 2)
    w = ball(LG, central_site(LG), 2, Mode.PLUS)
    a = cftp_samples(spec, w, 8, 500, workers=1)
    b = cftp_samples(spec, w, 8, 500, workers=4)
    assert np.array_equal(a.states, b.states) and np.array_equal(a.horizons, b.horizons)
    r1 = coding_radii(spec, LG, central_site(LG), 8, 400, 3, workers=1)[0]
    r8 = coding_radii(spec, LG, central_site(LG), 8, 400, 3, workers=8)[0]
    assert np.array_equal(r1, r8)


def test_replica_ranges_compose():
    spec = Ising(0.3)
    w = ball(BOX, 24, 2)
    full = cftp_samples(spec, w, 2, 100)
    tail = cftp_samples(spec, w, 2, 40, first_replica=60)
    assert np.array_equal(full.states[60:], tail.states)


def test_coding_radius_transcript():
    spec = RandomCluster(0.3, 2)
    v = central_site(LG)
    radii = coding_radii(spec, LG, v, 3, 50, 2)[0]
    for i in range(50):
        rep = coding_radius(spec, LG, v, 3, i, 2)
        assert rep.R_tilde == (None if radii[i] < 0 else radii[i])
        last = rep.transcript[-1]
        assert (last[1] == last[2]) == (rep.R_tilde is not None)
        assert all(a != b for _, a, b in rep.transcript[:-1])


def test_phi_trivial_cases():
    g = LG
    assert estimate_phi(RandomCluster(0.3, 2), g, 0, 2, 100, 1).phi_hat == 1.0
    assert estimate_phi(RandomCluster(0.3, 1), g, 3, 2, 500, 1).phi_hat == 0.0
    with pytest.raises(ValueError):
        estimate_phi(RandomCluster(0.3, 2), g, 1, 1, 0, 1)


def test_fused_pair_matches_separate_trajectories():
    for spec, g in CASES:
        v = central_site(g)
        top, bot, _ = center_pairs(spec, g, v, 6, 40, 3, 2)
        cp = compile_window(spec, ball(g, v, 2, Mode.PLUS))
        cm = compile_window(spec, ball(g, v, 2, Mode.MINUS))
        for i in range(40):
            assert top[i] == trajectories(cp, 6, 3, i)[-1, 0, cp.center_local]
            assert bot[i] == trajectories(cm, 6, 3, i)[-1, 1, cm.center_local]


def test_diagonal_times_consistent():
    spec = RandomCluster(0.3, 2)
    v = central_site(LG)
    d = diagonal_times(spec, LG, v, 2, 300, 2, Dynamics(order="digits"), spacetime=True)
    resolved = d.T > 0
    assert np.all(d.disagree[:, 0] == 1)
    # the disagreement indicator is nonincreasing in n and T is its first zero
    assert np.all(np.diff(d.disagree.astype(int), axis=1) <= 0)
    assert np.all(d.disagree[resolved, d.T[resolved] - 1] == 1)
    assert np.all((d.T_star < 0) | (d.T_star >= 2 * d.T))
    for i in range(20):
        T, spin = diagonal_T(spec, LG, v, 2, i, 2, Dynamics(order="digits"))
        assert (T if T is not None else -1) == d.T[i]
        assert (spin is None) == (T is None)
        Ts = space_time_T(spec, LG, v, 2, i, 2)
        assert (Ts if Ts is not None else -1) == d.T_star[i]


def test_spacetime_needs_digits():
    with pytest.raises(ValueError):
        diagonal_times(RandomCluster(0.3, 2), LG, 10, 1, 5, 2, Dynamics(), spacetime=True)


def test_rational_model_runs_compiled():
    spec = RandomCluster(Fraction(1, 2), 2)
    w = Window(line_graph(build_grid(2, (2, 2))), np.arange(4), Mode.MINUS)
    batch = cftp_samples(spec, w, 1, 100, Dynamics(finite=True))
    assert batch.unresolved == 0
