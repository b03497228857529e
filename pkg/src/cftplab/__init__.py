"""Exact sampling of monotone spin systems by coupling from the past."""

__version__ = "0.1.0"

from .lattice import Mode, SiteGraph, Window, ball, build_grid, clusters, edge_window, line_graph
from .specification import FiniteAlphabet, Ising, LongRangeIsing, RandomCluster, make_model
from .order import OrderLabels, order_radius_samples, sort_window
from .cftp import (Dynamics, NonCoalescenceError, cftp_samples, cftp_window_sample, coding_radii,
                   coding_radius, diagonal_T, diagonal_times, estimate_phi, space_time_T)
from .oracle import enumerate_gibbs, enumerate_potts, exact_tv
from .escoupling import ColorSources, edge_factor_psi, es_color
from .experiments import RunConfig, SurvivalCurve, emit_results, fit_tail, read_results, run_experiment
