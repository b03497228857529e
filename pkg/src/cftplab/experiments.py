"""Experiment runner: configs, survival curves, tail fits and result files.

A run is fully described by a :class:`RunConfig`; with the same config the
CSV body comes out byte-identical whatever the number of workers, because
every replica draws from its own stateless stream and results are stored
by replica index.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import itertools
import json
import math
import os
import subprocess
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy import stats

from . import __version__
from .cftp import (Dynamics, NonCoalescenceError, cftp_samples, central_site, coding_radii,
                   default_radius_cap, diagonal_times, estimate_phi)
from .escoupling import es_color_batch
from .lattice import Mode, Window, ball, build_grid, edge_window, line_graph
from .oracle import (check_conditional, domination_violation, enumerate_gibbs, enumerate_potts,
                     exact_tv, monotone_coupling_disagreement)
from .rng import STREAM_SIGMA, STREAM_Z, SweepRandomness
from .specification import FiniteAlphabet, RandomCluster, make_model

EXPERIMENTS = ("sample", "radius", "diagonal", "spacetime", "mixing", "potts", "validate")
SEED_ENV = "CFTP_LAB_SEED"

EXIT_OK, EXIT_UNRESOLVED, EXIT_CONFIG = 0, 1, 2

RADIUS_SCHEMA = ("r", "trials", "exceedances", "survival", "stderr", "oracle_tv_bound")
MIXING_SCHEMA = ("n", "r", "trials", "disagreements", "phi_hat", "stderr")
DIAGONAL_SCHEMA = ("n", "trials", "exceedances", "survival", "stderr")
SPACETIME_SCHEMA = ("t_star", "trials", "exceedances", "survival", "stderr", "bound")
SAMPLE_SCHEMA = ("replica", "horizon", "ties", "state")
POTTS_SCHEMA = ("vertex", "color", "count", "frequency", "exact")
VALIDATE_SCHEMA = ("check", "mode", "value", "tolerance", "passed")


class ConfigError(ValueError):
    """Invalid run configuration."""


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw.strip() == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def parse_number(text):
    """``"1/2"`` to a Fraction, integers to int, anything else to float."""
    if isinstance(text, (int, float, Fraction)):
        return text
    s = str(text).strip()
    try:
        if "/" in s:
            return Fraction(s)
        if s.lstrip("+-").isdigit():
            return int(s)
        return float(s)
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"not a number: {text!r}") from None


@dataclass
class RunConfig:
    """Everything a run depends on.  ``None`` means "use the default"."""

    experiment: str = "radius"
    model: str = "rc"
    p: object = 0.3
    q: object = 2
    beta: object = 0.3
    alpha: object = 2.0
    trunc: int = 2
    dim: int = 2
    extent: tuple = (16, 16)
    order: str = "real"
    D: int | None = None
    finite: bool = False
    seed: int | None = None
    replicas: int = 1000
    horizon_cap: int = 2 ** 20
    radius_cap: int | None = None
    n_max: int = 8
    r: int | None = None
    radius: int = 1
    mode: str = "plus"
    boundary_color: int = 1
    variant: str = "argmin-z"
    workers: int = 1
    block: int = 1_000_000
    out: str | None = None
    meta: str | None = None

    def __post_init__(self):
        if self.seed is None:
            self.seed = default_seed()
        if isinstance(self.extent, (int, np.integer)):
            self.extent = (int(self.extent),) * self.dim
        self.extent = tuple(int(e) for e in self.extent)

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}")
        if self.model not in ("rc", "ising", "lrising"):
            raise ConfigError("model must be rc, ising or lrising")
        if self.order not in ("real", "digits"):
            raise ConfigError("order must be real or digits")
        if self.mode not in ("plus", "minus"):
            raise ConfigError("mode must be plus or minus")
        if len(self.extent) != self.dim or any(e < 1 for e in self.extent):
            raise ConfigError("extent needs one positive side length per dimension")
        if self.replicas < 1 or self.workers < 1 or self.block < 1:
            raise ConfigError("replicas, workers and block must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")
        if self.D is not None and self.D < 2:
            raise ConfigError("D must be at least 2")
        if self.experiment == "spacetime" and self.order != "digits":
            raise ConfigError("spacetime needs order=digits")
        if self.experiment == "potts" and (self.model != "rc" or int(self.q) != self.q or self.q < 2):
            raise ConfigError("potts needs model=rc with integer q >= 2")
        try:
            self.build_model()
        except (ValueError, KeyError) as exc:
            raise ConfigError(str(exc)) from None
        return self

    def build_model(self):
        return make_model(self.model, p=self.p, q=self.q, beta=self.beta, alpha=self.alpha, trunc=self.trunc)

    def dynamics(self) -> Dynamics:
        return Dynamics(order=self.order, D=self.D, finite=self.finite)

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, Fraction):
                v = str(v)
            elif isinstance(v, tuple):
                v = list(v)
            out[f.name] = v
        return out


_FIELD_TYPES = {f.name: f for f in dataclasses.fields(RunConfig)}


def coerce(name: str, value):
    """Convert a textual value to the type of config field ``name``."""
    if name not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key {name!r}")
    if value is None:
        return None
    if name in ("p", "q", "beta", "alpha"):
        return parse_number(value)
    if name == "extent":
        if isinstance(value, (list, tuple)):
            return tuple(int(v) for v in value)
        parts = [x for x in str(value).replace("x", ",").split(",") if x.strip()]
        try:
            return tuple(int(x) for x in parts)
        except ValueError:
            raise ConfigError(f"bad extent {value!r}") from None
    if name == "finite":
        if isinstance(value, bool):
            return value
        s = str(value).strip().lower()
        if s in ("1", "true", "yes", "on"):
            return True
        if s in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"bad boolean {value!r}")
    if name in ("trunc", "dim", "D", "seed", "replicas", "horizon_cap", "radius_cap", "n_max", "r",
                "radius", "boundary_color", "workers", "block"):
        try:
            return int(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{name} must be an integer, got {value!r}") from None
    return str(value)


def parse_config_text(text: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        k, v = (x.strip() for x in line.split("=", 1))
        out[k] = coerce(k, v)
    return out


def make_config(text: str = "", **overrides) -> RunConfig:
    values = parse_config_text(text)
    for k, v in overrides.items():
        if v is not None:
            values[k] = coerce(k, v)
    if "extent" in values and "dim" not in values:
        values["dim"] = len(values["extent"])
    return RunConfig(**values)


# ---------------------------------------------------------------- statistics

@dataclass
class SurvivalCurve:
    """Empirical ``Pr(X > x)`` at each abscissa ``x``."""

    abscissa: np.ndarray
    trials: int
    exceedances: np.ndarray
    oracle: np.ndarray | None = None

    @classmethod
    def from_values(cls, values, abscissa, oracle=None) -> "SurvivalCurve":
        """Survival of per-replica values; a negative value means "beyond every abscissa".

        An exceedance at ``x`` is also an exceedance at every smaller ``x``.
        """
        values = np.asarray(values)
        absc = np.asarray(abscissa)
        big = np.where(values < 0, np.iinfo(np.int64).max, values)
        exc = np.array([int(np.count_nonzero(big > x)) for x in absc], dtype=np.int64)
        return cls(absc, int(values.size), exc, oracle)

    @property
    def survival(self) -> np.ndarray:
        return self.exceedances / self.trials

    @property
    def stderr(self) -> np.ndarray:
        s = self.survival
        return np.sqrt(s * (1 - s) / self.trials)


@dataclass
class TailFit:
    """Least-squares fit of ``log survival = intercept + rate * x``."""

    ok: bool
    rate: float = math.nan
    intercept: float = math.nan
    r_squared: float = math.nan
    points: int = 0
    reason: str = ""

    def to_dict(self):
        return dataclasses.asdict(self)


def fit_tail(curve: SurvivalCurve, min_count: int = 10) -> TailFit:
    """Fit the exponential tail over the leading abscissae whose survival is
    at least ``min_count / trials``; needs three such points."""
    s = curve.survival
    keep = 0
    while keep < s.size and s[keep] > 0 and s[keep] >= min_count / curve.trials:
        keep += 1
    if keep < 3:
        return TailFit(False, points=keep, reason=f"only {keep} abscissae with survival >= {min_count}/trials")
    x = np.asarray(curve.abscissa[:keep], dtype=float)
    y = np.log(s[:keep])
    if np.ptp(y) == 0:
        return TailFit(True, 0.0, float(y[0]), 1.0, keep)
    res = stats.linregress(x, y)
    return TailFit(True, float(res.slope), float(res.intercept), float(res.rvalue ** 2), keep)


# ---------------------------------------------------------------- result files

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, Fraction):
        return repr(float(v))
    return str(v)


def format_csv(rows, schema) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(schema)
    for row in rows:
        if isinstance(row, dict):
            if set(row) != set(schema):
                raise ValueError(f"row keys {sorted(row)} do not match schema {list(schema)}")
            row = [row[k] for k in schema]
        elif len(row) != len(schema):
            raise ValueError("row length does not match schema")
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def emit_results(rows, schema, path) -> Path:
    """Write rows as UTF-8 CSV with a header line and ``\\n`` line endings."""
    path = Path(path)
    path.write_text(format_csv(rows, schema), encoding="utf-8", newline="")
    return path


def _parse_cell(s: str):
    if s == "":
        return None
    if s in ("true", "false"):
        return s == "true"
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def read_results(path) -> list:
    """Rows of a result CSV as dicts with ints, floats, booleans and None restored."""
    with open(path, encoding="utf-8", newline="") as fh:
        return [{k: _parse_cell(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def version_string() -> str:
    """Package version plus the git description of the checkout, when there is one."""
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty"], capture_output=True, text=True,
                             cwd=Path(__file__).resolve().parent, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


@dataclass
class RunResult:
    schema: tuple
    rows: list
    exit_code: int = EXIT_OK
    summary: dict = field(default_factory=dict)
    degeneracy: dict = field(default_factory=dict)

    def csv_text(self) -> str:
        return format_csv(self.rows, self.schema)


# ---------------------------------------------------------------- experiments

def _graph_for(cfg: RunConfig, spec):
    box = build_grid(cfg.dim, cfg.extent)
    return (line_graph(box) if isinstance(spec, RandomCluster) else box), box


def _blocks(total, size):
    for lo in range(0, total, size):
        yield lo, min(total, lo + size)


def _marginal_tv_bound(spec, graph, v, r):
    """``(|S| - 1) * TV`` of the plus and minus window marginals at ``v``, if enumerable."""
    w = ball(graph, v, r)
    if len(w) > 20:
        return None
    plus = enumerate_gibbs(spec, w.with_mode(Mode.PLUS)).marginal(v)
    minus = enumerate_gibbs(spec, w.with_mode(Mode.MINUS)).marginal(v)
    return (spec.spins.size - 1) * float(exact_tv(plus, minus))


def run_radius(cfg: RunConfig) -> RunResult:
    spec = cfg.build_model()
    g, _ = _graph_for(cfg, spec)
    v = central_site(g)
    cap = default_radius_cap(g, v) if cfg.radius_cap is None else cfg.radius_cap
    radii = np.empty(cfg.replicas, dtype=np.int64)
    ties = 0
    for lo, hi in _blocks(cfg.replicas, cfg.block):
        rr, _, _, tc = coding_radii(spec, g, v, cfg.seed, hi - lo, cap, cfg.dynamics(), cfg.horizon_cap,
                                    cfg.workers, first_replica=lo)
        radii[lo:hi] = rr
        ties += int(tc.sum())
    curve = SurvivalCurve.from_values(radii, np.arange(cap + 1))
    rows = []
    for r, e, s, se in zip(curve.abscissa, curve.exceedances, curve.survival, curve.stderr):
        rows.append((int(r), curve.trials, int(e), float(s), float(se), _marginal_tv_bound(spec, g, v, int(r))))
    unresolved = int(np.count_nonzero(radii < 0))
    fit = fit_tail(curve)
    return RunResult(RADIUS_SCHEMA, rows, EXIT_UNRESOLVED if unresolved else EXIT_OK,
                     {"site": v, "radius_cap": cap, "fit": fit.to_dict()},
                     {"order_ties": ties, "unresolved": unresolved})


def diagonal_counts(spec, g, v, cfg: RunConfig, spacetime=False):
    """Per-``n`` disagreement counts and per-replica ``T`` (and ``T*``), block by block."""
    cap = default_radius_cap(g, v) if cfg.radius_cap is None else cfg.radius_cap
    n_cap = min(cfg.n_max, cap) if not spacetime else cap
    counts = np.zeros(n_cap + 1, dtype=np.int64)
    T = np.empty(cfg.replicas, dtype=np.int64)
    Ts = np.empty(cfg.replicas, dtype=np.int64) if spacetime else None
    ties = 0
    for lo, hi in _blocks(cfg.replicas, cfg.block):
        d = diagonal_times(spec, g, v, cfg.seed, hi - lo, n_cap, cfg.dynamics(), spacetime, cfg.workers,
                           first_replica=lo)
        counts += d.disagree.sum(axis=0, dtype=np.int64)
        T[lo:hi] = d.T
        if spacetime:
            Ts[lo:hi] = d.T_star
        ties += int(d.ties.sum())
    return counts, T, Ts, n_cap, ties


def run_diagonal(cfg: RunConfig) -> RunResult:
    spec = cfg.build_model()
    g, _ = _graph_for(cfg, spec)
    v = central_site(g)
    counts, T, _, n_cap, ties = diagonal_counts(spec, g, v, cfg)
    curve = SurvivalCurve(np.arange(n_cap + 1), cfg.replicas, counts)
    rows = [(int(n), curve.trials, int(e), float(s), float(se))
            for n, e, s, se in zip(curve.abscissa, curve.exceedances, curve.survival, curve.stderr)]
    unresolved = int(np.count_nonzero(T < 0))
    fit = fit_tail(curve)
    return RunResult(DIAGONAL_SCHEMA, rows, EXIT_UNRESOLVED if unresolved else EXIT_OK,
                     {"site": v, "n_cap": n_cap, "fit": fit.to_dict()},
                     {"order_ties": ties, "unresolved": unresolved})


def run_spacetime(cfg: RunConfig) -> RunResult:
    spec = cfg.build_model()
    g, _ = _graph_for(cfg, spec)
    v = central_site(g)
    counts, T, Ts, n_cap, ties = diagonal_counts(spec, g, v, cfg, spacetime=True)
    D = cfg.dynamics().digits_for(g)
    rows = []
    for n in range(n_cap + 1):
        exc = int(np.count_nonzero((Ts < 0) | (Ts > 2 * n)))
        s = exc / cfg.replicas
        B = len(ball(g, v, n))
        bound = counts[n] / cfg.replicas + (n + 1) * B ** 2 * float(D) ** (-n)
        rows.append((2 * n, cfg.replicas, exc, s, math.sqrt(s * (1 - s) / cfg.replicas), bound))
    unresolved = int(np.count_nonzero(Ts < 0))
    return RunResult(SPACETIME_SCHEMA, rows, EXIT_UNRESOLVED if unresolved else EXIT_OK,
                     {"site": v, "n_cap": n_cap, "D": D},
                     {"order_ties": ties, "unresolved": unresolved})


def run_mixing(cfg: RunConfig) -> RunResult:
    spec = cfg.build_model()
    g, _ = _graph_for(cfg, spec)
    v = central_site(g)
    rows = []
    if cfg.r is None:
        counts, _, _, n_cap, ties = diagonal_counts(spec, g, v, cfg)
        for n in range(n_cap + 1):
            s = counts[n] / cfg.replicas
            rows.append((n, n, cfg.replicas, int(counts[n]), float(s), math.sqrt(s * (1 - s) / cfg.replicas)))
        curve = SurvivalCurve(np.arange(n_cap + 1), cfg.replicas, counts)
        summary = {"site": v, "diagonal": True, "fit": fit_tail(curve).to_dict()}
    else:
        ties = 0
        for n in range(cfg.n_max + 1):
            est = estimate_phi(spec, g, n, cfg.r, cfg.replicas, cfg.seed, v, cfg.dynamics(), cfg.workers)
            rows.append((n, cfg.r, est.trials, est.disagreements, est.phi_hat, est.stderr))
        summary = {"site": v, "diagonal": False}
    return RunResult(MIXING_SCHEMA, rows, EXIT_OK, summary, {"order_ties": ties, "unresolved": 0})


def run_sample(cfg: RunConfig) -> RunResult:
    spec = cfg.build_model()
    g, _ = _graph_for(cfg, spec)
    v = central_site(g)
    w = ball(g, v, cfg.radius, Mode.PLUS if cfg.mode == "plus" else Mode.MINUS)
    rows = []
    unresolved = ties = 0
    for lo, hi in _blocks(cfg.replicas, cfg.block):
        b = cftp_samples(spec, w, cfg.seed, hi - lo, cfg.dynamics(), cfg.horizon_cap, cfg.workers, lo)
        unresolved += b.unresolved
        ties += int(b.ties.sum())
        for i in range(hi - lo):
            state = " ".join(map(str, spec.from_index(b.states[i]).tolist())) if b.horizons[i] > 0 else None
            rows.append((lo + i, int(b.horizons[i]), int(b.ties[i]), state))
    return RunResult(SAMPLE_SCHEMA, rows, EXIT_UNRESOLVED if unresolved else EXIT_OK,
                     {"site": v, "sites": w.interior.tolist(), "clipped": w.clipped},
                     {"order_ties": ties, "unresolved": unresolved})


def potts_window(box, radius, mode=Mode.PLUS):
    """Edges touching the vertex ball of ``radius`` around the box centre, and that ball."""
    c = central_site(box)
    verts = ball(box, c, radius).interior
    return edge_window(line_graph(box), verts, mode), verts


def colour_sources(seed, replicas, n_vertices, q, first_replica=0):
    z = np.empty((replicas, n_vertices))
    sigma = np.empty((replicas, n_vertices), dtype=np.int64)
    verts = np.arange(n_vertices)
    for i in range(replicas):
        rnd = SweepRandomness(seed, first_replica + i)
        z[i] = rnd.stream(verts, 0, STREAM_Z)
        sigma[i] = 1 + np.floor(rnd.stream(verts, 0, STREAM_SIGMA) * q).astype(np.int64)
    return z, sigma


def run_potts(cfg: RunConfig) -> RunResult:
    spec = cfg.build_model()
    q = int(cfg.q)
    box = build_grid(cfg.dim, cfg.extent)
    mode = Mode.PLUS if cfg.mode == "plus" else Mode.MINUS
    window, verts = potts_window(box, cfg.radius, mode)
    if any(box.degree(u) != box.full_degree[u] for u in verts.tolist()):
        raise ConfigError("the vertex ball must stay clear of the box sides")
    counts = {(int(u), c): 0 for u in verts for c in range(1, q + 1)}
    unresolved = 0
    for lo, hi in _blocks(cfg.replicas, cfg.block):
        b = cftp_samples(spec, window, cfg.seed, hi - lo, cfg.dynamics(), cfg.horizon_cap, cfg.workers, lo)
        ok = b.horizons > 0
        unresolved += int(np.count_nonzero(~ok))
        z, sigma = colour_sources(cfg.seed, hi - lo, box.n_sites, q, lo)
        touched, colors = es_color_batch(b.states[ok], window, z[ok], sigma[ok], cfg.variant,
                                         cfg.boundary_color)
        for u in verts.tolist():
            j = int(np.searchsorted(touched, u))
            col = colors[:, j]
            for c in range(1, q + 1):
                counts[u, c] += int(np.count_nonzero(col == c))
    exact = None
    if q ** verts.size <= 2 ** 20:
        weight = 1 / (1 - spec.p)
        exact = enumerate_potts(box, verts, q, weight, cfg.boundary_color if mode == Mode.PLUS else None)
    total = cfg.replicas - unresolved
    rows = []
    for u in verts.tolist():
        marg = exact.marginal(u) if exact is not None else None
        for c in range(1, q + 1):
            rows.append((u, c, counts[u, c], counts[u, c] / max(total, 1),
                         None if marg is None else float(marg[c])))
    return RunResult(POTTS_SCHEMA, rows, EXIT_UNRESOLVED if unresolved else EXIT_OK,
                     {"vertices": verts.tolist(), "edges": len(window)},
                     {"order_ties": 0, "unresolved": unresolved})


def run_validate(cfg: RunConfig) -> RunResult:
    """Oracle checks on the 2x2 box: conditionals, stationarity, alphabet,
    coupling bound and free/wired domination."""
    spec = cfg.build_model()
    box = build_grid(2, (2, 2))
    g = line_graph(box) if isinstance(spec, RandomCluster) else box
    rows = []
    dists = {}
    for mode in (Mode.PLUS, Mode.MINUS):
        w = Window(g, np.arange(g.n_sites), mode)
        rep = check_conditional(spec, w)
        name = mode.name.lower()
        rows.append(("conditional", name, rep.max_discrepancy, 1e-12, rep.max_discrepancy < 1e-12))
        rows.append(("stationarity", name, rep.stationarity_error, 1e-10, rep.stationarity_error < 1e-10))
        dists[mode] = enumerate_gibbs(spec, w)
    alphabet = spec.finite_alphabet(g)
    worst = 0.0
    for mode in (Mode.PLUS, Mode.MINUS):
        w = Window(g, np.arange(g.n_sites), mode)
        worst = max(worst, finite_update_error(spec, alphabet, w))
    rows.append(("finite_update", "both", float(worst), 1e-12, worst < 1e-12))
    dom = domination_violation(dists[Mode.MINUS], dists[Mode.PLUS], 100, np.random.default_rng(cfg.seed))
    rows.append(("domination", "both", dom, 1e-12, dom <= 1e-12))
    v = 0
    dis, bound = monotone_coupling_disagreement(dists[Mode.PLUS].marginal(v), dists[Mode.MINUS].marginal(v),
                                                spec.spins.values)
    rows.append(("coupling_bound", "both", dis - bound, 1e-12, dis <= bound + 1e-12))
    failed = sum(1 for r in rows if not r[-1])
    worst_cond = max(r[2] for r in rows if r[0] == "conditional")
    return RunResult(VALIDATE_SCHEMA, rows, EXIT_UNRESOLVED if failed else EXIT_OK,
                     {"max_conditional_discrepancy": worst_cond, "failed_checks": failed},
                     {"order_ties": 0, "unresolved": 0})


def finite_update_error(spec, alphabet: FiniteAlphabet, window: Window) -> float:
    """Largest gap between the alphabet-weighted law of the finite update and
    the conditional cdf, over every configuration and site of the window.

    The gap is exact (a Fraction) when the model and alphabet are rational.
    """
    g = window.ambient
    base = spec.extreme_config(g, window.boundary_mode)
    spins = spec.spins.values
    worst = 0
    for combo in itertools.product(spins, repeat=len(window)):
        cfg = base.copy()
        cfg[window.interior] = combo
        for v in window.interior.tolist():
            cdf = spec.conditional_cdf(cfg, v, window)
            mass = {s: 0 for s in spins}
            for a, wgt in zip(alphabet.values, alphabet.weights):
                mass[spec.finite_update(alphabet, cfg, v, a, window)] += wgt
            acc = 0
            for s, c in zip(spins, cdf):
                acc += mass[s]
                worst = max(worst, abs(acc - c))
    return worst


RUNNERS = {
    "sample": run_sample,
    "radius": run_radius,
    "diagonal": run_diagonal,
    "spacetime": run_spacetime,
    "mixing": run_mixing,
    "potts": run_potts,
    "validate": run_validate,
}


def run_experiment(cfg: RunConfig) -> RunResult:
    """Run ``cfg.experiment``; writes the CSV and JSON envelope when ``cfg.out`` is set.

    Exceeded caps and unresolved replicas set exit code 1; a horizon cap hit
    inside CFTP is reported the same way.
    """
    cfg.validate()
    t0 = time.perf_counter()
    try:
        res = RUNNERS[cfg.experiment](cfg)
    except NonCoalescenceError as exc:
        res = RunResult(_schema_of(cfg.experiment), [], EXIT_UNRESOLVED, {"error": str(exc)},
                        {"order_ties": 0, "unresolved": 1})
    wall = time.perf_counter() - t0
    res.summary["wall_time_s"] = wall
    if cfg.out:
        emit_results(res.rows, res.schema, cfg.out)
        meta = cfg.meta or (str(cfg.out) + ".json")
        envelope = {
            "config": cfg.to_dict(),
            "version": version_string(),
            "wall_time_s": wall,
            "exit_code": res.exit_code,
            "degeneracy": res.degeneracy,
            "summary": res.summary,
        }
        Path(meta).write_text(json.dumps(envelope, indent=2, default=_json_default) + "\n", encoding="utf-8")
    return res


def _schema_of(name):
    return {"sample": SAMPLE_SCHEMA, "radius": RADIUS_SCHEMA, "diagonal": DIAGONAL_SCHEMA,
            "spacetime": SPACETIME_SCHEMA, "mixing": MIXING_SCHEMA, "potts": POTTS_SCHEMA,
            "validate": VALIDATE_SCHEMA}[name]


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, Fraction):
        return str(o)
    raise TypeError(type(o).__name__)
