"""Coding radius of a central edge against the exact plus/minus disagreement bound."""
import numpy as np

from cftplab.cftp import central_site, coding_radii
from cftplab.experiments import SurvivalCurve
from cftplab.lattice import Mode, ball, build_grid, line_graph
from cftplab.oracle import enumerate_gibbs, exact_tv
from cftplab.specification import RandomCluster


def main(p=0.3, q=2, replicas=20_000, seed=1):
    spec = RandomCluster(p, q)
    lg = line_graph(build_grid(2, (16, 16)))
    v = central_site(lg)
    radii, _, _, _ = coding_radii(spec, lg, v, seed, replicas, radius_cap=5)
    curve = SurvivalCurve.from_values(radii, np.arange(6))
    print(f"random-cluster p={p} q={q}, {replicas} replicas")
    print(" r  Pr(R > r)   s.e.      bound")
    for r, s, se in zip(curve.abscissa, curve.survival, curve.stderr):
        w = ball(lg, v, int(r))
        bound = "-"
        if len(w) <= 20:
            plus = enumerate_gibbs(spec, w.with_mode(Mode.PLUS)).marginal(v)
            minus = enumerate_gibbs(spec, w.with_mode(Mode.MINUS)).marginal(v)
            bound = f"{float(exact_tv(plus, minus)):.5f}"
        print(f"{r:2d}  {s:.5f}    {se:.5f}   {bound}")


if __name__ == "__main__":
    main()
