"""Colour exact wired random-cluster samples and compare with the Potts measure."""
from fractions import Fraction

import numpy as np

from cftplab.escoupling import es_color_batch
from cftplab.experiments import colour_sources
from cftplab.lattice import Mode, build_grid, edge_window, line_graph
from cftplab.oracle import enumerate_gibbs, enumerate_potts
from cftplab.specification import RandomCluster


def main(n=100_000, seed=3):
    box = build_grid(2, (4, 4))
    verts = np.array([5, 6, 9, 10])
    window = edge_window(line_graph(box), verts, Mode.PLUS)
    rc = enumerate_gibbs(RandomCluster(Fraction(1, 2), 2), window)
    omega = rc.support[rc.sample(n, np.random.default_rng(seed))]
    z, sigma = colour_sources(seed, n, box.n_sites, 2)
    touched, colors = es_color_batch(omega, window, z, sigma, boundary_color=1)
    potts = enumerate_potts(box, verts, 2, Fraction(2), boundary_color=1)
    print("vertex  Pr(colour 1) sampled  exact")
    for u in verts.tolist():
        col = colors[:, int(np.searchsorted(touched, u))]
        print(f"{u:6d}  {np.mean(col == 1):.5f}               {float(potts.marginal(u)[1]):.5f}")


if __name__ == "__main__":
    main()
