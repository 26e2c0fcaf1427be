"""Resonances of the perturbed cat map x -> Ax + eps (sin 2 pi x2, 0).

Two independent routes to the same numbers: eigenvalues of the Galerkin
truncation of the transfer operator, and inverse zeros of the dynamical
determinant built from periodic orbits.  Only eigenvalues that survive a
change of truncation K are compared.  Larger eps shrinks the disc on
which the period-8 determinant is trustworthy (0.43 at eps = 0.05), so
no zero is resolved there without longer orbits.

Run: python demos/perturbed_resonances.py [eps ...]
"""

import sys

import numpy as np

from anisolab.determinant import (determinant_series, find_zeros, k_stable_eigenvalues,
                                  match_zeros_spectrum, orbit_sums)
from anisolab.torus import perturbed_cat_map
from anisolab.transfer import assemble_matrix, spectrum

RADIUS, TOL = 0.6, 1e-3


def resonances(eps, Ks=(16, 24), n_max=8):
    T = perturbed_cat_map(eps)
    eig = [spectrum(assemble_matrix(T, None, K), how_many=8).eigenvalues for K in Ks]
    stable = k_stable_eigenvalues(eig[0], eig[1], RADIUS, TOL)
    series = determinant_series(orbit_sums(T, None, n_max))
    zs = find_zeros(series, min(1 / RADIUS, series.trust_radius))
    return eig[1], stable, series, zs, match_zeros_spectrum(zs, stable, RADIUS, TOL)


def main(eps_values):
    for eps in eps_values:
        eig, stable, series, zs, rep = resonances(eps)
        print(f"eps = {eps}")
        print("  |lambda| of leading Galerkin eigenvalues:", np.round(np.abs(eig[:6]), 6))
        print("  K-stable above", RADIUS, ":", np.round(stable, 8))
        # zeros beyond the trust radius are not resolved by the truncated series
        print(f"  trust radius {series.trust_radius:.4f}, searched up to {min(1 / RADIUS, series.trust_radius):.4f}")
        print("  inverse zeros:", np.round(1 / zs.zeros, 8) if len(zs.zeros) else "none")
        print("  matched:", rep.all_matched, " pairs:", len(rep.pairs))


if __name__ == "__main__":
    main([float(a) for a in sys.argv[1:]] or [0.0, 0.02])
