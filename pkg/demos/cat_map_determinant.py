"""Cat map: periodic orbits, the dynamical determinant and the transfer spectrum.

For the linear cat map with the SRB weight every orbit sum S_n equals 1,
so d(z) = 1 - z and the only resonance is the eigenvalue 1 of the
constant density.  The Galerkin matrix of the same operator is a partial
permutation of Fourier modes, which is nilpotent apart from the zero mode.

Run: python demos/cat_map_determinant.py
"""

import numpy as np

from anisolab.determinant import determinant_series, find_zeros, match_zeros_spectrum, orbit_sums
from anisolab.torus import cat_map
from anisolab.transfer import assemble_matrix, spectrum


def main():
    T = cat_map()
    sums = orbit_sums(T, None, 10)
    print(" n  points   S_n")
    for n, (s, c) in enumerate(zip(sums.sums, sums.point_counts), start=1):
        print(f"{n:2d} {c:7d}   {s:.15f}")

    series = determinant_series(sums)
    print("\nd(z) coefficients:", np.array2string(series.coeffs, precision=3, suppress_small=True))
    zs = find_zeros(series, 10.0)
    print("zeros:", zs.zeros)

    G = assemble_matrix(T, None, 8)
    res = spectrum(G, how_many=5)
    print("\nleading Galerkin eigenvalues (K = 8):", np.round(res.eigenvalues, 12))
    rep = match_zeros_spectrum(zs, res.eigenvalues, 0.5, 1e-8)
    print("all matched above 0.5:", rep.all_matched)


if __name__ == "__main__":
    main()
