"""Lasota-Yorke bookkeeping for the cat map.

Cone statistics of the inverse branch feed the bounded-part constant
nu_b; the variational formula gives the essential-radius bound Q; and
high-frequency modes on the stable axis, pushed forward exactly as sparse
fields, show the measured decay of the anisotropic norm.

Run: python demos/lasota_yorke.py
"""

import math

import numpy as np

from anisolab.determinant import essential_radius_bound, linear_bound_inputs, orbit_bound_inputs
from anisolab.leafwise import stable_line_leaf
from anisolab.norms import AnisoParams
from anisolab.spectral import SparseField, aligned_cones, build_filter_bank
from anisolab.torus import cat_map
from anisolab.transfer import cone_stats, leaf_distortion, ly_measured_growth, ly_theoretical_bound


def main():
    T = cat_map()
    params = AnisoParams(1.0, -2.0, 1.0)
    d = 1e-3
    # wide input plus cone and wide output minus cone: stretch factors near the eigenvalues
    stats = cone_stats(T, aligned_cones(T, math.pi - 2 * d, d), aligned_cones(T, d, math.pi - 2 * d))
    print(f"|F|_+ = {stats.norm_plus:.6f}  |F|_- = {stats.norm_minus:.6f}  |F|_-- = {stats.norm_minusminus:.6f}")

    leaves = [stable_line_leaf(T, o) for o in (0.0, 0.31)]
    nu = ly_theoretical_bound(stats, 1.0, 1.0, params.t, params.s, params.p, leaf_distortion(T, leaves[0]))
    print(f"nu_b = {nu.nu_b:.4f}   refined = {nu.nu_b_refined:.4f}   kernel |F|_-^(s+t) = {nu.refined_kernel:.6f}")

    Q = essential_radius_bound(linear_bound_inputs(T), params.t, params.s)
    Qn = essential_radius_bound(orbit_bound_inputs(T, None, range(1, 9)), params.t, params.s)
    print(f"Q exact = {Q.Q:.12f}   Q from period-8 orbits = {Qn.Q:.12f}")

    N = 2 ** 17
    probes = [(f"k={k}", SparseField(N, np.array([k]), np.array([1.0 + 0j]))) for k in ((17, -27), (34, -55))]
    ly = ly_measured_growth(probes, T, None, params, leaves, build_filter_bank(N), 6, Q=Q.Q)
    for pid in ly.probes:
        ratios = " ".join(f"{r:.3e}" for r in ly.ratios[pid])
        print(f"{pid:12s} rate {ly.rates[pid]:.4f} (bound 1.25 Q = {1.25 * Q.Q:.4f})  ratios {ratios}")


if __name__ == "__main__":
    main()
