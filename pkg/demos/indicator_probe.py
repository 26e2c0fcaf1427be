"""Does multiplication by 1_E stay bounded in the leafwise norm?

For a vertical-boundary half-plane and horizontal leaves the ratio
u_norm(1_E phi) / u_norm(phi) is reported over resolutions next to the
W-dagger ratio.  The outcome is data, not a verdict.

Run: python demos/indicator_probe.py
"""

import math

import numpy as np

from anisolab.leafwise import AdmissibleLeaf
from anisolab.norms import AnisoParams, HalfPlane, indicator_multiplier_probe
from anisolab.spectral import build_cone_system


def smooth(x1, x2):
    return np.exp(np.cos(2 * np.pi * x1) + 0.5 * np.sin(2 * np.pi * x2))


def main():
    params = AnisoParams(0.25, -0.4, 2.0)
    leaves = [AdmissibleLeaf((0.0, 1.0), y, 0.0, (), f"h{i}") for i, y in enumerate((0.1, 0.37, 0.8))]
    # plus cone on the k1 axis, where the jump of a vertical boundary puts its energy
    cones = build_cone_system(math.pi / 3, math.pi / 3, 0.0, math.pi / 2)
    rep = indicator_multiplier_probe([("smooth", smooth)], params, HalfPlane((1, 0), 0.0, 0.5), leaves,
                                     resolutions=(64, 128, 256, 512), cones=cones)
    print("   N     u ratio       W-dagger ratio")
    for row in rep.rows:
        print(f"{row[1]:5d}  {row[4]:.8f}   {row[5]:.6f}")
    print("plateau:", rep.plateau, " transversality:", round(rep.transversality, 6))


if __name__ == "__main__":
    main()
