"""Multiplication by a half-plane indicator is unbounded on the isotropic-in-cones space.

I(Lambda) sums |F(1_E phi)|^2 (1+|xi|^2)^t over the target cone up to
|xi| <= Lambda.  For t > 0 it keeps growing as the resolution increases,
while the t = 0 control (plain L2 mass) converges.

Run: python demos/halfplane_blowup.py
"""

from anisolab.norms import halfplane_blowup_experiment


def show(res):
    print(f"\n{res.case}  t = {res.t}  phi exponent = {res.phi_exponent}")
    for run in res.runs:
        print(f"  N = {run.N}")
        print("    Lambda        I(Lambda)     increment     t=0 control")
        for lam, v, inc, c in zip(run.cutoffs, run.I, run.increments, run.control_I):
            print(f"    {lam:6d}  {v:14.6e}  {inc:12.4e}  {c:14.6e}")
    last = res.verdicts[max(res.verdicts)]
    print("  verdicts at the finest N:", last)


def main():
    show(halfplane_blowup_experiment(0.25, "boundary-in-Cminus", (128, 256, 512), 1.25))
    show(halfplane_blowup_experiment(0.25, "boundary-in-Cplus", (128, 256), "log"))
    show(halfplane_blowup_experiment(0.25, "boundary-outside", (128, 256), 1.25))


if __name__ == "__main__":
    main()
