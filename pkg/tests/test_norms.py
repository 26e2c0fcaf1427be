import math
import re

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from anisolab.leafwise import AdmissibleLeaf, leaf_lp_norm, restrict_to_leaf
from anisolab.norms import (
    PROBE_WINDOW_MESSAGE, WINDOW_MESSAGE, AnisoParams, HalfPlane, halfplane_blowup_experiment,
    holder_comparison, indicator_multiplier_probe, indicator_multiply, leaf_transversality,
    level_trace_norms, triebel_norm, u_norm, w_dagger_norm,
)
from anisolab.spectral import FourierField, SparseField, build_cone_system, build_filter_bank, random_field

LEAVES = [AdmissibleLeaf((0.0, 1.0), y, 0.0, (), f"h{i}") for i, y in enumerate((0.1, 0.37, 0.71))]
PARAMS = AnisoParams(0.5, -1.0, 1.0)
CONES = build_cone_system(np.pi / 3, np.pi / 3)


def test_params_window():
    with pytest.raises(ValueError, match=re.escape(WINDOW_MESSAGE)):
        AnisoParams(0.5, -0.3)
    with pytest.raises(ValueError, match=re.escape(WINDOW_MESSAGE)):
        AnisoParams(1.0, -5.0, r=3.0)
    with pytest.raises(ValueError, match=re.escape(PROBE_WINDOW_MESSAGE)):
        AnisoParams(0.25, -0.5, 2.0).check_probe_window()
    AnisoParams(0.25, -0.4, 2.0).check_probe_window()


def test_zero_field_has_zero_norm():
    rep = u_norm(FourierField.zeros(64), PARAMS, LEAVES, build_filter_bank(64))
    assert rep.value == 0.0 and rep.argmax_level is None


def test_horizontal_oscillation():
    f = FourierField.mode(64, (16, 0))
    rep = u_norm(f, PARAMS, LEAVES, build_filter_bank(64))
    R = restrict_to_leaf(f, LEAVES[0])
    w1 = leaf_lp_norm(R, R.window, 1)
    assert 0.5 <= rep.value / (2 ** (5 * 0.5) * 2 ** (-5) * w1) <= 2.0
    # |k| = 16 is the peak of block 4
    assert rep.argmax_level == 4


def test_sparse_and_dense_agree():
    f = random_field(64, 6, np.random.default_rng(0))
    bank = build_filter_bank(64)
    a = u_norm(f, PARAMS, LEAVES, bank).value
    b = u_norm(SparseField.from_field(f), PARAMS, LEAVES, bank).value
    assert math.isclose(a, b, rel_tol=1e-12)


def test_bank_resolution_must_match():
    with pytest.raises(ValueError):
        u_norm(FourierField.zeros(64), PARAMS, LEAVES, build_filter_bank(32))


def test_w_dagger_partition_bounds():
    f = random_field(64, 30, np.random.default_rng(1))
    l2 = f.l2_norm()
    val = w_dagger_norm(f, CONES, 0.0, 0.0, 2.0)
    assert l2 * (1 - 1e-12) <= val <= 2 * l2


def test_w_dagger_diagonal_action():
    plus = FourierField.mode(128, (0, 32))
    minus = FourierField.mode(128, (32, 0))
    assert math.isclose(w_dagger_norm(plus, CONES, 1.0, -1.0, 2.0), math.sqrt(1 + 32 ** 2), rel_tol=1e-12)
    assert math.isclose(w_dagger_norm(minus, CONES, 1.0, -1.0, 2.0), 1 / math.sqrt(1 + 32 ** 2), rel_tol=1e-12)
    with pytest.raises(ValueError):
        w_dagger_norm(plus, CONES, -1.0, 0.0, 2.0)


def test_triebel_norm_cases():
    f = random_field(64, 20, np.random.default_rng(2))
    for p in (1.0, 2.0, 3.0):
        assert math.isclose(triebel_norm(f, 0.0, 0.0, p), f.lp_norm(p), rel_tol=1e-12)
    k = 20
    stable = FourierField.mode(64, (k, 0))
    assert math.isclose(triebel_norm(stable, 1.0, -2.0, 2.0), (1 + k * k) ** 0.5 / (1 + k * k), rel_tol=1e-12)
    unstable = FourierField.mode(64, (0, k))
    for s in (-3.0, -1.0, 0.5):
        assert math.isclose(triebel_norm(unstable, 0.7, s, 2.0), (1 + k * k) ** 0.35, rel_tol=1e-12)


def test_holder_comparison_power_law():
    bank = build_filter_bank(256)
    ks = np.array([2, 4, 8, 16, 32, 64])
    probes = [(f"k{k}", FourierField.mode(256, (0, int(k)))) for k in ks]
    for u in (0.75, 0.25):
        rows, mx = holder_comparison(probes, PARAMS, LEAVES, bank, u)
        ratios = np.array([r[3] for r in rows])
        # vertical modes are constant along horizontal leaves: ratio = |window|_1 |k|^{t-u}
        assert np.allclose(ratios, 0.9 * ks ** (PARAMS.t - u), rtol=1e-9)
        if u > PARAMS.t:
            assert np.all(np.diff(ratios) < 0) and math.isfinite(mx)
        else:
            assert np.all(np.diff(ratios) > 0)
    rows, mx = holder_comparison([("c", FourierField.mode(256, (0, 0)))], PARAMS, LEAVES, bank, 0.75)
    assert math.isclose(mx, 0.9, rel_tol=1e-12)


def test_correction_inequality_constant_stable_in_level():
    rng = np.random.default_rng(3)
    bank = build_filter_bank(128)
    lv = np.array(list(bank.levels(True)))
    delta = 0.1
    C = []
    for _ in range(6):
        f = random_field(128, 60, rng, 1.5)
        un = u_norm(f, PARAMS, LEAVES, bank).value
        lt = level_trace_norms(f, LEAVES, bank, PARAMS.p)
        C.append(2.0 ** (lv * PARAMS.t) * lt / (2.0 ** (lv * (-PARAMS.s + delta)) * un))
    C = np.max(C, axis=0)
    assert np.all(C <= 1.1 * C[:3].max())


@settings(max_examples=15, deadline=None)
@given(st.floats(-4, 4).filter(lambda v: abs(v) > 1e-3), st.integers(0, 10_000))
def test_norms_homogeneous_and_subadditive(c, seed):
    rng = np.random.default_rng(seed)
    bank = build_filter_bank(32)
    f, g = random_field(32, 12, rng), random_field(32, 12, rng)
    norms = [
        lambda h: u_norm(h, PARAMS, LEAVES[:2], bank).value,
        lambda h: w_dagger_norm(h, CONES, 0.5, -1.0, 1.0),
        lambda h: triebel_norm(h, 0.5, -1.0, 1.0),
    ]
    for nrm in norms:
        nf, ng = nrm(f), nrm(g)
        assert math.isclose(nrm(c * f), abs(c) * nf, rel_tol=1e-10)
        assert nrm(f + g) <= (nf + ng) * (1 + 1e-10)


def test_halfplane_geometry():
    E = HalfPlane((1, 0), 0.0, 0.5)
    assert not E.full and HalfPlane(width=1.0).full
    s = E.samples(8)
    assert s[0, 0] == 0.5 and s[4, 0] == 0.5
    assert np.all(s[1:4] == 1.0) and np.all(s[5:] == 0.0)
    assert np.allclose(np.abs(E.boundary_direction()), [0, 1])
    assert math.isclose(leaf_transversality(E, LEAVES), 1.0, rel_tol=1e-12)


def test_indicator_multiply():
    f = random_field(32, 10, np.random.default_rng(4))
    full = indicator_multiply(f, HalfPlane(width=1.0))
    assert np.array_equal(full.coeffs, f.coeffs) and full is not f
    half = indicator_multiply(FourierField.mode(32, (0, 0)), HalfPlane())
    assert abs(half.coeffs[0, 0] - 0.5) < 1e-12


def test_blowup_case1():
    res = halfplane_blowup_experiment(0.25, "boundary-in-Cminus")
    for N, v in res.verdicts.items():
        assert v == {"increasing": True, "diverges": True, "control_decaying": True,
                     "log_slope_stable": True}, (N, v)
    run = res.run(512)
    assert np.all(np.diff(run.I) > 0) and all(s > 0 for s in run.log_slopes)
    assert np.all(np.diff(run.control_increments) < 0)


def test_blowup_case3():
    res = halfplane_blowup_experiment(0.25, 3, resolutions=(128, 256))
    assert res.case == "boundary-outside"
    assert all(v["increasing"] and v["diverges"] for v in res.verdicts.values())


def test_blowup_csv_and_dict(tmp_path):
    res = halfplane_blowup_experiment(0.25, 1, resolutions=(64,))
    res.run(64).to_csv(tmp_path / "b.csv")
    assert (tmp_path / "b.csv").read_text().startswith("Lambda,I,increment")
    d = res.to_dict()
    assert d["case"] == "boundary-in-Cminus" and len(d["runs"]) == 1


def test_blowup_rejects_bad_input():
    with pytest.raises(ValueError):
        halfplane_blowup_experiment(-0.1, 1)
    with pytest.raises(ValueError):
        halfplane_blowup_experiment(0.25, 1, c=2.0, c_prime=0.6)
    with pytest.raises(ValueError):
        halfplane_blowup_experiment(0.25, 1, resolutions=(100,))
    with pytest.raises(ValueError):
        halfplane_blowup_experiment(0.25, "no-such-case")


def _smooth_probe(x1, x2):
    return np.exp(np.cos(2 * np.pi * x1) + 0.5 * np.sin(2 * np.pi * x2))


def test_indicator_probe_full_torus_is_identity():
    params = AnisoParams(0.25, -0.4, 2.0)
    rep = indicator_multiplier_probe([("smooth", _smooth_probe)], params, HalfPlane(width=1.0), LEAVES,
                                     resolutions=(32, 64))
    assert all(row[4] == 1.0 for row in rep.rows)


def test_indicator_probe_is_deterministic():
    params = AnisoParams(0.25, -0.4, 2.0)
    E = HalfPlane((1, 0), 0.0, 0.5)
    a = indicator_multiplier_probe([("smooth", _smooth_probe)], params, E, LEAVES, resolutions=(32, 64))
    b = indicator_multiplier_probe([("smooth", _smooth_probe)], params, E, LEAVES, resolutions=(32, 64))
    assert a.rows == b.rows
    assert [r[1] for r in a.rows] == [32, 64]
    assert a.transversality > 0.99


def test_indicator_probe_enforces_window():
    with pytest.raises(ValueError):
        indicator_multiplier_probe([("s", _smooth_probe)], AnisoParams(0.25, -0.5, 2.0), HalfPlane(), LEAVES)


def test_indicator_probe_w_dagger_contrast():
    # jump energy of a vertical boundary lies along k1; with the plus cone
    # there the W-dagger ratio keeps increasing, its increments shrinking
    # like the H^t tail 2^{-(1 - 2t)} per doubling of N
    params = AnisoParams(0.25, -0.4, 2.0)
    cones = build_cone_system(np.pi / 3, np.pi / 3, 0.0, np.pi / 2)
    rep = indicator_multiplier_probe([("smooth", _smooth_probe)], params, HalfPlane(), LEAVES,
                                     resolutions=(64, 128, 256, 512), cones=cones)
    w = np.array([row[5] for row in rep.rows])
    inc = np.diff(w)
    assert np.all(inc > 0)
    assert np.allclose(inc[1:] / inc[:-1], 2 ** -(1 - 2 * params.t), rtol=0.05)
    u = np.array([row[4] for row in rep.rows])
    assert np.max(np.abs(np.diff(u))) < 1e-4 * u[0]
