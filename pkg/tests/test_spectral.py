import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from anisolab.spectral import (
    ChiProfile, FourierField, SparseField, aligned_cones, anisotropic_weight_symbols, apply_multiplier,
    build_cone_system, build_filter_bank, cone_dyadic_symbols, frequency_grid, kernel_l1_norm,
    random_field, read_field_binary, read_field_csv, write_field_binary, write_field_csv,
)
from anisolab.torus import cat_map


def _radius(N):
    K1, K2 = frequency_grid(N)
    return np.sqrt(K1 * K1 + K2 * K2)


def test_chi_profile_shape():
    chi = ChiProfile()
    x = np.linspace(0, 3, 301)
    v = chi(x)
    assert np.all(v[x <= 1] == 1.0) and np.all(v[x >= 2] == 0.0)
    assert np.all(np.diff(v) <= 0)
    assert abs(chi(1.5) - 0.5) < 1e-12
    with pytest.raises(ValueError):
        ChiProfile("box")


def test_partition_of_unity_inside_disc():
    bank = build_filter_bank(64)
    total = sum(bank.psi(n) for n in bank.levels())
    inside = _radius(64) <= 16
    assert np.max(np.abs(total[inside] - 1.0)) < 1e-14


def test_partition_of_unity_with_tail_on_whole_box():
    for N in (16, 64, 256):
        bank = build_filter_bank(N)
        total = sum(bank.psi(n) for n in bank.levels(with_tail=True))
        assert np.max(np.abs(total - 1.0)) < 1e-14


def test_level_three_support():
    bank = build_filter_bank(64)
    r = _radius(64)
    psi3 = bank.psi(3)
    assert np.all(psi3[(r < 4) | (r > 16)] == 0.0)
    # the bump profile is flat to machine precision right at its edges
    assert np.all(psi3[(r > 4.5) & (r < 15.0)] > 0)


def test_fat_symbol_is_one_on_support():
    bank = build_filter_bank(64)
    for n in bank.levels():
        assert np.array_equal(bank.psi_fat(n) * bank.psi(n), bank.psi(n))


def test_filter_bank_rejects_bad_sizes():
    with pytest.raises(ValueError):
        build_filter_bank(8)
    with pytest.raises(ValueError):
        build_filter_bank(96)


def test_multiplier_identity_and_diagonal_action():
    rng = np.random.default_rng(0)
    f = random_field(64, 20, rng)
    assert np.array_equal(apply_multiplier(f, np.ones((64, 64))).coeffs, f.coeffs)
    bank = build_filter_bank(64)
    e = FourierField.mode(64, (12, 0))
    out = apply_multiplier(e, bank.psi(4))
    assert np.allclose(out.coeffs, e.coeffs * bank.psi(4)[12, 0])
    assert bank.psi(4)[16, 0] == 1.0 and bank.psi(4)[12, 0] == 0.5
    with pytest.raises(ValueError):
        apply_multiplier(f, np.ones((32, 32)))


def test_almost_orthogonality():
    bank = build_filter_bank(256)
    rng = np.random.default_rng(1)
    fields = [random_field(256, 127, rng) for _ in range(3)]
    worst = 0.0
    for n in bank.levels(True):
        for l in bank.levels(True):
            if abs(n - l) > 5:
                for f in fields:
                    out = apply_multiplier(apply_multiplier(f, bank.psi_fat(l)), bank.psi(n))
                    worst = max(worst, np.max(np.abs(out.coeffs)))
    assert worst < 1e-15


def test_kernel_l1_of_constant_symbol_is_one():
    assert abs(kernel_l1_norm(np.ones((64, 64))) - 1.0) < 1e-15


def test_kernel_l1_plateau_dyadic():
    sups = []
    for N in (64, 128, 256):
        bank = build_filter_bank(N)
        sups.append(max(kernel_l1_norm(bank.psi(n)) for n in bank.levels()))
    assert max(sups) / min(sups) - 1 < 0.05


def test_kernel_l1_plateau_cone_dyadic():
    cones = build_cone_system(np.pi / 3, np.pi / 3)
    sups = []
    for N in (64, 128, 256):
        psi, _ = cone_dyadic_symbols(build_filter_bank(N), cones)
        sups.append(max(kernel_l1_norm(v) for v in psi.values()))
    assert max(sups) / min(sups) - 1 < 0.10


def test_cone_partition_and_support():
    cones = build_cone_system(np.pi / 3, np.pi / 3)
    th = np.linspace(-np.pi, np.pi, 2001)
    plus, minus = cones.phi_plus_angle(th), cones.phi_minus_angle(th)
    assert np.all(plus + minus == 1.0)
    assert np.all(plus[cones.in_plus(th)] == 1.0)
    assert np.all(plus[cones.in_minus(th)] == 0.0)
    K1, K2 = frequency_grid(64)
    inside = cones.margin_plus(np.arctan2(K2, K1)) > 0
    inside &= (K1 != 0) | (K2 != 0)
    assert np.all(cones.phi("+", 64)[inside] == 1.0)


def test_overlapping_cones_rejected():
    with pytest.raises(ValueError):
        build_cone_system(2.0, 1.5)


def test_cone_rotation_equivariance():
    cones = build_cone_system(np.pi / 3, np.pi / 4)
    rot = cones.rotated(np.pi / 4)
    th = np.random.default_rng(2).uniform(-np.pi, np.pi, 500)
    assert np.allclose(rot.phi_plus_angle(th + np.pi / 4), cones.phi_plus_angle(th), atol=1e-12)


def test_aligned_cones_follow_eigendirections():
    T = cat_map()
    cones = aligned_cones(T, np.pi / 3, np.pi / 3)
    w, V = np.linalg.eig(T.A.T)
    u = V[:, np.argmax(np.abs(w))]
    s = V[:, np.argmin(np.abs(w))]
    assert cones.phi_plus_at(u[0], u[1]) == 1.0
    assert cones.phi_minus_at(s[0], s[1]) == 1.0


def test_cone_dyadic_symbols_sum_and_support():
    bank = build_filter_bank(64)
    cones = build_cone_system(np.pi / 3, np.pi / 3)
    psi, fat = cone_dyadic_symbols(bank, cones, with_tail=True)
    K1, K2 = frequency_grid(64)
    inside = (cones.margin_plus(np.arctan2(K2, K1)) > 0) & ((K1 != 0) | (K2 != 0))
    for n in bank.levels(True):
        assert np.max(np.abs(psi[(n, "+")] + psi[(n, "-")] - bank.psi(n))) <= 2.0 ** -52
        assert np.all(psi[(n, "-")][inside] == 0.0)
        assert np.allclose(fat[(n, "+")] + fat[(n, "-")], bank.psi_fat(n), atol=1e-15)


def test_anisotropic_weight_symbols_match_direct_evaluation():
    N, t, v = 64, 0.7, -1.3
    cones = build_cone_system(np.pi / 3, np.pi / 3)
    wp, wm = anisotropic_weight_symbols(N, cones, t, v)
    rng = np.random.default_rng(3)
    for k1, k2 in rng.integers(-32, 32, size=(20, 2)):
        jap = 1.0 + k1 * k1 + k2 * k2
        plus = float(cones.phi_plus_at(k1, k2))
        assert math.isclose(wp[k1 % N, k2 % N], jap ** (t / 2) * plus, rel_tol=1e-14, abs_tol=1e-300)
        assert math.isclose(wm[k1 % N, k2 % N], jap ** (v / 2) * (1 - plus), rel_tol=1e-14, abs_tol=1e-300)


def test_field_samples_round_trip_and_evaluate():
    rng = np.random.default_rng(4)
    f = random_field(32, 10, rng)
    assert np.allclose(FourierField.from_samples(f.samples()).coeffs, f.coeffs, atol=1e-15)
    pts = rng.random((40, 2))
    direct = np.zeros(40, dtype=complex)
    modes, vals = f.support()
    for k, c in zip(modes, vals):
        direct += c * np.exp(2j * np.pi * (pts @ k))
    assert np.allclose(f.evaluate(pts), direct, atol=1e-12)


def test_resample_preserves_band_limited_field():
    f = random_field(32, 10, np.random.default_rng(5))
    assert np.allclose(f.resample(128).resample(32).coeffs, f.coeffs)


def test_translate_matches_shifted_evaluation():
    f = random_field(32, 8, np.random.default_rng(6))
    v = np.array([0.13, -0.4])
    pts = np.random.default_rng(7).random((20, 2))
    assert np.allclose(f.translate(v).evaluate(pts), f.evaluate(pts - v), atol=1e-12)


def test_sparse_field_agrees_with_dense():
    rng = np.random.default_rng(8)
    f = random_field(32, 6, rng)
    sp = SparseField.from_field(f)
    pts = rng.random((10, 2))
    assert np.allclose(sp.evaluate(pts), f.evaluate(pts), atol=1e-13)
    assert math.isclose(sp.l2_norm(), f.l2_norm(), rel_tol=1e-14)
    assert np.allclose(sp.to_field().coeffs, f.coeffs)


def test_real_random_field_is_conjugate_symmetric():
    f = random_field(32, 8, np.random.default_rng(9), real=True)
    assert f.is_conjugate_symmetric()
    assert np.max(np.abs(f.samples().imag)) < 1e-14


@pytest.mark.parametrize("layout", ["fft", "centered"])
def test_binary_round_trip(tmp_path, layout):
    f = random_field(16, 5, np.random.default_rng(10))
    p = tmp_path / "f.bin"
    write_field_binary(f, p, layout)
    g = read_field_binary(p)
    assert np.allclose(g.coeffs, f.coeffs, atol=1e-6)


def test_csv_round_trip(tmp_path):
    f = random_field(16, 5, np.random.default_rng(11))
    p = tmp_path / "f.csv"
    write_field_csv(f, p)
    assert np.array_equal(read_field_csv(p).coeffs, f.coeffs)


@settings(max_examples=30, deadline=None)
@given(st.integers(-31, 31), st.integers(-31, 31), st.complex_numbers(max_magnitude=10, allow_nan=False))
def test_multiplier_linear_on_modes(k1, k2, c):
    bank = build_filter_bank(64)
    e = FourierField.mode(64, (k1, k2), c)
    for n in bank.levels(True):
        out = apply_multiplier(e, bank.psi(n))
        assert out.coeffs[k1 % 64, k2 % 64] == c * bank.psi(n)[k1 % 64, k2 % 64]
