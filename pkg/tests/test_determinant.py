import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from anisolab.determinant import (
    SpectralBoundInputs, determinant_series, essential_radius_bound, find_zeros, k_stable_eigenvalues,
    linear_bound_inputs, match_zeros_spectrum, orbit_bound_inputs, orbit_sums,
)
from anisolab.torus import Weight, cat_map, perturbed_cat_map
from anisolab.transfer import assemble_matrix, spectrum

LU = (3 + math.sqrt(5)) / 2
CAT = cat_map()


# -- orbit sums ---------------------------------------------------------------

def test_cat_orbit_sums_are_one():
    s = orbit_sums(CAT, None, 10)
    assert np.max(np.abs(np.array(s.sums) - 1.0)) < 1e-12
    assert not any(s.partial)
    # |det(A^n - I)| = L_n - 2 with Lucas numbers L_n = lambda_u^n + lambda_u^-n
    assert s.point_counts == [round(LU ** n + LU ** -n) - 2 for n in range(1, 11)]


def test_constant_weight_gives_powers():
    c = 0.7
    s = orbit_sums(CAT, Weight("constant", c), 8)
    for n, v in enumerate(s.sums, start=1):
        assert math.isclose(v, c ** n, rel_tol=1e-12)


def test_perturbed_sums_stay_near_one():
    eps = 0.01
    s = orbit_sums(perturbed_cat_map(eps), Weight("constant", 1.0), 6)
    # the perturbation's derivative has sup norm 2 pi
    for n, v in enumerate(s.sums, start=1):
        assert abs(v - 1) <= 4 * math.pi * eps * n
    assert not any(s.partial)


def test_high_period_continuation_is_complete():
    # hyperbolic stretching lambda_u^n makes single shooting on T^n fail here
    s = orbit_sums(perturbed_cat_map(0.02), None, 10)
    assert not any(s.partial)
    assert s.point_counts[-1] == 15125
    assert np.all(np.abs(np.array(s.sums[7:]) - 1) < 1e-8)


def test_orbit_sums_csv(tmp_path):
    s = orbit_sums(CAT, None, 3)
    s.to_csv(tmp_path / "s.csv")
    rows = (tmp_path / "s.csv").read_text().splitlines()
    assert rows[0] == "n,S_n,point_count,partial_flag" and len(rows) == 4


# -- series -------------------------------------------------------------------

def test_series_of_ones_is_one_minus_z():
    d = determinant_series(np.ones(10))
    expected = np.zeros(11)
    expected[:2] = [1, -1]
    assert np.max(np.abs(d.coeffs - expected)) < 1e-12


def test_series_of_powers():
    c = 0.37
    d = determinant_series(c ** np.arange(1, 9))
    expected = np.zeros(9)
    expected[:2] = [1, -c]
    assert np.max(np.abs(d.coeffs - expected)) < 1e-12


def test_series_of_zeros_is_constant():
    d = determinant_series(np.zeros(6))
    assert d.coeffs[0] == 1 and np.all(d.coeffs[1:] == 0)
    assert find_zeros(d).zeros.size == 0


def test_series_needs_enough_sums():
    with pytest.raises(ValueError):
        determinant_series(np.ones(3), 5)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=2, max_size=9), st.integers(0, 1000))
def test_exp_identity_and_truncation_consistency(S, seed):
    d = determinant_series(np.array(S))
    assert d.coeffs[0] == 1
    rng = np.random.default_rng(seed)
    R = min(d.trust_radius, 0.3)
    z = R * rng.random(10) * np.exp(2j * np.pi * rng.random(10))
    # the polynomial equals the exponential up to the truncation order
    tail = np.abs(z) ** (d.n_max + 1) * 4.0 ** (d.n_max + 1)
    assert np.all(np.abs(d.evaluate(z) - d.evaluate_exp(z)) <= 1e-10 + tail)
    back = d.log_derivative_sums()
    assert np.allclose(back[: d.n_max - 1], S[: d.n_max - 1], atol=1e-10, rtol=0)


def test_exp_identity_on_cat_series():
    d = determinant_series(orbit_sums(CAT, None, 10))
    # the omitted log tail z^11/11 is below 1e-10 on |z| = 0.1
    z = 0.1 * np.exp(2j * np.pi * np.arange(10) / 10)
    assert np.max(np.abs(d.evaluate(z) - d.evaluate_exp(z))) < 1e-10


def test_series_json_round_trip():
    import json
    d = determinant_series(np.ones(4))
    assert json.loads(d.to_json())["coeffs"] == [1.0, -1.0, 0.0, 0.0, 0.0]


# -- zeros --------------------------------------------------------------------

def test_cat_series_single_zero_at_one():
    zs = find_zeros(determinant_series(orbit_sums(CAT, None, 10)), 10.0)
    assert len(zs.zeros) == 1 and abs(zs.zeros[0] - 1) < 1e-8
    assert zs.residuals[0] < 1e-8


def test_half_weight_zero_at_two():
    zs = find_zeros(determinant_series(orbit_sums(CAT, Weight("constant", 0.5), 8)), 10.0)
    assert len(zs.zeros) == 1 and abs(zs.zeros[0] - 2) < 1e-8


def test_search_radius_beyond_trust_radius_raises():
    d = determinant_series(orbit_sums(perturbed_cat_map(0.02), None, 6))
    with pytest.raises(ValueError):
        find_zeros(d, d.trust_radius * 2)


def test_unstable_roots_flagged():
    # an alternating-sign series whose truncations disagree
    d = determinant_series(np.array([0.3, -2.0, 1.7, 3.1, -0.4]), threshold=1e-30)
    zs = find_zeros(d, d.trust_radius)
    assert all(isinstance(reason, str) for _, reason in zs.unstable)
    for z in zs.zeros:
        assert abs(d.evaluate(z)) < 1e-8


# -- essential spectral radius bound ----------------------------------------

def test_linear_inputs_invariants():
    inp = linear_bound_inputs(CAT)
    assert math.isclose(inp.entropy, math.log(LU), rel_tol=1e-14)
    assert math.isclose(inp.chi_unstable_inverse, -math.log(LU), rel_tol=1e-14)
    assert math.isclose(inp.chi_stable, -math.log(LU), rel_tol=1e-14)
    with pytest.raises(ValueError):
        linear_bound_inputs(perturbed_cat_map(0.02))
    with pytest.raises(ValueError):
        SpectralBoundInputs("guess")


@pytest.mark.parametrize("t,s,Q", [(1.0, -2.0, 1 / LU), (0.5, -2.0, LU ** -0.5), (0.5, -1.0, LU ** -0.5)])
def test_exact_linear_Q(t, s, Q):
    assert abs(essential_radius_bound(linear_bound_inputs(CAT), t, s).Q - Q) < 1e-9


def test_exact_Q_values():
    assert abs(essential_radius_bound(linear_bound_inputs(CAT), 1.0, -2.0).Q - 0.381966) < 1e-6
    assert abs(essential_radius_bound(linear_bound_inputs(CAT), 0.5, -2.0).Q - 0.61803) < 1e-5


def test_orbit_ensemble_reproduces_linear_Q():
    exact = essential_radius_bound(linear_bound_inputs(CAT), 1.0, -2.0).Q
    inp = orbit_bound_inputs(CAT, None, range(1, 9))
    res = essential_radius_bound(inp, 1.0, -2.0)
    assert abs(res.Q - exact) < 1e-6
    assert sorted(res.sequence) == list(range(1, 9))
    raw = essential_radius_bound(inp, 1.0, -2.0, normalization="raw")
    # raw sums converge to the same value, more slowly
    assert abs(raw.Q - exact) < 1e-4 and abs(raw.Q - exact) > abs(res.Q - exact)


def test_bound_rejects_parameter_window():
    with pytest.raises(ValueError):
        essential_radius_bound(linear_bound_inputs(CAT), 0.5, -0.3)
    with pytest.raises(ValueError):
        essential_radius_bound(linear_bound_inputs(CAT), 1.0, -5.0, r=3.0)


# -- zeros versus eigenvalues ------------------------------------------------

def test_cat_match():
    zs = find_zeros(determinant_series(orbit_sums(CAT, None, 10)), 10.0)
    eig = spectrum(assemble_matrix(CAT, None, 6), how_many=10).eigenvalues
    rep = match_zeros_spectrum(zs, eig, 0.7, 1e-8)
    assert rep.all_matched and len(rep.pairs) == 1
    z, lam, r = rep.pairs[0]
    assert abs(lam - 1) < 1e-8 and r < 1e-8
    assert np.sum(np.abs(eig) >= 0.7) == 1


def test_constant_weight_match():
    g = Weight("constant", 0.9)
    zs = find_zeros(determinant_series(orbit_sums(CAT, g, 8)), 10.0)
    eig = spectrum(assemble_matrix(CAT, g, 5), how_many=5).eigenvalues
    rep = match_zeros_spectrum(zs, eig, 0.7, 1e-8)
    assert rep.all_matched
    z, lam, _ = rep.pairs[0]
    assert abs(z - 1 / 0.9) < 1e-8 and abs(lam - 0.9) < 1e-8


def test_unmatched_items_reported():
    rep = match_zeros_spectrum(np.array([1.0, 1.25]), np.array([1.0, 0.5, 0.3]), 0.45, 1e-6)
    assert len(rep.pairs) == 1
    assert rep.unmatched_zeros == [1.25] and rep.unmatched_eigenvalues == [0.5]
    assert not rep.all_matched and rep.to_dict()["all_matched"] is False


def test_k_stable_eigenvalues():
    out = k_stable_eigenvalues([1.0, 0.5 + 1e-5], [1.0, 0.5, 0.2, 0.65], 0.4, 1e-4)
    assert np.allclose(out, [1.0, 0.5])


def test_weight_scaling_end_to_end():
    T = perturbed_cat_map(0.02)
    c = 0.8
    base, scaled = Weight(), Weight().scaled(c)
    S = np.array(orbit_sums(T, base, 8).sums)
    Sc = np.array(orbit_sums(T, scaled, 8).sums)
    n = np.arange(1, 9)
    assert np.allclose(Sc, c ** n * S, rtol=1e-8, atol=0)
    z = find_zeros(determinant_series(S), 1.05).zeros
    zc = find_zeros(determinant_series(Sc), 1.05 / c).zeros
    assert len(z) == len(zc) >= 1
    assert np.allclose(np.sort_complex(zc), np.sort_complex(z / c), atol=1e-8)
    lam = spectrum(assemble_matrix(T, base, 6), 5).eigenvalues
    lamc = spectrum(assemble_matrix(T, scaled, 6), 5).eigenvalues
    assert np.allclose(lamc, c * lam, atol=1e-8)
