import numpy as np
import pytest
from scipy.linalg import solve_triangular

from armodel import (
    ARCoefficients,
    ar_shocks,
    build_A_matrix,
    build_residual_lag_matrix,
    check_stationarity,
    require_stationary,
    simulate_ar_errors,
    unwhiten,
    whiten,
)
from errors import DataError, NonStationaryError
from rng import make_rng

PHI_STAR = (0.9, -0.9, 0.5, -0.5)


def test_ar1_dense_form():
    A = build_A_matrix([0.5], 3)
    np.testing.assert_array_equal(A.to_dense(), [[1, 0, 0], [-0.5, 1, 0], [0, -0.5, 1]])


def test_empty_phi_is_identity():
    A = build_A_matrix(ARCoefficients.zeros(0), 5)
    np.testing.assert_array_equal(A.to_dense(), np.eye(5))
    v = np.arange(5.0)
    np.testing.assert_array_equal(whiten(A, v), v)


def test_ar2_subdiagonals():
    dense = build_A_matrix([0.9, -0.9], 4).to_dense()
    np.testing.assert_allclose(np.diag(dense, -1), [-0.9, -0.9, -0.9])
    np.testing.assert_allclose(np.diag(dense, -2), [0.9, 0.9])
    np.testing.assert_allclose(np.diag(dense, -3), [0.0])
    np.testing.assert_array_equal(np.triu(dense, 1), 0.0)


def test_band_longer_than_dimension():
    dense = build_A_matrix([0.1, 0.2, 0.3], 2).to_dense()
    np.testing.assert_allclose(dense, [[1, 0], [-0.1, 1]])


def test_zero_phi_unwhiten_is_identity():
    u = make_rng(1).standard_normal(10)
    np.testing.assert_array_equal(unwhiten(build_A_matrix([0.0], 10), u), u)


def test_ar1_forward_substitution():
    eps = unwhiten(build_A_matrix([0.5], 3), np.array([1.0, 0.0, 0.0]))
    np.testing.assert_allclose(eps, [1.0, 0.5, 0.25], atol=1e-15)


def test_whiten_roundtrip_against_dense_oracle():
    rng = make_rng(3)
    phi = [0.3, -0.2, 0.1, 0.05]
    A = build_A_matrix(phi, 200)
    u = rng.standard_normal(200)

    eps = unwhiten(A, u)
    assert np.max(np.abs(whiten(A, eps) - u)) <= 1e-10
    oracle = solve_triangular(A.to_dense(), u, lower=True, unit_diagonal=True)
    np.testing.assert_allclose(eps, oracle, atol=1e-10)


def test_products_match_dense_on_matrices():
    rng = make_rng(4)
    A = build_A_matrix([0.4, -0.3], 30)
    dense = A.to_dense()
    V = rng.standard_normal((30, 3))
    np.testing.assert_allclose(A.matvec(V), dense @ V, atol=1e-12)
    np.testing.assert_allclose(A.rmatvec(V), dense.T @ V, atol=1e-12)


def test_length_mismatch_is_rejected():
    with pytest.raises(ValueError, match="Length mismatch"):
        whiten(build_A_matrix([0.5], 4), np.ones(3))


@pytest.mark.parametrize(
    "phi, stationary",
    [([0.5], True), ([1.0], False), ([-1.2], False), (PHI_STAR, True), ([0.0, 0.0], True), ([], True)],
)
def test_check_stationarity(phi, stationary):
    assert check_stationarity(phi).stationary is stationary


def test_stationarity_roots_match_companion_oracle():
    report = check_stationarity(PHI_STAR)
    q = len(PHI_STAR)
    companion = np.zeros((q, q))
    companion[0, :] = PHI_STAR
    companion[1:, :-1] = np.eye(q - 1)
    inverse_roots = np.abs(np.linalg.eigvals(companion))
    assert np.all(inverse_roots < 1.0)
    np.testing.assert_allclose(report.root_moduli, np.sort(1.0 / inverse_roots), rtol=1e-8)


def test_ar1_root_at_two():
    np.testing.assert_allclose(check_stationarity([0.5]).root_moduli, [2.0])


def test_trailing_zeros_do_not_change_roots():
    a = check_stationarity([0.5])
    b = check_stationarity([0.5, 0.0, 0.0])
    np.testing.assert_allclose(a.root_moduli, b.root_moduli)


def test_require_stationary_carries_diagnostics():
    with pytest.raises(NonStationaryError) as excinfo:
        require_stationary([1.0], hint="use a smaller q")
    err = excinfo.value
    assert err.phi == [1.0]
    assert err.root_moduli == pytest.approx([1.0])
    assert "use a smaller q" in str(err)
    assert err.exit_code == 4


def test_simulate_white_noise_equals_raw_draws():
    eps = simulate_ar_errors([0.0], sigma=1.0, n=50, seed=5)
    np.testing.assert_array_equal(eps, make_rng(5).standard_normal(50))


def test_simulate_is_deterministic():
    a = simulate_ar_errors(PHI_STAR, 2.0, 100, seed=9, burn_in=20)
    b = simulate_ar_errors(PHI_STAR, 2.0, 100, seed=9, burn_in=20)
    np.testing.assert_array_equal(a, b)
    assert a.shape == (100,)


def test_simulate_stationary_sample_is_sane():
    n = 500
    eps = simulate_ar_errors(PHI_STAR, sigma=2.0, n=n, seed=17, burn_in=100)
    assert np.all(np.isfinite(eps))
    sd = eps.std()
    assert 1.0 < sd < 50.0
    slope = np.polyfit(np.arange(n), eps, 1)[0]
    assert abs(slope * n) < 3.0 * sd


def test_simulate_rejects_non_stationary():
    with pytest.raises(NonStationaryError):
        simulate_ar_errors([1.0], 1.0, 10, seed=0)


def test_residual_lag_matrix_examples():
    eps = np.array([1.0, 2.0, 3.0])
    np.testing.assert_array_equal(build_residual_lag_matrix(eps, 1), [[0], [1], [2]])
    np.testing.assert_array_equal(build_residual_lag_matrix(eps, 2), [[0, 0], [1, 0], [2, 1]])
    assert build_residual_lag_matrix(eps, 0).shape == (3, 0)


def test_residual_lag_matrix_drop_leading_row():
    E = build_residual_lag_matrix(np.array([1.0, 2.0, 3.0, 4.0]), 2, drop_leading_row=True)
    np.testing.assert_array_equal(E, [[1, 0], [2, 1], [3, 2]])


def test_residual_lag_matrix_rejects_long_q():
    with pytest.raises(DataError):
        build_residual_lag_matrix(np.ones(3), 3)


def _random_stationary_phi(rng, q):
    # inverse roots inside (-1/1.5, 1/1.5) keep every root outside the unit circle
    inverse_roots = rng.uniform(0.1, 1 / 1.5, q) * rng.choice([-1.0, 1.0], q)
    return -np.poly(inverse_roots)[1:]


def test_simulation_equals_unwhitened_shocks():
    rng = make_rng(100)
    for k in range(20):
        phi = _random_stationary_phi(rng, int(rng.integers(1, 11)))
        assert check_stationarity(phi).stationary
        eps = simulate_ar_errors(phi, 1.5, 500, seed=k)
        shocks = ar_shocks(1.5, 500, k)
        np.testing.assert_allclose(eps, unwhiten(build_A_matrix(phi, 500), shocks), atol=1e-12, rtol=0)

        looped = np.zeros(500)
        for t in range(500):
            past = sum(phi[l] * looped[t - l - 1] for l in range(phi.size) if t - l - 1 >= 0)
            looped[t] = shocks[t] + past
        np.testing.assert_allclose(eps, looped, atol=1e-9)
