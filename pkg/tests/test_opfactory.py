import itertools
import json
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gamma, roots_legendre

from resolvent_lab import opfactory, speclab
from resolvent_lab.errors import DomainError
from resolvent_lab.opfactory import OperatorSpec


def sine(k):
    c = math.sqrt(2 / math.pi)
    return lambda x: c * np.sin(k * np.asarray(x))


def flip(N):
    """J: basis-index form of the reflection x -> π - x."""
    return np.diag((-1.0) ** np.arange(N))


# ---------------------------------------------------------------- operators

def test_dirichlet_laplacian_small():
    np.testing.assert_array_equal(opfactory.assemble_dirichlet_laplacian(3), np.diag([1, 4, 9]))
    np.testing.assert_array_equal(opfactory.assemble_dirichlet_laplacian(1), [[1]])


def test_dirichlet_laplacian_eigenvalues_exact():
    A = opfactory.assemble_dirichlet_laplacian(64)
    assert np.array_equal(np.sort(np.linalg.eigvals(A).real), np.arange(1, 65) ** 2)


def test_power_diagonal():
    np.testing.assert_array_equal(opfactory.power_diagonal(3, 2), np.diag([1, 16, 81]))
    np.testing.assert_array_equal(opfactory.power_diagonal(1, 5), [[1]])
    np.testing.assert_array_equal(opfactory.power_diagonal(20, 1),
                                  opfactory.assemble_dirichlet_laplacian(20))


def test_power_diagonal_overflow():
    with pytest.raises(OverflowError):
        opfactory.power_diagonal(10**6, 60)


def test_operator_spec_validation():
    with pytest.raises(DomainError, match=r"\(0, 1/2\)"):
        OperatorSpec(kind="rl_perturbed", alpha_rl=0.7)
    with pytest.raises(DomainError):
        OperatorSpec(kind="rl_perturbed", N=1)
    with pytest.raises(DomainError):
        OperatorSpec(kind="rl_perturbed", xi=-1)
    with pytest.raises(DomainError):
        OperatorSpec(kind="banded")
    with pytest.raises(DomainError):
        OperatorSpec(kind="power_diagonal", k=0)


def test_assemble_dispatch():
    assert np.array_equal(opfactory.assemble(OperatorSpec(kind="power_diagonal", N=4, k=2)),
                          np.diag(np.arange(1, 5.0) ** 4))
    assert np.array_equal(opfactory.assemble(OperatorSpec(kind="dirichlet_laplacian", N=4)),
                          np.diag(np.arange(1, 5.0) ** 2))


# ------------------------------------------------------- fractional calculus

def test_frac_integral_order_one_is_integration():
    one = lambda t: np.ones_like(t)
    for x in (0.3, 1.0, 2.5):
        assert opfactory.rl_frac_integral(1.0, one, x) == pytest.approx(x, abs=1e-12)


def test_frac_integral_half_of_constant():
    one = lambda t: np.ones_like(t)
    for x in (0.2, 1.7, math.pi):
        want = math.sqrt(x) / gamma(1.5)
        assert opfactory.rl_frac_integral(0.5, one, x) == pytest.approx(want, abs=1e-10)


def test_frac_integral_power_formula():
    rng = np.random.default_rng(7)
    for _ in range(10):
        a, b, x = rng.uniform(0.1, 1.5), rng.uniform(0.0, 3.0), rng.uniform(0.1, math.pi)
        want = gamma(b + 1) / gamma(b + 1 + a) * x ** (b + a)
        got = opfactory.rl_frac_integral(a, lambda t: t**b, x)
        assert got == pytest.approx(want, abs=1e-10)


def test_frac_integral_right_side_mirrors_left():
    f = lambda t: np.exp(np.sin(t))
    g = lambda t: f(math.pi - t)
    for x in (0.4, 1.3, 2.9):
        left = opfactory.rl_frac_integral(0.35, f, math.pi - x)
        right = opfactory.rl_frac_integral(0.35, g, x, side="right")
        assert right == pytest.approx(left, abs=1e-11)


def test_frac_derivative_half_of_identity():
    for x in (0.5, 1.0, 2.0):
        got = opfactory.rl_frac_derivative(0.5, "left", lambda t: t, x)
        assert got == pytest.approx(2 / math.sqrt(math.pi) * math.sqrt(x), abs=1e-7)


def test_frac_derivative_of_power_alpha_is_constant():
    a = 0.3
    for x in (0.4, 1.1, 2.6):
        got = opfactory.rl_frac_derivative(a, "left", lambda t: t**a, x)
        assert got == pytest.approx(gamma(a + 1), abs=1e-6)


def test_frac_derivative_small_order_is_near_identity():
    for x in (0.5, 1.5, 2.5):
        got = opfactory.rl_frac_derivative(0.01, "left", np.sin, x)
        assert abs(got - math.sin(x)) < 2e-2


def test_frac_derivative_right_side_sign():
    # D^α_{π-} of (π - t) equals D^α_{0+} of t evaluated at π - x
    for x in (0.5, 1.5):
        right = opfactory.rl_frac_derivative(0.5, "right", lambda t: math.pi - t, x)
        left = opfactory.rl_frac_derivative(0.5, "left", lambda t: t, math.pi - x)
        assert right == pytest.approx(left, abs=1e-7)


def test_frac_derivative_rejects_endpoints():
    with pytest.raises(DomainError):
        opfactory.rl_frac_derivative(0.25, "left", np.sin, 0.0)
    with pytest.raises(DomainError):
        opfactory.rl_frac_derivative(0.25, "right", np.sin, math.pi)


def test_basis_derivative_matches_pointwise_quadrature():
    x = np.array([0.3, 1.2, 2.2, 3.0])
    for side in ("left", "right"):
        table = opfactory.basis_frac_derivative(0.25, side, 5, x)
        for k in (1, 3, 5):
            for i, xi in enumerate(x):
                ref = opfactory.rl_frac_derivative(0.25, side, sine(k), xi)
                assert table[i, k - 1] == pytest.approx(ref, abs=1e-7)


# -------------------------------------------------------- Galerkin matrices

def test_galerkin_matches_finite_difference_oracle():
    """Gauss-Jacobi assembly against inner products of pointwise FD derivatives."""
    N, alpha = 4, 0.25
    # x = π s² clusters nodes at the singular end and makes the integrand smooth in s
    s, w = roots_legendre(60)
    s, w = 0.5 * (s + 1), 0.5 * w
    x = math.pi * s**2
    jac = 2 * math.pi * s
    D = np.array([[opfactory.rl_frac_derivative(alpha, "left", sine(k), xi, h=min(1e-5, xi / 2))
                   for k in range(1, N + 1)] for xi in x])
    E = np.sqrt(2 / math.pi) * np.sin(np.outer(x, np.arange(1, N + 1)))
    oracle = (E * (w * jac)[:, None]).T @ D
    K = opfactory.assemble_rl_galerkin(alpha, "left", N)
    np.testing.assert_allclose(K.real, oracle, atol=2e-6)


@pytest.mark.parametrize("alpha", [0.1, 0.25, 0.4])
def test_column_norm_bound(alpha):
    K = opfactory.assemble_rl_galerkin(alpha, "left", 32)
    cols = np.linalg.norm(K, axis=0)
    assert np.all(cols <= opfactory.column_norm_bound(alpha, np.arange(1, 33)))


@pytest.mark.parametrize("alpha", [0.1, 0.25, 0.4])
@pytest.mark.parametrize("side", ["left", "right"])
def test_galerkin_real_part_psd(alpha, side):
    K = opfactory.assemble_rl_galerkin(alpha, side, 32)
    assert np.linalg.eigvalsh(0.5 * (K + K.conj().T))[0] >= -1e-8


def test_galerkin_is_real():
    K = opfactory.assemble_rl_galerkin(0.25, "left", 16)
    assert np.all(K.imag == 0)


def test_galerkin_small_order_near_identity():
    K = opfactory.assemble_rl_galerkin(0.01, "left", 8)
    assert np.linalg.norm(K - np.eye(8), 2) < 0.1


@pytest.mark.parametrize("alpha", [0.1, 0.25, 0.4])
def test_right_sided_galerkin_reflection_and_adjoint(alpha):
    N = 24
    KL = opfactory.assemble_rl_galerkin(alpha, "left", N)
    KR = opfactory.assemble_rl_galerkin(alpha, "right", N)
    J = flip(N)
    np.testing.assert_allclose(KR, J @ KL @ J, atol=1e-6)
    np.testing.assert_allclose(KR, KL.T, atol=1e-6)


def test_galerkin_nesting():
    order = opfactory.default_order(32)
    K16 = opfactory.assemble_rl_galerkin(0.25, "left", 16, order=order)
    K32 = opfactory.assemble_rl_galerkin(0.25, "left", 32, order=order)
    np.testing.assert_allclose(K32[:16, :16], K16, atol=1e-8)


def test_galerkin_converges_with_order():
    a = opfactory.assemble_rl_galerkin(0.25, "left", 32)
    b = opfactory.assemble_rl_galerkin(0.25, "left", 32, order=400)
    assert np.abs(a - b).max() < 1e-9


def test_perturbed_zero_coupling():
    spec = OperatorSpec(kind="rl_perturbed", N=12, xi=0.0)
    np.testing.assert_array_equal(opfactory.assemble(spec), np.diag(np.arange(1, 13.0) ** 2))


def test_perturbed_real_part_bracket(L_matrix):
    W = L_matrix(16)
    lam = np.linalg.eigvalsh(0.5 * (W + W.conj().T))
    ratio = lam / np.arange(1, 17) ** 2
    c0, c1 = ratio.min(), ratio.max()
    # Re K is PSD, so the lower constant is at least 1; the bracket is [c0, c1]
    assert 1 - 1e-12 <= c0 <= c1 < 1.2


def test_perturbed_imaginary_part_is_skew_part_of_K(L_matrix):
    W = L_matrix(16)
    K = opfactory.assemble_rl_galerkin(0.25, "left", 16)
    np.testing.assert_allclose(W - W.conj().T, 0.2 * (K - K.T), atol=1e-15)
    np.testing.assert_allclose(speclab.herm_components(W)[1], 0.2 * (K - K.T) / 2j, atol=1e-15)


# ----------------------------------------------------------- xi threshold

def _xi_oracle(alpha):
    mpmath.mp.dps = 40
    a = mpmath.mpf(alpha)
    return mpmath.sqrt(6 * (1 - 2 * a)) * mpmath.gamma(1 - a) / mpmath.pi ** (mpmath.mpf(3) / 2 - a)


def test_xi_threshold_quarter():
    value = opfactory.xi_threshold(0.25)
    assert value == pytest.approx(float(_xi_oracle(0.25)), rel=1e-14)
    assert abs(value - 0.5075) < 5e-4
    closed = math.sqrt(3) * gamma(0.75) / math.pi**1.25
    assert value == pytest.approx(closed, rel=1e-14)


def test_xi_threshold_limits():
    assert opfactory.xi_threshold(1e-12) == pytest.approx(math.sqrt(6) / math.pi**1.5, rel=1e-9)
    assert abs(opfactory.xi_threshold(1e-12) - 0.4399) < 1e-4
    assert opfactory.xi_threshold(0.5 - 1e-12) < 1e-5


@given(st.floats(min_value=1e-6, max_value=0.5 - 1e-6))
@settings(max_examples=50, deadline=None)
def test_xi_threshold_matches_high_precision(alpha):
    assert opfactory.xi_threshold(alpha) == pytest.approx(float(_xi_oracle(alpha)), rel=1e-12)


@pytest.mark.parametrize("alpha", [0.0, 0.5, -0.1, 0.7])
def test_xi_threshold_domain(alpha):
    with pytest.raises(DomainError):
        opfactory.xi_threshold(alpha)


# ---------------------------------------------------------- Kipriyanov sums

def brute_series(n, k, L):
    total = 0.0
    for idx in itertools.product(range(1, L + 1), repeat=n):
        l = np.array(idx, dtype=float)
        total += np.sum(l**2) / np.sum(l ** (2 * k)) ** 2
    return total


@pytest.mark.parametrize("n,k,L", [(1, 1, 50), (2, 1, 12), (2, 2, 9), (3, 2, 7), (4, 3, 5)])
def test_series_matches_brute_force(n, k, L):
    got = opfactory.kipriyanov_series(opfactory.KipriyanovParams(n, k, L)).partial_sum
    assert got == pytest.approx(brute_series(n, k, L), rel=1e-12)


def test_series_basel_limit():
    sums = [opfactory.kipriyanov_series(opfactory.KipriyanovParams(1, 1, L)).partial_sum
            for L in (10, 100, 1000)]
    assert sums[0] < sums[1] < sums[2] < math.pi**2 / 6
    assert abs(sums[2] - math.pi**2 / 6) / (math.pi**2 / 6) < 0.01


def test_series_regime_flags():
    assert opfactory.KipriyanovParams(5, 2, 10).regime_ok
    assert not opfactory.KipriyanovParams(2, 1, 10).regime_ok
    assert opfactory.kipriyanov_series(opfactory.KipriyanovParams(5, 2, 4)).regime_ok


def test_series_log_space_path():
    # 4k·log L is large enough that the direct powers are avoided
    res = opfactory.kipriyanov_series(opfactory.KipriyanovParams(1, 60, 12))
    assert res.partial_sum == pytest.approx(1.0 + 4 / 2.0**240, rel=1e-12)


@pytest.mark.parametrize("k,L", [(2, 5), (2, 20), (3, 8)])
def test_tail_bound_dominates_tail_in_one_dimension(k, L):
    # for n = 1 the ψ-sorted tail is Σ_{l > L} l² / l^{4k}
    l = np.arange(L + 1, 200000, dtype=float)
    tail = np.sum(l**2 / l ** (4 * k))
    assert tail <= opfactory.psi_tail_bound(1, k, L)


def test_tail_bound_infinite_when_not_summable():
    assert math.isinf(opfactory.psi_tail_bound(5, 1, 10))


def test_psi_sandwich_holds():
    assert opfactory.psi_sandwich(5, 2, range(2, 21)) >= -1e-12
    assert opfactory.psi_sandwich(3, 3, range(2, 9)) >= -1e-12


def test_psi_values():
    np.testing.assert_allclose(opfactory.psi(np.array([[1, 1], [1, 2]]), 2),
                               [4 / 2, 17**2 / 5])


def test_kipriyanov_params_validation():
    with pytest.raises(DomainError):
        opfactory.KipriyanovParams(0, 1, 5)
    with pytest.raises(DomainError):
        opfactory.KipriyanovParams(1, 1, 1)


# --------------------------------------------------------- interchange

def test_matrix_json_round_trip(tmp_path, L_matrix):
    W = L_matrix(16)
    path = tmp_path / "w.json"
    opfactory.save_matrix(W, path)
    data = json.loads(path.read_text())
    assert set(data) == {"n", "re", "im"} and data["n"] == 16
    np.testing.assert_array_equal(opfactory.load_matrix(path), W)


def test_matrix_json_rejects_shape_mismatch():
    with pytest.raises(ValueError):
        opfactory.matrix_from_dict({"n": 3, "re": [[1, 0], [0, 1]], "im": [[0, 0], [0, 0]]})
    with pytest.raises(ValueError):
        opfactory.matrix_from_dict({"n": 2, "re": [[1, 0], [0, 1]]})
