import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import eval_genlaguerre

from fsscrit.errors import DecompositionError, ParameterError
from fsscrit.numerics import (
    banded_matvec,
    banded_to_dense,
    dense_to_banded,
    gauss_laguerre,
    gauss_legendre,
    laguerre_L2,
    laguerre_L2_table,
    lowest_banded_generalized,
    shape_functions,
    solve_generalized_symmetric,
)


def test_midpoint_rule():
    q = gauss_legendre(1)
    assert q.nodes.tolist() == [0.0]
    assert q.weights.tolist() == [2.0]


def test_gauss2_nodes_and_weights():
    q = gauss_legendre(2)
    np.testing.assert_allclose(q.nodes, [-1 / np.sqrt(3), 1 / np.sqrt(3)], atol=1e-15)
    np.testing.assert_allclose(q.weights, [1.0, 1.0], atol=1e-15)


def test_gauss2_cubic_on_unit_interval():
    assert gauss_legendre(2, 0.0, 1.0).integrate(lambda x: x**3) == pytest.approx(0.25, abs=1e-16)


@pytest.mark.parametrize("n", range(1, 11))
def test_monomial_exactness(n):
    a, b = -0.3, 1.7
    q = gauss_legendre(n, a, b)
    assert np.all(q.weights > 0)
    assert q.degree == 2 * n - 1
    for k in range(2 * n):
        exact = (b ** (k + 1) - a ** (k + 1)) / (k + 1)
        assert abs(q.integrate(lambda x: x**k) - exact) <= 1e-13 * max(1.0, abs(exact))


@pytest.mark.parametrize("n", [1, 4, 7, 20])
def test_matches_numpy_leggauss(n):
    x, w = np.polynomial.legendre.leggauss(n)
    q = gauss_legendre(n)
    np.testing.assert_allclose(q.nodes, x, atol=1e-14)
    np.testing.assert_allclose(q.weights, w, atol=1e-14)


@pytest.mark.parametrize("args", [(0,), (3, 1.0, 1.0), (3, 2.0, 1.0)])
def test_invalid_rule(args):
    with pytest.raises(ParameterError):
        gauss_legendre(*args)


def test_laguerre_rule_integrates_exponential_moments():
    q = gauss_laguerre(30)
    for k in range(8):
        assert q.integrate(lambda x: x**k) == pytest.approx(float(np.prod(range(1, k + 1))), rel=1e-12)


def test_laguerre_base_cases():
    r = np.linspace(0, 20, 41)
    np.testing.assert_array_equal(laguerre_L2(0, r), np.ones_like(r))
    np.testing.assert_allclose(laguerre_L2(1, r), 3 - r, atol=1e-14)
    with pytest.raises(ParameterError):
        laguerre_L2(-1, 1.0)


def test_laguerre_table_matches_scipy():
    r = np.linspace(0, 60, 121)
    table = laguerre_L2_table(48, r)
    for n in (0, 1, 5, 17, 48):
        ref = eval_genlaguerre(n, 2, r)
        np.testing.assert_allclose(table[n], ref, rtol=1e-10, atol=1e-10 * np.abs(ref).max())


def test_laguerre_weighted_orthogonality():
    q = gauss_laguerre(200)
    L = laguerre_L2_table(10, q.nodes)
    gram = (L * q.weights * q.nodes**2) @ L.T
    n = np.arange(11)
    np.testing.assert_allclose(gram, np.diag((n + 1.0) * (n + 2.0)), atol=1e-9)


def test_linear_shapes():
    s = shape_functions("linear")
    assert s.count == 2 and s.dofs_per_node == 1
    np.testing.assert_array_equal(s.evaluate(0.0).ravel(), [1.0, 0.0])
    xi = np.linspace(0, 1, 50)
    np.testing.assert_allclose(s.evaluate(xi).sum(axis=0), 1.0, atol=1e-15)


def test_hermite_interpolation_conditions():
    s = shape_functions("hermite-quintic")
    assert s.count == 6 and s.dofs_per_node == 3
    ends = np.array([0.0, 1.0])
    # rows: value, first, second derivative at ξ = 0 and 1, in DOF order
    conditions = np.array(
        [[s.evaluate(ends, d)[:, k] for d in range(3)] for k in range(2)]
    ).reshape(6, 6)
    np.testing.assert_allclose(conditions, np.eye(6), atol=1e-12)


def test_hermite_value_shapes_reproduce_constants():
    s = shape_functions("hermite-quintic")
    vals = s.evaluate(np.linspace(0, 1, 100))
    np.testing.assert_allclose(vals[0] + vals[3], 1.0, atol=1e-13)


def test_unknown_shape_order():
    with pytest.raises(ParameterError):
        shape_functions("cubic")


def test_eigensolver_small_cases():
    sol = solve_generalized_symmetric(np.diag([3.0, 1.0, 2.0]), np.eye(3), 2)
    np.testing.assert_allclose(sol.eigenvalues, [1.0, 2.0])
    sol = solve_generalized_symmetric([[2.0, 1.0], [1.0, 2.0]], np.eye(2), 2)
    np.testing.assert_allclose(sol.eigenvalues, [1.0, 3.0])


def _random_pencil(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n))
    b = rng.standard_normal((n, n))
    return 0.5 * (a + a.T), b @ b.T + n * np.eye(n)


def test_eigensolver_matches_full_decomposition():
    from scipy.linalg import eigh

    H, U = _random_pencil(6, 7)
    sol = solve_generalized_symmetric(H, U, 6)
    np.testing.assert_allclose(sol.eigenvalues, eigh(H, U, eigvals_only=True), atol=1e-12)


@pytest.mark.parametrize("n", [10, 1200])
def test_eigensolver_residual_and_orthonormality(n):
    H, U = _random_pencil(n, n)
    k = min(n, 5)
    sol = solve_generalized_symmetric(H, U, k)
    assert np.all(np.diff(sol.eigenvalues) >= 0)
    V = sol.eigenvectors
    for i in range(k):
        hv = H @ V[:, i]
        assert np.linalg.norm(hv - sol.eigenvalues[i] * U @ V[:, i]) <= 1e-10 * np.linalg.norm(hv)
    np.testing.assert_allclose(V.T @ U @ V, np.eye(k), atol=1e-10)


def test_eigensolver_errors():
    with pytest.raises(ParameterError):
        solve_generalized_symmetric(np.eye(2), np.eye(3))
    with pytest.raises(ParameterError):
        solve_generalized_symmetric(np.eye(2), np.eye(2), 3)
    with pytest.raises(DecompositionError):
        solve_generalized_symmetric(np.eye(2), np.diag([1.0, -1.0]))


def test_eigensolver_is_deterministic():
    H, U = _random_pencil(40, 3)
    a = solve_generalized_symmetric(H, U, 3)
    b = solve_generalized_symmetric(H, U, 3)
    assert np.array_equal(a.eigenvalues, b.eigenvalues)
    assert np.array_equal(a.eigenvectors, b.eigenvectors)


def _banded_pencil(n, kd, seed):
    rng = np.random.default_rng(seed)
    H = np.zeros((n, n))
    U = np.eye(n) * (2 * kd + 2)
    for k in range(kd + 1):
        d = rng.standard_normal(n - k)
        H += np.diag(d, k) + (np.diag(d, -k) if k else 0)
        e = rng.uniform(-1, 1, n - k)
        if k:
            U += np.diag(e, k) + np.diag(e, -k)
    return H, U


@settings(max_examples=20, deadline=None)
@given(n=st.integers(6, 60), kd=st.integers(1, 5), seed=st.integers(0, 10_000))
def test_banded_round_trip_and_matvec(n, kd, seed):
    H, _ = _banded_pencil(n, kd, seed)
    ab = dense_to_banded(H, kd)
    np.testing.assert_array_equal(banded_to_dense(ab), H)
    x = np.random.default_rng(seed).standard_normal(n)
    np.testing.assert_allclose(banded_matvec(ab, x), H @ x, atol=1e-12)


@settings(max_examples=15, deadline=None)
@given(n=st.integers(6, 80), kd=st.integers(1, 5), seed=st.integers(0, 10_000))
def test_banded_lowest_matches_dense(n, kd, seed):
    H, U = _banded_pencil(n, kd, seed)
    energy, v = lowest_banded_generalized(dense_to_banded(H, kd), dense_to_banded(U, kd))
    ref = solve_generalized_symmetric(H, U, 1)
    assert energy == pytest.approx(ref.eigenvalues[0], abs=1e-10 * max(1, abs(energy)))
    assert v @ U @ v == pytest.approx(1.0, abs=1e-10)
    assert abs(abs(v @ U @ ref.eigenvectors[:, 0]) - 1.0) < 1e-8
