import numpy as np
import pytest

from tunneling.engine.tridiag import factorize_tridiag, solve_factorized, solve_tridiag, tridiag_matvec


def dense(a, b, c):
    return np.diag(b) + np.diag(a[1:], -1) + np.diag(c[:-1], 1)


@pytest.fixture
def system():
    rng = np.random.default_rng(3)
    n = 50
    a = rng.normal(size=n) + 1j * rng.normal(size=n)
    c = rng.normal(size=n) + 1j * rng.normal(size=n)
    b = 4.0 + rng.normal(size=n) + 1j * rng.normal(size=n)
    d = rng.normal(size=n) + 1j * rng.normal(size=n)
    return a, b, c, d


def test_solve_matches_dense_solver(system):
    a, b, c, d = system
    np.testing.assert_allclose(solve_tridiag(a, b, c, d), np.linalg.solve(dense(a, b, c), d), rtol=1e-12, atol=1e-12)


def test_factorization_is_reusable(system):
    a, b, c, d = system
    c_prime, inv_pivot = factorize_tridiag(a, b, c)
    for scale in (1.0, -2.0, 1j):
        out = np.empty_like(d)
        solve_factorized(a, c_prime, inv_pivot, scale * d, out)
        np.testing.assert_allclose(dense(a, b, c) @ out, scale * d, rtol=1e-12, atol=1e-12)


def test_matvec_matches_dense_product(system):
    a, b, c, x = system
    out = np.empty_like(x)
    tridiag_matvec(a, b, c, x, out)
    np.testing.assert_allclose(out, dense(a, b, c) @ x, rtol=1e-13, atol=1e-13)


def test_single_unknown():
    a, b, c = np.zeros(1, complex), np.array([2.0 + 0j]), np.zeros(1, complex)
    out = np.empty(1, complex)
    tridiag_matvec(a, b, c, np.array([3.0 + 0j]), out)
    assert out[0] == 6.0
    assert solve_tridiag(a, b, c, np.array([3.0 + 0j]))[0] == 1.5
