import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def solve_tridiag(a, b, c, d):
    """
    Solve a tridiagonal equation system using the Thomas algorithm.

    Parameters
    ----------
    a : ndarray
        Lower diagonal as a length n array (a[0] unused).
    b : ndarray
        Main diagonal as a length n array.
    c : ndarray
        Upper diagonal as a length n array (c[-1] unused).
    d : ndarray
        Right hand side as a length n array.

    Returns
    -------
    x : ndarray
        Solution vector. An exact zero pivot raises ZeroDivisionError,
        a near-zero one shows up as non-finite entries.
    """
    c_prime, inv_pivot = factorize_tridiag(a, b, c)
    x = np.empty_like(d)
    solve_factorized(a, c_prime, inv_pivot, d, x)
    return x


@njit(cache=True, nogil=True)
def factorize_tridiag(a, b, c):
    """
    Forward-elimination coefficients of the Thomas algorithm.

    Returns the modified upper diagonal and the reciprocal pivots, which only
    depend on the matrix and can be reused for every right hand side.
    """
    n = len(b)
    c_prime = np.zeros_like(b)
    inv_pivot = np.zeros_like(b)

    inv_pivot[0] = 1.0 / b[0]
    c_prime[0] = c[0] * inv_pivot[0]
    for k in range(1, n):
        inv_pivot[k] = 1.0 / (b[k] - a[k] * c_prime[k - 1])
        c_prime[k] = c[k] * inv_pivot[k]

    return c_prime, inv_pivot


@njit(cache=True, nogil=True)
def solve_factorized(a, c_prime, inv_pivot, d, out):
    n = len(d)

    out[0] = d[0] * inv_pivot[0]
    for k in range(1, n):
        out[k] = (d[k] - a[k] * out[k - 1]) * inv_pivot[k]

    for k in range(n - 2, -1, -1):
        out[k] = out[k] - c_prime[k] * out[k + 1]


@njit(cache=True, nogil=True)
def tridiag_matvec(a, b, c, x, out):
    n = len(x)
    if n == 1:
        out[0] = b[0] * x[0]
        return

    out[0] = b[0] * x[0] + c[0] * x[1]
    for k in range(1, n - 1):
        out[k] = a[k] * x[k - 1] + b[k] * x[k] + c[k] * x[k + 1]
    out[n - 1] = a[n - 1] * x[n - 2] + b[n - 1] * x[n - 1]
