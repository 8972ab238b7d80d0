"""1D quadrature rules on [0, 1] and scaled monomial bookkeeping."""

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def gauss_legendre(n):
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def gauss_lobatto(n):
    """Gauss-Lobatto nodes and weights on [0, 1] with ``n >= 2`` points.

    Interior nodes are the roots of P'_{n-1}; weights are
    2 / (n (n-1) P_{n-1}(x)^2) on [-1, 1].
    """
    if n < 2:
        raise ValueError("Gauss-Lobatto needs at least 2 points")
    m = n - 1
    c = np.zeros(m + 1)
    c[m] = 1.0
    inner = np.polynomial.legendre.legroots(np.polynomial.legendre.legder(c)) if m > 1 else np.array([])
    x = np.concatenate([[-1.0], np.sort(inner), [1.0]])
    w = 2.0 / (m * (m + 1) * np.polynomial.legendre.legval(x, c) ** 2)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def monomial_exponents(k):
    """Exponent pairs of P_k ordered by total degree, then by decreasing x power.

    Returns an int array of shape (dim, 2); dim = (k+1)(k+2)/2.
    """
    if k < 0:
        return np.zeros((0, 2), dtype=int)
    out = [(d - j, j) for d in range(k + 1) for j in range(d + 1)]
    return np.array(out, dtype=int)


def dim_poly(k):
    return 0 if k < 0 else (k + 1) * (k + 2) // 2


def monomial_index(a, b):
    """Position of xi^a eta^b in the ordering of :func:`monomial_exponents`."""
    d = a + b
    return d * (d + 1) // 2 + b


def eval_monomials(xi, eta, k):
    """Values of all scaled monomials of degree <= k at points (xi, eta).

    Returns shape (npts, dim_poly(k)).
    """
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    ex = monomial_exponents(k)
    px = xi[..., None] ** np.arange(k + 1)
    py = eta[..., None] ** np.arange(k + 1)
    return px[..., ex[:, 0]] * py[..., ex[:, 1]]


def eval_monomial_gradients(xi, eta, k, scale):
    """Physical-coordinate gradients of scaled monomials.

    ``scale`` is the element size the monomials were scaled by. Returns
    (gx, gy), each of shape (npts, dim_poly(k)).
    """
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    ex = monomial_exponents(k)
    px = xi[..., None] ** np.arange(k + 1)
    py = eta[..., None] ** np.arange(k + 1)
    a, b = ex[:, 0], ex[:, 1]
    gx = a * px[..., np.maximum(a - 1, 0)] * py[..., b] / scale
    gy = b * px[..., a] * py[..., np.maximum(b - 1, 0)] / scale
    return gx, gy


@lru_cache(maxsize=None)
def derivative_matrices(k):
    """Matrices mapping monomial coefficients of p to those of d/dxi p, d/deta p."""
    n = dim_poly(k)
    ex = monomial_exponents(k)
    dx = np.zeros((n, n))
    dy = np.zeros((n, n))
    for col, (a, b) in enumerate(ex):
        if a > 0:
            dx[monomial_index(a - 1, b), col] = a
        if b > 0:
            dy[monomial_index(a, b - 1), col] = b
    return dx, dy


def lagrange_basis(nodes, x, deriv=0):
    """Values (or derivatives) of the 1D Lagrange basis on ``nodes`` at ``x``.

    Returns shape (len(x), len(nodes)).
    """
    nodes = np.asarray(nodes, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = len(nodes)
    out = np.empty((len(x), n))
    for i in range(n):
        others = np.delete(nodes, i)
        coeffs = np.poly(others) / np.prod(nodes[i] - others)
        for _ in range(deriv):
            coeffs = np.polyder(coeffs) if len(coeffs) > 1 else np.zeros(1)
        out[:, i] = np.polyval(coeffs, x)
    return out
