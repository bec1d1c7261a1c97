"""Koornwinder polynomial basis on the delay interval.

The polynomials are built from Legendre polynomials via

    K_n(s) = -(1 + s) L_n'(s) + (n^2 + n + 1) L_n(s),    s in [-1, 1],

and are orthogonal for the inner product with a point mass at the right
endpoint, (f, g) -> 1/2 * int_{-1}^{1} f g ds + f(1) g(1).  Under the affine
map s = 1 + 2*theta/tau this becomes the history-space inner product on
[-tau, 0]:

    <f, g>_H = (1/tau) * int_{-tau}^{0} f(theta) g(theta) dtheta + f(0) g(0),

and the rescaled basis K_n^tau(theta) = K_n(1 + 2*theta/tau) keeps the same
norms.  Degrees are 0-based everywhere in this module; modules working in
eigenmode indices use 1-based labels and document the shift.

Histories are passed either as a plain callable on [-tau, 0] or as a
``(callable, endpoint)`` pair when the endpoint value at theta = 0 should
differ from the limit of the callable.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

__all__ = [
    "legendre_eval",
    "legendre_table",
    "legendre_deriv_table",
    "koornwinder_eval",
    "koornwinder_table",
    "koornwinder_norm_sq",
    "koornwinder_at_minus_one",
    "derivative_coeffs",
    "derivative_table",
    "gauss_legendre",
    "inner_product_h",
    "project_history",
    "reconstruct",
]

_S_TOL = 1e-9


def _check_degree(n: int) -> int:
    n = int(n)
    if n < 0:
        raise ValueError(f"polynomial degree must be nonnegative, got {n}")
    return n


def _check_interval(s):
    s = np.asarray(s, dtype=float)
    if s.size and (s.min() < -1.0 - _S_TOL or s.max() > 1.0 + _S_TOL):
        raise ValueError("evaluation points must lie in [-1, 1]")
    return np.clip(s, -1.0, 1.0)


def legendre_table(nmax: int, s) -> np.ndarray:
    """Values of L_0..L_nmax at the points ``s``, shape (nmax+1,) + s.shape.

    Three-term recurrence (k+1) L_{k+1} = (2k+1) s L_k - k L_{k-1}.
    """
    nmax = _check_degree(nmax)
    s = np.asarray(s, dtype=float)
    out = np.empty((nmax + 1,) + s.shape, dtype=float)
    out[0] = 1.0
    if nmax >= 1:
        out[1] = s
    for k in range(1, nmax):
        out[k + 1] = ((2 * k + 1) * s * out[k] - k * out[k - 1]) / (k + 1)
    return out


def legendre_deriv_table(nmax: int, s) -> np.ndarray:
    """Values of L_0'..L_nmax' at ``s`` via L'_{k+1} = L'_{k-1} + (2k+1) L_k."""
    nmax = _check_degree(nmax)
    s = np.asarray(s, dtype=float)
    L = legendre_table(nmax, s)
    out = np.zeros_like(L)
    if nmax >= 1:
        out[1] = 1.0
    for k in range(1, nmax):
        out[k + 1] = out[k - 1] + (2 * k + 1) * L[k]
    return out


def legendre_eval(n: int, s):
    """L_n(s) for scalar or array ``s``."""
    n = _check_degree(n)
    s = np.asarray(s, dtype=float)
    val = legendre_table(n, s)[n]
    return float(val) if val.ndim == 0 else val


def koornwinder_eval(n: int, s):
    """K_n(s) = -(1+s) L_n'(s) + (n^2+n+1) L_n(s) for s in [-1, 1]."""
    n = _check_degree(n)
    s = _check_interval(s)
    val = koornwinder_table(n, s)[n]
    return float(val) if val.ndim == 0 else val


def koornwinder_table(nmax: int, s) -> np.ndarray:
    """Values of K_0..K_nmax at ``s``, shape (nmax+1,) + s.shape."""
    nmax = _check_degree(nmax)
    s = np.asarray(s, dtype=float)
    L = legendre_table(nmax, s)
    Lp = legendre_deriv_table(nmax, s)
    degrees = np.arange(nmax + 1)
    factors = (degrees * degrees + degrees + 1).reshape((-1,) + (1,) * s.ndim)
    return -(1.0 + s) * Lp + factors * L


def koornwinder_norm_sq(n: int) -> float:
    """Squared norm (n^2+1)((n+1)^2+1)/(2n+1) shared by K_n and K_n^tau."""
    n = _check_degree(n)
    return (n * n + 1) * ((n + 1) ** 2 + 1) / (2 * n + 1)


def koornwinder_at_minus_one(n: int) -> float:
    """Left-endpoint value K_n(-1) = (n^2+n+1) (-1)^n."""
    n = _check_degree(n)
    return float((n * n + n + 1) * (-1 if n % 2 else 1))


@lru_cache(maxsize=None)
def _derivative_coeffs_cached(n: int) -> np.ndarray:
    # Upper-triangular system T a = b with T_ii = i^2 + 1 and
    # T_ij = -(2i+1) for j > i; b depends on the parity of n + i.
    b = np.empty(n)
    for i in range(n):
        if (n + i) % 2 == 0:
            b[i] = -0.5 * (2 * i + 1) * (n + i + 1) * (n - i)
        else:
            b[i] = (
                (n * n + n) * (2 * i + 1)
                - 0.5 * i * (n + i) * (n - i + 1)
                - 0.5 * (i + 1) * (n - i - 1) * (n + i + 2)
            )
    a = np.empty(n)
    for i in range(n - 1, -1, -1):
        a[i] = (b[i] + (2 * i + 1) * a[i + 1 :].sum()) / (i * i + 1)
    a.setflags(write=False)
    return a


def derivative_coeffs(n: int) -> np.ndarray:
    """Coefficients (a_{n,0}, ..., a_{n,n-1}) with K_n' = sum_k a_{n,k} K_k."""
    n = _check_degree(n)
    if n < 1:
        raise ValueError("derivative expansion requires degree n >= 1")
    return _derivative_coeffs_cached(n).copy()


def derivative_table(N: int) -> np.ndarray:
    """Strictly lower-triangular (N, N) table with row n holding a_{n,k}."""
    N = int(N)
    if N < 1:
        raise ValueError("table size must be at least 1")
    table = np.zeros((N, N))
    for n in range(1, N):
        table[n, :n] = _derivative_coeffs_cached(n)
    return table


@lru_cache(maxsize=None)
def _gauss_legendre_cached(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    # polish the roots to the nearest representable double: the raw nodes
    # sit a few ulp off, which the steep high-degree integrands amplify
    # past the orthogonality contract
    series = np.zeros(order + 1)
    series[order] = 1.0
    deriv = np.polynomial.legendre.legder(series)
    for _ in range(3):
        x = x - np.polynomial.legendre.legval(x, series) / np.polynomial.legendre.legval(x, deriv)
    dP = np.polynomial.legendre.legval(x, deriv)
    w = 2.0 / ((1.0 - x * x) * dP * dP)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(order: int):
    """Gauss-Legendre nodes and weights on [-1, 1] (cached, read-only)."""
    order = int(order)
    if order < 2:
        raise ValueError("quadrature order must be at least 2")
    return _gauss_legendre_cached(order)


def _as_history(f):
    if callable(f):
        fn = f
        endpoint = None
    else:
        fn, endpoint = f
    if endpoint is None:
        endpoint = float(np.asarray(fn(0.0), dtype=float))
    return fn, float(endpoint)


def inner_product_h(f, g, tau: float, quad_order: int = 64) -> float:
    """History inner product (1/tau) int_{-tau}^0 f g dtheta + f(0) g(0).

    ``f`` and ``g`` are callables on [-tau, 0] or (callable, endpoint)
    pairs.  The integral uses ``quad_order`` Gauss-Legendre nodes; after
    mapping to [-1, 1] the 1/tau weight becomes the factor 1/2.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    fn_f, end_f = _as_history(f)
    fn_g, end_g = _as_history(g)
    x, w = gauss_legendre(quad_order)
    theta = 0.5 * tau * (x - 1.0)
    fv = np.asarray(fn_f(theta), dtype=float)
    gv = np.asarray(fn_g(theta), dtype=float)
    return 0.5 * float(np.dot(w, fv * gv)) + end_f * end_g


def project_history(history, N: int, tau: float, quad_order: int | None = None) -> np.ndarray:
    """Coefficients y_n = <history, K_n^tau>_H / ||K_n||^2 for n = 0..N-1."""
    N = int(N)
    if N < 1:
        raise ValueError("need at least one basis function")
    if tau <= 0:
        raise ValueError("tau must be positive")
    if quad_order is None:
        quad_order = max(64, 2 * N)
    fn, endpoint = _as_history(history)
    x, w = gauss_legendre(quad_order)
    theta = 0.5 * tau * (x - 1.0)
    fv = np.asarray(fn(theta), dtype=float)
    K = koornwinder_table(N - 1, x)
    # K_n^tau(theta(x)) = K_n(x) and K_n^tau(0) = K_n(1) = 1.
    inner = 0.5 * (K @ (w * fv)) + endpoint
    norms = np.array([koornwinder_norm_sq(n) for n in range(N)])
    return inner / norms


def reconstruct(coeffs, tau: float):
    """Callable theta -> sum_n y_n K_n^tau(theta) on [-tau, 0]."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.ndim != 1 or coeffs.size < 1:
        raise ValueError("coefficients must be a nonempty vector")
    if tau <= 0:
        raise ValueError("tau must be positive")
    nmax = coeffs.size - 1

    def evaluate(theta):
        theta_arr = np.asarray(theta, dtype=float)
        s = 1.0 + 2.0 * theta_arr / tau
        K = koornwinder_table(nmax, _check_interval(s))
        val = np.tensordot(coeffs, K, axes=(0, 0))
        return float(val) if val.ndim == 0 else val

    return evaluate
