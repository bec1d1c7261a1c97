"""Assembly and integration of the Galerkin ODE system for a scalar DDE.

A scalar delay equation

    dx/dt = a x(t) + b x(t - tau) + c int_{t-tau}^{t} x(s) ds + F(u, v, w)

with polynomial F in (u, v, w) = (x(t), x(t - tau), integral term) is
projected onto the first N Koornwinder basis functions.  The result is an
N-dimensional ODE dy/dt = A y + G(y) whose linear part splits as
A = (2/tau) P + Q with P independent of the model coefficients, and whose
nonlinearity is rank-one: G(y) = F(u(y), v(y), w(y)) * nu with
nu_j = 1/||K_j||^2 and

    u(y) = sum_n y_n,   v(y) = sum_n K_n(-1) y_n,   w(y) = tau (2 y_0 - u(y)).

The current value of the underlying DDE solution is recovered as
x_N(t) = sum_n y_n(t).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import koornwinder as kw
from ._kernels import gk_euler, gk_rk4
from .errors import BlowupError

__all__ = [
    "DdeSpec",
    "GkSystem",
    "GkTrajectory",
    "suarez_schopf_perturbed",
    "assemble_linear",
    "gk_nonlinear",
    "gk_rhs",
    "integrate_gk",
    "reconstruct_endpoint",
    "gk_equilibrium",
]

MAX_NONLIN_DEGREE = 5


def _canonical_nonlin(nonlin) -> tuple:
    terms = []
    for key, coeff in dict(nonlin).items():
        p, q, r = (int(e) for e in key)
        if min(p, q, r) < 0:
            raise ValueError(f"negative exponent in nonlinearity term {key}")
        degree = p + q + r
        if degree < 2:
            raise ValueError(
                f"nonlinearity term {key} has total degree {degree}; "
                "constant and linear parts belong in (a, b, c)"
            )
        if degree > MAX_NONLIN_DEGREE:
            raise ValueError(f"nonlinearity degree {degree} exceeds {MAX_NONLIN_DEGREE}")
        coeff = float(coeff)
        if not np.isfinite(coeff):
            raise ValueError(f"non-finite coefficient for term {key}")
        if coeff != 0.0:
            terms.append(((p, q, r), coeff))
    return tuple(sorted(terms))


@dataclass(frozen=True)
class DdeSpec:
    """Coefficients of a scalar polynomial DDE.

    ``nonlin`` maps exponent triples (p, q, r) to real coefficients of the
    monomials u^p v^q w^r; total degrees must lie in [2, 5] so that the
    nonlinearity is tangent to zero at the origin.
    """

    a: float
    b: float
    c: float
    tau: float
    nonlin: tuple = field(default=())

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        object.__setattr__(self, "nonlin", _canonical_nonlin(self.nonlin))

    def with_tau(self, tau: float) -> "DdeSpec":
        return DdeSpec(self.a, self.b, self.c, float(tau), dict(self.nonlin))

    def f_arrays(self):
        """Exponent matrix (M, 3) and coefficient vector for the compiled loops."""
        if not self.nonlin:
            return np.zeros((0, 3), dtype=np.int64), np.zeros(0)
        exps = np.array([key for key, _ in self.nonlin], dtype=np.int64)
        coeffs = np.array([c for _, c in self.nonlin])
        return exps, coeffs

    def f_eval(self, u, v, w):
        """F(u, v, w); accepts scalars or arrays, real or complex."""
        total = 0.0
        for (p, q, r), coeff in self.nonlin:
            total = total + coeff * u**p * v**q * w**r
        return total


def suarez_schopf_perturbed(alpha: float, tau: float) -> DdeSpec:
    """Delayed-oscillator ENSO model written about its positive steady state.

    For dT/dt = T - alpha T(t - tau) - T^3 the steady state T+ = sqrt(1-alpha)
    exists for alpha in (0, 1); the perturbation u = T - T+ obeys
    du/dt = (1 - 3 T+^2) u - alpha u(t - tau) - 3 T+ u^2 - u^3.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1) for the steady state to exist")
    t_plus = np.sqrt(1.0 - alpha)
    return DdeSpec(
        a=1.0 - 3.0 * t_plus**2,
        b=-alpha,
        c=0.0,
        tau=float(tau),
        nonlin={(2, 0, 0): -3.0 * t_plus, (3, 0, 0): -1.0},
    )


@dataclass(frozen=True)
class GkSystem:
    """Assembled N-dimensional Galerkin system for a DdeSpec."""

    spec: DdeSpec
    N: int
    A: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    norm_sq: np.ndarray
    k_minus1: np.ndarray
    nu: np.ndarray
    f_exps: np.ndarray
    f_coeffs: np.ndarray

    @property
    def tau(self) -> float:
        return self.spec.tau

    def linear_functionals(self):
        """Weight vectors (sigma_u, sigma_v, sigma_w) with u = sigma_u . y etc."""
        sigma_u = np.ones(self.N)
        sigma_v = self.k_minus1.copy()
        sigma_w = np.full(self.N, -self.tau)
        sigma_w[0] = self.tau
        return sigma_u, sigma_v, sigma_w


def assemble_linear(spec: DdeSpec, N: int) -> GkSystem:
    """Build the Galerkin matrices for ``spec`` truncated at dimension N.

    Entry (i, j) of A is
    (1/||K_i||^2) [a + b K_j(-1) + c tau (2 delta_{j0} - 1)
                   + (2/tau) sum_{k<j} a_{j,k} (delta_{ik} ||K_i||^2 - 1)];
    P collects the derivative-coefficient terms (model independent) and Q
    the rest, so that A = (2/tau) P + Q.
    """
    N = int(N)
    if N < 1:
        raise ValueError("N must be at least 1")
    norm_sq = np.array([kw.koornwinder_norm_sq(n) for n in range(N)])
    k_minus1 = np.array([kw.koornwinder_at_minus_one(n) for n in range(N)])
    nu = 1.0 / norm_sq

    deriv = kw.derivative_table(N)  # row n holds a_{n,k} for k < n
    col_sums = deriv.sum(axis=1)  # sum_k a_{j,k} for column j
    P = deriv.T - np.outer(nu, col_sums)

    sign = np.full(N, -1.0)  # 2 delta_{j0} - 1
    sign[0] = 1.0
    col = spec.a + spec.b * k_minus1 + spec.c * spec.tau * sign
    Q = np.outer(nu, col)

    A = (2.0 / spec.tau) * P + Q
    exps, coeffs = spec.f_arrays()
    for arr in (A, P, Q, norm_sq, k_minus1, nu, exps, coeffs):
        arr.setflags(write=False)
    return GkSystem(
        spec=spec,
        N=N,
        A=A,
        P=P,
        Q=Q,
        norm_sq=norm_sq,
        k_minus1=k_minus1,
        nu=nu,
        f_exps=exps,
        f_coeffs=coeffs,
    )


def gk_nonlinear(system: GkSystem, y: np.ndarray) -> np.ndarray:
    """G(y) = F(u, v, w) * nu; preserves complex dtypes."""
    y = np.asarray(y)
    u = y.sum()
    v = np.dot(system.k_minus1, y)
    w = system.tau * (2.0 * y[0] - u)
    return system.spec.f_eval(u, v, w) * system.nu


def gk_rhs(system: GkSystem, y: np.ndarray) -> np.ndarray:
    """Full vector field A y + G(y)."""
    return system.A @ y + gk_nonlinear(system, y)


@dataclass(frozen=True)
class GkTrajectory:
    """Strided samples of a Galerkin integration."""

    t: np.ndarray
    y: np.ndarray

    @property
    def x(self) -> np.ndarray:
        """Reconstructed DDE endpoint value sum_n y_n at each sample."""
        return self.y.sum(axis=1)


def integrate_gk(
    system: GkSystem,
    y0: np.ndarray,
    t_end: float,
    dt: float,
    stride: int = 1,
    method: str = "rk4",
) -> GkTrajectory:
    """Fixed-step integration of the assembled system; samples every ``stride`` steps.

    ``method`` selects classical RK4 (default) or forward "euler"; the
    latter exists for error-floor studies against first-order published
    runs and should not be used where accuracy matters.
    """
    if dt <= 0 or t_end < dt:
        raise ValueError("need 0 < dt <= t_end")
    stride = int(stride)
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if method not in ("rk4", "euler"):
        raise ValueError(f"unknown method {method!r}; use 'rk4' or 'euler'")
    y0 = np.asarray(y0, dtype=float)
    if y0.shape != (system.N,):
        raise ValueError(f"initial state must have shape ({system.N},)")
    n_steps = int(round(t_end / dt))
    out = np.empty((n_steps // stride + 1, system.N))
    kernel = gk_rk4 if method == "rk4" else gk_euler
    status, done = kernel(
        system.A,
        system.nu,
        system.k_minus1,
        system.tau,
        system.f_exps,
        system.f_coeffs,
        y0,
        dt,
        n_steps,
        stride,
        out,
    )
    if status != 0:
        raise BlowupError(
            f"Galerkin trajectory blew up near t = {done * dt:.6g}", time=done * dt
        )
    t = np.arange(out.shape[0]) * (dt * stride)
    return GkTrajectory(t=t, y=out)


def reconstruct_endpoint(y) -> float | np.ndarray:
    """sum_j y_j: the Galerkin approximation of x(t) (axis -1 for samples)."""
    return np.sum(np.asarray(y), axis=-1)


def gk_equilibrium(system: GkSystem, value: float) -> np.ndarray:
    """Coefficient vector of the constant-history state x = value."""
    y = np.zeros(system.N)
    y[0] = float(value)
    return y
