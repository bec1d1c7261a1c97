"""Eigenstructure of the Galerkin matrix.

Eigenvalues are kept in lexicographic order (decreasing real part, ties by
decreasing imaginary part) and labeled 1-based in the docs: lambda_1 and
lambda_2 = conj(lambda_1) form the critical pair of the ENSO study.  Right
modes are scaled to unit Euclidean norm with the largest-modulus component
rotated to the positive real axis; adjoint modes are the matched
eigenvectors of A^H scaled so that <e_i, e_j*> = delta_ij under the pairing
<a, b> = sum_i a_i conj(b_i).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import BracketError, ConditioningError
from .galerkin import GkSystem, assemble_linear, suarez_schopf_perturbed

__all__ = [
    "SpectralData",
    "PesReport",
    "SweepResult",
    "pairing",
    "eigendecompose",
    "characteristic_residual",
    "tau_c_analytic",
    "find_tau_c",
    "pes_verify",
    "pes_scan",
    "eigen_sweep",
]

COND_LIMIT = 1e12


def pairing(a: np.ndarray, b: np.ndarray) -> complex:
    """<a, b> = sum_i a_i conj(b_i)."""
    return complex(np.vdot(b, a))


@dataclass(frozen=True)
class SpectralData:
    """Ordered eigenvalues with biorthonormal right/adjoint mode pairs."""

    tau: float
    eigvals: np.ndarray  # (N,), lexicographic order
    modes: np.ndarray  # (N, N), column j is e_{j+1}
    adjoints: np.ndarray  # (N, N), column j is e_{j+1}*
    m_c: int = 2
    cond: float = field(default=np.nan)

    @property
    def N(self) -> int:
        return self.eigvals.size

    @property
    def lam_c(self) -> np.ndarray:
        return self.eigvals[: self.m_c]

    @property
    def lam_s(self) -> np.ndarray:
        return self.eigvals[self.m_c :]


def _lexicographic_order(w: np.ndarray) -> np.ndarray:
    return np.lexsort((-w.imag, -w.real))


def eigendecompose(system: GkSystem, m_c: int = 2) -> SpectralData:
    """Eigenpairs of the Galerkin matrix with the fixed scale/phase convention."""
    w, V = np.linalg.eig(system.A)
    order = _lexicographic_order(w)
    w = w[order]
    V = V[:, order]

    for j in range(V.shape[1]):
        v = V[:, j]
        v = v / np.linalg.norm(v)
        k = int(np.argmax(np.abs(v)))
        phase = v[k] / abs(v[k])
        V[:, j] = v * np.conj(phase)

    cond = float(np.linalg.cond(V))
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise ConditioningError(
            f"eigenvector matrix condition number {cond:.3e} exceeds {COND_LIMIT:.0e}; "
            "the matrix is too close to defective"
        )
    # Columns of inv(V)^H pair biorthonormally with the columns of V.
    adjoints = np.linalg.inv(V).conj().T

    for n in range(w.size - 1):
        assert w[n].real > w[n + 1].real or (
            w[n].real == w[n + 1].real and w[n].imag >= w[n + 1].imag
        ), "lexicographic eigenvalue order violated"

    for arr in (w, V, adjoints):
        arr.setflags(write=False)
    return SpectralData(
        tau=system.tau, eigvals=w, modes=V, adjoints=adjoints, m_c=m_c, cond=cond
    )


def characteristic_residual(lam: complex, tau: float, alpha: float) -> float:
    """|lam - (1 - 3 T+^2) + alpha e^{-lam tau}| for the linearized ENSO model."""
    a = 3.0 * alpha - 2.0  # 1 - 3 T+^2 with T+^2 = 1 - alpha
    return float(abs(lam - a + alpha * np.exp(-lam * tau)))


def tau_c_analytic(alpha: float) -> float:
    """Critical delay of the linearized model, arccos((3a-2)/a)/sqrt(a^2-(3a-2)^2)."""
    if not 0.5 < alpha < 1.0:
        raise ValueError("alpha must lie in (0.5, 1) for a critical delay to exist")
    ratio = (3.0 * alpha - 2.0) / alpha
    omega = np.sqrt(alpha**2 - (3.0 * alpha - 2.0) ** 2)
    return float(np.arccos(ratio) / omega)


def _max_real_eig(alpha: float, N: int, tau: float) -> float:
    system = assemble_linear(suarez_schopf_perturbed(alpha, tau), N)
    return float(np.linalg.eigvals(system.A).real.max())


def find_tau_c(
    alpha: float,
    N: int,
    bracket: tuple[float, float] = (1.3, 2.5),
    tol: float = 1e-9,
) -> float:
    """Bisection on Re(lambda_1) of the N-dimensional Galerkin matrix."""
    lo, hi = (float(b) for b in bracket)
    if not lo < hi:
        raise BracketError("bracket must satisfy lo < hi")
    g_lo = _max_real_eig(alpha, N, lo)
    g_hi = _max_real_eig(alpha, N, hi)
    if g_lo >= 0.0 or g_hi <= 0.0:
        raise BracketError(
            f"Re(lambda_1) does not change sign over {bracket}: "
            f"{g_lo:.3e} at lo, {g_hi:.3e} at hi"
        )
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _max_real_eig(alpha, N, mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class PesReport:
    """Outcome of a principle-of-exchange-of-stability scan."""

    ok: bool
    m_c: int
    crossing_tau: float | None
    min_gap: float
    stable_max_re: float
    violations: tuple[str, ...]


def pes_scan(taus, eigval_arrays, m_c: int = 2) -> PesReport:
    """Check a grid of ordered spectra for a single critical-pair crossing.

    Requires exactly one sign change of Re(lambda_1) along the grid, all
    eigenvalues beyond the first m_c strictly stable, and a positive gap
    Re(lambda_{m_c}) - Re(lambda_{m_c+1}) throughout.
    """
    taus = np.asarray(taus, dtype=float)
    violations: list[str] = []
    re1 = np.array([w[0].real for w in eigval_arrays])
    gaps = np.array([w[m_c - 1].real - w[m_c].real for w in eigval_arrays])
    stable_res = np.array([w[m_c:].real.max() for w in eigval_arrays])

    sign_changes = np.nonzero(np.diff(np.sign(re1)) != 0)[0]
    crossing_tau = None
    if sign_changes.size == 0:
        violations.append("critical pair never crosses the imaginary axis on the grid")
    elif sign_changes.size > 1:
        violations.append(
            f"multiple crossings of Re(lambda_1) at grid indices {sign_changes.tolist()}"
        )
    else:
        k = sign_changes[0]
        crossing_tau = float(0.5 * (taus[k] + taus[k + 1]))
        if re1[0] >= 0 or re1[-1] <= 0:
            violations.append("Re(lambda_1) is not negative-to-positive across the grid")

    for j_rel in range(len(eigval_arrays[0]) - m_c):
        res = np.array([w[m_c + j_rel].real for w in eigval_arrays])
        bad = np.nonzero(res >= 0.0)[0]
        if bad.size:
            violations.append(
                f"mode {m_c + j_rel + 1} unstable at tau = {taus[bad[0]]:.6g}"
            )
            break
    bad_gap = np.nonzero(gaps <= 0.0)[0]
    if bad_gap.size:
        violations.append(f"spectral gap closes at tau = {taus[bad_gap[0]]:.6g}")

    return PesReport(
        ok=not violations,
        m_c=m_c,
        crossing_tau=crossing_tau,
        min_gap=float(gaps.min()),
        stable_max_re=float(stable_res.max()),
        violations=tuple(violations),
    )


def pes_verify(alpha: float, N: int, tau_grid) -> PesReport:
    """PES scan for the ENSO model over ``tau_grid``."""
    spectra = []
    for tau in tau_grid:
        system = assemble_linear(suarez_schopf_perturbed(alpha, float(tau)), N)
        w = np.linalg.eigvals(system.A)
        spectra.append(w[_lexicographic_order(w)])
    return pes_scan(tau_grid, spectra)


@dataclass(frozen=True)
class SweepResult:
    """Tracked eigenvalue branches over a delay sweep."""

    taus: np.ndarray
    eigvals: np.ndarray  # (n_tau, n_tracked), branch-continuous
    residuals: np.ndarray  # characteristic-equation residual per entry


def eigen_sweep(alpha: float, N: int, taus, n_pairs: int = 10) -> SweepResult:
    """Track the ``n_pairs`` delay-root pairs over a tau sweep.

    At the first grid point the 2*n_pairs eigenvalues with the smallest
    characteristic-equation residual are selected: the matrix also carries
    truncation artifacts (middling real part, very large imaginary part)
    that outrank the deeper delay roots in the lexicographic order but
    approximate no root of the delay equation.  Conjugates share a residual,
    so the selection keeps pairs together.  Branches are then matched
    between consecutive grid points by minimum-cost assignment in the
    complex plane, so each column of the result is a continuous eigenvalue
    path (no sort-order swaps).
    """
    taus = np.asarray(taus, dtype=float)
    n_tracked = 2 * n_pairs
    if n_tracked > N:
        raise ValueError("cannot track more branches than the matrix dimension")
    out = np.empty((taus.size, n_tracked), dtype=complex)
    res = np.empty((taus.size, n_tracked))
    prev = None
    for i, tau in enumerate(taus):
        system = assemble_linear(suarez_schopf_perturbed(alpha, float(tau)), N)
        w = np.linalg.eigvals(system.A)
        if prev is None:
            r = np.array([characteristic_residual(lam, float(tau), alpha) for lam in w])
            pick = np.argsort(r, kind="stable")[:n_tracked]
            tracked = w[pick]
            tracked = tracked[_lexicographic_order(tracked)]
        else:
            cost = np.abs(prev[:, None] - w[None, :])
            rows, cols = linear_sum_assignment(cost)
            tracked = np.empty(n_tracked, dtype=complex)
            tracked[rows] = w[cols]
        out[i] = tracked
        res[i] = [characteristic_residual(lam, float(tau), alpha) for lam in tracked]
        prev = tracked
    return SweepResult(taus=taus, eigvals=out, residuals=res)
