"""High-mode parameterizations and the 2D reduced system.

The Galerkin nonlinearity is rank-one in mode space: G(y) = F(u, v, w) nu
with (u, v, w) linear in y.  Every interaction coefficient
<G_k(e_a, ..., e_b), e_n*> therefore factors as a scalar k-linear form
(polarized from the degree-k part of F evaluated on linear mode images)
times the mode gain <nu, e_n*>.  No interaction tensors are ever stored;
each coefficient costs O(N).

The closure of the reduced system is expanded once, at construction, into
an explicit polynomial in (x1, x2); integration then never touches the
manifold coefficients again.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import BlowupError, NumericError, ResonanceError
from .galerkin import GkSystem, assemble_linear, suarez_schopf_perturbed
from .spectral import SpectralData, eigendecompose, pairing

__all__ = [
    "NonresonanceReport",
    "ManifoldParam",
    "ReducedSystem2D",
    "ReducedPath",
    "ModelErrorReport",
    "nonresonance_check",
    "build_phi2",
    "build_psi",
    "lyapunov_perron_phi",
    "homological_residual",
    "build_reduced",
    "reduced_factory",
    "reduced_rhs",
    "reduced_rhs_real",
    "integrate_reduced",
    "lyapunov_coefficient",
    "lift_T_star",
    "model_error_diagnostic",
    "defect_ratio",
    "closure_json",
]


# ---------------------------------------------------------------------------
# scalar multilinear forms of the rank-one nonlinearity


def _poly_uvw(exps, coeffs, u, v, w):
    total = 0.0 + 0.0j
    for (p, q, r), c in zip(exps, coeffs):
        total = total + c * u**p * v**q * w**r
    return total


class _RankOneForms:
    """Degree-split scalar forms F_k and their polarizations.

    Works on image triples T = (u, v, w) of mode vectors, so a k-linear
    coefficient never needs more than a handful of scalar polynomial
    evaluations.
    """

    def __init__(self, system: GkSystem):
        self.images = np.vstack(system.linear_functionals())  # (3, N)
        exps, coeffs = system.f_exps, system.f_coeffs
        deg = exps.sum(axis=1)
        self._parts = {}
        for k in np.unique(deg):
            mask = deg == k
            self._parts[int(k)] = (exps[mask], coeffs[mask])

    def img(self, vec: np.ndarray) -> np.ndarray:
        return self.images @ vec

    def qk(self, k: int, triple) -> complex:
        part = self._parts.get(k)
        if part is None:
            return 0.0 + 0.0j
        return _poly_uvw(part[0], part[1], triple[0], triple[1], triple[2])

    def f2(self, P, Q) -> complex:
        """Symmetric bilinear form with f2(y, y) = F_2(u, v, w)."""
        return 0.5 * (self.qk(2, P + Q) - self.qk(2, P) - self.qk(2, Q))

    def f3(self, P, Q, R) -> complex:
        """Symmetric trilinear form with f3(y, y, y) = F_3(u, v, w)."""
        return (
            self.qk(3, P + Q + R)
            - self.qk(3, P + Q)
            - self.qk(3, P + R)
            - self.qk(3, Q + R)
            + self.qk(3, P)
            + self.qk(3, Q)
            + self.qk(3, R)
        ) / 6.0


def _mode_data(system: GkSystem, spectrum: SpectralData):
    forms = _RankOneForms(system)
    imgs = forms.images.astype(complex) @ spectrum.modes  # (3, N), column = mode image
    gains = np.array(
        [pairing(system.nu, spectrum.adjoints[:, n]) for n in range(spectrum.N)]
    )
    return forms, imgs, gains


# ---------------------------------------------------------------------------
# non-resonance and parameterization coefficients


@dataclass(frozen=True)
class NonresonanceReport:
    ok: bool
    k: int
    min_margin: float
    resonant: tuple[tuple[int, ...], ...]
    n_checked: int


def nonresonance_check(
    spectrum: SpectralData,
    k: int,
    system: GkSystem | None = None,
    margin_tol: float = 1e-12,
) -> NonresonanceReport:
    """Scan Re(sum of k critical eigenvalues - lambda_n) over interaction tuples.

    With a system supplied, tuples whose interaction coefficient vanishes
    are skipped (their denominators never enter any formula); without one,
    every tuple is checked.  Indices in the report are 1-based, matching
    the eigenvalue labels.
    """
    if k not in (2, 3):
        raise ValueError("only quadratic and cubic parameterizations are built")
    w = spectrum.eigvals
    m_c = spectrum.m_c
    coeff_of = None
    if system is not None:
        forms, imgs, gains = _mode_data(system, spectrum)
        form = forms.f2 if k == 2 else forms.f3

        def coeff_of(js, n):
            return form(*(imgs[:, j - 1] for j in js)) * gains[n - 1]

    tuples = []
    for js in itertools.product(range(1, m_c + 1), repeat=k):
        for n in range(m_c + 1, spectrum.N + 1):
            tuples.append((js, n, coeff_of(js, n) if coeff_of else None))
    if coeff_of is not None:
        scale = max((abs(c) for _, _, c in tuples), default=0.0)
        tuples = [t for t in tuples if scale == 0.0 or abs(t[2]) > 1e-14 * scale]

    resonant = []
    min_margin = np.inf
    for js, n, _ in tuples:
        margin = abs(sum(w[j - 1] for j in js).real - w[n - 1].real)
        min_margin = min(min_margin, margin)
        if margin <= margin_tol:
            resonant.append(js + (n,))
    return NonresonanceReport(
        ok=not resonant,
        k=k,
        min_margin=float(min_margin),
        resonant=tuple(resonant),
        n_checked=len(tuples),
    )


@dataclass(frozen=True)
class ManifoldParam:
    """Quadratic (and optionally cubic) high-mode parameterization.

    ``quad_coeffs`` maps (j1, j2, n) to the coefficient of x_{j1} x_{j2} in
    the n-th stable component; ``cubic_coeffs`` likewise for triples.  The
    aggregated ``table`` holds, per monomial x1^p x2^q in ``monomials``,
    the coefficient vector over stable modes n = m_c+1 .. N.
    """

    tau: float
    m_c: int
    N: int
    spectrum: SpectralData
    quad_coeffs: dict
    cubic_coeffs: dict
    monomials: tuple
    table: np.ndarray

    @property
    def has_cubic(self) -> bool:
        return bool(self.cubic_coeffs)

    def stable_values(self, x1: complex, x2: complex) -> np.ndarray:
        mono = np.array([x1**p * x2**q for p, q in self.monomials])
        return mono @ self.table


def _aggregate(m_c, N, spectrum, quad, cubic):
    if m_c != 2:
        raise ValueError("monomial aggregation is implemented for a critical pair")
    agg: dict[tuple[int, int], np.ndarray] = {}
    for coeffs in (quad, cubic):
        for key, c in coeffs.items():
            js, n = key[:-1], key[-1]
            pq = (sum(1 for j in js if j == 1), sum(1 for j in js if j == 2))
            agg.setdefault(pq, np.zeros(N - m_c, dtype=complex))[n - m_c - 1] += c
    monomials = tuple(sorted(agg, key=lambda pq: (pq[0] + pq[1], pq[1])))
    table = np.array([agg[pq] for pq in monomials])
    table.setflags(write=False)
    return ManifoldParam(
        tau=spectrum.tau,
        m_c=m_c,
        N=N,
        spectrum=spectrum,
        quad_coeffs=quad,
        cubic_coeffs=cubic,
        monomials=monomials,
        table=table,
    )


def _quad_coeffs(system, spectrum):
    report = nonresonance_check(spectrum, 2, system)
    if not report.ok:
        raise ResonanceError(f"resonant quadratic tuples {report.resonant}")
    forms, imgs, gains = _mode_data(system, spectrum)
    w = spectrum.eigvals
    quad = {}
    for j1, j2 in itertools.product(range(1, spectrum.m_c + 1), repeat=2):
        f = forms.f2(imgs[:, j1 - 1], imgs[:, j2 - 1])
        for n in range(spectrum.m_c + 1, spectrum.N + 1):
            den = w[j1 - 1] + w[j2 - 1] - w[n - 1]
            quad[(j1, j2, n)] = f * gains[n - 1] / den
    return quad


def build_phi2(system: GkSystem, spectrum: SpectralData) -> ManifoldParam:
    """Quadratic parameterization: coefficient <G2(e_j1, e_j2), e_n*> / (lam_j1 + lam_j2 - lam_n)."""
    quad = _quad_coeffs(system, spectrum)
    return _aggregate(spectrum.m_c, spectrum.N, spectrum, quad, {})


def build_psi(system: GkSystem, spectrum: SpectralData) -> ManifoldParam:
    """Quadratic plus cubic parameterization.

    The cubic part solves the order-3 homological equation against the
    cubic nonlinearity alone; the quadratic-quadratic feedback terms of
    the full order-3 identification are deliberately not included.
    """
    quad = _quad_coeffs(system, spectrum)
    report = nonresonance_check(spectrum, 3, system)
    if not report.ok:
        raise ResonanceError(f"resonant cubic tuples {report.resonant}")
    forms, imgs, gains = _mode_data(system, spectrum)
    w = spectrum.eigvals
    cubic = {}
    for js in itertools.product(range(1, spectrum.m_c + 1), repeat=3):
        f = forms.f3(*(imgs[:, j - 1] for j in js))
        for n in range(spectrum.m_c + 1, spectrum.N + 1):
            den = sum(w[j - 1] for j in js) - w[n - 1]
            cubic[js + (n,)] = f * gains[n - 1] / den
    return _aggregate(spectrum.m_c, spectrum.N, spectrum, quad, cubic)


def lyapunov_perron_phi(
    system: GkSystem,
    spectrum: SpectralData,
    X,
    s_min: float = -40.0,
    nodes: int = 10_000,
) -> np.ndarray:
    """Quadrature of the backward integral defining the quadratic parameterization.

    Trapezoid over [s_min, 0] of e^{-s lam_n} <G2(y_c(s)), e_n*> with
    y_c(s) the linear center flow from X; an independent oracle for
    build_phi2, not used in any construction.
    """
    forms, imgs, gains = _mode_data(system, spectrum)
    w = spectrum.eigvals
    m_c = spectrum.m_c
    s = np.linspace(s_min, 0.0, nodes)
    T = (
        X[0] * np.exp(s * w[0])[:, None] * imgs[:, 0][None, :]
        + X[1] * np.exp(s * w[1])[:, None] * imgs[:, 1][None, :]
    )
    q2 = forms.qk(2, (T[:, 0], T[:, 1], T[:, 2]))
    out = np.empty(spectrum.N - m_c, dtype=complex)
    for n in range(m_c, spectrum.N):
        out[n - m_c] = np.trapezoid(np.exp(-s * w[n]) * q2 * gains[n], s)
    return out


def homological_residual(system: GkSystem, param: ManifoldParam, X) -> float:
    """Max-norm residual of D psi(X) A_c X - A_s psi(X) = Pi_s G_k(X) at one state."""
    spectrum = param.spectrum
    forms, imgs, gains = _mode_data(system, spectrum)
    w = spectrum.eigvals
    m_c = param.m_c
    x1, x2 = complex(X[0]), complex(X[1])
    mono = np.array([x1**p * x2**q for p, q in param.monomials])
    rates = np.array([p * w[0] + q * w[1] for p, q in param.monomials])
    lhs = (mono * rates) @ param.table - w[m_c:] * (mono @ param.table)
    yc = x1 * imgs[:, 0] + x2 * imgs[:, 1]
    scal = forms.qk(2, yc)
    if param.has_cubic:
        scal = scal + forms.qk(3, yc)
    rhs = scal * gains[m_c:]
    return float(np.max(np.abs(lhs - rhs)))


# ---------------------------------------------------------------------------
# polynomial algebra in (x1, x2) for the closure expansion


def _pmul(a: dict, b: dict) -> dict:
    out: dict = {}
    for (p1, q1), c1 in a.items():
        for (p2, q2), c2 in b.items():
            key = (p1 + p2, q1 + q2)
            out[key] = out.get(key, 0.0 + 0.0j) + c1 * c2
    return out


def _pow_list(poly: dict, kmax: int) -> list:
    pows = [{(0, 0): 1.0 + 0.0j}]
    for _ in range(kmax):
        pows.append(_pmul(pows[-1], poly))
    return pows


def _poly_arrays(poly: dict):
    items = sorted(
        ((pq, c) for pq, c in poly.items() if c != 0.0),
        key=lambda kv: (kv[0][0] + kv[0][1], kv[0][1]),
    )
    if not items:
        return np.zeros((0, 2), dtype=np.int64), np.zeros(0, dtype=complex)
    exps = np.array([pq for pq, _ in items], dtype=np.int64)
    coeffs = np.array([c for _, c in items], dtype=complex)
    return exps, coeffs


def _peval(exps, coeffs, x1, x2):
    total = 0.0 + 0.0j if np.isscalar(x1) else np.zeros(np.shape(x1), dtype=complex)
    for (p, q), c in zip(exps, coeffs):
        total = total + c * x1**p * x2**q
    return total


@dataclass(frozen=True)
class ReducedSystem2D:
    """The 2D closure dx_j/dt = lam_j x_j + gain_j P(x1, x2), plus lifting data.

    P is the shared scalar polynomial F(u, v, w) evaluated on the manifold
    embedding x1 e1 + x2 e2 + Psi(x); the rank-one structure makes both
    closure components proportional to it.  ``lift`` evaluates the
    physical reconstruction sum_j y_j on the manifold.
    """

    system: GkSystem
    spectrum: SpectralData
    param: ManifoldParam
    lam: np.ndarray  # (2,)
    gain: np.ndarray  # (2,)
    closure_exps: np.ndarray
    closure_coeffs: np.ndarray
    lift_exps: np.ndarray
    lift_coeffs: np.ndarray

    @property
    def tau(self) -> float:
        return self.system.tau

    @property
    def lambda1(self) -> complex:
        return complex(self.lam[0])

    def rhs(self, x) -> np.ndarray:
        scal = _peval(self.closure_exps, self.closure_coeffs, x[0], x[1])
        return self.lam * np.asarray(x, dtype=complex) + self.gain * scal

    def lift_values(self, x1, x2):
        return _peval(self.lift_exps, self.lift_coeffs, x1, x2)

    def lift_state(self, x1: complex, x2: complex) -> np.ndarray:
        """Full N-dimensional state on the manifold at reduced coordinates (x1, x2)."""
        V = self.spectrum.modes
        psi = self.param.stable_values(x1, x2)
        return V[:, :2] @ np.array([x1, x2]) + V[:, 2:] @ psi


def _linear_image_poly(sigma: np.ndarray, spectrum: SpectralData, param: ManifoldParam):
    """Polynomial x -> sigma . (x1 e1 + x2 e2 + Psi(x)) as a coefficient dict."""
    V = spectrum.modes
    poly = {
        (1, 0): complex(sigma @ V[:, 0]),
        (0, 1): complex(sigma @ V[:, 1]),
    }
    stable_proj = sigma.astype(complex) @ V[:, 2:]
    weights = param.table @ stable_proj
    for pq, c in zip(param.monomials, weights):
        poly[pq] = poly.get(pq, 0.0 + 0.0j) + c
    return poly


def build_reduced(
    system: GkSystem,
    spectrum: SpectralData | None = None,
    param: ManifoldParam | None = None,
) -> ReducedSystem2D:
    """Expand the closure polynomial and lifting formula once, symbolically."""
    if spectrum is None:
        spectrum = eigendecompose(system)
    if spectrum.m_c != 2:
        raise ValueError("the reduced system is built for a critical pair (m_c = 2)")
    if param is None:
        param = build_psi(system, spectrum)

    sig_u, sig_v, sig_w = system.linear_functionals()
    pu = _linear_image_poly(sig_u, spectrum, param)
    pv = _linear_image_poly(sig_v, spectrum, param)
    pw = _linear_image_poly(sig_w, spectrum, param)

    exps, coeffs = system.f_exps, system.f_coeffs
    pows_u = _pow_list(pu, int(exps[:, 0].max(initial=0)))
    pows_v = _pow_list(pv, int(exps[:, 1].max(initial=0)))
    pows_w = _pow_list(pw, int(exps[:, 2].max(initial=0)))
    closure: dict = {}
    for (p, q, r), c in zip(exps, coeffs):
        term = _pmul(_pmul(pows_u[p], pows_v[q]), pows_w[r])
        for pq, tc in term.items():
            closure[pq] = closure.get(pq, 0.0 + 0.0j) + c * tc

    gain = np.array(
        [
            pairing(system.nu, spectrum.adjoints[:, 0]),
            pairing(system.nu, spectrum.adjoints[:, 1]),
        ]
    )
    c_exps, c_coeffs = _poly_arrays(closure)
    # The physical reconstruction sum_j y_j is exactly the u-image on the manifold.
    l_exps, l_coeffs = _poly_arrays(pu)
    for arr in (gain, c_exps, c_coeffs, l_exps, l_coeffs):
        arr.setflags(write=False)
    return ReducedSystem2D(
        system=system,
        spectrum=spectrum,
        param=param,
        lam=spectrum.eigvals[:2].copy(),
        gain=gain,
        closure_exps=c_exps,
        closure_coeffs=c_coeffs,
        lift_exps=l_exps,
        lift_coeffs=l_coeffs,
    )


def reduced_factory(alpha: float, N: int = 6):
    """tau -> ReducedSystem2D builder with memoization, for continuation sweeps."""
    cache: dict[float, ReducedSystem2D] = {}

    def make(tau: float) -> ReducedSystem2D:
        tau = float(tau)
        if tau not in cache:
            system = assemble_linear(suarez_schopf_perturbed(alpha, tau), N)
            cache[tau] = build_reduced(system)
        return cache[tau]

    return make


def reduced_rhs(reduced: ReducedSystem2D, x) -> np.ndarray:
    """Vector field of the 2D reduced system at a complex pair."""
    return reduced.rhs(x)


def reduced_rhs_real(reduced: ReducedSystem2D, v) -> np.ndarray:
    """Real form in (Re x1, Im x1), valid on the conjugate-symmetric slice."""
    z = complex(v[0], v[1])
    dz = reduced.rhs((z, np.conj(z)))[0]
    return np.array([dz.real, dz.imag])


@dataclass(frozen=True)
class ReducedPath:
    """Sampled reduced trajectory on the conjugate slice x2 = conj(x1)."""

    t: np.ndarray
    z: np.ndarray
    blown: bool = False

    @property
    def x1(self) -> np.ndarray:
        return self.z

    @property
    def x2(self) -> np.ndarray:
        return np.conj(self.z)


def integrate_reduced(
    reduced: ReducedSystem2D,
    z0: complex,
    t_end: float,
    dt: float,
    stride: int = 1,
    direction: float = 1.0,
    blowup: float = 1e6,
) -> ReducedPath:
    """Fixed-step RK4 of the scalar complex closure; blow-up truncates, not raises.

    ``direction`` = -1 integrates the time-reversed field (UPOs attract
    there); reported times are always nonnegative elapsed spans.
    """
    n_steps = int(round(t_end / dt))
    n_samples = n_steps // stride + 1
    out = np.empty(n_samples, dtype=complex)
    status, steps = _kernels.reduced_rk4(
        complex(reduced.lam[0]),
        complex(reduced.gain[0]),
        reduced.closure_exps,
        reduced.closure_coeffs,
        complex(z0),
        float(dt),
        n_steps,
        int(stride),
        float(direction),
        float(blowup),
        out,
    )
    if status != 0:
        kept = 1 + (steps - 1) // stride
        t = np.arange(kept) * (stride * dt)
        return ReducedPath(t=t, z=out[:kept].copy(), blown=True)
    t = np.arange(n_samples) * (stride * dt)
    return ReducedPath(t=t, z=out, blown=False)


# ---------------------------------------------------------------------------
# Lyapunov coefficient


def lyapunov_coefficient(system: GkSystem, spectrum: SpectralData) -> float:
    """First Lyapunov coefficient of the Hopf pair at the critical delay.

    Requires |Re lambda_1| <= 1e-8 (spectrum taken at tau_c).  Positive
    value: subcritical.  The magnitude inherits the unit-norm right-mode /
    biorthonormal adjoint convention and rescales by |c|^2 under e1 -> c e1.
    """
    w = spectrum.eigvals
    if abs(w[0].real) > 1e-8:
        raise ValueError(
            f"spectrum is not critical: Re(lambda_1) = {w[0].real:.3e} exceeds 1e-8"
        )
    if w[0].imag == 0.0:
        raise ValueError("lambda_1 is real; no Hopf pair at this delay")
    forms, imgs, gains = _mode_data(system, spectrum)
    I1, I2 = imgs[:, 0], imgs[:, 1]
    g1 = gains[0]

    a20 = forms.f2(I1, I1) * g1
    a11 = forms.f2(I1, I2) * g1 + forms.f2(I2, I1) * g1
    a21 = (forms.f3(I1, I1, I2) + forms.f3(I1, I2, I1) + forms.f3(I2, I1, I1)) * g1
    for n in range(3, spectrum.N + 1):
        In = imgs[:, n - 1]
        gn = gains[n - 1]
        a21 += (
            (forms.f2(I1, I2) + forms.f2(I2, I1))
            * gn
            / (2.0 * w[0].real - w[n - 1])
            * (forms.f2(I1, In) + forms.f2(In, I1))
            * g1
        )
        a21 += (
            forms.f2(I1, I1)
            * gn
            / (2.0 * w[0] - w[n - 1])
            * (forms.f2(I2, In) + forms.f2(In, I2))
            * g1
        )
    return float((a20 * a11 * 1j / w[0].imag + a21).real)


# ---------------------------------------------------------------------------
# lifting and error diagnostics


def lift_T_star(reduced: ReducedSystem2D, x_path) -> np.ndarray:
    """Physical reconstruction along a conjugate-symmetric reduced path.

    Accepts a complex array (read as x1 with x2 = conj(x1)) or an (M, 2)
    array of pairs.  The imaginary residue must stay below 1e-10 (relative
    to the signal scale); anything larger means the path broke conjugacy.
    """
    arr = np.asarray(x_path, dtype=complex)
    if arr.ndim == 1:
        x1, x2 = arr, np.conj(arr)
    else:
        x1, x2 = arr[:, 0], arr[:, 1]
    vals = reduced.lift_values(x1, x2)
    scale = max(1.0, float(np.max(np.abs(vals.real), initial=0.0)))
    residue = float(np.max(np.abs(vals.imag), initial=0.0))
    if residue > 1e-10 * scale:
        raise NumericError(
            f"imaginary residue {residue:.3e} in the lifted series; "
            "the reduced path is not conjugate-symmetric"
        )
    return vals.real


@dataclass(frozen=True)
class ModelErrorReport:
    lhs: float
    defect: float

    @property
    def ratio(self) -> float:
        if self.defect > 0.0:
            return self.lhs / self.defect
        return 0.0 if self.lhs == 0.0 else np.inf


def _trajectory_arrays(trajectory):
    if hasattr(trajectory, "t") and hasattr(trajectory, "y"):
        return np.asarray(trajectory.t, dtype=float), np.asarray(trajectory.y)
    t, y = trajectory
    return np.asarray(t, dtype=float), np.asarray(y)


def _time_average(t, values):
    if t.size < 2:
        return float(np.mean(values))
    return float(np.trapezoid(values, t) / (t[-1] - t[0]))


def model_error_diagnostic(
    system: GkSystem, param: ManifoldParam, trajectory
) -> ModelErrorReport:
    """Time-averaged squared closure residual and parameterization defect.

    lhs: the exact gap between the projected center dynamics and the
    reduced vector field, ||<G(y) - G(y_c + Psi(z_c)), e_j*>||^2 summed
    over the critical pair (no finite differencing; the center projection
    of the full field makes the identity exact).  defect: the squared
    physical-space distance of the stable part from its manifold
    prediction.  The empirical ratio stands in for the uncomputable
    constant of the error estimate.
    """
    t, Y = _trajectory_arrays(trajectory)
    if not np.all(np.isfinite(Y)):
        raise ValueError("trajectory contains non-finite states")
    if float(np.max(np.linalg.norm(Y, axis=1))) > 1e6:
        raise ValueError("trajectory is unbounded; the error estimate assumes a bounded tube")
    spectrum = param.spectrum
    V = spectrum.modes
    Z = Y @ spectrum.adjoints.conj()  # z_j = <y, e_j*>
    x1, x2 = Z[:, 0], Z[:, 1]
    mono = np.stack([x1**p * x2**q for p, q in param.monomials], axis=1)
    Psi = mono @ param.table
    Y_graph = Z[:, :2] @ V[:, :2].T + Psi @ V[:, 2:].T

    forms = _RankOneForms(system)
    U = Y @ forms.images.T
    Ug = Y_graph @ forms.images.T.astype(complex)
    scal_y = system.spec.f_eval(U[:, 0], U[:, 1], U[:, 2])
    scal_g = system.spec.f_eval(Ug[:, 0], Ug[:, 1], Ug[:, 2])
    gains12 = np.array(
        [
            pairing(system.nu, spectrum.adjoints[:, 0]),
            pairing(system.nu, spectrum.adjoints[:, 1]),
        ]
    )
    lhs_t = np.abs(scal_y - scal_g) ** 2 * float(np.sum(np.abs(gains12) ** 2))
    defect_t = np.sum(np.abs((Z[:, 2:] - Psi) @ V[:, 2:].T) ** 2, axis=1)
    return ModelErrorReport(
        lhs=_time_average(t, lhs_t), defect=_time_average(t, defect_t)
    )


def defect_ratio(system: GkSystem, param: ManifoldParam, states) -> float:
    """Relative parameterization defect ||z_s - Psi(z_c)||^2 / ||z_s||^2.

    ``states`` are GK coordinate samples (rows), e.g. a settled cycle over
    one or more periods; norms are taken on the eigen-basis coordinate
    vectors and averaged over the samples before the ratio is formed.
    """
    Y = np.asarray(states)
    if Y.ndim == 1:
        Y = Y[None, :]
    spectrum = param.spectrum
    Z = Y @ spectrum.adjoints.conj()
    x1, x2 = Z[:, 0], Z[:, 1]
    mono = np.stack([x1**p * x2**q for p, q in param.monomials], axis=1)
    Psi = mono @ param.table
    num = np.mean(np.sum(np.abs(Z[:, 2:] - Psi) ** 2, axis=1))
    den = np.mean(np.sum(np.abs(Z[:, 2:]) ** 2, axis=1))
    if den == 0.0:
        raise ValueError("states have no stable-mode content to compare against")
    return float(num / den)


def closure_json(reduced: ReducedSystem2D) -> dict:
    """JSON-serializable coefficient dump of the reduced system."""
    return {
        "tau": reduced.tau,
        "N": reduced.spectrum.N,
        "lambda": [[lam.real, lam.imag] for lam in reduced.lam],
        "gain": [[g.real, g.imag] for g in reduced.gain],
        "closure": [
            {"p": int(p), "q": int(q), "re": c.real, "im": c.imag}
            for (p, q), c in zip(reduced.closure_exps, reduced.closure_coeffs)
        ],
        "lift": [
            {"p": int(p), "q": int(q), "re": c.real, "im": c.imag}
            for (p, q), c in zip(reduced.lift_exps, reduced.lift_coeffs)
        ],
    }
