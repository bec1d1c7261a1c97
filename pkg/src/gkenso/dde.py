"""Reference solver for scalar delay equations and periodic-orbit tooling.

This is the ground truth the Galerkin approximations are measured against:
a fixed-step method-of-steps RK4 whose delayed values come from cubic
Hermite interpolation on the stored past (with exact grid derivatives, so
the interpolation error stays below the RK4 error).  The step size must
divide the delay so the lagged grid point is exact.

Also here: steady states of the delayed-oscillator ENSO model, extraction
of periodic orbits from scalar time series, one-period sup-norm errors,
and the standard protocol measuring the Galerkin truncation error on the
stable cycle (a DDE reference segment is computed once and the Galerkin
run starts from its projection).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from . import koornwinder as kw
from ._kernels import dde_euler, dde_rk4
from .errors import BlowupError, NoPeriodicityError
from .galerkin import DdeSpec, assemble_linear, integrate_gk, suarez_schopf_perturbed

__all__ = [
    "HistoryTail",
    "DdeSeries",
    "Orbit",
    "const_history",
    "integrate_dde",
    "steady_states",
    "extract_periodic_orbit",
    "linf_cycle_error",
    "lagged_coords",
    "stable_cycle_reference",
    "gk_truncation_errors",
]


def const_history(value: float):
    """Constant history segment as a vectorized callable."""

    def h(theta):
        return np.full_like(np.asarray(theta, dtype=float), float(value))

    return h


@dataclass(frozen=True)
class HistoryTail:
    """History segment on the integrator grid: values and derivatives on
    [-tau, 0] with spacing dt (tau = (len(x) - 1) * dt)."""

    dt: float
    x: np.ndarray
    xd: np.ndarray

    @property
    def tau(self) -> float:
        return (len(self.x) - 1) * self.dt

    def interpolant(self):
        """Cubic Hermite interpolant on [-tau, 0]."""
        t = np.linspace(-self.tau, 0.0, len(self.x))
        return CubicHermiteSpline(t, self.x, self.xd)


@dataclass(frozen=True)
class DdeSeries:
    """Sampled solution for t >= 0 plus the full-resolution final history."""

    t: np.ndarray
    x: np.ndarray
    tail: HistoryTail

    @property
    def dt(self) -> float:
        return self.t[1] - self.t[0]


def _lag_steps(tau: float, dt: float) -> int:
    n_lag = int(round(tau / dt))
    if n_lag < 2:
        raise ValueError("dt too large: the delay must span at least two steps")
    if abs(n_lag * dt - tau) > 1e-9 * tau:
        raise ValueError(
            f"dt = {dt!r} does not divide tau = {tau!r}; "
            "choose dt = tau / k for integer k"
        )
    return n_lag


def _history_grid(history, tau: float, dt: float, n_lag: int):
    if isinstance(history, HistoryTail):
        if len(history.x) != n_lag + 1 or abs(history.dt - dt) > 1e-12 * dt:
            raise ValueError("history tail grid does not match the requested dt")
        return history.x.copy(), history.xd.copy()
    if callable(history):
        fn, endpoint = history, None
    else:
        fn, endpoint = history
    theta = np.linspace(-tau, 0.0, n_lag + 1)
    x = np.asarray(fn(theta), dtype=float).copy()
    if x.shape != theta.shape:
        raise ValueError("history callable must be vectorized over theta")
    if endpoint is not None:
        x[-1] = float(endpoint)
    xd = np.gradient(x, dt, edge_order=2)
    return x, xd


def integrate_dde(
    spec: DdeSpec,
    history,
    t_end: float,
    dt: float,
    stride: int = 1,
    method: str = "rk4",
) -> DdeSeries:
    """Method-of-steps integration from a history on [-tau, 0].

    ``history`` is a callable, a (callable, endpoint) pair, or a
    HistoryTail from a previous run with the same dt (exact continuation).
    Samples every ``stride`` steps; the returned series always carries the
    final history segment at full resolution.  ``method`` is "rk4"
    (default) or first-order "euler" for error-floor studies.
    """
    if dt <= 0 or t_end < dt:
        raise ValueError("need 0 < dt <= t_end")
    stride = int(stride)
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if method not in ("rk4", "euler"):
        raise ValueError(f"unknown method {method!r}; use 'rk4' or 'euler'")
    tau = spec.tau
    n_lag = _lag_steps(tau, dt)
    n_steps = int(round(t_end / dt))
    hx, hxd = _history_grid(history, tau, dt, n_lag)

    x = np.empty(n_lag + 1 + n_steps)
    xd = np.empty_like(x)
    x[: n_lag + 1] = hx
    xd[: n_lag + 1] = hxd
    w0 = float(np.trapezoid(hx, dx=dt)) if spec.c != 0.0 else 0.0
    exps, coeffs = spec.f_arrays()
    kernel = dde_rk4 if method == "rk4" else dde_euler
    status, done = kernel(
        spec.a, spec.b, spec.c, tau, exps, coeffs, dt, n_lag, n_steps, x, xd, w0
    )
    if status != 0:
        raise BlowupError(f"DDE trajectory blew up near t = {done * dt:.6g}", time=done * dt)

    xs = x[n_lag::stride].copy()
    t = np.arange(xs.size) * (dt * stride)
    tail = HistoryTail(dt=dt, x=x[-(n_lag + 1):].copy(), xd=xd[-(n_lag + 1):].copy())
    return DdeSeries(t=t, x=xs, tail=tail)


def steady_states(alpha: float) -> tuple[float, float, float]:
    """Fixed points (0, T+, T-) of the delayed-oscillator ENSO model."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1); the nontrivial states vanish otherwise")
    t_plus = float(np.sqrt(1.0 - alpha))
    return 0.0, t_plus, -t_plus


@dataclass(frozen=True)
class Orbit:
    """One extracted periodic orbit of a scalar signal."""

    period: float
    t: np.ndarray  # relative time over >= one period, starting at 0
    value: np.ndarray
    amplitude: float
    stability: str = "stable"


def _series_arrays(series):
    if isinstance(series, tuple):
        t, x = series
        return np.asarray(t, dtype=float), np.asarray(x, dtype=float)
    return np.asarray(series.t, dtype=float), np.asarray(series.x, dtype=float)


def _refine_crossing(tm, t0, t1, dm, d0, d1):
    # Inverse quadratic interpolation through three samples around the
    # upward crossing (d0 < 0 <= d1); falls back to the secant when the
    # ordinates degenerate, and clamps into the bracketing step.
    denom0 = (dm - d0) * (dm - d1)
    denom1 = (d0 - dm) * (d0 - d1)
    denom2 = (d1 - dm) * (d1 - d0)
    if denom0 == 0.0 or denom1 == 0.0 or denom2 == 0.0:
        t_star = t0 + (t1 - t0) * (-d0) / (d1 - d0)
    else:
        t_star = (
            tm * d0 * d1 / denom0 + t0 * dm * d1 / denom1 + t1 * dm * d0 / denom2
        )
    return min(max(t_star, t0), t1)


def extract_periodic_orbit(
    series,
    transient_skip: float = 50.0,
    closure_tol: float = 1e-6,
    stability: str = "stable",
) -> Orbit:
    """Detect a periodic orbit from upward mean-crossings of the signal.

    Crossing times are refined by quadratic interpolation; the crossing
    intervals must agree to 1% relative spread or NoPeriodicityError is
    raised.  ``closure_tol`` bounds the relative disagreement of successive
    loop extrema (how well the signal has settled onto the orbit).
    """
    t, x = _series_arrays(series)
    keep = t >= t[0] + transient_skip
    if keep.sum() < 8:
        raise NoPeriodicityError("series too short after transient skip")
    t, x = t[keep], x[keep]
    mean = float(x.mean())
    d = x - mean
    up = np.nonzero((d[:-1] < 0.0) & (d[1:] >= 0.0))[0]
    if up.size < 4:
        raise NoPeriodicityError(
            f"no periodicity detected: {up.size} upward mean-crossings (need >= 4)"
        )
    crossings = np.array(
        [
            _refine_crossing(
                t[i - 1] if i >= 1 else t[i],
                t[i],
                t[i + 1],
                d[i - 1] if i >= 1 else d[i],
                d[i],
                d[i + 1],
            )
            for i in up
        ]
    )
    intervals = np.diff(crossings)
    period = float(intervals.mean())
    spread = float(np.ptp(intervals) / period)
    if spread > 0.01:
        raise NoPeriodicityError(
            f"no periodicity detected: crossing intervals vary by {spread:.2%}"
        )

    # closure: successive loop maxima/minima must agree to closure_tol;
    # extrema are refined by a parabola through the three samples around
    # each one, else the sampling bias O((omega*dt)^2) masks convergence
    def _refined_extremum(seg_vals, sign):
        i = int(np.argmax(sign * seg_vals))
        if i == 0 or i == len(seg_vals) - 1:
            return float(seg_vals[i])
        ym, y0, yp = seg_vals[i - 1], seg_vals[i], seg_vals[i + 1]
        denom = ym - 2.0 * y0 + yp
        if denom == 0.0:
            return float(y0)
        return float(y0 - 0.125 * (yp - ym) ** 2 / denom)

    loop_max = []
    loop_min = []
    for k in range(len(crossings) - 1):
        seg = (t >= crossings[k]) & (t < crossings[k + 1])
        if seg.sum() >= 3:
            vals = x[seg]
            loop_max.append(_refined_extremum(vals, 1.0))
            loop_min.append(_refined_extremum(vals, -1.0))
    loop_max, loop_min = np.array(loop_max), np.array(loop_min)
    amplitude = float(loop_max[-1] - loop_min[-1])
    if amplitude <= 0:
        raise NoPeriodicityError("degenerate orbit: zero amplitude")
    drift = max(np.abs(np.diff(loop_max)).max(), np.abs(np.diff(loop_min)).max())
    if drift > closure_tol * amplitude:
        raise NoPeriodicityError(
            f"orbit not closed: loop extrema drift {drift / amplitude:.2e} "
            f"relative (tolerance {closure_tol:.0e})"
        )

    start = crossings[-2]
    window = (t >= start) & (t <= start + period)
    return Orbit(
        period=period,
        t=t[window] - start,
        value=x[window].copy(),
        amplitude=amplitude,
        stability=stability,
    )


def linf_cycle_error(reference: Orbit, approx) -> float:
    """Sup-norm difference over one period, on the reference time grid.

    The approximating series must share the reference's initial phase (the
    projection protocol guarantees this) and cover at least one period.
    """
    t, x = _series_arrays(approx)
    mask = reference.t <= reference.period
    t_ref = reference.t[mask]
    if t[-1] < t_ref[-1] - 1e-9:
        raise ValueError("approximating series does not cover one reference period")
    xi = np.interp(t_ref, t, x)
    return float(np.abs(reference.value[mask] - xi).max())


def lagged_coords(series, lag: float):
    """(x(t), x(t - lag)) pairs for phase portraits of scalar delay systems.

    The lag defaults naturally to the model delay at the call site; the
    choice of (x(t), x(t - tau)) axes is this implementation's convention.
    """
    t, x = _series_arrays(series)
    valid = t >= t[0] + lag
    x_now = x[valid]
    x_lag = np.interp(t[valid] - lag, t, x)
    return x_now, x_lag


def stable_cycle_reference(
    spec: DdeSpec,
    dt_fine: float,
    transient: float = 1500.0,
    coarse_exponent: int = 12,
    polish_periods: float = 8.0,
):
    """Converge onto the stable cycle and return one fine-grid period.

    Runs a coarse transient from the constant history 1, hands the final
    segment to a fine-step polish of a few periods, and finally integrates
    exactly one period at dt_fine.  Returns (reference Orbit on the full
    fine grid, starting HistoryTail, period).
    """
    tau = spec.tau
    dt_c = tau / 2**coarse_exponent
    stride_c = max(1, int(round(0.02 / dt_c)))
    coarse = integrate_dde(spec, const_history(1.0), transient, dt_c, stride=stride_c)
    orbit_c = extract_periodic_orbit(
        coarse, transient_skip=0.7 * transient, closure_tol=1e-3
    )
    period0 = orbit_c.period

    stride_f = max(1, int(round(period0 / 4000 / dt_fine)))
    polish = integrate_dde(
        spec, coarse.tail.interpolant(), polish_periods * period0, dt_fine, stride=stride_f
    )
    orbit_f = extract_periodic_orbit(
        polish, transient_skip=(polish_periods - 4.6) * period0, closure_tol=1e-4
    )
    period = orbit_f.period

    start = polish.tail
    n_period = int(np.ceil(period / dt_fine))
    ref = integrate_dde(spec, start, n_period * dt_fine, dt_fine)
    reference = Orbit(
        period=period,
        t=ref.t,
        value=ref.x,
        amplitude=float(ref.x.max() - ref.x.min()),
        stability="stable",
    )
    return reference, start, period


def gk_truncation_errors(
    alpha: float,
    tau: float,
    Ns,
    dt_fine: float | None = None,
    transient: float = 1500.0,
    method: str = "euler",
) -> dict[int, float]:
    """One-period sup-norm error of the N-dimensional Galerkin system
    against the DDE stable cycle, for each N in ``Ns``.

    The DDE reference is computed once; each Galerkin run starts from the
    projection of the same initial history segment onto its first N basis
    functions and is compared on the common fine grid.  Both sides are
    advanced by the same stepper.  The default is forward Euler: the
    protocol's tiny step (tau / 2**18) only makes sense for a first-order
    scheme, and the error floor such a scheme leaves at larger N is part
    of the published figures this routine reproduces.  Pass "rk4" to
    isolate the pure truncation error instead.
    """
    spec = suarez_schopf_perturbed(alpha, tau)
    dt = tau / 2**18 if dt_fine is None else dt_fine
    reference, start, period = stable_cycle_reference(spec, dt, transient=transient)
    h_start = start.interpolant()
    t_end = reference.t[-1]
    if method != "rk4":
        rerun = integrate_dde(spec, start, t_end, dt, method=method)
        reference = Orbit(
            period=period,
            t=rerun.t,
            value=rerun.x,
            amplitude=float(rerun.x.max() - rerun.x.min()),
            stability="stable",
        )

    errors = {}
    for N in Ns:
        system = assemble_linear(spec, int(N))
        y0 = kw.project_history(h_start, int(N), tau)
        traj = integrate_gk(system, y0, t_end, dt, method=method)
        errors[int(N)] = linf_cycle_error(reference, (traj.t, traj.x))
    return errors
