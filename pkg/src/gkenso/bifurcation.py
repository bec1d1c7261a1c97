"""Limit cycles, UPOs, branch continuation, and critical delays of the reduced system.

UPOs are computed the direct way: they attract under time reversal in the
2D reduced system, so a backward integration from a family-selecting seed
settles onto them without any shooting machinery.  Cycle convergence is
declared when successive returns to a Poincare half-line agree within
1e-8; returns are refined through cubic Hermite interpolation of the
stored fine-step samples, so measured periods are accurate to O(dt^4).

Families are verified, not assumed: the settled loop is classified by its
winding numbers around the three reduced equilibria (the spiral center at
the origin, the saddle, and the far center), and a mismatch with the
requested family is reported as absence of that family's orbit.
"""

from __future__ import annotations

import csv
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dde import Orbit
from .errors import BracketError, NoOrbitError, NumericError
from .galerkin import assemble_linear, suarez_schopf_perturbed
from .reduction import (
    ReducedSystem2D,
    integrate_reduced,
    lift_T_star,
    lyapunov_coefficient,
)
from .spectral import eigendecompose, find_tau_c, tau_c_analytic

__all__ = [
    "BranchPoint",
    "HopfPoint",
    "FAMILIES",
    "reduced_equilibria",
    "winding_number",
    "compute_stable_cycle",
    "compute_upo",
    "continue_branch",
    "detect_hopf",
    "hopf_type",
    "detect_homoclinic",
    "detect_sno",
    "emit_diagram",
    "parse_diagram",
]

FAMILIES = ("upo_inner_plus", "upo_inner_minus", "upo_outer", "stable_cycle")

# Family seeds in reduced coordinates, documented tunables chosen from the
# diagram geometry.  Inner loops are seeded just off the focus they
# enclose: a backward trajectory started inside an invariant loop cannot
# cross it, while one started outside may wind onto the mirror loop
# instead.  The outer loop is reached from anywhere in the interior, the
# attracting cycle from outside it.
SEED_INNER = 0.02
SEED_INTERIOR = 0.1
SEED_STABLE = 1.0

DT_REDUCED = 2e-3
TRANSIENT = 200.0
CLOSURE_TOL = 1e-8
PERIOD_CAP = 500.0
MAX_SETTLE_TIME = 8000.0


def _canonical_family(family: str) -> str:
    name = family.strip().lower()
    if name.startswith("upo_"):
        name = name[4:]
    if name in ("stable", "stable_cycle"):
        return "stable_cycle"
    if name in ("inner_plus", "inner_minus", "outer"):
        return "upo_" + name
    raise ValueError(f"unknown orbit family {family!r}; expected one of {FAMILIES}")


@dataclass(frozen=True)
class BranchPoint:
    tau: float
    amplitude: float
    period: float
    family: str

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family tag {self.family!r}")
        if self.amplitude < 0.0 or self.period <= 0.0:
            raise ValueError("amplitude must be nonnegative and period positive")


# ---------------------------------------------------------------------------
# equilibria and loop classification


def _newton_equilibrium(reduced: ReducedSystem2D, z0: complex) -> complex:
    z = complex(z0)
    for _ in range(60):
        f = reduced.rhs((z, np.conj(z)))[0]
        if abs(f) < 1e-12:
            return z
        h = 1e-7 * max(1.0, abs(z))
        f_re = (reduced.rhs((z + h, np.conj(z + h)))[0] - f) / h
        f_im = (reduced.rhs((z + 1j * h, np.conj(z + 1j * h)))[0] - f) / h
        J = np.array([[f_re.real, f_im.real], [f_re.imag, f_im.imag]])
        try:
            step = np.linalg.solve(J, np.array([f.real, f.imag]))
        except np.linalg.LinAlgError as exc:
            raise NumericError(f"singular Jacobian while refining equilibrium near {z0}") from exc
        z = z - (step[0] + 1j * step[1])
    raise NumericError(f"equilibrium refinement did not converge from {z0}")


def reduced_equilibria(reduced: ReducedSystem2D) -> dict[str, complex]:
    """Newton-refined equilibria of the reduced system.

    The origin is exact by construction.  The other two are seeded from
    the center projections of the constant physical states (saddle and far
    center of the cubic), which lie close to but not exactly on the
    manifold.
    """
    t_plus = np.sqrt(1.0 + reduced.system.spec.b)  # delayed coefficient b = -alpha
    a00 = np.conj(reduced.spectrum.adjoints[0, 0])
    return {
        "origin": 0.0 + 0.0j,
        "saddle": _newton_equilibrium(reduced, -t_plus * a00),
        "far": _newton_equilibrium(reduced, -2.0 * t_plus * a00),
    }


def winding_number(loop: np.ndarray, center: complex) -> int:
    """Signed turns of a sampled closed curve around a point."""
    rel = np.asarray(loop, dtype=complex) - center
    if np.min(np.abs(rel)) == 0.0:
        raise ValueError("loop passes through the center")
    phase = np.unwrap(np.angle(rel))
    total = phase[-1] - phase[0] + np.angle(rel[0] / rel[-1])
    return int(round(total / (2.0 * np.pi)))


def _classify_loop(reduced: ReducedSystem2D, loop: np.ndarray) -> str:
    eqs = reduced_equilibria(reduced)
    w_o = winding_number(loop, eqs["origin"])
    w_s = winding_number(loop, eqs["saddle"])
    w_f = winding_number(loop, eqs["far"])
    if abs(w_o) == 1 and w_s == 0 and w_f == 0:
        return "inner_plus"
    if w_o == 0 and w_s == 0 and abs(w_f) == 1:
        return "inner_minus"
    if abs(w_o) == 1 and abs(w_s) == 1 and abs(w_f) == 1:
        return "outer"
    return f"unclassified({w_o},{w_s},{w_f})"


# ---------------------------------------------------------------------------
# cycle settling by Poincare returns


@dataclass(frozen=True)
class _Cycle:
    period: float
    t: np.ndarray
    z: np.ndarray
    anchor: complex  # converged point on the section, for warm starts


def _hermite_z(z0, z1, d0, d1, dt, s):
    u = s / dt
    h00 = (1.0 + 2.0 * u) * (1.0 - u) ** 2
    h10 = u * (1.0 - u) ** 2
    h01 = u * u * (3.0 - 2.0 * u)
    h11 = u * u * (u - 1.0)
    return h00 * z0 + h10 * dt * d0 + h01 * z1 + h11 * dt * d1


def _refine_hit(reduced, direction, z0, z1, dt, c, u_dir):
    """Locate the section crossing inside one fine step by Hermite bisection."""

    def deriv(z):
        return direction * reduced.rhs((z, np.conj(z)))[0]

    d0, d1 = deriv(z0), deriv(z1)

    def w_of(s):
        z = _hermite_z(z0, z1, d0, d1, dt, s)
        return (np.conj(u_dir) * (z - c)).imag, z

    lo, hi = 0.0, dt
    w_lo, _ = w_of(lo)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        w_mid, z_mid = w_of(mid)
        if (w_mid > 0.0) == (w_lo > 0.0):
            lo, w_lo = mid, w_mid
        else:
            hi = mid
    s = 0.5 * (lo + hi)
    _, z_hit = w_of(s)
    return s, z_hit


def _section_returns(reduced, direction, path, c, u_dir, r_min):
    """Refined (time, state) pairs where the path crosses the half-line c + R+ u_dir."""
    rel = (path.z - c) * np.conj(u_dir)
    w = rel.imag
    r = rel.real
    sign_change = (w[:-1] <= 0.0) != (w[1:] <= 0.0)
    idx = np.nonzero(sign_change & (r[:-1] > r_min))[0]
    dt = path.t[1] - path.t[0] if path.t.size > 1 else 0.0
    hits = []
    for i in idx:
        s, z_hit = _refine_hit(reduced, direction, path.z[i], path.z[i + 1], dt, c, u_dir)
        hits.append((path.t[i] + s, z_hit))
    return hits


def _settle_cycle(
    reduced: ReducedSystem2D,
    seed: complex,
    direction: float,
    dt: float = DT_REDUCED,
    transient: float = TRANSIENT,
    closure_tol: float = CLOSURE_TOL,
    period_cap: float = PERIOD_CAP,
    max_time: float = MAX_SETTLE_TIME,
) -> _Cycle:
    coarse = max(1, int(round(0.05 / dt)))
    path = integrate_reduced(reduced, seed, transient, dt, stride=coarse, direction=direction)
    if path.blown:
        raise NoOrbitError("trajectory escaped during the transient")
    z = path.z[-1]
    elapsed = transient
    window = 80.0
    anchor = None
    period = None

    while elapsed < max_time:
        window = min(window, max_time - elapsed)
        path = integrate_reduced(reduced, z, window, dt, stride=1, direction=direction)
        if path.blown:
            raise NoOrbitError("trajectory escaped; no orbit of this kind here")
        zs = path.z
        c = zs.mean()
        scale = float(np.max(np.abs(zs - c)))
        # a decaying spiral can pass the closure test before it reaches the
        # focus, so the degeneracy floor sits well above the closure scale
        if scale < 1e-5 * max(1.0, abs(c)):
            raise NoOrbitError("trajectory converged to an equilibrium; no cycle")
        u_dir = (zs[-1] - c) / abs(zs[-1] - c)
        hits = _section_returns(reduced, direction, path, c, u_dir, 0.25 * scale)
        if len(hits) >= 2:
            (t_a, z_a), (t_b, z_b) = hits[-2], hits[-1]
            period = t_b - t_a
            if period > period_cap:
                raise NoOrbitError(f"return time {period:.1f} exceeds the period cap {period_cap}")
            if abs(z_b - z_a) <= closure_tol * max(1.0, scale):
                anchor = z_b
                break
            z = z_b
            window = max(80.0, 3.0 * period)
        else:
            if window >= 2.0 * period_cap:
                raise NoOrbitError(
                    f"no two section returns within {window:.0f} time units; "
                    f"period exceeds the cap {period_cap}"
                )
            z = zs[-1]
            window = min(2.0 * window, 2.5 * period_cap)
        elapsed += window
    if anchor is None:
        raise NoOrbitError("cycle did not close to tolerance within the time budget")

    n_steps = max(8, int(round(period / dt)))
    stride = max(1, n_steps // 2000)
    final = integrate_reduced(
        reduced, anchor, n_steps * dt, dt, stride=stride, direction=direction
    )
    if final.blown:
        raise NoOrbitError("cycle re-integration escaped unexpectedly")
    loop_scale = float(np.max(np.abs(final.z - final.z.mean())))
    if loop_scale < 1e-5 * max(1.0, abs(anchor)):
        raise NoOrbitError("trajectory converged to an equilibrium; no cycle")
    return _Cycle(period=float(period), t=final.t, z=final.z, anchor=anchor)


def _lifted_orbit(reduced, cycle: _Cycle, stability: str) -> Orbit:
    values = lift_T_star(reduced, cycle.z)
    return Orbit(
        period=cycle.period,
        t=cycle.t,
        value=values,
        amplitude=float(values.max() - values.min()),
        stability=stability,
    )


def _check_tau(reduced: ReducedSystem2D, tau: float | None):
    if tau is not None and abs(tau - reduced.tau) > 1e-12:
        raise ValueError(
            f"reduced system was built at tau = {reduced.tau}, not {tau}; "
            "rebuild it at the requested delay"
        )


def compute_stable_cycle(
    reduced: ReducedSystem2D,
    tau: float | None = None,
    seed: complex | None = None,
    **settle_kwargs,
) -> Orbit:
    """Attracting cycle by forward integration from an exterior seed."""
    _check_tau(reduced, tau)
    if seed is None:
        seed = complex(SEED_STABLE)
    cycle = _settle_cycle(reduced, seed, direction=1.0, **settle_kwargs)
    return _lifted_orbit(reduced, cycle, "stable")


def _default_upo_seed(reduced: ReducedSystem2D, short: str) -> complex:
    if short == "inner_plus":
        return complex(SEED_INNER)
    eqs = reduced_equilibria(reduced)
    far = eqs["far"]
    if short == "inner_minus":
        # mirror image of the inner_plus seed through the cubic's midpoint
        return far - complex(SEED_INNER)
    # below the homoclinic delay the backward flow from anywhere in the
    # interior (repelled by the foci) wraps onto the outer loop; seeding
    # outside would escape in reverse time
    return complex(SEED_INTERIOR)


def _settle_family(reduced, name, seed, **settle_kwargs):
    """Settle one orbit of a canonical family; returns (cycle, orbit)."""
    if name == "stable_cycle":
        z0 = seed if seed is not None else complex(SEED_STABLE)
        cycle = _settle_cycle(reduced, z0, direction=1.0, **settle_kwargs)
        return cycle, _lifted_orbit(reduced, cycle, "stable")
    short = name[4:]
    if seed is None:
        seed = _default_upo_seed(reduced, short)
    cycle = _settle_cycle(reduced, seed, direction=-1.0, **settle_kwargs)
    observed = _classify_loop(reduced, cycle.z)
    if observed != short:
        raise NoOrbitError(
            f"no {short} UPO at tau = {reduced.tau:.6f}: backward integration "
            f"settled on a {observed} loop"
        )
    return cycle, _lifted_orbit(reduced, cycle, "unstable")


def compute_upo(
    reduced: ReducedSystem2D,
    tau: float | None = None,
    family: str = "inner_plus",
    seed: complex | None = None,
    **settle_kwargs,
) -> Orbit:
    """UPO of the requested family by backward integration, winding-verified."""
    _check_tau(reduced, tau)
    name = _canonical_family(family)
    if name == "stable_cycle":
        raise ValueError("use compute_stable_cycle for the attracting branch")
    return _settle_family(reduced, name, seed, **settle_kwargs)[1]


def continue_branch(
    factory,
    tau_range: tuple[float, float],
    family: str,
    dtau: float,
    workers: int | None = None,
    **orbit_kwargs,
) -> list[BranchPoint]:
    """Sweep a family over a delay range, recording (tau, amplitude, period).

    The default sweep walks downward from the high end warm-starting each
    orbit from the previous anchor (every family is easiest to settle at
    its upper delay limit); branch termination is recorded by stopping,
    never raised.  With ``workers`` set, points are instead computed
    independently from cold seeds in a thread pool and failures are simply
    omitted.
    """
    if dtau <= 0.0:
        raise ValueError("dtau must be positive")
    lo, hi = (float(v) for v in tau_range)
    if not lo < hi:
        raise ValueError("tau_range must satisfy lo < hi")
    name = _canonical_family(family)
    n = int(np.floor((hi - lo) / dtau + 1e-9)) + 1
    taus = hi - dtau * np.arange(n)

    points: list[BranchPoint] = []
    if workers:
        def solo(tau):
            try:
                _, orbit = _settle_family(factory(tau), name, None, **orbit_kwargs)
            except (NoOrbitError, NumericError):
                return None
            return BranchPoint(float(tau), orbit.amplitude, orbit.period, name)

        with ThreadPoolExecutor(max_workers=workers) as pool:
            for pt in pool.map(solo, taus):
                if pt is not None:
                    points.append(pt)
    else:
        seed = None
        for tau in taus:
            try:
                cycle, orbit = _settle_family(factory(tau), name, seed, **orbit_kwargs)
            except (NoOrbitError, NumericError):
                break
            points.append(BranchPoint(float(tau), orbit.amplitude, orbit.period, name))
            seed = cycle.anchor
    points.sort(key=lambda p: p.tau)
    return points


# ---------------------------------------------------------------------------
# critical-delay detectors


@dataclass(frozen=True)
class HopfPoint:
    tau_c: float
    l1: float
    kind: str  # subcritical | supercritical | degenerate


def hopf_type(l1: float) -> str:
    if abs(l1) < 1e-6:
        return "degenerate"
    return "subcritical" if l1 > 0.0 else "supercritical"


def detect_hopf(alpha: float, N: int = 12, bracket: tuple[float, float] | None = None) -> HopfPoint:
    """Critical delay plus Hopf type from the sign of the Lyapunov coefficient."""
    if bracket is None:
        if 0.5 < alpha < 1.0:
            guess = tau_c_analytic(alpha)
            bracket = (0.85 * guess, 1.15 * guess)
        else:
            bracket = (1.3, 2.5)
    tau_c = find_tau_c(alpha, N, bracket)
    system = assemble_linear(suarez_schopf_perturbed(alpha, tau_c), N)
    l1 = lyapunov_coefficient(system, eigendecompose(system))
    return HopfPoint(tau_c=tau_c, l1=l1, kind=hopf_type(l1))


def _bisect_existence(predicate, bracket, tol, what):
    lo, hi = (float(v) for v in bracket)
    if not lo < hi:
        raise BracketError("bracket must satisfy lo < hi")
    ok_lo = predicate(lo)
    ok_hi = predicate(hi)
    if ok_lo or not ok_hi:
        raise BracketError(
            f"{what} is not bracketed: existence at lo = {ok_lo}, at hi = {ok_hi}"
        )
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if predicate(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def detect_homoclinic(
    factory,
    bracket: tuple[float, float] = (1.55, 1.65),
    tol: float = 1e-4,
    period_cap: float = PERIOD_CAP,
) -> float:
    """Delay where the inner UPO pair terminates (saddle loop, period divergence).

    Bisection on existence of an inner UPO: backward flow from an interior
    point lands on one of the two inner loops above the homoclinic delay
    (which of the pair depends on the basin weaving, so either counts) and
    on the outer loop or escape below it, so the predicate flips cleanly.
    """

    def exists(tau: float) -> bool:
        reduced = factory(tau)
        try:
            cycle = _settle_cycle(
                reduced, complex(SEED_INTERIOR), direction=-1.0, period_cap=period_cap
            )
        except (NoOrbitError, NumericError):
            return False
        return _classify_loop(reduced, cycle.z).startswith("inner")

    return _bisect_existence(exists, bracket, tol, "the homoclinic delay")


def detect_sno(
    factory,
    bracket: tuple[float, float] = (1.50, 1.60),
    tol: float = 1e-4,
) -> float:
    """Fold of periodic orbits: bisection on existence of the attracting cycle."""

    def exists(tau: float) -> bool:
        try:
            compute_stable_cycle(factory(tau))
        except (NoOrbitError, NumericError):
            return False
        return True

    return _bisect_existence(exists, bracket, tol, "the fold of cycles")


# ---------------------------------------------------------------------------
# diagram serialization


def _flatten(branches):
    for item in branches:
        if isinstance(item, BranchPoint):
            yield item
        else:
            yield from item


def emit_diagram(branches, path) -> None:
    """CSV `family,tau,amplitude,period` sorted by (family, tau), written atomically."""
    points = sorted(_flatten(branches), key=lambda p: (p.family, p.tau))
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["family", "tau", "amplitude", "period"])
            for p in points:
                writer.writerow([p.family, repr(p.tau), repr(p.amplitude), repr(p.period)])
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def parse_diagram(path) -> list[BranchPoint]:
    points = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            points.append(
                BranchPoint(
                    tau=float(row["tau"]),
                    amplitude=float(row["amplitude"]),
                    period=float(row["period"]),
                    family=row["family"],
                )
            )
    return points
