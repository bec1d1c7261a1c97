"""Session-scoped fixtures for objects that are expensive to rebuild."""

import numpy as np
import pytest

from gkenso.dde import extract_periodic_orbit, stable_cycle_reference
from gkenso.galerkin import (
    assemble_linear,
    gk_equilibrium,
    integrate_gk,
    suarez_schopf_perturbed,
)
from gkenso.reduction import build_reduced
from gkenso.spectral import eigendecompose, find_tau_c


@pytest.fixture(scope="session")
def sys17():
    return assemble_linear(suarez_schopf_perturbed(0.75, 1.7), 6)


@pytest.fixture(scope="session")
def spectrum17(sys17):
    return eigendecompose(sys17)


@pytest.fixture(scope="session")
def reduced17(sys17, spectrum17):
    return build_reduced(sys17, spectrum17)


@pytest.fixture(scope="session")
def sys19():
    return assemble_linear(suarez_schopf_perturbed(0.75, 1.9), 6)


@pytest.fixture(scope="session")
def spectrum19(sys19):
    return eigendecompose(sys19)


@pytest.fixture(scope="session")
def reduced19(sys19, spectrum19):
    return build_reduced(sys19, spectrum19)


@pytest.fixture(scope="session")
def critical6():
    """System and spectrum at the N = 6 critical delay (Hopf pair on the axis)."""
    tau_c = find_tau_c(0.75, 6)
    system = assemble_linear(suarez_schopf_perturbed(0.75, tau_c), 6)
    return system, eigendecompose(system)


@pytest.fixture(scope="session")
def dde_ref19():
    """Settled stable-cycle reference of the delay model at tau = 1.9.

    Returns (reference Orbit, starting HistoryTail, period) on the grid
    dt = tau / 2**13, the step all on-cycle comparisons share.
    """
    spec = suarez_schopf_perturbed(0.75, 1.9)
    return stable_cycle_reference(spec, 1.9 / 2**13, transient=800.0)


@pytest.fixture(scope="session")
def gk_cycle19(sys19):
    """Settled stable-cycle trajectory at tau = 1.9 plus its period.

    The returned window is an integer number of periods so that time
    averages along it do not depend on where the window ends.
    """
    dt = 1e-3
    settle = integrate_gk(sys19, gk_equilibrium(sys19, 1.0), 600.0, dt, stride=50)
    orbit = extract_periodic_orbit(
        (settle.t, settle.x), transient_skip=400.0, closure_tol=1e-4
    )
    t_end = round(4 * orbit.period / dt) * dt
    traj = integrate_gk(sys19, settle.y[-1], t_end, dt, stride=5)
    return traj, orbit.period
