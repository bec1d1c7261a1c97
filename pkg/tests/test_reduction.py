"""Parameterizations, the 2D closure, Lyapunov coefficient, and diagnostics."""

import dataclasses
import json

import numpy as np
import pytest

from gkenso.errors import NumericError, ResonanceError
from gkenso.galerkin import (
    DdeSpec,
    GkSystem,
    assemble_linear,
    integrate_gk,
    suarez_schopf_perturbed,
)
from gkenso.reduction import (
    build_phi2,
    build_psi,
    build_reduced,
    closure_json,
    defect_ratio,
    homological_residual,
    integrate_reduced,
    lift_T_star,
    lyapunov_coefficient,
    lyapunov_perron_phi,
    model_error_diagnostic,
    nonresonance_check,
    reduced_factory,
    reduced_rhs,
    reduced_rhs_real,
)
from gkenso.spectral import SpectralData, eigendecompose, find_tau_c


def resonant_spectrum() -> SpectralData:
    # lambda_3 = 2 lambda_1: the (1,1,3) quadratic denominator vanishes
    w = np.array([-1.0 + 2.0j, -1.0 - 2.0j, -2.0 + 4.0j])
    eye = np.eye(3, dtype=complex)
    return SpectralData(tau=1.0, eigvals=w, modes=eye, adjoints=eye.copy(), m_c=2)


def quadratic_toy_system() -> GkSystem:
    """Three-mode stand-in whose quadratic coefficients are all nonzero."""
    spec = DdeSpec(a=0.0, b=0.0, c=0.0, tau=1.0, nonlin={(2, 0, 0): 1.0})
    exps, coeffs = spec.f_arrays()
    return GkSystem(
        spec=spec,
        N=3,
        A=np.diag([-1.0, -1.0, -2.0]),
        P=np.zeros((3, 3)),
        Q=np.diag([-1.0, -1.0, -2.0]),
        norm_sq=np.ones(3),
        k_minus1=np.ones(3),
        nu=np.ones(3),
        f_exps=exps,
        f_coeffs=coeffs,
    )


def random_pairs(count, rng):
    X = rng.normal(size=(count, 2)) + 1j * rng.normal(size=(count, 2))
    X /= np.maximum(1.0, np.linalg.norm(X, axis=1))[:, None]
    return X


def on_graph_state(reduced, z):
    y = reduced.lift_state(z, np.conj(z))
    assert np.max(np.abs(y.imag)) <= 1e-12 * max(1.0, np.max(np.abs(y.real)))
    return y.real


class TestNonresonance:
    def test_quadratic_scan_passes(self, sys17, spectrum17):
        report = nonresonance_check(spectrum17, 2, sys17)
        assert report.ok
        assert report.min_margin > 0.0
        assert report.resonant == ()

    def test_cubic_scan_passes(self, sys17, spectrum17):
        report = nonresonance_check(spectrum17, 3, sys17)
        assert report.ok and report.min_margin > 0.0

    def test_synthetic_resonance_detected(self):
        report = nonresonance_check(resonant_spectrum(), 2)
        assert not report.ok
        assert (1, 1, 3) in report.resonant

    def test_resonance_aborts_construction(self):
        with pytest.raises(ResonanceError):
            build_phi2(quadratic_toy_system(), resonant_spectrum())

    def test_unsupported_order(self, spectrum17):
        with pytest.raises(ValueError):
            nonresonance_check(spectrum17, 4)


class TestParameterizations:
    def test_vanish_at_origin(self, sys17, spectrum17):
        for param in (build_phi2(sys17, spectrum17), build_psi(sys17, spectrum17)):
            assert np.all(param.stable_values(0.0, 0.0) == 0.0)

    def test_monomial_degrees(self, sys17, spectrum17):
        phi2 = build_phi2(sys17, spectrum17)
        assert all(p + q == 2 for p, q in phi2.monomials)
        assert not phi2.has_cubic
        psi = build_psi(sys17, spectrum17)
        assert {p + q for p, q in psi.monomials} == {2, 3}
        assert psi.has_cubic

    def test_quadratic_homological_identity(self, sys17, spectrum17):
        param = build_phi2(sys17, spectrum17)
        rng = np.random.default_rng(11)
        worst = max(
            homological_residual(sys17, param, X) for X in random_pairs(100, rng)
        )
        assert worst <= 1e-10

    def test_cubic_homological_identity(self, sys17, spectrum17):
        param = build_psi(sys17, spectrum17)
        rng = np.random.default_rng(12)
        worst = max(
            homological_residual(sys17, param, X) for X in random_pairs(100, rng)
        )
        assert worst <= 1e-10

    def test_backward_integral_consistency(self, sys17, spectrum17):
        # node count chosen so the trapezoid error of the oscillatory
        # integrand sits safely below the agreement bound
        param = build_phi2(sys17, spectrum17)
        rng = np.random.default_rng(13)
        X = random_pairs(1, rng)[0]
        quad = lyapunov_perron_phi(sys17, spectrum17, X, nodes=60_000)
        direct = param.stable_values(X[0], X[1])
        assert np.max(np.abs(quad - direct)) <= 1e-6

    def test_cycle_defect_magnitude(self, sys19, reduced19, gk_cycle19):
        traj, period = gk_cycle19
        ratio = defect_ratio(sys19, reduced19.param, traj.y)
        assert 1.5e-2 <= ratio <= 4e-2

    def test_defect_needs_stable_content(self, sys19, reduced19):
        with pytest.raises(ValueError):
            defect_ratio(sys19, reduced19.param, np.zeros(6))


class TestReducedField:
    def test_origin_is_equilibrium(self, reduced17):
        assert np.all(reduced_rhs(reduced17, (0.0, 0.0)) == 0.0)

    def test_conjugate_symmetry(self, reduced17):
        rng = np.random.default_rng(21)
        for _ in range(10):
            z = complex(rng.normal(), rng.normal())
            out = reduced_rhs(reduced17, (z, np.conj(z)))
            assert out[1] == pytest.approx(np.conj(out[0]), abs=1e-12)

    def test_linearization_matches_spectrum(self, reduced17):
        h = 1e-7
        J = np.empty((2, 2))
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            J[:, j] = (
                reduced_rhs_real(reduced17, e) - reduced_rhs_real(reduced17, -e)
            ) / (2 * h)
        eigs = np.linalg.eigvals(J)
        lam1 = reduced17.lambda1
        got = eigs[np.argsort(eigs.imag)]
        want = np.sort_complex(np.array([lam1, np.conj(lam1)]))
        assert got == pytest.approx(want, abs=1e-6)

    def test_closure_degree_cap(self, reduced17):
        degrees = reduced17.closure_exps.sum(axis=1)
        assert degrees.min() >= 2 and degrees.max() <= 9

    def test_factory_memoizes(self):
        make = reduced_factory(0.75, 6)
        assert make(1.9) is make(1.9)
        assert make(1.9) is not make(1.8)


class TestReducedIntegration:
    def test_bounded_run(self, reduced19):
        path = integrate_reduced(reduced19, 1.0 + 0.0j, 300.0, 1e-3, stride=20)
        assert not path.blown
        assert path.t.size == 15001
        assert np.all(np.abs(path.z) < 10.0)

    def test_blowup_truncates(self, reduced17):
        path = integrate_reduced(reduced17, 2.0 + 0.0j, 50.0, 1e-3, blowup=1e4)
        assert path.blown
        assert path.t.size < 100
        assert path.t.size == path.z.size

    def test_conjugate_slice_views(self, reduced19):
        path = integrate_reduced(reduced19, 0.3 + 0.1j, 5.0, 1e-3, stride=100)
        assert np.array_equal(path.x2, np.conj(path.x1))


class TestLyapunovCoefficient:
    def test_positive_at_critical_delay(self, critical6):
        system, spectrum = critical6
        l1 = lyapunov_coefficient(system, spectrum)
        assert l1 == pytest.approx(2.2246906, abs=1e-4)

    def test_rejects_noncritical_spectrum(self, sys17, spectrum17):
        with pytest.raises(ValueError):
            lyapunov_coefficient(sys17, spectrum17)

    @pytest.mark.parametrize("c", [2.0, 1.0 + 1.0j])
    def test_rescaling_law(self, critical6, c):
        # e1 -> c e1 with adjoints re-normalized scales l1 by |c|^2 exactly
        system, spectrum = critical6
        base = lyapunov_coefficient(system, spectrum)
        M = spectrum.modes.copy()
        A = spectrum.adjoints.copy()
        M[:, 0] *= c
        M[:, 1] *= np.conj(c)
        A[:, 0] /= np.conj(c)
        A[:, 1] /= c
        rescaled = dataclasses.replace(spectrum, modes=M, adjoints=A)
        l1 = lyapunov_coefficient(system, rescaled)
        assert l1 == pytest.approx(abs(c) ** 2 * base, rel=1e-10)


class TestLifting:
    def test_zero_path(self, reduced17):
        out = lift_T_star(reduced17, np.zeros(5, dtype=complex))
        assert np.all(out == 0.0)

    def test_pair_input_matches_complex_input(self, reduced19):
        path = integrate_reduced(reduced19, 0.4 + 0.0j, 5.0, 1e-3, stride=50)
        pairs = np.stack([path.z, np.conj(path.z)], axis=1)
        assert np.array_equal(lift_T_star(reduced19, path.z),
                              lift_T_star(reduced19, pairs))

    def test_broken_conjugacy_rejected(self, reduced19):
        z = np.array([0.3 + 0.2j, 0.1 + 0.1j])
        pairs = np.stack([z, 2.0 * z], axis=1)
        with pytest.raises(NumericError):
            lift_T_star(reduced19, pairs)


class TestModelError:
    def test_on_graph_states_have_zero_defect(self, sys19, reduced19):
        zs = [0.05 + 0.02j, -0.03 + 0.04j, 0.02 - 0.06j]
        Y = np.array([on_graph_state(reduced19, z) for z in zs])
        report = model_error_diagnostic(
            sys19, reduced19.param, (np.arange(3.0), Y)
        )
        assert report.defect <= 1e-12
        assert report.lhs <= 1e-12

    def test_window_stability_on_cycle(self, sys19, reduced19, gk_cycle19):
        # integer-period windows: doubling the span barely moves the averages
        traj, period = gk_cycle19
        dt = traj.t[1] - traj.t[0]
        n2 = round(2 * period / dt)
        rep2 = model_error_diagnostic(
            sys19, reduced19.param, (traj.t[: n2 + 1], traj.y[: n2 + 1])
        )
        rep4 = model_error_diagnostic(sys19, reduced19.param, traj)
        assert abs(rep4.lhs - rep2.lhs) <= 0.05 * rep2.lhs
        assert abs(rep4.defect - rep2.defect) <= 0.05 * rep2.defect
        assert 1.3 <= rep4.ratio <= 1.7

    def test_unbounded_trajectory_rejected(self, sys19, reduced19):
        Y = np.full((3, 6), 2e6)
        with pytest.raises(ValueError):
            model_error_diagnostic(sys19, reduced19.param, (np.arange(3.0), Y))

    def test_nonfinite_trajectory_rejected(self, sys19, reduced19):
        Y = np.zeros((3, 6))
        Y[1, 2] = np.nan
        with pytest.raises(ValueError):
            model_error_diagnostic(sys19, reduced19.param, (np.arange(3.0), Y))


class TestApproximationOrder:
    def test_separation_grows_superquadratically(self, sys17, reduced17):
        # matched on-graph starts: the reduced/GK gap must shrink faster
        # than the square of the initial amplitude
        amps = [1e-1, 1e-2, 1e-3]
        gaps = []
        for amp in amps:
            z0 = complex(amp)
            y0 = on_graph_state(reduced17, z0)
            gk = integrate_gk(sys17, y0, 5.0, 1e-3)
            path = integrate_reduced(reduced17, z0, 5.0, 1e-3)
            lifted = lift_T_star(reduced17, path.z)
            gaps.append(float(np.max(np.abs(gk.x - lifted))))
        slope = np.polyfit(np.log(amps), np.log(gaps), 1)[0]
        assert slope > 2.5


class TestClosureDump:
    def test_round_trips_through_json(self, reduced17):
        blob = json.dumps(closure_json(reduced17))
        data = json.loads(blob)
        assert data["tau"] == 1.7
        assert data["N"] == 6
        assert data["lambda"][0][0] == pytest.approx(reduced17.lambda1.real)
        assert len(data["closure"]) == reduced17.closure_coeffs.size
        assert {"p", "q", "re", "im"} <= set(data["closure"][0])
        assert len(data["lift"]) == reduced17.lift_coeffs.size
