"""Eigenstructure: ordering, biorthonormality, PES checks, delay roots."""

import numpy as np
import pytest

from gkenso.errors import BracketError, ConditioningError
from gkenso.galerkin import DdeSpec, GkSystem
from gkenso.spectral import (
    characteristic_residual,
    eigen_sweep,
    eigendecompose,
    find_tau_c,
    pairing,
    pes_scan,
    pes_verify,
    tau_c_analytic,
)


def matrix_system(A) -> GkSystem:
    """Wrap a bare matrix so the eigensolver can consume it."""
    A = np.asarray(A, dtype=float)
    N = A.shape[0]
    return GkSystem(
        spec=DdeSpec(a=0.0, b=0.0, c=0.0, tau=1.0),
        N=N,
        A=A,
        P=np.zeros((N, N)),
        Q=A,
        norm_sq=np.ones(N),
        k_minus1=np.ones(N),
        nu=np.ones(N),
        f_exps=np.zeros((0, 3), dtype=np.int64),
        f_coeffs=np.zeros(0),
    )


class TestPairing:
    def test_conjugates_second_argument(self):
        a = np.array([1.0 + 2.0j, -1.0j])
        b = np.array([0.5 - 1.0j, 2.0])
        assert pairing(a, b) == pytest.approx((1 + 2j) * (0.5 + 1j) + (-1j) * 2.0)

    def test_not_symmetric(self):
        a = np.array([1.0j])
        b = np.array([1.0])
        assert pairing(a, b) == pytest.approx(1.0j)
        assert pairing(b, a) == pytest.approx(-1.0j)


class TestEigendecompose:
    def test_diagonal_matrix(self):
        data = eigendecompose(matrix_system(np.diag([-0.3, 0.7, -1.5])))
        assert data.eigvals == pytest.approx([0.7, -0.3, -1.5], abs=1e-14)
        assert np.abs(data.modes[1, 0]) == pytest.approx(1.0, abs=1e-14)

    def test_lexicographic_order(self, spectrum17):
        w = spectrum17.eigvals
        for n in range(w.size - 1):
            assert (w[n].real > w[n + 1].real) or (
                w[n].real == w[n + 1].real and w[n].imag >= w[n + 1].imag
            )

    def test_biorthonormality(self, spectrum17):
        gram = spectrum17.adjoints.conj().T @ spectrum17.modes
        assert np.max(np.abs(gram - np.eye(spectrum17.N))) <= 1e-10

    def test_pairing_matches_gram(self, spectrum17):
        val = pairing(spectrum17.modes[:, 0], spectrum17.adjoints[:, 1])
        assert abs(val) <= 1e-10

    def test_unit_norm_and_phase(self, spectrum17):
        for j in range(spectrum17.N):
            v = spectrum17.modes[:, j]
            assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)
            k = int(np.argmax(np.abs(v)))
            assert v[k].imag == pytest.approx(0.0, abs=1e-12)
            assert v[k].real > 0.0

    def test_conjugate_pairing(self, spectrum17):
        w = spectrum17.eigvals
        for j in range(w.size):
            if abs(w[j].imag) < 1e-12:
                continue
            gaps = np.abs(w - np.conj(w[j]))
            k = int(np.argmin(gaps))
            assert gaps[k] <= 1e-12
            assert np.max(
                np.abs(spectrum17.modes[:, k] - np.conj(spectrum17.modes[:, j]))
            ) <= 1e-10

    def test_defective_matrix_rejected(self):
        with pytest.raises(ConditioningError):
            eigendecompose(matrix_system([[1.0, 1.0], [0.0, 1.0]]))

    def test_outputs_read_only(self, spectrum17):
        assert not spectrum17.eigvals.flags.writeable
        assert not spectrum17.modes.flags.writeable
        assert not spectrum17.adjoints.flags.writeable

    def test_critical_block_accessors(self, spectrum17):
        assert spectrum17.lam_c.size == 2
        assert spectrum17.lam_s.size == spectrum17.N - 2
        assert spectrum17.lam_c[0] == np.conj(spectrum17.lam_c[1])


class TestCharacteristicEquation:
    @pytest.mark.parametrize("alpha", [0.6, 0.75, 0.9])
    def test_imaginary_root_at_critical_delay(self, alpha):
        a = 3.0 * alpha - 2.0
        omega = np.sqrt(alpha**2 - a**2)
        assert characteristic_residual(1j * omega, tau_c_analytic(alpha), alpha) <= 1e-12

    def test_delay_free_root(self):
        alpha = 0.75
        lam = (3.0 * alpha - 2.0) - alpha
        assert characteristic_residual(lam, 0.0, alpha) == 0.0

    def test_critical_delay_value(self):
        assert tau_c_analytic(0.75) == pytest.approx(1.7408395, abs=1e-7)

    @pytest.mark.parametrize("alpha", [0.5, 1.0, 0.3, 1.4])
    def test_critical_delay_domain(self, alpha):
        with pytest.raises(ValueError):
            tau_c_analytic(alpha)


class TestFindTauC:
    def test_low_dimension_value(self):
        assert find_tau_c(0.75, 6) == pytest.approx(1.7408641, abs=1e-6)

    def test_converges_to_analytic_value(self):
        assert find_tau_c(0.75, 12) == pytest.approx(tau_c_analytic(0.75), abs=1e-6)

    def test_bracket_without_sign_change(self):
        with pytest.raises(BracketError):
            find_tau_c(0.75, 6, bracket=(2.0, 2.2))
        with pytest.raises(BracketError):
            find_tau_c(0.75, 6, bracket=(1.3, 1.5))

    def test_inverted_bracket(self):
        with pytest.raises(BracketError):
            find_tau_c(0.75, 6, bracket=(2.0, 1.3))


class TestPes:
    def test_enso_model_satisfies_pes(self):
        report = pes_verify(0.75, 50, np.arange(1.3, 2.501, 0.05))
        assert report.ok
        assert report.m_c == 2
        assert report.crossing_tau == pytest.approx(1.7408, abs=0.05)
        assert report.min_gap > 0.0
        assert report.stable_max_re < 0.0
        assert report.violations == ()

    def synthetic(self, re1_path, re3=-1.0, gap_ok=True):
        taus = np.arange(len(re1_path), dtype=float)
        arrays = []
        for r in re1_path:
            third = re3 if gap_ok else r + 0.1
            arrays.append(
                np.array([r + 1j, r - 1j, third + 0.5j, third - 0.5j, -2.0])
            )
        return taus, arrays

    def test_clean_crossing_accepted(self):
        taus, arrays = self.synthetic([-0.2, -0.1, 0.1, 0.2])
        report = pes_scan(taus, arrays)
        assert report.ok and report.crossing_tau == pytest.approx(1.5)

    def test_multiple_crossings_flagged(self):
        taus, arrays = self.synthetic([-0.2, 0.1, -0.1, 0.2])
        report = pes_scan(taus, arrays)
        assert not report.ok
        assert any("multiple crossings" in v for v in report.violations)

    def test_wrong_direction_flagged(self):
        taus, arrays = self.synthetic([0.2, 0.1, -0.1, -0.2])
        report = pes_scan(taus, arrays)
        assert not report.ok
        assert any("negative-to-positive" in v for v in report.violations)

    def test_unstable_tail_mode_flagged(self):
        taus, arrays = self.synthetic([-0.2, -0.1, 0.1, 0.2], re3=0.05)
        report = pes_scan(taus, arrays)
        assert not report.ok
        assert any("unstable" in v for v in report.violations)

    def test_closing_gap_flagged(self):
        taus, arrays = self.synthetic([-0.2, -0.1, 0.1, 0.2], gap_ok=False)
        report = pes_scan(taus, arrays)
        assert not report.ok
        assert any("gap" in v for v in report.violations)


class TestEigenSweep:
    def test_tracked_roots_satisfy_delay_equation(self):
        sweep = eigen_sweep(0.75, 20, np.arange(1.5, 1.901, 0.05), n_pairs=3)
        assert sweep.eigvals.shape == (9, 6)
        assert sweep.residuals.max() <= 1e-4

    def test_branches_are_continuous(self):
        sweep = eigen_sweep(0.75, 20, np.arange(1.5, 1.901, 0.05), n_pairs=3)
        jumps = np.abs(np.diff(sweep.eigvals, axis=0))
        assert jumps.max() <= 0.6

    def test_conjugate_closure(self):
        sweep = eigen_sweep(0.75, 20, np.arange(1.5, 1.901, 0.05), n_pairs=3)
        for row in sweep.eigvals:
            for lam in row:
                assert np.min(np.abs(row - np.conj(lam))) <= 1e-10

    def test_too_many_pairs_rejected(self):
        with pytest.raises(ValueError):
            eigen_sweep(0.75, 4, np.arange(1.5, 1.7, 0.05), n_pairs=3)
