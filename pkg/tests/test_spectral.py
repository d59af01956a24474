import numpy as np
import pytest

from bse_control.spectral import (
    CouplingOperator,
    ModalState,
    basis_state,
    coupling_decay_constant,
    coupling_x2,
    eigenvalue,
    free_evolve,
    h3_intersection_norm,
    operator_norm,
    sobolev_norm,
    x2_entry,
)

PI = np.pi


def quadrature_x2_entry(j, k, nq=400):
    """Independent oracle: Gauss-Legendre quadrature of <phi_j, x^2 phi_k>."""
    xg, wg = np.polynomial.legendre.leggauss(nq)
    x = (xg + 1.0) / 2.0
    w = wg / 2.0
    f = 2.0 * np.sin(j * PI * x) * (x**2) * np.sin(k * PI * x)
    return float(np.sum(w * f))


class TestEigenvalue:
    def test_values(self):
        assert eigenvalue(1) == PI**2
        assert eigenvalue(3) == 9 * PI**2

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            eigenvalue(0)


class TestModalState:
    def test_norm_and_flag(self):
        s = basis_state(5, 2)
        assert s.norm == 1.0
        assert s.is_normalized
        t = ModalState(cutoff=3, coeffs=np.array([0.6, 0.0, 0.8j]))
        assert t.is_normalized
        u = ModalState(cutoff=2, coeffs=np.array([1.0, 1e-4]))
        assert not u.is_normalized

    def test_tail_mass(self):
        s = ModalState(cutoff=4, coeffs=np.array([0.8, 0.0, 0.36j, 0.48]))
        assert s.tail_mass == pytest.approx(0.36**2 + 0.48**2, abs=1e-15)

    def test_coeffs_read_only(self):
        s = basis_state(4, 1)
        with pytest.raises(ValueError):
            s.coeffs[0] = 2.0

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            ModalState(cutoff=3, coeffs=np.zeros(2))

    def test_json_round_trip(self):
        import json

        s = ModalState(cutoff=2, coeffs=np.array([0.5 + 0.5j, -0.5 - 0.5j]), time=1.5)
        d = json.loads(s.to_json())
        assert d["cutoff"] == 2
        assert d["time"] == 1.5
        assert d["coeffs"][0] == [0.5, 0.5]


class TestFreeEvolution:
    def test_relative_phase(self):
        # modes 1 and 2 dephase at rate lambda_2 - lambda_1 = 3 pi^2
        s = ModalState(cutoff=2, coeffs=np.array([1.0, 1.0]) / np.sqrt(2))
        dt = 0.37
        out = free_evolve(s, dt)
        ratio = (out.coeffs[1] / out.coeffs[0]) / (s.coeffs[1] / s.coeffs[0])
        assert ratio == pytest.approx(np.exp(-3j * PI**2 * dt), abs=1e-12)

    def test_norm_preserved_and_time_advanced(self):
        s = ModalState(cutoff=6, coeffs=np.ones(6) / np.sqrt(6), time=2.0)
        out = free_evolve(s, 0.25)
        assert out.norm == pytest.approx(1.0, abs=1e-14)
        assert out.time == 2.25


class TestSobolevNorm:
    def test_ground_state_h3(self):
        assert sobolev_norm(basis_state(8, 1), 3) == pytest.approx(PI**3, rel=1e-14)

    def test_order_zero_is_l2(self):
        s = ModalState(cutoff=3, coeffs=np.array([0.6j, 0.0, 0.8]))
        assert sobolev_norm(s, 0) == pytest.approx(1.0, abs=1e-14)

    def test_mixed_state_order_two(self):
        s = ModalState(cutoff=3, coeffs=np.array([0.6j, 0.0, 0.8]))
        expected = np.sqrt(0.36 * PI**4 + 0.64 * 81 * PI**4)
        assert sobolev_norm(s, 2) == pytest.approx(expected, rel=1e-14)

    def test_negative_order_rejected(self):
        with pytest.raises(ValueError):
            sobolev_norm(basis_state(2, 1), -1)


class TestCouplingEntries:
    def test_closed_form_matches_quadrature(self):
        for j in range(1, 13):
            for k in range(1, 13):
                assert x2_entry(j, k) == pytest.approx(
                    quadrature_x2_entry(j, k), abs=1e-10
                )

    def test_neighbor_entry_value(self):
        # <phi_1, x^2 phi_2> = -16/(9 pi^2)
        assert x2_entry(1, 2) == pytest.approx(-16.0 / (9.0 * PI**2), rel=1e-14)

    def test_even_pair_magnitude(self):
        # |<phi_2, x^2 phi_4>| = 4/(9 pi^2)
        assert abs(x2_entry(2, 4)) == pytest.approx(4.0 / (9.0 * PI**2), rel=1e-14)

    def test_diagonal_value(self):
        assert x2_entry(1, 1) == pytest.approx(1.0 / 3.0 - 1.0 / (2.0 * PI**2), rel=1e-14)

    def test_matrix_symmetric_and_matches_entry(self):
        B = coupling_x2(10)
        assert B.is_symmetric
        assert B.entry(3, 7) == x2_entry(3, 7)
        # generator extends past the cutoff
        assert B.entry(1, 15) == x2_entry(1, 15)

    def test_plain_matrix_has_no_extension(self):
        M = CouplingOperator(cutoff=2, entries=np.eye(2))
        with pytest.raises(IndexError):
            M.entry(1, 3)


class TestOperatorNorms:
    # frozen values computed at cutoff 40 from the closed-form matrix,
    # cross-checked against a 6000-point dense-grid discretization
    L2_AT_40 = 0.9576274307
    H2_AT_40 = 1.3314944818
    H3_AT_40 = 1.2028844754

    def test_l2_norm_at_40(self):
        est = operator_norm(coupling_x2(40), "L2")
        assert est.value == pytest.approx(self.L2_AT_40, abs=5e-10)
        assert est.kind == "L2" and est.cutoff_used == 40

    def test_h2_norm_at_40(self):
        est = operator_norm(coupling_x2(40), "H2_op")
        assert est.value == pytest.approx(self.H2_AT_40, abs=5e-10)

    def test_h3_norm_at_40(self):
        est = operator_norm(coupling_x2(40), "H3_op")
        assert est.value == pytest.approx(self.H3_AT_40, abs=5e-10)

    def test_convergence_flag_honest_at_40(self):
        # all three still move by more than 1e-6 (relative) from 40 to 80
        for kind in ("L2", "H2_op", "H3_op"):
            assert not operator_norm(coupling_x2(40), kind).converged

    def test_h3_flag_sets_at_160(self):
        assert operator_norm(coupling_x2(160), "H3_op").converged

    def test_h3_image_norm_on_ground_state(self):
        # oracle: dense-grid finite differences of x^2 phi_1 (independent code path)
        n = 20000
        x = np.linspace(0.0, 1.0, n + 1)
        f = np.sqrt(2.0) * x**2 * np.sin(PI * x)
        h = x[1] - x[0]
        acc = 0.0
        g = f.copy()
        for _ in range(3):
            g = np.gradient(g, h, edge_order=2)
            acc += np.trapezoid(np.abs(g) ** 2, x)
        expected = np.sqrt(acc)
        got = h3_intersection_norm(basis_state(1, 1))
        assert got == pytest.approx(expected, rel=1e-3)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            operator_norm(coupling_x2(4), "H5")


class TestCouplingDecayConstant:
    def test_first_column_constant(self):
        # min_j j^3 |B_{j,1}| = |B_{1,1}| = (2 pi^2 - 3)/(6 pi^2), attained at j=1
        res = coupling_decay_constant(coupling_x2(40), 1)
        assert res.value == pytest.approx((2 * PI**2 - 3) / (6 * PI**2), rel=1e-12)
        assert res.argmin_j == 1
        assert not res.violated

    def test_zero_entry_flags_violation(self):
        M = CouplingOperator(cutoff=3, entries=np.diag([1.0, 0.0, 1.0]))
        res = coupling_decay_constant(M, 2)
        assert res.value == 0.0
        assert res.violated

    def test_scan_respects_cutoff_without_generator(self):
        M = CouplingOperator(cutoff=3, entries=np.full((3, 3), 0.5))
        res = coupling_decay_constant(M, 1, J_max=100)
        assert res.argmin_j == 1  # j^3 * 0.5 is increasing
        assert res.value == 0.5
