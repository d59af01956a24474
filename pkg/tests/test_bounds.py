"""Tests for the explicit constants, thresholds, and error bounds.

Oracles:
  * closed forms evaluated independently with math/numpy (frozen decimals
    recorded next to each assertion);
  * published reference values for the x^2 coupling in tabulated mode;
  * structural identities (exact 1/n halving, cross-mode consistency) that the
    formulas must satisfy regardless of the constants fed in.
"""

import json
import math

import numpy as np
import pytest

from bse_control import bounds as bd
from bse_control.spectral import (
    CouplingOperator,
    coupling_decay_constant,
    coupling_x2,
)

PI = np.pi


@pytest.fixture(scope="module")
def B40():
    return coupling_x2(40)


@pytest.fixture(scope="module")
def c_tab(B40):
    return bd.constants_for(B40, 2, 1, "tabulated")


@pytest.fixture(scope="module")
def c_scan(B40):
    return bd.constants_for(B40, 2, 1, "scanned")


# ----------------------------------------------------------------- constants


def test_tabulated_constants_match_reference(c_tab):
    assert c_tab.coupling == pytest.approx(8.0 / (9.0 * PI**2), rel=1e-15)
    assert c_tab.norm_l2 == 1.0
    assert c_tab.norm_h2 == 1.64
    assert c_tab.norm_h3 == 5.2
    assert c_tab.decay_k == pytest.approx((2.0 * PI - 3.0) / (6.0 * PI**2), rel=1e-15)
    assert c_tab.cprime == 0.0
    assert c_tab.near_resonant_pairs == ()
    assert c_tab.provenance["coupling"] == "tabulated"
    assert c_tab.provenance["cprime"] == "scanned"
    assert c_tab.delta == 3


def test_scanned_constants_at_cutoff_40(c_scan):
    # coupling element from the quadrature-confirmed closed form
    assert c_scan.coupling == pytest.approx(16.0 / (9.0 * PI**2), rel=1e-15)
    # frozen operator norms of the truncated coupling at cutoff 40
    assert c_scan.norm_l2 == pytest.approx(0.9576274307, abs=5e-10)
    assert c_scan.norm_h2 == pytest.approx(1.3314944818, abs=5e-10)
    assert c_scan.norm_h3 == pytest.approx(1.2028844754, abs=5e-10)
    # cubic-decay constant of column 1: minimum of j^3 |B_j1| sits at j = 1
    assert c_scan.decay_k == pytest.approx((2.0 * PI**2 - 3.0) / (6.0 * PI**2), rel=1e-14)
    assert c_scan.decay_argmin == 1
    assert all(v == "scanned" for v in c_scan.provenance.values())


def test_constants_pair_validation(B40):
    with pytest.raises(ValueError):
        bd.constants_for(B40, 2, 2)
    with pytest.raises(ValueError):
        bd.constants_for(B40, 0, 1)
    with pytest.raises(ValueError):
        bd.constants_for(B40, 1, 41)
    with pytest.raises(ValueError):
        bd.constants_for(B40, 1, 3, "tabulated")  # published value only for {1,2}
    with pytest.raises(ValueError):
        bd.constants_for(B40, 2, 1, "published")
    custom = CouplingOperator(
        cutoff=4, entries=np.eye(4) * 0.5, generator=None
    )
    with pytest.raises(ValueError):
        bd.constants_for(custom, 2, 1, "tabulated")


# ------------------------------------------------------------ drive geometry


def test_drive_geometry_closed_forms(c_tab):
    assert bd.transfer_time(c_tab) == pytest.approx(9.0 * PI**3 / 8.0, rel=1e-15)
    assert bd.drive_period(c_tab) == pytest.approx(2.0 / (3.0 * PI), rel=1e-15)
    assert bd.drive_abs_integral(c_tab) == pytest.approx(
        4.0 / (3.0 * PI**2), rel=1e-15
    )
    assert bd.inverse_coupling(c_tab) == pytest.approx(9.0 * PI**2 / 4.0, rel=1e-15)
    # frozen decimals
    assert bd.drive_abs_integral(c_tab) == pytest.approx(0.13509491152311703)
    assert bd.inverse_coupling(c_tab) == pytest.approx(22.206609902451056)


# -------------------------------------------------------- near-resonant sets


def test_near_resonant_set_driven_pair_empty(B40):
    pairs, cprime = bd.near_resonant_set(2, 1, B40)
    assert pairs == []
    assert cprime == 0.0


def test_near_resonant_set_secondary_pair(B40):
    # for the (1,4) pair: window 0 < |l^2-m^2| <= 22.5 excluding 15
    pairs, cprime = bd.near_resonant_set(1, 4, B40)
    gaps = sorted(abs(l**2 - m**2) for l, m in pairs)
    assert gaps == [3, 7, 8, 9, 12, 20]
    assert pairs == [(1, 2), (1, 3), (2, 4), (3, 4), (4, 5), (4, 6)]
    # worst amplification comes from the gap-3 and gap-12 pairs: 1/sin(pi/5)
    assert cprime == pytest.approx(1.0 / math.sin(PI / 5.0), rel=1e-15)
    assert cprime == pytest.approx(1.7013016167040798, rel=1e-14)


def test_near_resonant_set_respects_zero_pattern():
    # a coupling supported on the driven pair alone has no competing pairs
    entries = np.zeros((6, 6))
    entries[0, 3] = entries[3, 0] = 0.7
    sparse = CouplingOperator(cutoff=6, entries=entries, generator=None)
    pairs, cprime = bd.near_resonant_set(1, 4, sparse)
    assert pairs == []
    assert cprime == 0.0


def test_near_resonant_set_rejects_equal_indices(B40):
    with pytest.raises(ValueError):
        bd.near_resonant_set(3, 3, B40)


# ------------------------------------------------------------ L2-level bound


def test_l2_bound_tabulated_frozen(c_tab):
    out = bd.approx_bound_L2(c_tab, 2, 1, 1000)
    assert out.threshold == pytest.approx(9.0 * PI**2 / 8.0, rel=1e-15)
    assert out.threshold == pytest.approx(11.103304951225528)
    assert out.bound == pytest.approx(27.0 * PI**2 / 8000.0, rel=1e-15)
    assert not out.vacuous
    assert bd.approx_bound_L2(c_tab, 2, 1, 1).vacuous  # 33.3 >= 2 says nothing
    # exact linearity in 1/n
    assert bd.approx_bound_L2(c_tab, 2, 1, 2000).bound == out.bound / 2.0


def test_l2_bound_scanned_frozen(c_scan):
    out = bd.approx_bound_L2(c_scan, 2, 1, 1000)
    assert out.threshold == pytest.approx(5.0911445466191392, rel=1e-12)
    assert out.bound == pytest.approx(3.0 * 5.0911445466191392 / 1000.0, rel=1e-12)


def test_l2_bound_zero_coupling_rejected():
    entries = np.zeros((6, 6))
    entries[0, 1] = entries[1, 0] = 0.4  # pair (1,2) present, (1,4) absent
    sparse = CouplingOperator(cutoff=6, entries=entries, generator=None)
    with pytest.raises(ZeroDivisionError):
        bd.approx_bound_L2(sparse, 1, 4, 10)


def test_averaging_remainder_closed_form(c_tab):
    # (1 + 2 K ||B||)(1 + C') ||B|| I / n with K = 9 pi^2/4, I = 4/(3 pi^2)
    expect = (1.0 + 9.0 * PI**2 / 2.0) * 4.0 / (3.0 * PI**2) / 100.0
    assert bd.averaging_remainder(c_tab, 100) == pytest.approx(expect, rel=1e-15)


# ------------------------------------------------------- order-4 growth bound


def test_h4_growth_tabulated_frozen(c_tab):
    out = bd.h4_growth(c_tab, 2, 1, 100)
    assert out.bound == pytest.approx(7690998099688.007, rel=1e-12)
    assert out.control_bv_norm == pytest.approx(out.bv_quarter_periods + 4.0)
    assert out.resolvent_factor == pytest.approx(
        (out.control_bv_norm + 1.0) / out.control_bv_norm, rel=1e-15
    )


def test_h4_growth_scanned_frozen(c_scan):
    out = bd.h4_growth(c_scan, 2, 1, 100)
    assert out.bound == pytest.approx(63388809.923732057, rel=1e-12)
    assert out.damping_shift == pytest.approx(437.856211, abs=1e-5)


def test_h4_growth_decreases_with_n(c_scan):
    b100 = bd.h4_growth(c_scan, 2, 1, 100).bound
    b1000 = bd.h4_growth(c_scan, 2, 1, 1000).bound
    binf_shift = bd.h4_growth(c_scan, 2, 1, 10**9).damping_shift
    assert b1000 < b100
    # the damping shift tends to 2 ||B||_(2) pi^2 |k^2-j^2| / |B_jk|
    lam_inf = 2.0 * c_scan.norm_h2 * PI**2 * c_scan.delta / c_scan.coupling
    assert binf_shift == pytest.approx(lam_inf, rel=1e-6)


# --------------------------------------------------- order-3 transfer budget


def test_h3_budget_tabulated_scale(c_tab):
    out = bd.approx_bound_H3(c_tab, 2, 1, 1)
    assert 8.5e80 < out.coefficient < 8.8e80
    assert out.coefficient == pytest.approx(8.633332919103333e80, rel=1e-12)
    # within one order of magnitude of the published reference scale
    assert out.coefficient / bd.REFERENCE_H3_COEFFICIENT < 10.0
    assert out.window_drift_term == pytest.approx(1.6652e13, rel=1e-3)
    assert out.interpolation_term == pytest.approx(6.7448e78, rel=1e-3)


def test_h3_budget_scanned_frozen(c_scan):
    out = bd.approx_bound_H3(c_scan, 2, 1, 1)
    assert out.coefficient == pytest.approx(1.2445250029e50, rel=1e-9)


def test_h3_budget_exact_halving(c_tab):
    one = bd.approx_bound_H3(c_tab, 2, 1, 1000)
    two = bd.approx_bound_H3(c_tab, 2, 1, 2000)
    assert two.bound == one.bound / 2.0
    assert two.coefficient == one.coefficient


# -------------------------------------------------- full-transfer certificate


def test_exact_threshold_tabulated(c_tab):
    thr = bd.exact_transfer_threshold(c_tab, 2, 1)
    assert 122.0 < math.log10(thr.n_star) < 123.5
    assert thr.n_star == pytest.approx(5.444813e122, rel=1e-4)
    # target-ball radius within 1% of the published 2.14e-5
    assert abs(thr.radius - 2.14e-5) / 2.14e-5 < 0.01
    assert thr.radius == pytest.approx(2.1314904166496434e-5, rel=1e-12)
    assert thr.radius_weighted == pytest.approx(thr.radius / PI**3, rel=1e-15)
    assert not thr.simulable
    # the certificate regime starts far above the L2-level threshold
    assert thr.n_star >= bd.approx_bound_L2(c_tab, 2, 1, 1).threshold


def test_exact_threshold_scanned(c_scan):
    thr = bd.exact_transfer_threshold(c_scan, 2, 1)
    assert thr.n_star == pytest.approx(5.64899077e69, rel=1e-6)
    assert thr.radius == pytest.approx(0.010354313122553433, rel=1e-12)
    assert thr.radius_weighted == pytest.approx(3.33942486e-4, rel=1e-6)
    assert not thr.simulable


def test_threshold_consistent_with_budget(c_tab, c_scan):
    # at the certification threshold the eighth-power budget fits inside
    # the eighth power of the target ball, in both constant modes
    for c in (c_tab, c_scan):
        coeff = bd.approx_bound_H3(c, 2, 1, 1).coefficient
        thr = bd.exact_transfer_threshold(c, 2, 1)
        assert coeff / thr.n_star <= thr.radius**8


def test_threshold_zero_decay_rejected():
    entries = np.zeros((6, 6))
    entries[0, 3] = entries[3, 0] = 0.7
    sparse = CouplingOperator(cutoff=6, entries=entries, generator=None)
    with pytest.raises(ZeroDivisionError):
        bd.exact_transfer_threshold(sparse, 1, 4)


# -------------------------------------------------------- moment-problem gains


def test_ingham_constants_frozen():
    ing = bd.ingham_package()
    assert ing.c1_sq == pytest.approx(3.0 * PI / 16.0, rel=1e-15)
    assert ing.c2_sq == pytest.approx(8.0 / PI, rel=1e-15)
    assert ing.c1_sq == pytest.approx(0.5890486225480862)
    assert ing.c2_sq == pytest.approx(2.5464790894703255)
    # gain of the state->moments step: 3 pi^-3 sqrt(16/pi)
    assert ing.moments_from_state_norm == pytest.approx(
        3.0 * PI**-3 * 4.0 / math.sqrt(PI), rel=1e-15
    )
    assert ing.moments_from_state_norm == pytest.approx(0.21835175736771534)
    assert ing.control_from_moments_norm == pytest.approx(
        2.0 / math.sqrt(3.0 * PI / 16.0), rel=1e-15
    )
    assert ing.control_from_moments_norm == pytest.approx(2.6058800634822394)
    # composed gain stays below 3/5, which is what the contraction step needs
    assert ing.moments_from_state_norm * ing.control_from_moments_norm <= 0.6


# ------------------------------------------------------- contraction package


def test_contraction_with_reference_constants(B40):
    C1 = (2.0 * PI - 3.0) / (6.0 * PI**2)
    ct = bd.contraction_package(1, B40, decay_constant=C1, norm_h3=5.2)
    assert ct.linear_gain == pytest.approx(20.529, rel=1e-3)
    assert ct.contraction_scale == pytest.approx(79.361, rel=1e-4)
    assert ct.contraction_scale == pytest.approx(4.4 / C1, rel=1e-15)
    assert ct.control_ball_radius == pytest.approx(2.05039e-3, rel=1e-4)
    assert ct.state_ball_radius == pytest.approx(2.13148e-5, rel=1e-4)
    assert ct.linearization_lower_bound >= 3.0 * C1 / 16.0


def test_contraction_scanned_inequalities(B40):
    # every non-degenerate mode index <= 10 satisfies the contraction
    # inequality mu >= a + sqrt(a (a+1)) + 1 and the linearization floor
    for l in (1, 2, 3, 4, 6, 7, 8, 9):
        ct = bd.contraction_package(l, B40)
        a = ct.linear_gain
        assert ct.contraction_scale >= a + math.sqrt(a * (a + 1.0)) + 1.0
        C_l = coupling_decay_constant(B40, l).value
        assert ct.linearization_lower_bound >= 3.0 * C_l / 16.0
        # the two ball radii share the constants: state = (3/16) C_l * control
        assert ct.state_ball_radius == pytest.approx(
            3.0 * C_l * ct.control_ball_radius / 16.0, rel=1e-12
        )


def test_contraction_rejects_degenerate_modes(B40):
    with pytest.raises(ValueError):
        bd.contraction_package(5, B40)  # 2*25 = 1 + 49
    with pytest.raises(ValueError):
        bd.contraction_package(10, B40)  # 2*100 = 4 + 196


def test_contraction_requires_constants():
    with pytest.raises(ValueError):
        bd.contraction_package(1, None)


def test_resonance_free_values():
    assert [bd.resonance_free(k) for k in (1, 2, 3, 4, 6, 7, 8, 9)] == [True] * 8
    assert not bd.resonance_free(5)
    assert not bd.resonance_free(10)
    with pytest.raises(ValueError):
        bd.resonance_free(0)
    with pytest.raises(ValueError):
        bd.resonance_free(5, search_bound=4)


# ------------------------------------------------------------- bound report


def test_bound_report_complete_and_serializable(B40):
    rep = bd.bound_report(B40, 2, 1, 100, "tabulated")
    d = rep.to_json_dict()
    blob = json.loads(rep.to_json())
    assert blob == d
    assert d["mode"] == "tabulated"
    assert d["resonance_free_k"] is True
    assert d["transfer_time"] == pytest.approx(9.0 * PI**3 / 8.0)
    assert d["l2_error_bound"] == pytest.approx(27.0 * PI**2 / 800.0)
    assert d["h3_coefficient"] == pytest.approx(8.633332919103333e80, rel=1e-12)
    assert d["state_ball_radius"] == pytest.approx(2.1314904166496434e-5, rel=1e-12)
    assert d["n_threshold"] == pytest.approx(5.444813e122, rel=1e-4)
    assert d["simulable"] is False
    assert d["provenance"]["norm_h3"] == "tabulated"
    # ball radius agrees between the threshold and the contraction route
    assert d["state_ball_radius"] == pytest.approx(
        3.0 * d["decay_k"] ** 2 / (16.0 * 1**3 * d["norm_h3"] ** 2), rel=1e-15
    )


def test_bound_report_scanned_mode(B40):
    rep = bd.bound_report(B40, 2, 1, 100, "scanned")
    assert rep.mode == "scanned"
    assert rep.coupling == pytest.approx(16.0 / (9.0 * PI**2), rel=1e-15)
    assert rep.h4_growth_bound == pytest.approx(63388809.923732057, rel=1e-12)
    assert rep.provenance["norm_h3"] == "scanned"
    with pytest.raises(ValueError):
        bd.bound_report(B40, 2, 1, 0)
