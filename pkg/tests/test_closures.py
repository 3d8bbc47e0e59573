import math
from fractions import Fraction

import numpy as np
import pytest

from bilagg.closures import (
    Certificate, ClosureSlab, NonNormalizableWeights, ThetaOutOfRange,
    closure_gap_certificate, equal_products_membership,
    finite_closure_gap_witness, gap_point_hull_feasible, gap_set_parameterization,
    gap_target, sample_aggregation_points, separation_curve_value,
    separation_margin, separation_threshold, slab_convergence, slab_width,
    witness_eps_hat,
)


# -- equal-products membership ---------------------------------------------------


def test_membership_midpoint():
    member, decomp = equal_products_membership((0.75, 0.75, 0.75))
    assert member
    assert decomp is not None and decomp["lam"] == pytest.approx(0.5)


def test_membership_rejects_split_plane():
    member, _ = equal_products_membership((0.75, 17 / 24 + 0.01, 17 / 24 - 0.01))
    assert not member


def test_membership_boundary_corner():
    member, decomp = equal_products_membership((0.5, 1.0, 1.0))
    assert member and decomp is None  # boundary case needs no decomposition


def test_membership_decomposition_reconstructs():
    rng = np.random.default_rng(3)
    hits = 0
    for _ in range(400):
        x = rng.uniform(0.55, 1.0)
        y = rng.uniform(0.5, 0.99)
        member, decomp = equal_products_membership((x, y, y))
        if member and decomp:
            lam = decomp["lam"]
            pc, pv = decomp["p_corner"], decomp["p_curve"]
            assert pv[0] * pv[1] == pytest.approx(0.5, abs=1e-11)
            recon = [lam * a + (1 - lam) * b for a, b in zip(pc, pv)]
            assert recon == pytest.approx([x, y, y], abs=1e-12)
            hits += 1
    assert hits > 20


# -- finite-family witness --------------------------------------------------------


def test_eps_hat_pinned_values():
    assert witness_eps_hat(2.0) == pytest.approx((1 / 24) * 3.0, abs=1e-15)  # = 1/8
    assert witness_eps_hat(0.0) == pytest.approx(1 / 24)
    # continuity across the range split at theta = 4/3 and the paper's own
    # endpoint value 7/456 at theta = -1 pin the middle-range denominator
    assert witness_eps_hat(4 / 3 - 1e-12) == pytest.approx(7 / 24, abs=1e-9)
    assert witness_eps_hat(4 / 3) == pytest.approx(7 / 24, abs=1e-12)
    assert witness_eps_hat(-1.0) == pytest.approx(7 / 456, abs=1e-15)


def test_witness_single_theta_two():
    rep = finite_closure_gap_witness([(1.0, 2.0)])
    assert rep.eps0 == pytest.approx(1 / 8)
    # the witness at eps-hat satisfies the aggregated equation itself
    x, y1, y2 = 0.75, 17 / 24 + 1 / 8, 17 / 24 - 1 / 8
    assert (x * y1 - 0.5) + 2.0 * (x * y2 - 0.5) == pytest.approx(0.0, abs=1e-14)
    assert rep.rejected_by_membership


def test_witness_axis_lambda():
    rep = finite_closure_gap_witness([(0.0, 1.0)])
    assert rep.eps0 == pytest.approx(1 / 24)
    (pt, w) = rep.per_lambda[0]["points"][0], rep.per_lambda[0]["weights"][0]
    assert pt == (0.75, 0.75, 2 / 3)  # lies in S_(0,1): x * y2 = 1/2


def test_witness_grid_all_residuals_small():
    thetas = np.concatenate([
        -np.logspace(math.log10(1.0001), math.log10(32), 25),
        np.linspace(-0.999, 4 / 3 - 1e-6, 25),
        np.linspace(4 / 3, 32, 25),
    ])
    lams = [(0.0, 1.0)] + [(1.0, float(t)) for t in thetas]
    rep = finite_closure_gap_witness(lams, tol=1e-10)
    assert rep.eps0 > 0
    assert rep.rejected_by_membership
    for entry in rep.per_lambda:
        assert entry["resid_member"] <= 1e-10
        assert entry["resid_combination"] <= 1e-10
        assert entry["in_box"]


def test_witness_rejects_empty_and_zero():
    with pytest.raises(NonNormalizableWeights):
        finite_closure_gap_witness([])
    with pytest.raises(NonNormalizableWeights):
        finite_closure_gap_witness([(0.0, 0.0)])


# -- slabs ------------------------------------------------------------------------


def test_slab_contains_samples_and_widths_decrease():
    below = slab_convergence([0.5, 0.9, 0.99])
    above = slab_convergence([2.0, 1.1, 1.01])
    for seq in (below, above):
        widths = [d["width"] for d in seq]
        assert all(d["violations"] == 0 for d in seq)
        assert widths[0] > widths[1] > widths[2] > 0


def test_slab_width_closed_form():
    assert slab_width(0.5) == pytest.approx(0.25, abs=1e-9)
    assert slab_width(2.0) == pytest.approx(0.25, abs=1e-9)
    assert slab_width(0.99) == pytest.approx(0.005, abs=1e-9)


def test_slab_theta_one_rejected():
    with pytest.raises(ValueError):
        slab_convergence([1.0])


# -- closure-gap certificates ------------------------------------------------------


def test_certificate_axis_case():
    cert = closure_gap_certificate(lam=(0, 1), exact=True)
    assert cert.case == 1
    assert cert.weights == [Fraction(1, 4), Fraction(3, 4)]
    assert cert.max_residual() == 0


def test_certificate_case2_weight_split():
    th = Fraction(-2)
    cert = closure_gap_certificate(th)
    assert cert.case == 2 and len(cert.points) == 4
    w = cert.weights
    assert w[0] + w[2] == Fraction(1, 6)
    assert w[1] + w[3] == Fraction(5, 6)
    assert cert.max_residual() == 0


def test_certificate_case5_at_theta_one():
    cert = closure_gap_certificate(Fraction(1))
    assert cert.case == 5 and len(cert.points) == 3
    y1 = cert.points[1][1]
    assert y1 == Fraction(844 + 863 - 2055, 1249 + 728 - 3405)
    assert cert.max_residual() == 0


def test_certificate_case6_w2():
    cert = closure_gap_certificate(Fraction(1, 2))
    assert cert.case == 6
    assert cert.weights[1] == Fraction(1, 8)
    assert cert.max_residual() == 0


@pytest.mark.parametrize("boundary,cases", [
    (Fraction(-5, 3), (2, 3)),
    (Fraction(-3, 5), (3, 4)),
    (Fraction(-211, 665), (4, 5)),
    (Fraction(1, 3), (5, 6)),
])
def test_boundaries_verify_in_both_cases(boundary, cases):
    for case in cases:
        cert = closure_gap_certificate(boundary, case=case)
        assert cert.max_residual() == 0


def test_case_dispatch_near_upper_split():
    # (863 + sqrt(7682449))/4110 ~ 0.8843605...
    assert closure_gap_certificate(0.8843).case == 6
    assert closure_gap_certificate(0.8844).case == 5
    for th in (0.8843, 0.8844):
        assert closure_gap_certificate(th).max_residual() <= 1e-12


def test_theta_out_of_range_on_forced_case():
    with pytest.raises(ThetaOutOfRange):
        closure_gap_certificate(0.0, case=2)


def test_certificates_dense_grid_float():
    grids = [
        np.linspace(-30, -5 / 3, 30),
        np.linspace(-5 / 3, -3 / 5, 30),
        np.linspace(-3 / 5, -211 / 665, 30),
        np.linspace(-211 / 665, 1 / 3, 30),
        np.linspace(1 / 3, 0.8843, 30),
        np.linspace(0.8844, 30, 30),
    ]
    for g in grids:
        for th in g:
            cert = closure_gap_certificate(float(th))
            assert cert.max_residual() <= 1e-9, (th, cert.case, cert.residuals())


# -- separation ---------------------------------------------------------------------


def test_separation_values():
    assert separation_margin(gap_target()) == pytest.approx(41 / 60)
    assert separation_curve_value(separation_threshold()) == pytest.approx(-5.9653, abs=5e-4)
    assert separation_curve_value(1.0) == pytest.approx(22 / 7)


def test_separation_negative_on_gap_set():
    xs = np.linspace(separation_threshold(), 1.0, 200)
    for x in xs:
        y1, y2 = gap_set_parameterization(x)
        assert -1e-9 <= y1 <= 1 + 1e-9 and -1e-9 <= y2 <= 1 + 1e-9
        m = separation_margin((x, y1, y2))
        assert m < 0
        assert m == pytest.approx(separation_curve_value(x) - 5.0, abs=1e-9)


def test_gap_point_feasible_in_aggregation_hulls():
    assert gap_point_hull_feasible(lam=(0, 1), k=16)
    for th in (-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 3.0):
        assert gap_point_hull_feasible(theta=th, k=16), th
