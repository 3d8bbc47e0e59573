import math

import numpy as np
import pytest

from bilagg.exacthull2d import (
    DependentConstraints, VerificationFailed, classify_and_construct,
    quick_kind, sample_instances, to_hyperbola_form, to_line_form,
    verify_recipe, verify_tolerance, _eps_candidates, _mix, Con2D, LineForm,
)
from bilagg.instances import example1
from bilagg.model import AggregationWeights, BilinearConstraint, BoxBounds, Instance


def two_var(c1, c2, feas=None):
    inst = Instance(1, 1, (BilinearConstraint(*c1), BilinearConstraint(*c2)),
                    BoxBounds.unit(1, 1), [1.0], [1.0])
    return inst.with_feasible_point(*feas) if feas else inst


# -- line form -----------------------------------------------------------------


def test_line_form_example1():
    lf, w = to_line_form(example1())
    # m = -(a1-a2)/(b1-b2) and b = -(c1-c2)/(b1-b2) on a = (0, 1.5),
    # b = (0.5, -1), c = (-0.5, -0.5): the line y = x
    assert lf.m == pytest.approx(1.0)
    assert lf.b0 == pytest.approx(0.0)
    assert not lf.swapped
    assert (w.lambda1, w.lambda2) == pytest.approx((1.0, -1.0))


def test_line_form_swap_branch():
    # equal y-coefficients force the x = m y + b orientation
    inst = two_var(([[1.0]], [2.0], [0.5], -1.0), ([[1.0]], [1.0], [0.5], -0.7))
    lf, _ = to_line_form(inst)
    assert lf.swapped
    rec = classify_and_construct(inst)
    # the line is x = 0.3; solving row 1 there gives y = 0.5
    assert rec.kind == "point"
    assert rec.points[0] == pytest.approx((0.3, 0.5), abs=1e-9)


def test_dependent_constraints_rejected():
    inst = two_var(([[1.0]], [0.5], [0.5], -0.25), ([[2.0]], [1.0], [1.0], -0.5))
    with pytest.raises(DependentConstraints):
        to_line_form(inst)
    with pytest.raises(DependentConstraints):
        classify_and_construct(inst)


# -- hyperbola form --------------------------------------------------------------


def test_hyperbola_form_example1():
    inst = example1()
    lf, _ = to_line_form(inst)
    hf = to_hyperbola_form(inst, lf)
    assert hf.canonical
    assert hf.r == pytest.approx(-0.5)
    assert hf.tau == pytest.approx(0.5)


def test_hyperbola_form_expansion_matches_coefficients():
    rng = np.random.default_rng(5)
    for _ in range(20):
        v = rng.uniform(-2, 2, 8)
        try:
            inst = two_var(([[v[0] + 2.5]], [v[1]], [v[2]], v[3]),
                           ([[v[4] + 2.5]], [v[5]], [v[6]], v[7]))
            lf, _ = to_line_form(inst)
            hf = to_hyperbola_form(inst, lf)
        except DependentConstraints:
            continue
        if not hf.canonical:
            continue
        con = hf.con
        # (x - r) y - tau expands to q = 1, a = 0, b = -r, c = -tau
        assert con.q == pytest.approx(1.0, abs=1e-12)
        assert abs(con.a) <= 1e-12 * max(1.0, abs(hf.r), abs(hf.tau))
        assert con.b == pytest.approx(-hf.r, rel=1e-12, abs=1e-12)
        assert con.c == pytest.approx(-hf.tau, rel=1e-12, abs=1e-12)


def test_tau_zero_detected():
    # (x - 0.3) y = 0 paired with a line: tau = 0 routes to the lines cases
    inst = two_var(([[1.0]], [0.0], [-0.3], 0.0), ([[0.0]], [1.0], [1.0], -0.8))
    lf, _ = to_line_form(inst)
    hf = to_hyperbola_form(inst, lf)
    assert hf.canonical and hf.tau == pytest.approx(0.0, abs=1e-12)
    rec = classify_and_construct(inst)
    assert rec.case in ("2a", "2b")


# -- classification and recipes ---------------------------------------------------


def test_example1_recipe():
    rec = classify_and_construct(example1())
    assert rec.case == "1b(m>=0)"
    assert rec.kind == "point"
    assert rec.points[0] == pytest.approx((0.5, 0.5), abs=1e-12)
    assert len(rec.aggregations) == 3
    pairs = {(round(w.lambda1, 6), round(w.lambda2, 6)) for w in rec.aggregations}
    assert (1.0, -1.0) in pairs  # the line member
    rep = verify_recipe(example1(), rec, k=64)
    assert rep["deviation"] <= 1e-5


def test_segment_case_secant():
    # xy = 0.5 cut by the secant x + y = 1.45: two interior points
    inst = two_var(([[1.0]], [0.0], [0.0], -0.5), ([[0.0]], [1.0], [1.0], -1.45))
    rec = classify_and_construct(inst)
    assert rec.case == "1a" and rec.kind == "segment"
    assert len(rec.aggregations) == 2
    xs = sorted(p[0] for p in rec.points)
    disc = math.sqrt(1.45 ** 2 - 2.0)
    assert xs[0] == pytest.approx((1.45 - disc) / 2, abs=1e-9)
    assert xs[1] == pytest.approx((1.45 + disc) / 2, abs=1e-9)
    rep = verify_recipe(inst, rec, k=64)
    assert rep["deviation"] <= 1e-5


def test_two_lines_two_points_r_interior():
    inst = two_var(([[1.0]], [0.0], [-0.3], 0.0), ([[0.0]], [1.0], [1.0], -0.8))
    rec = classify_and_construct(inst)
    assert rec.case == "2a" and rec.kind == "segment"
    pts = sorted(rec.points)
    assert pts[0] == pytest.approx((0.3, 0.5), abs=1e-9)
    assert pts[1] == pytest.approx((0.8, 0.0), abs=1e-9)
    rep = verify_recipe(inst, rec, k=32)
    assert rep["deviation"] <= verify_tolerance(32)


def test_two_lines_singleton():
    # (x - 0.3) y = 0 with the line y = (x + 0.4)/2: S = {(0.3, 0.35)}
    inst = two_var(([[1.0]], [0.0], [-0.3], 0.0), ([[0.0]], [0.5], [-1.0], 0.2))
    rec = classify_and_construct(inst)
    assert rec.case == "2b" and rec.kind == "point"
    assert rec.points[0] == pytest.approx((0.3, 0.35), abs=1e-9)
    assert len(rec.aggregations) <= 3 and not rec.flagged
    rep = verify_recipe(inst, rec, k=64)
    assert rep["deviation"] <= 1e-5


def test_two_lines_r_zero_trivial():
    # x y = 0 with the line y = 0.6 - (2/3) x: hull of row 1 is a triangle
    # that already pins the segment together with the line
    inst = two_var(([[1.0]], [0.0], [0.0], 0.0), ([[0.0]], [2.0 / 3.0], [1.0], -0.6))
    rec = classify_and_construct(inst)
    assert rec.kind == "segment" and len(rec.aggregations) == 2
    rep = verify_recipe(inst, rec, k=32)
    assert rep["deviation"] <= verify_tolerance(32)


def test_horizontal_line_with_surviving_x_term():
    # rows share the x structure so the pencil's line member is y = 0.5 and no
    # member reaches the canonical form; the direct-substitution branch applies
    inst = two_var(([[1.0]], [1.0], [0.0], -0.5), ([[1.0]], [1.0], [1.0], -1.0))
    lf, _ = to_line_form(inst)
    hf = to_hyperbola_form(inst, lf)
    assert not hf.canonical
    rec = classify_and_construct(inst)
    assert rec.kind == "point"
    assert rec.points[0] == pytest.approx((1 / 3, 0.5), abs=1e-9)
    assert not rec.flagged
    rep = verify_recipe(inst, rec, k=64)
    assert rep["deviation"] <= 1e-5


def test_tangent_line_recipe_exact_but_verification_floor():
    # tangent contact: the two-member recipe is exact, but no finite outer
    # approximation can certify a tangential pinch much below sqrt(LP tol)
    inst = two_var(([[1.0]], [0.0], [0.0], -0.5),
                   ([[0.0]], [1.0], [1.0], -math.sqrt(2.0)))
    rec = classify_and_construct(inst)
    assert rec.kind == "point" and not rec.flagged
    assert len(rec.aggregations) == 2
    assert rec.diagnostics["tangent"]
    assert rec.points[0] == pytest.approx((1 / math.sqrt(2),) * 2, abs=1e-9)
    try:
        rep = verify_recipe(inst, rec, k=64)
    except VerificationFailed as err:
        rep = err.report
    assert rep["deviation"] <= 1e-4


def test_empty_set():
    inst = two_var(([[1.0]], [0.0], [0.0], -5.0), ([[0.0]], [1.0], [1.0], -1.0))
    rec = classify_and_construct(inst)
    assert rec.kind == "empty" and rec.aggregations == []
    assert quick_kind(inst) == "empty"
    with pytest.raises(ValueError):
        verify_recipe(inst, rec)


def test_both_rows_linear():
    inst = two_var(([[0.0]], [1.0], [1.0], -1.0), ([[0.0]], [1.0], [-1.0], 0.0))
    rec = classify_and_construct(inst)
    assert rec.case == "trivial" and rec.kind == "point"
    assert rec.points[0] == pytest.approx((0.5, 0.5))
    rep = verify_recipe(inst, rec, k=16)
    assert rep["deviation"] <= 1e-6  # both hulls are exact segments


# -- epsilon selection -----------------------------------------------------------


def test_eps_grid_skips_zero_roots():
    base = Con2D(1.0, 0.0, 0.5, -0.25, 1.0, 0.0)  # (x + 0.5) y = 0.25
    L = Con2D(0.0, 1.0, -1.0, 0.0, 0.0, 1.0)  # y = x
    lf = LineForm(1.0, 0.0, False, L)
    # mu(eps) = eps: at eps = 0 the mix is the base itself, whose product term
    # is 0.25 != 0, so nothing is skipped
    cand, eps, skipped = _eps_candidates(base, lf, lambda e: e, 1.0)
    assert eps == 0.0 and skipped == 0
    # the product term of the mix is -mu^2 + 0.5 mu + 0.25, vanishing at
    # mu* = (0.5 + sqrt(1.25))/2; start the mix there so eps = 0 is skipped
    mu_star = (0.5 + math.sqrt(1.25)) / 2.0
    cand, eps, skipped = _eps_candidates(base, lf, lambda e: mu_star + e, 1.0)
    assert cand is not None
    assert 0 < eps <= 2.0 ** -19
    assert skipped <= 2


def test_sign_condition_case_1b():
    # tau~ = tau + (r-1-eps)(b + m + m eps) <= 0 whenever m >= 0, tau > 0 and
    # (m+b)(1-r) >= tau; asserted as a formula-level implication
    checked = 0
    for inst in sample_instances(60, seed=77):
        try:
            lf, _ = to_line_form(inst)
            hf = to_hyperbola_form(inst, lf)
        except DependentConstraints:
            continue
        if not hf.canonical:
            continue
        m, b0, r, tau = lf.m, lf.b0, hf.r, hf.tau
        if not (m >= 0 and tau > 1e-9 and (m + b0) * (1.0 - r) >= tau):
            continue
        for eps in (0.0, 2.0 ** -20, 2.0 ** -19):
            taut = tau + (r - 1.0 - eps) * (b0 + m + m * eps)
            if abs(taut) > 1e-11:
                assert taut < 0.0
                checked += 1
                break
    assert checked >= 3


# -- verification --------------------------------------------------------------


def test_verify_rejects_wrong_recipe():
    # the two original hulls alone famously do not pin Example 1
    from bilagg.exacthull2d import HullRecipe2D

    bogus = HullRecipe2D(
        "1b(m>=0)", "point",
        [AggregationWeights(1.0, 0.0), AggregationWeights(0.0, 1.0)],
        [(0.5, 0.5)],
    )
    with pytest.raises(VerificationFailed):
        verify_recipe(example1(), bogus, k=64)


def test_verify_deviation_weakly_decreasing_in_k():
    inst = sample_instances(1, seed=5)[0]
    rec = classify_and_construct(inst)
    devs = []
    for k in (16, 32, 64):
        devs.append(verify_recipe(inst, rec, k=k)["deviation"])
    assert devs[1] <= devs[0] + 1e-9
    assert devs[2] <= devs[1] + 1e-9


def test_random_instances_recipes_sound():
    insts = sample_instances(40, seed=31415)
    for inst in insts:
        rec = classify_and_construct(inst)
        assert len(rec.aggregations) <= 3
        assert rec.kind == quick_kind(inst)
        rep = verify_recipe(inst, rec, k=32)
        assert rep["deviation"] <= verify_tolerance(32)
        if "eps_skipped" in rec.diagnostics:
            assert rec.diagnostics["eps_skipped"] <= 2
