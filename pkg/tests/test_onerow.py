import math

import numpy as np
import pytest

from bilagg.geom2d import UNIT_RECT, polygon_halfplanes
from bilagg.lpcore import EQ, INFEASIBLE, OPTIMAL, intersect, solve_lp
from bilagg.model import BilinearConstraint, BoxBounds, Instance, aggregate
from bilagg.instances import (
    closure_gap_instance, equal_products_instance, example1, gen_random, RandomSpec,
)
from bilagg.onerow import (
    DisjunctBudgetExceeded, EmptyCurve, EmptyHull, build_hull_oa, box_poly,
    enumerate_disjuncts, hull2d_polygon, mccormick, onerow_relaxation,
    raw_disjunct_count,
)


def _minmax(poly, coeffs, engine=None):
    lo = solve_lp(poly, coeffs, "min", engine=engine)
    hi = solve_lp(poly, coeffs, "max", engine=engine)
    return lo.value, hi.value


# -- McCormick ----------------------------------------------------------------


def test_mccormick_corner_forces_w():
    con = BilinearConstraint([[1.0]], [0.0], [0.0], -1.0)  # xy = 1
    inst = Instance(1, 1, (con, con), BoxBounds.unit(1, 1), [0.0], [0.0])
    p = mccormick(inst)
    # at (x, y) = (1, 1) the envelopes alone pin w = 1
    q = p.copy()
    q.add_row({"x0": 1}, EQ, 1.0)
    q.add_row({"y0": 1}, EQ, 1.0)
    lo, hi = _minmax(q, {"w.0.0": 1})
    assert lo == pytest.approx(1.0, abs=1e-8)
    assert hi == pytest.approx(1.0, abs=1e-8)
    # and the envelopes really are the binding rows: dropping the linearized
    # constraint row cannot change the pinned value at the corner
    q2 = mccormick(Instance(1, 1, (con, con), BoxBounds.unit(1, 1), [0.0], [0.0]))
    q2.add_row({"x0": 1}, EQ, 1.0)
    q2.add_row({"y0": 1}, EQ, 1.0)
    assert solve_lp(q2, {"w.0.0": 1}, "min").value == pytest.approx(1.0, abs=1e-8)


def test_mccormick_example1_min_y_loose():
    inst = example1()
    p = mccormick(inst)
    res = solve_lp(p, {"y0": 1}, "min")
    # frozen from the LP oracle: the relaxation allows y = 1/3 < 0.5
    assert res.value == pytest.approx(1 / 3, abs=1e-7)
    assert res.value < 0.5 - 1e-3


def test_mccormick_equal_products_looseness_probe():
    # McCormick admits points off the y1 = y2 plane that the true hull forbids.
    inst = equal_products_instance()
    p = mccormick(inst)
    eps = 1 / 24  # largest symmetric offset at x = 3/4 the envelopes allow
    q = p.copy()
    q.add_row({"x0": 1}, EQ, 0.75)
    q.add_row({"y0": 1}, EQ, 17 / 24 + eps)
    q.add_row({"y1": 1}, EQ, 17 / 24 - eps)
    assert solve_lp(q, {"x0": 1}).status == OPTIMAL
    q2 = p.copy()
    q2.add_row({"x0": 1}, EQ, 0.75)
    q2.add_row({"y0": 1}, EQ, 17 / 24 + 0.1)
    q2.add_row({"y1": 1}, EQ, 17 / 24 - 0.1)
    # a 0.1 offset violates w >= x + y1 - 1 with w pinned to 0.5
    assert solve_lp(q2, {"x0": 1}).status == INFEASIBLE


# -- disjunct enumeration ----------------------------------------------------


def test_single_disjunct_for_1x1():
    con = BilinearConstraint([[1.0]], [0.0], [0.0], -0.5)
    ds = enumerate_disjuncts(con, BoxBounds.unit(1, 1))
    assert len(ds) == 1
    assert raw_disjunct_count(con) == 1
    d = ds[0]
    assert (d.free_x, d.free_y) == (0, 0) and d.fix_x == () and d.fix_y == ()


def test_disjunct_count_formula():
    rng = np.random.default_rng(0)
    for (n1, n2) in [(2, 2), (3, 3), (2, 3)]:
        inst = gen_random(RandomSpec(n1, n2, seed=int(rng.integers(100))))[0]
        con = inst.constraints[0]
        assert raw_disjunct_count(con) == n1 * n2 * 2 ** (n1 + n2 - 2)


def test_equal_products_aggregation_disjuncts():
    inst = equal_products_instance()
    con = aggregate(inst, (1.0, 1.0))  # x(y1 + y2) = 1
    assert raw_disjunct_count(con) == 4
    ds = enumerate_disjuncts(con, inst.box)
    # all four candidate faces are nonempty; degenerate two-line pieces split
    faces = {(d.free_y, d.fix_y) for d in ds}
    assert len(faces) == 4
    assert len(ds) >= 4


def test_linear_constraint_zero_disjuncts():
    con = BilinearConstraint([[0.0]], [1.5], [-1.5], 0.0)
    assert enumerate_disjuncts(con, BoxBounds.unit(1, 1)) == []
    hull = build_hull_oa(con, BoxBounds.unit(1, 1))
    assert hull.disjuncts == [] and hull.lifted.nrows == 1


def test_budget_exceeded():
    inst = gen_random(RandomSpec(5, 5, seed=3))[0]
    with pytest.raises(DisjunctBudgetExceeded):
        enumerate_disjuncts(inst.constraints[0], inst.box, cap=4096)
    ds = enumerate_disjuncts(inst.constraints[0], inst.box, cap=6400)
    assert len(ds) <= 6400 + 6400  # splitting can at most double the raw count


def test_empty_sequence_iff_infeasible():
    con = BilinearConstraint([[1.0]], [0.0], [0.0], -5.0)  # xy = 5 impossible
    assert enumerate_disjuncts(con, BoxBounds.unit(1, 1)) == []
    with pytest.raises(EmptyHull):
        build_hull_oa(con, BoxBounds.unit(1, 1))


# -- 2D hull polygons ----------------------------------------------------------


def test_polygon_chord_for_example1_first_row():
    # (x+0.5)y = 0.5: hull bounded above by the chord from (0,1) to (1,1/3)
    poly = hull2d_polygon(1.0, 0.0, 0.5, -0.5, UNIT_RECT, k=16)
    val = poly[:, 1] + (2 / 3) * poly[:, 0]
    assert np.max(val) == pytest.approx(1.0, abs=1e-9)
    # vertices hug the curve from outside: small negative residuals only
    resid = (poly[:, 0] + 0.5) * poly[:, 1] - 0.5
    assert -5e-3 < np.min(resid) <= 1e-12
    poly64 = hull2d_polygon(1.0, 0.0, 0.5, -0.5, UNIT_RECT, k=64)
    resid64 = (poly64[:, 0] + 0.5) * poly64[:, 1] - 0.5
    assert np.min(resid64) > np.min(resid)  # outer gap shrinks with k
    # curve containment (soundness)
    xs = np.linspace(0, 1, 4001)
    ys = 0.5 / (xs + 0.5)
    hp = polygon_halfplanes(poly)
    worst = max(np.max(nx * xs + ny * ys - rhs) for nx, ny, rhs in hp)
    assert worst <= 1e-9


def test_polygon_degenerate_segment():
    poly = hull2d_polygon(0.0, 1.0, -1.0, 0.0, UNIT_RECT, k=8)  # x = y line
    assert len(poly) == 2


def test_polygon_converges_to_true_hull():
    # xy = 0.5: hull is {xy >= 0.5, x + y <= 1.5} in the unit box
    prev = None
    for k in (8, 16, 32, 64):
        poly = hull2d_polygon(1.0, 0.0, 0.0, -0.5, UNIT_RECT, k=k)
        smin = float(np.min(poly @ np.array([1.0, 1.0])))
        smax = float(np.max(poly @ np.array([1.0, 1.0])))
        assert smax == pytest.approx(1.5, abs=1e-9)  # chord edge is exact
        gap = 2 * math.sqrt(0.5) - smin  # true min of x+y on the hull
        assert 0 <= gap
        if prev is not None:
            assert gap <= prev + 1e-12
        prev = gap
    assert prev < 1e-3  # k = 64


def test_empty_curve_raises():
    with pytest.raises(EmptyCurve):
        hull2d_polygon(1.0, 0.0, 0.0, -5.0, UNIT_RECT, k=8)


# -- lifted hull OA ------------------------------------------------------------


def test_hull_oa_xy_equals_half():
    con = BilinearConstraint([[1.0]], [0.0], [0.0], -0.5)
    hull = build_hull_oa(con, BoxBounds.unit(1, 1), k=8)
    lo, hi = _minmax(hull.lifted, {"x0": 1})
    assert lo == pytest.approx(0.5, abs=1e-6)
    assert hi == pytest.approx(1.0, abs=1e-6)


def test_hull_oa_equal_products_row1():
    # hull of {x*y1 = 0.5} in (x, y1, y2): max x + y1 = 1.5
    inst = equal_products_instance()
    hull = build_hull_oa(inst.constraints[0], inst.box, k=32)
    res = solve_lp(intersect([box_poly(inst), hull.lifted]), {"x0": 1, "y0": 1}, "max")
    assert res.value == pytest.approx(1.5, abs=1e-3)


def test_hull_oa_contains_known_points():
    # second row of the closure-gap set: 5xy1 + 3y1 + 3y2 = 6
    inst = closure_gap_instance()
    hull = build_hull_oa(inst.constraints[1], inst.box, k=16)
    for pt in [(1.0, 0.5, 2 / 3), (0.6, 1.0, 0.0)]:
        q = intersect([box_poly(inst), hull.lifted])
        q.add_row({"x0": 1}, EQ, pt[0])
        q.add_row({"y0": 1}, EQ, pt[1])
        q.add_row({"y1": 1}, EQ, pt[2])
        assert solve_lp(q, {"x0": 1}).status == OPTIMAL, pt


def test_hull_oa_soundness_embedded_face_points():
    hull = None
    for seed in range(11, 30):
        inst = gen_random(RandomSpec(2, 2, seed=seed))[0]
        con = inst.constraints[0]
        try:
            hull = build_hull_oa(con, inst.box, k=8)
            break
        except EmptyHull:
            continue
    assert hull is not None
    # every disjunct's curve point, embedded with its fixings, satisfies the
    # lifted rows via the obvious assignment (its own mu = 1)
    checked = 0
    for t, d in enumerate(hull.disjuncts):
        from bilagg.geom2d import sample_pieces

        if isinstance(d.piece, str):
            continue
        pts = sample_pieces([d.piece], 64)
        for (px, py) in pts[:: max(1, len(pts) // 8)]:
            x = np.zeros(hull.lifted.nvars)
            names = hull.lifted.index
            full = {f"x{d.free_x}": px, f"y{d.free_y}": py}
            full.update({f"x{i}": v for i, v in d.fix_x})
            full.update({f"y{j}": v for j, v in d.fix_y})
            for n, v in full.items():
                x[names[n]] = v
            x[names[f"{hull.tag}.{t}.x"]] = px
            x[names[f"{hull.tag}.{t}.y"]] = py
            x[names[f"{hull.tag}.{t}.m"]] = 1.0
            assert hull.lifted.max_violation(x) <= 1e-8
            checked += 1
    assert checked > 20


def test_monotone_tightening_in_k():
    inst = example1()
    rng = np.random.default_rng(5)
    for con in inst.constraints:
        for _ in range(4):
            c = {"x0": float(rng.normal()), "y0": float(rng.normal())}
            prev = None
            for k in (4, 8, 16):
                hull = build_hull_oa(con, inst.box, k=k)
                val = solve_lp(intersect([box_poly(inst), hull.lifted]), c, "max").value
                if prev is not None:
                    assert val <= prev + 1e-9
                prev = val


def test_hull_dominates_mccormick_single_constraint():
    rng = np.random.default_rng(17)
    for seed in (1, 2, 3):
        base = gen_random(RandomSpec(2, 2, seed=seed))[0]
        inst = Instance(2, 2, base.constraints[:1], base.box, base.f, base.g)
        try:
            relax = onerow_relaxation(inst, k=12)
        except EmptyHull:
            continue
        mc = mccormick(inst)
        for _ in range(4):
            c = {f"x{i}": float(rng.normal()) for i in range(2)}
            c.update({f"y{j}": float(rng.normal()) for j in range(2)})
            b_hull = solve_lp(relax, c, "min").value
            b_mc = solve_lp(mc, c, "min").value
            assert b_hull >= b_mc - 1e-7


# -- one-row relaxation --------------------------------------------------------


def test_example1_onerow_bracket_and_aggregation_pinch():
    inst = example1()
    relax = onerow_relaxation(inst, k=64)
    lo, hi = _minmax(relax, {"x0": 1})
    # frozen oracle bracket: the two hulls overlap well beyond {0.5}
    assert lo == pytest.approx(0.47068, abs=2e-3)
    assert hi == pytest.approx(0.53364, abs=2e-3)
    assert lo < 0.5 - 1e-3 and hi > 0.5 + 1e-3
    # adding the hull of the (1,-1) aggregation (a line) pins x = y = 0.5
    line = aggregate(inst, (1.0, -1.0))
    tight = onerow_relaxation(inst, k=64, extra_constraints=[line], anchors=(0.5,))
    for coeffs in ({"x0": 1}, {"y0": 1}):
        lo, hi = _minmax(tight, coeffs)
        assert lo == pytest.approx(0.5, abs=1e-6)
        assert hi == pytest.approx(0.5, abs=1e-6)


def test_onerow_relaxation_infeasible_row():
    con_ok = BilinearConstraint([[1.0]], [0.0], [0.0], -0.5)
    con_bad = BilinearConstraint([[1.0]], [0.0], [0.0], -5.0)
    inst = Instance(1, 1, (con_ok, con_bad), BoxBounds.unit(1, 1), [1.0], [1.0])
    with pytest.raises(EmptyHull):
        onerow_relaxation(inst, k=8)
