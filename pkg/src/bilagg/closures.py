"""Certificate machinery for the two aggregation-closure counterexamples.

Family one is the equal-products set {x y1 = 1/2, x y2 = 1/2} in [0,1]^3: its
hull lies in the plane y1 = y2, every *finite* family of aggregations leaves a
symmetric gap (witnessed by explicit convex combinations inside each aggregated
set), and the full closure over all weights recovers the hull (slab argument).

Family two is {-2xy1 + 9xy2 + y1 - 5y2 = 0, 5xy1 + 3y1 + 3y2 = 6}: the point
(7/10, 7/8, 1/6) lies in conv(S_lambda) for every weight pair - certified by
closed-form points and convex multipliers in six parameter ranges - yet is
separated from conv(S) by the plane -2x + 10y1 - 10y2 = 5.  All certificate
arithmetic runs in floats or exactly over Fractions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .instances import closure_gap_instance, equal_products_instance
from .lpcore import EQ, OPTIMAL, solve_lp, intersect
from .model import aggregate
from .onerow import box_poly, build_hull_oa


class ThetaOutOfRange(ValueError):
    pass


class NonNormalizableWeights(ValueError):
    pass


# ---------------------------------------------------------------------------
# equal-products family
# ---------------------------------------------------------------------------


def equal_products_membership(point, tol=1e-9):
    """Membership of (x, y1, y2) in conv({x y1 = 1/2, x y2 = 1/2} ∩ box).

    The hull is exactly {x(y1+y2) >= 1, x + y1 <= 1.5, y1 = y2} in the box.
    For strict-interior members (x > 1/2, y1 < 1) the two-point decomposition
    through (1/2, 1, 1) is returned and re-verified to 1e-12.
    """
    x, y1, y2 = (float(v) for v in point)
    inside_box = all(-tol <= v <= 1 + tol for v in (x, y1, y2))
    member = (
        inside_box
        and x * (y1 + y2) >= 1.0 - tol
        and x + y1 <= 1.5 + tol
        and abs(y1 - y2) <= tol
    )
    if not member:
        return False, None
    if x > 0.5 + tol and y1 < 1.0 - tol:
        xt = (x - 0.5) / (1.0 - y1)
        yt = (1.0 - y1) / (2.0 * x - 1.0)
        lam = (2.0 * x * y1 - 1.0) / (2.0 * x + y1 - 2.0)
        recon = tuple(
            lam * a + (1.0 - lam) * b for a, b in zip((0.5, 1.0, 1.0), (xt, yt, yt))
        )
        if max(abs(r - v) for r, v in zip(recon, (x, y1, y2))) > 1e-12:
            raise AssertionError("two-point decomposition failed to reconstruct")
        return True, {"lam": lam, "p_corner": (0.5, 1.0, 1.0), "p_curve": (xt, yt, yt)}
    return True, None


def _normalize_pair(lam):
    l1, l2 = lam
    if l1 == 0 and l2 == 0:
        raise NonNormalizableWeights("zero weight pair")
    if abs(l1) <= 1e-14 * max(1.0, abs(l2)):
        return ("axis", None)
    return ("theta", l2 / l1)


def witness_eps_hat(theta):
    """Largest symmetric offset eps with (3/4, 17/24+eps, 17/24-eps) in
    conv(S_lambda) certified by the closed-form evidence, for lambda=(1,theta).
    """
    if theta >= 4 / 3 or theta < -1:
        return (theta + 1) / (theta - 1) / 24
    # -1 <= theta < 4/3: via the auxiliary on-curve point and (19/24, 17/24, ...)
    return (12 + 5 * theta) / (288 - 168 * theta)


def _evidence_for(theta):
    """(eps_hat, [(point, weight), ...]) whose combination is the witness at
    eps_hat and whose points all satisfy x*y1 - 1/2 + theta*(x*y2 - 1/2) = 0
    or lie in S itself."""
    eh = witness_eps_hat(theta)
    if theta >= 4 / 3 or theta < -1:
        w = (0.75, 17 / 24 + eh, 17 / 24 - eh)
        return eh, [(w, 1.0)]
    xa = (6 * theta + 6) / (12 + 5 * theta)
    pa = (xa, 1.0, 10 / 24)
    mu = (1 / 24) / (19 / 24 - xa)
    # (19/24, 17/24, 17/24) = 5/12*(1/2,1,1) + 7/12*(1,1/2,1/2), both in S
    return eh, [
        (pa, mu),
        ((0.5, 1.0, 1.0), (1.0 - mu) * 5 / 12),
        ((1.0, 0.5, 0.5), (1.0 - mu) * 7 / 12),
    ]


BASE_DECOMP = [
    ((1.0, 0.5, 0.5), 0.25),
    ((0.5, 1.0, 1.0), 0.25),
    ((0.75, 2 / 3, 2 / 3), 0.5),
]  # = (3/4, 17/24, 17/24), all three points in S


@dataclass
class WitnessReport:
    eps0: float
    witness: tuple
    per_lambda: list
    rejected_by_membership: bool


def finite_closure_gap_witness(lambdas, tol=1e-10):
    """Common witness off the y1 = y2 plane lying in every conv(S_lambda).

    For each weight pair the report carries explicit points of S_lambda and
    convex multipliers combining to the witness, verified to `tol`; the
    witness itself fails the hull membership test (it has y1 != y2).
    """
    if not len(lambdas):
        raise NonNormalizableWeights("empty weight family")
    inst = equal_products_instance()
    g = [lambda x, y1, y2, c=c: c.residual([x], [y1, y2]) for c in inst.constraints]
    entries = []
    eps0 = math.inf
    for lam in lambdas:
        kind, theta = _normalize_pair(lam)
        if kind == "axis":
            eh, ev = 1 / 24, [((0.75, 0.75, 2 / 3), 1.0)]
        else:
            eh, ev = _evidence_for(theta)
        entries.append((lam, kind, theta, eh, ev))
        eps0 = min(eps0, eh)
    assert eps0 > 0
    witness = (0.75, 17 / 24 + eps0, 17 / 24 - eps0)
    per_lambda = []
    for lam, kind, theta, eh, ev in entries:
        t = eps0 / eh
        points = [p for p, _ in ev] + [p for p, _ in BASE_DECOMP]
        weights = [t * w for _, w in ev] + [(1.0 - t) * w for _, w in BASE_DECOMP]
        l1, l2 = (0.0, 1.0) if kind == "axis" else (1.0, theta)
        resid = max(abs(l1 * g[0](*p) + l2 * g[1](*p)) for p in points)
        comb = np.zeros(3)
        for p, w in zip(points, weights):
            comb += np.asarray(p) * w
        rep = {
            "lam": tuple(lam),
            "eps_hat": eh,
            "points": points,
            "weights": weights,
            "resid_member": resid,
            "resid_weight_sum": abs(sum(weights) - 1.0),
            "resid_combination": float(np.max(np.abs(comb - np.asarray(witness)))),
            "in_box": all(-1e-12 <= v <= 1 + 1e-12 for p in points for v in p),
        }
        if max(rep["resid_member"], rep["resid_weight_sum"], rep["resid_combination"]) > tol:
            raise AssertionError(f"witness evidence exceeded tolerance for {lam}: {rep}")
        per_lambda.append(rep)
    member, _ = equal_products_membership(witness)
    return WitnessReport(eps0, witness, per_lambda, rejected_by_membership=not member)


@dataclass(frozen=True)
class ClosureSlab:
    """Half-space pair containing S_(1,-theta): (y1-1/2) - theta*(y2-1/2) >= 0
    for theta < 1 (and <= 0 for theta > 1), plus the mirrored swap."""

    theta: float

    def halfspace(self):
        sense = 1.0 if self.theta < 1.0 else -1.0
        # sense * ((y1 - 0.5) - theta (y2 - 0.5)) >= 0
        return (sense, -sense * self.theta, sense * 0.5 * (1.0 - self.theta))

    def contains(self, y1, y2, tol=1e-9):
        a, b, rhs = self.halfspace()
        return a * y1 + b * y2 >= rhs - tol


def sample_aggregation_points(theta, n=40):
    """Points of S_(1,-theta) = {x y1 - theta x y2 = (1-theta)/2} in the box."""
    pts = []
    for x in np.linspace(0.05, 1.0, n):
        for y2 in np.linspace(0.0, 1.0, n):
            y1 = (0.5 * (1.0 - theta) + theta * x * y2) / x
            if -1e-12 <= y1 <= 1 + 1e-12:
                pts.append((float(x), float(min(max(y1, 0.0), 1.0)), float(y2)))
    return pts


def slab_width(theta, engine=None):
    """max |y1 - y2| over the slab of theta intersected with its mirror."""
    from .lpcore import Polyhedron

    p = Polyhedron()
    p.add_var("y1", 0.0, 1.0)
    p.add_var("y2", 0.0, 1.0)
    a, b, rhs = ClosureSlab(theta).halfspace()
    p.add_row({"y1": a, "y2": b}, ">=", rhs)
    p.add_row({"y1": b, "y2": a}, ">=", rhs)  # mirrored swap of y1 and y2
    hi = solve_lp(p, {"y1": 1.0, "y2": -1.0}, "max", engine=engine).value
    lo = solve_lp(p, {"y1": 1.0, "y2": -1.0}, "min", engine=engine).value
    return max(abs(hi), abs(lo))


def slab_convergence(thetas, samples=25):
    """Check S_(1,-theta) ⊆ slab on samples and report slab widths.

    Widths must decrease strictly toward 0 as theta -> 1 from either side.
    """
    out = []
    for theta in thetas:
        if theta == 1.0:
            raise ValueError("theta = 1 gives the trivial aggregation of equal rows")
        slab = ClosureSlab(theta)
        bad = [
            p for p in sample_aggregation_points(theta, samples)
            if not slab.contains(p[1], p[2])
        ]
        out.append({"theta": theta, "width": slab_width(theta), "violations": len(bad)})
    return out


# ---------------------------------------------------------------------------
# closure-gap family: certificates that (7/10, 7/8, 1/6) is in every
# conv(S_lambda)
# ---------------------------------------------------------------------------


def _exactness(theta):
    return isinstance(theta, Fraction) or isinstance(theta, int)


def gap_target(exact=False):
    if exact:
        return (Fraction(7, 10), Fraction(7, 8), Fraction(1, 6))
    return (0.7, 0.875, 1 / 6)


# case-range boundary (863 + sqrt(7682449)) / 4110, handled by the squared
# comparison so exact rationals never need the irrational value itself
_C56_NUM = 7682449


def _ge_c56(theta):
    t = 4110 * theta - 863
    return t >= 0 and t * t >= _C56_NUM


def _case_of(theta):
    if theta <= Fraction(-5, 3):
        return 2
    if theta <= Fraction(-3, 5):
        return 3
    if theta <= Fraction(-211, 665):
        return 4
    if theta <= Fraction(1, 3):
        return 5
    if not _ge_c56(theta):
        return 6
    return 5


def _gap_rows(x, y1, y2):
    """The two defining rows, in whatever arithmetic the inputs carry."""
    g1 = -2 * x * y1 + 9 * x * y2 + y1 - 5 * y2
    g2 = 5 * x * y1 + 3 * y1 + 3 * y2 - 6
    return g1, g2


@dataclass
class Certificate:
    lam: tuple
    case: int
    points: list
    weights: list
    target: tuple

    def residuals(self):
        l1, l2 = self.lam
        res_member = 0.0
        for p in self.points:
            g1, g2 = _gap_rows(*p)
            res_member = max(res_member, abs(float(l1 * g1 + l2 * g2)))
        wsum = abs(float(sum(self.weights) - 1))
        wrange = max(max(float(-w), float(w - 1), 0.0) for w in self.weights)
        comb = [sum(w * p[i] for w, p in zip(self.weights, self.points)) for i in range(3)]
        res_comb = max(abs(float(c - t)) for c, t in zip(comb, self.target))
        box = max(
            max(float(-v), float(v - 1), 0.0) for p in self.points for v in p
        )
        return {
            "membership": res_member,
            "weight_sum": wsum,
            "weight_range": wrange,
            "combination": res_comb,
            "box": box,
        }

    def max_residual(self):
        return max(self.residuals().values())


def _case2(th):
    p1 = (0 * th, (3 * th + 5) / (3 * th + 1), 1 + 0 * th)
    p2 = (1 + 0 * th, 6 * th / (8 * th - 1), 0 * th)
    p3 = (1 + 0 * th, (3 * th - 4) / (8 * th - 1), 1 + 0 * th)
    p4 = ((3 * th - 1) / (5 * th - 2), 1 + 0 * th, 0 * th)
    w1 = 47 * (1 + 3 * th) / (120 * (1 + 47 * th))
    w2 = (122 + 1343 * th - 1645 * th ** 2) / (120 * (1 + 47 * th) * (1 - 2 * th))
    w3 = (799 * th - 27) / (120 * (1 + 47 * th))
    w4 = -11 * (1 - 141 * th) * (2 - 5 * th) / (120 * (1 + 47 * th) * (1 - 2 * th))
    return [p1, p2, p3, p4], [w1, w2, w3, w4]


def _case3(th):
    p1 = ((3 * th + 5) / 9, 0 * th, 1 + 0 * th)
    p2 = (1 + 0 * th, 6 * th / (8 * th - 1), 0 * th)
    p3 = (1 + 0 * th, (3 * th - 4) / (8 * th - 1), 1 + 0 * th)
    p4 = ((3 * th - 1) / (5 * th - 2), 1 + 0 * th, 0 * th)
    w1 = 141 / (40 * (3 * th - 4) * (5 * th - 11))
    w2 = (402 - 595 * th + 100 * th ** 2) / (120 * (2 * th - 1) * (5 * th - 11))
    w3 = (457 - 1060 * th + 300 * th ** 2) / (120 * (3 * th - 4) * (5 * th - 11))
    w4 = (5 * th - 2) * (180 * th - 349) / (120 * (2 * th - 1) * (5 * th - 11))
    return [p1, p2, p3, p4], [w1, w2, w3, w4]


def _case4(th):
    den = 65 - 556 * th - 160 * th ** 2 + 75 * th ** 3
    p1 = ((3 * th + 5) / 9, 0 * th, 1 + 0 * th)
    p2 = (1 + 0 * th, 6 * th / (8 * th - 1), 0 * th)
    p3 = (4 / (5 * th + 7), 1 + 0 * th, 1 + 0 * th)
    p4 = ((3 * th - 1) / (5 * th - 2), 1 + 0 * th, 0 * th)
    w1 = -3 * (211 + 665 * th) / (40 * den)
    w2 = (-1 + 8 * th) * (958 - 785 * th - 800 * th ** 2 + 375 * th ** 3) / (40 * (-1 + 2 * th) * den)
    w3 = (7 + 5 * th) * (457 - 1060 * th + 300 * th ** 2) / (120 * den)
    w4 = (-2 + 5 * th) * (1813 - 17094 * th - 3355 * th ** 2 + 1200 * th ** 3) / (
        120 * (-1 + 2 * th) * den
    )
    return [p1, p2, p3, p4], [w1, w2, w3, w4]


def _case5(th):
    den2 = 1249 + 728 * th - 3405 * th ** 2
    p1 = (4 / (5 * th + 7), 1 + 0 * th, 1 + 0 * th)
    p2 = (
        1 + 0 * th,
        (844 + 863 * th - 2055 * th ** 2) / den2,
        -(-1 + 2 * th) * (211 + 665 * th) / den2,
    )
    p3 = ((3 * th - 1) / (5 * th - 2), 1 + 0 * th, 0 * th)
    w1 = 47 * (7 + 5 * th) / (1080 * (3 + 5 * th))
    w2 = (-1249 - 728 * th + 3405 * th ** 2) / (1080 * (-1 + 2 * th) * (3 + 5 * th))
    w3 = 277 * (-2 + 5 * th) / (1080 * (-1 + 2 * th))
    return [p1, p2, p3], [w1, w2, w3]


def _case6(th):
    den = 712 + 6629 * th + 5685 * th ** 2
    p1 = (4 / (5 * th + 7), 1 + 0 * th, 1 + 0 * th)
    p2 = (1 + 0 * th, 0 * th, 6 * th / (3 * th + 4))
    p3 = (
        2 * (976 + 1137 * th) / (45 * (68 + 69 * th)),
        1 + 0 * th,
        (844 + 863 * th - 2055 * th ** 2) / (27 * (4 + 3 * th) * (21 + 115 * th)),
    )
    w1 = (7 + 5 * th) * (-412 + 1635 * th) / (16 * den)
    w2 = Fraction(1, 8) if _exactness(th) else 0.125
    w3 = 9 * (68 + 69 * th) * (21 + 115 * th) / (16 * den)
    return [p1, p2, p3], [w1, w2, w3]


_CASE_FN = {2: _case2, 3: _case3, 4: _case4, 5: _case5, 6: _case6}

_CASE_RANGES = {
    2: lambda th: th <= Fraction(-5, 3),
    3: lambda th: Fraction(-5, 3) <= th <= Fraction(-3, 5),
    4: lambda th: Fraction(-3, 5) <= th <= Fraction(-211, 665),
    5: lambda th: Fraction(-211, 665) <= th <= Fraction(1, 3) or _ge_c56(th),
    6: lambda th: Fraction(1, 3) <= th and not _strictly_gt_c56(th),
}


def _strictly_gt_c56(theta):
    t = 4110 * theta - 863
    return t > 0 and t * t > _C56_NUM


def closure_gap_certificate(theta=None, lam=None, case=None, exact=False):
    """Closed-form certificate that the target point is in conv(S_lambda).

    Call with lam=(0, 1) for the axis case, or theta for lambda = (1, theta).
    Pass a Fraction theta (or exact=True for the axis case) for exact rational
    arithmetic.  `case` overrides the default dispatch at boundary values
    shared by two ranges (both adjacent certificates must verify there).
    """
    if lam is not None:
        if tuple(lam) != (0, 1):
            raise ThetaOutOfRange("only lam = (0, 1) is a non-theta certificate")
        one = Fraction(1) if exact else 1.0
        pts = [(1 * one, one / 2, 2 * one / 3), (3 * one / 5, 1 * one, 0 * one)]
        wts = [one / 4, 3 * one / 4]
        return Certificate((0.0, 1.0), 1, pts, wts, gap_target(exact))
    if theta is None:
        raise ValueError("provide theta or lam")
    if exact and not isinstance(theta, Fraction):
        theta = Fraction(theta)
    if case is None:
        case = _case_of(theta)
    elif case not in _CASE_FN or not _CASE_RANGES[case](theta):
        raise ThetaOutOfRange(f"theta = {theta} outside the range of case {case}")
    pts, wts = _CASE_FN[case](theta)
    return Certificate((1.0, theta), case, pts, wts, gap_target(_exactness(theta)))


def separation_margin(point):
    """-2x + 10 y1 - 10 y2 - 5: positive on the target side, negative on S."""
    x, y1, y2 = point
    return -2 * x + 10 * y1 - 10 * y2 - 5


def separation_threshold():
    """Least x for which the gap set has points in the box."""
    return (2 + 4 * math.sqrt(34)) / 45


def gap_set_parameterization(x):
    """(y1, y2) of the gap set as functions of x (where defined)."""
    den = 45 * x ** 2 + 8 * x - 18
    return (54 * x - 30) / den, (12 * x - 6) / den


def separation_curve_value(x):
    """g(x) = -2x + 10 y1(x) - 10 y2(x) in closed form."""
    return (240 - 456 * x + 16 * x ** 2 + 90 * x ** 3) / (18 - 8 * x - 45 * x ** 2)


def gap_point_hull_feasible(theta=None, lam=None, k=16, tol=1e-6):
    """Outer-approximation check that the target lies in the hull OA of
    S_lambda (LP feasibility of the pinned point)."""
    inst = closure_gap_instance()
    weights = (0.0, 1.0) if lam is not None else (1.0, float(theta))
    con = aggregate(inst, weights)
    hull = build_hull_oa(con, inst.box, k=k, tag="gap")
    poly = intersect([box_poly(inst), hull.lifted])
    tx, ty1, ty2 = gap_target()
    poly.add_row({"x0": 1.0}, EQ, tx)
    poly.add_row({"y0": 1.0}, EQ, ty1)
    poly.add_row({"y1": 1.0}, EQ, ty2)
    res = solve_lp(poly, {"x0": 1.0}, "min")
    return res.status == OPTIMAL
