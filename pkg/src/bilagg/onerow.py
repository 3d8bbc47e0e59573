"""Polyhedral outer approximation of conv(single bilinear row ∩ box).

The hull of one bilinear bipartite equality over a box is the convex hull of
the union of its restrictions to the 2D faces obtained by fixing all but one
x- and one y-variable to bounds.  Each restriction is a conic section piece in
a rectangle; its hull is outer-approximated by a tangent-cut polygon, and the
union is modeled by the standard extended (disjunctive) formulation with one
weight per piece.  McCormick envelopes live here too as the baseline
relaxation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import geom2d
from .geom2d import Rect, Segment, arc_outer_polygon, constraint_pieces
from .lpcore import EQ, GE, LE, Polyhedron, intersect
from .model import BilinearConstraint, BoxBounds, Instance, constraint_support


class DisjunctBudgetExceeded(RuntimeError):
    """Too many 2D pieces; aggregate fewer/denser rows or raise the cap."""


class EmptyHull(RuntimeError):
    """The constraint is infeasible over the box."""


class EmptyCurve(ValueError):
    """The reduced 2D constraint has no points in the rectangle."""


DEFAULT_CAP = 4096
K_ROOT = 16
K_NODE = 8


@dataclass
class Disjunct2D:
    """One 2D face restriction of a bilinear row.

    free_x/free_y are the indices left free; fix_x/fix_y assign every other
    supported variable to a box bound.  The reduced constraint is
    q*x*y + al*x + be*y + ga = 0 and `piece` is its in-rectangle geometry
    (one monotone arc or one segment after degenerate splitting).
    """

    free_x: int
    free_y: int
    fix_x: tuple
    fix_y: tuple
    q: float
    al: float
    be: float
    ga: float
    rect: Rect
    piece: object
    polygon: np.ndarray | None = None

    def build_polygon(self, k, anchors=()):
        if isinstance(self.piece, Segment):
            self.polygon = np.array([self.piece.p0, self.piece.p1])
            if np.allclose(self.piece.p0, self.piece.p1):
                self.polygon = self.polygon[:1]
        elif isinstance(self.piece, str) and self.piece == "rect":
            self.polygon = self.rect.corners()
        else:
            self.polygon = arc_outer_polygon(self.piece, k, anchors)
        return self.polygon


def raw_disjunct_count(con: BilinearConstraint):
    sx, sy = constraint_support(con)
    s1, s2 = len(sx), len(sy)
    if s1 == 0 or s2 == 0:
        return 0
    return s1 * s2 * 2 ** (s1 + s2 - 2)


def _rect_of(box: BoxBounds, i, j):
    return Rect(float(box.lo_x[i]), float(box.hi_x[i]), float(box.lo_y[j]), float(box.hi_y[j]))


def enumerate_disjuncts(con: BilinearConstraint, box: BoxBounds, cap=DEFAULT_CAP):
    """All nonempty 2D face restrictions of the constraint over the box.

    Degenerate hyperbolas (two lines) and two-branch cases are split so each
    returned disjunct carries one monotone piece.  Returns [] iff the
    constraint has no feasible point in the box.
    """
    sx, sy = constraint_support(con)
    s1, s2 = len(sx), len(sy)
    if s1 == 0 or s2 == 0 or np.all(con.Q[np.ix_(sx, sy)] == 0.0):
        return []  # linear row: no 2D faces, callers emit it directly
    raw = raw_disjunct_count(con)
    if raw > cap:
        raise DisjunctBudgetExceeded(
            f"{raw} disjuncts exceed the cap {cap}; aggregate fewer/denser rows"
        )
    sx_arr = np.asarray(sx, dtype=int)
    sy_arr = np.asarray(sy, dtype=int)
    out = []
    for i in sx:
        for j in sy:
            ox = [t for t in sx if t != i]
            oy = [t for t in sy if t != j]
            fx = (
                np.array(list(itertools.product(*[(box.lo_x[t], box.hi_x[t]) for t in ox])))
                if ox else np.zeros((1, 0))
            )
            fy = (
                np.array(list(itertools.product(*[(box.lo_y[t], box.hi_y[t]) for t in oy])))
                if oy else np.zeros((1, 0))
            )
            q = float(con.Q[i, j])
            al_vec = con.a[i] + (fy @ con.Q[i, oy] if oy else np.zeros(1))
            be_vec = con.b[j] + (fx @ con.Q[ox, j] if ox else np.zeros(1))
            ga_mat = (
                con.c
                + (fx @ con.a[ox] if ox else np.zeros(1))[:, None]
                + (fy @ con.b[oy] if oy else np.zeros(1))[None, :]
                + (fx @ con.Q[np.ix_(ox, oy)] @ fy.T if (ox and oy) else 0.0)
            )
            rect = _rect_of(box, i, j)
            for px in range(len(fx)):
                for py in range(len(fy)):
                    al = float(al_vec[py])
                    be = float(be_vec[px])
                    ga = float(ga_mat[px, py])
                    pieces = constraint_pieces(q, al, be, ga, rect)
                    if pieces == "all":
                        pieces = ["rect"]
                    for pc in pieces:
                        out.append(
                            Disjunct2D(
                                free_x=i, free_y=j,
                                fix_x=tuple(zip(ox, map(float, fx[px]))),
                                fix_y=tuple(zip(oy, map(float, fy[py]))),
                                q=q, al=al, be=be, ga=ga, rect=rect, piece=pc,
                            )
                        )
    return out


def hull2d_polygon(q, al, be, ga, rect=geom2d.UNIT_RECT, k=K_ROOT, anchors=()):
    """Outer polygon for conv({q x y + al x + be y + ga = 0} ∩ rect).

    Raises EmptyCurve when the curve misses the rectangle.
    """
    pieces = constraint_pieces(q, al, be, ga, rect)
    if pieces == "all":
        return rect.corners()
    poly = geom2d.pieces_outer_polygon(pieces, k, anchors)
    if poly is None:
        raise EmptyCurve("curve does not meet the rectangle")
    return poly


@dataclass
class HullOA:
    """Lifted outer approximation of conv(constraint ∩ box)."""

    constraint: BilinearConstraint
    box: BoxBounds
    disjuncts: list
    lifted: Polyhedron
    tag: str


def _linear_hull(con, box, tag):
    """Exact hull of a linear row over the box: the row itself."""
    p = Polyhedron()
    sx, sy = constraint_support(con)
    coeffs = []
    lo, hi = float(con.c), float(con.c)
    for i in sx:
        p.add_var(f"x{i}", box.lo_x[i], box.hi_x[i])
        coeffs.append((f"x{i}", con.a[i]))
        lo += min(con.a[i] * box.lo_x[i], con.a[i] * box.hi_x[i])
        hi += max(con.a[i] * box.lo_x[i], con.a[i] * box.hi_x[i])
    for j in sy:
        p.add_var(f"y{j}", box.lo_y[j], box.hi_y[j])
        coeffs.append((f"y{j}", con.b[j]))
        lo += min(con.b[j] * box.lo_y[j], con.b[j] * box.hi_y[j])
        hi += max(con.b[j] * box.lo_y[j], con.b[j] * box.hi_y[j])
    scale = max(abs(con.c), 1.0)
    if lo > 1e-9 * scale or hi < -1e-9 * scale:
        raise EmptyHull("linear row cannot vanish over the box")
    if coeffs:
        p.add_row(coeffs, EQ, -con.c)
    elif abs(con.c) > 1e-12:
        raise EmptyHull("constant row c != 0")
    return p


def build_hull_oa(con: BilinearConstraint, box: BoxBounds, k=K_ROOT, tag="h",
                  cap=DEFAULT_CAP, anchors=()):
    """Extended-formulation outer approximation of conv(constraint ∩ box).

    Per disjunct d the lifted polyhedron carries a scaled free pair
    (X_d, Y_d) and a weight mu_d; polygon rows are scaled by mu_d and the
    original variables are recovered through linking rows.  The projection
    onto the original variables contains conv(constraint ∩ box).
    """
    sx, sy = constraint_support(con)
    if len(sx) == 0 and len(sy) == 0:
        if abs(con.c) > 1e-12:
            raise EmptyHull("constant row c != 0")
        return HullOA(con, box, [], Polyhedron(), tag)
    if len(sx) == 0 or len(sy) == 0 or np.all(con.Q[np.ix_(sx, sy)] == 0.0):
        return HullOA(con, box, [], _linear_hull(con, box, tag), tag)
    disjuncts = enumerate_disjuncts(con, box, cap)
    if not disjuncts:
        raise EmptyHull("all 2D faces are empty: constraint infeasible over box")
    p = Polyhedron()
    for i in sx:
        p.add_var(f"x{i}", box.lo_x[i], box.hi_x[i])
    for j in sy:
        p.add_var(f"y{j}", box.lo_y[j], box.hi_y[j])
    link_x = {i: [] for i in sx}  # var index -> (aux name, coef) contributions
    link_y = {j: [] for j in sy}
    conv_row = []
    for t, d in enumerate(disjuncts):
        d.build_polygon(k, anchors)
        xn, yn, mn = f"{tag}.{t}.x", f"{tag}.{t}.y", f"{tag}.{t}.m"
        p.add_var(xn, min(0.0, d.rect.xl), max(0.0, d.rect.xu))
        p.add_var(yn, min(0.0, d.rect.yl), max(0.0, d.rect.yu))
        p.add_var(mn, 0.0, 1.0)
        for (nx, ny, rhs) in geom2d.polygon_halfplanes(d.polygon):
            p.add_row([(xn, nx), (yn, ny), (mn, -rhs)], LE, 0.0)
        conv_row.append((mn, 1.0))
        link_x[d.free_x].append((xn, 1.0))
        link_y[d.free_y].append((yn, 1.0))
        for i, v in d.fix_x:
            if v != 0.0:
                link_x[i].append((mn, v))
        for j, v in d.fix_y:
            if v != 0.0:
                link_y[j].append((mn, v))
    p.add_row(conv_row, EQ, 1.0)
    for i in sx:
        p.add_row([(f"x{i}", 1.0)] + [(n, -c) for n, c in link_x[i]], EQ, 0.0)
    for j in sy:
        p.add_row([(f"y{j}", 1.0)] + [(n, -c) for n, c in link_y[j]], EQ, 0.0)
    return HullOA(con, box, disjuncts, p, tag)


def box_poly(inst_or_box, n1=None, n2=None):
    """Variable-bound polyhedron of the instance box."""
    if isinstance(inst_or_box, Instance):
        box, n1, n2 = inst_or_box.box, inst_or_box.n1, inst_or_box.n2
    else:
        box = inst_or_box
    p = Polyhedron()
    for i in range(n1):
        p.add_var(f"x{i}", box.lo_x[i], box.hi_x[i])
    for j in range(n2):
        p.add_var(f"y{j}", box.lo_y[j], box.hi_y[j])
    return p


def mccormick(inst: Instance, box: BoxBounds | None = None):
    """McCormick relaxation: one shared w variable per bilinear pair, four
    envelope rows each, the linearized rows, side constraints and the box.
    """
    box = box or inst.box
    p = box_poly(box, inst.n1, inst.n2)
    pairs = set()
    for con in inst.constraints:
        ii, jj = np.nonzero(con.Q)
        pairs.update(zip(ii.tolist(), jj.tolist()))
    pairs = sorted(pairs)
    for (i, j) in pairs:
        lx, ux = float(box.lo_x[i]), float(box.hi_x[i])
        ly, uy = float(box.lo_y[j]), float(box.hi_y[j])
        w = f"w.{i}.{j}"
        vals = (lx * ly, lx * uy, ux * ly, ux * uy)
        p.add_var(w, min(vals), max(vals))
        xi, yj = f"x{i}", f"y{j}"
        p.add_row({w: 1.0, yj: -lx, xi: -ly}, GE, -lx * ly)
        p.add_row({w: 1.0, yj: -ux, xi: -uy}, GE, -ux * uy)
        p.add_row({w: 1.0, yj: -ux, xi: -ly}, LE, -ux * ly)
        p.add_row({w: 1.0, yj: -lx, xi: -uy}, LE, -lx * uy)
    for con in inst.constraints:
        row = [(f"w.{i}.{j}", con.Q[i, j]) for (i, j) in pairs if con.Q[i, j] != 0]
        row += [(f"x{i}", con.a[i]) for i in range(inst.n1) if con.a[i] != 0]
        row += [(f"y{j}", con.b[j]) for j in range(inst.n2) if con.b[j] != 0]
        p.add_row(row, EQ, -con.c)
    if inst.extra_linear is not None:
        return intersect([p, inst.extra_linear])
    return p


def onerow_relaxation(inst: Instance, k=K_ROOT, box: BoxBounds | None = None,
                      cap=DEFAULT_CAP, extra_constraints=(), anchors=()):
    """Intersection of per-row hull OAs with the box and linear side rows.

    `extra_constraints` supplies additional (already aggregated) rows whose
    hulls tighten the relaxation; they share the same box.
    """
    box = box or inst.box
    parts = [box_poly(box, inst.n1, inst.n2)]
    for idx, con in enumerate(inst.constraints):
        parts.append(build_hull_oa(con, box, k, tag=f"c{idx}", cap=cap, anchors=anchors).lifted)
    for idx, con in enumerate(extra_constraints):
        parts.append(build_hull_oa(con, box, k, tag=f"a{idx}", cap=cap, anchors=anchors).lifted)
    if inst.extra_linear is not None:
        parts.append(inst.extra_linear)
    return intersect(parts)
