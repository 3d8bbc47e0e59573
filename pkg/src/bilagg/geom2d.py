"""Planar geometry kernel shared by the relaxation and hull-recipe modules.

Everything here works on a single scalar constraint

    q*x*y + al*x + be*y + ga = 0

restricted to an axis-aligned rectangle.  For q != 0 the constraint is the
hyperbola (x - u)(y - v) = w with

    u = -be/q,   v = -al/q,   w = (al*be - ga*q) / q**2,

whose in-rectangle portion decomposes into at most two monotone arcs (one per
branch).  Degenerate cases (q ~ 0 or w ~ 0) reduce to line segments.  Outer
polygons for arc hulls are built from tangent lines at nested Chebyshev-Lobatto
nodes, so doubling the tangent count never loosens the polygon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Coefficients below these (relative) thresholds are treated as exact zeros of
# the reduced constraint; geometry then degenerates to segments / empty sets.
COEF_ZERO = 1e-12
GEO_EPS = 1e-12


@dataclass(frozen=True)
class Rect:
    xl: float
    xu: float
    yl: float
    yu: float

    def width_x(self):
        return self.xu - self.xl

    def width_y(self):
        return self.yu - self.yl

    def contains(self, x, y, tol=1e-9):
        return (self.xl - tol <= x <= self.xu + tol) and (self.yl - tol <= y <= self.yu + tol)

    def corners(self):
        return np.array(
            [[self.xl, self.yl], [self.xu, self.yl], [self.xu, self.yu], [self.xl, self.yu]]
        )


UNIT_RECT = Rect(0.0, 1.0, 0.0, 1.0)


def convex_hull(points):
    """Monotone-chain convex hull; returns CCW vertices without repetition."""
    pts = np.asarray(points, dtype=float)
    if len(pts) == 0:
        return pts.reshape(0, 2)
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]
    if len(pts) > 1:
        d = np.abs(np.diff(pts, axis=0)).max(axis=1)
        pts = pts[np.concatenate([[True], d > 1e-15])]
    if len(pts) <= 2:
        return pts
    # plain-float chains: much faster than numpy scalar ops in the pop loop
    xs = pts[:, 0].tolist()
    ys = pts[:, 1].tolist()

    def half(idx_iter):
        out = []
        for i in idx_iter:
            xi, yi = xs[i], ys[i]
            while len(out) >= 2:
                x1, y1 = out[-2]
                x2, y2 = out[-1]
                if (x2 - x1) * (yi - y1) - (y2 - y1) * (xi - x1) <= 0.0:
                    out.pop()
                else:
                    break
            out.append((xi, yi))
        return out

    n = len(xs)
    lower = half(range(n))
    upper = half(range(n - 1, -1, -1))
    return np.array(lower[:-1] + upper[:-1])


def polygon_area(vertices):
    """Shoelace area of a closed polygon given as an (n,2) vertex array."""
    v = np.asarray(vertices, dtype=float)
    if len(v) < 3:
        return 0.0
    x, y = v[:, 0], v[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, 1)) - np.dot(y, np.roll(x, 1)))


def _ccw(vertices):
    v = np.asarray(vertices, dtype=float)
    if len(v) < 3:
        return v
    x, y = v[:, 0], v[:, 1]
    signed = 0.5 * (np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))
    return v if signed >= 0 else v[::-1]


def polygon_halfplanes(vertices):
    """Edge half-planes (nx, ny, rhs) with nx*x + ny*y <= rhs for a convex polygon.

    1 vertex -> two equality-style pairs pinning the point; 2 vertices -> the
    segment (line equality as an inequality pair plus the two end caps).
    """
    v = _ccw(np.asarray(vertices, dtype=float))
    rows = []
    if len(v) == 0:
        return rows
    if len(v) == 1:
        (px, py) = v[0]
        rows.append((1.0, 0.0, px))
        rows.append((-1.0, 0.0, -px))
        rows.append((0.0, 1.0, py))
        rows.append((0.0, -1.0, -py))
        return rows
    if len(v) == 2:
        d = v[1] - v[0]
        n = np.array([d[1], -d[0]])
        nn = np.hypot(n[0], n[1])
        if nn < 1e-300:
            return polygon_halfplanes(v[:1])
        n = n / nn
        c = float(n @ v[0])
        rows.append((n[0], n[1], c))
        rows.append((-n[0], -n[1], -c))
        t = d / np.hypot(d[0], d[1])
        rows.append((-t[0], -t[1], float(-t @ v[0])))
        rows.append((t[0], t[1], float(t @ v[1])))
        return rows
    d = np.roll(v, -1, axis=0) - v
    nn = np.hypot(d[:, 0], d[:, 1])
    keep = nn > 1e-14
    nx = d[keep, 1] / nn[keep]
    ny = -d[keep, 0] / nn[keep]
    rhs = nx * v[keep, 0] + ny * v[keep, 1]
    rhs = rhs + 1e-13 * (1.0 + np.abs(rhs))
    return list(zip(nx.tolist(), ny.tolist(), rhs.tolist()))


def point_in_polygon(vertices, x, y, tol=1e-9):
    for (nx, ny, rhs) in polygon_halfplanes(vertices):
        if nx * x + ny * y > rhs + tol:
            return False
    return True


# ---------------------------------------------------------------------------
# pieces of q*x*y + al*x + be*y + ga = 0 inside a rectangle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Arc:
    """Monotone hyperbola arc y = v + w/(x-u) for x in [x0, x1] (x0 <= x1)."""

    u: float
    v: float
    w: float
    x0: float
    x1: float

    def y_of(self, x):
        return self.v + self.w / (np.asarray(x) - self.u)

    def x_of(self, y):
        return self.u + self.w / (np.asarray(y) - self.v)

    def endpoints(self):
        return (self.x0, float(self.y_of(self.x0))), (self.x1, float(self.y_of(self.x1)))


@dataclass(frozen=True)
class Segment:
    p0: tuple
    p1: tuple


def _clip_line_to_rect(al, be, ga, rect):
    """Pieces of the line al*x + be*y + ga = 0 inside rect (segment/point/[])."""
    if abs(al) < 1e-300 and abs(be) < 1e-300:
        return []  # callers treat the 0 = 0 / 0 = c cases separately
    if abs(be) >= abs(al):
        # y(x) = -(al*x + ga)/be, clip the x-interval so y stays in [yl, yu]
        slope = -al / be
        xlo, xhi = rect.xl, rect.xu
        for bound, is_lower in ((rect.yl, True), (rect.yu, False)):
            if abs(al) < 1e-300:
                y0 = -ga / be
                if (y0 < bound - GEO_EPS and is_lower) or (y0 > bound + GEO_EPS and not is_lower):
                    return []
                continue
            xc = (-ga - be * bound) / al
            if (slope > 0) == is_lower:
                xlo = max(xlo, xc)
            else:
                xhi = min(xhi, xc)
        if xlo > xhi + GEO_EPS:
            return []
        xlo = min(max(xlo, rect.xl), rect.xu)
        xhi = min(max(xhi, rect.xl), rect.xu)
        p0 = (xlo, -(al * xlo + ga) / be)
        p1 = (xhi, -(al * xhi + ga) / be)
    else:
        # x(y) = -(be*y + ga)/al, clip the y-interval so x stays in [xl, xu]
        slope = -be / al
        ylo, yhi = rect.yl, rect.yu
        for bound, is_lower in ((rect.xl, True), (rect.xu, False)):
            if abs(be) < 1e-300:
                x0 = -ga / al
                if (x0 < bound - GEO_EPS and is_lower) or (x0 > bound + GEO_EPS and not is_lower):
                    return []
                continue
            yc = (-ga - al * bound) / be
            if (slope > 0) == is_lower:
                ylo = max(ylo, yc)
            else:
                yhi = min(yhi, yc)
        if ylo > yhi + GEO_EPS:
            return []
        ylo = min(max(ylo, rect.yl), rect.yu)
        yhi = min(max(yhi, rect.yl), rect.yu)
        p0 = (-(be * ylo + ga) / al, ylo)
        p1 = (-(be * yhi + ga) / al, yhi)
    if math.hypot(p1[0] - p0[0], p1[1] - p0[1]) <= GEO_EPS:
        mid = ((p0[0] + p1[0]) / 2, (p0[1] + p1[1]) / 2)
        return [Segment(mid, mid)]
    return [Segment(p0, p1)]


def _branch_arc(u, v, w, lo_sign, rect):
    """In-rect arc of the branch with sign(x-u) = lo_sign (+1 right, -1 left)."""
    # x-range where the branch's y lies within [yl, yu]
    # y = v + w/(x-u) is monotone on the branch; invert at the y-bounds.
    big = 1e30
    if lo_sign > 0:
        xa, xb = u, big
    else:
        xa, xb = -big, u
    xlo = max(xa, rect.xl)
    xhi = min(xb, rect.xu)
    if xlo > xhi:
        return None
    # y(x) is monotone on the branch; cut at the preimages of the y-bounds and
    # keep the sub-interval whose midpoint satisfies them
    cuts = {xlo, xhi}
    for yb in (rect.yl, rect.yu):
        if abs(yb - v) > 1e-300:
            xc = u + w / (yb - v)
            if xlo - GEO_EPS <= xc <= xhi + GEO_EPS:
                cuts.add(min(max(xc, xlo), xhi))
    cuts = sorted(cuts)
    best = None
    for i in range(len(cuts) - 1):
        a, b = cuts[i], cuts[i + 1]
        if b - a <= GEO_EPS:
            continue
        xm = 0.5 * (a + b)
        if abs(xm - u) < 1e-300:
            continue
        ym = v + w / (xm - u)
        if rect.yl - 1e-11 <= ym <= rect.yu + 1e-11:
            best = (a, b) if best is None else (min(best[0], a), max(best[1], b))
    if best is None:
        # the in-rect part may be a single touching point at a cut
        for xc in cuts:
            if abs(xc - u) < 1e-300:
                continue
            yc = v + w / (xc - u)
            if rect.yl - GEO_EPS <= yc <= rect.yu + GEO_EPS and rect.xl - GEO_EPS <= xc <= rect.xu + GEO_EPS:
                return Arc(u, v, w, xc, xc)
        return None
    a, b = best
    # never touch the asymptote
    if lo_sign > 0:
        a = max(a, u + 1e-300)
    else:
        b = min(b, u - 1e-300)
    if a > b:
        return None
    return Arc(u, v, w, a, b)


def constraint_pieces(q, al, be, ga, rect, zero_tol=None):
    """Decompose {q*x*y + al*x + be*y + ga = 0} cap rect into pieces.

    Returns a list of Arc / Segment objects; the special full-rectangle case
    (0 = 0) returns the string token "all".  Empty list means infeasible.
    """
    scale = max(abs(q), abs(al), abs(be), abs(ga), 1e-300)
    tol = (zero_tol if zero_tol is not None else COEF_ZERO) * scale
    if abs(q) <= tol:
        if abs(al) <= tol and abs(be) <= tol:
            return "all" if abs(ga) <= tol else []
        return _clip_line_to_rect(al, be, ga, rect)
    u = -be / q
    v = -al / q
    w = (al * be - ga * q) / (q * q)
    wscale = max(abs(u), abs(v), 1.0)
    if abs(w) <= COEF_ZERO * wscale * wscale:
        pieces = []
        pieces += _clip_line_to_rect(1.0, 0.0, -u, rect)  # x = u
        pieces += _clip_line_to_rect(0.0, 1.0, -v, rect)  # y = v
        return pieces
    arcs = []
    for sgn in (+1, -1):
        arc = _branch_arc(u, v, w, sgn, rect)
        if arc is not None:
            arcs.append(arc)
    return arcs


def sample_pieces(pieces, n=512):
    """Dense point samples of pieces (exact endpoints always included)."""
    pts = []
    if pieces == "all":
        raise ValueError("cannot sample the whole rectangle")
    for pc in pieces:
        if isinstance(pc, Segment):
            t = np.linspace(0.0, 1.0, max(2, n // 8))
            xs = pc.p0[0] + t * (pc.p1[0] - pc.p0[0])
            ys = pc.p0[1] + t * (pc.p1[1] - pc.p0[1])
            pts.append(np.column_stack([xs, ys]))
        else:
            if pc.x1 - pc.x0 <= 0:
                (x0, y0), _ = pc.endpoints()
                pts.append(np.array([[x0, y0]]))
                continue
            # Chebyshev parameterization in both x and y to resolve steep parts
            th = np.linspace(0.0, math.pi, n // 2)
            xs = 0.5 * (pc.x0 + pc.x1) + 0.5 * (pc.x1 - pc.x0) * np.cos(th)
            ys = pc.y_of(xs)
            y0, y1 = float(pc.y_of(pc.x0)), float(pc.y_of(pc.x1))
            ya, yb = min(y0, y1), max(y0, y1)
            th2 = np.linspace(0.0, math.pi, n // 2)
            ys2 = 0.5 * (ya + yb) + 0.5 * (yb - ya) * np.cos(th2)
            with np.errstate(divide="ignore"):
                xs2 = pc.x_of(ys2)
            pts.append(np.column_stack([xs, ys]))
            good = np.isfinite(xs2)
            pts.append(np.column_stack([xs2[good], ys2[good]]))
    if not pts:
        return np.zeros((0, 2))
    return np.vstack(pts)


def _lobatto(a, b, k):
    """k+1 Chebyshev-Lobatto nodes on [a, b]; nested under k -> 2k."""
    if k < 1 or b - a <= 0:
        return np.array([a, b]) if b > a else np.array([a])
    th = np.arange(k + 1) * (math.pi / k)
    return 0.5 * (a + b) + 0.5 * (b - a) * np.cos(th)[::-1]


def arc_outer_polygon(arc: Arc, k: int, anchors=()):
    """Convex polygon containing conv(arc), tangent-tight at the node set.

    Tangents are placed at Chebyshev-Lobatto nodes of both the x- and the
    y-parameterization (union), plus any `anchors` (x-coordinates).  Vertices
    are consecutive-tangent intersections, which for the hyperbola have the
    closed form (u + 2 p q/(p+q), v + 2 w/(p+q)) with p, q the node offsets.
    """
    if arc.x1 - arc.x0 <= 0:
        (x0, y0), _ = arc.endpoints()
        return np.array([[x0, y0]])
    kk = max(2, int(k))
    nodes = set()
    # node-count parameter kk//2 doubles with k, so node sets nest under
    # k -> 2k and the polygon family is monotone
    for x in _lobatto(arc.x0, arc.x1, kk // 2):
        nodes.add(float(x))
    (x0, y0), (x1, y1) = arc.endpoints()
    ya, yb = min(y0, y1), max(y0, y1)
    if yb - ya > 0:
        for y in _lobatto(ya, yb, kk // 2):
            x = arc.u + arc.w / (y - arc.v)
            nodes.add(float(min(max(x, arc.x0), arc.x1)))
    for x in anchors:
        if arc.x0 <= x <= arc.x1:
            nodes.add(float(x))
    ts = np.array(sorted(nodes))
    # drop near-duplicates (keep exact anchors: dedupe keeps the earlier value)
    keep = np.concatenate([[True], np.diff(ts) > 1e-14 * max(1.0, abs(arc.x1))])
    ts = ts[keep]
    p = ts - arc.u  # signed offsets, same sign along one branch
    vx = arc.u + 2.0 * p[:-1] * p[1:] / (p[:-1] + p[1:])
    vy = arc.v + 2.0 * arc.w / (p[:-1] + p[1:])
    chain = np.empty((len(ts) + 1, 2))
    chain[0] = (ts[0], arc.v + arc.w / p[0])
    chain[1:-1, 0] = vx
    chain[1:-1, 1] = vy
    chain[-1] = (ts[-1], arc.v + arc.w / p[-1])
    return _ccw(chain)


def pieces_outer_polygon(pieces, k, anchors=()):
    """Outer polygon for conv(union of pieces); None for empty input."""
    polys = []
    for pc in pieces:
        if isinstance(pc, Segment):
            polys.append(np.array([pc.p0, pc.p1]))
        else:
            polys.append(arc_outer_polygon(pc, k, anchors))
    if not polys:
        return None
    if len(polys) == 1:
        return polys[0]
    return convex_hull(np.vstack(polys))


def line_interval(halfplanes, point, direction, span=1e6):
    """Parameter interval {t : point + t*direction satisfies all half-planes}.

    Returns (tlo, thi) or None when empty.
    """
    px, py = point
    dx, dy = direction
    tlo, thi = -span, span
    for (nx, ny, rhs) in halfplanes:
        num = rhs - (nx * px + ny * py)
        den = nx * dx + ny * dy
        if abs(den) < 1e-14:
            if num < -1e-11:
                return None
            continue
        t = num / den
        if den > 0:
            thi = min(thi, t)
        else:
            tlo = max(tlo, t)
    if tlo > thi + 1e-12:
        return None
    return (tlo, thi)


def hull_line_slice(pieces, m, b, n_samples=4096, extra_points=()):
    """Interval of x where (x, m*x+b) lies in conv(pieces), via sampled hull.

    The sampled hull is an inner approximation of the true hull; endpoint error
    is O(1/n^2) and `extra_points` (known exact members, e.g. intersection
    points) are always included so slices through them are exact there.
    """
    pts = sample_pieces(pieces, n_samples)
    if len(extra_points):
        pts = np.vstack([pts, np.asarray(extra_points, dtype=float)])
    if len(pts) == 0:
        return None
    hull = convex_hull(pts)
    hp = polygon_halfplanes(hull)
    iv = line_interval(hp, (0.0, b), (1.0, m))
    return iv
