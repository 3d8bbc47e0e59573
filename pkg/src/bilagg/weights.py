"""Aggregation-weight searches: grid separation, the hyperplane heuristic, and
a cutting-plane surrogate-dual loop.

All three return a weight pair for the two rows of an instance; a pair is
"good" when adding the hull of the aggregated row tightens the relaxation.
The grid search maximizes the distance between the aggregated hull and a
relaxed solution; the simple search maximizes the distance from the relaxed
point to the aggregated constraint's restriction hyperplane; the surrogate
search adapts a Benders-style dual multiplier loop over the four inequality
halves of the two equalities.
"""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import geom2d
from .lpcore import EQ, GE, LE, OPTIMAL, Polyhedron, intersect, solve_lp
from .model import Instance, aggregate, aggregate_rows
from .onerow import (
    DEFAULT_CAP, EmptyHull, K_NODE, K_ROOT, box_poly, build_hull_oa,
    enumerate_disjuncts, onerow_relaxation,
)


class AllHullsEmpty(RuntimeError):
    """Every candidate aggregation is infeasible over the box."""


DEFAULT_GRID_EXP = 5
LAMBDA_BOX = 100.0


def default_grid(exp_max=DEFAULT_GRID_EXP):
    """{(1, ±2^i)} ∪ {(±2^i, 1)} for i = 1..exp_max (20 pairs by default)."""
    out = [(1.0, float(2 ** i)) for i in range(1, exp_max + 1)]
    out += [(1.0, float(-(2 ** i))) for i in range(1, exp_max + 1)]
    out += [(float(2 ** i), 1.0) for i in range(1, exp_max + 1)]
    out += [(float(-(2 ** i)), 1.0) for i in range(1, exp_max + 1)]
    return out


def worker_count():
    env = os.environ.get("BILAGG_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass
class RelaxedPoint:
    x: np.ndarray
    y: np.ndarray
    source: str
    objective: float

    def as_dict(self, inst):
        d = {f"x{i}": float(v) for i, v in enumerate(self.x)}
        d.update({f"y{j}": float(v) for j, v in enumerate(self.y)})
        return d


@dataclass
class WeightSearchResult:
    lam: tuple
    score: float
    diagnostics: dict = field(default_factory=dict)
    wall_time: float = 0.0
    bound: float | None = None
    budget_exhausted: bool = False


def objective_dict(inst: Instance):
    d = {f"x{i}": float(v) for i, v in enumerate(inst.f)}
    d.update({f"y{j}": float(v) for j, v in enumerate(inst.g)})
    for name, coef in inst.objective_extra:
        d[name] = d.get(name, 0.0) + coef
    return d


def relaxed_solution(inst: Instance, k=K_ROOT, cap=DEFAULT_CAP, engine=None):
    """Optimal point of the one-row relaxation (the solution to separate)."""
    poly = onerow_relaxation(inst, k=k, cap=cap)
    res = solve_lp(poly, objective_dict(inst), "min", engine=engine)
    if res.status != OPTIMAL:
        raise EmptyHull(f"one-row relaxation is {res.status}")
    d = res.as_dict()
    x = np.array([d[f"x{i}"] for i in range(inst.n1)])
    y = np.array([d[f"y{j}"] for j in range(inst.n2)])
    return RelaxedPoint(x, y, "onerow", res.value)


def hull_distance(inst, con, point: RelaxedPoint, norm="linf", k=K_NODE,
                  cap=DEFAULT_CAP, engine=None):
    """min ||(x, y) - point|| over the hull OA of the aggregated row ∩ box.

    Returns None when the aggregated row is infeasible over the box.  The
    norm is l1 or linf so the distance program stays an LP.
    """
    try:
        hull = build_hull_oa(con, inst.box, k=k, tag="d", cap=cap)
    except EmptyHull:
        return None
    poly = intersect([box_poly(inst), hull.lifted])
    target = point.as_dict(inst)
    names = [f"x{i}" for i in range(inst.n1)] + [f"y{j}" for j in range(inst.n2)]
    if norm == "linf":
        poly.add_var("t", 0.0, math.inf)
        for n in names:
            poly.add_row({n: 1.0, "t": -1.0}, LE, target[n])
            poly.add_row({n: -1.0, "t": -1.0}, LE, -target[n])
        res = solve_lp(poly, {"t": 1.0}, "min", engine=engine)
    elif norm == "l1":
        obj = {}
        for n in names:
            tn = f"t.{n}"
            poly.add_var(tn, 0.0, math.inf)
            poly.add_row({n: 1.0, tn: -1.0}, LE, target[n])
            poly.add_row({n: -1.0, tn: -1.0}, LE, -target[n])
            obj[tn] = 1.0
        res = solve_lp(poly, obj, "min", engine=engine)
    else:
        raise ValueError("norm must be 'l1' or 'linf'")
    if res.status != OPTIMAL:
        return None
    return max(res.value, 0.0)


def _grid_eval(args):
    inst, lam, point, norm, k, cap = args
    t0 = time.perf_counter()
    d = hull_distance(inst, aggregate(inst, lam), point, norm, k, cap)
    return lam, d, time.perf_counter() - t0


def grid_search(inst: Instance, point: RelaxedPoint | None = None, G=None,
                norm="linf", k=K_NODE, cap=DEFAULT_CAP, workers=None):
    """Pick the grid weight pair whose aggregated hull is farthest from the
    relaxed point (ties resolved by first occurrence in the grid)."""
    t_start = time.perf_counter()
    relax_time = 0.0
    if point is None:
        t0 = time.perf_counter()
        point = relaxed_solution(inst, k=max(k, K_NODE), cap=cap)
        relax_time = time.perf_counter() - t0
    G = list(G) if G is not None else default_grid()
    if not G:
        raise ValueError("empty grid")
    jobs = [(inst, lam, point, norm, k, cap) for lam in G]
    nworkers = workers if workers is not None else worker_count()
    if nworkers > 1 and len(jobs) > 1:
        import multiprocessing as mp

        with mp.Pool(nworkers) as pool:
            evals = pool.map(_grid_eval, jobs)
    else:
        evals = [_grid_eval(j) for j in jobs]
    best_lam, best_d = None, -1.0
    d_values, times = [], []
    t_arg = time.perf_counter()
    for lam, d, dt in evals:
        d_values.append((lam, d))
        times.append(dt)
        if d is not None and d > best_d:
            best_lam, best_d = lam, d
    argmax_time = time.perf_counter() - t_arg
    if best_lam is None:
        raise AllHullsEmpty("no grid aggregation admits a feasible hull")
    wall = time.perf_counter() - t_start
    return WeightSearchResult(
        best_lam, best_d,
        {
            "d_values": d_values,
            "times": times,
            "relax_time": relax_time,
            "argmax_time": argmax_time,
            "parallel_est": relax_time + (max(times) if times else 0.0) + argmax_time,
            "point": point,
        },
        wall,
    )


def _simple_one_side(inst, fix_y, point, bound_norm, lam_box):
    """One orientation of the hyperplane search as an LP in (l1, l2).

    Fixing a block turns the aggregated row into a hyperplane in the other
    block; the signed distance of the relaxed point from it is linear in the
    weights, so maximizing it under the coefficient-norm cap is an LP (for
    the l2 cap the linf solution is rescaled onto the l2 ball, iterating if
    the lambda box binds).
    """
    c1, c2 = inst.constraints
    if fix_y:
        v1 = c1.Q @ point.y + c1.a
        v2 = c2.Q @ point.y + c2.a
    else:
        v1 = c1.Q.T @ point.x + c1.b
        v2 = c2.Q.T @ point.x + c2.b
    r1 = c1.residual(point.x, point.y)
    r2 = c2.residual(point.x, point.y)
    p = Polyhedron()
    p.add_var("l1", -lam_box, lam_box)
    p.add_var("l2", -lam_box, lam_box)
    for i in range(len(v1)):
        p.add_row({"l1": float(v1[i]), "l2": float(v2[i])}, LE, 1.0)
        p.add_row({"l1": -float(v1[i]), "l2": -float(v2[i])}, LE, 1.0)
    res = solve_lp(p, {"l1": r1, "l2": r2}, "max")
    lam = (res["l1"], res["l2"])
    value = res.value
    if bound_norm == "l2":
        for _ in range(8):
            pv = lam[0] * v1 + lam[1] * v2
            nrm = float(np.linalg.norm(pv))
            if nrm <= 1e-14:
                break
            scale = 1.0 / nrm
            cap = lam_box / max(abs(lam[0]), abs(lam[1]), 1e-300)
            scale = min(scale, cap)
            lam = (lam[0] * scale, lam[1] * scale)
            value = lam[0] * r1 + lam[1] * r2
            if abs(float(np.linalg.norm(lam[0] * v1 + lam[1] * v2)) - 1.0) < 1e-12:
                break
    return lam, float(value)


def simple_search(inst: Instance, point: RelaxedPoint | None = None,
                  bound_norm="linf", lam_box=LAMBDA_BOX, k=K_NODE, cap=DEFAULT_CAP):
    """Maximize the relaxed point's distance to the aggregated hyperplane,
    fixing y then fixing x, and return the weights of the larger optimum."""
    t0 = time.perf_counter()
    if point is None:
        point = relaxed_solution(inst, k=max(k, K_NODE), cap=cap)
    lam_y, d_y = _simple_one_side(inst, True, point, bound_norm, lam_box)
    lam_x, d_x = _simple_one_side(inst, False, point, bound_norm, lam_box)
    lam, score = (lam_y, d_y) if d_y >= d_x else (lam_x, d_x)
    return WeightSearchResult(
        lam, score,
        {"d_fix_y": d_y, "d_fix_x": d_x, "point": point},
        time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# surrogate search
# ---------------------------------------------------------------------------


def _sublevel_polygon(q, al, be, ga, rect, k):
    """Outer polygon of conv({q x y + al x + be y + ga <= 0} ∩ rect).

    Extreme points are rectangle corners satisfying the inequality plus curve
    points, so the hull of feasible corners and the curve pieces' outer
    polygons is a valid outer approximation.  None means empty.
    """
    pts = []
    for (cx, cy) in rect.corners():
        if q * cx * cy + al * cx + be * cy + ga <= 1e-11:
            pts.append((cx, cy))
    pieces = geom2d.constraint_pieces(q, al, be, ga, rect)
    if pieces == "all":
        return rect.corners()
    poly = geom2d.pieces_outer_polygon(pieces, k) if pieces else None
    if poly is not None:
        pts.extend(poly.tolist())
    if not pts:
        return None
    return geom2d.convex_hull(np.asarray(pts, dtype=float))


def inequality_hull_oa(con, box, k=K_NODE, tag="s", cap=DEFAULT_CAP):
    """Disjunctive outer approximation of conv({row <= 0} ∩ box)."""
    from .model import constraint_support
    from .geom2d import Rect

    sx, sy = constraint_support(con)
    if len(sx) == 0 or len(sy) == 0 or np.all(con.Q[np.ix_(sx, sy)] == 0.0):
        p = Polyhedron()
        coeffs = []
        for i in sx:
            p.add_var(f"x{i}", box.lo_x[i], box.hi_x[i])
            coeffs.append((f"x{i}", con.a[i]))
        for j in sy:
            p.add_var(f"y{j}", box.lo_y[j], box.hi_y[j])
            coeffs.append((f"y{j}", con.b[j]))
        if coeffs:
            p.add_row(coeffs, LE, -con.c)
        elif con.c > 1e-11:
            raise EmptyHull("constant row c <= 0 is false")
        return p
    # unlike the equality case, a face with no curve inside the rectangle can
    # still be fully feasible for the inequality, so fixings are enumerated
    # directly rather than through enumerate_disjuncts
    import itertools

    if len(sx) * len(sy) * 2 ** (len(sx) + len(sy) - 2) > cap:
        from .onerow import DisjunctBudgetExceeded

        raise DisjunctBudgetExceeded("inequality hull over the disjunct cap")
    p = Polyhedron()
    for i in sx:
        p.add_var(f"x{i}", box.lo_x[i], box.hi_x[i])
    for j in sy:
        p.add_var(f"y{j}", box.lo_y[j], box.hi_y[j])
    link_x = {i: [] for i in sx}
    link_y = {j: [] for j in sy}
    conv_row = []
    t = 0
    for i in sx:
        for j in sy:
            ox = [u for u in sx if u != i]
            oy = [u for u in sy if u != j]
            rect = Rect(float(box.lo_x[i]), float(box.hi_x[i]), float(box.lo_y[j]), float(box.hi_y[j]))
            for fx in itertools.product(*[(box.lo_x[u], box.hi_x[u]) for u in ox]):
                for fy in itertools.product(*[(box.lo_y[u], box.hi_y[u]) for u in oy]):
                    fx_arr = np.asarray(fx)
                    fy_arr = np.asarray(fy)
                    q = float(con.Q[i, j])
                    al = float(con.a[i] + (con.Q[i, oy] @ fy_arr if oy else 0.0))
                    be = float(con.b[j] + (con.Q[ox, j] @ fx_arr if ox else 0.0))
                    ga = float(
                        con.c
                        + (con.a[ox] @ fx_arr if ox else 0.0)
                        + (con.b[oy] @ fy_arr if oy else 0.0)
                        + (fx_arr @ con.Q[np.ix_(ox, oy)] @ fy_arr if (ox and oy) else 0.0)
                    )
                    poly2 = _sublevel_polygon(q, al, be, ga, rect, k)
                    if poly2 is None:
                        continue
                    xn, yn, mn = f"{tag}.{t}.x", f"{tag}.{t}.y", f"{tag}.{t}.m"
                    p.add_var(xn, min(0.0, rect.xl), max(0.0, rect.xu))
                    p.add_var(yn, min(0.0, rect.yl), max(0.0, rect.yu))
                    p.add_var(mn, 0.0, 1.0)
                    for (nx, ny, rhs) in geom2d.polygon_halfplanes(poly2):
                        p.add_row([(xn, nx), (yn, ny), (mn, -rhs)], LE, 0.0)
                    conv_row.append((mn, 1.0))
                    link_x[i].append((xn, 1.0))
                    link_y[j].append((yn, 1.0))
                    for u, v in zip(ox, fx):
                        if v != 0.0:
                            link_x[u].append((mn, float(v)))
                    for u, v in zip(oy, fy):
                        if v != 0.0:
                            link_y[u].append((mn, float(v)))
                    t += 1
    if not conv_row:
        raise EmptyHull("inequality infeasible over the box")
    p.add_row(conv_row, EQ, 1.0)
    for i in sx:
        p.add_row([(f"x{i}", 1.0)] + [(n, -c) for n, c in link_x[i]], EQ, 0.0)
    for j in sy:
        p.add_row([(f"y{j}", 1.0)] + [(n, -c) for n, c in link_y[j]], EQ, 0.0)
    return p


def _box_vertex_sample(inst, count, seed=0):
    rng = np.random.default_rng(seed)
    pts = []
    n = inst.n1 + inst.n2
    lo = np.concatenate([inst.box.lo_x, inst.box.lo_y])
    hi = np.concatenate([inst.box.hi_x, inst.box.hi_y])
    for _ in range(count):
        pick = rng.integers(0, 2, n)
        v = np.where(pick == 1, hi, lo)
        pts.append((v[: inst.n1].copy(), v[inst.n1 :].copy()))
    return pts


def surrogate_search(inst: Instance, budget=20, k=K_NODE, cap=DEFAULT_CAP,
                     point: RelaxedPoint | None = None, seed=0, engine=None):
    """Benders-style surrogate multiplier loop.

    The equalities are split into <= halves g_1..g_4; the master LP picks
    multipliers mu in the simplex maximizing the least aggregated violation
    over the point set Z; the subproblem minimizes the objective over the
    hull OA of the aggregated inequality and its argmin joins Z.  Returns the
    folded pair (mu1 - mu2, mu3 - mu4) and the best surrogate bound."""
    t0 = time.perf_counter()
    if point is None:
        point = relaxed_solution(inst, k=max(k, K_NODE), cap=cap)
    c1, c2 = inst.constraints
    halves = [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)]

    def gvals(x, y):
        r1, r2 = c1.residual(x, y), c2.residual(x, y)
        return np.array([r1, -r1, r2, -r2])

    Z = _box_vertex_sample(inst, min(16, 2 ** (inst.n1 + inst.n2)), seed)
    Z.append((point.x, point.y))
    mu = np.array([1.0, 0.0, 0.0, 0.0])
    best_bound = -math.inf
    best_mu = mu.copy()
    master_values = []
    iterations = 0
    exhausted = True
    obj = objective_dict(inst)
    for it in range(budget):
        iterations += 1
        master = Polyhedron()
        for i in range(4):
            master.add_var(f"mu{i}", 0.0, LAMBDA_BOX)
        master.add_var("t", -math.inf, math.inf)
        master.add_row({f"mu{i}": 1.0 for i in range(4)}, EQ, 1.0)
        for (zx, zy) in Z:
            g = gvals(zx, zy)
            row = {f"mu{i}": -float(g[i]) for i in range(4)}
            row["t"] = 1.0
            master.add_row(row, LE, 0.0)
        res = solve_lp(master, {"t": 1.0}, "max")
        if res.status != OPTIMAL:
            break
        mu = np.array([res[f"mu{i}"] for i in range(4)])
        master_values.append(res.value)
        if res.value <= 1e-8:
            exhausted = False
            break
        lam1 = mu[0] - mu[1]
        lam2 = mu[2] - mu[3]
        agg = aggregate_rows(inst.constraints, [lam1, lam2])
        try:
            hull = inequality_hull_oa(agg, inst.box, k=k, tag="s", cap=cap)
        except EmptyHull:
            best_bound = math.inf
            best_mu = mu.copy()
            exhausted = False
            break
        parts = [box_poly(inst), hull]
        if inst.extra_linear is not None:
            parts.append(inst.extra_linear)
        sub = intersect(parts)
        sres = solve_lp(sub, obj, "min", engine=engine)
        if sres.status != OPTIMAL:
            best_bound = math.inf
            best_mu = mu.copy()
            exhausted = False
            break
        if sres.value > best_bound:
            best_bound = sres.value
            best_mu = mu.copy()
        d = sres.as_dict()
        zx = np.array([d[f"x{i}"] for i in range(inst.n1)])
        zy = np.array([d[f"y{j}"] for j in range(inst.n2)])
        Z.append((zx, zy))
    if budget == 0:
        best_mu = np.array([1.0, 0.0, 0.0, 0.0])
        exhausted = True
    lam = (float(best_mu[0] - best_mu[1]), float(best_mu[2] - best_mu[3]))
    if lam == (0.0, 0.0):
        lam = (1.0, 0.0)
    return WeightSearchResult(
        lam,
        best_bound if math.isfinite(best_bound) else 0.0,
        {"master_values": master_values, "mu": best_mu.tolist(),
         "iterations": iterations, "point": point},
        time.perf_counter() - t0,
        bound=None if not math.isfinite(best_bound) else best_bound,
        budget_exhausted=exhausted,
    )


def rank_aggregations(inst: Instance, pairs, method="grid", t=1, point=None,
                      k=K_NODE, cap=DEFAULT_CAP, norm="linf", budget=10, workers=None):
    """Run the chosen search on each row pair and keep the top t by score.

    Failing pairs are skipped (recorded in the returned diagnostics); when
    every score ties, input order is preserved.
    """
    if t < 1:
        raise ValueError("t must be >= 1")
    if point is None:
        point = relaxed_solution(inst, k=k, cap=cap)
    ranked = []
    skipped = []
    for pair in pairs:
        i, j = pair
        sub = Instance(
            inst.n1, inst.n2, (inst.constraints[i], inst.constraints[j]),
            inst.box, inst.f, inst.g, inst.obj_const, inst.extra_linear,
            inst.objective_extra,
        )
        try:
            if method == "grid":
                res = grid_search(sub, point=point, k=k, cap=cap, norm=norm, workers=workers)
            elif method == "simple":
                res = simple_search(sub, point=point, k=k, cap=cap)
            elif method == "surrogate":
                res = surrogate_search(sub, budget=budget, k=k, cap=cap, point=point)
            else:
                raise ValueError(f"unknown method {method!r}")
        except (AllHullsEmpty, EmptyHull) as err:
            skipped.append((pair, str(err)))
            continue
        ranked.append((pair, res))
    ranked.sort(key=lambda e: -e[1].score)
    top = ranked[:t]
    return top, skipped
