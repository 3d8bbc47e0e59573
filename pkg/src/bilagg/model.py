"""Bounded bilinear bipartite sets, constraint aggregation, normalization.

An instance holds constraints of the form

    x^T Q y + a^T x + b^T y + c = 0,   x in [lo_x, hi_x], y in [lo_y, hi_y],

with a linear objective f^T x + g^T y (+ constant).  Aggregation forms the
scalar-weighted sum of the two rows; every feasible point of the instance
satisfies every aggregation, which is what makes aggregated hulls valid
relaxations.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .lpcore import Polyhedron, LE, GE, EQ


class DimensionMismatch(ValueError):
    pass


class ZeroWeights(ValueError):
    pass


class DegenerateRange(ValueError):
    pass


def _frozen_array(a, shape=None):
    arr = np.array(a, dtype=float)
    if shape is not None and arr.shape != shape:
        raise DimensionMismatch(f"expected shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("non-finite coefficients")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class BilinearConstraint:
    """One equality row x^T Q y + a^T x + b^T y + c = 0 (equality-only)."""

    Q: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: float
    relation: str = "eq"

    def __post_init__(self):
        Q = _frozen_array(self.Q)
        if Q.ndim != 2:
            raise DimensionMismatch("Q must be a matrix")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "a", _frozen_array(self.a, (Q.shape[0],)))
        object.__setattr__(self, "b", _frozen_array(self.b, (Q.shape[1],)))
        object.__setattr__(self, "c", float(self.c))
        if not math.isfinite(self.c):
            raise ValueError("non-finite constant")
        if self.relation != "eq":
            raise ValueError("only equality rows are supported")

    @property
    def n1(self):
        return self.Q.shape[0]

    @property
    def n2(self):
        return self.Q.shape[1]

    def residual(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return float(x @ self.Q @ y + self.a @ x + self.b @ y + self.c)

    def scaled(self, s):
        return BilinearConstraint(self.Q * s, self.a * s, self.b * s, self.c * s)


@dataclass(frozen=True)
class BoxBounds:
    lo_x: np.ndarray
    hi_x: np.ndarray
    lo_y: np.ndarray
    hi_y: np.ndarray

    def __post_init__(self):
        for name in ("lo_x", "hi_x", "lo_y", "hi_y"):
            object.__setattr__(self, name, _frozen_array(getattr(self, name)))
        if self.lo_x.shape != self.hi_x.shape or self.lo_y.shape != self.hi_y.shape:
            raise DimensionMismatch("bound vectors disagree")
        if np.any(self.lo_x > self.hi_x) or np.any(self.lo_y > self.hi_y):
            raise DegenerateRange("lower bound exceeds upper bound")

    @staticmethod
    def unit(n1, n2):
        return BoxBounds(np.zeros(n1), np.ones(n1), np.zeros(n2), np.ones(n2))

    def is_unit(self, tol=0.0):
        return (
            np.all(np.abs(self.lo_x) <= tol)
            and np.all(np.abs(self.hi_x - 1) <= tol)
            and np.all(np.abs(self.lo_y) <= tol)
            and np.all(np.abs(self.hi_y - 1) <= tol)
        )

    def contains(self, x, y, tol=1e-9):
        return (
            np.all(x >= self.lo_x - tol)
            and np.all(x <= self.hi_x + tol)
            and np.all(y >= self.lo_y - tol)
            and np.all(y <= self.hi_y + tol)
        )


@dataclass(frozen=True)
class AggregationWeights:
    lambda1: float
    lambda2: float

    def __post_init__(self):
        if not (math.isfinite(self.lambda1) and math.isfinite(self.lambda2)):
            raise ValueError("non-finite weights")
        if self.lambda1 == 0.0 and self.lambda2 == 0.0:
            raise ZeroWeights("both weights are zero")

    def as_tuple(self):
        return (self.lambda1, self.lambda2)


def x_names(n1):
    return [f"x{i}" for i in range(n1)]


def y_names(n2):
    return [f"y{j}" for j in range(n2)]


@dataclass(frozen=True)
class Instance:
    """Two (or more) bilinear bipartite equality rows over a box, plus a
    linear objective.  `extra_linear` carries side constraints (and possibly
    auxiliary LP variables such as a deviation bound); `objective_extra` maps
    such auxiliary variable names to objective coefficients.
    """

    n1: int
    n2: int
    constraints: tuple
    box: BoxBounds
    f: np.ndarray
    g: np.ndarray
    obj_const: float = 0.0
    extra_linear: Polyhedron | None = None
    objective_extra: tuple = ()
    feasible_point: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if len(self.constraints) < 1:
            raise ValueError("need at least one constraint")
        for con in self.constraints:
            if con.n1 != self.n1 or con.n2 != self.n2:
                raise DimensionMismatch("constraint does not match instance dimensions")
        if self.box.lo_x.shape != (self.n1,) or self.box.lo_y.shape != (self.n2,):
            raise DimensionMismatch("box does not match instance dimensions")
        object.__setattr__(self, "f", _frozen_array(self.f, (self.n1,)))
        object.__setattr__(self, "g", _frozen_array(self.g, (self.n2,)))
        object.__setattr__(self, "objective_extra", tuple(self.objective_extra))
        if self.extra_linear is not None:
            self.extra_linear.freeze()

    # -- naming -----------------------------------------------------------

    def var_names(self):
        return x_names(self.n1) + y_names(self.n2)

    def objective_value(self, x, y, extra=None):
        val = float(self.f @ x + self.g @ y + self.obj_const)
        for name, coef in self.objective_extra:
            val += coef * float((extra or {})[name])
        return val

    def residuals(self, x, y):
        return np.array([con.residual(x, y) for con in self.constraints])

    def with_feasible_point(self, x, y):
        return Instance(
            self.n1, self.n2, self.constraints, self.box, self.f, self.g,
            self.obj_const, self.extra_linear, self.objective_extra,
            (tuple(map(float, x)), tuple(map(float, y))),
        )

    def with_box(self, box):
        return Instance(
            self.n1, self.n2, self.constraints, box, self.f, self.g,
            self.obj_const, self.extra_linear, self.objective_extra, self.feasible_point,
        )

    def validate(self, tol_rank=1e-9, tol_feas=1e-8):
        """Record what is actually known about the standing assumptions.

        Feasibility is only *evidence* (a stored point with small residuals);
        pairwise independence is a numeric rank test on the stacked
        coefficient vectors.
        """
        report = {"feasible_point_known": False, "independent": True}
        if self.feasible_point is not None:
            x, y = map(np.asarray, self.feasible_point)
            res = self.residuals(x, y)
            report["feasible_point_known"] = bool(
                np.max(np.abs(res)) <= tol_feas and self.box.contains(x, y)
            )
            report["max_residual"] = float(np.max(np.abs(res)))
        mats = [
            np.concatenate([con.Q.ravel(), con.a, con.b, [con.c]]) for con in self.constraints
        ]
        M = np.vstack(mats)
        s = np.linalg.svd(M, compute_uv=False)
        if len(self.constraints) >= 2 and s[1] <= tol_rank * max(s[0], 1.0):
            report["independent"] = False
        return report


def aggregate(inst: Instance, w) -> BilinearConstraint:
    """lambda1 * row1 + lambda2 * row2 as a single bilinear constraint."""
    if len(inst.constraints) != 2:
        raise DimensionMismatch("aggregation needs exactly 2 constraints")
    if isinstance(w, AggregationWeights):
        l1, l2 = w.as_tuple()
    else:
        l1, l2 = float(w[0]), float(w[1])
        if l1 == 0.0 and l2 == 0.0:
            raise ZeroWeights("both weights are zero")
    c1, c2 = inst.constraints
    return BilinearConstraint(
        l1 * c1.Q + l2 * c2.Q,
        l1 * c1.a + l2 * c2.a,
        l1 * c1.b + l2 * c2.b,
        l1 * c1.c + l2 * c2.c,
    )


def aggregate_rows(constraints, weights) -> BilinearConstraint:
    """General k-row aggregation (the theory modules only consume k = 2)."""
    if len(constraints) != len(weights) or not len(constraints):
        raise DimensionMismatch("one weight per constraint required")
    if all(w == 0 for w in weights):
        raise ZeroWeights("all weights are zero")
    Q = sum(w * con.Q for w, con in zip(weights, constraints))
    a = sum(w * con.a for w, con in zip(weights, constraints))
    b = sum(w * con.b for w, con in zip(weights, constraints))
    c = sum(w * con.c for w, con in zip(weights, constraints))
    return BilinearConstraint(Q, a, b, c)


def constraint_support(con: BilinearConstraint, tol=1e-12):
    """Indices of x / y variables with any nonzero coefficient."""
    scale = max(
        np.max(np.abs(con.Q), initial=0.0),
        np.max(np.abs(con.a), initial=0.0),
        np.max(np.abs(con.b), initial=0.0),
        1e-300,
    )
    thresh = tol * scale
    sx = np.nonzero((np.max(np.abs(con.Q), axis=1) > thresh) | (np.abs(con.a) > thresh))[0]
    sy = np.nonzero((np.max(np.abs(con.Q), axis=0) > thresh) | (np.abs(con.b) > thresh))[0]
    return tuple(int(i) for i in sx), tuple(int(j) for j in sy)


@dataclass(frozen=True)
class AffineMap:
    """Coordinate map from normalized (unit-box) variables back to originals.

    x_orig[keep_x[i]] = x_off[i] + x_scale[i] * x_norm[i]; variables fixed by
    degenerate bounds are reinstated at their stored values.
    """

    n1_orig: int
    n2_orig: int
    keep_x: tuple
    keep_y: tuple
    x_off: np.ndarray
    x_scale: np.ndarray
    y_off: np.ndarray
    y_scale: np.ndarray
    fixed_x: tuple = ()
    fixed_y: tuple = ()

    def to_original(self, x_norm, y_norm):
        x = np.zeros(self.n1_orig)
        y = np.zeros(self.n2_orig)
        x[list(self.keep_x)] = self.x_off + self.x_scale * np.asarray(x_norm, dtype=float)
        y[list(self.keep_y)] = self.y_off + self.y_scale * np.asarray(y_norm, dtype=float)
        for i, v in self.fixed_x:
            x[i] = v
        for j, v in self.fixed_y:
            y[j] = v
        return x, y

    def to_normalized(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return (
            (x[list(self.keep_x)] - self.x_off) / self.x_scale,
            (y[list(self.keep_y)] - self.y_off) / self.y_scale,
        )


def normalize_to_unit_box(inst: Instance):
    """Rescale (and substitute out fixed variables) so the box is [0,1]^n.

    Residuals of every constraint are preserved exactly under the map; the
    objective is rewritten so objective values agree up to the constant term.
    """
    box = inst.box
    if np.any(box.lo_x > box.hi_x) or np.any(box.lo_y > box.hi_y):
        raise DegenerateRange("inverted bounds")
    keep_x = [i for i in range(inst.n1) if box.hi_x[i] - box.lo_x[i] > 0]
    keep_y = [j for j in range(inst.n2) if box.hi_y[j] - box.lo_y[j] > 0]
    fixed_x = tuple((i, float(box.lo_x[i])) for i in range(inst.n1) if i not in keep_x)
    fixed_y = tuple((j, float(box.lo_y[j])) for j in range(inst.n2) if j not in keep_y)
    Dx = box.hi_x[keep_x] - box.lo_x[keep_x]
    Lx = box.lo_x[keep_x].copy()
    Dy = box.hi_y[keep_y] - box.lo_y[keep_y]
    Ly = box.lo_y[keep_y].copy()
    xf = np.zeros(inst.n1)
    yf = np.zeros(inst.n2)
    for i, v in fixed_x:
        xf[i] = v
    for j, v in fixed_y:
        yf[j] = v

    new_cons = []
    for con in inst.constraints:
        # full-offset vectors: x = off + D x' with off carrying fixed values
        offx = xf.copy()
        offx[keep_x] = Lx
        offy = yf.copy()
        offy[keep_y] = Ly
        Qk = con.Q[np.ix_(keep_x, keep_y)] * np.outer(Dx, Dy)
        a_full = con.Q @ offy + con.a
        b_full = con.Q.T @ offx + con.b
        ak = Dx * a_full[keep_x]
        bk = Dy * b_full[keep_y]
        ck = float(offx @ con.Q @ offy + con.a @ offx + con.b @ offy + con.c)
        new_cons.append(BilinearConstraint(Qk, ak, bk, ck))

    f_new = Dx * inst.f[keep_x]
    g_new = Dy * inst.g[keep_y]
    offx = xf.copy()
    offx[keep_x] = Lx
    offy = yf.copy()
    offy[keep_y] = Ly
    const_new = float(inst.obj_const + inst.f @ offx + inst.g @ offy)

    extra = None
    if inst.extra_linear is not None:
        extra = _remap_polyhedron(inst.extra_linear, inst, keep_x, keep_y, Lx, Dx, Ly, Dy, xf, yf)

    amap = AffineMap(
        inst.n1, inst.n2, tuple(keep_x), tuple(keep_y),
        Lx, Dx.copy(), Ly, Dy.copy(), fixed_x, fixed_y,
    )
    out = Instance(
        len(keep_x), len(keep_y), new_cons,
        BoxBounds.unit(len(keep_x), len(keep_y)),
        f_new, g_new, const_new, extra, inst.objective_extra,
    )
    if inst.feasible_point is not None:
        xn, yn = amap.to_normalized(inst.feasible_point[0], inst.feasible_point[1])
        out = out.with_feasible_point(xn, yn)
    return out, amap


def _remap_polyhedron(poly, inst, keep_x, keep_y, Lx, Dx, Ly, Dy, xf, yf):
    """Rewrite extra-linear rows in normalized coordinates (names renumbered)."""
    old_to_new = {}
    for new_i, i in enumerate(keep_x):
        old_to_new[f"x{i}"] = (f"x{new_i}", float(Lx[new_i]), float(Dx[new_i]))
    for new_j, j in enumerate(keep_y):
        old_to_new[f"y{j}"] = (f"y{new_j}", float(Ly[new_j]), float(Dy[new_j]))
    fixed_vals = {}
    for i in range(inst.n1):
        if i not in keep_x:
            fixed_vals[f"x{i}"] = float(xf[i])
    for j in range(inst.n2):
        if j not in keep_y:
            fixed_vals[f"y{j}"] = float(yf[j])
    out = Polyhedron()
    for name in poly.names:
        lo, hi = poly.bounds_of(name)
        if name in old_to_new:
            new, off, sc = old_to_new[name]
            lo2 = (lo - off) / sc if math.isfinite(lo) else lo
            hi2 = (hi - off) / sc if math.isfinite(hi) else hi
            out.add_var(new, max(lo2, 0.0), min(hi2, 1.0))
        elif name in fixed_vals:
            continue
        else:
            out.add_var(name, lo, hi)
    for cols, vals, sense, rhs in poly.rows:
        coeffs = []
        r = rhs
        for cc, vv in zip(cols, vals):
            name = poly.names[cc]
            if name in old_to_new:
                new, off, sc = old_to_new[name]
                coeffs.append((new, vv * sc))
                r -= vv * off
            elif name in fixed_vals:
                r -= vv * fixed_vals[name]
            else:
                coeffs.append((name, vv))
        out.add_row(coeffs, sense, r)
    return out


# ---------------------------------------------------------------------------
# instance file format (JSON)
# ---------------------------------------------------------------------------


def _poly_to_dict(poly):
    return {
        "vars": [
            {"name": n, "lo": lo, "hi": hi}
            for n, lo, hi in zip(poly.names, poly._lb, poly._ub)
        ],
        "rows": [
            {
                "coeffs": {poly.names[int(c)]: float(v) for c, v in zip(cols, vals)},
                "sense": sense,
                "rhs": rhs,
            }
            for cols, vals, sense, rhs in poly.rows
        ],
    }


def _poly_from_dict(d):
    p = Polyhedron()
    for v in d["vars"]:
        p.add_var(v["name"], v.get("lo", -math.inf), v.get("hi", math.inf))
    for r in d["rows"]:
        p.add_row(r["coeffs"], r["sense"], r["rhs"])
    return p


def instance_to_dict(inst: Instance):
    d = {
        "n1": inst.n1,
        "n2": inst.n2,
        "constraints": [
            {"Q": con.Q.tolist(), "a": con.a.tolist(), "b": con.b.tolist(), "c": con.c}
            for con in inst.constraints
        ],
        "box": {
            "lo_x": inst.box.lo_x.tolist(),
            "hi_x": inst.box.hi_x.tolist(),
            "lo_y": inst.box.lo_y.tolist(),
            "hi_y": inst.box.hi_y.tolist(),
        },
        "objective": {"f": inst.f.tolist(), "g": inst.g.tolist(), "const": inst.obj_const},
    }
    if inst.objective_extra:
        d["objective"]["extra"] = {k: v for k, v in inst.objective_extra}
    if inst.extra_linear is not None:
        d["extra_linear"] = _poly_to_dict(inst.extra_linear)
    if inst.feasible_point is not None:
        d["feasible_point"] = [list(inst.feasible_point[0]), list(inst.feasible_point[1])]
    return d


def instance_from_dict(d):
    cons = [
        BilinearConstraint(c["Q"], c["a"], c["b"], c["c"]) for c in d["constraints"]
    ]
    box = BoxBounds(
        d["box"]["lo_x"], d["box"]["hi_x"], d["box"]["lo_y"], d["box"]["hi_y"]
    )
    obj = d.get("objective", {})
    extra = _poly_from_dict(d["extra_linear"]) if "extra_linear" in d else None
    inst = Instance(
        d["n1"],
        d["n2"],
        cons,
        box,
        obj.get("f", np.zeros(d["n1"])),
        obj.get("g", np.zeros(d["n2"])),
        obj.get("const", 0.0),
        extra,
        tuple(obj.get("extra", {}).items()),
    )
    if "feasible_point" in d:
        inst = inst.with_feasible_point(*d["feasible_point"])
    return inst


def save_instance(inst, path):
    with open(path, "w") as fh:
        json.dump(instance_to_dict(inst), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_instance(path):
    with open(path) as fh:
        return instance_from_dict(json.load(fh))
