"""Linear-programming substrate: polyhedra, a dense two-phase simplex, and a
sparse HiGHS engine behind the same interface.

The built-in simplex keeps the package self-contained and deterministic for
the small certification LPs; larger relaxation LPs (disjunctive liftings with
thousands of auxiliary variables) are routed to scipy's HiGHS through the same
``solve_lp`` seam.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

INF = float("inf")

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

LE, EQ, GE = "<=", "=", ">="

_SENSES = (LE, EQ, GE)


class NameClash(ValueError):
    """Raised when polyhedra declare incompatible variable universes."""


class NumericalFailure(RuntimeError):
    """Raised when an LP solve does not converge to a trustworthy answer."""


class Polyhedron:
    """Finite list of linear rows over named variables with per-variable bounds.

    Rows are stored sparsely as (column-index array, value array, sense, rhs).
    A polyhedron is append-only; call :meth:`freeze` once construction is done
    to make later mutation an error (instances are then safe to share).
    """

    def __init__(self, names=()):
        self.names = []
        self.index = {}
        self._lb = []
        self._ub = []
        self.rows = []
        self._frozen = False
        for n in names:
            self.add_var(n)

    # -- construction -----------------------------------------------------

    def _check_mutable(self):
        if self._frozen:
            raise RuntimeError("polyhedron is frozen")

    def add_var(self, name, lo=-INF, hi=INF):
        self._check_mutable()
        if name in self.index:
            raise NameClash(f"variable {name!r} declared twice")
        self.index[name] = len(self.names)
        self.names.append(name)
        self._lb.append(float(lo))
        self._ub.append(float(hi))
        return self.index[name]

    def ensure_var(self, name, lo=-INF, hi=INF):
        if name in self.index:
            return self.index[name]
        return self.add_var(name, lo, hi)

    def set_bounds(self, name, lo=None, hi=None, tighten=True):
        self._check_mutable()
        j = self.index[name]
        if lo is not None:
            self._lb[j] = max(self._lb[j], float(lo)) if tighten else float(lo)
        if hi is not None:
            self._ub[j] = min(self._ub[j], float(hi)) if tighten else float(hi)

    def add_row(self, coeffs, sense, rhs):
        """coeffs: mapping name -> coefficient, or iterable of (name, coef)."""
        self._check_mutable()
        if sense not in _SENSES:
            raise ValueError(f"bad sense {sense!r}")
        if not math.isfinite(rhs):
            raise ValueError("non-finite right-hand side")
        items = coeffs.items() if hasattr(coeffs, "items") else coeffs
        cols, vals = [], []
        for name, v in items:
            v = float(v)
            if v == 0.0:
                continue
            if not math.isfinite(v):
                raise ValueError(f"non-finite coefficient for {name!r}")
            cols.append(self.index[name])
            vals.append(v)
        self.rows.append(
            (np.asarray(cols, dtype=np.int64), np.asarray(vals, dtype=float), sense, float(rhs))
        )

    def add_row_idx(self, cols, vals, sense, rhs):
        """Index-based fast path used by bulk builders."""
        self._check_mutable()
        self.rows.append(
            (np.asarray(cols, dtype=np.int64), np.asarray(vals, dtype=float), sense, float(rhs))
        )

    def freeze(self):
        self._frozen = True
        return self

    def copy(self):
        q = Polyhedron()
        q.names = list(self.names)
        q.index = dict(self.index)
        q._lb = list(self._lb)
        q._ub = list(self._ub)
        q.rows = list(self.rows)
        return q

    # -- queries ----------------------------------------------------------

    @property
    def nvars(self):
        return len(self.names)

    @property
    def nrows(self):
        return len(self.rows)

    def lb(self):
        return np.asarray(self._lb, dtype=float)

    def ub(self):
        return np.asarray(self._ub, dtype=float)

    def bounds_of(self, name):
        j = self.index[name]
        return self._lb[j], self._ub[j]

    def objective_vector(self, objective):
        """Dense objective from a dict / (name, coef) pairs / full vector."""
        c = np.zeros(self.nvars)
        if objective is None:
            return c
        if isinstance(objective, np.ndarray) and objective.shape == (self.nvars,):
            return objective.astype(float)
        items = objective.items() if hasattr(objective, "items") else objective
        for name, v in items:
            c[self.index[name]] += float(v)
        return c

    def row_residuals(self, x):
        """Signed violations of every row at x (positive = violated)."""
        out = np.zeros(self.nrows)
        for i, (cols, vals, sense, rhs) in enumerate(self.rows):
            lhs = float(vals @ x[cols]) if len(cols) else 0.0
            if sense == LE:
                out[i] = lhs - rhs
            elif sense == GE:
                out[i] = rhs - lhs
            else:
                out[i] = abs(lhs - rhs)
        return out

    def max_violation(self, x):
        lb, ub = self.lb(), self.ub()
        v = 0.0
        if self.nrows:
            v = float(np.max(self.row_residuals(x)))
        bv = np.maximum(lb - x, 0.0, where=np.isfinite(lb), out=np.zeros_like(x))
        bv2 = np.maximum(x - ub, 0.0, where=np.isfinite(ub), out=np.zeros_like(x))
        return max(v, float(bv.max(initial=0.0)), float(bv2.max(initial=0.0)))


@dataclass
class LpResult:
    status: str
    value: float = math.nan
    x: np.ndarray | None = None
    names: tuple = ()
    duals: np.ndarray | None = None
    iterations: int = 0

    def __getitem__(self, name):
        return float(self.x[self.names.index(name)])

    def as_dict(self):
        return {n: float(v) for n, v in zip(self.names, self.x)}


# ---------------------------------------------------------------------------
# dense two-phase primal simplex
# ---------------------------------------------------------------------------


def _pivot(T, basis, i, j):
    piv = T[i, j]
    T[i, :] /= piv
    col = T[:, j].copy()
    col[i] = 0.0
    T -= np.outer(col, T[i, :])
    T[:, j] = 0.0
    T[i, j] = 1.0
    basis[i] = j
    # clear roundoff in the RHS so the b >= 0 invariant survives long runs
    rhs = T[:-1, -1]
    np.copyto(rhs, 0.0, where=(rhs < 0) & (rhs > -1e-11))


def _simplex_pivots(T, basis, ncols_enter, maxiter, tol=1e-9):
    """Run primal simplex pivots on tableau T (objective in the last row).

    Only columns < ncols_enter may enter the basis (this is how artificial
    columns are barred in phase 2).  Dantzig rule with a Bland fallback for
    anti-cycling.  Returns 'optimal' or 'unbounded'.
    """
    m = T.shape[0] - 1
    it = 0
    bland_after = max(200, 40 * (m + ncols_enter))
    while it < maxiter:
        it += 1
        red = T[m, :ncols_enter]
        if it <= bland_after:
            j = int(np.argmin(red))
            if red[j] >= -tol:
                return OPTIMAL, it
        else:  # Bland's rule: first negative reduced cost
            neg = np.nonzero(red < -tol)[0]
            if len(neg) == 0:
                return OPTIMAL, it
            j = int(neg[0])
        col = T[:m, j]
        pos = col > tol
        if not np.any(pos):
            return UNBOUNDED, it
        ratios = np.full(m, INF)
        ratios[pos] = np.maximum(T[:m, -1][pos], 0.0) / col[pos]
        rmin = float(ratios.min())
        cand = np.nonzero(ratios <= rmin + tol * (1.0 + rmin))[0]
        if it > bland_after:
            i = int(min(cand, key=lambda r: basis[r]))
        else:
            # stability: among minimal-ratio rows take the largest pivot
            i = int(cand[np.argmax(col[cand])])
        _pivot(T, basis, i, j)
    raise NumericalFailure(f"simplex hit the iteration cap ({maxiter})")


def _dense_simplex_two_phase(A, b, c, maxiter, tol=1e-9):
    """min c x s.t. A x = b, x >= 0 with b >= 0.  The last m columns of A are
    the artificial identity.  A genuine two-phase method: the phase-1 tableau
    is reused, artificials are pivoted out (or left basic at zero in redundant
    rows) and barred from re-entering.
    """
    m, n = A.shape
    n_real = n - m
    T = np.zeros((m + 1, n + 1))
    T[:m, :n] = A
    T[:m, n] = b
    T[m, n - m : n] = 1.0  # phase-1 objective: sum of artificials
    basis = list(range(n - m, n))
    for i, j in enumerate(basis):
        T[m, :] -= T[m, j] * T[i, :]
    status, it1 = _simplex_pivots(T, basis, n, maxiter, tol)
    if status != OPTIMAL:
        raise NumericalFailure("phase 1 reported unbounded")
    bscale = 1.0 + float(np.abs(b).max(initial=0.0))
    if -T[m, n] > 1e-7 * bscale:
        return INFEASIBLE, None, math.nan, it1
    # drive basic artificials out wherever a real pivot exists
    for i in range(m):
        if basis[i] >= n_real:
            row = np.abs(T[i, :n_real])
            j = int(np.argmax(row))
            if row[j] > 1e-7:
                _pivot(T, basis, i, j)
            # else: redundant 0 = 0 row; the artificial stays basic at level 0
    # install the phase-2 objective and price out the basis
    T[m, :] = 0.0
    T[m, :n_real] = c[:n_real]
    for i, j in enumerate(basis):
        if j < n_real and abs(T[m, j]) > 0:
            T[m, :] -= T[m, j] * T[i, :]
    status, it2 = _simplex_pivots(T, basis, n_real, maxiter, tol)
    if status == UNBOUNDED:
        return UNBOUNDED, None, -INF, it1 + it2
    x = np.zeros(n)
    for i, j in enumerate(basis):
        x[j] = T[i, n]
    if float(x[n_real:].sum()) > 1e-7 * bscale:
        raise NumericalFailure("artificial variables remained positive")
    return OPTIMAL, x[:n_real], float(c[:n_real] @ x[:n_real]), it1 + it2


def _solve_dense(poly: Polyhedron, c, maxiter=20000):
    """Two-phase bounded-variable simplex via shift/split to standard form."""
    n0 = poly.nvars
    lb, ub = poly.lb(), poly.ub()
    # variable transforms: x = off + sign*z (z >= 0), plus optional split column
    off = np.zeros(n0)
    sign = np.ones(n0)
    split = np.zeros(n0, dtype=bool)
    zcap = np.full(n0, INF)  # upper bound on z, added as a row when finite
    for j in range(n0):
        if math.isfinite(lb[j]):
            off[j] = lb[j]
            zcap[j] = ub[j] - lb[j] if math.isfinite(ub[j]) else INF
        elif math.isfinite(ub[j]):
            off[j] = ub[j]
            sign[j] = -1.0
        else:
            split[j] = True
    split_col = {}
    ncols = n0
    for j in range(n0):
        if split[j]:
            split_col[j] = ncols
            ncols += 1

    rows = []
    for cols, vals, sense, rhs in poly.rows:
        dense = np.zeros(ncols)
        r = rhs
        for cc, vv in zip(cols, vals):
            dense[cc] += vv * sign[cc]
            r -= vv * off[cc]
            if split[cc]:
                dense[split_col[cc]] -= vv
        rows.append((dense, sense, r))
    for j in range(n0):
        if math.isfinite(zcap[j]):
            dense = np.zeros(ncols)
            dense[j] = 1.0
            rows.append((dense, LE, zcap[j]))
            if zcap[j] < -1e-12:
                return LpResult(INFEASIBLE)

    m = len(rows)
    nslack = sum(1 for _, s, _ in rows if s != EQ)
    A = np.zeros((m, ncols + nslack + m))
    b = np.zeros(m)
    si = 0
    for i, (dense, sense, r) in enumerate(rows):
        flip = -1.0 if r < 0 else 1.0
        A[i, :ncols] = dense * flip
        b[i] = r * flip
        if sense != EQ:
            s = 1.0 if sense == LE else -1.0
            A[i, ncols + si] = s * flip
            si += 1
        A[i, ncols + nslack + i] = 1.0  # artificial
    cz = np.zeros(ncols + nslack)
    for j in range(n0):
        cz[j] += c[j] * sign[j]
        if split[j]:
            cz[split_col[j]] -= c[j]
    status, xz, _obj, iters = _dense_simplex_two_phase(A, b, cz, maxiter)
    if status != OPTIMAL:
        return LpResult(status, iterations=iters)
    x = off + sign * xz[:n0]
    for j, jj in split_col.items():
        x[j] -= xz[jj]
    val = float(np.asarray(c) @ x)
    return LpResult(OPTIMAL, val, x, tuple(poly.names), None, iters)


# ---------------------------------------------------------------------------
# HiGHS engine (scipy)
# ---------------------------------------------------------------------------


def _highs_matrices(poly: Polyhedron):
    from scipy.sparse import csr_matrix

    cache = getattr(poly, "_highs_cache", None)
    if cache is not None and cache[0] == poly.nrows:
        return cache[1:]
    ub_rows, ub_rhs, eq_rows, eq_rhs = [], [], [], []
    for cols, vals, sense, rhs in poly.rows:
        if sense == EQ:
            eq_rows.append((cols, vals))
            eq_rhs.append(rhs)
        elif sense == LE:
            ub_rows.append((cols, vals))
            ub_rhs.append(rhs)
        else:
            ub_rows.append((cols, -vals))
            ub_rhs.append(-rhs)

    def build(rows):
        if not rows:
            return None
        indptr = np.zeros(len(rows) + 1, dtype=np.int64)
        for i, (cols, vals) in enumerate(rows):
            indptr[i + 1] = indptr[i] + len(cols)
        ci = np.concatenate([cols for cols, _ in rows]) if rows else np.zeros(0)
        cv = np.concatenate([vals for _, vals in rows]) if rows else np.zeros(0)
        return csr_matrix((cv, ci, indptr), shape=(len(rows), poly.nvars))

    out = (build(ub_rows), np.asarray(ub_rhs), build(eq_rows), np.asarray(eq_rhs))
    poly._highs_cache = (poly.nrows,) + out
    return out


def _solve_highs(poly: Polyhedron, c):
    from scipy.optimize import linprog

    A_ub, ub_rhs, A_eq, eq_rhs = _highs_matrices(poly)
    bounds = list(zip(poly.lb(), poly.ub()))
    bounds = [(None if not math.isfinite(l) else l, None if not math.isfinite(u) else u) for l, u in bounds]
    res = linprog(
        c,
        A_ub=A_ub,
        b_ub=ub_rhs if A_ub is not None else None,
        A_eq=A_eq,
        b_eq=eq_rhs if A_eq is not None else None,
        bounds=bounds,
        method="highs",
        options={
            "primal_feasibility_tolerance": 1e-9,
            "dual_feasibility_tolerance": 1e-9,
        },
    )
    if res.status == 0:
        duals = None
        try:
            parts = []
            dual_val = 0.0
            if A_ub is not None:
                y = np.asarray(res.ineqlin.marginals)
                parts.append(y)
                dual_val += float(y @ ub_rhs)
            if A_eq is not None:
                y = np.asarray(res.eqlin.marginals)
                parts.append(y)
                dual_val += float(y @ eq_rhs)
            lo_m = np.asarray(res.lower.marginals)
            up_m = np.asarray(res.upper.marginals)
            lbv, ubv = poly.lb(), poly.ub()
            dual_val += float(np.sum(np.where(np.abs(lo_m) > 0, lo_m * np.where(np.isfinite(lbv), lbv, 0.0), 0.0)))
            dual_val += float(np.sum(np.where(np.abs(up_m) > 0, up_m * np.where(np.isfinite(ubv), ubv, 0.0), 0.0)))
            gap = abs(float(res.fun) - dual_val)
            if gap > 1e-6 * (1.0 + abs(float(res.fun))):
                raise NumericalFailure(f"duality gap {gap:.3e}")
            duals = np.concatenate(parts) if parts else np.zeros(0)
        except AttributeError:
            duals = None
        return LpResult(OPTIMAL, float(res.fun), np.asarray(res.x), tuple(poly.names), duals, int(res.nit))
    if res.status == 2:
        return LpResult(INFEASIBLE)
    if res.status == 3:
        return LpResult(UNBOUNDED)
    raise NumericalFailure(f"HiGHS returned status {res.status}: {res.message}")


# size below which the self-contained dense simplex is the default engine
DENSE_LIMIT_VARS = 40
DENSE_LIMIT_ROWS = 60

TOL_FEAS = 1e-8


def solve_lp(poly: Polyhedron, objective, sense="min", engine=None, check=True):
    """Solve min/max objective over the polyhedron.

    engine: "dense" (built-in simplex), "highs" (scipy), or None to pick by
    problem size.  Optimal results are validated against the rows to TOL_FEAS.
    """
    c = poly.objective_vector(objective)
    if sense not in ("min", "max"):
        raise ValueError("sense must be 'min' or 'max'")
    csolve = -c if sense == "max" else c
    if engine is None:
        # auto mode may fall back to HiGHS if the dense simplex goes numerically bad
        if poly.nvars <= DENSE_LIMIT_VARS and poly.nrows <= DENSE_LIMIT_ROWS:
            try:
                return solve_lp(poly, objective, sense, "dense", check)
            except NumericalFailure:
                return solve_lp(poly, objective, sense, "highs", check)
        return solve_lp(poly, objective, sense, "highs", check)
    if engine == "dense":
        res = _solve_dense(poly, csolve)
    elif engine == "highs":
        res = _solve_highs(poly, csolve)
    else:
        raise ValueError(f"unknown engine {engine!r}")
    if res.status == OPTIMAL:
        if sense == "max":
            res.value = -res.value
        if check:
            viol = poly.max_violation(res.x)
            if viol > TOL_FEAS * (1.0 + max(abs(r[3]) for r in poly.rows) if poly.rows else 1.0):
                raise NumericalFailure(f"optimal point violates rows by {viol:.3e}")
    elif res.status == UNBOUNDED and sense == "max":
        res.value = INF
    return res


def intersect(polys, universe=None):
    """Row-concatenation of polyhedra with tightest per-variable bounds.

    Variable universes are merged in first-seen order; when `universe` is
    given, any name outside it raises NameClash.
    """
    out = Polyhedron()
    if universe is not None:
        for n in universe:
            out.add_var(n)
    for p in polys:
        for j, n in enumerate(p.names):
            if n not in out.index:
                if universe is not None:
                    raise NameClash(f"variable {n!r} outside the declared universe")
                out.add_var(n, p._lb[j], p._ub[j])
            else:
                out.set_bounds(n, p._lb[j], p._ub[j], tighten=True)
    for p in polys:
        remap = np.asarray([out.index[n] for n in p.names], dtype=np.int64)
        for cols, vals, sense, rhs in p.rows:
            out.add_row_idx(remap[cols], vals, sense, rhs)
    return out


def dump_lp_format(poly: Polyhedron, path, objective=None, sense="min"):
    """Write the polyhedron (plus optional objective) as an LP-format file."""
    c = poly.objective_vector(objective)

    def term(v, n):
        return f"{'+' if v >= 0 else '-'} {abs(v):.17g} {n} "

    with open(path, "w") as f:
        f.write("\\ generated by bilagg\n")
        f.write("Minimize\n" if sense == "min" else "Maximize\n")
        f.write(" obj: ")
        f.write("".join(term(v, n) for v, n in zip(c, poly.names) if v != 0) or "0 " + poly.names[0])
        f.write("\nSubject To\n")
        for i, (cols, vals, s, rhs) in enumerate(poly.rows):
            body = "".join(term(v, poly.names[j]) for j, v in zip(cols, vals))
            op = {LE: "<=", GE: ">=", EQ: "="}[s]
            f.write(f" r{i}: {body}{op} {rhs:.17g}\n")
        f.write("Bounds\n")
        for n, lo, hi in zip(poly.names, poly._lb, poly._ub):
            lo_s = f"{lo:.17g}" if math.isfinite(lo) else "-inf"
            hi_s = f"{hi:.17g}" if math.isfinite(hi) else "+inf"
            f.write(f" {lo_s} <= {n} <= {hi_s}\n")
        f.write("End\n")


def box_polyhedron(names, lo, hi):
    p = Polyhedron()
    for n, l, u in zip(names, lo, hi):
        p.add_var(n, l, u)
    return p
