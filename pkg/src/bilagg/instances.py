"""Instance generation: random dense instances, synthetic shear-frame models
for eigenvalue-matching model updating, and the canonical small sets used by
the verification suites.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .lpcore import LE, GE, EQ, Polyhedron
from .model import (
    AffineMap, BilinearConstraint, BoxBounds, Instance,
    constraint_support, normalize_to_unit_box,
)


# ---------------------------------------------------------------------------
# canonical small sets
# ---------------------------------------------------------------------------


def example1():
    """Two hyperbolas meeting only at (0.5, 0.5) in the unit box:
    (x+0.5)y = 0.5 and (x-1)(y+1.5) = -1.  Objective: min x + y.
    """
    c1 = BilinearConstraint([[1.0]], [0.0], [0.5], -0.5)
    c2 = BilinearConstraint([[1.0]], [1.5], [-1.0], -0.5)
    inst = Instance(1, 1, (c1, c2), BoxBounds.unit(1, 1), [1.0], [1.0])
    return inst.with_feasible_point([0.5], [0.5])


def equal_products_instance():
    """x*y1 = 0.5 and x*y2 = 0.5 over [0,1]^3; conv lies in {y1 = y2} and
    needs infinitely many aggregations to be reached exactly.
    """
    c1 = BilinearConstraint([[1.0, 0.0]], [0.0], [0.0, 0.0], -0.5)
    c2 = BilinearConstraint([[0.0, 1.0]], [0.0], [0.0, 0.0], -0.5)
    inst = Instance(1, 2, (c1, c2), BoxBounds.unit(1, 2), [1.0], [1.0, 1.0])
    return inst.with_feasible_point([0.75], [2 / 3, 2 / 3])


def closure_gap_instance():
    """-2xy1 + 9xy2 + y1 - 5y2 = 0 and 5xy1 + 3y1 + 3y2 = 6 over [0,1]^3;
    here even the full aggregation closure stays strictly above the hull.
    """
    c1 = BilinearConstraint([[-2.0, 9.0]], [0.0], [1.0, -5.0], 0.0)
    c2 = BilinearConstraint([[5.0, 0.0]], [0.0], [3.0, 3.0], -6.0)
    inst = Instance(1, 2, (c1, c2), BoxBounds.unit(1, 2), [1.0], [1.0, 1.0])
    return inst.with_feasible_point([1.0], [24 / 35, 6 / 35])


# ---------------------------------------------------------------------------
# random dense instances
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RandomSpec:
    n1: int
    n2: int
    seed: int
    count: int = 1
    low: int = -10
    high: int = 10
    two_point: bool = False  # draw from {low, high} instead of integers low..high


def _draw_int(rng, spec, size):
    if spec.two_point:
        return rng.choice([spec.low, spec.high], size=size).astype(float)
    return rng.integers(spec.low, spec.high + 1, size=size).astype(float)


def _draw_q(rng, spec, size):
    """Q entries must be nonzero so every variable appears in every row."""
    q = _draw_int(rng, spec, size)
    while True:
        zero = q == 0
        if not np.any(zero):
            return q
        q[zero] = _draw_int(rng, spec, int(zero.sum()))


def gen_random(spec: RandomSpec):
    """Dense random instances; identical seeds give identical instances."""
    rng = np.random.default_rng(spec.seed)
    out = []
    for _ in range(spec.count):
        cons = []
        for _k in range(2):
            Q = _draw_q(rng, spec, (spec.n1, spec.n2))
            a = _draw_int(rng, spec, spec.n1)
            b = _draw_int(rng, spec, spec.n2)
            c = float(_draw_int(rng, spec, ()))
            cons.append(BilinearConstraint(Q, a, b, c))
        f = _draw_int(rng, spec, spec.n1)
        g = _draw_int(rng, spec, spec.n2)
        out.append(Instance(spec.n1, spec.n2, cons, BoxBounds.unit(spec.n1, spec.n2), f, g))
    return out


def disjunct_count(con: BilinearConstraint):
    """s1*s2*2^(s1+s2-2) pieces before emptiness filtering."""
    sx, sy = constraint_support(con)
    s1, s2 = len(sx), len(sy)
    if s1 == 0 or s2 == 0:
        return 0
    return s1 * s2 * 2 ** (s1 + s2 - 2)


def requires_cap_override(inst: Instance, cap=4096):
    return max(disjunct_count(con) for con in inst.constraints) > cap


# ---------------------------------------------------------------------------
# synthetic shear-frame eigen-matching models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FemModel:
    """Shear-frame model-updating data.

    The frame has `n` stories (one translational DOF each, tridiagonal
    stiffness).  Story stiffnesses are scaled by `k_count` parameters alpha
    (stories above twelve are merged pairwise into shared parameters so the
    parameter count follows n - max(0, (n-12)//4)).  `m` vibration modes are
    "measured": eigenvalues lam_meas and eigenvector entries psi_meas at the
    sensor DOFs.  The update problem minimizes the largest weighted deviation
    delta between model and measurement.
    """

    n: int
    m: int
    M: np.ndarray
    K0: np.ndarray
    Kj: tuple  # one tridiagonal matrix per alpha parameter
    alpha_lb: np.ndarray
    alpha_ub: np.ndarray
    lam_lb: np.ndarray
    lam_ub: np.ndarray
    psi_lb: float
    psi_ub: float
    lam_meas: np.ndarray
    sensor_dofs: tuple
    psi_meas: np.ndarray  # (m, len(sensor_dofs))
    w_lam: np.ndarray
    w_psi: float
    alpha_true: np.ndarray
    lam_true: np.ndarray
    psi_true: np.ndarray
    delta_true: float

    @property
    def k_count(self):
        return len(self.Kj)


def _story_pattern(n, s):
    P = np.zeros((n, n))
    P[s, s] += 1.0
    if s >= 1:
        P[s - 1, s - 1] += 1.0
        P[s, s - 1] -= 1.0
        P[s - 1, s] -= 1.0
    return P


def _alpha_groups(n):
    """Stories per parameter: singletons, except the top (n-12)//4 pairs."""
    extra = max(0, (n - 12) // 4)
    merged = 2 * extra
    groups = [[s] for s in range(n - merged)]
    for t in range(extra):
        groups.append([n - merged + 2 * t, n - merged + 2 * t + 1])
    return groups


def gen_fem(n, m, seed, noise=0.0):
    """Synthesize a shear-frame updating model with a known ground truth."""
    if n % 2 != 0:
        raise ValueError("n must be even (rows are aggregated in consecutive pairs)")
    if m < 1:
        raise ValueError("m must be positive")
    rng = np.random.default_rng(seed)
    k_nom = rng.uniform(80.0, 120.0, n) * (1.0 + 0.5 * np.arange(n)[::-1] / n)
    masses = rng.uniform(0.9, 1.1, n)
    M = np.diag(masses)
    patterns = [k_nom[s] * _story_pattern(n, s) for s in range(n)]
    K_fixed_frac = 0.25
    K0 = K_fixed_frac * sum(patterns)
    groups = _alpha_groups(n)
    Kj = tuple((1.0 - K_fixed_frac) * sum(patterns[s] for s in grp) for grp in groups)
    k_count = len(groups)

    alpha_true = rng.uniform(0.8, 1.25, k_count)
    K_true = K0 + sum(a * K for a, K in zip(alpha_true, Kj))
    lam_all, psi_all = scipy.linalg.eigh(K_true, M)
    lam_true = lam_all[:m].copy()
    psi_true = psi_all[:, :m].T.copy()  # (m, n), M-orthonormal
    for i in range(m):
        j = int(np.argmax(np.abs(psi_true[i])))
        if psi_true[i, j] < 0:
            psi_true[i] *= -1.0

    lam_meas = lam_true * (1.0 + noise * rng.standard_normal(m))
    sensor_dofs = tuple(range(0, n, 2))
    psi_meas = psi_true[:, sensor_dofs] * (1.0 + noise * rng.standard_normal((m, len(sensor_dofs))))

    psi_amp = float(np.max(np.abs(psi_true)))
    w_lam = 1.0 / np.maximum(np.abs(lam_meas), 1e-9)
    w_psi = 1.0 / (2.0 * psi_amp)
    dev = [w_lam[i] * abs(lam_true[i] - lam_meas[i]) for i in range(m)]
    dev += [
        w_psi * abs(psi_true[i, s] - psi_meas[i, k])
        for i in range(m)
        for k, s in enumerate(sensor_dofs)
    ]
    delta_true = float(max(dev))

    return FemModel(
        n=n, m=m, M=M, K0=K0, Kj=Kj,
        alpha_lb=np.full(k_count, 0.5), alpha_ub=np.full(k_count, 2.0),
        lam_lb=lam_meas * 0.5, lam_ub=lam_meas * 1.6,
        psi_lb=-1.5 * psi_amp, psi_ub=1.5 * psi_amp,
        lam_meas=lam_meas, sensor_dofs=sensor_dofs, psi_meas=psi_meas,
        w_lam=w_lam, w_psi=w_psi,
        alpha_true=alpha_true, lam_true=lam_true, psi_true=psi_true,
        delta_true=delta_true,
    )


def fem_variable_names(model: FemModel):
    """x block: alphas then eigenvalues; y block: mode-major psi entries."""
    xn = [f"x{i}" for i in range(model.k_count + model.m)]
    yn = [f"y{j}" for j in range(model.n * model.m)]
    return xn, yn


def fem_to_bilinear(model: FemModel, with_map=False):
    """Reformulate the eigen-matching problem as a normalized bilinear
    bipartite instance: x = (alpha, lambda), y = stacked psi, plus a deviation
    variable `delta` carried in the side polyhedron and the objective.
    """
    n, m, k = model.n, model.m, model.k_count
    n1 = k + m
    n2 = n * m
    cons = []
    for i in range(m):
        for row in range(n):
            Q = np.zeros((n1, n2))
            b = np.zeros(n2)
            off = i * n
            for j in range(k):
                Q[j, off : off + n] = model.Kj[j][row]
            Q[k + i, off : off + n] = -model.M[row]
            b[off : off + n] = model.K0[row]
            cons.append(BilinearConstraint(Q, np.zeros(n1), b, 0.0))

    lo_x = np.concatenate([model.alpha_lb, model.lam_lb])
    hi_x = np.concatenate([model.alpha_ub, model.lam_ub])
    lo_y = np.full(n2, model.psi_lb)
    hi_y = np.full(n2, model.psi_ub)
    box = BoxBounds(lo_x, hi_x, lo_y, hi_y)

    delta_cap = 10.0
    P = Polyhedron()
    for i in range(n1):
        P.add_var(f"x{i}", lo_x[i], hi_x[i])
    for j in range(n2):
        P.add_var(f"y{j}", lo_y[j], hi_y[j])
    P.add_var("delta", 0.0, delta_cap)
    for i in range(m):
        lam_name = f"x{k + i}"
        w = float(model.w_lam[i])
        P.add_row({lam_name: w, "delta": -1.0}, LE, w * float(model.lam_meas[i]))
        P.add_row({lam_name: -w, "delta": -1.0}, LE, -w * float(model.lam_meas[i]))
        for kk, s in enumerate(model.sensor_dofs):
            psi_name = f"y{i * n + s}"
            w2 = float(model.w_psi)
            meas = float(model.psi_meas[i, kk])
            P.add_row({psi_name: w2, "delta": -1.0}, LE, w2 * meas)
            P.add_row({psi_name: -w2, "delta": -1.0}, LE, -w2 * meas)

    raw = Instance(
        n1, n2, cons, box, np.zeros(n1), np.zeros(n2), 0.0, P, (("delta", 1.0),)
    )
    x_true = np.concatenate([model.alpha_true, model.lam_true])
    y_true = model.psi_true.reshape(-1)
    raw = raw.with_feasible_point(x_true, y_true)
    norm, amap = normalize_to_unit_box(raw)
    if with_map:
        return norm, amap, raw
    return norm


def fem_row_pairs(model: FemModel):
    """Constraint-index pairs {1,2}, {3,4}, ... per mode ((n/2)*m pairs).

    Consecutive rows of the tridiagonal system share stiffness parameters, so
    these are the natural pairs to aggregate without densifying supports.
    """
    pairs = []
    for i in range(model.m):
        base = i * model.n
        for t in range(model.n // 2):
            pairs.append((base + 2 * t, base + 2 * t + 1))
    return pairs
