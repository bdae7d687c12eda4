"""Exact LP and MILP solving for test-time optimization and oracles.

The LP path runs the interior-point solver to a tiny barrier weight and then
purifies the iterate onto the active face, which recovers vertex-exact
objectives on desk-scale instances.  MILPs are solved by best-first branch
and bound over LP relaxations.  A presolve pass fixes variables pinned by
singleton rows (x_j <= 0 together with x_j >= 0, branching bounds, hard
commitments); this is what lets an interior-point backend handle node LPs
whose feasible region has an empty interior.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .barrier import RelaxedLp, relax, solve_barrier
from .errors import Infeasible, NodeLimitExceeded, NumericalFailure, TooLarge
from .milp import StandardFormMilp

LP_MU = 1e-9
INT_TOL = 1e-6


class Status(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class ExactSolution:
    x: np.ndarray
    objective: float
    status: Status
    node_count: int = 0


def _as_lp(problem) -> RelaxedLp:
    return relax(problem) if isinstance(problem, StandardFormMilp) else problem


@dataclass
class _Presolved:
    status: Status
    free: np.ndarray  # indices of surviving variables
    values: np.ndarray  # full-length vector, fixed entries filled
    lp: RelaxedLp | None
    obj_offset: float


def _presolve(lp: RelaxedLp) -> _Presolved:
    d = lp.d
    free = np.ones(d, dtype=bool)
    values = np.zeros(d)
    A, b = lp.A.copy(), lp.b.copy()
    G, h = lp.G.copy(), lp.h.copy()
    keep_g = np.ones(lp.q, dtype=bool)
    keep_a = np.ones(lp.p, dtype=bool)
    feas_tol = 1e-9 * (1.0 + max(float(np.max(np.abs(h))) if lp.q else 0.0, float(np.max(np.abs(b))) if lp.p else 0.0))

    def fail():
        return _Presolved(Status.INFEASIBLE, np.where(free)[0], values, None, 0.0)

    while True:
        lb = np.where(free, 0.0, -np.inf)
        ub = np.full(d, np.inf)
        for i in range(lp.q):
            if not keep_g[i]:
                continue
            row = G[i]
            nz = np.where(free & (np.abs(row) > 1e-12))[0]
            if nz.size == 0:
                if h[i] > feas_tol:
                    return fail()
                keep_g[i] = False
            elif nz.size == 1:
                j, g = nz[0], row[nz[0]]
                if g > 0:
                    lb[j] = max(lb[j], h[i] / g)
                else:
                    ub[j] = min(ub[j], h[i] / g)
        fixes: dict[int, float] = {}
        for i in range(lp.p):
            if not keep_a[i]:
                continue
            row = A[i]
            nz = np.where(free & (np.abs(row) > 1e-12))[0]
            if nz.size == 0:
                if abs(b[i]) > feas_tol:
                    return fail()
                keep_a[i] = False
            elif nz.size == 1:
                j = nz[0]
                val = b[i] / row[j]
                if j in fixes and abs(fixes[j] - val) > 1e-9:
                    return fail()
                fixes[j] = val
                keep_a[i] = False
        for j in np.where(free)[0]:
            if lb[j] > ub[j] + 1e-9:
                return fail()
            if ub[j] - lb[j] <= 1e-12:
                fixes.setdefault(j, lb[j])
        for j, val in fixes.items():
            if val < -1e-9 or lb[j] - 1e-9 > val or val > ub[j] + 1e-9:
                return fail()
        if not fixes:
            break
        for j, val in fixes.items():
            free[j] = False
            values[j] = val
            b -= A[:, j] * val
            h -= G[:, j] * val
            A[:, j] = 0.0
            G[:, j] = 0.0

    free_idx = np.where(free)[0]
    obj_offset = float(lp.c[~free] @ values[~free])
    if free_idx.size == 0:
        return _Presolved(Status.OPTIMAL, free_idx, values, None, obj_offset)
    reduced = RelaxedLp(
        lp.c[free_idx],
        A[keep_a][:, free_idx] if lp.p else np.zeros((0, free_idx.size)),
        b[keep_a] if lp.p else np.zeros(0),
        G[keep_g][:, free_idx] if lp.q else np.zeros((0, free_idx.size)),
        h[keep_g] if lp.q else np.zeros(0),
    )
    return _Presolved(Status.OPTIMAL, free_idx, values, reduced, obj_offset)


def _lp_feasible(lp: RelaxedLp, x: np.ndarray, tol: float) -> bool:
    if np.min(x, initial=np.inf) < -tol:
        return False
    if lp.p and float(np.max(np.abs(lp.A @ x - lp.b))) > tol:
        return False
    if lp.q and float(np.min(lp.G @ x - lp.h)) < -tol:
        return False
    return True


def _purify(lp: RelaxedLp, x: np.ndarray) -> np.ndarray:
    """Project the interior iterate onto its active face.

    Variables within threshold of zero are pinned, tight inequality rows are
    made exact equalities, and the minimum-norm correction satisfying that
    system is applied.  Falls back to the barrier point if the projected
    point is inconsistent, infeasible, or worse.
    """
    obj = float(lp.c @ x)
    scale_x = 1.0 + float(np.max(np.abs(x)))
    h_scale = 1.0 + (np.abs(lp.h) if lp.q else np.zeros(0))
    slack = lp.G @ x - lp.h if lp.q else np.zeros(0)
    tol_abs = 1e-8 * (scale_x + (float(np.max(np.abs(lp.h))) if lp.q else 0.0))
    for thr in (1e-6, 1e-8):
        pinned = np.where(x <= thr * scale_x)[0]
        act = np.where(slack <= thr * h_scale)[0] if lp.q else np.array([], dtype=int)
        rows = []
        rhs = []
        if lp.p:
            rows.append(lp.A)
            rhs.append(lp.b)
        if act.size:
            rows.append(lp.G[act])
            rhs.append(lp.h[act])
        if pinned.size:
            eye = np.eye(lp.d)
            rows.append(eye[pinned])
            rhs.append(np.zeros(pinned.size))
        if not rows:
            return x
        E = np.vstack(rows)
        f = np.concatenate(rhs)
        delta, *_ = np.linalg.lstsq(E, E @ x - f, rcond=None)
        cand = x - delta
        if (
            float(np.max(np.abs(E @ cand - f))) <= tol_abs
            and _lp_feasible(lp, cand, tol_abs)
            and float(lp.c @ cand) <= obj + 1e-7 * (1.0 + abs(obj))
        ):
            return cand
    return x


def solve_lp_exact(problem: RelaxedLp | StandardFormMilp) -> ExactSolution:
    """Exact LP optimum (vertex purification on top of the barrier path)."""
    lp = _as_lp(problem)
    pre = _presolve(lp)
    if pre.status is Status.INFEASIBLE:
        return ExactSolution(np.full(lp.d, np.nan), np.nan, Status.INFEASIBLE)
    values = pre.values.copy()
    if pre.lp is None:
        return ExactSolution(values, float(lp.c @ values), Status.OPTIMAL)
    try:
        # Aggressive schedule: purification does the last stretch to the vertex.
        sol = solve_barrier(pre.lp, mu_cutoff=LP_MU, tol=1e-9, gamma=0.02)
    except Infeasible:
        return ExactSolution(np.full(lp.d, np.nan), np.nan, Status.INFEASIBLE)
    except NumericalFailure as exc:
        if exc.unbounded_hint:
            return ExactSolution(np.full(lp.d, np.nan), -np.inf, Status.UNBOUNDED)
        raise
    xr = _purify(pre.lp, sol.x)
    values[pre.free] = xr
    return ExactSolution(values, float(lp.c @ values), Status.OPTIMAL)


def _lex_smaller(a: np.ndarray, b: np.ndarray) -> bool:
    ra, rb = np.round(a, 9), np.round(b, 9)
    for u, v in zip(ra, rb):
        if u != v:
            return u < v
    return False


def _with_bounds(lp: RelaxedLp, bounds: tuple[tuple[int, int, float], ...]) -> RelaxedLp:
    """Append branching rows: (j, +1, v) means x_j >= v; (j, -1, v) means x_j <= v."""
    if not bounds:
        return lp
    rows = np.zeros((len(bounds), lp.d))
    rhs = np.zeros(len(bounds))
    for k, (j, sense, v) in enumerate(bounds):
        rows[k, j] = float(sense)
        rhs[k] = v if sense > 0 else -v
    return RelaxedLp(lp.c, lp.A, lp.b, np.vstack([lp.G, rows]), np.concatenate([lp.h, rhs]))


def solve_milp_bnb(
    milp: StandardFormMilp,
    node_limit: int = 10**6,
    log: list | None = None,
) -> ExactSolution:
    """Best-first branch and bound on LP relaxations.

    Branches on the most fractional integer variable with floor/ceil bound
    rows; ties among equal-objective incumbents resolve to the
    lexicographically smallest solution so reruns are deterministic.
    """
    base = relax(milp)
    int_idx = np.array(sorted(milp.int_vars), dtype=int)
    if int_idx.size == 0:
        lp_sol = solve_lp_exact(base)
        return replace(lp_sol, node_count=1)

    counter = itertools.count()
    heap: list[tuple[float, int, tuple]] = [(-np.inf, next(counter), ())]
    inc_x: np.ndarray | None = None
    inc_obj = np.inf
    nodes = 0

    def try_incumbent(x: np.ndarray):
        nonlocal inc_x, inc_obj
        cand = x.copy()
        cand[int_idx] = np.round(cand[int_idx])
        if not _lp_feasible(base, cand, 1e-9 * (1.0 + float(np.max(np.abs(cand))))):
            return
        obj = float(milp.c @ cand)
        if obj < inc_obj - 1e-9 or inc_x is None:
            inc_x, inc_obj = cand, obj
        elif abs(obj - inc_obj) <= 1e-9 and _lex_smaller(cand, inc_x):
            inc_x = cand

    while heap:
        bound_est, _, bounds = heapq.heappop(heap)
        if bound_est >= inc_obj - 1e-9:
            continue
        if nodes >= node_limit:
            raise NodeLimitExceeded(f"branch and bound exceeded {node_limit} nodes")
        nodes += 1
        sol = solve_lp_exact(_with_bounds(base, bounds))
        if sol.status is Status.INFEASIBLE:
            if log is not None:
                log.append({"bound": np.inf, "incumbent": inc_obj, "integral": False})
            continue
        if sol.status is Status.UNBOUNDED:
            return ExactSolution(np.full(milp.d, np.nan), -np.inf, Status.UNBOUNDED, nodes)
        frac = np.abs(sol.x[int_idx] - np.round(sol.x[int_idx]))
        integral = bool(np.max(frac, initial=0.0) <= INT_TOL)
        if log is not None:
            log.append({"bound": sol.objective, "incumbent": inc_obj, "integral": integral})
        if integral:
            try_incumbent(sol.x)
            continue
        if not bounds:
            # Rounding heuristics at the root seed the incumbent for pruning.
            floored = sol.x.copy()
            floored[int_idx] = np.floor(floored[int_idx] + 1e-9)
            try_incumbent(floored)
            try_incumbent(sol.x)
        if sol.objective >= inc_obj - 1e-9:
            continue
        j = int(int_idx[int(np.argmax(np.minimum(frac, 1.0 - frac)))])
        fl = float(np.floor(sol.x[j]))
        heapq.heappush(heap, (sol.objective, next(counter), bounds + ((j, -1, fl),)))
        heapq.heappush(heap, (sol.objective, next(counter), bounds + ((j, 1, fl + 1.0),)))
    if inc_x is None:
        return ExactSolution(np.full(milp.d, np.nan), np.nan, Status.INFEASIBLE, nodes)
    return ExactSolution(inc_x, inc_obj, Status.OPTIMAL, nodes)


def enumerate_binary(milp: StandardFormMilp, chunk: int = 8192) -> ExactSolution:
    """Exhaustive scan over {0,1}^d; the oracle all MILP paths are checked against."""
    d = milp.d
    if d > 20:
        raise TooLarge(f"enumeration limited to d<=20 (got {d})")
    shifts = d - 1 - np.arange(d)
    best_x, best_obj = None, np.inf
    for start in range(0, 2**d, chunk):
        idx = np.arange(start, min(start + chunk, 2**d), dtype=np.int64)
        X = ((idx[:, None] >> shifts) & 1).astype(float)
        ok = np.ones(X.shape[0], dtype=bool)
        if milp.p:
            ok &= np.max(np.abs(X @ milp.A.T - milp.b), axis=1) <= 1e-6
        if milp.q:
            ok &= np.min(X @ milp.G.T - milp.h, axis=1) >= -1e-6
        if not np.any(ok):
            continue
        objs = X[ok] @ milp.c
        k = int(np.argmin(objs))
        if objs[k] < best_obj:  # strict: the first hit in lexicographic order wins ties
            best_obj = float(objs[k])
            best_x = X[ok][k].copy()
    if best_x is None:
        return ExactSolution(np.full(d, np.nan), np.nan, Status.INFEASIBLE, node_count=2**d)
    return ExactSolution(best_x, best_obj, Status.OPTIMAL, node_count=2**d)
