"""Convex solves for the relaxed dispatch model.

``solve_convex`` runs the bundled interior-point engine (an adapter seam lets
callers delegate to an external solver with the same standard-form contract:
model in, primal/dual vectors out). ``solve_consensus`` runs an area-
decomposed scaled consensus ADMM over the boundary variables referenced by
the coupling rows; within one outer iteration the area subproblems are
independent and synchronize at the iteration barrier.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .errors import NonConvergence
from .ipm import EngineResult, solve_ipm
from .mipbuild import AreaView, QuadRow, StandardModel, check_point

OPTIMAL = "Optimal"
MAX_ITER = "MaxIter"
INFEASIBLE = "Infeasible"


@dataclass(frozen=True)
class SolveOptions:
    """Tolerances and iteration cap for one convex solve."""

    feas_tol: float = 1e-8
    opt_tol: float = 1e-8
    max_iter: int = 200
    engine: Callable | None = None  # adapter seam; defaults to solve_ipm

    def __post_init__(self):
        if self.feas_tol <= 0 or self.opt_tol <= 0 or self.max_iter <= 0:
            raise ValueError("solve options must be positive")


@dataclass
class Residuals:
    max_eq: float
    max_ineq: float
    gap: float


@dataclass
class Solution:
    """Primal point with objective, status and residual summary.

    ``duals`` carries equality, inequality, bound and quadratic-row
    multipliers for stationarity checks. Solver tolerances apply to the
    internally equilibrated system; ``residuals`` report raw row violations.
    Consensus solves additionally record the per-iteration primal/dual
    residual sequence in ``history``.
    """

    x: np.ndarray
    objective: float
    status: str
    residuals: Residuals
    iterations: int
    duals: dict = field(default_factory=dict)
    history: list = field(default_factory=list)


def _empty_box(model: StandardModel) -> bool:
    return bool(np.any(model.lb > model.ub))


def _solution_from_engine(model: StandardModel, res: EngineResult,
                          opts: SolveOptions, status: str) -> Solution:
    rep = check_point(model, res.x, tol=np.inf)
    return Solution(
        x=res.x,
        objective=model.objective(res.x),
        status=status,
        residuals=Residuals(max_eq=rep.max_eq,
                            max_ineq=max(rep.max_in, rep.max_quad,
                                         rep.max_bound),
                            gap=res.relgap),
        iterations=res.iterations,
        duals={"eq": res.nu, "ineq": res.lam_in, "lb": res.lam_lb,
               "ub": res.lam_ub, "quad": res.mu_quad},
    )


def _elastic_model(model: StandardModel) -> StandardModel:
    """Feasibility-probe model: every row is relaxed by a penalized slack.

    Variable boxes stay hard (callers pre-check them), so the probe is always
    feasible and its optimum measures the least total constraint violation.
    """
    n = model.num_vars
    me, mi, mq = model.num_eq, model.num_in, len(model.quad_ineq)
    n_new = n + 2 * me + mi + mq
    lb = np.concatenate([model.lb, np.zeros(2 * me + mi + mq)])
    ub = np.concatenate([model.ub, np.full(2 * me + mi + mq, np.inf)])
    obj_lin = np.concatenate([np.zeros(n), np.ones(2 * me + mi + mq)])

    a_eq = sp.hstack([model.a_eq, sp.identity(me), -sp.identity(me),
                      sp.csr_matrix((me, mi + mq))], format="csr") \
        if me else sp.csr_matrix((0, n_new))
    g_in = sp.hstack([model.g_in, sp.csr_matrix((mi, 2 * me)),
                      -sp.identity(mi), sp.csr_matrix((mi, mq))],
                     format="csr") if mi else sp.csr_matrix((0, n_new))
    quad_rows = []
    for k, row in enumerate(model.quad_ineq):
        quad_rows.append(QuadRow(
            row.quad_idx, row.quad_coef,
            row.lin_idx + (n + 2 * me + mi + k,), row.lin_coef + (-1.0,),
            row.const, row.label))

    return StandardModel(
        n_new, np.zeros(n_new), obj_lin, 0.0, a_eq, model.b_eq.copy(),
        g_in, model.h_in.copy(), quad_rows, lb, ub,
        np.zeros(n_new, dtype=bool), list(model.eq_labels),
        list(model.in_labels))


def feasibility_probe(model: StandardModel, opts: SolveOptions) -> float:
    """Least total (L1) constraint violation subject to the variable boxes.

    Decides feasible-but-slow versus infeasible, so moderate accuracy is
    enough.
    """
    probe = _elastic_model(model)
    # the probe must reach a verdict even when the caller capped iterations
    res = solve_ipm(probe, feas_tol=max(opts.feas_tol, 1e-8),
                    opt_tol=max(opts.opt_tol, 1e-8),
                    max_iter=max(opts.max_iter, 100))
    return float(probe.objective(res.x))


def _presolve_infeasible(model: StandardModel) -> bool:
    """Catch rows whose support vanished (e.g. after fixing columns)."""
    if model.num_eq:
        nnz = np.diff(model.a_eq.indptr)
        bad = (nnz == 0) & (np.abs(model.b_eq) > 1e-9)
        if bad.any():
            return True
    if model.num_in:
        nnz = np.diff(model.g_in.indptr)
        bad = (nnz == 0) & (model.h_in < -1e-9)
        if bad.any():
            return True
    for row in model.quad_ineq:
        if not row.quad_idx and not row.lin_idx and row.const > 1e-9:
            return True
    return False


def solve_convex(model: StandardModel, opts: SolveOptions | None = None) -> Solution:
    """Solve a relaxed standard-form model to the requested tolerances.

    Returns a Solution with status Optimal, MaxIter (best iterate, residuals
    reported) or Infeasible (empty box, vanished row, or a feasibility probe
    that certifies positive minimum violation). Deterministic for identical
    inputs.
    """
    opts = opts or SolveOptions()
    assert not model.integrality.any(), "solve_convex needs a relaxed model"

    if _empty_box(model):
        return Solution(np.zeros(model.num_vars), np.nan, INFEASIBLE,
                        Residuals(np.inf, np.inf, np.inf), 0)
    if _presolve_infeasible(model):
        return Solution(np.zeros(model.num_vars), np.nan, INFEASIBLE,
                        Residuals(np.inf, np.inf, np.inf), 0)

    engine = opts.engine or (lambda m, o: solve_ipm(
        m, feas_tol=o.feas_tol, opt_tol=o.opt_tol, max_iter=o.max_iter))
    res = engine(model, opts)
    if res.status == "optimal":
        return _solution_from_engine(model, res, opts, OPTIMAL)

    # engine did not converge: decide feasible-but-slow vs infeasible
    violation = feasibility_probe(model, opts)
    if violation > max(1e-6, 100.0 * opts.feas_tol) * (
            1.0 + np.abs(model.b_eq).max(initial=0.0)):
        return Solution(res.x, np.nan, INFEASIBLE,
                        Residuals(np.inf, np.inf, np.inf), res.iterations)
    return _solution_from_engine(model, res, opts, MAX_ITER)


# ---------------------------------------------------------------------------
# consensus mode
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConsensusOptions:
    """Scaled consensus ADMM knobs."""

    rho: float = 1.0
    max_outer: int = 500
    primal_tol: float = 1e-6
    dual_tol: float = 1e-6
    inner: SolveOptions = field(default_factory=lambda: SolveOptions(
        feas_tol=1e-9, opt_tol=1e-9))

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError("rho must be > 0")


class _AreaProblem:
    """Submodel of one area plus borrowed copies of boundary columns.

    The consensus penalty is weighted per variable by the inverse squared box
    magnitude, so angle copies (order 0.1) and flow copies (order 100) feel
    comparable stiffness in their own units.
    """

    def __init__(self, model: StandardModel, view: AreaView, shared: list[int]):
        local = list(view.owned_cols) + [j for j in shared
                                         if j not in set(view.owned_cols)]
        self.global_cols = np.array(local, dtype=int)
        self.pos = {int(j): k for k, j in enumerate(self.global_cols)}
        self.shared_local = np.array([self.pos[j] for j in shared], dtype=int)
        self.shared_global = np.array(shared, dtype=int)
        scale = np.array([max(1.0,
                              abs(model.lb[j]) if np.isfinite(model.lb[j]) else 0.0,
                              abs(model.ub[j]) if np.isfinite(model.ub[j]) else 0.0)
                          for j in shared])
        self.weights = 1.0 / (scale * scale)

        nloc = self.global_cols.size
        rows_eq = np.asarray(view.owned_eq_rows, dtype=int)
        rows_in = np.asarray(view.owned_in_rows, dtype=int)
        a_eq = model.a_eq[rows_eq][:, self.global_cols].tocsr() if rows_eq.size \
            else sp.csr_matrix((0, nloc))
        g_in = model.g_in[rows_in][:, self.global_cols].tocsr() if rows_in.size \
            else sp.csr_matrix((0, nloc))
        # owned rows must not reference columns outside the local set
        if rows_eq.size:
            assert model.a_eq[rows_eq].getnnz() == a_eq.getnnz()
        if rows_in.size:
            assert model.g_in[rows_in].getnnz() == g_in.getnnz()

        quad_rows = []
        for k in view.owned_quad_rows:
            row = model.quad_ineq[int(k)]
            quad_rows.append(QuadRow(
                tuple(self.pos[j] for j in row.quad_idx), row.quad_coef,
                tuple(self.pos[j] for j in row.lin_idx), row.lin_coef,
                row.const, row.label))

        owned_set = set(int(j) for j in view.owned_cols)
        obj_quad = np.zeros(nloc)
        obj_lin = np.zeros(nloc)
        for k, j in enumerate(self.global_cols):
            if int(j) in owned_set:
                obj_quad[k] = model.obj_quad[j]
                obj_lin[k] = model.obj_lin[j]

        self.base = StandardModel(
            nloc, obj_quad, obj_lin, 0.0, a_eq,
            model.b_eq[rows_eq].copy() if rows_eq.size else np.zeros(0),
            g_in, model.h_in[rows_in].copy() if rows_in.size else np.zeros(0),
            quad_rows, model.lb[self.global_cols].copy(),
            model.ub[self.global_cols].copy(),
            np.zeros(nloc, dtype=bool),
            [model.eq_labels[int(k)] for k in rows_eq],
            [model.in_labels[int(k)] for k in rows_in])
        self.u = np.zeros(self.shared_local.size)  # scaled duals
        self.x = np.zeros(nloc)

    def solve(self, z_vals: np.ndarray, rho: float, opts: SolveOptions) -> None:
        sub = self.base.copy()
        sl = self.shared_local
        w = rho * self.weights
        sub.obj_quad[sl] += 0.5 * w
        sub.obj_lin[sl] += -w * (z_vals - self.u)
        sol = solve_convex(sub, opts)
        if sol.status == INFEASIBLE:
            raise NonConvergence(
                "area subproblem infeasible during consensus iteration")
        self.x = sol.x

    def shared_values(self) -> np.ndarray:
        return self.x[self.shared_local]


def solve_consensus(model: StandardModel, views: list[AreaView],
                    opts: ConsensusOptions | None = None) -> Solution:
    """Area-decomposed solve of a relaxed model via scaled consensus ADMM.

    Boundary variables (columns referenced by coupling rows owned by another
    area) are duplicated per touching area and reconciled through averaged
    consensus values with scaled dual updates; the penalty parameter is
    rebalanced from the primal/dual residual ratio. With a single area this
    reduces to one centralized solve.

    Raises NonConvergence when the iteration cap is hit with residuals still
    far from tolerance (increase rho or the cap).
    """
    opts = opts or ConsensusOptions()

    all_coupling = [k for v in views for k in v.coupling_eq_rows]
    if not all_coupling or len(views) == 1:
        sol = solve_convex(model, opts.inner)
        sol.iterations = 1
        return sol

    # shared column -> areas that need a copy (owner + borrowers)
    col_owner = {}
    for v in views:
        for j in v.owned_cols:
            col_owner[int(j)] = v.area
    shared_map: dict[int, set[int]] = {}
    for v in views:
        for j in v.foreign_cols:
            shared_map.setdefault(int(j), {col_owner[int(j)]}).add(v.area)
    shared_cols = sorted(shared_map)
    areas_of = {j: sorted(shared_map[j]) for j in shared_cols}

    probs: dict[int, _AreaProblem] = {}
    for v in views:
        mine = [j for j in shared_cols if v.area in areas_of[j]]
        probs[v.area] = _AreaProblem(model, v, mine)
    local_shared = {a: p.shared_global for a, p in probs.items()}

    # consensus state, initialized at box centers
    z = {}
    for j in shared_cols:
        lo, hi = model.lb[j], model.ub[j]
        if np.isfinite(lo) and np.isfinite(hi):
            z[j] = 0.5 * (lo + hi)
        else:
            z[j] = 0.0
    rho = opts.rho
    scale_v = {j: max(1.0, abs(model.lb[j]) if np.isfinite(model.lb[j]) else 0.0,
                      abs(model.ub[j]) if np.isfinite(model.ub[j]) else 0.0)
               for j in shared_cols}

    status = MAX_ITER
    it = 0
    r_norm = d_norm = np.inf
    history = []
    for it in range(1, opts.max_outer + 1):
        for a in sorted(probs):
            p = probs[a]
            zv = np.array([z[int(j)] for j in local_shared[a]])
            p.solve(zv, rho, opts.inner)

        z_old = dict(z)
        sums = {j: 0.0 for j in shared_cols}
        for a, p in probs.items():
            vals = p.shared_values() + p.u
            for j, v in zip(local_shared[a], vals):
                sums[int(j)] += float(v)
        for j in shared_cols:
            z[j] = sums[j] / len(areas_of[j])

        r_parts = []
        d_parts = []
        for a, p in probs.items():
            zv = np.array([z[int(j)] for j in local_shared[a]])
            diff = p.shared_values() - zv
            p.u = p.u + diff
            sc = np.array([scale_v[int(j)] for j in local_shared[a]])
            r_parts.append(np.abs(diff) / sc)
        for j in shared_cols:
            d_parts.append(abs(z[j] - z_old[j]) / scale_v[j])
        r_norm = float(np.concatenate(r_parts).max(initial=0.0))
        d_norm = rho * float(np.max(d_parts, initial=0.0))
        history.append((r_norm, d_norm))

        if r_norm <= opts.primal_tol and d_norm <= opts.dual_tol:
            status = OPTIMAL
            break

        if it % 10 == 0:
            if r_norm > 10.0 * d_norm and rho < 1e6:
                rho *= 2.0
                for p in probs.values():
                    p.u = p.u / 2.0
            elif d_norm > 10.0 * r_norm and rho > 1e-4:
                rho /= 2.0
                for p in probs.values():
                    p.u = p.u * 2.0

    if status == MAX_ITER and r_norm > 1e3 * opts.primal_tol:
        raise NonConvergence(
            f"consensus residual {r_norm:.2e} after {it} iterations; "
            "consider increasing rho")

    x = np.zeros(model.num_vars)
    for a, p in probs.items():
        owned = [k for k, j in enumerate(p.global_cols)
                 if col_owner[int(j)] == a]
        x[p.global_cols[owned]] = p.x[owned]
    for j in shared_cols:
        x[j] = z[j]

    rep = check_point(model, x, tol=np.inf)
    return Solution(
        x=x, objective=model.objective(x), status=status,
        residuals=Residuals(rep.max_eq,
                            max(rep.max_in, rep.max_quad, rep.max_bound),
                            r_norm),
        iterations=it, history=history)
