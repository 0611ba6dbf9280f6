"""Primal-dual interior-point engine for convex quadratic programs with
convex quadratic inequality rows.

Solves the standard form used by the model builder::

    minimize    sum_j q_j x_j^2 + c^T x
    subject to  A x = b
                G x <= h            (slack form G x + s = h, s >= 0)
                qc_k(x) <= 0        (convex, diagonal quadratic part)
                lb <= x <= ub

The implementation is an infeasible-start Mehrotra predictor-corrector:
bounds are folded into the inequality block, variables and rows are
equilibrated, and each iteration solves one condensed KKT system (dense LU
with static regularization and one refinement pass) for the affine and
corrector directions. Quadratic rows enter through their gradients plus a
second-order correction in the corrector, which is exact for quadratics.
Determinism: pure numpy, fixed iteration order, no randomness.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .mipbuild import StandardModel, fix_columns

_REG_PRIMAL = 1e-10
_REG_DUAL = 1e-10
_W_CAP = 1e14


@dataclass
class EngineResult:
    """Raw solver outcome in original (unscaled) variables."""

    x: np.ndarray
    nu: np.ndarray            # equality duals
    lam_in: np.ndarray        # duals of model inequality rows
    lam_lb: np.ndarray        # duals of active lower bounds (per column)
    lam_ub: np.ndarray        # duals of active upper bounds (per column)
    mu_quad: np.ndarray       # duals of quadratic rows
    status: str               # "optimal" | "max_iter" | "stalled"
    iterations: int
    pres: float
    dres: float
    relgap: float


def _initial_x(lb: np.ndarray, ub: np.ndarray) -> np.ndarray:
    """Analytic-center-flavored start: box midpoints, pushed off one-sided
    bounds, zero for free columns."""
    x = np.zeros(lb.size)
    both = np.isfinite(lb) & np.isfinite(ub)
    x[both] = 0.5 * (lb[both] + ub[both])
    lo_only = np.isfinite(lb) & ~np.isfinite(ub)
    x[lo_only] = lb[lo_only] + 1.0
    hi_only = ~np.isfinite(lb) & np.isfinite(ub)
    x[hi_only] = ub[hi_only] - 1.0
    return x


def _col_scale(lb: np.ndarray, ub: np.ndarray) -> np.ndarray:
    d = np.ones(lb.size)
    fl = np.isfinite(lb)
    fu = np.isfinite(ub)
    d[fl] = np.maximum(d[fl], np.abs(lb[fl]))
    d[fu] = np.maximum(d[fu], np.abs(ub[fu]))
    return d


def solve_ipm(model: StandardModel, feas_tol: float, opt_tol: float,
              max_iter: int) -> EngineResult:
    """Presolve (pin equal-bound columns, drop vanished rows), then iterate.

    Pinned columns and empty rows both destroy the strict interior the
    barrier needs (paired zero slacks), so they are removed up front. An
    inconsistent vanished row returns status ``stalled``; the caller's
    feasibility probe turns that into an infeasibility certificate.
    """
    assert not model.integrality.any(), "relax the model before solving"
    n = model.num_vars

    pinned = np.isfinite(model.lb) & (model.lb == model.ub)
    if pinned.any():
        sub, keep = fix_columns(
            model, {int(j): float(model.lb[j]) for j in np.flatnonzero(pinned)})
        res = _presolve_rows_and_solve(sub, feas_tol, opt_tol, max_iter)
        x = np.zeros(n)
        x[keep] = res.x
        x[pinned] = model.lb[pinned]
        lam_lb = np.zeros(n)
        lam_ub = np.zeros(n)
        lam_lb[keep] = res.lam_lb
        lam_ub[keep] = res.lam_ub
        return EngineResult(x, res.nu, res.lam_in, lam_lb, lam_ub,
                            res.mu_quad, res.status, res.iterations,
                            res.pres, res.dres, res.relgap)
    return _presolve_rows_and_solve(model, feas_tol, opt_tol, max_iter)


def _row_mags(mat) -> np.ndarray:
    if mat.shape[0] == 0:
        return np.zeros(0)
    out = np.zeros(mat.shape[0])
    if mat.nnz:
        out = np.abs(mat).max(axis=1).toarray().ravel()
    return out


def _presolve_rows_and_solve(model: StandardModel, feas_tol: float,
                             opt_tol: float, max_iter: int) -> EngineResult:
    n = model.num_vars
    eq_mags = _row_mags(model.a_eq)
    in_mags = _row_mags(model.g_in)
    eq_live = eq_mags > 1e-12
    in_live = in_mags > 1e-12
    quad_live = np.array([bool(row.quad_idx or row.lin_idx)
                          for row in model.quad_ineq], dtype=bool)

    def _stalled():
        return EngineResult(_initial_x(model.lb, model.ub),
                            np.zeros(model.num_eq), np.zeros(model.num_in),
                            np.zeros(n), np.zeros(n),
                            np.zeros(len(model.quad_ineq)), "stalled", 0,
                            np.inf, np.inf, np.inf)

    if np.any(~eq_live & (np.abs(model.b_eq) > 1e-9)):
        return _stalled()
    if np.any(~in_live & (model.h_in < -1e-9)):
        return _stalled()
    for row, live in zip(model.quad_ineq, quad_live):
        if not live and row.const > 1e-9:
            return _stalled()

    if eq_live.all() and in_live.all() and quad_live.all():
        return _iterate(model, feas_tol, opt_tol, max_iter)

    sliced = model.copy()
    keep_eq = np.flatnonzero(eq_live)
    keep_in = np.flatnonzero(in_live)
    sliced.a_eq = model.a_eq[keep_eq]
    sliced.b_eq = model.b_eq[keep_eq]
    sliced.eq_labels = [model.eq_labels[int(k)] for k in keep_eq]
    sliced.g_in = model.g_in[keep_in]
    sliced.h_in = model.h_in[keep_in]
    sliced.in_labels = [model.in_labels[int(k)] for k in keep_in]
    sliced.quad_ineq = [row for row, live in zip(model.quad_ineq, quad_live)
                        if live]
    res = _iterate(sliced, feas_tol, opt_tol, max_iter)
    nu = np.zeros(model.num_eq)
    nu[keep_eq] = res.nu
    lam = np.zeros(model.num_in)
    lam[keep_in] = res.lam_in
    mu = np.zeros(len(model.quad_ineq))
    mu[np.flatnonzero(quad_live)] = res.mu_quad
    return EngineResult(res.x, nu, lam, res.lam_lb, res.lam_ub, mu,
                        res.status, res.iterations, res.pres, res.dres,
                        res.relgap)


def _iterate(model: StandardModel, feas_tol: float, opt_tol: float,
             max_iter: int) -> EngineResult:
    """Mehrotra predictor-corrector on a presolved model."""
    n = model.num_vars
    if n == 0:
        return EngineResult(np.zeros(0), np.zeros(model.num_eq),
                            np.zeros(model.num_in), np.zeros(0), np.zeros(0),
                            np.zeros(len(model.quad_ineq)), "optimal", 0,
                            0.0, 0.0, 0.0)

    # --- scale columns by box magnitude, then rows to unit max coefficient
    d = _col_scale(model.lb, model.ub)
    q = model.obj_quad * d * d
    c = model.obj_lin * d
    lb = model.lb / d
    ub = model.ub / d
    A = (model.a_eq @ sp.diags(d)).tocsr() if model.num_eq else \
        sp.csr_matrix((0, n))
    b = model.b_eq.copy()
    Gm = (model.g_in @ sp.diags(d)).tocsr() if model.num_in else \
        sp.csr_matrix((0, n))
    hm = model.h_in.copy()

    def _row_scales(mat):
        if mat.shape[0] == 0:
            return np.ones(0)
        mags = np.maximum(np.abs(mat).max(axis=1).toarray().ravel(), 1.0)
        return 1.0 / mags

    rs_a = _row_scales(A)
    if rs_a.size:
        A = sp.diags(rs_a) @ A
        b = b * rs_a
    rs_g = _row_scales(Gm)
    if rs_g.size:
        Gm = sp.diags(rs_g) @ Gm
        hm = hm * rs_g

    quads = []
    rs_q = []
    for row in model.quad_ineq:
        qi = np.asarray(row.quad_idx, dtype=int)
        qc = np.asarray(row.quad_coef) * d[qi] * d[qi]
        li = np.asarray(row.lin_idx, dtype=int)
        lc = np.asarray(row.lin_coef) * d[li]
        mags = max(1.0, np.abs(qc).max(initial=0.0),
                   np.abs(lc).max(initial=0.0), abs(row.const))
        rs_q.append(1.0 / mags)
        quads.append((qi, qc / mags, li, lc / mags, row.const / mags))
    rs_q = np.asarray(rs_q)

    # --- fold finite bounds into the inequality block
    fu = np.flatnonzero(np.isfinite(ub))
    fl = np.flatnonzero(np.isfinite(lb))
    rows = [Gm]
    if fu.size:
        rows.append(sp.csr_matrix((np.ones(fu.size),
                                   (np.arange(fu.size), fu)), shape=(fu.size, n)))
    if fl.size:
        rows.append(sp.csr_matrix((-np.ones(fl.size),
                                   (np.arange(fl.size), fl)), shape=(fl.size, n)))
    G = sp.vstack(rows, format="csr") if rows else sp.csr_matrix((0, n))
    h = np.concatenate([hm, ub[fu], -lb[fl]])
    mi = G.shape[0]
    me = A.shape[0]
    mq = len(quads)
    GT = G.T.tocsr()

    def qc_val(x):
        if not mq:
            return np.zeros(0)
        return np.array([float(qc @ (x[qi] ** 2) + lc @ x[li] + pd)
                         for qi, qc, li, lc, pd in quads])

    def qc_jac(x):
        J = np.zeros((mq, n))
        for k, (qi, qc, li, lc, _) in enumerate(quads):
            J[k, qi] += 2.0 * qc * x[qi]
            J[k, li] += lc
        return J

    x = _initial_x(lb, ub)
    nu = np.zeros(me)
    if mi:
        s = np.maximum(h - G @ x, 1.0)
        lam = np.ones(mi)
    else:
        s = np.zeros(0)
        lam = np.zeros(0)
    if mq:
        t = np.maximum(-qc_val(x), 1.0)
        mu = np.ones(mq)
    else:
        t = np.zeros(0)
        mu = np.zeros(0)

    scale_p = 1.0 + max(np.abs(b).max(initial=0.0), np.abs(h).max(initial=0.0))
    scale_d = 1.0 + np.abs(c).max(initial=0.0)
    m_total = mi + mq

    def grad_f(x):
        return 2.0 * q * x + c

    def residuals(x, nu, lam, mu, J, qv):
        rd = grad_f(x)
        if me:
            rd = rd + A.T @ nu
        if mi:
            rd = rd + GT @ lam
        if mq:
            rd = rd + J.T @ mu
        rp = (A @ x - b) if me else np.zeros(0)
        rg = (G @ x + s - h) if mi else np.zeros(0)
        rq = (qv + t) if mq else np.zeros(0)
        return rd, rp, rg, rq

    best = None
    best_merit = np.inf
    status = "max_iter"
    stall = 0
    iters_done = 0
    pres = dres = relgap = np.inf
    pres_hist: list[float] = []

    # pure equality-constrained QP: single KKT solve
    if m_total == 0:
        K = np.zeros((n + me, n + me))
        K[:n, :n] = np.diag(2.0 * q + _REG_PRIMAL)
        if me:
            Ad = A.toarray()
            K[:n, n:] = Ad.T
            K[n:, :n] = Ad
            K[n:, n:] = -_REG_DUAL * np.eye(me)
        rhs = np.concatenate([-c, b])
        sol = sla.lu_solve(sla.lu_factor(K), rhs)
        x, nu = sol[:n], sol[n:]
        rd, rp, _, _ = residuals(x, nu, lam, mu, np.zeros((0, n)), np.zeros(0))
        return EngineResult(
            x * d, _unscale_nu(nu, rs_a), np.zeros(0), np.zeros(n),
            np.zeros(n), np.zeros(0), "optimal", 1,
            float(np.abs(rp).max(initial=0.0)),
            float(np.abs(rd).max(initial=0.0)), 0.0)

    for it in range(max_iter):
        iters_done = it + 1
        qv = qc_val(x)
        J = qc_jac(x) if mq else np.zeros((0, n))
        rd, rp, rg, rq = residuals(x, nu, lam, mu, J, qv)

        gap_total = float(s @ lam + t @ mu)
        gap = gap_total / m_total
        fx = float(q @ (x * x) + c @ x)
        pres = max(np.abs(rp).max(initial=0.0), np.abs(rg).max(initial=0.0),
                   np.abs(rq).max(initial=0.0))
        dres = float(np.abs(rd).max(initial=0.0))
        relgap = gap_total / (1.0 + abs(fx))

        merit = pres / scale_p + dres / scale_d + relgap
        if merit < best_merit:
            best_merit = merit
            best = (x.copy(), nu.copy(), lam.copy(), mu.copy(),
                    pres, dres, relgap)

        if (pres <= feas_tol * scale_p and dres <= opt_tol * scale_d * 10.0
                and relgap <= opt_tol):
            status = "optimal"
            break

        # infeasible problems show up as diverging duals with a primal
        # residual that stops improving; bail out early and let the caller's
        # feasibility probe make the call
        dual_norm = max(np.abs(lam).max(initial=0.0),
                        np.abs(mu).max(initial=0.0),
                        np.abs(nu).max(initial=0.0))
        if dual_norm > 1e9 and pres > 10.0 * feas_tol * scale_p:
            status = "stalled"
            break
        pres_hist.append(pres)
        if (len(pres_hist) >= 24 and pres > 1e3 * feas_tol * scale_p
                and min(pres_hist[-12:]) > 0.8 * min(pres_hist[-24:-12])):
            status = "stalled"
            break

        # condensed KKT matrix, shared by predictor and corrector
        W = np.minimum(lam / s, _W_CAP)
        V = np.minimum(mu / t, _W_CAP) if mq else np.zeros(0)
        Hd = 2.0 * q + _REG_PRIMAL
        for k, (qi, qc, _, _, _) in enumerate(quads):
            Hd[qi] += 2.0 * mu[k] * qc
        M = (GT @ sp.diags(W) @ G).toarray()
        M[np.diag_indices(n)] += Hd
        for k in range(mq):
            M += V[k] * np.outer(J[k], J[k])
        K = np.zeros((n + me, n + me))
        K[:n, :n] = M
        if me:
            Ad = A.toarray()
            K[:n, n:] = Ad.T
            K[n:, :n] = Ad
            K[n:, n:] = -_REG_DUAL * np.eye(me)
        try:
            with np.errstate(all="ignore"), warnings.catch_warnings():
                warnings.simplefilter("ignore")
                lu = sla.lu_factor(K, check_finite=False)
            if not np.isfinite(lu[0]).all():
                raise FloatingPointError("singular KKT factorization")
        except Exception:
            status = "stalled"
            break

        def solve_kkt(rhs):
            with np.errstate(all="ignore"):
                sol = sla.lu_solve(lu, rhs, check_finite=False)
                if not np.isfinite(sol).all():
                    raise FloatingPointError("non-finite KKT solution")
                # one refinement pass
                sol = sol + sla.lu_solve(lu, rhs - K @ sol, check_finite=False)
            if not np.isfinite(sol).all():
                raise FloatingPointError("non-finite KKT solution")
            return sol[:n], sol[n:]

        def direction(sigma_gap, corr_s, corr_t, rq_eff):
            rcs = sigma_gap - s * lam - corr_s
            rct = (sigma_gap - t * mu - corr_t) if mq else np.zeros(0)
            rhs_x = -rd - GT @ ((rcs + lam * rg) / s)
            if mq:
                rhs_x = rhs_x - J.T @ ((rct + mu * rq_eff) / t)
            rhs = np.concatenate([rhs_x, -rp])
            dx, dnu = solve_kkt(rhs)
            ds = -rg - G @ dx
            dlam = (rcs - lam * ds) / s
            if mq:
                dt = -rq_eff - J @ dx
                dmu = (rct - mu * dt) / t
            else:
                dt = np.zeros(0)
                dmu = np.zeros(0)
            return dx, dnu, ds, dlam, dt, dmu

        def max_step(v, dv):
            neg = dv < 0
            if not neg.any():
                return 1.0
            return float(min(1.0, (-v[neg] / dv[neg]).min()))

        # predictor
        try:
            dxa, dnua, dsa, dlama, dta, dmua = direction(
                0.0, np.zeros(mi), np.zeros(mq), rq)
            a_aff = min(max_step(s, dsa), max_step(lam, dlama),
                        max_step(t, dta) if mq else 1.0,
                        max_step(mu, dmua) if mq else 1.0)
            gap_aff = (float((s + a_aff * dsa) @ (lam + a_aff * dlama))
                       + (float((t + a_aff * dta) @ (mu + a_aff * dmua))
                          if mq else 0.0)) / m_total
            sigma = min(max((gap_aff / gap) ** 3, 1e-8), 1.0 - 1e-8)

            # corrector with second-order terms (exact for quadratic rows)
            if mq:
                soc = np.array([float(qc @ (dxa[qi] ** 2))
                                for qi, qc, _, _, _ in quads])
                rq_eff = rq + soc
            else:
                rq_eff = rq
            dx, dnu, ds, dlam, dt, dmu = direction(
                sigma * gap, dsa * dlama,
                dta * dmua if mq else np.zeros(0), rq_eff)
        except FloatingPointError:
            status = "stalled"
            break

        tau = 0.995 if gap > 1e-6 else 0.9995
        alpha = tau * min(max_step(s, ds), max_step(lam, dlam),
                          max_step(t, dt) if mq else 1.0,
                          max_step(mu, dmu) if mq else 1.0)
        alpha = min(alpha, 1.0)
        if alpha < 1e-9:
            stall += 1
            if stall >= 3:
                status = "stalled"
                break
        else:
            stall = 0

        x = x + alpha * dx
        nu = nu + alpha * dnu
        s = s + alpha * ds
        lam = lam + alpha * dlam
        if mq:
            t = t + alpha * dt
            mu = mu + alpha * dmu

    if status != "optimal" and best is not None:
        x, nu, lam, mu, pres, dres, relgap = best

    # split folded duals back out and undo scaling
    lam_model = lam[:model.num_in] if model.num_in else np.zeros(0)
    lam_ub = np.zeros(n)
    lam_lb = np.zeros(n)
    off = model.num_in
    if fu.size:
        lam_ub[fu] = lam[off:off + fu.size]
        off += fu.size
    if fl.size:
        lam_lb[fl] = lam[off:off + fl.size]

    return EngineResult(
        x * d,
        _unscale_nu(nu, rs_a),
        lam_model * rs_g if model.num_in else lam_model,
        lam_lb / d, lam_ub / d,
        mu * rs_q if mq else mu,
        status, iters_done, float(pres), float(dres), float(relgap))


def _unscale_nu(nu: np.ndarray, rs_a: np.ndarray) -> np.ndarray:
    return nu * rs_a if nu.size else nu
