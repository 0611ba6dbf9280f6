import numpy as np
import pytest
import scipy.sparse as sp

import ogpf
from ogpf.convexsolve import (ConsensusOptions, SolveOptions, solve_consensus,
                              solve_convex)
from ogpf.ipm import solve_ipm
from ogpf.mipbuild import AreaView, StandardModel, area_views, build_model, relax
from ogpf.pwa import PwaConfig

from conftest import make_instance, small_witness_point


def _box_qp(q, c, lb, ub, const=0.0):
    n = len(q)
    return StandardModel(
        n, np.asarray(q, float), np.asarray(c, float), const,
        sp.csr_matrix((0, n)), np.zeros(0), sp.csr_matrix((0, n)),
        np.zeros(0), [], np.asarray(lb, float), np.asarray(ub, float),
        np.zeros(n, dtype=bool), [], [])


def test_clipped_unconstrained_minimizer():
    # minimize (p - 1)^2 over p in [0, 0.5]
    model = _box_qp([1.0], [-2.0], [0.0], [0.5], const=1.0)
    sol = solve_convex(model)
    assert sol.status == "Optimal"
    assert sol.x[0] == pytest.approx(0.5, abs=1e-7)
    assert sol.objective == pytest.approx(0.25, abs=1e-7)


def test_contradictory_box_is_infeasible():
    model = _box_qp([1.0], [0.0], [1.0], [0.5])
    sol = solve_convex(model)
    assert sol.status == "Infeasible"


def test_infeasible_balance_detected_by_probe():
    # gas demand exceeds total source capacity
    inst = make_instance(
        gas_nodes=[ogpf.GasNode("n1", 1, 30.0, 1.0, 100.0),
                   ogpf.GasNode("n2", 1, 20.0, 1.0, 100.0)],
        gas_sources=[ogpf.GasSource("s1", "n1", 0.0, 10.0, 0.005, 0.0)],
    )
    model, _ = build_model(inst, PwaConfig(r=2))
    sol = solve_convex(relax(model))
    assert sol.status == "Infeasible"


def test_relaxed_small2area_solves_tight(instances, small2area_model):
    model, index = small2area_model
    sol = solve_convex(relax(model), SolveOptions(feas_tol=1e-10, opt_tol=1e-10))
    assert sol.status == "Optimal"
    assert sol.residuals.max_eq <= 1e-8
    assert sol.residuals.max_ineq <= 1e-8
    # lower bound against a known feasible mixed-integer point
    witness = small_witness_point(model, index)
    assert sol.objective <= model.objective(witness) + 1e-8


def test_solver_is_deterministic(small2area_model):
    model, _ = small2area_model
    s1 = solve_convex(relax(model))
    s2 = solve_convex(relax(model))
    assert np.array_equal(s1.x, s2.x)
    assert s1.objective == s2.objective
    assert s1.iterations == s2.iterations


def test_kkt_stationarity_via_finite_differences(small2area_model):
    """At the reported optimum the objective gradient (finite differences)
    plus the weighted constraint normals cancels out."""
    model, _ = small2area_model
    relaxed = relax(model)
    sol = solve_convex(relaxed, SolveOptions(feas_tol=1e-10, opt_tol=1e-10))
    x = sol.x
    n = model.num_vars
    h = 1e-6
    grad_f = np.zeros(n)
    for j in range(n):
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        grad_f[j] = (relaxed.objective(xp) - relaxed.objective(xm)) / (2 * h)
    duals = sol.duals
    res = (grad_f + relaxed.a_eq.T @ duals["eq"]
           + relaxed.g_in.T @ duals["ineq"]
           + duals["ub"] - duals["lb"])
    for row, mu in zip(relaxed.quad_ineq, duals["quad"]):
        res += mu * row.grad(x, n)
    free = ~(np.isfinite(relaxed.lb) & (relaxed.lb == relaxed.ub))
    assert np.abs(res[free]).max() <= 1e-5


def test_engine_adapter_seam(small2area_model):
    model, _ = small2area_model
    calls = []

    def engine(m, opts):
        calls.append(m.num_vars)
        return solve_ipm(m, opts.feas_tol, opts.opt_tol, opts.max_iter)

    sol = solve_convex(relax(model), SolveOptions(engine=engine))
    assert sol.status == "Optimal"
    assert calls == [model.num_vars]


def test_rejects_integral_model(small2area_model):
    model, _ = small2area_model
    with pytest.raises(AssertionError):
        solve_convex(model)


def test_iteration_cap_returns_best_iterate(small2area_model):
    model, _ = small2area_model
    sol = solve_convex(relax(model), SolveOptions(feas_tol=1e-12,
                                                  opt_tol=1e-14, max_iter=4))
    assert sol.status == "MaxIter"
    assert np.isfinite(sol.objective)
    assert np.isfinite(sol.residuals.max_eq)


# ---------------------------------------------------------------------------
# consensus mode
# ---------------------------------------------------------------------------

def test_consensus_single_area_reduces_to_centralized(instances):
    inst = instances["single1area"]
    model, index = build_model(inst, PwaConfig(r=2))
    relaxed = relax(model)
    views = area_views(relaxed, inst, index)
    dis = solve_consensus(relaxed, views)
    cen = solve_convex(relaxed)
    assert dis.iterations == 1
    assert dis.objective == pytest.approx(cen.objective, abs=1e-9)


def test_consensus_two_area_toy_averages_minimizers():
    # (x - 1)^2 + (y - 3)^2 with the coupling x = y: optimum at 2
    model = StandardModel(
        2, np.array([1.0, 1.0]), np.array([-2.0, -6.0]), 10.0,
        sp.csr_matrix(np.array([[1.0, -1.0]])), np.zeros(1),
        sp.csr_matrix((0, 2)), np.zeros(0), [],
        np.array([-10.0, -10.0]), np.array([10.0, 10.0]),
        np.zeros(2, dtype=bool), ["consensus"], [])
    views = [
        AreaView(1, np.array([0]), np.array([0]), np.zeros(0, int),
                 np.zeros(0, int), np.array([0]), np.array([1])),
        AreaView(2, np.array([1]), np.zeros(0, int), np.zeros(0, int),
                 np.zeros(0, int), np.zeros(0, int), np.zeros(0, int)),
    ]
    sol = solve_consensus(model, views, ConsensusOptions(max_outer=300))
    assert abs(sol.x[0] - 2.0) <= 1e-3
    assert abs(sol.x[1] - 2.0) <= 1e-3
    assert sol.objective == pytest.approx(2.0, abs=1e-3)


def test_consensus_matches_centralized_on_small2area(instances):
    inst = instances["small2area"]
    model, index = build_model(inst, PwaConfig(r=2))
    relaxed = relax(model)
    views = area_views(relaxed, inst, index)
    dis = solve_consensus(relaxed, views)
    cen = solve_convex(relaxed)
    rel = abs(dis.objective - cen.objective) / max(1.0, abs(cen.objective))
    assert rel <= 1e-4
    assert dis.iterations <= 500


def test_consensus_nonconvergence_raises_with_advice(instances):
    from ogpf.errors import NonConvergence

    inst = instances["chain2area"]
    model, index = build_model(inst, PwaConfig(r=2))
    relaxed = relax(model)
    views = area_views(relaxed, inst, index)
    with pytest.raises(NonConvergence, match="rho"):
        solve_consensus(relaxed, views, ConsensusOptions(max_outer=2))


def test_consensus_records_residual_history(instances):
    inst = instances["small2area"]
    model, index = build_model(inst, PwaConfig(r=2))
    relaxed = relax(model)
    views = area_views(relaxed, inst, index)
    opts = ConsensusOptions()
    dis = solve_consensus(relaxed, views, opts)
    assert dis.status == "Optimal"
    assert len(dis.history) == dis.iterations
    final_primal, _ = dis.history[-1]
    assert final_primal <= opts.primal_tol
