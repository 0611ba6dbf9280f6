"""End-to-end two-stage solve: convex relaxation, then recovery.

Stage 1 solves the relaxed model (centralized interior point or area
consensus). Stage 2 reads binaries off the stage-1 flows, recomputes
pressures through the infinity-norm problem, updates the product auxiliaries,
assembles the final point (stage-1 components untouched) and certifies it.

A positive pressure residual is reported as an Approximate certificate with
the flows kept as decided; no repair pass re-solves stage 1 under the
recovered binaries.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

from .convexsolve import (ConsensusOptions, INFEASIBLE, SolveOptions,
                          Solution, solve_consensus, solve_convex)
from .errors import OgpfError
from .mipbuild import PHI, StandardModel, VarIndex, area_views, build_model, fit_all_curves, relax
from .netmodel import NetworkInstance, classify_edges
from .pwa import PwaConfig
from .recovery import (RecoveryResult, assemble_and_certify,
                       build_pressure_lp, recover_binaries, solve_pressure_lp,
                       update_aux, weymouth_deviation)

CENTRALIZED = "centralized"
CONSENSUS = "consensus"

# sign-convention note echoed into reports: the flow-direction binary is tied
# to nonnegative oriented flow, the only orientation consistent with the
# linearized flow equality.
SIGN_CONVENTION = "delta_psi = 1 <=> oriented flow >= 0"


@dataclass
class TwoStageResult:
    solution: Solution
    recovery: RecoveryResult
    model: StandardModel
    index: VarIndex
    stage1_time_s: float
    stage2_time_s: float

    @property
    def objective(self) -> float:
        return self.solution.objective

    @property
    def j_psi(self) -> float:
        return self.recovery.j_psi

    @property
    def certificate(self):
        return self.recovery.certificate


def solve_two_stage(inst: NetworkInstance, r: int, *, epsilon: float = 1e-6,
                    cert_tol: float = 1e-8, mode: str = CENTRALIZED,
                    solve_opts: SolveOptions | None = None,
                    consensus_opts: ConsensusOptions | None = None,
                    feas_tol: float = 1e-6,
                    press_tol: float = 1e-9) -> TwoStageResult:
    """Run both stages on an instance and return the assembled outcome.

    Raises OgpfError subclasses on configuration or infeasibility problems;
    an Approximate certificate is a normal return, not an error.
    """
    cfg = PwaConfig(r=r, epsilon=epsilon)
    model, index = build_model(inst, cfg)
    relaxed = relax(model)
    curves = fit_all_curves(inst, cfg)

    t0 = time.perf_counter()
    if mode == CONSENSUS:
        views = area_views(model, inst, index)
        sol = solve_consensus(relaxed, views, consensus_opts)
    elif mode == CENTRALIZED:
        sol = solve_convex(relaxed, solve_opts
                           or SolveOptions(feas_tol=1e-10, opt_tol=1e-10))
    else:
        raise OgpfError(f"unknown solve mode {mode!r}")
    t1 = time.perf_counter()
    if sol.status == INFEASIBLE:
        raise OgpfError("stage 1: relaxed problem is infeasible")

    edges = classify_edges(inst)
    # stage-2 quantities use reciprocity-symmetrized flows so that solver
    # noise between the two orientations (relevant for consensus mode) does
    # not leak into the pressure targets; exact solves are unaffected
    phi_star = {}
    for k in range(0, len(edges.internal_pipes_directed), 2):
        dp = edges.internal_pipes_directed[k]
        mirror = edges.internal_pipes_directed[k + 1]
        phi = 0.5 * (float(sol.x[index.col(PHI, dp.key)])
                     - float(sol.x[index.col(PHI, mirror.key)]))
        phi_star[dp.key] = phi
        phi_star[mirror.key] = -phi
    c_f = {dp.key: dp.weymouth_c for dp in edges.internal_pipes_directed}
    psi_bounds = {nd.id: (nd.psi_min, nd.psi_max) for nd in inst.gas_nodes}

    # certification re-checks the point against every row; that can only be
    # as tight as stage 1 actually solved (consensus mode stops at its own
    # residual tolerance)
    stage1_res = max(sol.residuals.max_eq, sol.residuals.max_ineq)
    check_tol = max(feas_tol, 2.0 * stage1_res)

    assignment = recover_binaries(phi_star, curves, feas_tol=feas_tol)
    lp = build_pressure_lp(assignment, phi_star, curves, psi_bounds)
    psi_tilde, _ = solve_pressure_lp(lp)
    aux = update_aux(assignment, psi_tilde, phi_star)
    recovery = assemble_and_certify(sol.x, assignment, psi_tilde, aux,
                                    cert_tol, model=model, index=index,
                                    feas_tol=check_tol)
    recovery.deviations = weymouth_deviation(phi_star, psi_tilde, c_f,
                                             press_tol=press_tol)
    t2 = time.perf_counter()

    return TwoStageResult(solution=sol, recovery=recovery, model=model,
                          index=index, stage1_time_s=t1 - t0,
                          stage2_time_s=t2 - t1)
