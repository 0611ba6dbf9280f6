import json

import pytest

import ogpf
from ogpf.convexsolve import SolveOptions, solve_convex
from ogpf.errors import AllInfeasible, CapExceeded
from ogpf.mipbuild import build_model, fit_all_curves, relax
from ogpf.oracle import enumerate_solve
from ogpf.pwa import PwaConfig

from conftest import make_instance


def _build(inst, r):
    cfg = PwaConfig(r=r)
    model, index = build_model(inst, cfg)
    return model, index, fit_all_curves(inst, cfg)


def test_single_pipe_enumerates_two_configs():
    inst = make_instance()
    model, index, curves = _build(inst, 2)
    res = enumerate_solve(model, index, curves)
    assert res.num_configurations == 2
    assert len(res.log) == 2


def test_small2area_eight_configs_and_bound(small2area):
    model, index, curves = _build(small2area, 2)
    res = enumerate_solve(model, index, curves)
    assert res.num_configurations == 8
    relaxed_obj = solve_convex(relax(model),
                               SolveOptions(1e-10, 1e-10)).objective
    assert res.best_objective >= relaxed_obj - 1e-8


def test_all_infeasible_when_demand_exceeds_capacity():
    inst = make_instance(
        gas_nodes=[ogpf.GasNode("n1", 1, 30.0, 1.0, 100.0),
                   ogpf.GasNode("n2", 1, 25.0, 1.0, 100.0)],
        gas_sources=[ogpf.GasSource("s1", "n1", 0.0, 10.0, 0.005, 0.0)],
    )
    model, index, curves = _build(inst, 2)
    with pytest.raises(AllInfeasible):
        enumerate_solve(model, index, curves)


def test_cap_exceeded(small2area):
    model, index, curves = _build(small2area, 2)
    with pytest.raises(CapExceeded) as info:
        enumerate_solve(model, index, curves, cap=3)
    assert info.value.required == 8


def test_pipe_order_does_not_change_optimum(tmp_path, small2area):
    doc = json.load(open(ogpf.instance_path("small2area")))
    doc["pipelines"] = doc["pipelines"][::-1]
    path = tmp_path / "perm.json"
    path.write_text(json.dumps(doc))
    permuted = ogpf.load_instance(path)

    base = enumerate_solve(*_build(small2area, 2))
    perm = enumerate_solve(*_build(permuted, 2))
    assert perm.best_objective == pytest.approx(base.best_objective, abs=1e-9)


def test_best_configuration_matches_recovered_regions(small2area):
    """The enumeration winner picks the same regions the two-stage method
    recovers when the certificate is exact."""
    from ogpf.twostage import solve_two_stage

    model, index, curves = _build(small2area, 2)
    res = enumerate_solve(model, index, curves)
    ts = solve_two_stage(small2area, 2)
    assert ts.certificate.is_optimal
    edges = ogpf.classify_edges(small2area)
    for k in range(0, len(edges.internal_pipes_directed), 2):
        key = edges.internal_pipes_directed[k].key
        phi = ts.solution.x[index.col("phi", key)]
        region = curves[key].segment_for(phi).m
        assert res.best_configuration[key] == region
