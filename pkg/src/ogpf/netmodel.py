"""Domain types for a multi-area integrated electrical-gas system.

Buses, lines, generators, gas nodes, pipelines and gas sources are stored as
frozen dataclasses; a :class:`NetworkInstance` validates the full system on
construction and is immutable afterwards, so it can be shared read-only across
concurrent solver runs.

Pressures are modeled directly in squared-pressure units, so the static pipe
flow relation reads ``phi = sgn(psi_i - psi_j) * c_f * sqrt(|psi_i - psi_j|)``
with no unit-conversion layer. Units of ``psi`` and ``c_f`` are treated as
consistent but otherwise arbitrary.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

from .errors import ParseError, ValidationError

GAS_FUELED = "gas_fueled"
NON_GAS_FUELED = "non_gas_fueled"


def _require_finite(value, what: str, owner: str) -> float:
    v = float(value)
    if not math.isfinite(v):
        raise ValidationError(f"{what} of {owner} must be finite, got {value!r}")
    return v


@dataclass(frozen=True)
class Bus:
    """Electrical bus: demand and voltage-angle box, assigned to one area."""

    id: str
    area: int
    demand_e: float
    theta_min: float
    theta_max: float

    def __post_init__(self):
        _require_finite(self.demand_e, "demand_e", self.id)
        if self.demand_e < 0:
            raise ValidationError(f"bus {self.id}: demand_e must be >= 0")
        if not self.theta_min < self.theta_max:
            raise ValidationError(f"bus {self.id}: theta_min must be < theta_max")


@dataclass(frozen=True)
class PowerLine:
    """Transmission line between two buses. Tie-line status is derived from
    the endpoint areas, never stored."""

    from_bus: str
    to_bus: str
    reactance: float

    def __post_init__(self):
        if self.from_bus == self.to_bus:
            raise ValidationError(f"line {self.from_bus}-{self.to_bus}: self loop")
        if not self.reactance > 0:
            raise ValidationError(
                f"line {self.from_bus}-{self.to_bus}: reactance must be > 0"
            )


@dataclass(frozen=True)
class Generator:
    """Dispatchable generator, either gas-fueled or non-gas-fueled.

    Non-gas units carry a convex quadratic production cost (cost_c2 > 0);
    gas units instead carry a convex quadratic power-to-gas conversion
    (eta2 > 0) and the gas node where that consumption is withdrawn.
    """

    id: str
    bus: str
    kind: str
    p_min: float
    p_max: float
    cost_c2: float | None = None
    cost_c1: float | None = None
    cost_c0: float | None = None
    eta2: float | None = None
    eta1: float | None = None
    eta0: float | None = None
    gas_node: str | None = None

    def __post_init__(self):
        if self.kind not in (GAS_FUELED, NON_GAS_FUELED):
            raise ValidationError(f"generator {self.id}: unknown kind {self.kind!r}")
        if not self.p_min < self.p_max:
            raise ValidationError(f"generator {self.id}: p_min must be < p_max")
        cost = (self.cost_c2, self.cost_c1, self.cost_c0)
        eta = (self.eta2, self.eta1, self.eta0)
        if self.kind == NON_GAS_FUELED:
            if any(v is None for v in cost) or any(v is not None for v in eta):
                raise ValidationError(
                    f"generator {self.id}: non_gas_fueled units carry cost "
                    "coefficients only"
                )
            if self.gas_node is not None:
                raise ValidationError(
                    f"generator {self.id}: non_gas_fueled units have no gas_node"
                )
            if not self.cost_c2 > 0:
                raise ValidationError(f"generator {self.id}: cost_c2 must be > 0")
        else:
            if any(v is None for v in eta) or any(v is not None for v in cost):
                raise ValidationError(
                    f"generator {self.id}: gas_fueled units carry eta "
                    "coefficients only"
                )
            if self.gas_node is None:
                raise ValidationError(
                    f"generator {self.id}: gas_fueled units need a gas_node"
                )
            if not self.eta2 > 0:
                raise ValidationError(f"generator {self.id}: eta2 must be > 0")

    @property
    def is_gas(self) -> bool:
        return self.kind == GAS_FUELED


@dataclass(frozen=True)
class GasNode:
    """Gas network node: demand and squared-pressure box, assigned to one area."""

    id: str
    area: int
    demand_g: float
    psi_min: float
    psi_max: float

    def __post_init__(self):
        _require_finite(self.demand_g, "demand_g", self.id)
        if self.demand_g < 0:
            raise ValidationError(f"gas node {self.id}: demand_g must be >= 0")
        if not self.psi_min < self.psi_max:
            raise ValidationError(f"gas node {self.id}: psi_min must be < psi_max")


@dataclass(frozen=True)
class Pipeline:
    """Pipeline between two gas nodes, stored undirected.

    Internal pipes (both endpoints in one area) follow the square-root
    pressure-drop law and must carry a Weymouth constant; tie pipes (endpoints
    in different areas) are actively controlled and must not. Both directed
    orientations are generated downstream.
    """

    from_node: str
    to_node: str
    flow_cap: float
    weymouth_c: float | None = None

    def __post_init__(self):
        if self.from_node == self.to_node:
            raise ValidationError(
                f"pipe {self.from_node}-{self.to_node}: self loop"
            )
        if not self.flow_cap > 0:
            raise ValidationError(
                f"pipe {self.from_node}-{self.to_node}: flow_cap must be > 0"
            )
        if self.weymouth_c is not None and not self.weymouth_c > 0:
            raise ValidationError(
                f"pipe {self.from_node}-{self.to_node}: weymouth_c must be > 0"
            )


@dataclass(frozen=True)
class GasSource:
    """Gas production unit (well) with linear cost."""

    id: str
    node: str
    g_min: float
    g_max: float
    cost_c1: float
    cost_c0: float

    def __post_init__(self):
        if not self.g_min < self.g_max:
            raise ValidationError(f"source {self.id}: g_min must be < g_max")
        if self.cost_c1 < 0 or self.cost_c0 < 0:
            raise ValidationError(f"source {self.id}: cost coefficients must be >= 0")


@dataclass(frozen=True)
class NetworkInstance:
    """Validated multi-area electrical-gas system.

    Attributes:
        num_areas: number of areas m; bus and gas-node areas are 1..m.
        buses, lines, generators, gas_nodes, pipelines, gas_sources: the
            physical system, in file order (orderings are load-bearing for
            deterministic model builds).

    On construction the full set of structural invariants is checked:
    connectivity of both networks, area partitions (every area has at least
    one bus and more than one gas node), and referential integrity of
    generators and sources. Instances are immutable after validation.
    """

    num_areas: int
    buses: tuple[Bus, ...]
    lines: tuple[PowerLine, ...]
    generators: tuple[Generator, ...]
    gas_nodes: tuple[GasNode, ...]
    pipelines: tuple[Pipeline, ...]
    gas_sources: tuple[GasSource, ...]

    def __post_init__(self):
        # normalize sequences to tuples so instances are genuinely immutable
        for name in ("buses", "lines", "generators", "gas_nodes", "pipelines",
                     "gas_sources"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        _validate_instance(self)

    def bus(self, bus_id: str) -> Bus:
        return self._bus_map[bus_id]

    def gas_node(self, node_id: str) -> GasNode:
        return self._node_map[node_id]

    @property
    def _bus_map(self) -> dict[str, Bus]:
        return {b.id: b for b in self.buses}

    @property
    def _node_map(self) -> dict[str, GasNode]:
        return {n.id: n for n in self.gas_nodes}


def _check_unique(ids, what: str):
    seen = set()
    for i in ids:
        if i in seen:
            raise ValidationError(f"duplicate {what} id {i!r}")
        seen.add(i)


def _connected(nodes: set[str], edges) -> bool:
    if not nodes:
        return False
    adj: dict[str, list[str]] = {n: [] for n in nodes}
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    stack = [next(iter(nodes))]
    seen = set()
    while stack:
        n = stack.pop()
        if n in seen:
            continue
        seen.add(n)
        stack.extend(adj[n])
    return seen == nodes


def _validate_instance(inst: NetworkInstance):
    if inst.num_areas < 1:
        raise ValidationError("num_areas must be >= 1")
    m = inst.num_areas

    _check_unique((b.id for b in inst.buses), "bus")
    _check_unique((n.id for n in inst.gas_nodes), "gas node")
    _check_unique((g.id for g in inst.generators), "generator")
    _check_unique((s.id for s in inst.gas_sources), "gas source")

    bus_ids = {b.id for b in inst.buses}
    node_ids = {n.id for n in inst.gas_nodes}

    for b in inst.buses:
        if not 1 <= b.area <= m:
            raise ValidationError(f"bus {b.id}: area {b.area} outside 1..{m}")
    for n in inst.gas_nodes:
        if not 1 <= n.area <= m:
            raise ValidationError(f"gas node {n.id}: area {n.area} outside 1..{m}")

    for ln in inst.lines:
        for end in (ln.from_bus, ln.to_bus):
            if end not in bus_ids:
                raise ValidationError(
                    f"line {ln.from_bus}-{ln.to_bus}: unknown bus {end!r}"
                )
    seen_pairs = set()
    for p in inst.pipelines:
        for end in (p.from_node, p.to_node):
            if end not in node_ids:
                raise ValidationError(
                    f"pipe {p.from_node}-{p.to_node}: unknown gas node {end!r}"
                )
        key = frozenset((p.from_node, p.to_node))
        if key in seen_pairs:
            raise ValidationError(
                f"pipe {p.from_node}-{p.to_node}: duplicate pipeline"
            )
        seen_pairs.add(key)

    node_map = {n.id: n for n in inst.gas_nodes}
    for p in inst.pipelines:
        internal = node_map[p.from_node].area == node_map[p.to_node].area
        if internal and p.weymouth_c is None:
            raise ValidationError(
                f"pipe {p.from_node}-{p.to_node}: internal pipe needs weymouth_c"
            )
        if not internal and p.weymouth_c is not None:
            raise ValidationError(
                f"pipe {p.from_node}-{p.to_node}: tie pipe must not carry weymouth_c"
            )

    for g in inst.generators:
        if g.bus not in bus_ids:
            raise ValidationError(f"generator {g.id}: unknown bus {g.bus!r}")
        if g.is_gas and g.gas_node not in node_ids:
            raise ValidationError(f"generator {g.id}: unknown gas node {g.gas_node!r}")
    for s in inst.gas_sources:
        if s.node not in node_ids:
            raise ValidationError(f"source {s.id}: unknown gas node {s.node!r}")

    bus_areas = {a: 0 for a in range(1, m + 1)}
    for b in inst.buses:
        bus_areas[b.area] += 1
    for a, count in bus_areas.items():
        if count == 0:
            raise ValidationError(f"area {a} has no buses")
    node_areas = {a: 0 for a in range(1, m + 1)}
    for n in inst.gas_nodes:
        node_areas[n.area] += 1
    for a, count in node_areas.items():
        if count <= 1:
            raise ValidationError(
                f"area {a}: area gas subgraph size must exceed 1 (has {count})"
            )

    if not _connected(bus_ids, ((l.from_bus, l.to_bus) for l in inst.lines)):
        raise ValidationError("electrical graph is not connected")
    if not _connected(node_ids, ((p.from_node, p.to_node) for p in inst.pipelines)):
        raise ValidationError("gas graph is not connected")


# ---------------------------------------------------------------------------
# file interface
# ---------------------------------------------------------------------------

_BUS_FIELDS = {"id", "area", "demand_e", "theta_min", "theta_max"}
_LINE_FIELDS = {"from", "to", "reactance"}
_GEN_REQUIRED = {"id", "bus", "kind", "p_min", "p_max"}
_GEN_COST = {"cost_c2", "cost_c1", "cost_c0"}
_GEN_ETA = {"eta2", "eta1", "eta0", "gas_node"}
_NODE_FIELDS = {"id", "area", "demand_g", "psi_min", "psi_max"}
_PIPE_REQUIRED = {"from", "to", "flow_cap"}
_SOURCE_FIELDS = {"id", "node", "g_min", "g_max", "cost_c1", "cost_c0"}
_TOP_KEYS = {"num_areas", "buses", "lines", "generators", "gas_nodes",
             "pipelines", "gas_sources"}


def _num(entry: dict, key: str, what: str) -> float:
    v = entry[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError(f"{what}: field {key!r} must be a number, got {v!r}")
    v = float(v)
    if not math.isfinite(v):
        raise ParseError(f"{what}: field {key!r} must be finite")
    return v


def _check_fields(entry: dict, allowed: set[str], required: set[str], what: str):
    got = set(entry)
    extra = got - allowed
    if extra:
        raise ParseError(f"{what}: unknown fields {sorted(extra)}")
    missing = required - got
    if missing:
        raise ParseError(f"{what}: missing fields {sorted(missing)}")


def load_instance(path) -> NetworkInstance:
    """Load and validate a network instance from a JSON file.

    Raises ParseError for malformed files and ValidationError (naming the
    violated invariant and the offending entity) for structurally invalid
    systems.
    """
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read instance file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"instance file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ParseError("instance file must contain a JSON object")
    _check_fields(raw, _TOP_KEYS, _TOP_KEYS, "instance")
    if isinstance(raw["num_areas"], bool) or not isinstance(raw["num_areas"], int):
        raise ParseError("num_areas must be an integer")

    buses = []
    for e in raw["buses"]:
        _check_fields(e, _BUS_FIELDS, _BUS_FIELDS, f"bus {e.get('id')}")
        buses.append(Bus(str(e["id"]), int(e["area"]),
                         _num(e, "demand_e", f"bus {e['id']}"),
                         _num(e, "theta_min", f"bus {e['id']}"),
                         _num(e, "theta_max", f"bus {e['id']}")))
    lines = []
    for e in raw["lines"]:
        _check_fields(e, _LINE_FIELDS, _LINE_FIELDS,
                      f"line {e.get('from')}-{e.get('to')}")
        lines.append(PowerLine(str(e["from"]), str(e["to"]),
                               _num(e, "reactance", "line")))
    gens = []
    for e in raw["generators"]:
        what = f"generator {e.get('id')}"
        _check_fields(e, _GEN_REQUIRED | _GEN_COST | _GEN_ETA, _GEN_REQUIRED, what)
        kw = dict(id=str(e["id"]), bus=str(e["bus"]), kind=str(e["kind"]),
                  p_min=_num(e, "p_min", what), p_max=_num(e, "p_max", what))
        for k in _GEN_COST | (_GEN_ETA - {"gas_node"}):
            if k in e:
                kw[k] = _num(e, k, what)
        if "gas_node" in e:
            kw["gas_node"] = str(e["gas_node"])
        gens.append(Generator(**kw))
    nodes = []
    for e in raw["gas_nodes"]:
        what = f"gas node {e.get('id')}"
        _check_fields(e, _NODE_FIELDS, _NODE_FIELDS, what)
        nodes.append(GasNode(str(e["id"]), int(e["area"]),
                             _num(e, "demand_g", what),
                             _num(e, "psi_min", what),
                             _num(e, "psi_max", what)))
    pipes = []
    for e in raw["pipelines"]:
        what = f"pipe {e.get('from')}-{e.get('to')}"
        _check_fields(e, _PIPE_REQUIRED | {"weymouth_c"}, _PIPE_REQUIRED, what)
        pipes.append(Pipeline(
            str(e["from"]), str(e["to"]), _num(e, "flow_cap", what),
            _num(e, "weymouth_c", what) if "weymouth_c" in e else None))
    sources = []
    for e in raw["gas_sources"]:
        what = f"source {e.get('id')}"
        _check_fields(e, _SOURCE_FIELDS, _SOURCE_FIELDS, what)
        sources.append(GasSource(str(e["id"]), str(e["node"]),
                                 _num(e, "g_min", what), _num(e, "g_max", what),
                                 _num(e, "cost_c1", what), _num(e, "cost_c0", what)))

    return NetworkInstance(raw["num_areas"], tuple(buses), tuple(lines),
                           tuple(gens), tuple(nodes), tuple(pipes),
                           tuple(sources))


def save_instance(inst: NetworkInstance, path):
    """Write an instance back to the JSON file format (round-trips exactly)."""
    doc = {
        "num_areas": inst.num_areas,
        "buses": [
            {"id": b.id, "area": b.area, "demand_e": b.demand_e,
             "theta_min": b.theta_min, "theta_max": b.theta_max}
            for b in inst.buses
        ],
        "lines": [
            {"from": l.from_bus, "to": l.to_bus, "reactance": l.reactance}
            for l in inst.lines
        ],
        "generators": [],
        "gas_nodes": [
            {"id": n.id, "area": n.area, "demand_g": n.demand_g,
             "psi_min": n.psi_min, "psi_max": n.psi_max}
            for n in inst.gas_nodes
        ],
        "pipelines": [],
        "gas_sources": [
            {"id": s.id, "node": s.node, "g_min": s.g_min, "g_max": s.g_max,
             "cost_c1": s.cost_c1, "cost_c0": s.cost_c0}
            for s in inst.gas_sources
        ],
    }
    for g in inst.generators:
        e = {"id": g.id, "bus": g.bus, "kind": g.kind,
             "p_min": g.p_min, "p_max": g.p_max}
        if g.is_gas:
            e.update(eta2=g.eta2, eta1=g.eta1, eta0=g.eta0, gas_node=g.gas_node)
        else:
            e.update(cost_c2=g.cost_c2, cost_c1=g.cost_c1, cost_c0=g.cost_c0)
        doc["generators"].append(e)
    for p in inst.pipelines:
        e = {"from": p.from_node, "to": p.to_node, "flow_cap": p.flow_cap}
        if p.weymouth_c is not None:
            e["weymouth_c"] = p.weymouth_c
        doc["pipelines"].append(e)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


# ---------------------------------------------------------------------------
# edge classification
# ---------------------------------------------------------------------------

class DirectedPipe(NamedTuple):
    """One orientation of an internal pipe."""

    from_node: str
    to_node: str
    weymouth_c: float
    flow_cap: float
    area: int

    @property
    def key(self) -> tuple[str, str]:
        return (self.from_node, self.to_node)

    @property
    def name(self) -> str:
        return f"{self.from_node}->{self.to_node}"


class EdgeClassification(NamedTuple):
    tie_lines: tuple[PowerLine, ...]
    tie_pipes: tuple[Pipeline, ...]
    internal_pipes_directed: tuple[DirectedPipe, ...]


def classify_edges(inst: NetworkInstance) -> EdgeClassification:
    """Split edges into tie and internal sets by endpoint areas.

    Internal pipes are expanded into both directed orientations; orientation
    pairs are adjacent in the result, with the stored orientation first.
    """
    bus_area = {b.id: b.area for b in inst.buses}
    node_area = {n.id: n.area for n in inst.gas_nodes}

    tie_lines = tuple(
        l for l in inst.lines if bus_area[l.from_bus] != bus_area[l.to_bus]
    )
    tie_pipes = []
    directed = []
    for p in inst.pipelines:
        if node_area[p.from_node] != node_area[p.to_node]:
            tie_pipes.append(p)
        else:
            area = node_area[p.from_node]
            directed.append(DirectedPipe(p.from_node, p.to_node,
                                         p.weymouth_c, p.flow_cap, area))
            directed.append(DirectedPipe(p.to_node, p.from_node,
                                         p.weymouth_c, p.flow_cap, area))
    return EdgeClassification(tie_lines, tuple(tie_pipes), tuple(directed))


def scale_demands(inst: NetworkInstance, bus_factors, node_factors) -> NetworkInstance:
    """Return a copy with electrical and gas demands scaled entry-wise.

    ``bus_factors`` / ``node_factors`` are sequences aligned with
    ``inst.buses`` / ``inst.gas_nodes``.
    """
    import dataclasses

    buses = tuple(
        dataclasses.replace(b, demand_e=b.demand_e * f)
        for b, f in zip(inst.buses, bus_factors, strict=True)
    )
    nodes = tuple(
        dataclasses.replace(n, demand_g=n.demand_g * f)
        for n, f in zip(inst.gas_nodes, node_factors, strict=True)
    )
    return NetworkInstance(inst.num_areas, buses, inst.lines, inst.generators,
                           nodes, inst.pipelines, inst.gas_sources)
