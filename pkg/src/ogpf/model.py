"""Coupled power/gas network data model.

Case files are JSON documents with top-level keys ``power``, ``gas``,
``coupling``, ``horizon`` and ``bases`` (see docs/case_format.md).  All
numeric fields are in the file's stated units (MW, bar, kSm3/h, $) and are
normalized to per-unit on load; line impedances and voltage bounds are
already per-unit in the file, as is customary for distribution feeders.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

TAN_PF95 = math.tan(math.acos(0.95))  # default reactive load derivation


class CaseError(Exception):
    """Malformed, incomplete or inconsistent case file."""


# ---------------------------------------------------------------------------
# physical coefficients


def weymouth_coefficient(length, diameter, friction, gas_constant,
                         temperature, compressibility, density,
                         unit_constant=1.0):
    """Pipeline flow/pressure coefficient phi = pi^2 lam^2 R^5 / (16 X F mu Tk Z rho0^2)."""
    vals = (length, diameter, friction, gas_constant, temperature,
            compressibility, density, unit_constant)
    if any(v <= 0 for v in vals):
        raise ValueError("all pipeline parameters must be strictly positive")
    num = math.pi**2 * unit_constant**2 * diameter**5
    den = 16.0 * length * friction * gas_constant * temperature \
        * compressibility * density**2
    return num / den


def linepack_coefficient(length, diameter, gas_constant, temperature,
                         compressibility, density):
    """Linepack per unit average pressure: K = (pi/4) X R^2 / (mu Tk Z rho0)."""
    vals = (length, diameter, gas_constant, temperature, compressibility, density)
    if any(v <= 0 for v in vals):
        raise ValueError("all pipeline parameters must be strictly positive")
    return math.pi / 4.0 * length * diameter**2 / (
        gas_constant * temperature * compressibility * density)


# ---------------------------------------------------------------------------
# domain types (all numeric fields per-unit unless suffixed otherwise)


@dataclass(frozen=True)
class Bus:
    id: str
    g_shunt: float = 0.0
    b_shunt: float = 0.0
    v_min: float = 0.9
    v_max: float = 1.1


@dataclass(frozen=True)
class Line:
    id: str
    from_bus: str
    to_bus: str
    r: float
    x: float
    i_max: float  # current magnitude cap, per-unit


@dataclass(frozen=True)
class NonGasDG:
    id: str
    bus: str
    p_min: float
    p_max: float
    q_min: float
    q_max: float
    cost_a: float  # $ / pu^2 h
    cost_b: float  # $ / pu h
    cost_c: float = 0.0


@dataclass(frozen=True)
class GasFiredDG:
    id: str
    bus: str
    p_min: float
    p_max: float
    q_min: float
    q_max: float
    beta: float  # pu power per pu gas


@dataclass(frozen=True)
class PowerLoad:
    id: str
    bus: str
    profile: str
    reactive_profile: str | None = None


@dataclass(frozen=True)
class PowerNetwork:
    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    nongas_dgs: tuple[NonGasDG, ...]
    gas_dgs: tuple[GasFiredDG, ...]
    loads: tuple[PowerLoad, ...]
    reference_bus: str

    def bus_ids(self):
        return [b.id for b in self.buses]


@dataclass(frozen=True)
class GasNode:
    id: str
    p_min: float
    p_max: float


@dataclass(frozen=True)
class Pipeline:
    id: str
    from_node: str
    to_node: str
    length: float  # raw file units below
    diameter: float
    friction: float
    gas_constant: float
    temperature: float
    compressibility: float
    density: float
    unit_constant: float
    phi: float  # per-unit Weymouth coefficient
    k_pack: float  # per-unit linepack coefficient
    m0: float  # initial linepack, per-unit


@dataclass(frozen=True)
class Compressor:
    id: str
    from_node: str
    to_node: str
    gamma: float
    y_max: float
    alpha: float
    drive: str  # "electric" | "gas"
    chi: float = 0.0  # electric demand per pu gas (electric drive)


@dataclass(frozen=True)
class Retailer:
    id: str
    node: str
    y_min: float
    y_max: float
    price_profile: str


@dataclass(frozen=True)
class GasLoad:
    id: str
    node: str
    profile: str


@dataclass(frozen=True)
class GasNetwork:
    nodes: tuple[GasNode, ...]
    pipelines: tuple[Pipeline, ...]
    compressors: tuple[Compressor, ...]
    retailers: tuple[Retailer, ...]
    loads: tuple[GasLoad, ...]
    # Flow bookkeeping of a gas-driven compressor: "inflow-deficit" models
    # inflow = (1 - alpha) * outflow; "outflow-deficit" the reverse.
    loss_convention: str = "inflow-deficit"

    def edges(self):
        return list(self.pipelines) + list(self.compressors)


@dataclass(frozen=True)
class CouplingMap:
    gas_dg_nodes: dict  # gas DG id -> gas node id
    compressor_buses: dict  # electric compressor id -> power bus id


@dataclass(frozen=True)
class Horizon:
    periods: int
    period_hours: float
    terminal_linepack: str  # "free" | "equal-to-initial"
    profiles: dict  # name -> tuple of per-unit (or $) values, length = periods


@dataclass(frozen=True)
class Bases:
    power_mva: float
    pressure_bar: float
    gas_ksm3h: float


@dataclass(frozen=True)
class CoupledCase:
    name: str
    power: PowerNetwork
    gas: GasNetwork
    coupling: CouplingMap
    horizon: Horizon
    bases: Bases

    def profile(self, name):
        try:
            return self.horizon.profiles[name]
        except KeyError:
            raise CaseError(f"unknown profile {name!r}") from None

    def power_load_at(self, bus_id, t):
        """(active, reactive) per-unit demand at a bus in period t."""
        p = q = 0.0
        for ld in self.power.loads:
            if ld.bus == bus_id:
                pv = self.profile(ld.profile)[t]
                p += pv
                if ld.reactive_profile:
                    q += self.profile(ld.reactive_profile)[t]
                else:
                    q += pv * TAN_PF95
        return p, q

    def gas_load_at(self, node_id, t):
        return sum(self.profile(ld.profile)[t]
                   for ld in self.gas.loads if ld.node == node_id)

    def gas_price(self, retailer, t):
        return self.profile(retailer.price_profile)[t]


# ---------------------------------------------------------------------------
# loading


def _req(d, key, ctx):
    try:
        return d[key]
    except KeyError:
        raise CaseError(f"missing required field {key!r} in {ctx}") from None


def case_from_dict(doc, name="case"):
    try:
        bd = _req(doc, "bases", "case")
        bases = Bases(float(_req(bd, "power_mva", "bases")),
                      float(_req(bd, "pressure_bar", "bases")),
                      float(_req(bd, "gas_ksm3h", "bases")))
        sb, pb, gb = bases.power_mva, bases.pressure_bar, bases.gas_ksm3h

        pw = _req(doc, "power", "case")
        buses = tuple(Bus(str(_req(b, "id", "bus")),
                          float(b.get("g_shunt", 0.0)),
                          float(b.get("b_shunt", 0.0)),
                          float(b.get("v_min", 0.9)),
                          float(b.get("v_max", 1.1)))
                      for b in _req(pw, "buses", "power"))
        lines = tuple(Line(str(_req(l, "id", "line")),
                           str(_req(l, "from", "line")),
                           str(_req(l, "to", "line")),
                           float(_req(l, "r", "line")),
                           float(_req(l, "x", "line")),
                           float(_req(l, "i_max", "line")))
                      for l in _req(pw, "lines", "power"))
        nongas = tuple(NonGasDG(str(_req(g, "id", "nongas_dg")),
                                str(_req(g, "bus", "nongas_dg")),
                                float(_req(g, "p_min", "nongas_dg")) / sb,
                                float(_req(g, "p_max", "nongas_dg")) / sb,
                                float(_req(g, "q_min", "nongas_dg")) / sb,
                                float(_req(g, "q_max", "nongas_dg")) / sb,
                                float(g.get("cost_a", 0.0)) * sb * sb,
                                float(_req(g, "cost_b", "nongas_dg")) * sb,
                                float(g.get("cost_c", 0.0)))
                       for g in pw.get("nongas_dgs", []))
        gasdg = tuple(GasFiredDG(str(_req(g, "id", "gas_dg")),
                                 str(_req(g, "bus", "gas_dg")),
                                 float(_req(g, "p_min", "gas_dg")) / sb,
                                 float(_req(g, "p_max", "gas_dg")) / sb,
                                 float(_req(g, "q_min", "gas_dg")) / sb,
                                 float(_req(g, "q_max", "gas_dg")) / sb,
                                 float(_req(g, "beta", "gas_dg")) * gb / sb)
                      for g in pw.get("gas_dgs", []))
        ploads = tuple(PowerLoad(str(_req(l, "id", "power load")),
                                 str(_req(l, "bus", "power load")),
                                 str(_req(l, "profile", "power load")),
                                 l.get("reactive_profile"))
                       for l in pw.get("loads", []))
        power = PowerNetwork(buses, lines, nongas, gasdg, ploads,
                             str(_req(pw, "reference_bus", "power")))

        gd = _req(doc, "gas", "case")
        nodes = tuple(GasNode(str(_req(n, "id", "gas node")),
                              float(_req(n, "p_min", "gas node")) / pb,
                              float(_req(n, "p_max", "gas node")) / pb)
                      for n in _req(gd, "nodes", "gas"))
        node_by_id = {n.id: n for n in nodes}
        pipes = []
        for p in gd.get("pipelines", []):
            ln = float(_req(p, "length", "pipeline"))
            dm = float(_req(p, "diameter", "pipeline"))
            fr = float(_req(p, "friction", "pipeline"))
            mu = float(_req(p, "gas_constant", "pipeline"))
            tk = float(_req(p, "temperature", "pipeline"))
            z = float(_req(p, "compressibility", "pipeline"))
            rho = float(_req(p, "density", "pipeline"))
            lam = float(p.get("unit_constant", 1.0))
            phi = weymouth_coefficient(ln, dm, fr, mu, tk, z, rho, lam) \
                * pb * pb / (gb * gb)
            kp = linepack_coefficient(ln, dm, mu, tk, z, rho) * pb / gb
            m0 = p.get("initial_linepack")
            if m0 is None:
                head = node_by_id.get(str(_req(p, "from", "pipeline")))
                tail = node_by_id.get(str(_req(p, "to", "pipeline")))
                if head is None or tail is None:
                    raise CaseError(
                        f"pipeline {p.get('id')} references an unknown gas node")
                mid = ((head.p_min + head.p_max) / 2
                       + (tail.p_min + tail.p_max) / 2) / 2
                m0 = kp * mid
            else:
                m0 = float(m0) / gb
            pipes.append(Pipeline(str(_req(p, "id", "pipeline")),
                                  str(p["from"]), str(p["to"]),
                                  ln, dm, fr, mu, tk, z, rho, lam,
                                  phi, kp, m0))
        comps = tuple(Compressor(str(_req(c, "id", "compressor")),
                                 str(_req(c, "from", "compressor")),
                                 str(_req(c, "to", "compressor")),
                                 float(_req(c, "gamma", "compressor")),
                                 float(_req(c, "y_max", "compressor")) / gb,
                                 float(c.get("alpha", 0.04)),
                                 str(_req(c, "drive", "compressor")),
                                 float(c.get("chi", 0.0)) * gb / sb)
                      for c in gd.get("compressors", []))
        retailers = tuple(Retailer(str(_req(w, "id", "retailer")),
                                   str(_req(w, "node", "retailer")),
                                   float(_req(w, "y_min", "retailer")) / gb,
                                   float(_req(w, "y_max", "retailer")) / gb,
                                   str(_req(w, "price_profile", "retailer")))
                          for w in gd.get("retailers", []))
        gloads = tuple(GasLoad(str(_req(l, "id", "gas load")),
                               str(_req(l, "node", "gas load")),
                               str(_req(l, "profile", "gas load")))
                       for l in gd.get("loads", []))
        gas = GasNetwork(nodes, tuple(pipes), comps, retailers, gloads,
                         str(gd.get("compressor_loss_convention",
                                    "inflow-deficit")))

        cp = doc.get("coupling", {})
        coupling = CouplingMap(
            {str(k): str(v) for k, v in cp.get("gas_dg_nodes", {}).items()},
            {str(k): str(v) for k, v in cp.get("compressor_buses", {}).items()})

        hz = _req(doc, "horizon", "case")
        periods = int(_req(hz, "periods", "horizon"))
        prof_raw = _req(hz, "profiles", "horizon")
        profiles = {}
        for pname, vals in prof_raw.items():
            vals = [float(v) for v in vals]
            if len(vals) != periods:
                raise CaseError(
                    f"profile {pname!r} has {len(vals)} entries, expected {periods}")
            profiles[pname] = tuple(vals)
        # demand profiles normalized by the base of their consumer
        scale = {}
        for ld in ploads:
            scale[ld.profile] = 1.0 / sb
            if ld.reactive_profile:
                scale[ld.reactive_profile] = 1.0 / sb
        for ld in gloads:
            scale[ld.profile] = 1.0 / gb
        for w in retailers:
            scale[w.price_profile] = gb  # $/flow-unit -> $/pu
        for pname, k in scale.items():
            if pname not in profiles:
                raise CaseError(f"profile {pname!r} is referenced but not defined")
            profiles[pname] = tuple(v * k for v in profiles[pname])
        horizon = Horizon(periods, float(hz.get("period_hours", 1.0)),
                          str(hz.get("terminal_linepack", "free")), profiles)
    except CaseError:
        raise
    except (TypeError, ValueError, AttributeError) as exc:
        raise CaseError(f"malformed case document: {exc}") from exc

    case = CoupledCase(name, power, gas, coupling, horizon, bases)
    errors = [m for lvl, m in validate_topology(case) if lvl == "error"]
    if errors:
        raise CaseError("invalid case: " + "; ".join(errors))
    return case


def load_case(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise CaseError(f"cannot read case file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CaseError(f"case file {path} is not valid JSON: {exc}") from exc
    import os
    return case_from_dict(doc, name=os.path.splitext(os.path.basename(path))[0])


def case_to_dict(case):
    """Inverse of case_from_dict (values back in file units)."""
    sb, pb, gb = case.bases.power_mva, case.bases.pressure_bar, case.bases.gas_ksm3h
    prof_out = {}
    scale = {}
    for ld in case.power.loads:
        scale[ld.profile] = sb
        if ld.reactive_profile:
            scale[ld.reactive_profile] = sb
    for ld in case.gas.loads:
        scale[ld.profile] = gb
    for w in case.gas.retailers:
        scale[w.price_profile] = 1.0 / gb
    for pname, vals in case.horizon.profiles.items():
        k = scale.get(pname, 1.0)
        prof_out[pname] = [v * k for v in vals]
    return {
        "bases": {"power_mva": sb, "pressure_bar": pb, "gas_ksm3h": gb},
        "power": {
            "reference_bus": case.power.reference_bus,
            "buses": [{"id": b.id, "g_shunt": b.g_shunt, "b_shunt": b.b_shunt,
                       "v_min": b.v_min, "v_max": b.v_max}
                      for b in case.power.buses],
            "lines": [{"id": l.id, "from": l.from_bus, "to": l.to_bus,
                       "r": l.r, "x": l.x, "i_max": l.i_max}
                      for l in case.power.lines],
            "nongas_dgs": [{"id": g.id, "bus": g.bus,
                            "p_min": g.p_min * sb, "p_max": g.p_max * sb,
                            "q_min": g.q_min * sb, "q_max": g.q_max * sb,
                            "cost_a": g.cost_a / (sb * sb),
                            "cost_b": g.cost_b / sb, "cost_c": g.cost_c}
                           for g in case.power.nongas_dgs],
            "gas_dgs": [{"id": g.id, "bus": g.bus,
                         "p_min": g.p_min * sb, "p_max": g.p_max * sb,
                         "q_min": g.q_min * sb, "q_max": g.q_max * sb,
                         "beta": g.beta * sb / gb}
                        for g in case.power.gas_dgs],
            "loads": [{"id": l.id, "bus": l.bus, "profile": l.profile,
                       **({"reactive_profile": l.reactive_profile}
                          if l.reactive_profile else {})}
                      for l in case.power.loads],
        },
        "gas": {
            "compressor_loss_convention": case.gas.loss_convention,
            "nodes": [{"id": n.id, "p_min": n.p_min * pb, "p_max": n.p_max * pb}
                      for n in case.gas.nodes],
            "pipelines": [{"id": p.id, "from": p.from_node, "to": p.to_node,
                           "length": p.length, "diameter": p.diameter,
                           "friction": p.friction, "gas_constant": p.gas_constant,
                           "temperature": p.temperature,
                           "compressibility": p.compressibility,
                           "density": p.density, "unit_constant": p.unit_constant,
                           "initial_linepack": p.m0 * gb}
                          for p in case.gas.pipelines],
            "compressors": [{"id": c.id, "from": c.from_node, "to": c.to_node,
                             "gamma": c.gamma, "y_max": c.y_max * gb,
                             "alpha": c.alpha, "drive": c.drive,
                             "chi": c.chi * sb / gb}
                            for c in case.gas.compressors],
            "retailers": [{"id": w.id, "node": w.node, "y_min": w.y_min * gb,
                           "y_max": w.y_max * gb,
                           "price_profile": w.price_profile}
                          for w in case.gas.retailers],
            "loads": [{"id": l.id, "node": l.node, "profile": l.profile}
                      for l in case.gas.loads],
        },
        "coupling": {"gas_dg_nodes": dict(case.coupling.gas_dg_nodes),
                     "compressor_buses": dict(case.coupling.compressor_buses)},
        "horizon": {"periods": case.horizon.periods,
                    "period_hours": case.horizon.period_hours,
                    "terminal_linepack": case.horizon.terminal_linepack,
                    "profiles": prof_out},
    }


def save_case(case, path):
    with open(path, "w") as fh:
        json.dump(case_to_dict(case), fh, indent=1)


def truncate_horizon(case, periods):
    """Returns a copy of the case restricted to the first `periods` periods."""
    if not 1 <= periods <= case.horizon.periods:
        raise CaseError(f"cannot truncate horizon to {periods} periods")
    profiles = {k: v[:periods] for k, v in case.horizon.profiles.items()}
    hz = replace(case.horizon, periods=periods, profiles=profiles)
    return replace(case, horizon=hz)


# ---------------------------------------------------------------------------
# validation


def _tree_check(report, node_ids, edges, label):
    """edges: list of (edge_id, from, to). Appends report entries."""
    known = set(node_ids)
    adj = {n: [] for n in node_ids}
    ok = True
    for eid, fr, to in edges:
        if fr not in known or to not in known:
            report.append(("error", f"{label} edge {eid} references unknown node"))
            ok = False
            continue
        adj[fr].append(to)
        adj[to].append(fr)
    if not ok:
        return False
    if len(edges) != len(node_ids) - 1:
        report.append(("error",
                       f"{label}: {len(edges)} edges for {len(node_ids)} nodes "
                       "(tree requires node count - 1); cycle or disconnection"))
        return False
    # connectivity; with |E| = |V|-1 this also excludes cycles
    seen = set()
    stack = [next(iter(node_ids))] if node_ids else []
    while stack:
        n = stack.pop()
        if n in seen:
            continue
        seen.add(n)
        stack.extend(adj[n])
    if len(seen) != len(node_ids):
        report.append(("error", f"{label} is disconnected"))
        return False
    return True


def validate_topology(case):
    """Returns a list of (level, message); level in {"error", "warning"}."""
    report = []
    pw, gas = case.power, case.gas
    bus_ids = set(pw.bus_ids())
    if pw.reference_bus not in bus_ids:
        report.append(("error", f"reference bus {pw.reference_bus} does not exist"))
    if _tree_check(report, bus_ids,
                   [(l.id, l.from_bus, l.to_bus) for l in pw.lines], "PDN") \
            and pw.reference_bus in bus_ids:
        # orientation: every line must point away from the reference bus
        children = {}
        for l in pw.lines:
            children.setdefault(l.from_bus, []).append(l)
        seen, stack = {pw.reference_bus}, [pw.reference_bus]
        while stack:
            for l in children.get(stack.pop(), []):
                if l.to_bus not in seen:
                    seen.add(l.to_bus)
                    stack.append(l.to_bus)
        for b in bus_ids - seen:
            report.append(("error",
                           f"bus {b} is not reachable from the reference bus "
                           "along line orientations"))

    node_ids = {n.id for n in gas.nodes}
    gedges = [(e.id, e.from_node, e.to_node) for e in gas.edges()]
    if _tree_check(report, node_ids, gedges, "GDN"):
        roots = {w.node for w in gas.retailers}
        bad = roots - node_ids
        for r in bad:
            report.append(("error", f"retailer node {r} does not exist"))
        if roots and not bad:
            children = {}
            for eid, fr, to in gedges:
                children.setdefault(fr, []).append(to)
            seen, stack = set(roots), list(roots)
            while stack:
                for to in children.get(stack.pop(), []):
                    if to not in seen:
                        seen.add(to)
                        stack.append(to)
            for n in node_ids - seen:
                report.append(("error",
                               f"gas node {n} is not reachable from any retailer "
                               "along the fixed flow direction"))

    for b in pw.buses:
        if b.v_min >= b.v_max:
            report.append(("error", f"bus {b.id}: bound ordering v_min >= v_max"))
    for g in list(pw.nongas_dgs) + list(pw.gas_dgs):
        if g.p_min > g.p_max or g.q_min > g.q_max:
            report.append(("error", f"DG {g.id}: bound ordering P/Q min > max"))
        if g.bus not in bus_ids:
            report.append(("error", f"DG {g.id} references unknown bus {g.bus}"))
    for g in pw.nongas_dgs:
        if g.cost_a < 0:
            report.append(("error", f"DG {g.id}: negative quadratic cost"))
    for ld in pw.loads:
        if ld.bus not in bus_ids:
            report.append(("error", f"load {ld.id} references unknown bus {ld.bus}"))
    for n in gas.nodes:
        if not 0 < n.p_min < n.p_max:
            report.append(("error",
                           f"gas node {n.id}: bound ordering requires 0 < p_min < p_max"))
    for c in gas.compressors:
        if c.gamma < 1.0:
            report.append(("error", f"compressor {c.id}: gamma < 1"))
        if not 0 <= c.alpha < 1:
            report.append(("error", f"compressor {c.id}: alpha outside [0, 1)"))
        if c.drive == "electric":
            bus = case.coupling.compressor_buses.get(c.id)
            if bus is None:
                report.append(("error",
                               f"electric compressor {c.id} has no served power bus"))
            elif bus not in bus_ids:
                report.append(("error",
                               f"compressor {c.id} references unknown bus {bus}"))
        elif c.drive == "gas":
            if c.id in case.coupling.compressor_buses:
                report.append(("error",
                               f"gas-driven compressor {c.id} must not map to a power bus"))
            if gas.loss_convention == "inflow-deficit" and c.alpha > 0:
                report.append(("warning",
                               f"gas-driven compressor {c.id}: inflow-deficit "
                               "bookkeeping makes outflow exceed inflow"))
        else:
            report.append(("error", f"compressor {c.id}: unknown drive {c.drive!r}"))
    for w in gas.retailers:
        if w.y_min > w.y_max:
            report.append(("error", f"retailer {w.id}: bound ordering y_min > y_max"))
        if w.node not in node_ids:
            report.append(("error", f"retailer {w.id} references unknown node {w.node}"))
    for ld in gas.loads:
        if ld.node not in node_ids:
            report.append(("error", f"gas load {ld.id} references unknown node {ld.node}"))

    dg_ids = {g.id for g in pw.gas_dgs}
    for dg, node in case.coupling.gas_dg_nodes.items():
        if dg not in dg_ids:
            report.append(("error", f"coupling references unknown gas-fired DG {dg}"))
        if node not in node_ids:
            report.append(("error", f"coupling references unknown gas node {node}"))
    for dg in dg_ids - set(case.coupling.gas_dg_nodes):
        report.append(("error", f"gas-fired DG {dg} has no fuel node in the coupling map"))

    for pname, vals in case.horizon.profiles.items():
        if pname not in {w.price_profile for w in gas.retailers} \
                and any(v < 0 for v in vals):
            report.append(("error", f"profile {pname!r} has negative demand entries"))
    return report
