"""Coupling rows between the power and gas sides.

Each row is one relaxed balance equation: the active-power balance of a bus
serving electric compressors, or the gas balance of a node fueling
gas-fired DGs.  Rows read  a'x + b'z = rhs  with x power-side and z
gas-side variables, addressed by name.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .model import CaseError


# variable-name helpers shared by all program builders
def vp(dg, t):
    return f"p:{dg}:{t}"


def vq(dg, t):
    return f"q:{dg}:{t}"


def vpf(line, t):
    return f"pf:{line}:{t}"


def vqf(line, t):
    return f"qf:{line}:{t}"


def vnu(bus, t):
    return f"nu:{bus}:{t}"


def visq(line, t):
    return f"isq:{line}:{t}"


def vyw(w, t):
    return f"yw:{w}:{t}"


def vyin(edge, t):
    return f"yin:{edge}:{t}"


def vyout(edge, t):
    return f"yout:{edge}:{t}"


def vu(node, t):
    return f"u:{node}:{t}"


def vm(pipe, t):
    return f"m:{pipe}:{t}"


def vzeta(node, t):
    return f"zeta:{node}:{t}"


@dataclass(frozen=True)
class CouplingRow:
    label: tuple  # ("bus", bus_id, t) or ("gasnode", node_id, t)
    a: dict  # power variable name -> coefficient
    b: dict  # gas variable name -> coefficient
    rhs: float


@dataclass
class CouplingSystem:
    rows: list

    def labels(self):
        return [r.label for r in self.rows]

    def side_value(self, row, side, values):
        coeffs = row.a if side == "a" else row.b
        return sum(c * values[name] for name, c in coeffs.items())

    def residuals(self, power_values, gas_values):
        """a'x + b'z - rhs per row, as a dict label -> value."""
        return {
            r.label: self.side_value(r, "a", power_values)
            + self.side_value(r, "b", gas_values) - r.rhs
            for r in self.rows
        }


def power_balance_terms(case, bus_id, t):
    """Coefficients of the active-power balance expression at a bus."""
    terms = {}
    for g in list(case.power.nongas_dgs) + list(case.power.gas_dgs):
        if g.bus == bus_id:
            terms[vp(g.id, t)] = terms.get(vp(g.id, t), 0.0) + 1.0
    for l in case.power.lines:
        if l.to_bus == bus_id:
            terms[vpf(l.id, t)] = terms.get(vpf(l.id, t), 0.0) + 1.0
            terms[visq(l.id, t)] = terms.get(visq(l.id, t), 0.0) - l.r
        if l.from_bus == bus_id:
            terms[vpf(l.id, t)] = terms.get(vpf(l.id, t), 0.0) - 1.0
    bus = next(b for b in case.power.buses if b.id == bus_id)
    if bus.g_shunt:
        terms[vnu(bus_id, t)] = terms.get(vnu(bus_id, t), 0.0) - bus.g_shunt
    return terms


def gas_balance_terms(case, node_id, t):
    """Coefficients of the gas balance expression at a node (gas side only)."""
    terms = {}
    for w in case.gas.retailers:
        if w.node == node_id:
            terms[vyw(w.id, t)] = terms.get(vyw(w.id, t), 0.0) + 1.0
    for e in case.gas.edges():
        if e.to_node == node_id:
            terms[vyout(e.id, t)] = terms.get(vyout(e.id, t), 0.0) + 1.0
        if e.from_node == node_id:
            terms[vyin(e.id, t)] = terms.get(vyin(e.id, t), 0.0) - 1.0
    return terms


def coupled_buses(case):
    """Buses serving electric compressors, with the compressors they serve."""
    out = {}
    for c in case.gas.compressors:
        if c.drive == "electric":
            bus = case.coupling.compressor_buses[c.id]
            out.setdefault(bus, []).append(c)
    return out


def coupled_gas_nodes(case):
    """Gas nodes fueling gas-fired DGs, with the DGs they fuel."""
    out = {}
    for g in case.power.gas_dgs:
        node = case.coupling.gas_dg_nodes[g.id]
        out.setdefault(node, []).append(g)
    return out


def assemble_coupling(case):
    """Builds the coupling system (one row per coupled bus/node and period)."""
    buses = coupled_buses(case)
    nodes = coupled_gas_nodes(case)
    if not buses and not nodes:
        raise CaseError("case has no coupling rows; solve the two networks "
                        "independently instead")
    rows = []
    T = case.horizon.periods
    for t in range(T):
        for bus_id in sorted(buses):
            a = power_balance_terms(case, bus_id, t)
            b = {}
            for c in buses[bus_id]:
                b[vyin(c.id, t)] = b.get(vyin(c.id, t), 0.0) - c.chi * c.alpha
            p_d, _ = case.power_load_at(bus_id, t)
            rows.append(CouplingRow(("bus", bus_id, t), a, b, p_d))
        for node_id in sorted(nodes):
            b = gas_balance_terms(case, node_id, t)
            a = {}
            for g in nodes[node_id]:
                a[vp(g.id, t)] = a.get(vp(g.id, t), 0.0) - 1.0 / g.beta
            rows.append(CouplingRow(("gasnode", node_id, t), b=b, a=a,
                                    rhs=case.gas_load_at(node_id, t)))
    return CouplingSystem(rows)


@dataclass
class CouplingContext:
    """Fixed view of the other side's variables for one subproblem solve.

    mode "penalty": rows enter the objective with multipliers `duals` and
    quadratic weight `weight` (the augmented-Lagrangian terms).
    mode "fixed": rows become hard equalities with the other side frozen.
    `other` maps row label -> the other side's contribution b'z (for the
    power subproblem) or a'x (for the gas subproblem).
    """

    system: CouplingSystem
    mode: str = "penalty"
    other: dict = field(default_factory=dict)
    duals: dict = field(default_factory=dict)
    weight: float = 0.0

    def check(self):
        if self.mode not in ("penalty", "fixed"):
            raise ValueError(f"unknown coupling mode {self.mode!r}")
        for r in self.system.rows:
            if r.label not in self.other:
                raise ValueError(f"coupling context misses row {r.label}")


def apply_context(prog, ctx, side):
    """Wires coupling rows into a subproblem program.

    side "a" for the power subproblem (this side's coefficients are row.a),
    side "b" for the gas subproblem.
    """
    from .conic import LinExpr

    ctx.check()
    for r in ctx.system.rows:
        coeffs = r.a if side == "a" else r.b
        expr = LinExpr({prog.var_index(n): c for n, c in coeffs.items()})
        fixed = ctx.other[r.label]
        if ctx.mode == "fixed":
            prog.add_eq(expr, r.rhs - fixed, label=("couple", *r.label))
        else:
            xi = ctx.duals.get(r.label, 0.0)
            if xi:
                prog.add_linear_cost(expr * xi)
            if ctx.weight > 0:
                prog.add_quadratic_cost(ctx.weight / 2.0,
                                        expr + (fixed - r.rhs))
