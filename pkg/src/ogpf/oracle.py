"""Independent verification tools: exact forward gas solves on trees,
brute-force optima for desk-scale instances, and constraint-violation
reports (MACV / MRCV).

Everything here is deliberately free of the conic machinery so it can
serve as an oracle for it.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

from .coupling import coupled_buses, coupled_gas_nodes
from .ogf import GasState
from .opf import PowerState


class OracleError(Exception):
    pass


# ---------------------------------------------------------------------------
# forward gas solve


def gas_forward_solve(gas, demands, root, root_pressure):
    """Steady-state solve of a rooted gas tree.

    demands: node id -> net offtake (loads plus DG fuel, minus any non-root
    injections).  Flows are accumulated leaf-to-root by conservation;
    pressures propagate root-to-leaf: across a passive pipeline
    u_tail = sqrt(u_head^2 - y^2/phi), across a compressor the tail
    pressure is set to min(gamma * u_head, tail upper bound).

    Returns a single-period GasState.  Raises OracleError when a radicand
    goes negative (pressure-infeasible), a flow would have to reverse, or
    the topology is not a tree rooted at `root`.
    """
    nodes = {n.id: n for n in gas.nodes}
    if root not in nodes:
        raise OracleError(f"unknown root node {root}")
    children = {}  # node -> [edge]
    for e in gas.edges():
        children.setdefault(e.from_node, []).append(e)

    order = []  # edges in root-to-leaf order
    seen = {root}
    stack = [root]
    while stack:
        n = stack.pop()
        for e in children.get(n, []):
            if e.to_node in seen:
                raise OracleError("gas topology is not a tree")
            seen.add(e.to_node)
            order.append(e)
            stack.append(e.to_node)
    if seen != set(nodes):
        raise OracleError("gas network is not a tree rooted at the root node")

    is_comp = {c.id for c in gas.compressors}
    # leaf-to-root flow accumulation: delivered(n) = demand + sum of child inflows
    inflow_need = {}  # edge id -> y_in drawn at its head node
    outflow = {}  # edge id -> y_out delivered at its tail node
    for e in reversed(order):
        need = demands.get(e.to_node, 0.0)
        for ce in children.get(e.to_node, []):
            need += inflow_need[ce.id]
        if need < -1e-12:
            raise OracleError(
                f"edge {e.id} would need reverse flow ({need:.3g})")
        need = max(need, 0.0)
        outflow[e.id] = need
        if e.id in is_comp and e.drive == "gas":
            if gas.loss_convention == "inflow-deficit":
                inflow_need[e.id] = (1.0 - e.alpha) * need
            else:
                inflow_need[e.id] = need / (1.0 - e.alpha)
        else:
            inflow_need[e.id] = need

    # root-to-leaf pressure propagation
    u = {root: root_pressure}
    for e in order:
        head = u[e.from_node]
        if e.id in is_comp:
            u[e.to_node] = min(e.gamma * head, nodes[e.to_node].p_max)
        else:
            y = outflow[e.id]
            rad = head * head - y * y / e.phi
            if rad < 0:
                raise OracleError(
                    f"pipeline {e.id}: pressure-infeasible (flow {y:.4g} "
                    f"exceeds what head pressure {head:.4g} can drive)")
            u[e.to_node] = math.sqrt(rad)

    st = GasState()
    root_supply = demands.get(root, 0.0) + sum(
        inflow_need[e.id] for e in children.get(root, []))
    for w in gas.retailers:
        st.yw[(w.id, 0)] = root_supply if w.node == root else 0.0
    for e in gas.edges():
        st.yin[(e.id, 0)] = inflow_need[e.id]
        st.yout[(e.id, 0)] = outflow[e.id]
    for nid in nodes:
        st.u[(nid, 0)] = u[nid]
    for p in gas.pipelines:
        st.m[(p.id, 0)] = p.k_pack * (u[p.from_node] + u[p.to_node]) / 2.0
    return st


# ---------------------------------------------------------------------------
# exact radial power flow (backward/forward sweep on the branch-flow model)


def radial_power_flow(case, injections, t, extra_load=None, tol=1e-13,
                      max_sweeps=200):
    """Solves the branch-flow equations given all non-reference injections.

    injections: dg id -> (p, q) for every DG not at the reference bus; the
    DG at the reference bus absorbs the residual.  Returns a single-period
    PowerState (values stored at period index t).
    """
    pw = case.power
    ref = pw.reference_bus
    slack = [g for g in pw.nongas_dgs if g.bus == ref]
    if len(slack) != 1:
        raise OracleError("power flow oracle expects exactly one non-gas DG "
                          "at the reference bus")
    slack = slack[0]
    lines_to = {}
    children = {}
    for l in pw.lines:
        lines_to[l.to_bus] = l
        children.setdefault(l.from_bus, []).append(l)
    order = []
    stack = [ref]
    while stack:
        n = stack.pop()
        for l in children.get(n, []):
            order.append(l)
            stack.append(l.to_bus)

    netp, netq = {}, {}
    for b in pw.buses:
        p_d, q_d = case.power_load_at(b.id, t)
        netp[b.id], netq[b.id] = -p_d, -q_d
        if extra_load:
            netp[b.id] -= extra_load.get(b.id, 0.0)
    for g in list(pw.nongas_dgs) + list(pw.gas_dgs):
        if g.id == slack.id:
            continue
        p, q = injections.get(g.id, (0.0, 0.0))
        netp[g.bus] += p
        netq[g.bus] += q

    nu = {b.id: 1.0 for b in pw.buses}
    pf = {l.id: 0.0 for l in pw.lines}
    qf = {l.id: 0.0 for l in pw.lines}
    isq = {l.id: 0.0 for l in pw.lines}
    for _ in range(max_sweeps):
        # backward: flows from leaves up, with current losses
        for l in reversed(order):
            b = l.to_bus
            bus = next(x for x in pw.buses if x.id == b)
            p = -netp[b] + bus.g_shunt * nu[b]
            q = -netq[b] + bus.b_shunt * nu[b]
            for cl in children.get(b, []):
                p += pf[cl.id]
                q += qf[cl.id]
            isq[l.id] = (p * p + q * q) / nu[l.from_bus]
            pf[l.id] = p + l.r * isq[l.id]
            qf[l.id] = q + l.x * isq[l.id]
        # forward: voltages from the root down
        delta = 0.0
        for l in order:
            new = nu[l.from_bus] - 2 * (l.r * pf[l.id] + l.x * qf[l.id]) \
                + (l.r**2 + l.x**2) * isq[l.id]
            delta = max(delta, abs(new - nu[l.to_bus]))
            nu[l.to_bus] = new
        if delta < tol:
            break

    st = PowerState()
    refbus = next(x for x in pw.buses if x.id == ref)
    p_slack = refbus.g_shunt * nu[ref] - netp[ref]
    q_slack = refbus.b_shunt * nu[ref] - netq[ref]
    for l in children.get(ref, []):
        p_slack += pf[l.id]
        q_slack += qf[l.id]
    for g in list(pw.nongas_dgs) + list(pw.gas_dgs):
        if g.id == slack.id:
            st.p[(g.id, t)], st.q[(g.id, t)] = p_slack, q_slack
        else:
            st.p[(g.id, t)], st.q[(g.id, t)] = injections.get(g.id, (0.0, 0.0))
    for l in pw.lines:
        st.pf[(l.id, t)] = pf[l.id]
        st.qf[(l.id, t)] = qf[l.id]
        st.isq[(l.id, t)] = isq[l.id]
    for b in pw.buses:
        st.nu[(b.id, t)] = nu[b.id]
    return st


# ---------------------------------------------------------------------------
# brute force


def _float_range(lo, hi, step):
    n = max(1, int(round((hi - lo) / step)))
    return [lo + (hi - lo) * i / n for i in range(n + 1)]


def brute_force_optimum(case, resolution=1e-3, pressure_points=40):
    """Grid enumeration oracle for desk-scale steady instances.

    Assumes: one retailer (the gas root), one non-gas DG at the reference
    bus absorbing the power residual, constant profiles (so the optimum is
    steady and periods decompose), loose reactive constraints.  Enumerates
    a uniform grid of resolution `resolution` (per-unit) over each
    gas-fired DG's output, checks feasibility through the exact forward
    solves, and returns (objective, per-period decision dict).
    """
    if len(case.gas.retailers) != 1:
        raise OracleError("brute force oracle supports exactly one retailer")
    retailer = case.gas.retailers[0]
    root = retailer.node
    T = case.horizon.periods
    dgs = list(case.power.gas_dgs)
    if len(dgs) > 2:
        raise OracleError("instance too large for grid enumeration")
    fuel_node = dict(case.coupling.gas_dg_nodes)
    node_info = {n.id: n for n in case.gas.nodes}
    slack = next(g for g in case.power.nongas_dgs
                 if g.bus == case.power.reference_bus)

    total = 0.0
    best_states = []
    for t in range(T):
        grids = [_float_range(g.p_min, g.p_max, resolution) for g in dgs]
        best = None

        def feasible_gas(offtakes):
            demands = {}
            for n in case.gas.nodes:
                demands[n.id] = case.gas_load_at(n.id, t)
            for g in dgs:
                demands[fuel_node[g.id]] += offtakes[g.id]
            rootnode = node_info[root]
            for u0 in _float_range(rootnode.p_min, rootnode.p_max,
                                   (rootnode.p_max - rootnode.p_min)
                                   / pressure_points):
                try:
                    gst = gas_forward_solve(case.gas, demands, root, u0)
                except OracleError:
                    continue
                supply = gst.yw[(retailer.id, 0)]
                if not retailer.y_min - 1e-9 <= supply <= retailer.y_max + 1e-9:
                    continue
                if any(not node_info[n].p_min - 1e-9 <= gst.u[(n, 0)]
                       <= node_info[n].p_max + 1e-9 for n in node_info):
                    continue
                if any(gst.yin[(c.id, 0)] > c.y_max + 1e-9
                       for c in case.gas.compressors):
                    continue
                return gst
            return None

        import itertools
        for combo in itertools.product(*grids) if grids else [()]:
            offtakes = {}
            injections = {}
            ok = True
            for g, p in zip(dgs, combo):
                offtakes[g.id] = p / g.beta
                injections[g.id] = (p, 0.0)
            gst = feasible_gas(offtakes)
            if gst is None:
                continue
            # electric compressor demand feeds back into the power balance
            extra = {}
            for c in case.gas.compressors:
                if c.drive == "electric":
                    bus = case.coupling.compressor_buses[c.id]
                    extra[bus] = extra.get(bus, 0.0) \
                        + c.chi * c.alpha * gst.yin[(c.id, 0)]
            pst = radial_power_flow(case, injections, t, extra_load=extra)
            p_slack = pst.p[(slack.id, t)]
            if not slack.p_min - 1e-9 <= p_slack <= slack.p_max + 1e-9:
                continue
            for b in case.power.buses:
                nu = pst.nu[(b.id, t)]
                if b.id != case.power.reference_bus and \
                        not b.v_min**2 - 1e-6 <= nu <= b.v_max**2 + 1e-6:
                    ok = False
                    break
            if not ok:
                continue
            cost = slack.cost_a * p_slack**2 + slack.cost_b * p_slack \
                + slack.cost_c \
                + case.gas_price(retailer, t) * gst.yw[(retailer.id, 0)]
            if best is None or cost < best[0]:
                best = (cost, {"dispatch": dict(zip([g.id for g in dgs], combo)),
                               "slack": p_slack,
                               "supply": gst.yw[(retailer.id, 0)]})
        if best is None:
            raise OracleError("no feasible grid point")
        total += best[0]
        best_states.append(best[1])
    return total, best_states


# ---------------------------------------------------------------------------
# feasibility metrics


@dataclass
class FeasibilityReport:
    macv: float = 0.0
    mrcv: float = 0.0
    families: dict = field(default_factory=dict)  # name -> (macv, mrcv)

    def record(self, family, violation, rhs):
        v = max(0.0, violation)
        rel = v / max(1.0, abs(rhs))
        a, r = self.families.get(family, (0.0, 0.0))
        self.families[family] = (max(a, v), max(r, rel))
        self.macv = max(self.macv, v)
        self.mrcv = max(self.mrcv, rel)

    def to_text(self):
        lines = [
            "Constraint violation report",
            "MACV = max absolute violation over all constraints (per-unit)",
            "MRCV = max violation / max(1, |constraint rhs|)",
            f"MACV = {self.macv:.6e}",
            f"MRCV = {self.mrcv:.6e}",
            "per family (absolute, relative):",
        ]
        for fam in sorted(self.families):
            a, r = self.families[fam]
            lines.append(f"  {fam:<12} {a:.6e}  {r:.6e}")
        return "\n".join(lines)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["family", "macv_pu", "mrcv"])
            w.writerow(["all", self.macv, self.mrcv])
            for fam in sorted(self.families):
                a, r = self.families[fam]
                w.writerow([fam, a, r])


def feasibility_report(case, power_state, gas_state):
    """Evaluates every operating constraint at the given states."""
    rep = FeasibilityReport()
    pw, gas = case.power, case.gas
    T = case.horizon.periods
    comp_at_bus = coupled_buses(case)
    dg_at_node = coupled_gas_nodes(case)

    for t in range(T):
        for g in list(pw.nongas_dgs) + list(pw.gas_dgs):
            p, q = power_state.p[(g.id, t)], power_state.q[(g.id, t)]
            rep.record("bounds", g.p_min - p, g.p_min)
            rep.record("bounds", p - g.p_max, g.p_max)
            rep.record("bounds", g.q_min - q, g.q_min)
            rep.record("bounds", q - g.q_max, g.q_max)
        for b in pw.buses:
            nu = power_state.nu[(b.id, t)]
            rep.record("bounds", b.v_min**2 - nu, b.v_min**2)
            rep.record("bounds", nu - b.v_max**2, b.v_max**2)
        for l in pw.lines:
            isq = power_state.isq[(l.id, t)]
            rep.record("bounds", -isq, 0.0)
            rep.record("bounds", isq - l.i_max**2, l.i_max**2)
            rep.record("bounds", -power_state.pf[(l.id, t)], 0.0)

        for b in pw.buses:
            p_d, q_d = case.power_load_at(b.id, t)
            acc_p = -p_d - b.g_shunt * power_state.nu[(b.id, t)]
            acc_q = -q_d - b.b_shunt * power_state.nu[(b.id, t)]
            for g in list(pw.nongas_dgs) + list(pw.gas_dgs):
                if g.bus == b.id:
                    acc_p += power_state.p[(g.id, t)]
                    acc_q += power_state.q[(g.id, t)]
            for l in pw.lines:
                if l.to_bus == b.id:
                    acc_p += power_state.pf[(l.id, t)] \
                        - l.r * power_state.isq[(l.id, t)]
                    acc_q += power_state.qf[(l.id, t)] \
                        - l.x * power_state.isq[(l.id, t)]
                if l.from_bus == b.id:
                    acc_p -= power_state.pf[(l.id, t)]
                    acc_q -= power_state.qf[(l.id, t)]
            for c in comp_at_bus.get(b.id, []):
                acc_p -= c.chi * c.alpha * gas_state.yin[(c.id, t)]
            family = "coupling" if b.id in comp_at_bus else "balance"
            rep.record(family, abs(acc_p), p_d)
            rep.record("balance", abs(acc_q), q_d)

        for l in pw.lines:
            drop = power_state.nu[(l.from_bus, t)] - power_state.nu[(l.to_bus, t)] \
                - 2 * (l.r * power_state.pf[(l.id, t)]
                       + l.x * power_state.qf[(l.id, t)]) \
                + (l.r**2 + l.x**2) * power_state.isq[(l.id, t)]
            rep.record("balance", abs(drop), 0.0)
            lhs = power_state.pf[(l.id, t)] ** 2 + power_state.qf[(l.id, t)] ** 2
            rhs = power_state.isq[(l.id, t)] * power_state.nu[(l.from_bus, t)]
            rep.record("cone", lhs - rhs, rhs)

        for w in gas.retailers:
            y = gas_state.yw[(w.id, t)]
            rep.record("bounds", w.y_min - y, w.y_min)
            rep.record("bounds", y - w.y_max, w.y_max)
        for n in gas.nodes:
            u = gas_state.u[(n.id, t)]
            rep.record("bounds", n.p_min - u, n.p_min)
            rep.record("bounds", u - n.p_max, n.p_max)
        for c in gas.compressors:
            rep.record("bounds", -gas_state.yin[(c.id, t)], 0.0)
            rep.record("bounds", gas_state.yin[(c.id, t)] - c.y_max, c.y_max)
            rep.record("compressor",
                       gas_state.u[(c.to_node, t)]
                       - c.gamma * gas_state.u[(c.from_node, t)], 0.0)
            alpha = 0.0 if c.drive == "electric" else c.alpha
            if gas.loss_convention == "inflow-deficit" or c.drive == "electric":
                r = gas_state.yin[(c.id, t)] \
                    - (1 - alpha) * gas_state.yout[(c.id, t)]
            else:
                r = gas_state.yout[(c.id, t)] \
                    - (1 - alpha) * gas_state.yin[(c.id, t)]
            rep.record("compressor", abs(r), 0.0)

        for n in gas.nodes:
            acc = -case.gas_load_at(n.id, t)
            for w in gas.retailers:
                if w.node == n.id:
                    acc += gas_state.yw[(w.id, t)]
            for e in gas.edges():
                if e.to_node == n.id:
                    acc += gas_state.yout[(e.id, t)]
                if e.from_node == n.id:
                    acc -= gas_state.yin[(e.id, t)]
            for g in dg_at_node.get(n.id, []):
                acc -= power_state.p[(g.id, t)] / g.beta
            family = "coupling" if n.id in dg_at_node else "balance"
            rep.record(family, abs(acc), case.gas_load_at(n.id, t))

        for p in gas.pipelines:
            u1 = gas_state.u[(p.from_node, t)]
            u2 = gas_state.u[(p.to_node, t)]
            s = gas_state.yin[(p.id, t)] + gas_state.yout[(p.id, t)]
            rep.record("bounds", u2 - u1, 0.0)
            rep.record("bounds", -gas_state.m[(p.id, t)], 0.0)
            rhs = p.phi * (u1 * u1 - u2 * u2)
            rep.record("weymouth", abs(s * s / 4.0 - rhs), rhs)
            pack = gas_state.m[(p.id, t)] - p.k_pack * (u1 + u2) / 2.0
            rep.record("balance", abs(pack), 0.0)
            prev = gas_state.m[(p.id, t - 1)] if t > 0 else p.m0
            dyn = gas_state.m[(p.id, t)] - prev - gas_state.yin[(p.id, t)] \
                + gas_state.yout[(p.id, t)]
            rep.record("balance", abs(dyn), 0.0)
    if case.horizon.terminal_linepack == "equal-to-initial":
        for p in gas.pipelines:
            rep.record("balance", abs(gas_state.m[(p.id, T - 1)] - p.m0), p.m0)
    return rep
