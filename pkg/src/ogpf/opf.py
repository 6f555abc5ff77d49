"""Power-side subproblem: multi-period branch-flow SOCP on a radial feeder."""

from __future__ import annotations

from dataclasses import dataclass, field

from .conic import ConicProgram, SolverOptions
from .coupling import (apply_context, coupled_buses, power_balance_terms,
                       vnu, vp, vpf, vq, vqf, visq)


@dataclass
class PowerState:
    p: dict = field(default_factory=dict)  # (dg, t) -> pu
    q: dict = field(default_factory=dict)
    pf: dict = field(default_factory=dict)  # (line, t)
    qf: dict = field(default_factory=dict)
    nu: dict = field(default_factory=dict)  # (bus, t), voltage squared
    isq: dict = field(default_factory=dict)  # (line, t), current squared

    def as_values(self):
        """Flat name -> value map (for coupling-row evaluation)."""
        out = {}
        for (g, t), v in self.p.items():
            out[vp(g, t)] = v
        for (g, t), v in self.q.items():
            out[vq(g, t)] = v
        for (l, t), v in self.pf.items():
            out[vpf(l, t)] = v
        for (l, t), v in self.qf.items():
            out[vqf(l, t)] = v
        for (b, t), v in self.nu.items():
            out[vnu(b, t)] = v
        for (l, t), v in self.isq.items():
            out[visq(l, t)] = v
        return out


def generation_cost(case, state):
    """Fuel cost of the non-gas DGs at a power state, in $."""
    total = 0.0
    for g in case.power.nongas_dgs:
        for t in range(case.horizon.periods):
            p = state.p[(g.id, t)]
            total += g.cost_a * p * p + g.cost_b * p + g.cost_c
    return total


def add_power_block(prog, case, skip_balance_buses=()):
    """Adds all power-side variables and constraints to a program.

    Active-power balance is enforced at every bus except those listed in
    `skip_balance_buses` (the coupled buses, whose balance is supplied by
    the caller as coupling rows).  Returns the ids of the line cones.
    """
    pw = case.power
    T = case.horizon.periods
    cones = {}
    for t in range(T):
        for b in pw.buses:
            lo, hi = b.v_min**2, b.v_max**2
            if b.id == pw.reference_bus:
                lo = hi = 1.0
            prog.add_variable(vnu(b.id, t), lo, hi)
        for l in pw.lines:
            prog.add_variable(vpf(l.id, t), 0.0)  # reverse flow prohibited
            prog.add_variable(vqf(l.id, t))
            prog.add_variable(visq(l.id, t), 0.0, l.i_max**2)
        for g in list(pw.nongas_dgs) + list(pw.gas_dgs):
            prog.add_variable(vp(g.id, t), g.p_min, g.p_max)
            prog.add_variable(vq(g.id, t), g.q_min, g.q_max)

    from .conic import LinExpr

    for t in range(T):
        for b in pw.buses:
            # reactive balance at every bus
            acc = LinExpr()
            if b.b_shunt:
                acc = acc + prog.var(vnu(b.id, t)) * (-b.b_shunt)
            for g in list(pw.nongas_dgs) + list(pw.gas_dgs):
                if g.bus == b.id:
                    acc = acc + prog.var(vq(g.id, t))
            for l in pw.lines:
                if l.to_bus == b.id:
                    acc = acc + prog.var(vqf(l.id, t)) \
                        - prog.var(visq(l.id, t)) * l.x
                if l.from_bus == b.id:
                    acc = acc - prog.var(vqf(l.id, t))
            p_d, q_d = case.power_load_at(b.id, t)
            prog.add_eq(acc, q_d, label=("qbal", b.id, t))

            # active balance except at coupled buses
            if b.id in skip_balance_buses:
                continue
            terms = power_balance_terms(case, b.id, t)
            expr = LinExpr({prog.var_index(n): c for n, c in terms.items()})
            prog.add_eq(expr, p_d, label=("pbal", b.id, t))

        for l in pw.lines:
            # voltage drop along the line
            drop = prog.var(vnu(l.from_bus, t)) - prog.var(vnu(l.to_bus, t)) \
                - prog.var(vpf(l.id, t)) * (2 * l.r) \
                - prog.var(vqf(l.id, t)) * (2 * l.x) \
                + prog.var(visq(l.id, t)) * (l.r**2 + l.x**2)
            prog.add_eq(drop, 0.0, label=("vdrop", l.id, t))
            # relaxed apparent power: pf^2 + qf^2 <= isq * nu_from
            cones[(l.id, t)] = prog.add_rotated(
                prog.var(visq(l.id, t)), prog.var(vnu(l.from_bus, t)),
                [prog.var(vpf(l.id, t)), prog.var(vqf(l.id, t))])
    return cones


# Price on squared line current in the subproblem objective, $ per pu.
# Exactness of the cone relaxation requires the cost of losses to be
# strictly increasing on every line; in subtrees served entirely by
# gas-fired DGs (whose fuel cost sits on the gas side) the power-side
# marginal price drops to zero and the cone complementarity degenerates,
# leaving solver-tolerance-sized relaxation gaps.  The explicit loss price
# restores a uniform dual lower bound on every cone.  It is excluded from
# `generation_cost`, so reported objectives are unaffected; the induced
# dispatch perturbation is second-order (the term only breaks ties toward
# loss-minimal flows).
LOSS_PRICE = 0.05


def add_power_objective(prog, case):
    for t in range(case.horizon.periods):
        for g in case.power.nongas_dgs:
            pvar = prog.var(vp(g.id, t))
            if g.cost_a:
                prog.add_quadratic_cost(g.cost_a, pvar)
            prog.add_linear_cost(pvar * g.cost_b + g.cost_c)
        for l in case.power.lines:
            prog.add_linear_cost(prog.var(visq(l.id, t)) * LOSS_PRICE)


def loss_regularization_cost(case, state):
    """Value of the loss-price term at a power state, in $."""
    return LOSS_PRICE * sum(state.isq[(l.id, t)]
                            for l in case.power.lines
                            for t in range(case.horizon.periods))


def build_opf(case, coupling_ctx=None):
    """OPF subproblem program; coupled-bus balance comes from the context.

    Without a context the program is the standalone OPF: balance holds at
    every bus and compressor electric demand is absent.
    """
    prog = ConicProgram()
    skip = set()
    if coupling_ctx is not None:
        skip = {lbl[1] for lbl in coupling_ctx.system.labels()
                if lbl[0] == "bus"}
    prog._line_cones = add_power_block(prog, case, skip_balance_buses=skip)
    add_power_objective(prog, case)
    if coupling_ctx is not None:
        apply_context(prog, coupling_ctx, "a")
    return prog


def extract_power_state(case, prog, sol):
    if not sol.optimal:
        raise RuntimeError(f"cannot extract state from a {sol.status} solution")
    st = PowerState()
    T = case.horizon.periods
    for t in range(T):
        for g in list(case.power.nongas_dgs) + list(case.power.gas_dgs):
            st.p[(g.id, t)] = prog.value(sol, vp(g.id, t))
            st.q[(g.id, t)] = prog.value(sol, vq(g.id, t))
        for l in case.power.lines:
            st.pf[(l.id, t)] = prog.value(sol, vpf(l.id, t))
            st.qf[(l.id, t)] = prog.value(sol, vqf(l.id, t))
            st.isq[(l.id, t)] = prog.value(sol, visq(l.id, t))
        for b in case.power.buses:
            st.nu[(b.id, t)] = prog.value(sol, vnu(b.id, t))
    return st


def check_soc_exactness(case, state, threshold=1e-6):
    """Per-line relaxation gap isq*nu_from - (pf^2 + qf^2); flags gaps above
    the exactness threshold."""
    gaps = {}
    flagged = []
    for l in case.power.lines:
        for t in range(case.horizon.periods):
            gap = state.isq[(l.id, t)] * state.nu[(l.from_bus, t)] \
                - state.pf[(l.id, t)] ** 2 - state.qf[(l.id, t)] ** 2
            gaps[(l.id, t)] = gap
            if gap > threshold:
                flagged.append((l.id, t, gap))
    return gaps, flagged


def solve_opf(case, coupling_ctx=None, options=None):
    prog = build_opf(case, coupling_ctx)
    sol = prog.solve(options or SolverOptions())
    if not sol.optimal:
        raise RuntimeError(f"OPF subproblem ended with status {sol.status}")
    return extract_power_state(case, prog, sol), sol
