"""Gas-side subproblem: SOCP relaxation warm start and the sequential SOCP
procedure that restores the pipeline flow/pressure equality.

The squared flow/pressure relation of each passive pipeline,

    (y_in + y_out)^2 / 4 = phi * (u_head^2 - u_tail^2),

is split into a second-order cone (<=) and a concave side that is cut by
fresh linearizations every iteration, with one-sided slacks driven to zero
by an increasing penalty weight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .conic import ConicProgram, LinExpr, SolverOptions
from .coupling import (apply_context, coupled_gas_nodes, gas_balance_terms,
                       vm, vu, vyin, vyout, vyw, vzeta)

DENOM_GUARD = 1e-9  # guards the relative-slack stopping ratio against 0/0


@dataclass
class GasState:
    yw: dict = field(default_factory=dict)  # (retailer, t)
    yin: dict = field(default_factory=dict)  # (pipe or compressor, t)
    yout: dict = field(default_factory=dict)
    u: dict = field(default_factory=dict)  # (node, t), pressure
    m: dict = field(default_factory=dict)  # (pipe, t), linepack
    zeta: dict = field(default_factory=dict)  # (node, t), pressure-square proxy

    def as_values(self):
        out = {}
        for (w, t), v in self.yw.items():
            out[vyw(w, t)] = v
        for (e, t), v in self.yin.items():
            out[vyin(e, t)] = v
        for (e, t), v in self.yout.items():
            out[vyout(e, t)] = v
        for (n, t), v in self.u.items():
            out[vu(n, t)] = v
        for (l, t), v in self.m.items():
            out[vm(l, t)] = v
        return out


def zero_gas_state(case):
    st = GasState()
    T = case.horizon.periods
    for t in range(T):
        for w in case.gas.retailers:
            st.yw[(w.id, t)] = 0.0
        for e in case.gas.edges():
            st.yin[(e.id, t)] = 0.0
            st.yout[(e.id, t)] = 0.0
        for n in case.gas.nodes:
            st.u[(n.id, t)] = 0.0
        for p in case.gas.pipelines:
            st.m[(p.id, t)] = 0.0
    return st


def purchase_cost(case, state):
    """Gas purchase cost at a state, in $."""
    return sum(case.gas_price(w, t) * state.yw[(w.id, t)]
               for w in case.gas.retailers
               for t in range(case.horizon.periods))


def weymouth_residuals(case, state):
    """(pipe, t) -> relative residual of the squared flow/pressure equality."""
    out = {}
    for p in case.gas.pipelines:
        for t in range(case.horizon.periods):
            s = state.yin[(p.id, t)] + state.yout[(p.id, t)]
            rhs = p.phi * (state.u[(p.from_node, t)] ** 2
                           - state.u[(p.to_node, t)] ** 2)
            out[(p.id, t)] = abs(s * s / 4.0 - rhs) / max(1.0, abs(rhs))
    return out


# ---------------------------------------------------------------------------
# constraint block


def add_gas_block(prog, case, mode, skip_balance_nodes=()):
    """Adds gas-side variables and constraints.

    mode "relaxation" adds the pressure-square proxy variables and the cone
    relaxation of the flow/pressure equality; mode "ssa" adds only the cone
    side, leaving the concave side to per-iteration cuts.
    """
    if mode not in ("relaxation", "ssa"):
        raise ValueError(f"unknown gas mode {mode!r}")
    gas = case.gas
    T = case.horizon.periods
    for t in range(T):
        for w in gas.retailers:
            prog.add_variable(vyw(w.id, t), w.y_min, w.y_max)
        for p in gas.pipelines:
            prog.add_variable(vyin(p.id, t), 0.0)
            prog.add_variable(vyout(p.id, t), 0.0)
            prog.add_variable(vm(p.id, t), 0.0)
        for c in gas.compressors:
            prog.add_variable(vyin(c.id, t), 0.0, c.y_max)
            prog.add_variable(vyout(c.id, t), 0.0)
        for n in gas.nodes:
            prog.add_variable(vu(n.id, t), n.p_min, n.p_max)
            if mode == "relaxation":
                prog.add_variable(vzeta(n.id, t), n.p_min**2, n.p_max**2)

    for t in range(T):
        for n in gas.nodes:
            if n.id in skip_balance_nodes:
                continue
            terms = gas_balance_terms(case, n.id, t)
            expr = LinExpr({prog.var_index(nm): c for nm, c in terms.items()})
            prog.add_eq(expr, case.gas_load_at(n.id, t),
                        label=("gbal", n.id, t))

        for p in gas.pipelines:
            u1 = prog.var(vu(p.from_node, t))
            u2 = prog.var(vu(p.to_node, t))
            prog.add_ineq(u2 - u1, 0.0, label=("udir", p.id, t))
            # linepack level tracks average pressure
            prog.add_eq(prog.var(vm(p.id, t)) - (u1 + u2) * (p.k_pack / 2.0),
                        0.0, label=("pack", p.id, t))
            # linepack recursion
            prev = prog.var(vm(p.id, t - 1)) if t > 0 else LinExpr({}, p.m0)
            prog.add_eq(prog.var(vm(p.id, t)) - prev
                        - prog.var(vyin(p.id, t)) + prog.var(vyout(p.id, t)),
                        0.0, label=("packdyn", p.id, t))
            sphi = math.sqrt(p.phi)
            s_half = (prog.var(vyin(p.id, t)) + prog.var(vyout(p.id, t))) * 0.5
            if mode == "relaxation":
                z1 = prog.var(vzeta(p.from_node, t))
                z2 = prog.var(vzeta(p.to_node, t))
                prog.add_rotated((z1 - z2) * p.phi, LinExpr({}, 1.0), [s_half])
            else:
                prog.add_soc(prog.var(vu(p.from_node, t)) * sphi,
                             [s_half, prog.var(vu(p.to_node, t)) * sphi])
        if mode == "relaxation":
            for n in gas.nodes:
                # pressure-square proxy dominates the true square
                prog.add_rotated(prog.var(vzeta(n.id, t)), LinExpr({}, 1.0),
                                 [prog.var(vu(n.id, t))])

        for c in gas.compressors:
            prog.add_ineq(prog.var(vu(c.to_node, t))
                          - prog.var(vu(c.from_node, t)) * c.gamma,
                          0.0, label=("comp", c.id, t))
            yin = prog.var(vyin(c.id, t))
            yout = prog.var(vyout(c.id, t))
            if c.drive == "electric":
                prog.add_eq(yin - yout, 0.0, label=("cflow", c.id, t))
            elif gas.loss_convention == "inflow-deficit":
                prog.add_eq(yin - yout * (1.0 - c.alpha), 0.0,
                            label=("cflow", c.id, t))
            else:
                prog.add_eq(yout - yin * (1.0 - c.alpha), 0.0,
                            label=("cflow", c.id, t))

    if case.horizon.terminal_linepack == "equal-to-initial":
        for p in gas.pipelines:
            prog.add_eq(prog.var(vm(p.id, T - 1)), p.m0,
                        label=("packend", p.id))


def add_gas_objective(prog, case):
    for t in range(case.horizon.periods):
        for w in case.gas.retailers:
            prog.add_linear_cost(prog.var(vyw(w.id, t)) * case.gas_price(w, t))


def _skip_nodes(coupling_ctx):
    if coupling_ctx is None:
        return set()
    return {lbl[1] for lbl in coupling_ctx.system.labels()
            if lbl[0] == "gasnode"}


def extract_gas_state(case, prog, sol, with_zeta=False):
    if not sol.optimal:
        raise RuntimeError(f"cannot extract state from a {sol.status} solution")
    st = GasState()
    for t in range(case.horizon.periods):
        for w in case.gas.retailers:
            st.yw[(w.id, t)] = prog.value(sol, vyw(w.id, t))
        for e in case.gas.edges():
            st.yin[(e.id, t)] = prog.value(sol, vyin(e.id, t))
            st.yout[(e.id, t)] = prog.value(sol, vyout(e.id, t))
        for n in case.gas.nodes:
            st.u[(n.id, t)] = prog.value(sol, vu(n.id, t))
            if with_zeta:
                st.zeta[(n.id, t)] = prog.value(sol, vzeta(n.id, t))
    # rebuild linepack from the recursion so the telescoping identity holds
    # exactly instead of accumulating solver roundoff across periods
    for p in case.gas.pipelines:
        m = p.m0
        for t in range(case.horizon.periods):
            m += st.yin[(p.id, t)] - st.yout[(p.id, t)]
            st.m[(p.id, t)] = m
    return st


# ---------------------------------------------------------------------------
# SOCP relaxation (warm start)


def build_relaxation(case, coupling_ctx=None):
    prog = ConicProgram()
    add_gas_block(prog, case, "relaxation",
                  skip_balance_nodes=_skip_nodes(coupling_ctx))
    add_gas_objective(prog, case)
    if coupling_ctx is not None:
        apply_context(prog, coupling_ctx, "b")
    return prog


def solve_relaxation(case, coupling_ctx=None, options=None):
    prog = build_relaxation(case, coupling_ctx)
    sol = prog.solve(options or SolverOptions())
    if sol.status == "infeasible":
        raise RuntimeError(
            "gas relaxation infeasible: the gas system cannot meet demand "
            "even with the flow/pressure equality relaxed")
    if not sol.optimal:
        raise RuntimeError(f"gas relaxation ended with status {sol.status}")
    return extract_gas_state(case, prog, sol, with_zeta=True), sol


# ---------------------------------------------------------------------------
# concave-side linearization


def concave_value(pipe, s, u2):
    """g = s^2/4 + phi u2^2 (the concave side's convex negative)."""
    return s * s / 4.0 + pipe.phi * u2 * u2


def linearize_concave(prog, pipe, t, s_k, u2_k):
    """First-order model of g around (s_k, u2_k), as a program expression."""
    s = prog.var(vyin(pipe.id, t)) + prog.var(vyout(pipe.id, t))
    u2 = prog.var(vu(pipe.to_node, t))
    return s * (s_k / 2.0) + u2 * (2.0 * pipe.phi * u2_k) \
        + LinExpr({}, -s_k * s_k / 4.0 - pipe.phi * u2_k * u2_k)


def linearized_value(pipe, s_k, u2_k, s, u2):
    """The same first-order model evaluated at a point."""
    return s_k * s / 2.0 - s_k * s_k / 4.0 \
        - pipe.phi * u2_k**2 + 2.0 * pipe.phi * u2_k * u2


# ---------------------------------------------------------------------------
# sequential SOCP


@dataclass
class SsaParams:
    delta: float = 1.0  # objective-change stopping tolerance, $ (Table defaults)
    rho0: float = 0.01
    rho_max: float = 1000.0
    epsilon: float = 1e-6
    kappa: float = 2.0
    j_max: int = 100
    warm_start: str = "relaxation"  # or "zero"
    slack_zero_tol: float = 1e-5  # solver-level slack treated as exactly zero
    solver: SolverOptions = field(default_factory=SolverOptions)


@dataclass
class SsaState:
    j: int = 0
    lin_point: GasState | None = None
    rho: float = 0.01
    slacks: dict = field(default_factory=dict)  # (pipe, t) -> slack value
    obj_history: list = field(default_factory=list)
    ratio_history: list = field(default_factory=list)  # max relative slack
    residual_history: list = field(default_factory=list)  # max rel. Weymouth
    converged: bool = False


def _slack_name(pipe_id, t):
    return f"sl:{pipe_id}:{t}"


def add_concave_cuts(prog, case, lin_point, rho):
    """Slack variables, tangent cuts and the penalty term for one iteration."""
    for p in case.gas.pipelines:
        for t in range(case.horizon.periods):
            s_k = lin_point.yin[(p.id, t)] + lin_point.yout[(p.id, t)]
            u2_k = lin_point.u[(p.to_node, t)]
            slack = prog.add_variable(_slack_name(p.id, t), 0.0)
            ghat = linearize_concave(prog, p, t, s_k, u2_k)
            # phi u1^2 <= ghat + slack
            prog.add_rotated(ghat + slack, LinExpr({}, 1.0),
                             [prog.var(vu(p.from_node, t)) * math.sqrt(p.phi)])
            prog.add_linear_cost(slack * rho)


def _ssa_loop(case, base_prog, extract, params, z0, coupling_ctx=None,
              trace=None, obj0=None):
    """Shared driver for the gas-only and the joint sequential solve.

    base_prog: program with everything except cuts/penalty.
    extract: (prog, sol) -> (full_state, gas_state).
    Returns (full_state, gas_state, SsaState).
    """
    st = SsaState(rho=params.rho0, lin_point=z0)
    prev_obj = obj0
    full_state = gas_state = None
    for j in range(1, params.j_max + 1):
        prog = base_prog.clone()
        add_concave_cuts(prog, case, st.lin_point, st.rho)
        sol = prog.solve(params.solver)
        if not sol.optimal:
            # high penalty weights can stall the interior point near the
            # optimum; the epigraph form of the quadratic costs changes the
            # KKT system enough to recover, as do looser tolerances
            retries = [
                replace(params.solver, reformulate_quadratic=(
                    not params.solver.reformulate_quadratic)),
                replace(params.solver,
                        feasibility_tol=params.solver.feasibility_tol * 100,
                        gap_tol=params.solver.gap_tol * 100),
            ]
            for opts in retries:
                sol = prog.solve(opts)
                if sol.optimal:
                    break
        if not sol.optimal:
            raise RuntimeError(
                f"sequential solve failed at iteration {j}: {sol.status}")
        full_state, gas_state = extract(prog, sol)
        obj = sol.objective

        # relative-slack feasibility ratio, with the 0/0 guard
        max_ratio = 0.0
        st.slacks = {}
        for p in case.gas.pipelines:
            for t in range(case.horizon.periods):
                sval = prog.value(sol, _slack_name(p.id, t))
                st.slacks[(p.id, t)] = sval
                s = gas_state.yin[(p.id, t)] + gas_state.yout[(p.id, t)]
                u1 = gas_state.u[(p.from_node, t)]
                u2 = gas_state.u[(p.to_node, t)]
                s_k = st.lin_point.yin[(p.id, t)] + st.lin_point.yout[(p.id, t)]
                u2_k = st.lin_point.u[(p.to_node, t)]
                fg = p.phi * u1 * u1 - linearized_value(p, s_k, u2_k, s, u2)
                seff = sval if sval > params.slack_zero_tol else 0.0
                max_ratio = max(max_ratio, seff / max(abs(fg), DENOM_GUARD))

        max_res = max(weymouth_residuals(case, gas_state).values(), default=0.0)
        st.j = j
        st.obj_history.append(obj)
        st.ratio_history.append(max_ratio)
        st.residual_history.append(max_res)
        if trace is not None:
            trace.append({"j": j, "rho": st.rho, "objective": obj,
                          "max_slack": max(st.slacks.values(), default=0.0),
                          "max_weymouth_residual": max_res})
        st.lin_point = gas_state
        done_obj = prev_obj is not None and abs(obj - prev_obj) <= params.delta
        prev_obj = obj
        # the residual gate makes the converged state actually satisfy the
        # flow/pressure equality to epsilon, not just the slack criterion
        if done_obj and max_ratio <= params.epsilon \
                and max_res <= params.epsilon:
            st.converged = True
            break
        st.rho = min(params.kappa * st.rho, params.rho_max)
    return full_state, gas_state, st


def run_ssa(case, coupling_ctx=None, z0=None, params=None, trace=None):
    """Sequential SOCP for the gas subproblem.

    Returns (GasState, SsaState, converged).  The initial linearization
    point comes from `z0`, else from the warm-start policy in `params`.
    """
    params = params or SsaParams()
    if z0 is None:
        if params.warm_start == "zero":
            z0 = zero_gas_state(case)
        else:
            z0, _ = solve_relaxation(case, coupling_ctx,
                                     options=params.solver)
    base = ConicProgram()
    add_gas_block(base, case, "ssa",
                  skip_balance_nodes=_skip_nodes(coupling_ctx))
    add_gas_objective(base, case)
    if coupling_ctx is not None:
        apply_context(base, coupling_ctx, "b")

    def extract(prog, sol):
        gs = extract_gas_state(case, prog, sol)
        return gs, gs

    obj0 = _warm_objective(case, base, z0, params.rho0)
    _, gas_state, st = _ssa_loop(case, base, extract, params, z0,
                                 coupling_ctx, trace, obj0=obj0)
    return gas_state, st, st.converged


def _warm_objective(case, base_prog, z0, rho):
    """Penalized objective evaluated at the warm-start point (so that a
    fixed-point warm start can stop after a single iteration)."""
    import numpy as np

    vals = z0.as_values()
    x = np.zeros(base_prog.num_vars)
    try:
        for name, v in vals.items():
            if base_prog.has_var(name):
                x[base_prog.var_index(name)] = v
    except (KeyError, IndexError):
        return None
    obj = base_prog.objective_value(x)
    for p in case.gas.pipelines:
        for t in range(case.horizon.periods):
            s = z0.yin[(p.id, t)] + z0.yout[(p.id, t)]
            u1 = z0.u[(p.from_node, t)]
            u2 = z0.u[(p.to_node, t)]
            obj += rho * max(0.0, p.phi * u1 * u1 - concave_value(p, s, u2))
    return obj


def build_ssa_subproblem(case, lin_point, rho, coupling_ctx=None):
    """One penalized subproblem instance (exposed for inspection/tests)."""
    prog = ConicProgram()
    add_gas_block(prog, case, "ssa",
                  skip_balance_nodes=_skip_nodes(coupling_ctx))
    add_gas_objective(prog, case)
    if coupling_ctx is not None:
        apply_context(prog, coupling_ctx, "b")
    add_concave_cuts(prog, case, lin_point, rho)
    return prog
