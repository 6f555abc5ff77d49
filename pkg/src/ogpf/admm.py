"""Alternating-direction coordination of the power and gas subproblems,
plus the centralized reference solve used to validate it."""

from __future__ import annotations

from dataclasses import dataclass, field

from .conic import ConicProgram, LinExpr, SolverOptions
from .coupling import (CouplingContext, assemble_coupling, coupled_buses,
                       coupled_gas_nodes)
from . import ogf, opf
from .ogf import GasState, SsaParams
from .opf import PowerState


@dataclass
class AdmmParams:
    d: float = 100.0  # augmented-Lagrangian weight
    sigma: float = 1e-3  # max-abs coupling-residual tolerance
    k_max: int = 100
    gas_mode: str = "ssa"  # or "relaxation" (convex-regime runs)
    # residual-based penalty adaptation: whenever the coupling residual
    # fails to shrink by at least a factor of two between iterations, d is
    # multiplied by d_growth (capped at d_max).  1.0 disables adaptation
    # and keeps the constant-weight scheme.
    d_growth: float = 1.0
    d_max: float = 1e7
    ssa: SsaParams = field(default_factory=SsaParams)
    solver: SolverOptions = field(default_factory=SolverOptions)


@dataclass
class AdmmState:
    k: int = 0
    duals: dict = field(default_factory=dict)  # row label -> xi
    d: float = 100.0
    residual_history: list = field(default_factory=list)  # max |Ax+Bz-c|
    power_obj_history: list = field(default_factory=list)
    gas_obj_history: list = field(default_factory=list)
    converged: bool = False


def update_dual(state, residuals):
    """xi <- xi + d * r, elementwise over coupling rows."""
    if set(residuals) != set(state.duals):
        raise ValueError("residual vector does not match the coupling rows")
    return {lbl: state.duals[lbl] + state.d * r for lbl, r in residuals.items()}


def initial_gas_point(case):
    """Zeros projected into variable bounds (the 'given' starting values)."""
    st = ogf.zero_gas_state(case)
    for w in case.gas.retailers:
        for t in range(case.horizon.periods):
            st.yw[(w.id, t)] = min(max(0.0, w.y_min), w.y_max)
    return st


def _side_values(system, side, values):
    return {r.label: system.side_value(r, side, values) for r in system.rows}


def run_admm(case, params=None, trace=None):
    """Alternating power/gas solves with dual updates on the coupling rows.

    Returns (PowerState, GasState, AdmmState, converged).
    """
    params = params or AdmmParams()
    system = assemble_coupling(case)
    st = AdmmState(d=params.d, duals={r.label: 0.0 for r in system.rows})
    z_state = initial_gas_point(case)
    z_values = _side_values(system, "b", z_state.as_values())
    x_state = None
    for k in range(1, params.k_max + 1):
        ctx_x = CouplingContext(system, "penalty", other=z_values,
                                duals=st.duals, weight=st.d)
        x_state, _ = opf.solve_opf(case, ctx_x, options=params.solver)
        x_values = _side_values(system, "a", x_state.as_values())

        ctx_z = CouplingContext(system, "penalty", other=x_values,
                                duals=st.duals, weight=st.d)
        if params.gas_mode == "relaxation":
            z_state, _ = ogf.solve_relaxation(case, ctx_z,
                                              options=params.solver)
        else:
            warm = z_state if k > 1 else None
            z_state, _, _ = ogf.run_ssa(case, ctx_z, z0=warm, params=params.ssa)
        z_values = _side_values(system, "b", z_state.as_values())

        residuals = {lbl: x_values[lbl] + z_values[lbl] - r.rhs
                     for lbl, r in zip(system.labels(), system.rows)}
        st.duals = update_dual(st, residuals)
        st.k = k
        res = max(abs(v) for v in residuals.values())
        st.residual_history.append(res)
        p_obj = opf.generation_cost(case, x_state)
        g_obj = ogf.purchase_cost(case, z_state)
        st.power_obj_history.append(p_obj)
        st.gas_obj_history.append(g_obj)
        if trace is not None:
            dual_norm = max(abs(v) for v in st.duals.values())
            worst = max(residuals, key=lambda lb: abs(residuals[lb]))
            trace.append({"k": k, "residual": res, "power_objective": p_obj,
                          "gas_objective": g_obj, "dual_norm": dual_norm,
                          "max_row": worst})
        if res <= params.sigma:
            st.converged = True
            break
        if params.d_growth > 1.0 and len(st.residual_history) >= 2 \
                and res > 0.5 * st.residual_history[-2]:
            st.d = min(st.d * params.d_growth, params.d_max)
    return x_state, z_state, st, st.converged


# ---------------------------------------------------------------------------
# centralized reference


def _joint_base(case, system, gas_mode):
    """Joint program: both sides plus the coupling rows as hard equalities."""
    prog = ConicProgram()
    skip_buses = set(coupled_buses(case))
    skip_nodes = set(coupled_gas_nodes(case))
    opf.add_power_block(prog, case, skip_balance_buses=skip_buses)
    ogf.add_gas_block(prog, case, gas_mode, skip_balance_nodes=skip_nodes)
    opf.add_power_objective(prog, case)
    ogf.add_gas_objective(prog, case)
    for r in system.rows:
        terms = {}
        for name, c in list(r.a.items()) + list(r.b.items()):
            terms[prog.var_index(name)] = terms.get(prog.var_index(name), 0.0) + c
        prog.add_eq(LinExpr(terms), r.rhs, label=("couple", *r.label))
    return prog


def solve_centralized_relaxation(case, options=None):
    """Fully convex lower-bounding solve (gas side relaxed)."""
    system = assemble_coupling(case)
    prog = _joint_base(case, system, "relaxation")
    sol = prog.solve(options or SolverOptions())
    if not sol.optimal:
        raise RuntimeError(f"centralized relaxation ended with {sol.status}")
    return (opf.extract_power_state(case, prog, sol),
            ogf.extract_gas_state(case, prog, sol, with_zeta=True),
            sol)


def solve_centralized(case, params=None, trace=None):
    """Sequential SOCP on the whole coupled problem (coupling rows hard).

    Returns (PowerState, GasState, objective, SsaState).
    """
    params = params or SsaParams()
    system = assemble_coupling(case)
    if params.warm_start == "zero":
        z0 = ogf.zero_gas_state(case)
    else:
        _, z0, _ = solve_centralized_relaxation(case, options=params.solver)
    base = _joint_base(case, system, "ssa")

    def extract(prog, sol):
        ps = opf.extract_power_state(case, prog, sol)
        gs = ogf.extract_gas_state(case, prog, sol)
        return (ps, gs), gs

    full, gas_state, st = ogf._ssa_loop(case, base, extract, params, z0,
                                        trace=trace)
    power_state = full[0]
    if st.converged:
        power_state = _recover_power_state(case, system, gas_state,
                                           power_state)
    objective = opf.generation_cost(case, power_state) \
        + ogf.purchase_cost(case, gas_state)
    return power_state, gas_state, objective, st


def _recover_power_state(case, system, gas_state, fallback):
    """Re-solves the power side at the converged coupling values.

    The final joint subproblem carries the penalty terms at their maximum
    weight, which degrades the accuracy of the power block (observed as
    solver-tolerance relaxation gaps on the line cones).  A clean OPF with
    the gas-side coupling frozen solves the identical power-side problem
    without the penalty scaling and recovers the state to tighter
    tolerance.  Falls back to the joint-solve state on solver trouble.
    """
    z_values = _side_values(system, "b", gas_state.as_values())
    ctx = CouplingContext(system, "fixed", other=z_values)
    try:
        st, _ = opf.solve_opf(case, ctx, options=SolverOptions(gap_tol=1e-9))
    except RuntimeError:
        return fallback
    # the frozen coupling values are themselves only accurate to the joint
    # solve's tolerance, so the re-solve can come out worse on small, already
    # tight cases; keep whichever state certifies the smaller cone gap
    gaps_new, _ = opf.check_soc_exactness(case, st)
    gaps_old, _ = opf.check_soc_exactness(case, fallback)
    if max(gaps_new.values()) < max(gaps_old.values()):
        return st
    return fallback
