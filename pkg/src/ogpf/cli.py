"""Command-line entry point.

    ogpf CASE.json --mode distributed --out results/

Modes: centralized | distributed | relaxation | forward-check.
Exit codes: 0 converged, 2 finished without converging, 1 error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time

from . import admm, model, ogf, opf, oracle
from .admm import AdmmParams
from .ogf import SsaParams


def build_parser():
    ap = argparse.ArgumentParser(
        prog="ogpf",
        description="Multi-period optimal gas-power flow on coupled radial "
                    "power and tree gas distribution networks.")
    ap.add_argument("case", help="case file (JSON)")
    ap.add_argument("--mode", default="distributed",
                    choices=["centralized", "distributed", "relaxation",
                             "forward-check"])
    ap.add_argument("--out", default="ogpf-out", help="output directory")
    ap.add_argument("--config", help="JSON file with parameter overrides "
                                     "(flags win over the file)")
    ap.add_argument("--periods", type=int,
                    help="truncate the horizon to the first N periods")
    # coordination parameters
    ap.add_argument("--d", type=float, help="augmented-Lagrangian weight")
    ap.add_argument("--sigma", type=float, help="coupling residual tolerance")
    ap.add_argument("--kmax", type=int, help="max coordination iterations")
    ap.add_argument("--d-growth", type=float,
                    help="penalty growth factor on residual stall "
                         "(1 = constant weight)")
    # sequential-SOCP parameters
    ap.add_argument("--delta", type=float, help="objective-change tolerance")
    ap.add_argument("--rho0", type=float, help="initial penalty weight")
    ap.add_argument("--rhomax", type=float, help="penalty weight cap")
    ap.add_argument("--epsilon", type=float, help="relative-slack tolerance")
    ap.add_argument("--kappa", type=float, help="penalty growth factor")
    ap.add_argument("--jmax", type=int, help="max sequential iterations")
    ap.add_argument("--warm-start", choices=["relaxation", "zero"],
                    help="sequential-solve initial point")
    ap.add_argument("--seed", type=int, default=0,
                    help="seed for randomized fixtures (recorded in summary)")
    ap.add_argument("--verbose", action="store_true")
    return ap


def resolve_params(args):
    cfg = {}
    if args.config:
        with open(args.config) as fh:
            cfg = json.load(fh)

    def pick(flag, key, default):
        v = getattr(args, flag)
        if v is not None:
            return v
        return cfg.get(key, default)

    ssa = SsaParams(
        delta=pick("delta", "delta", 1.0),
        rho0=pick("rho0", "rho0", 0.01),
        rho_max=pick("rhomax", "rhomax", 1000.0),
        epsilon=pick("epsilon", "epsilon", 1e-6),
        kappa=pick("kappa", "kappa", 2.0),
        j_max=pick("jmax", "jmax", 100),
        warm_start=pick("warm_start", "warm_start", "relaxation"),
    )
    params = AdmmParams(
        d=pick("d", "d", 100.0),
        sigma=pick("sigma", "sigma", 1e-3),
        k_max=pick("kmax", "kmax", 100),
        d_growth=pick("d_growth", "d_growth", 1.0),
        ssa=ssa,
    )
    return params


def write_dispatch(path, case, power_state):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["period", "generator", "kind", "p_pu", "q_pu"])
        for t in range(case.horizon.periods):
            for g in case.power.nongas_dgs:
                w.writerow([t, g.id, "nongas",
                            repr(power_state.p[(g.id, t)]),
                            repr(power_state.q[(g.id, t)])])
            for g in case.power.gas_dgs:
                w.writerow([t, g.id, "gasfired",
                            repr(power_state.p[(g.id, t)]),
                            repr(power_state.q[(g.id, t)])])


def write_gasflow(path, case, gas_state):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["period", "element", "kind", "supply_pu", "y_in_pu",
                    "y_out_pu", "pressure_pu", "linepack_pu"])
        for t in range(case.horizon.periods):
            for wt in case.gas.retailers:
                w.writerow([t, wt.id, "retailer",
                            repr(gas_state.yw[(wt.id, t)]), "", "", "", ""])
            for p in case.gas.pipelines:
                w.writerow([t, p.id, "pipeline", "",
                            repr(gas_state.yin[(p.id, t)]),
                            repr(gas_state.yout[(p.id, t)]), "",
                            repr(gas_state.m[(p.id, t)])])
            for c in case.gas.compressors:
                w.writerow([t, c.id, "compressor", "",
                            repr(gas_state.yin[(c.id, t)]),
                            repr(gas_state.yout[(c.id, t)]), "", ""])
            for n in case.gas.nodes:
                w.writerow([t, n.id, "node", "", "", "",
                            repr(gas_state.u[(n.id, t)]), ""])


def write_convergence(path, admm_trace, ssa_trace):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["level", "k", "j", "rho", "objective_usd", "residual_pu",
                    "max_slack", "max_weymouth_residual", "dual_norm"])
        for row in admm_trace:
            w.writerow(["admm", row["k"], "", "",
                        repr(row["power_objective"] + row["gas_objective"]),
                        repr(row["residual"]), "", "", repr(row["dual_norm"])])
        for row in ssa_trace:
            w.writerow(["ssa", "", row["j"], repr(row["rho"]),
                        repr(row["objective"]), "", repr(row["max_slack"]),
                        repr(row["max_weymouth_residual"]), ""])


def emit_linepack_profile(path, case, gas_state):
    """Per-period total linepack, stored/extracted gas and its share of the
    gas demand."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["period", "total_linepack_pu", "stored_pu",
                    "extracted_pu", "extracted_share_of_demand_pct"])
        prev = sum(p.m0 for p in case.gas.pipelines)
        for t in range(case.horizon.periods):
            tot = sum(gas_state.m[(p.id, t)] for p in case.gas.pipelines)
            dm = tot - prev
            demand = sum(case.gas_load_at(n.id, t) for n in case.gas.nodes)
            share = (max(0.0, -dm) / demand * 100.0) if demand > 0 else 0.0
            w.writerow([t, repr(tot), repr(max(0.0, dm)), repr(max(0.0, -dm)),
                        repr(share)])
            prev = tot
    return path


def run(args):
    case = model.load_case(args.case)
    if args.periods:
        case = model.truncate_horizon(case, args.periods)
    params = resolve_params(args)
    os.makedirs(args.out, exist_ok=True)
    t0 = time.perf_counter()
    admm_trace, ssa_trace = [], []
    converged = True
    label = args.mode
    objective = None
    power_state = gas_state = None

    if args.mode == "forward-check":
        retailer = case.gas.retailers[0]
        demands = {n.id: case.gas_load_at(n.id, 0) for n in case.gas.nodes}
        root = retailer.node
        u0 = next(n for n in case.gas.nodes if n.id == root).p_max
        gas_state = oracle.gas_forward_solve(case.gas, demands, root, u0)
        wall = time.perf_counter() - t0
        rep = oracle.FeasibilityReport()
        for p in case.gas.pipelines:
            u1, u2 = gas_state.u[(p.from_node, 0)], gas_state.u[(p.to_node, 0)]
            s = gas_state.yin[(p.id, 0)] + gas_state.yout[(p.id, 0)]
            rhs = p.phi * (u1 * u1 - u2 * u2)
            rep.record("weymouth", abs(s * s / 4.0 - rhs), rhs)
        write_gasflow(os.path.join(args.out, "gasflow.csv"), case, gas_state)
        _write_feas_and_summary(args, rep, None, wall, 0, label)
        return 0

    if args.mode == "relaxation":
        power_state, gas_state, sol = admm.solve_centralized_relaxation(case)
        objective = opf.generation_cost(case, power_state) \
            + ogf.purchase_cost(case, gas_state)
        iterations = sol.iterations
        label = "relaxation (lower bound only)"
    elif args.mode == "centralized":
        power_state, gas_state, objective, st = admm.solve_centralized(
            case, params.ssa, trace=ssa_trace)
        converged = st.converged
        iterations = st.j
    else:
        power_state, gas_state, st, converged = admm.run_admm(
            case, params, trace=admm_trace)
        objective = opf.generation_cost(case, power_state) \
            + ogf.purchase_cost(case, gas_state)
        iterations = st.k
    wall = time.perf_counter() - t0

    write_dispatch(os.path.join(args.out, "dispatch.csv"), case, power_state)
    write_gasflow(os.path.join(args.out, "gasflow.csv"), case, gas_state)
    write_convergence(os.path.join(args.out, "convergence.csv"),
                      admm_trace, ssa_trace)
    emit_linepack_profile(os.path.join(args.out, "linepack.csv"),
                          case, gas_state)
    rep = oracle.feasibility_report(case, power_state, gas_state)
    _write_feas_and_summary(args, rep, objective, wall, iterations, label,
                            converged)
    return 0 if converged else 2


def _write_feas_and_summary(args, report, objective, wall, iterations,
                            label, converged=True):
    with open(os.path.join(args.out, "feasibility.txt"), "w") as fh:
        fh.write(report.to_text() + "\n")
    with open(os.path.join(args.out, "summary.txt"), "w") as fh:
        fh.write(f"mode: {label}\n")
        fh.write(f"case: {args.case}\n")
        if objective is not None:
            fh.write(f"objective_usd: {objective!r}\n")
        fh.write(f"iterations: {iterations}\n")
        fh.write(f"wall_time_s: {wall:.3f}\n")
        fh.write(f"converged: {converged}\n")
        fh.write(f"seed: {args.seed}\n")


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except (model.CaseError, oracle.OracleError, RuntimeError, OSError) as exc:
        print(f"ogpf: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
