"""Multi-period optimal gas-power flow for coupled radial power and tree
gas distribution networks.

The gas side's nonconvex pressure-flow coupling is handled by a penalty
sequential SOCP warm-started from a conic relaxation; the power and gas
subproblems are solved either jointly or by alternating-direction
coordination.
"""

from .conic import (ConicError, ConicProgram, ConicSolution, LinExpr,
                    SolverOptions)
from .model import (Bases, CaseError, CoupledCase, GasNetwork, Horizon,
                    PowerNetwork, case_from_dict, case_to_dict,
                    linepack_coefficient, load_case, save_case,
                    truncate_horizon, validate_topology,
                    weymouth_coefficient)
from .coupling import CouplingContext, CouplingSystem, assemble_coupling
from .opf import (PowerState, build_opf, check_soc_exactness,
                  generation_cost, solve_opf)
from .ogf import (GasState, SsaParams, SsaState, build_relaxation,
                  purchase_cost, run_ssa, solve_relaxation,
                  weymouth_residuals)
from .admm import (AdmmParams, AdmmState, run_admm, solve_centralized,
                   solve_centralized_relaxation)
from .oracle import (FeasibilityReport, OracleError, brute_force_optimum,
                     feasibility_report, gas_forward_solve,
                     radial_power_flow)

__version__ = "0.1.0"

__all__ = [
    "ConicError", "ConicProgram", "ConicSolution", "LinExpr", "SolverOptions",
    "Bases", "CaseError", "CoupledCase", "GasNetwork", "Horizon",
    "PowerNetwork", "case_from_dict", "case_to_dict", "linepack_coefficient",
    "load_case", "save_case", "truncate_horizon", "validate_topology",
    "weymouth_coefficient",
    "CouplingContext", "CouplingSystem", "assemble_coupling",
    "PowerState", "build_opf", "check_soc_exactness", "generation_cost",
    "solve_opf",
    "GasState", "SsaParams", "SsaState", "build_relaxation", "purchase_cost",
    "run_ssa", "solve_relaxation", "weymouth_residuals",
    "AdmmParams", "AdmmState", "run_admm", "solve_centralized",
    "solve_centralized_relaxation",
    "FeasibilityReport", "OracleError", "brute_force_optimum",
    "feasibility_report", "gas_forward_solve", "radial_power_flow",
]
