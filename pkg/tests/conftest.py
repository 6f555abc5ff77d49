"""Shared fixtures: bundled case locations and small synthetic case builders."""

import copy
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).parent))

from ogpf import model

CASES_DIR = pathlib.Path(model.__file__).parent / "cases"

_PIPE_PHYS = dict(friction=0.01, gas_constant=0.05, temperature=280.0,
                  compressibility=0.8, density=0.7, unit_constant=1.2)


def tiny_case_doc():
    """Minimal valid coupled case: 2 buses, 3 gas nodes, 2 periods."""
    return copy.deepcopy({
        "bases": {"power_mva": 1.0, "pressure_bar": 10.0, "gas_ksm3h": 1.0},
        "power": {
            "reference_bus": "P1",
            "buses": [{"id": "P1"}, {"id": "P2"}],
            "lines": [{"id": "B1", "from": "P1", "to": "P2",
                       "r": 0.001, "x": 0.001, "i_max": 10.0}],
            "nongas_dgs": [{"id": "G1", "bus": "P1", "p_min": 0.0,
                            "p_max": 10.0, "q_min": -5.0, "q_max": 5.0,
                            "cost_a": 1.0, "cost_b": 40.0}],
            "gas_dgs": [{"id": "G2", "bus": "P2", "p_min": 0.0, "p_max": 2.0,
                         "q_min": -1.0, "q_max": 1.0, "beta": 3.5}],
            "loads": [{"id": "D1", "bus": "P2", "profile": "pd_P2"}],
        },
        "gas": {
            "nodes": [{"id": "N1", "p_min": 8.0, "p_max": 12.0},
                      {"id": "N2", "p_min": 5.0, "p_max": 12.0},
                      {"id": "N3", "p_min": 5.0, "p_max": 12.0}],
            "pipelines": [{"id": "L1", "from": "N2", "to": "N3",
                           "length": 10.0, "diameter": 0.6, **_PIPE_PHYS}],
            "compressors": [{"id": "C1", "from": "N1", "to": "N2",
                             "gamma": 1.3, "y_max": 10.0, "alpha": 0.04,
                             "drive": "electric", "chi": 0.2}],
            "retailers": [{"id": "W1", "node": "N1", "y_min": 0.0,
                           "y_max": 10.0, "price_profile": "price_W1"}],
            "loads": [{"id": "DN2", "node": "N2", "profile": "gd_N2"}],
        },
        "coupling": {"gas_dg_nodes": {"G2": "N2"},
                     "compressor_buses": {"C1": "P2"}},
        "horizon": {"periods": 2, "period_hours": 1.0,
                    "terminal_linepack": "free",
                    "profiles": {"pd_P2": [1.0, 0.8],
                                 "gd_N2": [0.5, 0.4],
                                 "price_W1": [100.0, 120.0]}},
    })


def single_pipe_doc(demand=1.0, head=(10.0, 12.0), tail=(5.0, 12.0),
                    periods=1, price=100.0, diameter=0.6, length=10.0,
                    terminal="free", initial_linepack=None):
    """Gas-only fixture: retailer - pipe - load, no coupling.

    Pressure windows are controlled through the node bounds; setting a
    degenerate window fixes the pressure.
    """
    pipe = {"id": "L1", "from": "N1", "to": "N2", "length": length,
            "diameter": diameter, **_PIPE_PHYS}
    if initial_linepack is not None:
        pipe["initial_linepack"] = initial_linepack
    return {
        "bases": {"power_mva": 1.0, "pressure_bar": 10.0, "gas_ksm3h": 1.0},
        "power": {
            "reference_bus": "P1",
            "buses": [{"id": "P1"}],
            "lines": [],
            "nongas_dgs": [{"id": "G1", "bus": "P1", "p_min": 0.0,
                            "p_max": 5.0, "q_min": -2.0, "q_max": 2.0,
                            "cost_a": 0.0, "cost_b": 40.0}],
            "gas_dgs": [],
            "loads": [],
        },
        "gas": {
            "nodes": [{"id": "N1", "p_min": head[0], "p_max": head[1]},
                      {"id": "N2", "p_min": tail[0], "p_max": tail[1]}],
            "pipelines": [pipe],
            "compressors": [],
            "retailers": [{"id": "W1", "node": "N1", "y_min": 0.0,
                           "y_max": 50.0, "price_profile": "price_W1"}],
            "loads": [{"id": "DN2", "node": "N2", "profile": "gd_N2"}],
        },
        "coupling": {},
        "horizon": {"periods": periods, "period_hours": 1.0,
                    "terminal_linepack": terminal,
                    "profiles": {"gd_N2": [demand] * periods,
                                 "price_W1": [price] * periods}},
    }


def single_pipe_case(**kw):
    return model.case_from_dict(single_pipe_doc(**kw), name="single-pipe")


def tiny_coupled_doc(periods=1, demand_mw=1.0, gas_demand=0.3,
                     price=100.0, beta=3.5):
    """Smallest coupled instance the brute-force oracle accepts:
    2 buses / 2 gas nodes, one gas-fired DG, one retailer.

    The terminal linepack is pinned to its initial value so the optimum is
    a steady flow, which is what the brute-force oracle enumerates.
    """
    return {
        "bases": {"power_mva": 1.0, "pressure_bar": 10.0, "gas_ksm3h": 1.0},
        "power": {
            "reference_bus": "P1",
            "buses": [{"id": "P1"}, {"id": "P2"}],
            "lines": [{"id": "B1", "from": "P1", "to": "P2",
                       "r": 0.001, "x": 0.001, "i_max": 10.0}],
            "nongas_dgs": [{"id": "G1", "bus": "P1", "p_min": 0.0,
                            "p_max": 10.0, "q_min": -5.0, "q_max": 5.0,
                            "cost_a": 5.0, "cost_b": 60.0}],
            "gas_dgs": [{"id": "G2", "bus": "P2", "p_min": 0.0, "p_max": 2.0,
                         "q_min": -1.0, "q_max": 1.0, "beta": beta}],
            "loads": [{"id": "D1", "bus": "P2", "profile": "pd"}],
        },
        "gas": {
            "nodes": [{"id": "N1", "p_min": 8.0, "p_max": 12.0},
                      {"id": "N2", "p_min": 5.0, "p_max": 12.0}],
            "pipelines": [{"id": "L1", "from": "N1", "to": "N2",
                           "length": 10.0, "diameter": 0.6, **_PIPE_PHYS}],
            "compressors": [],
            "retailers": [{"id": "W1", "node": "N1", "y_min": 0.0,
                           "y_max": 20.0, "price_profile": "price"}],
            "loads": [{"id": "DN2", "node": "N2", "profile": "gd"}],
        },
        "coupling": {"gas_dg_nodes": {"G2": "N2"}, "compressor_buses": {}},
        "horizon": {"periods": periods, "period_hours": 1.0,
                    "terminal_linepack": "equal-to-initial",
                    "profiles": {"pd": [demand_mw] * periods,
                                 "gd": [gas_demand] * periods,
                                 "price": [price] * periods}},
    }


def tiny_coupled_case(**kw):
    return model.case_from_dict(tiny_coupled_doc(**kw), name="tiny-coupled")
