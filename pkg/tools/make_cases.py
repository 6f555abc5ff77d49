"""Generates the bundled synthetic cases.

    python3 tools/make_cases.py

Writes src/ogpf/cases/power13gas7.json and power123gas20.json.  The cases
are synthetic analogues of typical distribution test feeders: radial power
networks with a mix of substation and gas-fired units, tree gas networks
with electric-driven compressors, daily demand/price shapes with a price
valley overnight and peaks in the morning and evening.
"""

import json
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from ogpf import model  # noqa: E402

OUT = os.path.join(os.path.dirname(__file__), "..", "src", "ogpf", "cases")

# 24-hour shapes (unitless multipliers)
POWER_SHAPE = [0.60, 0.55, 0.52, 0.50, 0.52, 0.58, 0.68, 0.80, 0.90, 0.95,
               0.97, 0.95, 0.93, 0.92, 0.90, 0.92, 0.96, 1.00, 0.98, 0.95,
               0.90, 0.82, 0.72, 0.65]
GAS_SHAPE = [0.62, 0.55, 0.50, 0.48, 0.50, 0.60, 0.75, 0.88, 0.95, 1.00,
             0.97, 0.90, 0.85, 0.82, 0.80, 0.84, 0.92, 1.00, 0.98, 0.96,
             0.90, 0.80, 0.72, 0.66]
# price roughly tracks the gas demand: cheap overnight, dear at the peaks
PRICE_SHAPE = [0.68, 0.62, 0.58, 0.56, 0.58, 0.66, 0.80, 0.92, 0.98, 1.00,
               0.97, 0.92, 0.88, 0.86, 0.84, 0.88, 0.94, 1.00, 0.98, 0.96,
               0.92, 0.84, 0.76, 0.70]

PIPE_COMMON = dict(friction=0.01, gas_constant=0.05, temperature=280.0,
                   compressibility=0.8, density=0.7, unit_constant=1.2)


def scaled(shape, amp):
    return [round(amp * v, 6) for v in shape]


def make_small():
    buses = [{"id": f"P{i}", "v_min": 0.94, "v_max": 1.06}
             for i in range(1, 14)]
    edges = [("P1", "P2"), ("P2", "P3"), ("P3", "P4"), ("P4", "P5"),
             ("P5", "P6"), ("P3", "P7"), ("P7", "P8"), ("P8", "P9"),
             ("P2", "P10"), ("P10", "P11"), ("P11", "P12"), ("P12", "P13")]
    lines = [{"id": f"B{i+1}", "from": fr, "to": to,
              "r": 0.0010 + 0.0002 * (i % 3), "x": 0.0008 + 0.0002 * (i % 2),
              "i_max": 8.0}
             for i, (fr, to) in enumerate(edges)]
    # peak MW per load bus
    peaks = {"P2": 0.5, "P3": 0.4, "P4": 0.5, "P5": 0.4, "P6": 0.3,
             "P7": 0.4, "P8": 0.5, "P9": 0.4, "P10": 0.4, "P11": 0.5,
             "P12": 0.4, "P13": 0.3}
    loads = [{"id": f"D{b}", "bus": b, "profile": f"pd_{b}"} for b in peaks]
    profiles = {f"pd_{b}": scaled(POWER_SHAPE, amp) for b, amp in peaks.items()}

    power = {
        "reference_bus": "P1",
        "buses": buses,
        "lines": lines,
        "nongas_dgs": [
            {"id": "G1", "bus": "P1", "p_min": 0.0, "p_max": 15.0,
             "q_min": -8.0, "q_max": 8.0,
             "cost_a": 2.0, "cost_b": 40.0, "cost_c": 0.0},
        ],
        "gas_dgs": [
            {"id": "G2", "bus": "P7", "p_min": 0.0, "p_max": 3.0,
             "q_min": -2.0, "q_max": 2.0, "beta": 3.5},
            {"id": "G3", "bus": "P10", "p_min": 0.0, "p_max": 3.0,
             "q_min": -2.0, "q_max": 2.0, "beta": 3.0},
        ],
        "loads": loads,
    }

    nodes = [{"id": "N1", "p_min": 8.0, "p_max": 12.0}] + \
        [{"id": f"N{i}", "p_min": 5.0, "p_max": 12.0} for i in range(2, 8)]
    pipelines = [
        {"id": "L1", "from": "N2", "to": "N3", "length": 10.0,
         "diameter": 0.62, **PIPE_COMMON},
        {"id": "L2", "from": "N3", "to": "N4", "length": 8.0,
         "diameter": 0.50, **PIPE_COMMON},
        {"id": "L3", "from": "N2", "to": "N5", "length": 12.0,
         "diameter": 0.55, **PIPE_COMMON},
        {"id": "L4", "from": "N6", "to": "N7", "length": 9.0,
         "diameter": 0.50, **PIPE_COMMON},
    ]
    compressors = [
        {"id": "C1", "from": "N1", "to": "N2", "gamma": 1.3, "y_max": 10.0,
         "alpha": 0.04, "drive": "electric", "chi": 0.2},
        {"id": "C2", "from": "N5", "to": "N6", "gamma": 1.3, "y_max": 10.0,
         "alpha": 0.04, "drive": "electric", "chi": 0.2},
    ]
    gas = {
        "nodes": nodes,
        "pipelines": pipelines,
        "compressors": compressors,
        "retailers": [
            {"id": "W1", "node": "N1", "y_min": 0.0, "y_max": 12.0,
             "price_profile": "price_W1"},
            {"id": "W2", "node": "N5", "y_min": 0.0, "y_max": 6.0,
             "price_profile": "price_W2"},
        ],
        "loads": [
            {"id": "DN3", "node": "N3", "profile": "gd_N3"},
            {"id": "DN4", "node": "N4", "profile": "gd_N4"},
            {"id": "DN7", "node": "N7", "profile": "gd_N7"},
        ],
    }
    # peak kSm3/h per gas load; prices in $ per kSm3
    profiles["gd_N3"] = scaled(GAS_SHAPE, 1.5)
    profiles["gd_N4"] = scaled(GAS_SHAPE, 1.0)
    profiles["gd_N7"] = scaled(GAS_SHAPE, 1.2)
    profiles["price_W1"] = scaled(PRICE_SHAPE, 180.0)
    profiles["price_W2"] = scaled(PRICE_SHAPE, 195.0)

    return {
        "bases": {"power_mva": 1.0, "pressure_bar": 10.0, "gas_ksm3h": 1.0},
        "power": power,
        "gas": gas,
        "coupling": {
            "gas_dg_nodes": {"G2": "N3", "G3": "N1"},
            "compressor_buses": {"C1": "P4", "C2": "P5"},
        },
        "horizon": {
            "periods": 24,
            "period_hours": 1.0,
            "terminal_linepack": "free",
            "profiles": profiles,
        },
    }


def make_large():
    nb = 123
    buses = [{"id": f"P{i}", "v_min": 0.93, "v_max": 1.07}
             for i in range(1, nb + 1)]
    # three long laterals off the substation with regular sub-branches
    parent = {}
    mains = {2: 1, 43: 1, 84: 1}
    for i in range(2, nb + 1):
        if i in mains:
            parent[i] = mains[i]
        elif i % 7 == 0:
            parent[i] = i - 3  # short spur
        else:
            parent[i] = i - 1
    # keep each lateral self-contained
    parent[44] = 43
    parent[85] = 84
    lines = []
    for i in sorted(parent):
        lines.append({"id": f"B{i}", "from": f"P{parent[i]}", "to": f"P{i}",
                      "r": 0.0002 + 0.0001 * (i % 3), "x": 0.0002 + 0.0001 * (i % 2),
                      "i_max": 40.0})
    # every non-substation bus carries load: fully dead spur laterals leave
    # the current variables on their lines unpriced, which breaks the
    # exactness of the cone relaxation at solver tolerance
    loads, profiles = [], {}
    for i in range(2, nb + 1):
        if i % 2 == 0:
            amp = 0.35 + 0.15 * (i % 4)  # 0.35 .. 0.80 MW peak
        else:
            amp = 0.08 + 0.04 * (i % 3)  # small residual feeder load
        loads.append({"id": f"D{i}", "bus": f"P{i}", "profile": f"pd_{i}"})
        profiles[f"pd_{i}"] = scaled(POWER_SHAPE, amp)

    power = {
        "reference_bus": "P1",
        "buses": buses,
        "lines": lines,
        "nongas_dgs": [
            {"id": "G1", "bus": "P1", "p_min": 0.0, "p_max": 60.0,
             "q_min": -30.0, "q_max": 30.0,
             "cost_a": 0.6, "cost_b": 38.0},
            {"id": "G2", "bus": "P30", "p_min": 0.0, "p_max": 6.0,
             "q_min": -4.0, "q_max": 4.0, "cost_a": 3.0, "cost_b": 52.0},
            {"id": "G3", "bus": "P70", "p_min": 0.0, "p_max": 6.0,
             "q_min": -4.0, "q_max": 4.0, "cost_a": 3.0, "cost_b": 55.0},
            {"id": "G4", "bus": "P110", "p_min": 0.0, "p_max": 6.0,
             "q_min": -4.0, "q_max": 4.0, "cost_a": 3.0, "cost_b": 50.0},
        ],
        "gas_dgs": [
            {"id": f"GG{j}", "bus": b, "p_min": 0.0, "p_max": 4.0,
             "q_min": -2.5, "q_max": 2.5, "beta": beta}
            for j, (b, beta) in enumerate(
                [("P15", 3.5), ("P25", 3.2), ("P55", 3.4), ("P65", 3.0),
                 ("P95", 3.3), ("P105", 3.6)], start=1)
        ],
        "loads": loads,
    }

    nn = 20
    nodes = [{"id": "M1", "p_min": 8.0, "p_max": 12.0},
             {"id": "M11", "p_min": 8.0, "p_max": 12.0}] + \
        [{"id": f"M{i}", "p_min": 5.0, "p_max": 12.0}
         for i in range(2, nn + 1) if i != 11]
    # two subtrees rooted at the retailer nodes M1 and M11, bridged by a
    # compressor so the whole network is one tree
    gparent = {i: i - 1 for i in range(2, nn + 1)}
    gparent[11] = 2  # M2 -> M11 bridge
    gparent[15] = 12
    gparent[18] = 13
    comp_edges = {11}  # M2->M11 bridge is a compressor
    pipelines, compressors = [], []
    ci = 0
    for i in sorted(gparent):
        fr, to = f"M{gparent[i]}", f"M{i}"
        if i in comp_edges or i in (6, 14):
            ci += 1
            compressors.append({"id": f"C{ci}", "from": fr, "to": to,
                                "gamma": 1.3, "y_max": 20.0, "alpha": 0.04,
                                "drive": "electric", "chi": 0.2})
        else:
            pipelines.append({"id": f"L{i}", "from": fr, "to": to,
                              "length": 8.0 + (i % 5) * 2.0,
                              "diameter": 0.88 if i <= 5 else 0.74 + 0.02 * (i % 4),
                              **dict(PIPE_COMMON, friction=0.001,
                                     gas_constant=0.5)})
    gas_load_nodes = [3, 5, 7, 9, 10, 13, 16, 19, 20]
    gloads = []
    for i in gas_load_nodes:
        amp = 0.8 + 0.2 * (i % 3)
        gloads.append({"id": f"DM{i}", "node": f"M{i}", "profile": f"gd_{i}"})
        profiles[f"gd_{i}"] = scaled(GAS_SHAPE, amp)
    profiles["price_W1"] = scaled(PRICE_SHAPE, 180.0)
    profiles["price_W2"] = scaled(PRICE_SHAPE, 190.0)

    gas = {
        "nodes": nodes,
        "pipelines": pipelines,
        "compressors": compressors,
        "retailers": [
            {"id": "W1", "node": "M1", "y_min": 0.0, "y_max": 30.0,
             "price_profile": "price_W1"},
            {"id": "W2", "node": "M11", "y_min": 0.0, "y_max": 20.0,
             "price_profile": "price_W2"},
        ],
        "loads": gloads,
    }

    gas_dg_nodes = {"GG1": "M3", "GG2": "M5", "GG3": "M8", "GG4": "M12",
                    "GG5": "M16", "GG6": "M19"}
    compressor_buses = {c["id"]: b
                        for c, b in zip(compressors, ["P10", "P50", "P90"])}

    return {
        "bases": {"power_mva": 1.0, "pressure_bar": 10.0, "gas_ksm3h": 1.0},
        "power": power,
        "gas": gas,
        "coupling": {"gas_dg_nodes": gas_dg_nodes,
                     "compressor_buses": compressor_buses},
        "horizon": {
            "periods": 24,
            "period_hours": 1.0,
            "terminal_linepack": "free",
            "profiles": profiles,
        },
    }


def set_initial_linepack(doc):
    """Initial linepacks from a forward solve at mean demand.

    Bound-midpoint defaults would pin chained pipes to identical average
    pressures under the equal-to-initial terminal rule, which contradicts
    the pressure drops the flows require; a consistent gradient avoids that.
    """
    from ogpf import oracle

    case = model.case_from_dict(doc, name="tmp")
    T = case.horizon.periods
    demands = {n.id: sum(case.gas_load_at(n.id, t) for t in range(T)) / T
               for n in case.gas.nodes}
    root = case.gas.retailers[0].node
    u0 = 0.95 * next(n for n in case.gas.nodes if n.id == root).p_max
    gs = oracle.gas_forward_solve(case.gas, demands, root, u0)
    gb = doc["bases"]["gas_ksm3h"]
    for p in doc["gas"]["pipelines"]:
        p["initial_linepack"] = round(gs.m[(p["id"], 0)] * gb, 6)


def main():
    os.makedirs(OUT, exist_ok=True)
    small = make_small()
    set_initial_linepack(small)
    for fname, doc in [("power13gas7.json", small),
                       ("power123gas20.json", make_large())]:
        case = model.case_from_dict(doc, name=fname)  # validates
        warnings = [m for lvl, m in model.validate_topology(case)
                    if lvl == "warning"]
        for w in warnings:
            print(f"  warning: {w}")
        path = os.path.join(OUT, fname)
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1)
        print(f"wrote {path}: {len(case.power.buses)} buses, "
              f"{len(case.gas.nodes)} gas nodes, T={case.horizon.periods}")


if __name__ == "__main__":
    main()
