"""Oracles: exact forward solves, brute-force optima, violation reports."""

import math

import pytest

from ogpf import admm, model, ogf, opf, oracle
from ogpf.model import Compressor, GasNetwork, GasNode, Pipeline, Retailer
from ogpf.oracle import (FeasibilityReport, OracleError, brute_force_optimum,
                         feasibility_report, gas_forward_solve,
                         radial_power_flow)

from conftest import tiny_coupled_case, tiny_coupled_doc

SQRT3 = math.sqrt(3.0)


def pipe(pid, a, b, phi=1.0, k_pack=1.0):
    return Pipeline(pid, a, b, 1, 1, 1, 1, 1, 1, 1, 1, phi, k_pack, 0.0)


def net(nodes, pipelines=(), compressors=(), retailers=(),
        convention="inflow-deficit"):
    return GasNetwork(nodes=tuple(nodes), pipelines=tuple(pipelines),
                      compressors=tuple(compressors),
                      retailers=tuple(retailers), loads=(),
                      loss_convention=convention)


def two_node():
    return net([GasNode("A", 0.1, 5.0), GasNode("B", 0.1, 5.0)],
               pipelines=[pipe("L", "A", "B")],
               retailers=[Retailer("W", "A", 0.0, 50.0, "pr")])


class TestForwardSolve:
    def test_two_node_analytic(self):
        st = gas_forward_solve(two_node(), {"B": 1.0}, "A", 2.0)
        assert st.yin[("L", 0)] == pytest.approx(1.0)
        assert st.yout[("L", 0)] == pytest.approx(1.0)
        assert st.u[("B", 0)] == pytest.approx(SQRT3, rel=1e-12)
        assert st.yw[("W", 0)] == pytest.approx(1.0)

    def test_zero_demand_uniform_pressure(self):
        st = gas_forward_solve(two_node(), {}, "A", 1.7)
        assert st.u[("B", 0)] == pytest.approx(1.7)
        assert st.yin[("L", 0)] == 0.0

    def test_flow_satisfies_weymouth_exactly(self):
        g = two_node()
        st = gas_forward_solve(g, {"B": 0.73}, "A", 2.0)
        y = st.yin[("L", 0)]
        drop = st.u[("A", 0)] ** 2 - st.u[("B", 0)] ** 2
        assert y * y == pytest.approx(g.pipelines[0].phi * drop, rel=1e-12)

    def test_pressure_infeasible_raises(self):
        with pytest.raises(OracleError, match="pressure-infeasible"):
            gas_forward_solve(two_node(), {"B": 3.0}, "A", 2.0)

    def test_reverse_flow_raises(self):
        with pytest.raises(OracleError, match="reverse"):
            gas_forward_solve(two_node(), {"B": -1.0}, "A", 2.0)

    def test_non_tree_rejected(self):
        g = net([GasNode("A", 0.1, 5.0), GasNode("B", 0.1, 5.0)],
                pipelines=[pipe("L1", "A", "B"), pipe("L2", "A", "B")])
        with pytest.raises(OracleError, match="tree"):
            gas_forward_solve(g, {}, "A", 2.0)

    def test_unknown_root(self):
        with pytest.raises(OracleError, match="root"):
            gas_forward_solve(two_node(), {}, "Z", 2.0)

    def _comp_net(self, drive, convention="inflow-deficit"):
        return net([GasNode("A", 0.1, 5.0), GasNode("B", 0.1, 3.0)],
                   compressors=[Compressor("C", "A", "B", 1.4, 10.0, 0.1,
                                           drive)],
                   convention=convention)

    def test_compressor_boost_capped_by_bound(self):
        g = self._comp_net("electric")
        st = gas_forward_solve(g, {"B": 1.0}, "A", 2.0)
        assert st.u[("B", 0)] == pytest.approx(min(1.4 * 2.0, 3.0))
        # electric drive conserves gas
        assert st.yin[("C", 0)] == pytest.approx(st.yout[("C", 0)])

    def test_gas_drive_inflow_deficit(self):
        g = self._comp_net("gas")
        st = gas_forward_solve(g, {"B": 1.0}, "A", 2.0)
        assert st.yin[("C", 0)] == pytest.approx(0.9 * st.yout[("C", 0)])

    def test_gas_drive_outflow_deficit(self):
        g = self._comp_net("gas", convention="outflow-deficit")
        st = gas_forward_solve(g, {"B": 1.0}, "A", 2.0)
        assert st.yin[("C", 0)] == pytest.approx(st.yout[("C", 0)] / 0.9)


class TestRadialPowerFlow:
    def test_zero_load_flat(self):
        case = tiny_coupled_case(demand_mw=0.0)
        st = radial_power_flow(case, {}, 0)
        assert st.p[("G1", 0)] == pytest.approx(0.0, abs=1e-10)
        assert st.nu[("P2", 0)] == pytest.approx(1.0, abs=1e-10)

    def test_losses_close_the_balance(self):
        case = tiny_coupled_case(demand_mw=1.0)
        st = radial_power_flow(case, {}, 0)
        line = case.power.lines[0]
        pl, ql = case.power_load_at("P2", 0)
        assert st.pf[("B1", 0)] - line.r * st.isq[("B1", 0)] == \
            pytest.approx(pl, abs=1e-10)
        assert st.p[("G1", 0)] == pytest.approx(st.pf[("B1", 0)], abs=1e-10)

    def test_injection_offsets_slack(self):
        case = tiny_coupled_case(demand_mw=1.0)
        a = radial_power_flow(case, {}, 0)
        b = radial_power_flow(case, {"G2": (0.5, 0.0)}, 0)
        assert b.p[("G1", 0)] < a.p[("G1", 0)] - 0.45

    def test_extra_load_increases_slack(self):
        case = tiny_coupled_case(demand_mw=1.0)
        a = radial_power_flow(case, {}, 0)
        b = radial_power_flow(case, {}, 0, extra_load={"P2": 0.2})
        assert b.p[("G1", 0)] - a.p[("G1", 0)] == pytest.approx(0.2, abs=1e-3)


class TestBruteForce:
    def test_matches_centralized_on_tiny(self):
        case = tiny_coupled_case(demand_mw=1.0, gas_demand=0.3)
        obj, _ = brute_force_optimum(case, resolution=0.01)
        _, _, obj_c, _ = admm.solve_centralized(case)
        assert abs(obj - obj_c) / obj_c <= 0.01

    def test_upper_bounds_any_feasible_sample(self):
        # the enumerated optimum is at least as cheap as hand-picked
        # feasible grid dispatches
        case = tiny_coupled_case(demand_mw=1.0, gas_demand=0.3)
        obj, _ = brute_force_optimum(case, resolution=0.01)
        slack = case.power.nongas_dgs[0]
        w = case.gas.retailers[0]
        for p_gas in (0.0, 0.5, 1.0):
            st = radial_power_flow(case, {"G2": (p_gas, 0.0)}, 0)
            p_slack = st.p[("G1", 0)]
            fuel = p_gas / case.power.gas_dgs[0].beta
            supply = case.gas_load_at("N2", 0) + fuel
            cost = slack.cost_a * p_slack**2 + slack.cost_b * p_slack \
                + case.gas_price(w, 0) * supply
            assert obj <= case.horizon.periods * cost + 1e-6

    def test_infeasible_demand(self):
        case = tiny_coupled_case(gas_demand=30.0)
        with pytest.raises(OracleError, match="no feasible grid point"):
            brute_force_optimum(case, resolution=0.1)


class TestFeasibilityReport:
    def test_record_semantics(self):
        rep = FeasibilityReport()
        rep.record("bounds", -1.0, 5.0)  # satisfied: clamped to zero
        assert rep.macv == 0.0
        rep.record("bounds", 0.2, 4.0)
        assert rep.macv == pytest.approx(0.2)
        assert rep.mrcv == pytest.approx(0.05)
        rep.record("balance", 0.3, 0.1)  # |rhs| < 1 uses denominator 1
        assert rep.mrcv == pytest.approx(0.3)

    def test_converged_solution_clean(self):
        case = tiny_coupled_case(demand_mw=1.0, gas_demand=0.3)
        ps, gs, _, _ = admm.solve_centralized(case)
        rep = feasibility_report(case, ps, gs)
        assert rep.macv <= 1e-5
        assert "MACV" in rep.to_text()

    def test_forward_solve_is_feasible_gas(self):
        # states assembled from the exact oracles violate nothing material
        case = tiny_coupled_case(demand_mw=0.0, gas_demand=0.3)
        demands = {"N1": 0.0, "N2": 0.3}
        gst = gas_forward_solve(case.gas, demands, "N1", 1.0)
        pst = radial_power_flow(case, {}, 0)
        rep = feasibility_report(case, pst, gst)
        fams = {f: v for f, v in rep.families.items()}
        assert fams.get("weymouth", (0.0, 0.0))[0] <= 1e-9
        assert fams.get("gasbalance", (0.0, 0.0))[0] <= 1e-9

    def test_csv_output(self, tmp_path):
        rep = FeasibilityReport()
        rep.record("bounds", 0.1, 2.0)
        path = tmp_path / "rep.csv"
        rep.to_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "family,macv_pu,mrcv"
        assert lines[1].startswith("all,")
