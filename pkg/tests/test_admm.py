"""Coordination layer: coupling rows, dual updates, small end-to-end runs."""

import pytest

from ogpf import admm, model, ogf, opf
from ogpf.coupling import assemble_coupling
from ogpf.model import CaseError

from conftest import tiny_case_doc, tiny_coupled_case, tiny_coupled_doc


class TestCouplingRows:
    def test_fuel_row_with_known_beta(self):
        case = tiny_coupled_case(beta=0.5)
        system = assemble_coupling(case)
        row = next(r for r in system.rows if r.label == ("gasnode", "N2", 0))
        beta = case.power.gas_dgs[0].beta
        power_vals = {"p:G2:0": 1.2}
        gas_vals = {"yout:L1:0": 3.0}
        a_val = system.side_value(row, "a", power_vals)
        b_val = system.side_value(row, "b", gas_vals)
        # gas balance minus fuel offtake p/beta must close the fixed demand
        assert a_val == pytest.approx(-1.2 / beta)
        assert b_val == pytest.approx(3.0)
        gd = case.gas_load_at("N2", 0)
        assert row.rhs == pytest.approx(gd)

    def test_compressor_bus_row_present(self):
        case = model.case_from_dict(tiny_case_doc(), name="tiny")
        system = assemble_coupling(case)
        labels = {r.label for r in system.rows}
        assert ("bus", "P2", 0) in labels
        assert ("gasnode", "N2", 0) in labels

    def test_no_compressors_only_gasnode_rows(self):
        case = tiny_coupled_case()
        system = assemble_coupling(case)
        assert all(r.label[0] == "gasnode" for r in system.rows)

    def test_row_count_scales_with_periods(self):
        one = assemble_coupling(tiny_coupled_case(periods=1))
        two = assemble_coupling(tiny_coupled_case(periods=2))
        assert len(two.rows) == 2 * len(one.rows)

    def test_empty_coupling_rejected(self):
        doc = tiny_coupled_doc()
        doc["power"]["gas_dgs"] = []
        doc["coupling"]["gas_dg_nodes"] = {}
        case = model.case_from_dict(doc, name="uncoupled")
        with pytest.raises(CaseError, match="coupling"):
            assemble_coupling(case)
        with pytest.raises(CaseError):
            admm.run_admm(case)


class TestDualUpdate:
    def _state(self, duals, d):
        st = admm.AdmmState()
        st.duals = dict(duals)
        st.d = d
        return st

    def test_zero_residual_leaves_duals(self):
        st = self._state({("gasnode", "N2", 0): 3.5}, d=100.0)
        out = admm.update_dual(st, {("gasnode", "N2", 0): 0.0})
        assert out == {("gasnode", "N2", 0): 3.5}

    def test_step_is_weight_times_residual(self):
        st = self._state({("gasnode", "N2", 0): 0.0}, d=100.0)
        out = admm.update_dual(st, {("gasnode", "N2", 0): 0.01})
        assert out[("gasnode", "N2", 0)] == pytest.approx(1.0)

    def test_large_weight_small_residual(self):
        lbl = ("bus", "P2", 0)
        st = self._state({lbl: 2.0}, d=1000.0)
        out = admm.update_dual(st, {lbl: 1e-3})
        assert out[lbl] - 2.0 == pytest.approx(1.0)

    def test_dimension_mismatch_rejected(self):
        st = self._state({("gasnode", "N2", 0): 0.0}, d=100.0)
        with pytest.raises(ValueError):
            admm.update_dual(st, {("gasnode", "N2", 1): 0.0})

    def test_initial_gas_point_respects_retailer_floor(self):
        doc = tiny_coupled_doc()
        doc["gas"]["retailers"][0]["y_min"] = 0.2
        case = model.case_from_dict(doc, name="floor")
        pt = admm.initial_gas_point(case)
        assert pt.yw[("W1", 0)] == pytest.approx(0.2)


class TestRuns:
    def test_inactive_coupling_converges_immediately(self):
        # pin the gas DG to zero: both subproblems satisfy the coupling rows
        # on their own, so the very first residual check passes
        doc = tiny_coupled_doc(gas_demand=0.0)
        doc["power"]["gas_dgs"][0]["p_max"] = 1e-9
        case = model.case_from_dict(doc, name="inactive")
        _, _, st, conv = admm.run_admm(case)
        assert conv
        assert st.k <= 2

    def test_distributed_matches_centralized_tiny(self):
        case = tiny_coupled_case(demand_mw=1.0, gas_demand=0.3)
        _, _, obj_c, _ = admm.solve_centralized(case)
        ps, gs, st, conv = admm.run_admm(case)
        assert conv
        obj_d = opf.generation_cost(case, ps) + ogf.purchase_cost(case, gs)
        assert abs(obj_d - obj_c) / obj_c <= 0.005

    def test_convex_mode_converges(self):
        case = tiny_coupled_case()
        params = admm.AdmmParams(gas_mode="relaxation")
        _, _, st, conv = admm.run_admm(case, params=params)
        assert conv
        assert st.k <= 100

    def test_dual_update_identity_along_run(self):
        case = tiny_coupled_case()
        seen = []
        orig = admm.update_dual

        def spy(state, residuals):
            before = dict(state.duals)
            out = orig(state, residuals)
            seen.append((before, residuals, out, state.d))
            return out

        admm.update_dual = spy
        try:
            admm.run_admm(case)
        finally:
            admm.update_dual = orig
        assert seen
        for before, res, after, d in seen:
            for lbl in before:
                assert after[lbl] - before[lbl] == pytest.approx(d * res[lbl])

    def test_residual_history_matches_trace(self):
        case = tiny_coupled_case()
        trace = []
        _, _, st, conv = admm.run_admm(case, trace=trace)
        assert conv
        assert [r["residual"] for r in trace] == st.residual_history
        assert all(r["max_row"] in {row.label for row in
                                    assemble_coupling(case).rows}
                   for r in trace)

    def test_centralized_relaxation_lower_bound(self):
        case = tiny_coupled_case()
        _, _, sol = admm.solve_centralized_relaxation(case)
        _, _, obj_c, _ = admm.solve_centralized(case)
        assert sol.objective <= obj_c + 1e-6
