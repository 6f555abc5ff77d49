"""Data model: physical coefficients, loading/validation, round-trips."""

import json
import math
from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as st

from ogpf import model
from ogpf.model import (CaseError, case_from_dict, case_to_dict,
                        linepack_coefficient, load_case, truncate_horizon,
                        validate_topology, weymouth_coefficient)

from conftest import CASES_DIR, tiny_case_doc


class TestCoefficients:
    def test_weymouth_unit_parameters(self):
        # all parameters 1 -> pi^2 / 16
        v = weymouth_coefficient(1, 1, 1, 1, 1, 1, 1)
        assert v == pytest.approx(math.pi**2 / 16.0, rel=1e-12)
        assert v == pytest.approx(0.61685027506808, rel=1e-10)

    def test_linepack_unit_parameters(self):
        assert linepack_coefficient(1, 1, 1, 1, 1, 1) == \
            pytest.approx(math.pi / 4.0, rel=1e-12)

    def test_diameter_fifth_power(self):
        base = weymouth_coefficient(10, 0.5, 0.01, 0.05, 280, 0.8, 0.7)
        double = weymouth_coefficient(10, 1.0, 0.01, 0.05, 280, 0.8, 0.7)
        assert double / base == pytest.approx(2.0**5, rel=1e-12)

    def test_synthetic_pipe_value(self):
        # phi = pi^2 * 1.2^2 * 0.5^5 / (16*10*0.01*0.05*280*0.8*0.49)
        got = weymouth_coefficient(10, 0.5, 0.01, 0.05, 280, 0.8, 0.7,
                                   unit_constant=1.2)
        num = math.pi**2 * 1.44 * 0.5**5
        den = 16 * 10 * 0.01 * 0.05 * 280 * 0.8 * 0.49
        assert got == pytest.approx(num / den, rel=1e-12)

    def test_nonpositive_rejected(self):
        with pytest.raises(ValueError):
            weymouth_coefficient(0, 1, 1, 1, 1, 1, 1)
        with pytest.raises(ValueError):
            linepack_coefficient(1, -1, 1, 1, 1, 1)

    @given(d1=st.floats(0.1, 2.0), d2=st.floats(0.1, 2.0))
    def test_weymouth_monotone_in_diameter(self, d1, d2):
        lo, hi = sorted((d1, d2))
        a = weymouth_coefficient(10, lo, 0.01, 0.05, 280, 0.8, 0.7)
        b = weymouth_coefficient(10, hi, 0.01, 0.05, 280, 0.8, 0.7)
        assert a <= b

    @given(x1=st.floats(0.5, 50.0), x2=st.floats(0.5, 50.0))
    def test_linepack_monotone_in_length(self, x1, x2):
        lo, hi = sorted((x1, x2))
        a = linepack_coefficient(lo, 0.5, 0.05, 280, 0.8, 0.7)
        b = linepack_coefficient(hi, 0.5, 0.05, 280, 0.8, 0.7)
        assert a <= b


class TestLoading:
    def test_bundled_small_case_counts(self):
        case = load_case(CASES_DIR / "power13gas7.json")
        assert len(case.power.buses) == 13
        assert len(case.power.lines) == 12
        assert len(case.gas.nodes) == 7
        assert len(case.gas.pipelines) + len(case.gas.compressors) == 6
        assert case.horizon.periods == 24

    def test_bundled_large_case_counts(self):
        case = load_case(CASES_DIR / "power123gas20.json")
        assert len(case.power.buses) == 123
        assert len(case.power.lines) == 122
        assert len(case.gas.nodes) == 20
        assert len(case.gas.compressors) == 3

    def test_per_unit_conversion(self):
        doc = tiny_case_doc()
        case = case_from_dict(doc)
        sb = doc["bases"]["power_mva"]
        gb = doc["bases"]["gas_ksm3h"]
        g = case.power.gas_dgs[0]
        raw = next(d for d in doc["power"]["gas_dgs"] if d["id"] == g.id)
        assert g.p_max == pytest.approx(raw["p_max"] / sb)
        assert g.beta == pytest.approx(raw["beta"] * gb / sb)
        w = case.gas.retailers[0]
        t = 0
        raw_price = doc["horizon"]["profiles"][w.price_profile][t]
        assert case.gas_price(w, t) == pytest.approx(raw_price * gb)

    def test_round_trip(self):
        doc = tiny_case_doc()
        case = case_from_dict(doc)
        case2 = case_from_dict(case_to_dict(case))
        assert case2.power == case.power
        assert case2.gas == case.gas
        assert case2.horizon == case.horizon

    def test_missing_file(self, tmp_path):
        with pytest.raises(CaseError):
            load_case(tmp_path / "nope.json")

    def test_malformed_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        with pytest.raises(CaseError):
            load_case(p)

    def test_missing_field(self):
        doc = tiny_case_doc()
        del doc["power"]["reference_bus"]
        with pytest.raises(CaseError, match="reference_bus"):
            case_from_dict(doc)

    def test_profile_length_mismatch(self):
        doc = tiny_case_doc()
        doc["horizon"]["profiles"]["pd_P2"] = [1.0]
        with pytest.raises(CaseError, match="entries"):
            case_from_dict(doc)

    def test_shared_profile_normalized_once(self):
        doc = tiny_case_doc()
        doc["power"]["loads"].append(
            {"id": "D2", "bus": "P2", "profile": "pd_P2"})
        case = case_from_dict(doc)
        raw = doc["horizon"]["profiles"]["pd_P2"][0]
        # two loads share one profile: each contributes the full value
        p, _ = case.power_load_at("P2", 0)
        assert p == pytest.approx(2 * raw / doc["bases"]["power_mva"])

    def test_truncate_horizon(self):
        case = case_from_dict(tiny_case_doc())
        c1 = truncate_horizon(case, 1)
        assert c1.horizon.periods == 1
        assert all(len(v) == 1 for v in c1.horizon.profiles.values())
        with pytest.raises(CaseError):
            truncate_horizon(case, 0)

    def test_reactive_load_default_power_factor(self):
        case = case_from_dict(tiny_case_doc())
        p, q = case.power_load_at("P2", 0)
        assert q == pytest.approx(p * math.tan(math.acos(0.95)))


class TestValidation:
    def test_cycle_detected(self):
        doc = tiny_case_doc()
        doc["power"]["lines"].append(
            {"id": "BX", "from": "P2", "to": "P1", "r": 0.001, "x": 0.001,
             "i_max": 5.0})
        with pytest.raises(CaseError, match="tree requires"):
            case_from_dict(doc)

    def test_disconnected_bus_detected(self):
        doc = tiny_case_doc()
        doc["power"]["buses"].append({"id": "P9"})
        with pytest.raises(CaseError):
            case_from_dict(doc)

    def test_line_orientation_away_from_reference(self):
        doc = tiny_case_doc()
        ln = doc["power"]["lines"][0]
        ln["from"], ln["to"] = ln["to"], ln["from"]
        with pytest.raises(CaseError, match="reachable"):
            case_from_dict(doc)

    def test_pressure_bound_ordering(self):
        doc = tiny_case_doc()
        doc["gas"]["nodes"][0]["p_min"] = 20.0
        with pytest.raises(CaseError, match="ordering"):
            case_from_dict(doc)

    def test_gas_dg_without_fuel_node(self):
        doc = tiny_case_doc()
        doc["coupling"]["gas_dg_nodes"] = {}
        with pytest.raises(CaseError, match="fuel node"):
            case_from_dict(doc)

    def test_gamma_below_one_rejected(self):
        doc = tiny_case_doc()
        doc["gas"]["compressors"][0]["gamma"] = 0.9
        with pytest.raises(CaseError, match="gamma"):
            case_from_dict(doc)

    def test_gas_drive_warning_under_inflow_deficit(self):
        doc = tiny_case_doc()
        c = doc["gas"]["compressors"][0]
        c["drive"] = "gas"
        del doc["coupling"]["compressor_buses"][c["id"]]
        case = case_from_dict(doc)
        warnings = [m for lvl, m in validate_topology(case)
                    if lvl == "warning"]
        assert any("inflow-deficit" in m for m in warnings)

    def test_negative_demand_profile_rejected(self):
        doc = tiny_case_doc()
        doc["horizon"]["profiles"]["gd_N2"][0] = -1.0
        with pytest.raises(CaseError, match="negative"):
            case_from_dict(doc)

    def test_negative_price_profile_allowed(self):
        doc = tiny_case_doc()
        doc["horizon"]["profiles"]["price_W1"][0] = -5.0
        case_from_dict(doc)  # no error

    def test_bundled_cases_validate_clean(self):
        for name in ("power13gas7.json", "power123gas20.json"):
            case = load_case(CASES_DIR / name)
            assert [m for lvl, m in validate_topology(case)
                    if lvl == "error"] == []


class TestDefaults:
    def test_initial_linepack_default_midpoint(self):
        doc = tiny_case_doc()
        for p in doc["gas"]["pipelines"]:
            p.pop("initial_linepack", None)
        case = case_from_dict(doc)
        pipe = case.gas.pipelines[0]
        head = next(n for n in case.gas.nodes if n.id == pipe.from_node)
        tail = next(n for n in case.gas.nodes if n.id == pipe.to_node)
        mid = ((head.p_min + head.p_max) / 2 + (tail.p_min + tail.p_max) / 2) / 2
        assert pipe.m0 == pytest.approx(pipe.k_pack * mid)

    def test_alpha_default(self):
        doc = tiny_case_doc()
        doc["gas"]["compressors"][0].pop("alpha", None)
        case = case_from_dict(doc)
        assert case.gas.compressors[0].alpha == pytest.approx(0.04)
