import logging

import numpy as np
import pytest

from conftest import make_collinear_world, make_random_world, make_zone
from slrmig.errors import ModelNotFittedError
from slrmig.matrix import MigrationMatrix
from slrmig.migration import (DEFAULT_BETA_CLIMATE, DEFAULT_BETA_STANDARD, ModelSpec,
                              ProductionFunction, default_climate_spec,
                              default_standard_spec, ext_radiation_weight,
                              gravity_weight, model_weights, normalize_row,
                              produce_flows, radiation_weight)
from slrmig.zones import ZoneGraph


class TestExtRadiation:
    def test_pinned_symmetric_case(self):
        # [(200)^1 - (100)^1] * (100^1 + 1) / ((100^1+1)(200^1+1)) = 10100/20301
        assert ext_radiation_weight(100.0, 100.0, 0.0, beta=1.0) == pytest.approx(
            10100.0 / 20301.0, rel=1e-12)

    def test_empty_destination_is_zero(self):
        assert ext_radiation_weight(100.0, 0.0, 5.0, beta=0.7) == 0.0

    def test_monotone_in_destination_pop(self):
        low = ext_radiation_weight(50.0, 100.0, 10.0, beta=0.33)
        high = ext_radiation_weight(50.0, 200.0, 10.0, beta=0.33)
        assert high > low

    def test_monotone_on_random_grid(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            m_i = rng.uniform(0, 1e6)
            s = rng.uniform(0, 1e7)
            beta = rng.uniform(0.05, 3.0)
            m_j = np.sort(rng.uniform(1.0, 1e6, 8))
            w = ext_radiation_weight(m_i, m_j, s, beta=beta)
            assert np.all(np.diff(w) > 0)

    def test_matches_literal_formula(self):
        # the expm1/log1p evaluation must agree with the printed closed form
        rng = np.random.default_rng(1)
        for _ in range(200):
            m_i, m_j, s = rng.uniform(0.0, 1e5, 3)
            beta = rng.uniform(0.05, 2.0)
            a = m_i + s
            literal = (((a + m_j) ** beta - a ** beta) * (m_i ** beta + 1)
                       / ((a ** beta + 1) * ((a + m_j) ** beta + 1)))
            assert ext_radiation_weight(m_i, m_j, s, beta=beta) == pytest.approx(
                literal, rel=1e-9, abs=1e-15)

    def test_negative_inputs_rejected(self):
        with pytest.raises(ValueError):
            ext_radiation_weight(-1.0, 10.0, 0.0, beta=1.0)
        with pytest.raises(ValueError):
            ext_radiation_weight(1.0, 10.0, 0.0, beta=0.0)


class TestRadiation:
    def test_symmetric_case(self):
        assert radiation_weight(100.0, 100.0, 0.0) == 0.5

    def test_empty_destination(self):
        assert radiation_weight(100.0, 0.0, 50.0) == 0.0

    def test_heavy_intervening_opportunity(self):
        # 100*100 / (100100 * 100200), tiny under heavy intervening opportunity
        expected = 10000.0 / (100100.0 * 100200.0)
        assert expected == pytest.approx(9.97e-7, rel=1e-3)
        assert radiation_weight(100.0, 100.0, 100000.0) == pytest.approx(expected, rel=1e-12)

    def test_all_zero_convention(self):
        assert radiation_weight(0.0, 0.0, 0.0) == 0.0

    def test_weights_in_unit_interval(self):
        rng = np.random.default_rng(2)
        m_i = rng.uniform(0, 1e6, 500)
        m_j = rng.uniform(0, 1e6, 500)
        s = rng.uniform(0, 1e7, 500)
        w = radiation_weight(m_i, m_j, s)
        assert np.all((w >= 0) & (w <= 1))


class TestGravity:
    def test_power_hand_value(self):
        assert gravity_weight(1000.0, 10.0, beta=2.0, decay="power") == pytest.approx(10.0)

    def test_exponential_beta_zero_is_distance_blind(self):
        assert gravity_weight(123.0, 500.0, beta=0.0, decay="exponential") == 123.0

    def test_power_zero_distance_rejected(self):
        with pytest.raises(ValueError):
            gravity_weight(10.0, 0.0, beta=2.0, decay="power")

    def test_uniform_population_scaling_leaves_rows_invariant(self):
        rng = np.random.default_rng(3)
        m_j = rng.uniform(10, 1e5, 20)
        d = rng.uniform(1, 500, 20)
        for decay, beta in (("power", 2.7), ("exponential", 0.01)):
            p1 = normalize_row(gravity_weight(m_j, d, beta=beta, decay=decay))
            p2 = normalize_row(gravity_weight(7.0 * m_j, d, beta=beta, decay=decay))
            np.testing.assert_allclose(p1, p2, rtol=1e-12)


class TestNormalizeRow:
    def test_simple(self):
        np.testing.assert_allclose(normalize_row([1.0, 1.0, 2.0]), [0.25, 0.25, 0.5])

    def test_zero_row_uniform_with_warning(self, caplog):
        with caplog.at_level(logging.WARNING, logger="slrmig.migration"):
            p = normalize_row([0.0, 0.0])
        np.testing.assert_allclose(p, [0.5, 0.5])
        assert any("uniform" in rec.message for rec in caplog.records)

    def test_sums_to_one(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            p = normalize_row(rng.uniform(0, 10, rng.integers(1, 40)))
            assert abs(p.sum() - 1.0) <= 1e-12

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            normalize_row([1.0, -0.5])


class TestModelSpec:
    def test_defaults(self):
        assert default_climate_spec().beta == DEFAULT_BETA_CLIMATE == 0.13
        assert default_standard_spec().beta == DEFAULT_BETA_STANDARD == 0.33

    def test_radiation_takes_no_beta(self):
        with pytest.raises(ValueError):
            ModelSpec(kind="radiation", beta=1.0)

    def test_beta_required(self):
        with pytest.raises(ValueError):
            ModelSpec(kind="ext_radiation")
        with pytest.raises(ValueError):
            ModelSpec(kind="gravity_pow", beta=-1.0)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            ModelSpec(kind="teleport")


class TestProductionFunction:
    def test_forced_moves_everyone(self):
        assert ProductionFunction.forced().outflow(250.0) == 250.0

    def test_standard_three_percent(self):
        assert ProductionFunction.standard(0.03).outflow(1000.0) == pytest.approx(30.0)

    def test_forced_alpha_must_be_one(self):
        with pytest.raises(ValueError):
            ProductionFunction(alpha=0.5, kind="forced")


class TestProduceFlows:
    def test_forced_row_sum(self):
        g = make_collinear_world()
        t = produce_flows([make_zone("x", 0.0, 0.5, 250.0)], g,
                          default_climate_spec(), ProductionFunction.forced())
        assert t.row_sums()[0] == pytest.approx(250.0, rel=1e-9)

    def test_standard_row_sum(self):
        g = make_collinear_world()
        t = produce_flows([g.zones[0]], g, default_standard_spec(),
                          ProductionFunction.standard(0.03))
        # row sums to alpha * m_i and the self pair is excluded
        assert t.row_sums()[0] == pytest.approx(0.03 * 10.0, rel=1e-9)
        assert t.get("A", "A") == 0.0

    def test_three_zone_ext_radiation_matches_hand_computation(self):
        g = make_collinear_world()
        spec = ModelSpec(kind="ext_radiation", beta=1.0)
        t = produce_flows(g.zones, g, spec, ProductionFunction.forced())
        for i, origin in enumerate(g.zones):
            weights = {}
            for j, dest in enumerate(g.zones):
                if i == j:
                    continue
                s = g.intervening_opportunities(i, j)
                weights[dest.id] = ext_radiation_weight(origin.population, dest.population,
                                                        s, beta=1.0)
            total = sum(weights.values())
            for dest_id, w in weights.items():
                expected = origin.population * w / total
                assert t.get(origin.id, dest_id) == pytest.approx(expected, rel=1e-9)

    def test_conservation_random_worlds(self):
        for kind, beta in (("radiation", None), ("ext_radiation", 0.33),
                           ("gravity_exp", 0.05), ("gravity_pow", 2.0)):
            g = make_random_world(25, seed=10)
            spec = ModelSpec(kind=kind, beta=beta)
            t = produce_flows(g.zones, g, spec, ProductionFunction.standard(0.03))
            np.testing.assert_allclose(t.row_sums(), 0.03 * g.populations, rtol=1e-9)

    def test_zero_population_origin_gives_zero_row(self):
        g = make_collinear_world()
        t = produce_flows([make_zone("idle", 0.0, 0.5, 0.0)], g,
                          default_standard_spec(), ProductionFunction.forced())
        assert t.total() == 0.0

    def test_threaded_output_identical(self):
        g = make_random_world(30, seed=11)
        spec = ModelSpec(kind="ext_radiation", beta=0.4)
        t1 = produce_flows(g.zones, g, spec, ProductionFunction.standard(0.03), threads=1)
        t4 = produce_flows(g.zones, g, spec, ProductionFunction.standard(0.03), threads=4)
        assert t1.equals(t4)

    def test_distance_floor_enables_power_gravity_on_colocated_pair(self):
        g = ZoneGraph([make_zone("dest", 0.0, 0.0, 100.0), make_zone("far", 0.0, 2.0, 100.0)])
        origin = make_zone("src", 0.0, 0.0, 50.0)  # sits exactly on "dest"
        spec = ModelSpec(kind="gravity_pow", beta=2.0)
        with pytest.raises(ValueError):
            produce_flows([origin], g, spec, ProductionFunction.forced())
        t = produce_flows([origin], g, spec, ProductionFunction.forced(),
                          distance_floor_km=1.0)
        assert t.row_sums()[0] == pytest.approx(50.0, rel=1e-9)
        assert t.get("src", "dest") > t.get("src", "far")

    def test_neural_without_weights_raises(self):
        g = make_collinear_world()
        spec = ModelSpec(kind="neural")
        with pytest.raises(ModelNotFittedError):
            produce_flows(g.zones, g, spec, ProductionFunction.forced())
