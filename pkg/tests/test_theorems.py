import numpy as np
import pytest

from gaussbsde.drivers import GaussianDriverSpec, build_clock
from gaussbsde.errors import HypothesisUnobserved, HypothesisUnsatisfied, UnsupportedScenario
from gaussbsde.pack import (
    constant_generator_scenario,
    contraction_mean_field_scenario,
    gaussian_scenario,
    identity_scenario,
    linear_scenario,
    mean_field_scenario,
    shift_generator,
    shift_terminal,
)
from gaussbsde.scenario import GeneratorSpec, ScenarioSpec, TerminalSpec
from gaussbsde.solver import SolverConfig, solve_auxiliary
from gaussbsde.theorems import (
    comparison_check,
    converse_comparison_check,
    lsi_check,
    representation_limit_check,
    stability_check,
    t2_check,
    transport_constants,
    z_bound_check,
)

BROWNIAN = GaussianDriverSpec.brownian(1.0)
SMALL = SolverConfig(n_time=16, n_particles=4000)


class TestTransportConstants:
    def test_unit_lipschitz_terminal(self):
        clock = build_clock(BROWNIAN, 9)
        c = transport_constants(1.0, 0.0, clock, t=0.3)
        assert c.c_tr_y == 2.0
        assert c.c_ls_y == 2.0

    def test_scaling_in_l_g(self):
        clock = build_clock(BROWNIAN, 9)
        assert transport_constants(2.0, 0.0, clock, 0.0).c_tr_y == 8.0

    def test_terminal_time_value(self):
        clock = build_clock(BROWNIAN, 9)
        for l_g, l_f in ((1.0, 0.5), (2.0, 1.0)):
            c = transport_constants(l_g, l_f, clock, t=1.0)
            assert c.c_tr_y == pytest.approx(2 * l_g ** 2, abs=1e-14)

    def test_monotone_in_constants(self):
        clock = build_clock(BROWNIAN, 9)
        base = transport_constants(1.0, 0.5, clock, 0.2)
        more_g = transport_constants(1.5, 0.5, clock, 0.2)
        more_f = transport_constants(1.0, 0.8, clock, 0.2)
        for a, b in ((base, more_g), (base, more_f)):
            assert b.c_tr_y >= a.c_tr_y
            assert b.c_ls_y >= a.c_ls_y
            assert b.c_tr_z_grid >= a.c_tr_z_grid

    def test_monotone_in_horizon(self):
        short = transport_constants(1.0, 0.5, build_clock(GaussianDriverSpec.brownian(1.0), 9), 0.0)
        long = transport_constants(1.0, 0.5, build_clock(GaussianDriverSpec.brownian(2.0), 9), 0.0)
        assert long.c_tr_y >= short.c_tr_y
        assert long.c_ls_y >= short.c_ls_y

    def test_z_constant_grid_vs_limit(self):
        # the bracket decreases toward c/2, so the grid minimum sits above the limit
        clock = build_clock(BROWNIAN, 9)
        c = transport_constants(1.0, 0.5, clock, 0.2, p=2.0)
        assert c.c_tr_z_grid >= c.c_tr_z_limit > 0
        assert c.c_tr_z_grid == pytest.approx(c.c_tr_z_limit, rel=1e-4)

    def test_input_validation(self):
        clock = build_clock(BROWNIAN, 9)
        with pytest.raises(ValueError):
            transport_constants(-1.0, 0.0, clock, 0.0)
        with pytest.raises(ValueError):
            transport_constants(1.0, 0.0, clock, 0.0, p=0.5)


class TestComparison:
    def test_identical_scenarios(self):
        scn = mean_field_scenario(BROWNIAN)
        report = comparison_check(scn, scn, SMALL, [0.0, 0.5, 1.0], seed=1)
        assert report.passed
        assert report.measurements["max_violation_fraction"] == 0.0

    def test_constant_generator_gap(self):
        scn1 = constant_generator_scenario(BROWNIAN, 0.0)
        scn2 = constant_generator_scenario(BROWNIAN, 1.0)
        report = comparison_check(scn1, scn2, SMALL, [0.0, 0.5], seed=2)
        assert report.passed

    def test_mean_field_terminal_shift(self):
        scn1 = mean_field_scenario(BROWNIAN)
        scn2 = shift_terminal(scn1, 1.0)
        report = comparison_check(scn1, scn2, SMALL, [0.0, 0.5, 1.0], seed=3)
        assert report.passed

    def test_refuses_z_law_dependence(self):
        scn1 = ScenarioSpec(TerminalSpec(b=1.0), GeneratorSpec(kappa_z=0.5), BROWNIAN)
        scn2 = shift_terminal(scn1, 1.0)
        with pytest.raises(HypothesisUnsatisfied):
            comparison_check(scn1, scn2, SMALL, [0.5], seed=4)

    def test_refuses_negative_mean_coupling_on_both(self):
        scn1 = ScenarioSpec(TerminalSpec(b=1.0), GeneratorSpec(kappa_y=-0.5), BROWNIAN)
        scn2 = ScenarioSpec(TerminalSpec(a=1.0, b=1.0), GeneratorSpec(kappa_y=-0.5), BROWNIAN)
        with pytest.raises(HypothesisUnsatisfied):
            comparison_check(scn1, scn2, SMALL, [0.5], seed=5)

    def test_one_sided_mean_coupling_allowed(self):
        # f1's coupling is negative, but f2 satisfies the derivative condition
        # and the constant offsets keep f1 <= f2 on the probe range
        scn1 = ScenarioSpec(TerminalSpec(b=1.0), GeneratorSpec(c0=-5.0, kappa_y=-0.2), BROWNIAN)
        scn2 = ScenarioSpec(TerminalSpec(b=1.0), GeneratorSpec(c0=5.0, kappa_y=0.2), BROWNIAN)
        report = comparison_check(scn1, scn2, SMALL, [0.5], seed=6)
        assert report.passed

    def test_refuses_unordered_generators(self):
        scn1 = constant_generator_scenario(BROWNIAN, 1.0)
        scn2 = constant_generator_scenario(BROWNIAN, 0.0)
        with pytest.raises(HypothesisUnsatisfied):
            comparison_check(scn1, scn2, SMALL, [0.5], seed=7)

    def test_refuses_different_drivers(self):
        scn1 = identity_scenario(BROWNIAN)
        scn2 = identity_scenario(GaussianDriverSpec.fbm(0.7, 1.0))
        with pytest.raises(HypothesisUnsatisfied):
            comparison_check(scn1, scn2, SMALL, [0.5], seed=8)


class TestRepresentationLimit:
    def test_constant_generator_exact(self):
        scn = constant_generator_scenario(BROWNIAN, 2.0)
        report = representation_limit_check(scn, 0.25, 1.0, 0.5, [0.2, 0.1, 0.05], SMALL, seed=9)
        assert report.passed
        np.testing.assert_allclose(report.measurements["A"], 2.0, atol=1e-8)
        np.testing.assert_allclose(report.measurements["B"], 2.0, atol=1e-12)

    def test_linear_mean_field(self):
        scn = contraction_mean_field_scenario(BROWNIAN)
        cfg = SolverConfig(n_time=16, n_particles=16000)
        report = representation_limit_check(scn, 0.25, 1.0, 0.5, [0.2, 0.1, 0.05], cfg, seed=10)
        assert report.passed
        assert report.measurements["f_at_frozen_law"] == pytest.approx(-0.7)

    def test_rejects_increasing_eps(self):
        scn = identity_scenario(BROWNIAN)
        with pytest.raises(ValueError):
            representation_limit_check(scn, 0.25, 1.0, 0.5, [0.05, 0.1], SMALL, seed=11)

    def test_rejects_state_dependent_generator(self):
        scn = ScenarioSpec(TerminalSpec(b=1.0), GeneratorSpec(c1=1.0), BROWNIAN)
        with pytest.raises(UnsupportedScenario):
            representation_limit_check(scn, 0.25, 1.0, 0.5, [0.1], SMALL, seed=12)

    def test_rejects_fbm_at_origin(self):
        scn = identity_scenario(GaussianDriverSpec.fbm(0.7, 1.0))
        with pytest.raises(UnsupportedScenario):
            representation_limit_check(scn, 0.0, 1.0, 0.5, [0.1], SMALL, seed=13)


class TestConverseComparison:
    PROBES = [(0.1, -1.0, 0.5), (0.4, 0.5, 0.5), (0.7, 2.0, 0.5)]

    def test_constant_gap(self):
        scn1 = constant_generator_scenario(BROWNIAN, 1.0)
        scn2 = constant_generator_scenario(BROWNIAN, 2.0)
        report = converse_comparison_check(scn1, scn2, SMALL, self.PROBES, 0.1, seed=14)
        assert report.passed
        for row in report.measurements["probes"]:
            # constant offset integrates to (f2 - f1) * eps on the Brownian clock
            assert row["y_margin"] == pytest.approx(1.0 * 0.1, abs=1e-8)
            assert row["f_margin"] == pytest.approx(1.0)

    def test_equal_generators(self):
        scn = mean_field_scenario(BROWNIAN, alpha=0.2)
        report = converse_comparison_check(scn, scn, SMALL, self.PROBES, 0.1, seed=15)
        assert report.passed

    def test_mean_field_offset(self):
        scn1 = mean_field_scenario(BROWNIAN, alpha=0.2)
        scn2 = shift_generator(scn1, 0.1)
        report = converse_comparison_check(scn1, scn2, SMALL, self.PROBES, 0.1, seed=16)
        assert report.passed

    def test_hypothesis_unobserved(self):
        scn1 = constant_generator_scenario(BROWNIAN, 2.0)
        scn2 = constant_generator_scenario(BROWNIAN, 0.0)
        with pytest.raises(HypothesisUnobserved) as err:
            converse_comparison_check(scn1, scn2, SMALL, self.PROBES, 0.1, seed=17)
        assert err.value.report is not None
        assert err.value.report.passed is None


class TestStability:
    def test_identical_scenarios(self):
        scn = linear_scenario(BROWNIAN, 0.5)
        report = stability_check(scn, scn, SMALL, seed=18)
        assert report.passed
        assert report.measurements["ratio"] == "undefined-zero"

    def test_terminal_shift(self):
        scn1 = linear_scenario(BROWNIAN, 0.5)
        report = stability_check(scn1, shift_terminal(scn1, 0.5), SMALL, seed=19)
        assert report.passed
        for ratio in report.measurements["ratio"]:
            assert np.isfinite(ratio)

    def test_constant_generator_shift_closed_form(self):
        # f2 = f1 + delta: dY_t = delta (V_T - V_t), dZ = 0
        delta = 0.5
        scn1 = constant_generator_scenario(BROWNIAN, 0.0)
        scn2 = constant_generator_scenario(BROWNIAN, delta)
        report = stability_check(scn1, scn2, SMALL, seed=20)
        assert report.passed
        lhs = report.measurements["lhs"][0]
        rhs = report.measurements["rhs"][0]
        assert lhs == pytest.approx(delta ** 2, rel=0.05)   # sup at t=0
        assert rhs == pytest.approx(delta ** 2, rel=0.05)   # (int delta dV)^2


class TestGaussianFamilyChecks:
    def test_t2_sharp_at_terminal_time(self):
        scn = gaussian_scenario(BROWNIAN, lam=1.0)
        report = t2_check(scn, 1.0, [0.0, 0.5, 1.0, 2.0], SMALL, seed=21)
        assert report.passed
        assert report.measurements["c_tr_y"] == pytest.approx(2.0, abs=1e-12)
        assert report.measurements["slack"] == pytest.approx(0.0, abs=1e-10)
        for row in report.measurements["shifts"][1:]:
            assert row["ratio_quadratic"] == pytest.approx(2.0, abs=1e-10)

    def test_t2_interior_time_has_slack(self):
        scn = gaussian_scenario(BROWNIAN, lam=1.0)
        report = t2_check(scn, 0.5, [1.0], SMALL, seed=22)
        assert report.passed
        assert report.measurements["sharp_constant"] == pytest.approx(1.0)
        assert report.measurements["c_tr_y"] == pytest.approx(2.0)

    def test_t2_zero_shift(self):
        scn = gaussian_scenario(BROWNIAN)
        report = t2_check(scn, 1.0, [0.0], SMALL, seed=23)
        row = report.measurements["shifts"][0]
        assert row["w2_squared"] == 0.0 and row["relative_entropy"] == 0.0

    def test_t2_report_only_beyond_unit_horizon(self):
        scn = gaussian_scenario(GaussianDriverSpec.brownian(2.0))
        report = t2_check(scn, 2.0, [1.0], SMALL, seed=24)
        assert report.passed is None
        assert any("report-only" in note for note in report.notes)

    def test_t2_rejects_non_gaussian_family(self):
        scn = mean_field_scenario(BROWNIAN)
        with pytest.raises(UnsupportedScenario):
            t2_check(scn, 1.0, [1.0], SMALL, seed=25)

    def test_lsi_exact_ratio(self):
        scn = gaussian_scenario(BROWNIAN, lam=1.0)
        report = lsi_check(scn, 1.0, [0.0, 0.5, 1.0], SMALL, seed=26)
        assert report.passed
        assert report.measurements["c_ls_y"] == pytest.approx(2.0, abs=1e-12)
        assert report.measurements["max_quadrature_error"] < 1e-6
        for row in report.measurements["lambdas"]:
            if row["lambda"] != 0.0:
                assert row["ratio"] == pytest.approx(2.0, abs=1e-10)

    def test_lsi_interior_time(self):
        scn = gaussian_scenario(BROWNIAN, lam=1.0)
        report = lsi_check(scn, 0.25, [1.0], SMALL, seed=27)
        assert report.passed
        assert report.measurements["lambdas"][0]["ratio"] == pytest.approx(0.5, abs=1e-10)

    def test_lsi_with_drifted_family(self):
        scn = ScenarioSpec(TerminalSpec(a=0.5, b=2.0), GeneratorSpec(c0=0.3, c2=-0.4), BROWNIAN)
        report = lsi_check(scn, 0.5, [0.5, 1.0], SMALL, seed=28)
        assert report.passed
        assert report.measurements["max_quadrature_error"] < 1e-6


class TestZBound:
    def _solved(self, scn, seed, degree=2):
        # the check reads the fitted field at every particle, including ~4
        # sigma tails; a scenario-appropriate low degree keeps the tail
        # extrapolation noise inside the 5% slack
        clock = build_clock(scn.driver, 17)
        field, cloud = solve_auxiliary(
            scn, clock, SolverConfig(n_time=16, n_particles=8000, basis_degree=degree), seed=seed
        )
        return field, clock, cloud

    def test_identity_passes_at_equality(self):
        scn = identity_scenario(BROWNIAN)
        field, clock, cloud = self._solved(scn, 29)
        report = z_bound_check(field, scn, clock, cloud, seed=29)
        assert report.passed
        # |Z| = 1 vs bound L_g = 1: margin is the 5% slack minus noise
        assert report.measurements["min_margin"] == pytest.approx(0.05, abs=0.04)

    def test_linear_scenario_margin(self):
        scn = linear_scenario(BROWNIAN, 0.5)
        field, clock, cloud = self._solved(scn, 30)
        report = z_bound_check(field, scn, clock, cloud, seed=30)
        assert report.passed
        assert report.measurements["min_margin"] > 0

    def test_constant_terminal_zero_control(self):
        scn = ScenarioSpec(TerminalSpec(a=2.0), GeneratorSpec(), BROWNIAN)
        field, clock, cloud = self._solved(scn, 31)
        report = z_bound_check(field, scn, clock, cloud, seed=31)
        assert report.passed
        assert max(report.measurements["observed_max"]) < 1e-8


class TestReportDeterminism:
    def test_reports_identical_across_runs(self):
        scn = gaussian_scenario(BROWNIAN)
        r1 = t2_check(scn, 1.0, [0.5, 1.0], SMALL, seed=32)
        r2 = t2_check(scn, 1.0, [0.5, 1.0], SMALL, seed=32)
        assert r1.payload() == r2.payload()

        scn2 = mean_field_scenario(BROWNIAN)
        c1 = comparison_check(scn2, shift_terminal(scn2, 1.0), SMALL, [0.5], seed=33)
        c2 = comparison_check(scn2, shift_terminal(scn2, 1.0), SMALL, [0.5], seed=33)
        assert c1.payload() == c2.payload()
