import math

import numpy as np
import pytest

from gaussbsde.drivers import GaussianDriverSpec, VarianceClock, build_clock
from gaussbsde.errors import (
    DegenerateInterval,
    OutOfRange,
    PicardDivergence,
    RegressionIllConditioned,
)
from gaussbsde.pack import (
    constant_generator_scenario,
    contraction_mean_field_scenario,
    identity_scenario,
    linear_scenario,
    mean_field_scenario,
)
from gaussbsde.scenario import GeneratorSpec, ScenarioSpec, TerminalSpec
from gaussbsde.solver import (
    SolverConfig,
    regress_conditional,
    representation_solve,
    solve_auxiliary,
    transfer_evaluate,
)

BROWNIAN = GaussianDriverSpec.brownian(1.0)


def normal_equations_oracle(x, y, degree):
    """Independent dense least-squares solve on the raw Vandermonde matrix."""
    phi = np.vander(x, degree + 1, increasing=True)
    coef, *_ = np.linalg.lstsq(phi, y, rcond=None)
    return coef


class TestRegressConditional:
    def test_affine_data_interpolated(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=200)
        beta = regress_conditional(3, 0.0, x, 2 * x + 1)
        np.testing.assert_allclose(beta, [1.0, 2.0, 0.0, 0.0], atol=1e-10)

    def test_independent_targets_give_mean(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=5000)
        y = rng.normal(loc=3.0, size=5000)
        beta = regress_conditional(2, 0.0, x, y)
        assert beta[0] == pytest.approx(np.mean(y), abs=0.1)
        assert abs(beta[1]) < 0.1 and abs(beta[2]) < 0.1

    def test_quadratic_against_dense_solver(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=300)
        beta = regress_conditional(2, 0.0, x, x ** 2)
        np.testing.assert_allclose(beta, [0.0, 0.0, 1.0], atol=1e-10)
        np.testing.assert_allclose(beta, normal_equations_oracle(x, x ** 2, 2), atol=1e-10)

    def test_sample_count_guard(self):
        with pytest.raises(ValueError):
            regress_conditional(4, 0.0, np.zeros(10), np.zeros(10))

    def test_ill_conditioned(self):
        x = np.ones(100)
        with pytest.raises(RegressionIllConditioned):
            regress_conditional(3, 0.0, x, x)


class TestSolveOracles:
    def test_identity_scenario(self):
        # closed form: u(s, w) = w, v = 1
        scn = identity_scenario(BROWNIAN)
        clock = build_clock(BROWNIAN, 33)
        cfg = SolverConfig(n_time=32, n_particles=8000)
        field, cloud = solve_auxiliary(scn, clock, cfg, seed=21)
        for t in (0.25, 0.5, 1.0):
            for x in (-1.0, 0.0, 0.8):
                y_val, z_val = transfer_evaluate(field, t, x)
                assert y_val == pytest.approx(x, abs=0.02 * (1 + abs(x)))
                assert z_val == pytest.approx(1.0, abs=0.02)

    def test_constant_terminal(self):
        scn = ScenarioSpec(terminal=TerminalSpec(a=3.0), generator=GeneratorSpec(), driver=BROWNIAN)
        clock = build_clock(BROWNIAN, 17)
        field, cloud = solve_auxiliary(scn, clock, SolverConfig(n_time=16, n_particles=4000), seed=2)
        assert np.allclose(cloud.y, 3.0, atol=1e-8)
        assert np.max(np.abs(cloud.z)) < 1e-8

    def test_linear_generator_coefficients(self):
        # u(s, w) = exp(beta (V_T - s)) w, checked via the raw linear coefficient
        beta = 0.5
        scn = linear_scenario(BROWNIAN, beta)
        clock = build_clock(BROWNIAN, 33)
        field, _ = solve_auxiliary(scn, clock, SolverConfig(n_time=32, n_particles=40000), seed=9)
        for i in range(1, field.n_steps + 1):
            target = math.exp(beta * (clock.V_T - field.grid_s[i]))
            raw_linear = field.u_coeffs[i][1] / field.scales[i]
            assert raw_linear == pytest.approx(target, rel=0.02)
        y_val, _ = transfer_evaluate(field, 0.0, 0.0)
        assert abs(y_val) < 0.02

    def test_mean_field_oracle(self):
        # particle mean of Y at clock time s is exp(alpha (V_T - s))
        scn = mean_field_scenario(BROWNIAN, alpha=0.3, c=1.0)
        clock = build_clock(BROWNIAN, 33)
        cfg = SolverConfig(n_time=32, n_particles=20000, picard_tol=1e-3)
        field, cloud = solve_auxiliary(scn, clock, cfg, seed=14)
        assert field.n_iterations <= 10
        assert field.convergence[-1] < 1e-3
        for i in range(field.n_steps + 1):
            target = math.exp(0.3 * (clock.V_T - field.grid_s[i]))
            mean = float(np.mean(cloud.y[:, i]))
            se = float(np.std(cloud.y[:, i]) / math.sqrt(cloud.n_particles))
            assert abs(mean - target) <= 3 * se + 0.3 / cfg.n_time

    def test_martingale_residual(self):
        # f = 0: mean(Y_i - Y_{i+1} + Z_i dW_i) vanishes within 3 MC standard
        # errors; the mean equals the sample covariance of Z and dW, so its
        # scale is set by std(Z dW), not by the (coefficient-correlated)
        # pointwise residuals
        scn = identity_scenario(BROWNIAN)
        clock = build_clock(BROWNIAN, 17)
        field, cloud = solve_auxiliary(scn, clock, SolverConfig(n_time=16, n_particles=20000), seed=4)
        dw = np.diff(cloud.w, axis=1)
        for i in range(field.n_steps):
            resid = cloud.y[:, i] - cloud.y[:, i + 1] + cloud.z[:, i] * dw[:, i]
            se = np.std(cloud.z[:, i] * dw[:, i]) / math.sqrt(cloud.n_particles)
            assert abs(np.mean(resid)) <= 3 * se + 1e-12

    def test_increment_z_estimator_agrees(self):
        scn = identity_scenario(BROWNIAN)
        clock = build_clock(BROWNIAN, 17)
        f1, _ = solve_auxiliary(scn, clock, SolverConfig(n_time=16, n_particles=30000), seed=5)
        f2, _ = solve_auxiliary(
            scn, clock, SolverConfig(n_time=16, n_particles=30000, z_estimator="increment"), seed=5
        )
        mid = 8
        assert f1.eval_v(mid, 0.0) == pytest.approx(1.0, abs=0.02)
        assert f2.eval_v(mid, 0.0) == pytest.approx(1.0, abs=0.05)

    def test_terminal_reproduced(self):
        scn = ScenarioSpec(
            terminal=TerminalSpec(b=2.0, phi="sin", c=1.0), generator=GeneratorSpec(), driver=BROWNIAN
        )
        clock = build_clock(BROWNIAN, 17)
        field, cloud = solve_auxiliary(scn, clock, SolverConfig(n_time=16, n_particles=8000), seed=6)
        w = cloud.w[:, -1]
        central = np.abs(w) <= 2.33 * np.std(w)
        fitted = field.eval_u(field.n_steps, w[central])
        exact = 2 * w[central] + np.sin(w[central])
        # degree-4 weighted-L2 fit of the sin part truncates its Hermite tail:
        # RMS ~ 0.04, edge error under 0.15 on the central support
        assert np.sqrt(np.mean((fitted - exact) ** 2)) < 0.06
        assert np.max(np.abs(fitted - exact)) < 0.15
        y_val, _ = transfer_evaluate(field, 1.0, 0.5)
        assert y_val == pytest.approx(2 * 0.5 + math.sin(0.5), abs=0.05)

    def test_deterministic_given_seed(self):
        scn = mean_field_scenario(BROWNIAN)
        clock = build_clock(BROWNIAN, 9)
        cfg = SolverConfig(n_time=8, n_particles=2000)
        f1, c1 = solve_auxiliary(scn, clock, cfg, seed=33)
        f2, c2 = solve_auxiliary(scn, clock, cfg, seed=33)
        assert np.array_equal(f1.u_coeffs, f2.u_coeffs)
        assert np.array_equal(c1.y, c2.y)

    def test_picard_divergence(self):
        scn = mean_field_scenario(BROWNIAN, alpha=3.0)
        clock = build_clock(BROWNIAN, 33)
        cfg = SolverConfig(n_time=32, n_particles=2000, picard_max_iter=3, picard_tol=1e-12)
        with pytest.raises(PicardDivergence):
            solve_auxiliary(scn, clock, cfg, seed=1)

    def test_step_stability_guard(self):
        scn = linear_scenario(BROWNIAN, beta=5.0)  # L_f = 5, max step 1/4
        clock = build_clock(BROWNIAN, 5)
        with pytest.raises(ValueError, match="max step"):
            solve_auxiliary(scn, clock, SolverConfig(n_time=4, n_particles=2000), seed=1)


class TestTransferEvaluate:
    def test_terminal_time(self):
        scn = identity_scenario(BROWNIAN)
        clock = build_clock(BROWNIAN, 17)
        field, _ = solve_auxiliary(scn, clock, SolverConfig(n_time=16, n_particles=4000), seed=8)
        y_val, z_val = transfer_evaluate(field, 1.0, 0.7)
        assert y_val == pytest.approx(0.7, abs=0.02)
        assert z_val == pytest.approx(1.0, abs=0.05)

    def test_out_of_range(self):
        scn = identity_scenario(BROWNIAN)
        clock = build_clock(BROWNIAN, 9)
        field, _ = solve_auxiliary(scn, clock, SolverConfig(n_time=8, n_particles=2000), seed=8)
        with pytest.raises(OutOfRange):
            transfer_evaluate(field, 1.5, 0.0)

    def test_blend_between_nodes(self):
        scn = constant_generator_scenario(BROWNIAN, 2.0)
        clock = build_clock(BROWNIAN, 9)
        field, _ = solve_auxiliary(scn, clock, SolverConfig(n_time=8, n_particles=4000), seed=8)
        # Y(t, x) = x + 2 (V_T - V_t), linear in V_t, so blending is exact
        y_val, _ = transfer_evaluate(field, 0.4375, 0.3)  # halfway between nodes
        assert y_val == pytest.approx(0.3 + 2 * (1 - 0.4375), abs=0.02)


class TestRepresentationSolve:
    def test_zero_generator_exact(self):
        scn = identity_scenario(BROWNIAN)
        clock = build_clock(BROWNIAN, 33)
        rep = representation_solve(scn, clock, 0.25, 0.1, 1.0, 0.5, SolverConfig(n_time=8, n_particles=2000), seed=3)
        assert rep.value == pytest.approx(1.0, abs=1e-9)

    def test_constant_generator_exact(self):
        scn = constant_generator_scenario(BROWNIAN, 2.0)
        clock = build_clock(BROWNIAN, 33)
        rep = representation_solve(scn, clock, 0.25, 0.1, 1.0, 0.5, SolverConfig(n_time=8, n_particles=2000), seed=3)
        assert rep.value == pytest.approx(1.0 + 2.0 * 0.1, abs=1e-9)

    def test_determinism_statistic(self):
        scn = contraction_mean_field_scenario(BROWNIAN)
        clock = build_clock(BROWNIAN, 33)
        cfg = SolverConfig(n_time=16, n_particles=16000)
        rep = representation_solve(scn, clock, 0.25, 0.1, 1.0, 0.5, cfg, seed=19)
        assert rep.particle_sigma <= 3 * rep.std_error

    def test_degenerate_interval(self):
        grid_t = np.array([0.0, 0.25, 0.5, 1.0])
        grid_v = np.array([0.0, 0.25, 0.5, 1.0])
        clock = VarianceClock(grid_t=grid_t, grid_V=grid_v)
        scn = identity_scenario(BROWNIAN)
        with pytest.raises(DegenerateInterval):
            representation_solve(scn, clock, 0.5, 1e-16, 0.0, 0.0, SolverConfig(n_time=4, n_particles=2000), seed=1)

    def test_interval_bounds(self):
        scn = identity_scenario(BROWNIAN)
        clock = build_clock(BROWNIAN, 9)
        with pytest.raises(ValueError):
            representation_solve(scn, clock, 0.9, 0.5, 0.0, 0.0, SolverConfig(n_time=4, n_particles=2000), seed=1)


class TestClockEquivariance:
    def test_fbm_vs_transferred_brownian(self):
        # same auxiliary problem on the same clock grid: identical fields
        fbm = GaussianDriverSpec.fbm(0.25, 1.0)
        clock_f = build_clock(fbm, 17)
        cfg = SolverConfig(n_time=16, n_particles=3000)
        scn_f = linear_scenario(fbm, 0.5)
        field_f, _ = solve_auxiliary(scn_f, clock_f, cfg, seed=77)

        brownian = GaussianDriverSpec.brownian(clock_f.V_T)
        clock_b = VarianceClock(grid_t=clock_f.grid_V.copy(), grid_V=clock_f.grid_V.copy())
        field_b, _ = solve_auxiliary(linear_scenario(brownian, 0.5), clock_b, cfg, seed=77)

        np.testing.assert_allclose(field_f.u_coeffs, field_b.u_coeffs, atol=1e-12)
        np.testing.assert_allclose(field_f.v_coeffs, field_b.v_coeffs, atol=1e-12)


class TestSolverConfigValidation:
    def test_particle_minimum(self):
        with pytest.raises(ValueError):
            SolverConfig(n_particles=30, basis_degree=4)

    def test_estimator_name(self):
        with pytest.raises(ValueError):
            SolverConfig(z_estimator="wrong")

    def test_tolerances(self):
        with pytest.raises(ValueError):
            SolverConfig(picard_tol=0.0)
        with pytest.raises(ValueError):
            SolverConfig(ridge=-1.0)
