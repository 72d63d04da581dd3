"""Built-in oracle scenarios used by the default experiment suite and tests."""

from __future__ import annotations

from dataclasses import replace

from .drivers import GaussianDriverSpec
from .scenario import GeneratorSpec, ScenarioSpec, TerminalSpec


def identity_scenario(driver: GaussianDriverSpec) -> ScenarioSpec:
    """g(x) = x, f = 0; solution (Y, Z) = (X, 1)."""
    return ScenarioSpec(
        terminal=TerminalSpec(b=1.0),
        generator=GeneratorSpec(),
        driver=driver,
    )


def linear_scenario(driver: GaussianDriverSpec, beta: float = 0.5) -> ScenarioSpec:
    """g(x) = x, f(y) = beta * y; solution Y_t = exp(beta (V_T - V_t)) X_t."""
    return ScenarioSpec(
        terminal=TerminalSpec(b=1.0),
        generator=GeneratorSpec(c2=beta),
        driver=driver,
    )


def mean_field_scenario(driver: GaussianDriverSpec, alpha: float = 0.3, c: float = 1.0) -> ScenarioSpec:
    """g(x) = x + c, f = alpha * mean_y; E Y_t = c * exp(alpha (V_T - V_t))."""
    return ScenarioSpec(
        terminal=TerminalSpec(a=c, b=1.0),
        generator=GeneratorSpec(kappa_y=alpha),
        driver=driver,
    )


def contraction_mean_field_scenario(driver: GaussianDriverSpec) -> ScenarioSpec:
    """g(x) = x, f(y, nu) = -y + 0.3 * mean_y; the short-horizon probe scenario."""
    return ScenarioSpec(
        terminal=TerminalSpec(b=1.0),
        generator=GeneratorSpec(c2=-1.0, kappa_y=0.3),
        driver=driver,
    )


def gaussian_scenario(driver: GaussianDriverSpec, lam: float = 1.0) -> ScenarioSpec:
    """g(x) = lam * x, f = 0; marginal laws are centered Gaussians."""
    return ScenarioSpec(
        terminal=TerminalSpec(b=lam),
        generator=GeneratorSpec(),
        driver=driver,
    )


def constant_generator_scenario(driver: GaussianDriverSpec, c: float) -> ScenarioSpec:
    """g(x) = x, f = c; Y_t = X_t + c (V_T - V_t)."""
    return ScenarioSpec(
        terminal=TerminalSpec(b=1.0),
        generator=GeneratorSpec(c0=c),
        driver=driver,
    )


def shift_terminal(scn: ScenarioSpec, delta: float) -> ScenarioSpec:
    return replace(scn, terminal=replace(scn.terminal, a=scn.terminal.a + delta))


def shift_generator(scn: ScenarioSpec, delta: float) -> ScenarioSpec:
    return replace(scn, generator=replace(scn.generator, c0=scn.generator.c0 + delta))
