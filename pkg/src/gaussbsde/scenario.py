"""Closed DSL for terminal functions g(x, mu) and generators f(t, x, y, z, nu)
with automatic Lipschitz-constant and mean-dependence bookkeeping.

Terminals:   g(x, mu) = a + b*x + c*phi(x) + lambda_mean * mean_x(mu)
Generators:  f(t, x, y, z, nu) = rho(t) * ( c0 + c1*x + c2*y + c3*z + c4*phi(y)
                                            + kx*mean_x + ky*mean_y + kz*mean_z )

The nonlinearity library is fixed and 1-Lipschitz, the optional time factor
rho is piecewise constant, and law dependence is restricted to first moments,
so all constants are computable symbolically:

    L_g = |b| + |c| + |lambda_mean|
    L_f = sup|rho| * (|c1| + |c2| + |c3| + |c4| + |kx| + |ky| + |kz|)

and the derivative of f in the y-marginal of the law equals rho(t) * ky.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .drivers import GaussianDriverSpec
from .errors import EmptyCloud, ProbeViolation
from .measures import LawFeatures
from .rng import generator

_PROBE_SLACK = 1e-9


def _zero(x):
    return np.zeros_like(np.asarray(x, dtype=float))


def _clip(x):
    return np.clip(x, -1.0, 1.0)


def _clip_deriv(x):
    x = np.asarray(x, dtype=float)
    return ((x > -1.0) & (x < 1.0)).astype(float)


def _sech2(x):
    return 1.0 / np.cosh(x) ** 2


#: tag -> (phi, phi'); every member is 1-Lipschitz.
NONLINEARITIES: dict[str, tuple[Callable, Callable]] = {
    "none": (_zero, _zero),
    "sin": (np.sin, np.cos),
    "tanh": (np.tanh, _sech2),
    "clip": (_clip, _clip_deriv),
}


def _check_phi(phi: str, c: float):
    if phi not in NONLINEARITIES:
        raise ValueError(f"unknown nonlinearity {phi!r}")
    if phi == "none" and c != 0.0:
        raise ValueError("nonlinearity coefficient must be 0 when phi is 'none'")


@dataclass(frozen=True)
class TerminalSpec:
    a: float = 0.0
    b: float = 0.0
    phi: str = "none"
    c: float = 0.0
    lambda_mean: float = 0.0

    def __post_init__(self):
        _check_phi(self.phi, self.c)

    @property
    def lipschitz(self) -> float:
        return abs(self.b) + abs(self.c) + abs(self.lambda_mean)

    def payload(self) -> dict:
        return {
            "a": self.a, "b": self.b, "phi": self.phi,
            "c": self.c, "lambda_mean": self.lambda_mean,
        }


@dataclass(frozen=True)
class GeneratorSpec:
    c0: float = 0.0
    c1: float = 0.0
    c2: float = 0.0
    c3: float = 0.0
    phi: str = "none"
    c4: float = 0.0
    kappa_x: float = 0.0
    kappa_y: float = 0.0
    kappa_z: float = 0.0
    # piecewise-constant time factor: value rho_values[k] on
    # [rho_breaks[k-1], rho_breaks[k]); None means rho == 1
    rho_breaks: tuple[float, ...] | None = None
    rho_values: tuple[float, ...] | None = None

    def __post_init__(self):
        _check_phi(self.phi, self.c4)
        if (self.rho_values is None) != (self.rho_breaks is None):
            raise ValueError("rho_breaks and rho_values must be given together")
        if self.rho_values is not None:
            breaks = tuple(float(v) for v in self.rho_breaks)
            values = tuple(float(v) for v in self.rho_values)
            if len(values) != len(breaks) + 1:
                raise ValueError("rho_values must have one more entry than rho_breaks")
            if any(b2 <= b1 for b1, b2 in zip(breaks, breaks[1:])):
                raise ValueError("rho_breaks must be strictly increasing")
            object.__setattr__(self, "rho_breaks", breaks)
            object.__setattr__(self, "rho_values", values)

    def rho(self, t: float) -> float:
        if self.rho_values is None:
            return 1.0
        k = int(np.searchsorted(np.asarray(self.rho_breaks), t, side="right"))
        return self.rho_values[k]

    @property
    def sup_abs_rho(self) -> float:
        if self.rho_values is None:
            return 1.0
        return max(abs(v) for v in self.rho_values)

    @property
    def lipschitz(self) -> float:
        coeffs = (
            abs(self.c1) + abs(self.c2) + abs(self.c3) + abs(self.c4)
            + abs(self.kappa_x) + abs(self.kappa_y) + abs(self.kappa_z)
        )
        return self.sup_abs_rho * coeffs

    @property
    def mean_y_sensitivity(self) -> tuple[float, float]:
        """(min, max) over time of the derivative of f in the y-marginal of the law."""
        values = self.rho_values if self.rho_values is not None else (1.0,)
        prods = [v * self.kappa_y for v in values]
        return (min(prods), max(prods))

    @property
    def is_law_free(self) -> bool:
        return self.kappa_x == 0.0 and self.kappa_y == 0.0 and self.kappa_z == 0.0

    def payload(self) -> dict:
        out = {
            "c0": self.c0, "c1": self.c1, "c2": self.c2, "c3": self.c3,
            "phi": self.phi, "c4": self.c4,
            "kappa_x": self.kappa_x, "kappa_y": self.kappa_y, "kappa_z": self.kappa_z,
        }
        if self.rho_values is not None:
            out["rho_breaks"] = list(self.rho_breaks)
            out["rho_values"] = list(self.rho_values)
        return out


@dataclass(frozen=True, eq=False)
class ScenarioSpec:
    terminal: TerminalSpec
    generator: GeneratorSpec
    driver: GaussianDriverSpec

    @property
    def is_law_free(self) -> bool:
        return self.generator.is_law_free and self.terminal.lambda_mean == 0.0

    def payload(self) -> dict:
        return {
            "terminal": self.terminal.payload(),
            "generator": self.generator.payload(),
            "driver": self.driver.payload(),
        }


def eval_terminal(spec: TerminalSpec, x, features: LawFeatures):
    """g(x, mu) with mu reduced to its mean; vectorized over x."""
    x = np.asarray(x, dtype=float)
    phi, _ = NONLINEARITIES[spec.phi]
    out = spec.a + spec.b * x + spec.c * phi(x) + spec.lambda_mean * features.mean_x
    return float(out) if out.ndim == 0 else out


def eval_generator(spec: GeneratorSpec, t: float, x, y, z, features: LawFeatures):
    """f(t, x, y, z, nu) with nu reduced to its means; vectorized over x, y, z."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    phi, _ = NONLINEARITIES[spec.phi]
    core = (
        spec.c0 + spec.c1 * x + spec.c2 * y + spec.c3 * z + spec.c4 * phi(y)
        + spec.kappa_x * features.mean_x
        + spec.kappa_y * features.mean_y
        + spec.kappa_z * features.mean_z
    )
    out = spec.rho(t) * core
    return float(out) if np.ndim(out) == 0 else out


def generator_partials(spec: GeneratorSpec, t: float, x, y, z):
    """(df/dx, df/dy, df/dz) of the generator at the given arguments.

    Exact for the DSL: the law term has no pointwise derivative and the
    nonlinearity library carries its derivatives.
    """
    y = np.asarray(y, dtype=float)
    _, dphi = NONLINEARITIES[spec.phi]
    rho = spec.rho(t)
    df_dy = rho * (spec.c2 + spec.c4 * dphi(y))
    df_dx = rho * spec.c1
    df_dz = rho * spec.c3
    return df_dx, df_dy, df_dz


def law_features(x, y, z, second_moments: bool = False) -> LawFeatures:
    """Componentwise sample means (optionally second moments) of a cloud slice."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    if x.size == 0 or y.size == 0 or z.size == 0:
        raise EmptyCloud("law features need a nonempty cloud")
    feats = {
        "mean_x": float(np.mean(x)),
        "mean_y": float(np.mean(y)),
        "mean_z": float(np.mean(z)),
    }
    if second_moments:
        feats.update(
            m2_x=float(np.mean(x ** 2)),
            m2_y=float(np.mean(y ** 2)),
            m2_z=float(np.mean(z ** 2)),
        )
    return LawFeatures(**feats)


def _two_atom_w2_3d(cloud_a: np.ndarray, cloud_b: np.ndarray) -> float:
    """Exact W2 between two 2-atom equal-weight clouds in R^3 (both couplings)."""
    c_id = np.sum((cloud_a - cloud_b) ** 2) / 2.0
    c_swap = np.sum((cloud_a - cloud_b[::-1]) ** 2) / 2.0
    return math.sqrt(min(c_id, c_swap))


def _two_atom_w2_1d(a: np.ndarray, b: np.ndarray) -> float:
    return math.sqrt(np.mean((np.sort(a) - np.sort(b)) ** 2))


@dataclass(frozen=True)
class AuditReport:
    l_f: float
    l_g: float
    k_min: float
    k_max: float
    max_ratio_f: float
    max_ratio_g: float
    n_probes: int
    bound_at_zero: float


def lipschitz_audit(scn: ScenarioSpec, n_probes: int = 256, seed: int = 0) -> AuditReport:
    """Symbolic constants plus an empirical probe of the Lipschitz ratios.

    Probes pairs of arguments and 2-atom joint clouds (exact W2 by brute
    force over both couplings) and verifies the empirical ratio never exceeds
    the symbolic constant.
    """
    gen, term = scn.generator, scn.terminal
    rng = generator(seed, "lipschitz-audit")
    T = scn.driver.T
    max_ratio_f = 0.0
    max_ratio_g = 0.0
    for _ in range(n_probes):
        t = float(rng.uniform(0.0, T))
        p1, p2 = rng.normal(0.0, 2.0, size=(2, 3))
        cloud1, cloud2 = rng.normal(0.0, 2.0, size=(2, 2, 3))
        feats1 = law_features(cloud1[:, 0], cloud1[:, 1], cloud1[:, 2])
        feats2 = law_features(cloud2[:, 0], cloud2[:, 1], cloud2[:, 2])
        w2 = _two_atom_w2_3d(cloud1, cloud2)
        df = abs(
            eval_generator(gen, t, *p1, feats1) - eval_generator(gen, t, *p2, feats2)
        )
        denom = float(np.sum(np.abs(p1 - p2))) + w2
        if denom > 0:
            max_ratio_f = max(max_ratio_f, df / denom)

        xa, xb = rng.normal(0.0, 2.0, size=2)
        ca, cb = rng.normal(0.0, 2.0, size=(2, 2))
        fa = LawFeatures(mean_x=float(np.mean(ca)))
        fb = LawFeatures(mean_x=float(np.mean(cb)))
        dg = abs(eval_terminal(term, xa, fa) - eval_terminal(term, xb, fb))
        denom_g = abs(xa - xb) + _two_atom_w2_1d(ca, cb)
        if denom_g > 0:
            max_ratio_g = max(max_ratio_g, dg / denom_g)

    if max_ratio_f > gen.lipschitz + _PROBE_SLACK:
        raise ProbeViolation(
            f"empirical generator ratio {max_ratio_f} exceeds symbolic L_f {gen.lipschitz}"
        )
    if max_ratio_g > term.lipschitz + _PROBE_SLACK:
        raise ProbeViolation(
            f"empirical terminal ratio {max_ratio_g} exceeds symbolic L_g {term.lipschitz}"
        )
    k_min, k_max = gen.mean_y_sensitivity
    return AuditReport(
        l_f=gen.lipschitz,
        l_g=term.lipschitz,
        k_min=k_min,
        k_max=k_max,
        max_ratio_f=max_ratio_f,
        max_ratio_g=max_ratio_g,
        n_probes=n_probes,
        bound_at_zero=abs(eval_terminal(term, 0.0, LawFeatures()))
        + gen.sup_abs_rho * abs(gen.c0),
    )


@dataclass(frozen=True)
class OrderProbeResult:
    ordered: bool
    counterexample: tuple | None = None


def generator_order_probe(
    f1: GeneratorSpec, f2: GeneratorSpec, n_probes: int = 256, seed: int = 0, T: float = 1.0
) -> OrderProbeResult:
    """Samples (t, x, y, z, nu) points and checks f1 <= f2 + 1e-12 at all of them."""
    rng = generator(seed, "generator-order-probe")
    for _ in range(n_probes):
        t = float(rng.uniform(0.0, T))
        x, y, z = rng.normal(0.0, 2.0, size=3)
        cloud = rng.normal(0.0, 2.0, size=(4, 3))
        feats = law_features(cloud[:, 0], cloud[:, 1], cloud[:, 2])
        v1 = eval_generator(f1, t, x, y, z, feats)
        v2 = eval_generator(f2, t, x, y, z, feats)
        if v1 > v2 + 1e-12:
            return OrderProbeResult(ordered=False, counterexample=(t, x, y, z, feats))
    return OrderProbeResult(ordered=True)


def terminal_order_probe(
    g1: TerminalSpec, g2: TerminalSpec, n_probes: int = 256, seed: int = 0
) -> OrderProbeResult:
    rng = generator(seed, "terminal-order-probe")
    for _ in range(n_probes):
        x = float(rng.normal(0.0, 2.0))
        feats = LawFeatures(mean_x=float(rng.normal(0.0, 2.0)))
        v1 = eval_terminal(g1, x, feats)
        v2 = eval_terminal(g2, x, feats)
        if v1 > v2 + 1e-12:
            return OrderProbeResult(ordered=False, counterexample=(x, feats))
    return OrderProbeResult(ordered=True)
