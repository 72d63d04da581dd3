"""Executable checks: each structural property of the solution map becomes a
deterministic procedure with explicit tolerances and closed-form oracles where
they exist, reported as a TheoremReport.

Every check derives its random streams from (seed, check name), so reports
are byte-identical across reruns with the same configuration and seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .drivers import GaussianDriverSpec, VarianceClock, build_clock, sample_paths
from .errors import (
    HypothesisUnobserved,
    HypothesisUnsatisfied,
    UnsupportedScenario,
)
from .measures import GaussianLaw1D, LawFeatures, entropy_functional, gaussian_kl, gaussian_w2
from .reporting import digest_payload
from .rng import derive_key
from .scenario import (
    ScenarioSpec,
    eval_generator,
    eval_terminal,
    generator_order_probe,
    law_features,
    lipschitz_audit,
    terminal_order_probe,
)
from .solver import (
    SolverConfig,
    SolutionField,
    ParticleCloud,
    representation_solve,
    solve_auxiliary,
    transfer_evaluate,
)

_EXACT_TOL = 1e-12


@dataclass(frozen=True)
class TheoremReport:
    """Outcome of one check.  ``passed`` is None for report-only runs."""

    theorem: str
    scenario_digest: str
    passed: bool | None
    measurements: dict
    tolerances: dict
    std_errors: dict
    seed: int
    notes: tuple[str, ...] = ()

    def payload(self) -> dict:
        return {
            "theorem": self.theorem,
            "scenario_digest": self.scenario_digest,
            "pass": self.passed,
            "measurements": self.measurements,
            "tolerances": self.tolerances,
            "std_errors": self.std_errors,
            "seed": self.seed,
            "notes": list(self.notes),
            "runtime_ms": None,
        }


def scenario_digest(*scns: ScenarioSpec) -> str:
    return digest_payload([s.payload() for s in scns])


def _derived_seed(seed: int, *tags) -> int:
    return derive_key(seed, *tags) % (2 ** 63)


def _require_same_driver(scn1: ScenarioSpec, scn2: ScenarioSpec):
    if scn1.driver.payload() != scn2.driver.payload():
        raise HypothesisUnsatisfied("both scenarios must share the driver")


def _require_clock_differentiable(driver: GaussianDriverSpec, t: float):
    if driver.kind == "brownian":
        return
    if driver.kind == "fbm" and t > 0:
        return
    raise UnsupportedScenario(
        "variance clock must be differentiable at t (brownian, or fbm with t > 0)"
    )


def _require_x_free(scn: ScenarioSpec):
    if scn.generator.c1 != 0.0:
        raise UnsupportedScenario("representation checks need a state-free generator (c1 = 0)")


# ---------------------------------------------------------------------------
# comparison


def comparison_check(
    scn1: ScenarioSpec,
    scn2: ScenarioSpec,
    cfg: SolverConfig,
    t_list,
    seed: int,
    n_order_probes: int = 256,
) -> TheoremReport:
    """Pointwise ordering of the two solutions under the ordering hypotheses.

    Refuses to run (HypothesisUnsatisfied) when the generators depend on the
    law of Z, when the mean coupling in Y can be negative for both scenarios,
    or when the coefficient ordering probes fail: outside those hypotheses the
    conclusion is known to fail in general.
    """
    _require_same_driver(scn1, scn2)
    g1, g2 = scn1.generator, scn2.generator
    if g1.kappa_z != 0.0 or g2.kappa_z != 0.0:
        raise HypothesisUnsatisfied("comparison requires no dependence on the law of Z (kappa_z = 0)")
    ok1 = g1.mean_y_sensitivity[0] >= 0.0
    ok2 = g2.mean_y_sensitivity[0] >= 0.0
    if not (ok1 or ok2):
        raise HypothesisUnsatisfied(
            "comparison requires a nonnegative mean-coupling in Y for one generator"
        )
    probe_f = generator_order_probe(g1, g2, n_order_probes, _derived_seed(seed, "cmp-f"), T=scn1.driver.T)
    if not probe_f.ordered:
        raise HypothesisUnsatisfied(f"generator ordering fails at probe {probe_f.counterexample}")
    probe_g = terminal_order_probe(scn1.terminal, scn2.terminal, n_order_probes, _derived_seed(seed, "cmp-g"))
    if not probe_g.ordered:
        raise HypothesisUnsatisfied(f"terminal ordering fails at probe {probe_g.counterexample}")

    t_list = [float(t) for t in t_list]
    clock = build_clock(scn1.driver, cfg.n_time + 1)
    clock2 = build_clock(scn1.driver, 2 * cfg.n_time + 1)
    fields = {}
    for tag, scn in (("1", scn1), ("2", scn2)):
        fields[tag], _ = solve_auxiliary(scn, clock, cfg, seed)
        fields[tag + "fine"], _ = solve_auxiliary(scn, clock2, cfg, seed)

    pos_t = sorted({t for t in t_list if t > 0})
    paths = sample_paths(scn1.driver, np.asarray(pos_t), cfg.n_particles, _derived_seed(seed, "cmp-eval")) if pos_t else None

    def states_at(t):
        if t <= 0:
            return np.zeros(cfg.n_particles)
        return paths.samples[:, pos_t.index(t)]

    scheme_err = 0.0
    for tag in ("1", "2"):
        for t in t_list:
            x = states_at(t)
            y_a, _ = transfer_evaluate(fields[tag], t, x)
            y_b, _ = transfer_evaluate(fields[tag + "fine"], t, x)
            scheme_err = max(scheme_err, float(np.max(np.abs(np.asarray(y_a) - np.asarray(y_b)))))
    delta = 3.0 * scheme_err

    fractions = []
    for t in t_list:
        x = states_at(t)
        y1, _ = transfer_evaluate(fields["1"], t, x)
        y2, _ = transfer_evaluate(fields["2"], t, x)
        fractions.append(float(np.mean(np.asarray(y1) > np.asarray(y2) + delta)))
    max_fraction = max(fractions)

    return TheoremReport(
        theorem="comparison",
        scenario_digest=scenario_digest(scn1, scn2),
        passed=max_fraction <= 1e-3,
        measurements={
            "t_list": t_list,
            "violation_fraction": fractions,
            "max_violation_fraction": max_fraction,
            "delta": delta,
            "scheme_error_estimate": scheme_err,
        },
        tolerances={"max_violation_fraction": 1e-3},
        std_errors={},
        seed=seed,
    )


# ---------------------------------------------------------------------------
# representation and converse comparison


def _integrate_f_dv(scn: ScenarioSpec, clock: VarianceClock, a: float, b: float, feats: LawFeatures, y: float, z: float) -> float:
    """int_a^b f(r, 0, y, z, frozen law) dV_r, exact for piecewise-constant
    time factors and the piecewise-linear clock."""
    gen = scn.generator
    nodes = [a, b]
    nodes.extend(t for t in clock.grid_t if a < t < b)
    if gen.rho_breaks:
        nodes.extend(t for t in gen.rho_breaks if a < t < b)
    nodes = sorted(set(nodes))
    total = 0.0
    for lo, hi in zip(nodes, nodes[1:]):
        f_val = eval_generator(gen, float(lo), 0.0, y, z, feats)
        total += f_val * (clock.value(hi) - clock.value(lo))
    return total


def representation_limit_check(
    scn: ScenarioSpec,
    t: float,
    y: float,
    z: float,
    eps_list,
    cfg: SolverConfig,
    seed: int,
    rel_tol: float = 0.05,
) -> TheoremReport:
    """Short-horizon difference quotients A(eps) = (Y^eps_t - y)/eps against
    the clock integral B(eps) of the generator at the frozen law.

    Asserts |A - B| decreasing (the proof-level quantity), the final closeness
    of A to the generator value, and the determinism of the time-t value.
    """
    _require_clock_differentiable(scn.driver, t)
    _require_x_free(scn)
    eps_list = [float(e) for e in eps_list]
    if any(e2 >= e1 for e1, e2 in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly decreasing")

    clock = build_clock(scn.driver, max(4 * cfg.n_time, 256) + 1)
    frozen = LawFeatures(mean_x=0.0, mean_y=y, mean_z=z)
    f_target = eval_generator(scn.generator, t, 0.0, y, z, frozen)

    a_vals, b_vals, gaps, ses, sigmas = [], [], [], [], []
    for k, eps in enumerate(eps_list):
        rep = representation_solve(scn, clock, t, eps, y, z, cfg, _derived_seed(seed, "repr", k))
        a_vals.append((rep.value - y) / eps)
        b_vals.append(_integrate_f_dv(scn, clock, t, t + eps, frozen, y, z) / eps)
        gaps.append(abs(a_vals[-1] - b_vals[-1]))
        ses.append(rep.std_error / eps)
        sigmas.append(rep.particle_sigma)

    # the decrease is asserted up to the Monte Carlo noise of both quotients
    # plus an absolute floor for scheme-exact cases where every gap is roundoff
    decreasing = all(
        g2 < g1 + 1e-9 + se1 + se2
        for g1, g2, se1, se2 in zip(gaps, gaps[1:], ses, ses[1:])
    )
    final_tol = rel_tol * (1.0 + abs(f_target)) + 3.0 * ses[-1]
    final_ok = abs(a_vals[-1] - f_target) <= final_tol
    determinism_ok = all(
        sig <= 3.0 * se * eps + 1e-15 for sig, se, eps in zip(sigmas, ses, eps_list)
    )

    return TheoremReport(
        theorem="representation",
        scenario_digest=scenario_digest(scn),
        passed=decreasing and final_ok and determinism_ok,
        measurements={
            "eps_list": eps_list,
            "A": a_vals,
            "B": b_vals,
            "abs_gap": gaps,
            "f_at_frozen_law": f_target,
            "final_error": abs(a_vals[-1] - f_target),
            "particle_sigma": sigmas,
            "gap_decreasing": decreasing,
            "determinism_ok": determinism_ok,
        },
        tolerances={"final_error": final_tol, "particle_sigma_factor": 3.0},
        std_errors={"A": ses},
        seed=seed,
        notes=(
            "B integrates the generator against dV on [t, t+eps] (proof-level reading); "
            "the dr reading differs by the clock density when V'(t) != 1",
        ),
    )


def converse_comparison_check(
    scn1: ScenarioSpec,
    scn2: ScenarioSpec,
    cfg: SolverConfig,
    probe_grid,
    eps: float,
    seed: int,
) -> TheoremReport:
    """If the short-horizon solutions are ordered at every probe, the
    generators must be ordered there too; reports both directions.

    Raises HypothesisUnobserved (with the partial report attached) when the
    solution ordering fails at some probe.
    """
    _require_same_driver(scn1, scn2)
    _require_x_free(scn1)
    _require_x_free(scn2)
    clock = build_clock(scn1.driver, max(4 * cfg.n_time, 256) + 1)

    rows = []
    ordering_ok = True
    for k, (t, y, z) in enumerate(probe_grid):
        _require_clock_differentiable(scn1.driver, t)
        probe_seed = _derived_seed(seed, "converse", k)
        rep1 = representation_solve(scn1, clock, t, eps, y, z, cfg, probe_seed)
        rep2 = representation_solve(scn2, clock, t, eps, y, z, cfg, probe_seed)
        mc_tol = 3.0 * (rep1.std_error + rep2.std_error)
        frozen = LawFeatures(mean_x=0.0, mean_y=y, mean_z=z)
        f1 = eval_generator(scn1.generator, t, 0.0, y, z, frozen)
        f2 = eval_generator(scn2.generator, t, 0.0, y, z, frozen)
        y_ordered = rep1.value <= rep2.value + mc_tol
        ordering_ok = ordering_ok and y_ordered
        rows.append(
            {
                "t": t, "y": y, "z": z,
                "y_eps_1": rep1.value, "y_eps_2": rep2.value,
                "y_margin": rep2.value - rep1.value, "mc_tol": mc_tol,
                "f1": f1, "f2": f2, "f_margin": f2 - f1,
                "y_ordered": y_ordered,
            }
        )

    f_ordered = all(r["f_margin"] >= -1e-9 for r in rows)
    report = TheoremReport(
        theorem="converse_comparison",
        scenario_digest=scenario_digest(scn1, scn2),
        passed=(f_ordered if ordering_ok else None),
        measurements={"probes": rows, "y_ordering_observed": ordering_ok, "f_ordered": f_ordered},
        tolerances={"f_margin": -1e-9},
        std_errors={},
        seed=seed,
    )
    if not ordering_ok:
        raise HypothesisUnobserved(
            "solution ordering fails at a probe; generator ordering not asserted",
            report=report,
        )
    return report


# ---------------------------------------------------------------------------
# stability


def _field_on_paths(field: SolutionField, x_full: np.ndarray):
    n_nodes = x_full.shape[1]
    y = np.column_stack([field.eval_u(i, x_full[:, i]) for i in range(n_nodes)])
    z = np.column_stack([field.eval_v(i, x_full[:, i]) for i in range(n_nodes - 1)])
    return y, z


def _stability_ratio(scn1, scn2, cfg, n_time, seed):
    clock = build_clock(scn1.driver, n_time + 1)
    f1, _ = solve_auxiliary(scn1, clock, cfg, seed)
    f2, _ = solve_auxiliary(scn2, clock, cfg, seed)
    paths = sample_paths(
        scn1.driver, clock.grid_t[1:], cfg.n_particles, _derived_seed(seed, "stability-eval", n_time)
    )
    x_full = np.concatenate([np.zeros((paths.n_paths, 1)), paths.samples], axis=1)
    y1, z1 = _field_on_paths(f1, x_full)
    y2, z2 = _field_on_paths(f2, x_full)
    dv = np.diff(clock.grid_V)

    lhs = float(np.mean(np.max((y1 - y2) ** 2, axis=1) + ((z1 - z2) ** 2 * dv).sum(axis=1)))

    term_feats = law_features(x_full[:, -1], np.zeros(paths.n_paths), np.zeros(paths.n_paths))
    dg = np.asarray(eval_terminal(scn1.terminal, x_full[:, -1], term_feats)) - np.asarray(
        eval_terminal(scn2.terminal, x_full[:, -1], term_feats)
    )
    df_sum = np.zeros(paths.n_paths)
    for i in range(dv.size):
        feats = law_features(x_full[:, i], y1[:, i], z1[:, i])
        fa = np.asarray(eval_generator(scn1.generator, float(clock.grid_t[i]), x_full[:, i], y1[:, i], z1[:, i], feats))
        fb = np.asarray(eval_generator(scn2.generator, float(clock.grid_t[i]), x_full[:, i], y1[:, i], z1[:, i], feats))
        df_sum += np.abs(fa - fb) * dv[i]
    rhs = float(np.mean(dg ** 2 + df_sum ** 2))
    return lhs, rhs


def stability_check(scn1: ScenarioSpec, scn2: ScenarioSpec, cfg: SolverConfig, seed: int) -> TheoremReport:
    """Empirical ratio of the two sides of the coefficient-stability estimate,
    required finite and stable (within 20%) under time-grid refinement."""
    _require_same_driver(scn1, scn2)
    lhs1, rhs1 = _stability_ratio(scn1, scn2, cfg, cfg.n_time, seed)
    lhs2, rhs2 = _stability_ratio(scn1, scn2, cfg, 2 * cfg.n_time, seed)

    if rhs1 <= _EXACT_TOL and lhs1 <= _EXACT_TOL:
        return TheoremReport(
            theorem="stability",
            scenario_digest=scenario_digest(scn1, scn2),
            passed=True,
            measurements={"lhs": [lhs1, lhs2], "rhs": [rhs1, rhs2], "ratio": "undefined-zero"},
            tolerances={},
            std_errors={},
            seed=seed,
            notes=("identical coefficients: both sides vanish; ratio undefined",),
        )

    ratio1 = lhs1 / rhs1 if rhs1 > 0 else math.inf
    ratio2 = lhs2 / rhs2 if rhs2 > 0 else math.inf
    finite = math.isfinite(ratio1) and math.isfinite(ratio2)
    stable = finite and abs(ratio2 / ratio1 - 1.0) <= 0.2 if ratio1 > 0 else finite
    return TheoremReport(
        theorem="stability",
        scenario_digest=scenario_digest(scn1, scn2),
        passed=bool(finite and stable),
        measurements={
            "lhs": [lhs1, lhs2],
            "rhs": [rhs1, rhs2],
            "ratio": [ratio1, ratio2],
            "ratio_drift": abs(ratio2 / ratio1 - 1.0) if ratio1 > 0 else math.inf,
        },
        tolerances={"ratio_drift": 0.2},
        std_errors={},
        seed=seed,
    )


# ---------------------------------------------------------------------------
# functional inequalities


@dataclass(frozen=True)
class InequalityConstants:
    """Constants of the transportation and log-Sobolev bounds at one time."""

    c_tr_y: float
    c_tr_z_grid: float
    c_tr_z_limit: float
    c_ls_y: float
    alpha_at_min: float
    p: float
    v_t: float
    v_total: float


def transport_constants(
    l_g: float, l_f: float, clock: VarianceClock, t: float, p: float = 2.0
) -> InequalityConstants:
    """Exact constants; the alpha-infimum for the Z constant is evaluated on a
    log-spaced grid (used in assertions) alongside its analytic limit c/2
    (not attained, approached as alpha grows)."""
    if min(l_g, l_f) < 0 or p < 1:
        raise ValueError("need l_g, l_f >= 0 and p >= 1")
    v_t = clock.value(t)
    lam = clock.V_T - v_t
    base = l_g + l_f * lam
    growth = math.exp(2.0 * l_f * lam)
    c_tr_y = 2.0 * base ** 2 * growth
    c_ls_y = 2.0 * clock.V_T * base ** 2 * growth

    c = math.exp(2.0 * p * l_f * lam) * base ** (2.0 * p)
    alphas = np.logspace(-6.0, 8.0, 281)
    brackets = (1.0 + alphas * c) / (2.0 * alphas)
    k = int(np.argmin(brackets))
    c_tr_z_grid = 2.0 * brackets[k] ** (1.0 / (2.0 * p))
    c_tr_z_limit = 2.0 * (c / 2.0) ** (1.0 / (2.0 * p)) if c > 0 else 0.0
    return InequalityConstants(
        c_tr_y=c_tr_y,
        c_tr_z_grid=float(c_tr_z_grid),
        c_tr_z_limit=c_tr_z_limit,
        c_ls_y=c_ls_y,
        alpha_at_min=float(alphas[k]),
        p=p,
        v_t=v_t,
        v_total=clock.V_T,
    )


def _gaussian_family_law(scn: ScenarioSpec, clock: VarianceClock, t: float) -> GaussianLaw1D:
    """Closed-form marginal law of Y_t for law-free affine scenarios."""
    gen, term = scn.generator, scn.terminal
    if not (
        gen.is_law_free
        and gen.c1 == 0.0
        and gen.c3 == 0.0
        and gen.phi == "none"
        and gen.rho_values is None
        and term.phi == "none"
        and term.lambda_mean == 0.0
    ):
        raise UnsupportedScenario(
            "closed-form Gaussian family needs affine law-free f(t,y) and affine g(x)"
        )
    v_t = clock.value(t)
    lam = clock.V_T - v_t
    factor = math.exp(gen.c2 * lam)
    if gen.c2 != 0.0:
        shift = gen.c0 * (factor - 1.0) / gen.c2
    else:
        shift = gen.c0 * lam
    mean = factor * term.a + shift
    variance = (term.b * factor) ** 2 * v_t
    return GaussianLaw1D(mean=mean, variance=variance)


def t2_check(scn: ScenarioSpec, t: float, shift_list, cfg: SolverConfig, seed: int = 0) -> TheoremReport:
    """Quadratic transportation inequality on the closed-form Gaussian family.

    Under the adopted convention W2^2 <= C * H; the definitional ratio
    W2 / sqrt(H) is reported alongside.  Horizons with V_T > 1 run in
    report-only mode (the stated constant can then fall below the sharp
    Gaussian one).
    """
    clock = build_clock(scn.driver, max(cfg.n_time, 64) + 1)
    law = _gaussian_family_law(scn, clock, t)
    audit = lipschitz_audit(scn, n_probes=32, seed=seed)
    consts = transport_constants(audit.l_g, audit.l_f, clock, t)

    rows = []
    ok = True
    for m in shift_list:
        shifted = GaussianLaw1D(mean=law.mean + float(m), variance=law.variance)
        w2 = gaussian_w2(law, shifted)
        h = gaussian_kl(shifted, law)
        satisfied = w2 ** 2 <= consts.c_tr_y * h + _EXACT_TOL
        ok = ok and satisfied
        rows.append(
            {
                "shift": float(m),
                "w2_squared": w2 ** 2,
                "relative_entropy": h,
                "ratio_quadratic": (w2 ** 2 / h) if h > 0 else 0.0,
                "ratio_definitional": (w2 / math.sqrt(h)) if h > 0 else 0.0,
                "satisfied": satisfied,
            }
        )

    report_only = clock.V_T > 1.0 + _EXACT_TOL
    sharp = 2.0 * law.variance
    return TheoremReport(
        theorem="t2",
        scenario_digest=scenario_digest(scn),
        passed=None if report_only else ok,
        measurements={
            "t": t,
            "sigma_sq": law.variance,
            "c_tr_y": consts.c_tr_y,
            "sharp_constant": sharp,
            "slack": consts.c_tr_y - sharp,
            "shifts": rows,
        },
        tolerances={"w2_squared_vs_c_times_h": _EXACT_TOL},
        std_errors={},
        seed=seed,
        notes=(
            ("report-only: V_T > 1, stated constant may fall below the sharp one",)
            if report_only
            else ()
        ),
    )


def lsi_check(scn: ScenarioSpec, t: float, lambda_list, cfg: SolverConfig, seed: int = 0) -> TheoremReport:
    """Log-Sobolev inequality on the Gaussian family with the exponential test
    family f_lam(x) = exp(lam x / 2); entropies are cross-checked by
    quadrature."""
    clock = build_clock(scn.driver, max(cfg.n_time, 64) + 1)
    law = _gaussian_family_law(scn, clock, t)
    audit = lipschitz_audit(scn, n_probes=32, seed=seed)
    consts = transport_constants(audit.l_g, audit.l_f, clock, t)

    m, s2 = law.mean, law.variance
    rows = []
    ok = True
    max_quad_error = 0.0
    for lam in lambda_list:
        lam = float(lam)
        mgf = math.exp(lam * m + 0.5 * lam ** 2 * s2)
        ent_exact = 0.5 * lam ** 2 * s2 * mgf
        dirichlet = 0.25 * lam ** 2 * mgf
        ent_quad = entropy_functional(law, lambda x, _l=lam: np.exp(_l * x))
        quad_err = abs(ent_quad - ent_exact)
        max_quad_error = max(max_quad_error, quad_err)
        ratio = ent_exact / dirichlet if dirichlet > 0 else 0.0
        satisfied = ent_exact <= consts.c_ls_y * dirichlet + _EXACT_TOL
        ok = ok and satisfied and quad_err <= 1e-6
        rows.append(
            {
                "lambda": lam,
                "entropy_exact": ent_exact,
                "entropy_quadrature": ent_quad,
                "dirichlet": dirichlet,
                "ratio": ratio,
                "satisfied": satisfied,
            }
        )

    return TheoremReport(
        theorem="lsi",
        scenario_digest=scenario_digest(scn),
        passed=ok,
        measurements={
            "t": t,
            "sigma_sq": s2,
            "c_ls_y": consts.c_ls_y,
            "sharp_ratio": 2.0 * s2,
            "max_quadrature_error": max_quad_error,
            "lambdas": rows,
        },
        tolerances={"quadrature_error": 1e-6, "ratio_vs_c": _EXACT_TOL},
        std_errors={},
        seed=seed,
    )


# ---------------------------------------------------------------------------
# Z bound


def z_bound_check(
    field: SolutionField,
    scn: ScenarioSpec,
    clock: VarianceClock,
    cloud: ParticleCloud,
    seed: int = 0,
    slack: float = 0.05,
) -> TheoremReport:
    """Pathwise bound on the control field with audited constants:
    |Z(s)| <= (1 + slack) * exp(L_f (V_T - s)) (L_g + L_f (V_T - s))."""
    audit = lipschitz_audit(scn, n_probes=64, seed=seed)
    v_total = clock.V_T
    margins, observed, bounds = [], [], []
    ok = True
    atol = 1e-8  # absolute floor so a bound of exactly 0 tolerates roundoff
    for i in range(field.n_steps):
        s = field.grid_s[i]
        lam = v_total - s
        bound = math.exp(audit.l_f * lam) * (audit.l_g + audit.l_f * lam)
        z_vals = np.abs(field.eval_v(i, cloud.w[:, i]))
        obs = float(np.max(z_vals))
        margin = (1.0 + slack) * bound + atol - obs
        ok = ok and margin >= 0.0
        observed.append(obs)
        bounds.append(bound)
        margins.append(margin)
    return TheoremReport(
        theorem="z_bound",
        scenario_digest=scenario_digest(scn),
        passed=ok,
        measurements={
            "grid_s": [float(v) for v in field.grid_s[: field.n_steps]],
            "bound": bounds,
            "observed_max": observed,
            "margin": margins,
            "min_margin": min(margins),
        },
        tolerances={"slack": slack},
        std_errors={},
        seed=seed,
    )
