"""Experiment orchestration: dispatch configured experiment kinds, write
reports, series and the run manifest.

Output layout under the chosen directory:

    manifest.json       deterministic; lists every emitted file
    reports/*.json      one per TheoremReport (canonical serialization)
    reports/*.csv       flat measurement tables
    series/*.csv        solution series (t, V_t, x_quantile_tag, Y, Z)
    run.log             wall-clock timings (not listed in the manifest; the
                        manifest and reports stay byte-identical across reruns)
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import stats as sstats

from . import __version__
from .config import ExperimentConfig
from .drivers import GaussianDriverSpec, build_clock, sample_paths
from .errors import ConfigInvalid, IoFailure
from .pack import (
    constant_generator_scenario,
    contraction_mean_field_scenario,
    gaussian_scenario,
    identity_scenario,
    linear_scenario,
    mean_field_scenario,
    shift_generator,
    shift_terminal,
)
from .reporting import canonical_json, digest_payload, emit_report, write_series_csv
from .rng import derive_key
from .scenario import eval_terminal, law_features
from .solver import SolverConfig, solve_auxiliary, transfer_evaluate
from .theorems import (
    TheoremReport,
    comparison_check,
    converse_comparison_check,
    lsi_check,
    representation_limit_check,
    scenario_digest,
    stability_check,
    t2_check,
    z_bound_check,
)
from .wick import (
    FirstChaosIntegrand,
    StepFunctionH,
    riemann_wick_integral,
    s_transform_factorization_check,
    s_transform_mc,
)

_DEFAULT_QUANTILES = (0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99)


@dataclass
class ExperimentOutcome:
    name: str
    kind: str
    reports: list
    report_paths: list[Path]
    series_paths: list[Path]
    wall_clock_ms: float

    @property
    def passed(self) -> bool:
        return all(r.passed is not False for r in self.reports)


def _derived_seed(seed: int, *tags) -> int:
    return derive_key(seed, *tags) % (2 ** 63)


# ---------------------------------------------------------------------------
# individual experiments


def _run_solve(cfg: ExperimentConfig, out_dir: Path, name: str) -> ExperimentOutcome:
    t0 = time.perf_counter()
    scn = cfg.scenario
    clock = build_clock(scn.driver, cfg.solver.n_time + 1)
    field, cloud = solve_auxiliary(scn, clock, cfg.solver, cfg.seed)

    n = cloud.n_particles
    term_feats = law_features(cloud.w[:, -1], np.zeros(n), np.zeros(n))
    g_vals = np.asarray(eval_terminal(scn.terminal, cloud.w[:, -1], term_feats))
    terminal_residual = float(np.max(np.abs(field.eval_u(field.n_steps, cloud.w[:, -1]) - g_vals)))

    quantiles = tuple(cfg.params.get("quantiles", _DEFAULT_QUANTILES))
    rows = []
    for i, t in enumerate(field.grid_t):
        v = field.grid_s[i]
        for q in quantiles:
            x = float(sstats.norm.ppf(q)) * np.sqrt(v) if v > 0 else 0.0
            y_val, z_val = transfer_evaluate(field, float(t), x)
            rows.append((float(t), float(v), f"q{int(round(q * 100)):02d}", float(y_val), float(z_val)))
    series_path = out_dir / "series" / f"{name}__solution.csv"
    series_path.parent.mkdir(parents=True, exist_ok=True)
    write_series_csv(series_path, ["t", "V_t", "x_quantile_tag", "Y", "Z"], rows)

    report = TheoremReport(
        theorem="solve",
        scenario_digest=scenario_digest(scn),
        passed=True,
        measurements={
            "grid_t": [float(v) for v in field.grid_t],
            "grid_V": [float(v) for v in field.grid_s],
            "u_coeffs": field.u_coeffs.tolist(),
            "v_coeffs": field.v_coeffs.tolist(),
            "basis_scales": [float(v) for v in field.scales],
            "picard_changes": list(field.convergence),
            "picard_iterations": field.n_iterations,
            "terminal_residual_max": terminal_residual,
        },
        tolerances={},
        std_errors={},
        seed=cfg.seed,
    )
    paths = emit_report([report], out_dir / "reports", prefix=f"{name}__")
    return ExperimentOutcome(
        name=name, kind="solve", reports=[report], report_paths=paths,
        series_paths=[series_path], wall_clock_ms=(time.perf_counter() - t0) * 1e3,
    )


def _default_h_functions(T: float) -> list[StepFunctionH]:
    return [
        StepFunctionH(edges=np.array([0.0, T]), values=np.array([1.0])),
        StepFunctionH(edges=np.array([0.0, T / 2, T]), values=np.array([1.0, -1.0])),
        StepFunctionH(edges=np.array([0.0, T / 3, 2 * T / 3, T]), values=np.array([0.5, 1.5, -0.5])),
    ]


def _run_wick_validate(cfg: ExperimentConfig, out_dir: Path, name: str) -> ExperimentOutcome:
    t0 = time.perf_counter()
    driver = cfg.driver
    clock = build_clock(driver, cfg.solver.n_time + 1)
    n_paths = int(cfg.params.get("n_paths", 20000))
    paths = sample_paths(driver, clock.grid_t[1:], n_paths, _derived_seed(cfg.seed, "wick-paths"))
    h_list = _default_h_functions(driver.T)
    ones = np.ones(n_paths)
    measurements: dict = {}
    ok = True

    norm_rows = []
    for k, h in enumerate(h_list):
        res = s_transform_mc(ones, h, paths)
        within = abs(res.value - 1.0) <= 3.0 * res.std_error
        ok = ok and within
        norm_rows.append({"h": k, "value": res.value, "std_error": res.std_error, "within_3se": within})
    measurements["wick_exponential_normalization"] = norm_rows

    if driver.kind == "brownian":
        sxt_rows = []
        for k, h in enumerate(h_list):
            for node in (clock.grid_t.size // 2, clock.grid_t.size - 1):
                t_node = float(clock.grid_t[node])
                res = s_transform_mc(paths.samples[:, node - 1], h, paths)
                expected = h.value(t_node, clock)
                within = abs(res.value - expected) <= 3.0 * res.std_error
                ok = ok and within
                sxt_rows.append(
                    {"h": k, "t": t_node, "value": res.value, "expected": expected,
                     "std_error": res.std_error, "within_3se": within}
                )
        measurements["s_transform_of_driver"] = sxt_rows

    fact_rows = []
    cell = (clock.grid_t.size - 1) // 2
    for degree in range(5):
        poly = np.zeros(degree + 1)
        poly[degree] = 1.0
        for k, h in enumerate(h_list):
            chk = s_transform_factorization_check(poly, cell, h, paths)
            within = chk.within <= 3.0
            ok = ok and within
            fact_rows.append(
                {"degree": degree, "h": k, "gap": chk.gap, "std_error": chk.std_error,
                 "gap_over_se": chk.within, "within_3se": within}
            )
    measurements["s_transform_factorization"] = fact_rows
    measurements["factorization_note"] = (
        "Monte Carlo factorization over finitely many step functions is evidence, not proof"
    )

    linear_rows = np.tile(np.array([0.0, 1.0]), (clock.grid_t.size - 1, 1))
    integrand = FirstChaosIntegrand.from_rows(clock.grid_t, linear_rows)
    integral = riemann_wick_integral(integrand, paths, clock)
    mean_se = float(np.std(integral) / np.sqrt(n_paths))
    centered_ok = abs(float(np.mean(integral))) <= 3.0 * mean_se
    ok = ok and centered_ok
    measurements["linear_integrand_mean"] = {
        "mean": float(np.mean(integral)), "std_error": mean_se, "within_3se": centered_ok,
    }

    if driver.kind == "brownian":
        v_total = clock.V_T
        target_var = v_total ** 2 / 2.0
        var_obs = float(np.var(integral))
        var_ok = abs(var_obs - target_var) <= 0.05 * target_var
        x_T = paths.samples[:, -1]
        closed_form = 0.5 * (x_T ** 2 - v_total)
        gap = integral - closed_form
        gap_se = float(np.std(gap) / np.sqrt(n_paths))
        mean_ok = abs(float(np.mean(gap))) <= 3.0 * gap_se
        ok = ok and var_ok and mean_ok
        measurements["quadratic_identity"] = {
            "variance": var_obs, "variance_target": target_var, "variance_ok": var_ok,
            "mean_gap": float(np.mean(gap)), "gap_std_error": gap_se, "mean_ok": mean_ok,
        }

    report = TheoremReport(
        theorem="wick_validate",
        scenario_digest=(
            digest_payload(cfg.driver.payload()) if cfg.scenario is None else scenario_digest(cfg.scenario)
        ),
        passed=ok,
        measurements=measurements,
        tolerances={"statistic_over_se": 3.0, "variance_rel": 0.05},
        std_errors={},
        seed=cfg.seed,
    )
    paths_out = emit_report([report], out_dir / "reports", prefix=f"{name}__")
    return ExperimentOutcome(
        name=name, kind="wick_validate", reports=[report], report_paths=paths_out,
        series_paths=[], wall_clock_ms=(time.perf_counter() - t0) * 1e3,
    )


def _run_check(cfg: ExperimentConfig, out_dir: Path, name: str) -> ExperimentOutcome:
    t0 = time.perf_counter()
    kind = cfg.kind
    p = cfg.params
    if kind == "comparison":
        report = comparison_check(cfg.scenario, cfg.scenario_2, cfg.solver, p["t_list"], cfg.seed)
    elif kind == "representation":
        report = representation_limit_check(
            cfg.scenario, float(p["t"]), float(p["y"]), float(p["z"]), p["eps_list"], cfg.solver, cfg.seed
        )
    elif kind == "converse":
        probe_grid = [tuple(float(v) for v in row) for row in p["probe_grid"]]
        report = converse_comparison_check(
            cfg.scenario, cfg.scenario_2, cfg.solver, probe_grid, float(p["eps"]), cfg.seed
        )
    elif kind == "stability":
        report = stability_check(cfg.scenario, cfg.scenario_2, cfg.solver, cfg.seed)
    elif kind == "t2":
        report = t2_check(cfg.scenario, float(p["t"]), p["shift_list"], cfg.solver, cfg.seed)
    elif kind == "lsi":
        report = lsi_check(cfg.scenario, float(p["t"]), p["lambda_list"], cfg.solver, cfg.seed)
    elif kind == "zbound":
        clock = build_clock(cfg.scenario.driver, cfg.solver.n_time + 1)
        field, cloud = solve_auxiliary(cfg.scenario, clock, cfg.solver, cfg.seed)
        report = z_bound_check(field, cfg.scenario, clock, cloud, seed=cfg.seed)
    else:
        raise ConfigInvalid(f"kind: unknown experiment kind {kind!r}")
    paths = emit_report([report], out_dir / "reports", prefix=f"{name}__")
    return ExperimentOutcome(
        name=name, kind=kind, reports=[report], report_paths=paths,
        series_paths=[], wall_clock_ms=(time.perf_counter() - t0) * 1e3,
    )


def run_single(cfg: ExperimentConfig, out_dir: Path, name: str | None = None) -> ExperimentOutcome:
    name = name or cfg.kind
    if cfg.kind == "solve":
        return _run_solve(cfg, out_dir, name)
    if cfg.kind == "wick_validate":
        return _run_wick_validate(cfg, out_dir, name)
    return _run_check(cfg, out_dir, name)


# ---------------------------------------------------------------------------
# the default suite


def _suite_entries(seed: int) -> list[ExperimentConfig]:
    brownian = GaussianDriverSpec.brownian(1.0)
    fbm07 = GaussianDriverSpec.fbm(0.7, 1.0)
    small = SolverConfig(n_time=32, n_particles=8000)
    entries = []

    def add(name, kind, scenario=None, scenario_2=None, driver=brownian, solver=small, params=None):
        entries.append(
            (
                name,
                ExperimentConfig(
                    kind=kind,
                    seed=_derived_seed(seed, name),
                    driver=driver,
                    solver=solver,
                    scenario=scenario,
                    scenario_2=scenario_2,
                    params=params or {},
                ),
            )
        )

    add("solve_identity", "solve", identity_scenario(brownian))
    add("solve_identity_fbm", "solve", identity_scenario(fbm07), driver=fbm07)
    add("solve_linear", "solve", linear_scenario(brownian))
    add("solve_mean_field", "solve", mean_field_scenario(brownian))
    add("wick_validate", "wick_validate", driver=fbm07, params={"n_paths": 20000})
    add(
        "comparison_constant", "comparison",
        constant_generator_scenario(brownian, 0.0), constant_generator_scenario(brownian, 1.0),
        params={"t_list": [0.0, 0.5, 1.0]},
    )
    mf = mean_field_scenario(brownian)
    add(
        "comparison_mean_field", "comparison", mf, shift_terminal(mf, 1.0),
        params={"t_list": [0.0, 0.5, 1.0]},
    )
    add(
        "representation", "representation", contraction_mean_field_scenario(brownian),
        solver=SolverConfig(n_time=16, n_particles=16000),
        params={"t": 0.25, "y": 1.0, "z": 0.5, "eps_list": [0.2, 0.1, 0.05]},
    )
    mf_small = mean_field_scenario(brownian, alpha=0.2)
    add(
        "converse", "converse", mf_small, shift_generator(mf_small, 0.1),
        solver=SolverConfig(n_time=16, n_particles=8000),
        params={"eps": 0.1, "probe_grid": [[t, y, 0.5] for t in (0.1, 0.4, 0.7) for y in (-1.0, 0.5, 2.0)]},
    )
    add("stability", "stability", linear_scenario(brownian), shift_terminal(linear_scenario(brownian), 0.5))
    gauss = gaussian_scenario(brownian)
    add("t2", "t2", gauss, params={"t": 1.0, "shift_list": [0.0, 0.5, 1.0, 2.0]})
    add("lsi", "lsi", gauss, params={"t": 1.0, "lambda_list": [0.0, 0.5, 1.0]})
    add("zbound", "zbound", linear_scenario(brownian))
    return entries


def _thread_count() -> int:
    raw = os.environ.get("GAUSSBSDE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def run_config(cfg: ExperimentConfig, out_root, quiet: bool = False) -> tuple[Path, bool]:
    """Run the configured experiment(s); write manifest.json last.

    Returns (manifest_path, all_passed).  No manifest is written when an
    experiment raises.
    """
    out_root = Path(out_root)
    out_root.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()

    if cfg.kind == "full_suite":
        entries = _suite_entries(cfg.seed)
        threads = _thread_count()
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                futures = [pool.submit(run_single, sub, out_root, name) for name, sub in entries]
                outcomes = [f.result() for f in futures]
        else:
            outcomes = [run_single(sub, out_root, name) for name, sub in entries]
    else:
        outcomes = [run_single(cfg, out_root)]

    manifest = {
        "artifact_version": __version__,
        "kind": cfg.kind,
        "seed": cfg.seed,
        "config_digest": cfg.digest,
        "experiments": [
            {
                "name": o.name,
                "kind": o.kind,
                "pass": o.passed,
                "reports": sorted(str(p.relative_to(out_root)) for p in o.report_paths),
                "series": sorted(str(p.relative_to(out_root)) for p in o.series_paths),
                "wall_clock_ms": None,
            }
            for o in outcomes
        ],
        "wall_clock_ms": None,
    }
    manifest_path = out_root / "manifest.json"
    try:
        manifest_path.write_text(canonical_json(manifest) + "\n")
        log_lines = [
            f"{o.name}: {o.wall_clock_ms:.1f} ms, pass={o.passed}" for o in outcomes
        ]
        log_lines.append(f"total: {(time.perf_counter() - t0) * 1e3:.1f} ms")
        (out_root / "run.log").write_text("\n".join(log_lines) + "\n")
    except OSError as exc:
        raise IoFailure(f"could not write manifest under {out_root}: {exc}") from exc

    all_passed = all(o.passed for o in outcomes)
    if not quiet:
        for o in outcomes:
            print(f"[{'PASS' if o.passed else 'FAIL'}] {o.name} ({o.wall_clock_ms:.0f} ms)")
        print(f"manifest: {manifest_path}")
    return manifest_path, all_passed
