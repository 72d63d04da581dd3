"""Experiment configuration: a single JSON tree, validated with messages that
name the offending key, and a canonical emitted form that round-trips."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .drivers import GaussianDriverSpec
from .errors import ConfigInvalid
from .reporting import canonical_json, digest_payload
from .scenario import GeneratorSpec, NONLINEARITIES, ScenarioSpec, TerminalSpec
from .solver import SolverConfig, Z_ESTIMATORS

KINDS = (
    "solve",
    "wick_validate",
    "comparison",
    "representation",
    "converse",
    "stability",
    "t2",
    "lsi",
    "zbound",
    "full_suite",
)

_TWO_SCENARIO_KINDS = ("comparison", "converse", "stability")


def _fail(key: str, message: str):
    raise ConfigInvalid(f"{key}: {message}")


def _get(tree: dict, key: str, path: str, required: bool = True, default=None):
    if key not in tree:
        if required:
            _fail(f"{path}.{key}" if path else key, "required key is missing")
        return default
    return tree[key]


def _number(tree: dict, key: str, path: str, required: bool = True, default=None) -> float:
    value = _get(tree, key, path, required, default)
    if value is None:
        return default
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(f"{path}.{key}" if path else key, "must be a number")
    return float(value)


def _integer(tree: dict, key: str, path: str, required: bool = True, default=None) -> int:
    value = _get(tree, key, path, required, default)
    if value is None:
        return default
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(f"{path}.{key}" if path else key, "must be an integer")
    return int(value)


def _load_covariance_file(path: Path, T: float) -> GaussianDriverSpec:
    try:
        with open(path, newline="") as handle:
            rows = [[float(v) for v in row if v.strip() != ""] for row in csv.reader(handle)]
    except (OSError, ValueError) as exc:
        _fail("driver.covariance_file", f"cannot read covariance table: {exc}")
    rows = [row for row in rows if row]
    n = len(rows)
    if n == 0:
        _fail("driver.covariance_file", "covariance table is empty")
    grid = np.array([(i + 1) * T / n for i in range(n)])
    try:
        return GaussianDriverSpec.custom(grid, rows, T)
    except ValueError as exc:
        _fail("driver.covariance_file", str(exc))


def parse_driver(tree, path: str = "driver", base_dir: Path | None = None) -> GaussianDriverSpec:
    if not isinstance(tree, dict):
        _fail(path, "must be an object")
    kind = _get(tree, "kind", path)
    if kind not in ("brownian", "fbm", "custom"):
        _fail(f"{path}.kind", "must be one of 'brownian', 'fbm', 'custom'")
    T = _number(tree, "T", path, required=False, default=1.0)
    if T <= 0:
        _fail(f"{path}.T", "horizon must be positive")
    if kind == "brownian":
        return GaussianDriverSpec.brownian(T)
    if kind == "fbm":
        hurst = _number(tree, "hurst", path)
        if not 0.0 < hurst < 1.0:
            _fail(f"{path}.hurst", "hurst must be in (0,1)")
        return GaussianDriverSpec.fbm(hurst, T)
    if "cov_grid" in tree and "cov_matrix" in tree:
        try:
            return GaussianDriverSpec(
                kind="custom",
                T=T,
                cov_grid=np.asarray(tree["cov_grid"], dtype=float),
                cov_matrix=np.asarray(tree["cov_matrix"], dtype=float),
            )
        except (ValueError, TypeError) as exc:
            _fail(f"{path}.cov_matrix", str(exc))
    file_name = _get(tree, "covariance_file", path)
    file_path = Path(file_name)
    if base_dir is not None and not file_path.is_absolute():
        file_path = base_dir / file_path
    return _load_covariance_file(file_path, T)


def _parse_terminal(tree, path: str) -> TerminalSpec:
    if not isinstance(tree, dict):
        _fail(path, "must be an object")
    phi = _get(tree, "phi", path, required=False, default="none")
    if phi not in NONLINEARITIES:
        _fail(f"{path}.phi", f"must be one of {sorted(NONLINEARITIES)}")
    try:
        return TerminalSpec(
            a=_number(tree, "a", path, required=False, default=0.0),
            b=_number(tree, "b", path, required=False, default=0.0),
            phi=phi,
            c=_number(tree, "c", path, required=False, default=0.0),
            lambda_mean=_number(tree, "lambda_mean", path, required=False, default=0.0),
        )
    except ValueError as exc:
        _fail(path, str(exc))


def _parse_generator(tree, path: str) -> GeneratorSpec:
    if not isinstance(tree, dict):
        _fail(path, "must be an object")
    phi = _get(tree, "phi", path, required=False, default="none")
    if phi not in NONLINEARITIES:
        _fail(f"{path}.phi", f"must be one of {sorted(NONLINEARITIES)}")
    kwargs = {
        key: _number(tree, key, path, required=False, default=0.0)
        for key in ("c0", "c1", "c2", "c3", "c4", "kappa_x", "kappa_y", "kappa_z")
    }
    rho = _get(tree, "rho_table", path, required=False)
    breaks = values = None
    if rho is not None:
        if not isinstance(rho, dict) or "breaks" not in rho or "values" not in rho:
            _fail(f"{path}.rho_table", "must be an object with 'breaks' and 'values'")
        breaks = tuple(float(v) for v in rho["breaks"])
        values = tuple(float(v) for v in rho["values"])
    try:
        return GeneratorSpec(phi=phi, rho_breaks=breaks, rho_values=values, **kwargs)
    except ValueError as exc:
        _fail(path, str(exc))


def parse_scenario(tree, driver: GaussianDriverSpec, path: str = "scenario") -> ScenarioSpec:
    if not isinstance(tree, dict):
        _fail(path, "must be an object")
    return ScenarioSpec(
        terminal=_parse_terminal(_get(tree, "terminal", path), f"{path}.terminal"),
        generator=_parse_generator(_get(tree, "generator", path), f"{path}.generator"),
        driver=driver,
    )


def parse_solver(tree, path: str = "solver") -> SolverConfig:
    tree = tree if tree is not None else {}
    if not isinstance(tree, dict):
        _fail(path, "must be an object")
    z_estimator = _get(tree, "z_estimator", path, required=False, default="derivative")
    if z_estimator not in Z_ESTIMATORS:
        _fail(f"{path}.z_estimator", f"must be one of {Z_ESTIMATORS}")
    try:
        return SolverConfig(
            n_time=_integer(tree, "n_time", path, required=False, default=64),
            n_particles=_integer(tree, "n_particles", path, required=False, default=20000),
            basis_degree=_integer(tree, "basis_degree", path, required=False, default=4),
            ridge=_number(tree, "ridge", path, required=False, default=1e-8),
            picard_max_iter=_integer(tree, "picard_max_iter", path, required=False, default=10),
            picard_tol=_number(tree, "picard_tol", path, required=False, default=1e-3),
            z_estimator=z_estimator,
        )
    except ValueError as exc:
        _fail(path, str(exc))


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    kind: str
    seed: int
    driver: GaussianDriverSpec
    solver: SolverConfig
    scenario: ScenarioSpec | None = None
    scenario_2: ScenarioSpec | None = None
    params: dict = field(default_factory=dict)
    out_dir: str | None = None

    def payload(self) -> dict:
        out = {
            "kind": self.kind,
            "seed": self.seed,
            "driver": self.driver.payload(),
            "solver": self.solver.payload(),
            "params": self.params,
        }
        if self.scenario is not None:
            out["scenario"] = {
                "terminal": self.scenario.terminal.payload(),
                "generator": self.scenario.generator.payload(),
            }
        if self.scenario_2 is not None:
            out["scenario_2"] = {
                "terminal": self.scenario_2.terminal.payload(),
                "generator": self.scenario_2.generator.payload(),
            }
        if self.out_dir is not None:
            out["out_dir"] = self.out_dir
        return out

    @property
    def digest(self) -> str:
        return digest_payload(self.payload())


_PARAM_REQUIREMENTS = {
    "comparison": ("t_list",),
    "representation": ("t", "y", "z", "eps_list"),
    "converse": ("probe_grid", "eps"),
    "t2": ("t", "shift_list"),
    "lsi": ("t", "lambda_list"),
}


def parse_config_payload(tree: dict, base_dir: Path | None = None) -> ExperimentConfig:
    if not isinstance(tree, dict):
        _fail("config", "top level must be an object")
    kind = _get(tree, "kind", "")
    if kind not in KINDS:
        _fail("kind", f"must be one of {KINDS}")
    solver_tree = tree.get("solver")
    seed = tree.get("seed")
    if seed is None and isinstance(solver_tree, dict):
        seed = solver_tree.get("seed")
    if seed is None:
        _fail("seed", "required key is missing")
    if isinstance(seed, bool) or not isinstance(seed, int):
        _fail("seed", "must be an integer")
    if isinstance(solver_tree, dict):
        solver_tree = {k: v for k, v in solver_tree.items() if k != "seed"}
    solver = parse_solver(solver_tree)

    params = tree.get("params", {})
    if not isinstance(params, dict):
        _fail("params", "must be an object")
    for key in _PARAM_REQUIREMENTS.get(kind, ()):
        if key not in params:
            _fail(f"params.{key}", f"required for kind={kind}")

    scenario = scenario_2 = None
    driver = None
    if kind != "full_suite":
        driver = parse_driver(_get(tree, "driver", ""), base_dir=base_dir)
        if kind != "wick_validate":
            scenario = parse_scenario(_get(tree, "scenario", ""), driver)
        if kind in _TWO_SCENARIO_KINDS:
            scenario_2 = parse_scenario(_get(tree, "scenario_2", ""), driver, path="scenario_2")
    else:
        driver = parse_driver(tree.get("driver", {"kind": "brownian", "T": 1.0}), base_dir=base_dir)

    out_dir = tree.get("out_dir")
    if out_dir is not None and not isinstance(out_dir, str):
        _fail("out_dir", "must be a string path")
    return ExperimentConfig(
        kind=kind,
        seed=int(seed),
        driver=driver,
        solver=solver,
        scenario=scenario,
        scenario_2=scenario_2,
        params=params,
        out_dir=out_dir,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigInvalid(f"config: cannot read {path}: {exc}") from exc
    try:
        tree = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"config: not valid JSON ({exc})") from exc
    return parse_config_payload(tree, base_dir=path.parent)


def emit_config(cfg: ExperimentConfig) -> str:
    return canonical_json(cfg.payload()) + "\n"
