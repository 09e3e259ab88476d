"""Run configuration and its flat ``key = value`` file format.

Keys before any section header describe the run. Keys in an
``[overrides]`` section apply to every problem, keys in
``[overrides.<problem>]`` only when that problem is run; both take
precedence over the top-level keys. Built-in problem settings (for
example ``q = 3`` for ``adv1d-smooth``) apply only where the key is
left unset.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

from cgweno.problems import PROBLEMS, ProblemDefinition, get_problem
from cgweno.stabilization import SCHEMES, StabilizationConfig


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    problem: str = "adv1d-smooth"
    p: int = 1
    cells: int | None = None
    dofs: int | None = None
    scheme: str = "WENO"
    omega: float = 1.0
    q: float | None = None
    lambda_override_ho: float | None = None
    lambda_override_lo: float | None = None
    recovery: str = "consistent"
    linear_weights: str | None = None
    linear_weight_floor: float = 1e-3
    r: int = 2
    epsilon: float | None = None
    q_beta: float | None = None
    cfl: float = 0.1
    final_time: float | None = None
    rk_order: int | None = None
    nodes: str = "equispaced"
    quadrature: int | None = None
    mass_solver: str = "direct"
    size_factor: float = 1.0
    track_extrema: bool = False
    output: str | None = None
    dump: str | None = None
    dump_format: str = "text"
    gamma_dump: str | None = None
    threads: int = 1
    # blank the wall-time column so identical configs give identical CSV
    deterministic: bool = False
    levels: list[int] = field(default_factory=list)
    schemes: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.problem not in PROBLEMS:
            raise ConfigError(
                f"unknown problem {self.problem!r}; valid problems: {', '.join(PROBLEMS)}"
            )
        for s in [self.scheme, *self.schemes]:
            if s not in SCHEMES:
                raise ConfigError(f"unknown scheme {s!r}; valid schemes: {', '.join(SCHEMES)}")
        if not 1 <= self.p <= 4:
            raise ConfigError(f"p must be in 1..4, got {self.p}")
        if self.cells is not None and self.dofs is not None:
            raise ConfigError("give either cells or dofs, not both")
        if self.mass_solver not in ("direct", "cg"):
            raise ConfigError(f"mass_solver must be 'direct' or 'cg', got {self.mass_solver!r}")
        if self.dump_format not in ("text", "vtk"):
            raise ConfigError(f"dump_format must be 'text' or 'vtk', got {self.dump_format!r}")
        if self.cfl <= 0:
            raise ConfigError("cfl must be positive")

    def problem_definition(self) -> ProblemDefinition:
        return get_problem(self.problem)

    def stabilization(self, scheme: str | None = None) -> StabilizationConfig:
        prob = self.problem_definition()
        defaults = {"q": 1.0, "linear_weights": "default"}

        def pick(name):
            value = getattr(self, name)
            if value is not None:
                return value
            return prob.overrides.get(name, defaults.get(name))

        weights = pick("linear_weights")
        if isinstance(weights, str) and weights not in ("default", "uniform"):
            weights = tuple(float(w) for w in weights.split(","))
        try:
            return StabilizationConfig(
                scheme=scheme or self.scheme,
                omega=self.omega,
                q=float(pick("q")),
                lambda_override_ho=pick("lambda_override_ho"),
                lambda_override_lo=pick("lambda_override_lo"),
                recovery=self.recovery,
                linear_weights=weights,
                linear_weight_floor=self.linear_weight_floor,
                r=self.r,
                epsilon=self.epsilon,
                q_beta=self.q_beta,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def replace(self, **changes) -> RunConfig:
        return dataclasses.replace(self, **changes)


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _coerce(name: str, raw: str, annotation: str) -> Any:
    raw = raw.strip()
    if raw.lower() in ("none", "") and "None" in annotation:
        return None
    try:
        if annotation.startswith("list[int]"):
            return [int(v) for v in raw.replace(" ", "").split(",") if v]
        if annotation.startswith("list[str]"):
            return [v.strip() for v in raw.split(",") if v.strip()]
        if annotation.startswith("bool"):
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(raw)
        if annotation.startswith("int"):
            return int(raw)
        if annotation.startswith("float"):
            return float(raw)
    except ValueError:
        raise ConfigError(f"invalid value {raw!r} for {name}") from None
    return raw


def from_mapping(values: dict[str, str], base: RunConfig | None = None) -> RunConfig:
    types = {f.name: str(f.type) for f in fields(RunConfig)}
    kwargs = dataclasses.asdict(base) if base is not None else {}
    for key, raw in values.items():
        key = key.strip().replace("-", "_")
        if key not in types:
            raise ConfigError(f"unknown config key {key!r}")
        kwargs[key] = _coerce(key, str(raw), types[key])
    return RunConfig(**kwargs)


def parse_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser(
        interpolation=None, comment_prefixes=("#", ";"), inline_comment_prefixes=("#",)
    )
    parser.optionxform = str
    try:
        parser.read_string("[__run__]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    top = dict(parser["__run__"])
    for section in parser.sections():
        if section != "__run__" and not section.startswith("overrides"):
            raise ConfigError(f"unknown config section [{section}]")
    cfg = from_mapping(top)
    layered = dict(top)
    if parser.has_section("overrides"):
        layered.update(parser["overrides"])
    specific = f"overrides.{cfg.problem}"
    if parser.has_section(specific):
        layered.update(parser[specific])
    return from_mapping(layered)


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_config(text)
