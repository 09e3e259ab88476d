"""Continuous Galerkin solver for scalar conservation laws with WENO-blended
artificial viscosity."""

from cgweno.config import ConfigError, RunConfig, load_config, parse_config
from cgweno.element import ElementSpace, build_space, interpolate
from cgweno.mesh import Mesh, build_mesh
from cgweno.problems import PROBLEMS, get_problem
from cgweno.solver import RunResult, SemiDiscreteOperator, simulate
from cgweno.stabilization import SCHEMES, StabilizationConfig

__all__ = [
    "PROBLEMS",
    "SCHEMES",
    "ConfigError",
    "ElementSpace",
    "Mesh",
    "RunConfig",
    "RunResult",
    "SemiDiscreteOperator",
    "StabilizationConfig",
    "build_mesh",
    "build_space",
    "get_problem",
    "interpolate",
    "load_config",
    "parse_config",
    "simulate",
]
