"""Semi-discrete operator and single-run driver."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass

import numpy as np

from cgweno.assembly import ConvectiveOperator, InflowBoundary, assemble_mass
from cgweno.element import ElementSpace, build_space, interpolate
from cgweno.mesh import BOUNDED, build_mesh
from cgweno.problems import ProblemDefinition, extrema, l1_error
from cgweno.stabilization import StabilizationConfig, Stabilizer, cell_wave_speed
from cgweno.timestepping import TimeController, integrate, rk_scheme

logger = logging.getLogger(__name__)


class SemiDiscreteOperator:
    """Right-hand side ``r(u)`` of ``M du/dt = r(u)``: convection, stabilization, inflow."""

    def __init__(self, space: ElementSpace, problem: ProblemDefinition,
                 config: StabilizationConfig, lumped: bool = False,
                 mass_solver: str = "direct"):
        self.space = space
        self.problem = problem
        self.config = config
        self.mass = assemble_mass(space, lumped=lumped, method=mass_solver)
        projection_mass = self.mass if not lumped else assemble_mass(space, method=mass_solver)
        self.convection = ConvectiveOperator(space, problem.flux)
        self.stabilizer = Stabilizer(space, problem.flux, config, projection_mass)
        self.boundary = None
        if space.mesh.boundary == BOUNDED:
            self.boundary = InflowBoundary(space, problem.flux, problem.inflow_value)
        self._static_speed = None
        self.evaluations = 0

    def __call__(self, u: np.ndarray) -> np.ndarray:
        self.evaluations += 1
        r = self.convection(u) + self.stabilizer(u)
        if self.boundary is not None:
            r += self.boundary(u)
        return r

    def wave_speed(self, u: np.ndarray) -> float:
        """Global bound on the characteristic speed, from the same sampling as nu_e."""
        if self._static_speed is not None:
            return self._static_speed
        lam = float(np.max(cell_wave_speed(self.space, u, self.problem.flux)))
        if getattr(self.problem.flux, "velocity", None) is not None:
            self._static_speed = lam
        return lam

    def solve(self, r: np.ndarray) -> np.ndarray:
        return self.mass.solve(r)

    @property
    def gamma(self) -> np.ndarray | None:
        return self.stabilizer.last_gamma


def cells_for_dofs(problem: ProblemDefinition, p: int, dofs: int) -> int:
    """Cells per axis giving ``dofs`` degrees of freedom on the problem's mesh."""
    per_axis = round(dofs ** (1.0 / problem.dim))
    if per_axis**problem.dim != dofs:
        raise ValueError(f"{dofs} DoFs is not a perfect power for a {problem.dim}D mesh")
    nodes = per_axis - (1 if problem.boundary == BOUNDED else 0)
    if nodes % p:
        raise ValueError(f"{dofs} DoFs cannot be reached with degree {p} on {problem.name}")
    return nodes // p


@dataclass
class RunResult:
    problem: str
    scheme: str
    p: int
    cells: int
    n_dofs: int
    final_time: float
    steps: int
    l1_error: float | None
    u_min: float
    u_max: float
    wall_time: float
    space: ElementSpace
    u: np.ndarray
    u0: np.ndarray
    gamma: np.ndarray | None = None
    history: list | None = None


def simulate(problem: ProblemDefinition, p: int, cells: int, config: StabilizationConfig,
             cfl: float = 0.1, final_time: float | None = None, rk_order: int | None = None,
             nodes: str = "equispaced", quadrature: int | None = None,
             mass_solver: str = "direct", size_factor: float = 1.0,
             track_extrema: bool = False) -> RunResult:
    start = time.perf_counter()
    mesh = build_mesh(problem.dim, cells, problem.bounds, problem.boundary, size_factor)
    space = build_space(mesh, p, quadrature, nodes=nodes)
    lumped = config.scheme in problem.lumped_schemes
    op = SemiDiscreteOperator(space, problem, config, lumped, mass_solver)
    u0 = interpolate(space, problem.initial).values
    T = problem.final_time if final_time is None else final_time
    controller = TimeController(cfl, T, mesh.diameter, p)
    scheme = rk_scheme(rk_order or min(p + 1, 5))
    logger.info("%s %s p=%d cells=%d dofs=%d T=%g", problem.name, config.scheme, p,
                cells, space.n_dofs, T)
    res = integrate(controller, scheme, u0, op, op.solve, op.wave_speed, track_extrema)
    err = None
    if problem.exact is not None and (problem.name != "burgers" or T < 1.0 / (2 * math.pi)):
        err = l1_error(space, res.u, problem.exact, T)
    lo, hi = extrema(res.u)
    return RunResult(problem.name, config.scheme, p, cells, space.n_dofs, T, res.steps, err,
                     lo, hi, time.perf_counter() - start, space, res.u, u0,
                     op.gamma, res.history if track_extrema else None)
