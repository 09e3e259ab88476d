"""Dissipative stabilization terms: LO, VMS, symmetric HO and the WENO blend.

All residual functions return the negative of the stabilization form
tested with every basis function, ready to be added to the convective
residual.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from cgweno.element import ElementSpace
from cgweno.gradient import CONSISTENT, LUMPED, GradientProjector, RecoveredGradient
from cgweno.sensor import SensorParams, gamma as sensor_gamma

SCHEMES = ("CG", "VMS", "HO", "LO", "WENO")


@dataclass(frozen=True)
class StabilizationConfig:
    scheme: str = "WENO"
    omega: float = 1.0
    q: float = 1.0
    lambda_override_ho: float | None = None
    lambda_override_lo: float | None = None
    recovery: str = CONSISTENT
    linear_weights: str | Sequence[float] = "default"
    linear_weight_floor: float = 1e-3
    r: int = 2
    epsilon: float | None = None
    q_beta: float | None = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(
                f"unknown scheme {self.scheme!r}; valid schemes: {', '.join(SCHEMES)}"
            )
        if not 0.0 <= self.omega <= 1.0:
            raise ValueError("omega must lie in [0, 1]")
        if self.q < 1.0:
            raise ValueError("q must be >= 1")
        if self.recovery not in (CONSISTENT, LUMPED):
            raise ValueError(f"unknown gradient recovery {self.recovery!r}")
        if self.r < 1 or (self.epsilon is not None and self.epsilon < 0):
            raise ValueError("need r >= 1 and epsilon >= 0")

    def sensor_params(self) -> SensorParams:
        return SensorParams(self.q, self.r, self.epsilon, self.q_beta,
                            self.linear_weights, self.linear_weight_floor)

    def with_scheme(self, scheme: str) -> StabilizationConfig:
        return replace(self, scheme=scheme)


def node_points(space: ElementSpace) -> np.ndarray:
    """(E, n_local, dim) physical coordinates of every cell's Lagrange nodes."""
    mesh = space.mesh
    return mesh.origins[:, None, :] + space.ref.nodes[None] * mesh.spacing


def cell_wave_speed(space: ElementSpace, u: np.ndarray, flux, cell: int | None = None):
    """Sampled ``max |f'(x, u_h)|`` per cell over quadrature points and nodes."""
    U = space.gather(u)
    uq = U @ space.phi.T
    sq = np.linalg.norm(flux.derivative(space.quad_points, uq), axis=-1).max(axis=1)
    sn = np.linalg.norm(flux.derivative(node_points(space), U), axis=-1).max(axis=1)
    lam = np.maximum(sq, sn)
    return float(lam[cell]) if cell is not None else lam


def viscosity(space: ElementSpace, wave_speed: np.ndarray | float) -> np.ndarray:
    """``nu_e = lambda_e h_e / (2 p)``."""
    lam = np.broadcast_to(np.asarray(wave_speed, dtype=float), (space.n_cells,))
    return lam * space.mesh.h / (2 * space.p)


def _stiffness(space: ElementSpace) -> np.ndarray:
    return space.local_stiffness.sum(axis=0)


def lo_residual(space: ElementSpace, u: np.ndarray, nu: np.ndarray) -> np.ndarray:
    U = space.gather(u)
    local = np.asarray(nu)[:, None] * (U @ _stiffness(space))
    return -space.assemble_vector(local)


def _gradient_values(gradient) -> np.ndarray:
    return gradient.values if isinstance(gradient, RecoveredGradient) else np.asarray(gradient)


def vms_residual(space: ElementSpace, u: np.ndarray, gradient, nu: np.ndarray) -> np.ndarray:
    """Nonsymmetric ``nu_e int grad w . (grad u_h - g_h)``."""
    g = _gradient_values(gradient)
    U = space.gather(u)
    local = U @ _stiffness(space)
    for a in range(space.dim):
        local -= space.gather(g[a]) @ space.local_derivative[a].T
    return -space.assemble_vector(np.asarray(nu)[:, None] * local)


def symmetric_residual(space: ElementSpace, u: np.ndarray, projector: GradientProjector,
                       kappa: np.ndarray, gradient=None) -> np.ndarray:
    """``sum_e kappa_e int (grad w - G w) . (grad u - G u)`` for all test functions.

    The test-side recovery is moved onto the data through the transpose
    of the recovery map, which keeps the form symmetric for any
    cell-wise weights.
    """
    kappa = np.asarray(kappa, dtype=float)
    g = projector.apply(u) if gradient is None else _gradient_values(gradient)
    U = space.gather(u)
    direct = np.zeros_like(U)
    b = np.empty((space.dim, space.n_dofs))
    for a in range(space.dim):
        Ga = space.gather(g[a])
        D = space.local_derivative[a]
        direct += U @ space.local_stiffness[a] - Ga @ D.T
        b[a] = space.assemble_vector(kappa[:, None] * (U @ D - Ga @ space.local_mass))
    return -(space.assemble_vector(kappa[:, None] * direct) - projector.apply_transpose(b))


def hos_residual(space: ElementSpace, u: np.ndarray, projector: GradientProjector,
                 nu: np.ndarray, omega: float = 1.0, gradient=None) -> np.ndarray:
    return symmetric_residual(space, u, projector, omega * np.asarray(nu), gradient)


def weno_residual(space: ElementSpace, u: np.ndarray, projector: GradientProjector,
                  nu: np.ndarray, gamma: np.ndarray, omega: float = 1.0,
                  nu_lo: np.ndarray | None = None, gradient=None) -> np.ndarray:
    """``omega gamma_e`` times the symmetric HO form plus ``1 - gamma_e`` times LO."""
    nu = np.asarray(nu, dtype=float)
    nu_lo = nu if nu_lo is None else np.asarray(nu_lo, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    out = symmetric_residual(space, u, projector, omega * gamma * nu, gradient)
    return out + lo_residual(space, u, (1.0 - gamma) * nu_lo)


def stabilization_energy(space: ElementSpace, u: np.ndarray, nu: np.ndarray,
                         gamma: np.ndarray, projector: GradientProjector | None = None,
                         omega: float = 1.0, nu_lo: np.ndarray | None = None) -> float:
    """Quadratic form ``s_h(u; u, u)`` of the blended symmetric operator."""
    nu = np.broadcast_to(np.asarray(nu, dtype=float), (space.n_cells,))
    nu_lo = nu if nu_lo is None else np.broadcast_to(np.asarray(nu_lo, dtype=float), nu.shape)
    gamma = np.broadcast_to(np.asarray(gamma, dtype=float), nu.shape)
    grad = space.gradient_at_quad(u)
    lo = ((grad**2).sum(axis=0) @ space.jxw)
    total = float(np.sum((1.0 - gamma) * nu_lo * lo))
    if np.any(gamma > 0):
        projector = projector or GradientProjector(space)
        g = projector.apply(u)
        gq = np.stack([space.values_at_quad(ga) for ga in g])
        ho = (((grad - gq) ** 2).sum(axis=0) @ space.jxw)
        total += float(np.sum(omega * gamma * nu * ho))
    return total


class Stabilizer:
    """Evaluates the configured stabilization residual for a given flux."""

    def __init__(self, space: ElementSpace, flux, config: StabilizationConfig, mass=None):
        self.space = space
        self.flux = flux
        self.config = config
        self.params = config.sensor_params()
        self.projector = None
        if config.scheme in ("VMS", "HO", "WENO"):
            self.projector = GradientProjector(space, config.recovery, mass)
        self._static = getattr(flux, "velocity", None) is not None
        self._cached = None
        self._viscosity = None
        self.last_gamma = None

    def wave_speeds(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if self._static and self._cached is not None:
            return self._cached
        cfg = self.config
        lam = None
        if cfg.lambda_override_ho is None or cfg.lambda_override_lo is None:
            lam = cell_wave_speed(self.space, u, self.flux)
        ho = lam if cfg.lambda_override_ho is None else np.full(self.space.n_cells, cfg.lambda_override_ho)
        lo = lam if cfg.lambda_override_lo is None else np.full(self.space.n_cells, cfg.lambda_override_lo)
        if self._static:
            self._cached = (ho, lo)
        return ho, lo

    def viscosities(self, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """``(nu_HO, nu_LO)`` per cell."""
        if self._viscosity is not None:
            return self._viscosity
        lam_ho, lam_lo = self.wave_speeds(u)
        out = (viscosity(self.space, lam_ho), viscosity(self.space, lam_lo))
        if self._static or (self.config.lambda_override_ho is not None
                            and self.config.lambda_override_lo is not None):
            self._viscosity = out
        return out

    def __call__(self, u: np.ndarray) -> np.ndarray:
        cfg = self.config
        space = self.space
        if cfg.scheme == "CG":
            return np.zeros(space.n_dofs)
        nu, nu_lo = self.viscosities(u)
        if cfg.scheme == "LO":
            return lo_residual(space, u, nu_lo)
        if cfg.scheme == "VMS":
            return vms_residual(space, u, self.projector.apply(u), nu)
        if cfg.scheme == "HO":
            return hos_residual(space, u, self.projector, nu, cfg.omega)
        g = sensor_gamma(space, u, self.params)
        self.last_gamma = g
        return weno_residual(space, u, self.projector, nu, g, cfg.omega, nu_lo)
