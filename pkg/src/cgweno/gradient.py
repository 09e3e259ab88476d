"""Continuous gradient recovery g_h for the high-order stabilization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from cgweno.assembly import MassOperator, assemble_mass
from cgweno.element import ElementSpace

CONSISTENT = "consistent"
LUMPED = "lumped"


@dataclass
class RecoveredGradient:
    values: np.ndarray  # (dim, N)
    method: str

    def __getitem__(self, a: int) -> np.ndarray:
        return self.values[a]


class GradientProjector:
    """Linear map ``u -> g_h(u)`` into (V_h)^d together with its transpose.

    The transpose is what makes the fluctuation form exactly symmetric
    when the per-cell weights differ: for the consistent projection it is
    ``C^T M^{-1}``, for the lumped recovery ``B^T diag(1/m)``.
    """

    def __init__(self, space: ElementSpace, method: str = CONSISTENT,
                 mass: MassOperator | None = None):
        if method not in (CONSISTENT, LUMPED):
            raise ValueError(f"unknown gradient recovery {method!r}")
        self.space = space
        self.method = method
        if method == CONSISTENT:
            if mass is None or mass.is_lumped:
                mass = assemble_mass(space)
            self.mass = mass
            # c_ij = int phi_i d(phi_j)/dx_a
            self.operators = [
                space.assemble_matrix(space.local_derivative[a].T) for a in range(space.dim)
            ]
        else:
            ref = space.ref
            weights = space.local_lumped
            blocks = []
            for a in range(space.dim):
                k = [0] * space.dim
                k[a] = 1
                nodal = ref.tabulate(ref.nodes, tuple(k)) / space.mesh.spacing[a]
                blocks.append(space.assemble_matrix(weights[:, None] * nodal))
            self.operators = blocks
            self.lumped = space.assemble_vector(np.tile(weights, (space.n_cells, 1)))
        self.operators_t = [op.T.tocsr() for op in self.operators]

    def apply(self, u: np.ndarray) -> np.ndarray:
        rhs = np.stack([op @ u for op in self.operators])
        if self.method == CONSISTENT:
            return self.mass.solve(rhs)
        return rhs / self.lumped

    def apply_transpose(self, b: np.ndarray) -> np.ndarray:
        """``sum_a G_a^T b_a`` for a (dim, N) stack ``b``."""
        z = self.mass.solve(b) if self.method == CONSISTENT else b / self.lumped
        return sum(op_t @ za for op_t, za in zip(self.operators_t, z))

    def __call__(self, u: np.ndarray) -> RecoveredGradient:
        return RecoveredGradient(self.apply(u), self.method)


def project_gradient_consistent(space: ElementSpace, u: np.ndarray,
                                mass: MassOperator | None = None) -> RecoveredGradient:
    return GradientProjector(space, CONSISTENT, mass)(u)


def project_gradient_lumped(space: ElementSpace, u: np.ndarray) -> RecoveredGradient:
    return GradientProjector(space, LUMPED)(u)


def fluctuation(space: ElementSpace, v: np.ndarray, gradient: RecoveredGradient | np.ndarray) -> np.ndarray:
    """(E, nq, dim) values of ``grad v_h - g_h`` at the quadrature points."""
    g = gradient.values if isinstance(gradient, RecoveredGradient) else gradient
    grad_v = space.gradient_at_quad(v)
    g_q = np.stack([space.values_at_quad(ga) for ga in g])
    return np.moveaxis(grad_v - g_q, 0, -1)
