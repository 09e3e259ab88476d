"""Mass matrices, the Galerkin convective residual and weak inflow terms.

Residual arrays follow the sign convention ``M du/dt = r``, so every
contribution computed here is the negative of the corresponding term in
the weak form.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from cgweno.element import ElementSpace, gauss_legendre
from cgweno.mesh import build_mesh


class MassSolveError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (relative residual {residual:.3e})")
        self.residual = residual


@dataclass
class MassOperator:
    matrix: sp.csr_matrix
    lumped: np.ndarray
    is_lumped: bool = False
    method: str = "direct"
    tolerance: float = 1e-12
    # per-axis 1D mass matrices when the 2D matrix is their Kronecker product
    factors: list | None = field(default=None, repr=False)
    shape: tuple[int, ...] | None = None
    _lu: object = field(default=None, repr=False)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Apply the inverse mass matrix to one vector or a (k, N) stack."""
        if self.is_lumped:
            return rhs / self.lumped
        if self.method == "cg":
            if rhs.ndim == 1:
                return mass_solve(self, rhs, self.tolerance)
            return np.stack([mass_solve(self, r, self.tolerance) for r in rhs])
        if self.factors is not None:
            return self._kron_solve(rhs)
        if self._lu is None:
            self._lu = spla.splu(self.matrix.tocsc())
        if rhs.ndim == 1:
            return self._lu.solve(rhs)
        return self._lu.solve(np.ascontiguousarray(rhs.T)).T

    def _kron_solve(self, rhs: np.ndarray) -> np.ndarray:
        # (My x Mx) vec(X) = vec(R) with X of shape (ny, nx): X = My^-1 R Mx^-1
        if self._lu is None:
            self._lu = [spla.splu(f.tocsc()) for f in self.factors]
        lu_x, lu_y = self._lu
        ny, nx = self.shape
        R = rhs.reshape(-1, ny, nx)
        k = R.shape[0]
        X = lu_x.solve(np.ascontiguousarray(R.reshape(k * ny, nx).T)).T
        X = X.reshape(k, ny, nx).transpose(1, 0, 2).reshape(ny, k * nx)
        X = lu_y.solve(np.ascontiguousarray(X))
        X = X.reshape(ny, k, nx).transpose(1, 0, 2)
        return X.reshape(rhs.shape)

    def apply(self, u: np.ndarray) -> np.ndarray:
        if self.is_lumped:
            return self.lumped * u
        return self.matrix @ u


def assemble_mass(space: ElementSpace, lumped: bool = False, method: str = "direct",
                  tolerance: float = 1e-12) -> MassOperator:
    if method not in ("direct", "cg"):
        raise ValueError(f"unknown mass solver {method!r}")
    matrix = space.assemble_matrix(space.local_mass)
    diag = np.asarray(matrix.sum(axis=1)).ravel()
    mass = MassOperator(matrix, diag, lumped, method, tolerance)
    if space.dim == 2 and method == "direct":
        # tensor basis and tensor quadrature on a uniform mesh factor exactly
        mesh = space.mesh
        mass.factors = []
        for n, box in zip(mesh.cells_per_axis, mesh.bounds):
            line = ElementSpace(build_mesh(1, n, box, mesh.boundary), space.p,
                                nodes=space.ref.node_kind, n_quad=space.ref.n_quad_1d)
            mass.factors.append(line.assemble_matrix(line.local_mass))
        mass.shape = space.nodes_per_axis[::-1]
    return mass


def mass_solve(mass: MassOperator, rhs: np.ndarray, tolerance: float = 1e-12,
               maxiter: int | None = None) -> np.ndarray:
    """Jacobi-preconditioned conjugate gradients; exact division when lumped."""
    if mass.is_lumped:
        return rhs / mass.lumped
    norm = np.linalg.norm(rhs)
    if norm == 0.0:
        return np.zeros_like(rhs)
    inv_diag = 1.0 / mass.matrix.diagonal()
    precond = spla.LinearOperator(mass.matrix.shape, matvec=lambda r: inv_diag * r)
    maxiter = maxiter or 10 * mass.matrix.shape[0]
    x, _ = spla.cg(mass.matrix, rhs, rtol=tolerance, atol=0.0, M=precond, maxiter=maxiter)
    res = np.linalg.norm(rhs - mass.matrix @ x) / norm
    # scipy measures the preconditioned residual; enforce the true one
    if res > tolerance:
        x, _ = spla.cg(mass.matrix, rhs, x0=x, rtol=0.1 * tolerance, atol=0.0,
                       M=precond, maxiter=maxiter)
        res = np.linalg.norm(rhs - mass.matrix @ x) / norm
    if res > tolerance:
        raise MassSolveError("mass solve did not reach tolerance", res)
    return x


def convective_residual(space: ElementSpace, u: np.ndarray, flux) -> np.ndarray:
    """``r_i = -sum_e int phi_i div f(x, u_h)`` in chain-rule form, by quadrature."""
    U = space.gather(u)
    uq = U @ space.phi.T
    grad = np.einsum("ej,aqj->eqa", U, space.dphi)
    x = space.quad_points
    div = np.einsum("eqa,eqa->eq", flux.derivative(x, uq), grad) + flux.source(x, uq)
    local = (div * space.jxw) @ space.phi
    return -space.assemble_vector(local)


class ConvectiveOperator:
    """Convective residual with a cached sparse matrix for linear fluxes."""

    def __init__(self, space: ElementSpace, flux):
        self.space = space
        self.flux = flux
        self.matrix = None
        if getattr(flux, "velocity", None) is not None:
            x = space.quad_points
            vel = flux.velocity(x)
            divv = flux.source(x, np.ones(x.shape[:2]))
            # (E, n, n): int phi_i (v . grad phi_j + div v phi_j)
            local = np.einsum("q,qi,eqa,aqj->eij", space.jxw, space.phi, vel, space.dphi)
            local += np.einsum("q,qi,eq,qj->eij", space.jxw, space.phi, divv, space.phi)
            n = space.n_local
            rows = np.repeat(space.cell_dofs, n, axis=1).ravel()
            cols = np.tile(space.cell_dofs, (1, n)).ravel()
            self.matrix = sp.coo_matrix(
                (local.ravel(), (rows, cols)), shape=(space.n_dofs, space.n_dofs)
            ).tocsr()

    def __call__(self, u: np.ndarray) -> np.ndarray:
        if self.matrix is not None:
            return -(self.matrix @ u)
        return convective_residual(self.space, u, self.flux)


class InflowBoundary:
    """Weak inflow penalty ``int_Gamma w (u_h - u_in) min(0, f'(u_h) . n)``.

    Characteristic speeds are evaluated at the trace, so only inflow
    portions of the boundary contribute.
    """

    def __init__(self, space: ElementSpace, flux, inflow_value: float = 0.0):
        self.space = space
        self.flux = flux
        self.inflow_value = inflow_value
        self.sides = []
        mesh = space.mesh
        ref = space.ref
        d = space.dim
        nf = ref.n_quad_1d if d > 1 else 1
        xf, wf = gauss_legendre(nf)
        for a, side, cells in mesh.boundary_faces():
            if d == 1:
                pts = np.array([[float(side)]])
                weights = np.array([1.0])
            else:
                other = 1 - a
                pts = np.zeros((nf, 2))
                pts[:, a] = float(side)
                pts[:, other] = xf
                weights = wf * mesh.spacing[other]
            table = ref.tabulate(pts)
            xphys = mesh.origins[cells][:, None, :] + pts[None] * mesh.spacing
            normal = np.zeros(d)
            normal[a] = 1.0 if side else -1.0
            self.sides.append((cells, table, weights, xphys, normal))

    def __call__(self, u: np.ndarray) -> np.ndarray:
        out = np.zeros(self.space.n_dofs)
        for cells, table, weights, xphys, normal in self.sides:
            dofs = self.space.cell_dofs[cells]
            uf = u[dofs] @ table.T
            vn = self.flux.derivative(xphys, uf) @ normal
            integrand = weights * (uf - self.inflow_value) * np.minimum(vn, 0.0)
            local = integrand @ table
            out += np.bincount(dofs.ravel(), weights=local.ravel(), minlength=out.size)
        return out


def inflow_boundary_residual(space: ElementSpace, u: np.ndarray, flux,
                             inflow_value: float = 0.0) -> np.ndarray:
    return InflowBoundary(space, flux, inflow_value)(u)
