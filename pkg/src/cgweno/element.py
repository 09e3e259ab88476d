"""Tensor-product Lagrange elements on uniform structured meshes."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.sparse as sp
from numpy.polynomial import legendre

from cgweno.mesh import Mesh

MAX_DEGREE = 4


def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre rule with ``n`` points on [0, 1]; weights sum to 1."""
    x, w = legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def lagrange_nodes(p: int, kind: str = "equispaced") -> np.ndarray:
    if kind == "equispaced":
        return np.linspace(0.0, 1.0, p + 1)
    if kind == "gauss-lobatto":
        interior = legendre.Legendre.basis(p).deriv().roots() if p > 1 else []
        x = np.concatenate([[-1.0], np.sort(np.real(interior)), [1.0]])
        return 0.5 * (x + 1.0)
    raise ValueError(f"unknown node placement {kind!r}")


def multi_indices(dim: int, p: int) -> list[tuple[int, ...]]:
    """All multi-indices k with 1 <= |k| <= p, ordered by |k|."""
    out = [
        k
        for k in itertools.product(range(p + 1), repeat=dim)
        if 1 <= sum(k) <= p
    ]
    return sorted(out, key=lambda k: (sum(k), tuple(-ki for ki in k)))


class ReferenceElement:
    """Q_p Lagrange element on the unit cell [0, 1]^dim.

    Local node ``j`` has per-axis node indices ``node_index[j]``, with the
    x index running fastest.
    """

    def __init__(self, p: int, dim: int, nodes: str = "equispaced", n_quad: int | None = None):
        if not 1 <= p <= MAX_DEGREE:
            raise ValueError(f"polynomial degree must be in 1..{MAX_DEGREE}, got {p}")
        if dim not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {dim}")
        n_quad = p + 2 if n_quad is None else n_quad
        if n_quad < p + 1:
            raise ValueError(f"need at least p+1 = {p + 1} quadrature points per axis")

        self.p = p
        self.dim = dim
        self.node_kind = nodes
        self.nodes_1d = lagrange_nodes(p, nodes)
        # rows: basis functions, columns: monomial coefficients (ascending)
        vander = np.vander(self.nodes_1d, p + 1, increasing=True)
        self.coeffs_1d = np.linalg.inv(vander).T

        self.n_local = (p + 1) ** dim
        grids = np.meshgrid(*[np.arange(p + 1)] * dim, indexing="ij")
        self.node_index = np.stack([g.ravel(order="F") for g in grids], axis=-1)
        self.nodes = self.nodes_1d[self.node_index]

        xq, wq = gauss_legendre(n_quad)
        self.n_quad_1d = n_quad
        qg = np.meshgrid(*[np.arange(n_quad)] * dim, indexing="ij")
        qidx = np.stack([g.ravel(order="F") for g in qg], axis=-1)
        self.quad_points = xq[qidx]
        self.quad_weights = np.prod(wq[qidx], axis=1)
        self.derivatives = multi_indices(dim, p)

    def basis_1d(self, xi: np.ndarray, deriv: int = 0) -> np.ndarray:
        """(len(xi), p+1) values of the ``deriv``-th derivative of the 1D basis."""
        xi = np.asarray(xi, dtype=float)
        out = np.empty((xi.size, self.p + 1))
        for j in range(self.p + 1):
            poly = np.polynomial.Polynomial(self.coeffs_1d[j])
            out[:, j] = poly.deriv(deriv)(xi) if deriv else poly(xi)
        return out

    def tabulate(self, points: np.ndarray, k: tuple[int, ...] | None = None) -> np.ndarray:
        """Reference-coordinate derivative ``D^k`` of every basis function.

        ``points`` has shape (n, dim) and may lie outside the unit cell,
        in which case the polynomial extension is evaluated.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        k = (0,) * self.dim if k is None else k
        out = np.ones((points.shape[0], self.n_local))
        for a in range(self.dim):
            table = self.basis_1d(points[:, a], k[a])
            out *= table[:, self.node_index[:, a]]
        return out


@dataclass
class Field:
    """Coefficient vector of a finite element function together with its space."""

    space: ElementSpace
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.space.n_dofs,):
            raise ValueError(
                f"expected {self.space.n_dofs} coefficients, got {self.values.shape}"
            )

    def evaluate(self, cell: int, points: np.ndarray) -> dict[tuple[int, ...], np.ndarray]:
        return evaluate(self.space, self.values, cell, points)

    def cell_average(self, cell: int) -> float:
        return cell_average(self.space, self.values, cell)


class ElementSpace:
    """Continuous Q_p space on a uniform mesh with precomputed reference tables."""

    def __init__(self, mesh: Mesh, p: int, nodes: str = "equispaced", n_quad: int | None = None):
        self.mesh = mesh
        self.p = p
        self.dim = mesh.dim
        self.ref = ReferenceElement(p, mesh.dim, nodes, n_quad)

        per_axis = []
        for n in mesh.cells_per_axis:
            per_axis.append(n * p if mesh.periodic else n * p + 1)
        self.nodes_per_axis = tuple(per_axis)
        self.n_dofs = int(np.prod(per_axis))

        gidx = mesh.cell_indices[:, None, :] * p + self.ref.node_index[None, :, :]
        dofs = np.zeros(gidx.shape[:2], dtype=np.int64)
        stride = 1
        for a, n in enumerate(per_axis):
            g = gidx[..., a] % n if mesh.periodic else gidx[..., a]
            dofs += g * stride
            stride *= n
        self.cell_dofs = dofs

        # physical coordinates of the global nodes
        coords = np.empty((self.n_dofs, self.dim))
        coords[dofs] = mesh.origins[:, None, :] + self.ref.nodes[None] * mesh.spacing
        if mesh.periodic:
            # seam nodes take the lower end of the period
            lo = np.array([b[0] for b in mesh.bounds])
            length = np.array([b[1] - b[0] for b in mesh.bounds])
            shifted = coords - lo
            coords = np.where(np.isclose(shifted, length, rtol=0, atol=1e-12 * length), lo, coords)
        self.dof_coords = coords

        ref = self.ref
        self.jxw = ref.quad_weights * mesh.cell_measure
        self.quad_points = mesh.origins[:, None, :] + ref.quad_points[None] * mesh.spacing
        self.phi = ref.tabulate(ref.quad_points)
        self.dphi = np.stack(
            [ref.tabulate(ref.quad_points, _unit(self.dim, a)) / mesh.spacing[a]
             for a in range(self.dim)]
        )

    @property
    def n_cells(self) -> int:
        return self.mesh.n_cells

    @property
    def n_local(self) -> int:
        return self.ref.n_local

    # element matrices, identical on every cell of the uniform mesh

    @cached_property
    def local_mass(self) -> np.ndarray:
        return np.einsum("q,qi,qj->ij", self.jxw, self.phi, self.phi)

    @cached_property
    def local_stiffness(self) -> np.ndarray:
        """(dim, n, n) per-axis blocks of the integral of dphi_i/dx_a dphi_j/dx_a."""
        return np.einsum("q,aqi,aqj->aij", self.jxw, self.dphi, self.dphi)

    @cached_property
    def local_derivative(self) -> np.ndarray:
        """(dim, n, n) blocks of the integral of dphi_i/dx_a phi_j."""
        return np.einsum("q,aqi,qj->aij", self.jxw, self.dphi, self.phi)

    @cached_property
    def local_lumped(self) -> np.ndarray:
        return self.local_mass.sum(axis=1)

    @cached_property
    def scatter(self) -> sp.csr_matrix:
        """Sparse (N, E*n_local) matrix summing element vectors into a global one."""
        cols = np.arange(self.cell_dofs.size)
        data = np.ones(self.cell_dofs.size)
        return sp.csr_matrix(
            (data, (self.cell_dofs.ravel(), cols)),
            shape=(self.n_dofs, self.cell_dofs.size),
        )

    def gather(self, u: np.ndarray) -> np.ndarray:
        return u[self.cell_dofs]

    def assemble_vector(self, local: np.ndarray) -> np.ndarray:
        return self.scatter @ local.ravel()

    def assemble_matrix(self, local: np.ndarray, weights: np.ndarray | None = None) -> sp.csr_matrix:
        """Global sparse matrix from a shared element matrix, optionally scaled per cell."""
        n = self.n_local
        rows = np.repeat(self.cell_dofs, n, axis=1).ravel()
        cols = np.tile(self.cell_dofs, (1, n)).ravel()
        if weights is None:
            data = np.tile(local.ravel(), self.n_cells)
        else:
            data = (weights[:, None] * local.ravel()[None, :]).ravel()
        mat = sp.coo_matrix((data, (rows, cols)), shape=(self.n_dofs, self.n_dofs))
        return mat.tocsr()

    def values_at_quad(self, u: np.ndarray) -> np.ndarray:
        return self.gather(u) @ self.phi.T

    def gradient_at_quad(self, u: np.ndarray) -> np.ndarray:
        """(dim, E, nq) physical gradient components at quadrature points."""
        U = self.gather(u)
        return np.einsum("ej,aqj->aeq", U, self.dphi)

    def physical_table(self, points: np.ndarray, k: tuple[int, ...]) -> np.ndarray:
        """Physical-space ``D^k`` of the basis at reference ``points``."""
        scale = np.prod(self.mesh.spacing ** np.asarray(k, dtype=float))
        return self.ref.tabulate(points, k) / scale


def _unit(dim: int, a: int) -> tuple[int, ...]:
    k = [0] * dim
    k[a] = 1
    return tuple(k)


def build_space(mesh: Mesh, p: int, quadrature_points_per_axis: int | None = None,
                nodes: str = "equispaced") -> ElementSpace:
    return ElementSpace(mesh, p, nodes=nodes, n_quad=quadrature_points_per_axis)


def evaluate(space: ElementSpace, u: np.ndarray, cell: int,
             points: np.ndarray) -> dict[tuple[int, ...], np.ndarray]:
    """Value and all derivatives ``D^k`` with ``|k| <= p`` at reference points of a cell."""
    points = np.asarray(points, dtype=float).reshape(-1, space.dim)
    coeffs = u[space.cell_dofs[cell]]
    out = {(0,) * space.dim: space.ref.tabulate(points) @ coeffs}
    for k in space.ref.derivatives:
        out[k] = space.physical_table(points, k) @ coeffs
    return out


def interpolate(space: ElementSpace, func: Callable[..., np.ndarray]) -> Field:
    """Nodal interpolant; ``func`` receives one coordinate array per axis."""
    values = func(*space.dof_coords.T)
    values = np.broadcast_to(np.asarray(values, dtype=float), (space.n_dofs,)).copy()
    return Field(space, values)


def cell_average(space: ElementSpace, u: np.ndarray | Field, cell: int) -> float:
    if isinstance(u, Field):
        u = u.values
    vals = space.phi @ u[space.cell_dofs[cell]]
    return float(vals @ space.ref.quad_weights)
