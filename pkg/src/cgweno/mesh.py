"""Uniform structured meshes in one and two space dimensions.

Cells are numbered with the x index running fastest, ``e = ix + nx * iy``.
Neighbor arrays list, per axis, the lower and then the upper neighbor; a
missing neighbor on a bounded mesh is stored as ``-1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

PERIODIC = "periodic"
BOUNDED = "bounded"


@dataclass(frozen=True)
class Mesh:
    dim: int
    cells_per_axis: tuple[int, ...]
    bounds: tuple[tuple[float, float], ...]
    boundary: str = PERIODIC
    # multiplies the cell diameter to give the local mesh size h_e
    size_factor: float = 1.0

    @property
    def periodic(self) -> bool:
        return self.boundary == PERIODIC

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.cells_per_axis))

    @cached_property
    def spacing(self) -> np.ndarray:
        return np.array(
            [(hi - lo) / n for (lo, hi), n in zip(self.bounds, self.cells_per_axis)]
        )

    @property
    def cell_measure(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def domain_measure(self) -> float:
        return float(np.prod([hi - lo for lo, hi in self.bounds]))

    @property
    def diameter(self) -> float:
        return float(np.sqrt(np.sum(self.spacing**2)))

    @property
    def h(self) -> float:
        """Local mesh size used by the viscosity and the sensor semi-norm."""
        return self.size_factor * self.diameter

    @cached_property
    def cell_indices(self) -> np.ndarray:
        """Integer (E, dim) array of per-axis cell indices."""
        axes = [np.arange(n) for n in self.cells_per_axis]
        grids = np.meshgrid(*axes, indexing="ij")
        # x index fastest in the flat numbering
        return np.stack([g.ravel(order="F") for g in grids], axis=-1)

    def cell_index(self, *ijk: int) -> int:
        e, stride = 0, 1
        for i, n in zip(ijk, self.cells_per_axis):
            e += i * stride
            stride *= n
        return e

    @cached_property
    def origins(self) -> np.ndarray:
        lo = np.array([b[0] for b in self.bounds])
        return lo + self.cell_indices * self.spacing

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.origins + 0.5 * self.spacing

    @cached_property
    def neighbors(self) -> np.ndarray:
        """(E, 2*dim) von Neumann neighbors, ``-1`` where absent."""
        idx = self.cell_indices
        out = np.empty((self.n_cells, 2 * self.dim), dtype=np.int64)
        for a, n in enumerate(self.cells_per_axis):
            for s, shift in enumerate((-1, 1)):
                moved = idx.copy()
                moved[:, a] += shift
                if self.periodic:
                    moved[:, a] %= n
                    valid = np.ones(self.n_cells, dtype=bool)
                else:
                    valid = (moved[:, a] >= 0) & (moved[:, a] < n)
                flat = np.zeros(self.n_cells, dtype=np.int64)
                stride = 1
                for b, nb in enumerate(self.cells_per_axis):
                    flat += np.clip(moved[:, b], 0, nb - 1) * stride
                    stride *= nb
                out[:, 2 * a + s] = np.where(valid, flat, -1)
        return out

    def neighbors_of(self, e: int) -> list[int]:
        return [int(n) for n in self.neighbors[e] if n >= 0]

    def boundary_faces(self) -> list[tuple[int, int, np.ndarray]]:
        """Boundary faces as ``(axis, side, cells)`` with side 0 = lower, 1 = upper.

        Empty on periodic meshes.
        """
        if self.periodic:
            return []
        faces = []
        idx = self.cell_indices
        for a, n in enumerate(self.cells_per_axis):
            faces.append((a, 0, np.flatnonzero(idx[:, a] == 0)))
            faces.append((a, 1, np.flatnonzero(idx[:, a] == n - 1)))
        return faces

    def inflow_faces(self, velocity) -> list[tuple[int, int, np.ndarray]]:
        """Boundary faces whose face-center normal velocity is negative."""
        out = []
        for a, side, cells in self.boundary_faces():
            centers = self.centroids[cells].copy()
            centers[:, a] = self.bounds[a][side]
            normal = np.zeros(self.dim)
            normal[a] = 1.0 if side else -1.0
            vn = velocity(centers) @ normal
            out.append((a, side, cells[vn < 0]))
        return out


@dataclass(frozen=True)
class StencilSet:
    """Reconstruction stencils: ``sets[e][0] == (e,)`` and one pair per neighbor."""

    sets: list[list[tuple[int, ...]]] = field(repr=False)

    @property
    def m(self) -> np.ndarray:
        return np.array([len(s) - 1 for s in self.sets])

    def __getitem__(self, e: int) -> list[tuple[int, ...]]:
        return self.sets[e]

    def __len__(self) -> int:
        return len(self.sets)


def build_mesh(
    dimension: int,
    cells_per_axis: int | Sequence[int],
    domain_box: Sequence[tuple[float, float]] | tuple[float, float],
    boundary_mode: str = PERIODIC,
    size_factor: float = 1.0,
) -> Mesh:
    if dimension not in (1, 2):
        raise ValueError(f"dimension must be 1 or 2, got {dimension}")
    if boundary_mode not in (PERIODIC, BOUNDED):
        raise ValueError(f"unknown boundary mode {boundary_mode!r}")

    if np.isscalar(cells_per_axis):
        cells = (int(cells_per_axis),) * dimension
    else:
        cells = tuple(int(n) for n in cells_per_axis)
    box = domain_box
    if dimension == 1 and len(box) == 2 and np.isscalar(box[0]):
        box = (tuple(box),)
    box = tuple((float(lo), float(hi)) for lo, hi in box)
    if len(cells) != dimension or len(box) != dimension:
        raise ValueError("cells_per_axis and domain_box must match the dimension")

    minimum = 2 if boundary_mode == PERIODIC else 1
    for n in cells:
        if n < minimum:
            raise ValueError(
                f"{boundary_mode} meshes need at least {minimum} cells per axis, got {n}"
            )
    for lo, hi in box:
        if not hi > lo:
            raise ValueError(f"degenerate domain interval ({lo}, {hi})")
    if size_factor <= 0:
        raise ValueError("size_factor must be positive")

    return Mesh(dimension, cells, box, boundary_mode, size_factor)


def stencils(mesh: Mesh) -> StencilSet:
    sets = []
    for e in range(mesh.n_cells):
        sets.append([(e,)] + [(e, n) for n in mesh.neighbors_of(e)])
    return StencilSet(sets)
