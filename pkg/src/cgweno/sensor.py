"""Hermite WENO smoothness sensor producing the blending factor gamma_e.

Candidates on cell ``e`` are the polynomials of its von Neumann neighbors
extended into ``K_e``; only their derivatives enter the scaled semi-norm,
so the vectorized path never forms cell averages. ``gamma_reference``
evaluates the same quantities cell by cell from explicit
:class:`CandidatePolynomial` objects and serves as a cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from cgweno.element import ElementSpace, cell_average


@dataclass(frozen=True)
class SensorParams:
    q: float = 1.0
    r: int = 2
    # None picks 1e-6 in 1D and 1e-10 in 2D
    epsilon: float | None = None
    # exponent of the candidate smoothness measure; None picks 2
    q_beta: float | None = None
    # "default", "uniform" or one weight per stencil slot (own, x-, x+, y-, y+)
    linear_weights: str | Sequence[float] = "default"
    linear_weight_floor: float = 1e-3

    def beta_exponent(self, dim: int) -> float:
        if self.q_beta is not None:
            return self.q_beta
        return 2.0

    def regularization(self, dim: int) -> float:
        if self.epsilon is not None:
            return self.epsilon
        return 1e-6 if dim == 1 else 1e-10


@dataclass
class SensorState:
    beta: np.ndarray  # (E, 1 + 2d), slot order own, x-, x+, y-, y+
    weights: np.ndarray  # nonlinear weights, zero on missing stencils
    distance: np.ndarray  # |u_h^e - u_h^{e,*}|_e
    scale: np.ndarray  # |u_h^e|_e
    gamma: np.ndarray


def linear_weights(mask: np.ndarray, spec: str | Sequence[float] = "default",
                   floor: float = 1e-3) -> np.ndarray:
    """Linear weights per cell and stencil slot, normalized over available stencils.

    ``mask`` is the boolean (E, 1 + 2d) availability array (slot 0 always set).
    """
    mask = np.asarray(mask, dtype=bool)
    m = mask[:, 1:].sum(axis=1)
    if isinstance(spec, str):
        if spec == "default":
            w = np.where(mask, floor, 0.0)
            w[:, 0] = 1.0 - m * floor
            return w
        if spec == "uniform":
            w = mask.astype(float)
        else:
            raise ValueError(f"unknown linear weight setting {spec!r}")
    else:
        spec = np.asarray(spec, dtype=float)
        if spec.shape != (mask.shape[1],):
            raise ValueError(f"expected {mask.shape[1]} linear weights, got {spec.size}")
        w = np.where(mask, spec[None, :], 0.0)
    return w / w.sum(axis=1, keepdims=True)


def nonlinear_weights(beta: np.ndarray, lin: np.ndarray, r: int = 2,
                      epsilon: float = 1e-6) -> np.ndarray:
    """Normalized ``lin / (epsilon + beta)^r`` along the last axis."""
    beta = np.asarray(beta, dtype=float)
    lin = np.asarray(lin, dtype=float)
    wt = lin / (epsilon + beta) ** r
    return wt / wt.sum(axis=-1, keepdims=True)


class SensorTables:
    """Derivative tables of the reference basis on a cell and its neighbors' extensions."""

    def __init__(self, space: ElementSpace):
        self.space = space
        ref = space.ref
        mesh = space.mesh
        d = space.dim
        self.derivatives = ref.derivatives
        pts = ref.quad_points
        nq, n = pts.shape[0], space.n_local

        def stacked(points):
            tabs = [space.physical_table(points, k) for k in self.derivatives]
            # (K*nq, n) so that U @ table.T yields (E, K*nq)
            return np.concatenate(tabs, axis=0).T.copy()

        self.own = stacked(pts)
        self.shifted = []
        for a in range(d):
            for side in (-1, 1):
                # a point of K_e sits at xi - side in the neighbor's coordinates
                offset = np.zeros(d)
                offset[a] = side
                self.shifted.append(stacked(pts - offset))
        order = np.array([sum(k) for k in self.derivatives], dtype=float)
        scale = mesh.h ** (2 * order - d)
        self.weights = (scale[:, None] * space.jxw[None, :]).ravel()
        self._compress()
        self.n_quad = nq
        self.mask = np.concatenate(
            [np.ones((mesh.n_cells, 1), dtype=bool), mesh.neighbors >= 0], axis=1
        )
        self.present = self.mask[:, 1:]
        self.source = np.where(self.present, mesh.neighbors, 0)
        self.complete = bool(self.present.all())
        self._linear = {}

    def _compress(self):
        """Fold the semi-norm weights in and keep only the row space of the tables.

        Every candidate restricted to the cell is a Q_p polynomial, so all
        tables share the row space of ``own`` and the weighted norm of
        ``U @ table`` equals the Euclidean norm of ``U @ compressed``.
        """
        root = np.sqrt(self.weights)
        _, sv, vt = np.linalg.svd(self.own * root, full_matrices=False)
        basis = vt[sv > 1e-12 * sv[0]].T
        own = self.own * root
        shifted = [t * root for t in self.shifted]
        for t in [own] + shifted:
            c = t @ basis
            if not np.allclose(c @ basis.T, t, rtol=0.0, atol=1e-10 * np.abs(t).max()):
                return
        self.own = own @ basis
        self.shifted = [t @ basis for t in shifted]
        self.weights = np.ones(basis.shape[1])

    def linear_weights(self, spec, floor: float) -> np.ndarray:
        key = (spec if isinstance(spec, str) else tuple(spec), floor)
        if key not in self._linear:
            self._linear[key] = linear_weights(self.mask, spec, floor)
        return self._linear[key]


def _tables(space: ElementSpace) -> SensorTables:
    tables = getattr(space, "_sensor_tables", None)
    if tables is None:
        tables = SensorTables(space)
        space._sensor_tables = tables
    return tables


def gamma(space: ElementSpace, u: np.ndarray, params: SensorParams | None = None,
          return_state: bool = False):
    """Per-cell blending factor in [0, 1]; optionally with the full sensor state."""
    params = params or SensorParams()
    tab = _tables(space)
    U = space.gather(u)

    own = U @ tab.own
    scale2 = (own**2) @ tab.weights
    slots = []
    norms2 = np.empty((own.shape[0], 1 + len(tab.shifted)))
    norms2[:, 0] = scale2
    for s, table in enumerate(tab.shifted):
        ds = U[tab.source[:, s]] @ table
        if not tab.complete:
            missing = ~tab.present[:, s]
            ds[missing] = own[missing]
        norms2[:, s + 1] = (ds * ds) @ tab.weights
        slots.append(ds)

    beta = np.sqrt(np.maximum(norms2, 0.0)) ** params.beta_exponent(space.dim)
    lin = tab.linear_weights(params.linear_weights, params.linear_weight_floor)
    w = nonlinear_weights(beta, lin, params.r, params.regularization(space.dim))

    # sum over neighbour slots of w_l (own - D_l)
    diff = w[:, 1:].sum(axis=1, keepdims=True) * own
    for s, ds in enumerate(slots):
        diff -= w[:, s + 1:s + 2] * ds
    dist = np.sqrt(np.maximum((diff**2) @ tab.weights, 0.0))
    scale = np.sqrt(np.maximum(scale2, 0.0))

    g = _blend(dist, scale, u, params.q)
    if return_state:
        return g, SensorState(beta, w, dist, scale, g)
    return g


def _blend(dist: np.ndarray, scale: np.ndarray, u: np.ndarray, q: float) -> np.ndarray:
    tiny = 1e-14 * (np.max(np.abs(u)) + 1.0)
    degenerate = scale <= tiny
    ratio = np.where(degenerate, 0.0, dist / np.where(degenerate, 1.0, scale))
    return 1.0 - np.minimum(1.0, ratio) ** q


# explicit per-cell construction


@dataclass
class CandidatePolynomial:
    """Polynomial of a source cell extended into its owner cell, plus a constant."""

    space: ElementSpace
    owner: int
    index: int
    source: int
    coeffs: np.ndarray
    # reference-coordinate position of the source cell relative to the owner
    offset: np.ndarray
    shift: float = 0.0

    def evaluate(self, points: np.ndarray) -> dict[tuple[int, ...], np.ndarray]:
        """Value and derivatives at reference points of the owner cell."""
        space = self.space
        pts = np.asarray(points, dtype=float).reshape(-1, space.dim) - self.offset
        out = {(0,) * space.dim: space.ref.tabulate(pts) @ self.coeffs + self.shift}
        for k in space.ref.derivatives:
            out[k] = space.physical_table(pts, k) @ self.coeffs
        return out


def candidates(space: ElementSpace, u: np.ndarray, cell: int, stencil_set=None,
               correct_average: bool = True) -> list[CandidatePolynomial]:
    """Candidate 0 is u_h on the cell itself; one more per von Neumann neighbor."""
    mesh = space.mesh
    # (source, reference offset) per neighbor slot x-, x+, y-, y+
    slots = []
    for s, src in enumerate(mesh.neighbors[cell]):
        if src >= 0:
            offset = np.zeros(space.dim)
            offset[s // 2] = -1.0 if s % 2 == 0 else 1.0
            slots.append((int(src), offset))
    if stencil_set is not None:
        wanted = [st[1] for st in stencil_set[cell][1:]]
        slots = [sl for sl in slots if sl[0] in wanted]
    sources = [(cell, np.zeros(space.dim))] + slots

    avg_own = cell_average(space, u, cell)
    out = []
    for l, (src, offset) in enumerate(sources):
        cand = CandidatePolynomial(space, cell, l, src, u[space.cell_dofs[src]], offset)
        if l > 0 and correct_average:
            ref = space.ref
            vals = cand.evaluate(ref.quad_points)[(0,) * space.dim]
            cand.shift = avg_own - float(vals @ ref.quad_weights)
        out.append(cand)
    return out


def seminorm(space: ElementSpace, v, cell: int) -> float:
    """Scaled Sobolev semi-norm over derivatives of order 1..p on one cell.

    ``v`` is a candidate polynomial, a global coefficient vector, or a
    mapping from multi-index to derivative values at the quadrature points.
    """
    ref = space.ref
    if isinstance(v, CandidatePolynomial):
        derivs = v.evaluate(ref.quad_points)
    elif isinstance(v, dict):
        derivs = v
    else:
        from cgweno.element import evaluate

        derivs = evaluate(space, np.asarray(v), cell, ref.quad_points)
    h, d = space.mesh.h, space.dim
    total = 0.0
    for k in ref.derivatives:
        total += h ** (2 * sum(k) - d) * float(space.jxw @ derivs[k] ** 2)
    return float(np.sqrt(total))


def gamma_reference(space: ElementSpace, u: np.ndarray, params: SensorParams | None = None,
                    correct_average: bool = True) -> np.ndarray:
    """Cell-by-cell sensor built from explicit candidates; slow, for verification."""
    params = params or SensorParams()
    mesh = space.mesh
    ref = space.ref
    mask = np.concatenate([np.ones((mesh.n_cells, 1), bool), mesh.neighbors >= 0], axis=1)
    lin_all = linear_weights(mask, params.linear_weights, params.linear_weight_floor)
    out = np.empty(mesh.n_cells)
    tiny = 1e-14 * (np.max(np.abs(u)) + 1.0)
    for e in range(mesh.n_cells):
        cands = candidates(space, u, e, correct_average=correct_average)
        evals = [c.evaluate(ref.quad_points) for c in cands]
        beta = np.array([seminorm(space, ev, e) for ev in evals]) ** params.beta_exponent(space.dim)
        lin = lin_all[e][mask[e]]
        w = nonlinear_weights(beta, lin, params.r, params.regularization(space.dim))
        diff = {k: evals[0][k] - sum(wl * ev[k] for wl, ev in zip(w, evals)) for k in evals[0]}
        dist = seminorm(space, diff, e)
        scale = seminorm(space, evals[0], e)
        if scale <= tiny:
            out[e] = 1.0
        else:
            out[e] = 1.0 - min(1.0, dist / scale) ** params.q
    return out
