"""Benchmark problems, flux functions and error measures."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from cgweno.element import ElementSpace


# {{{ fluxes


class LinearAdvection:
    """``f(x, u) = v(x) u`` with an optional analytic divergence of ``v``."""

    def __init__(self, velocity: Callable[[np.ndarray], np.ndarray],
                 divergence: Callable[[np.ndarray], np.ndarray] | None = None):
        self.velocity = velocity
        self.divergence = divergence

    def value(self, x, u):
        return self.velocity(x) * np.asarray(u)[..., None]

    def derivative(self, x, u):
        v = self.velocity(x)
        return np.broadcast_to(v, np.shape(u) + v.shape[-1:])

    def source(self, x, u):
        if self.divergence is None:
            return np.zeros(np.shape(u))
        return self.divergence(x) * u


class Burgers:
    velocity = None

    def value(self, x, u):
        return 0.5 * np.asarray(u)[..., None] ** 2

    def derivative(self, x, u):
        return np.asarray(u, dtype=float)[..., None]

    def source(self, x, u):
        return np.zeros(np.shape(u))


class KPPFlux:
    """Nonconvex flux ``(sin u, cos u)``; its derivative has unit length."""

    velocity = None

    def value(self, x, u):
        return np.stack([np.sin(u), np.cos(u)], axis=-1)

    def derivative(self, x, u):
        return np.stack([np.cos(u), -np.sin(u)], axis=-1)

    def source(self, x, u):
        return np.zeros(np.shape(u))


# }}}


@dataclass
class ProblemDefinition:
    name: str
    dim: int
    bounds: tuple[tuple[float, float], ...]
    boundary: str
    flux: object
    initial: Callable[..., np.ndarray]
    exact: Callable[..., np.ndarray] | None = None  # exact(t, *coords)
    final_time: float = 1.0
    inflow_value: float = 0.0
    # config keys this problem sets unless the user overrides them
    overrides: dict = field(default_factory=dict)
    # schemes that run with a lumped mass matrix
    lumped_schemes: tuple[str, ...] = ()


# {{{ 1D linear advection


def _cosine(x):
    return np.cos(2.0 * np.pi * (x - 0.5))


def _hat_and_bump(x):
    # half-open plateau: a node sitting exactly on x = 0.4 must not widen it
    x = np.asarray(x, dtype=float)
    out = np.where((x >= 0.2 - 1e-12) & (x < 0.4 - 1e-12), 1.0, 0.0)
    inside = (x > 0.5) & (x < 0.9)
    xi = np.where(inside, x, 0.7)
    bump = np.exp(10.0 + 1.0 / (0.5 - xi) + 1.0 / (xi - 0.9))
    return np.where(inside, bump, out)


def _translated(u0):
    def exact(t, x):
        return u0(np.mod(np.asarray(x) - t, 1.0))
    return exact


def advection1d_smooth() -> ProblemDefinition:
    return ProblemDefinition(
        "adv1d-smooth", 1, ((0.0, 1.0),), "periodic",
        LinearAdvection(lambda x: np.ones(np.shape(x)[:-1] + (1,))),
        _cosine, _translated(_cosine), 1.0, overrides={"q": 3.0},
    )


def advection1d_discontinuous() -> ProblemDefinition:
    return ProblemDefinition(
        "adv1d-disc", 1, ((0.0, 1.0),), "periodic",
        LinearAdvection(lambda x: np.ones(np.shape(x)[:-1] + (1,))),
        _hat_and_bump, _translated(_hat_and_bump), 1.0,
    )


# }}}


# {{{ Burgers


BURGERS_CRITICAL_TIME = 1.0 / (2.0 * np.pi)


def burgers_exact(t: float, x, tol: float = 1e-13, maxiter: int = 50) -> np.ndarray:
    """Smooth solution of ``u = sin(2 pi (x - u t))`` for ``t < 1/(2 pi)``."""
    x = np.asarray(x, dtype=float)
    if t == 0:
        return np.sin(2.0 * np.pi * x)
    if t >= BURGERS_CRITICAL_TIME:
        raise ValueError("the classical solution only exists before the shock forms")
    u = np.sin(2.0 * np.pi * x)
    k = 2.0 * np.pi
    for _ in range(maxiter):
        arg = k * (x - u * t)
        res = u - np.sin(arg)
        step = res / (1.0 + k * t * np.cos(arg))
        u = u - step
        if np.max(np.abs(step)) < tol:
            break
    res = np.abs(u - np.sin(k * (x - u * t)))
    bad = ~(res < 10 * tol)
    if np.any(bad):
        # the residual is increasing in u, so bisect on [-1, 1]
        lo = -np.ones(bad.sum())
        hi = np.ones(bad.sum())
        xb = x[bad]
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            up = mid - np.sin(k * (xb - mid * t)) > 0
            hi = np.where(up, mid, hi)
            lo = np.where(up, lo, mid)
        u[bad] = 0.5 * (lo + hi)
    return u


def burgers1d() -> ProblemDefinition:
    def exact(t, x):
        return burgers_exact(t, x)

    return ProblemDefinition(
        "burgers", 1, ((0.0, 1.0),), "periodic", Burgers(),
        lambda x: np.sin(2.0 * np.pi * x), exact, 0.1,
    )


# }}}


# {{{ solid body rotation


def _sbr_velocity(x):
    x = np.asarray(x)
    return 2.0 * np.pi * np.stack([0.5 - x[..., 1], x[..., 0] - 0.5], axis=-1)


def sbr_initial(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r_hump = np.hypot(x - 0.25, y - 0.5) / 0.15
    r_cone = np.hypot(x - 0.5, y - 0.25) / 0.15
    r_cyl = np.hypot(x - 0.5, y - 0.75) / 0.15
    out = np.zeros(np.broadcast(x, y).shape)
    cyl = (r_cyl <= 1.0) & ((np.abs(x - 0.5) >= 0.025) | (y >= 0.85))
    out = np.where(cyl, 1.0, out)
    out = np.where(r_cone <= 1.0, 1.0 - r_cone, out)
    out = np.where(r_hump <= 1.0, 0.25 + 0.25 * np.cos(np.pi * r_hump), out)
    return out


def solid_body_rotation() -> ProblemDefinition:
    def exact(t, x, y):
        # rotate back about the center; the boundary data vanish
        c, s = np.cos(2.0 * np.pi * t), np.sin(2.0 * np.pi * t)
        dx, dy = np.asarray(x) - 0.5, np.asarray(y) - 0.5
        return sbr_initial(0.5 + c * dx + s * dy, 0.5 - s * dx + c * dy)

    return ProblemDefinition(
        "sbr", 2, ((0.0, 1.0), (0.0, 1.0)), "bounded",
        LinearAdvection(_sbr_velocity), sbr_initial, exact, 1.0, inflow_value=0.0,
    )


# }}}


# {{{ KPP


def kpp_initial(x, y):
    inside = np.hypot(x, y) <= 1.0
    return np.where(inside, 3.5 * np.pi, 0.25 * np.pi)


def kpp() -> ProblemDefinition:
    return ProblemDefinition(
        "kpp", 2, ((-2.0, 2.0), (-2.5, 1.5)), "bounded", KPPFlux(),
        kpp_initial, None, 1.0, inflow_value=0.25 * np.pi,
        overrides={
            "lambda_override_ho": 1.0,
            "lambda_override_lo": 2.0,
            "linear_weights": "uniform",
        },
        lumped_schemes=("CG",),
    )


# }}}


PROBLEMS = {
    "adv1d-smooth": advection1d_smooth,
    "adv1d-disc": advection1d_discontinuous,
    "burgers": burgers1d,
    "sbr": solid_body_rotation,
    "kpp": kpp,
}


def get_problem(name: str) -> ProblemDefinition:
    try:
        return PROBLEMS[name]()
    except KeyError:
        raise ValueError(
            f"unknown problem {name!r}; valid problems: {', '.join(PROBLEMS)}"
        ) from None


# {{{ error measures


def l1_error(space: ElementSpace, u: np.ndarray, exact: Callable[..., np.ndarray],
             t: float) -> float:
    uq = space.values_at_quad(u)
    ref = exact(t, *np.moveaxis(space.quad_points, -1, 0))
    return float(np.sum(np.abs(uq - ref) @ space.jxw))


def eoc(errors: Sequence[float], dof_counts: Sequence[int], dimension: int = 1) -> list[float | None]:
    """Rates between consecutive levels measured against per-axis resolution."""
    out: list[float | None] = [None]
    for k in range(1, len(errors)):
        n0 = dof_counts[k - 1] ** (1.0 / dimension)
        n1 = dof_counts[k] ** (1.0 / dimension)
        out.append(float(np.log(errors[k - 1] / errors[k]) / np.log(n1 / n0)))
    return out


def extrema(u: np.ndarray) -> tuple[float, float]:
    return float(np.min(u)), float(np.max(u))


def antisymmetry_defect(space: ElementSpace, u: np.ndarray, exclude: float = 0.0) -> float:
    """``max |u_h(x) + u_h(1 - x)|`` over the nodes of a 1D mesh of (0, 1).

    Nodes within ``exclude`` of x = 0.5 are skipped.
    """
    x = space.dof_coords[:, 0]
    n = x.size
    mirror = (n - np.arange(n)) % n  # node at 1 - x on a uniform periodic grid
    keep = np.abs(x - 0.5) > exclude
    return float(np.max(np.abs(u[keep] + u[mirror][keep])))


# }}}
