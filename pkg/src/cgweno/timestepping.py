"""Explicit Runge-Kutta integration of ``M du/dt = r(u)``."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class NumericalBlowup(RuntimeError):
    def __init__(self, step: int, t: float):
        super().__init__(f"non-finite solution at step {step} (t = {t:.6g})")
        self.step = step
        self.t = t


@dataclass(frozen=True)
class RKScheme:
    order: int
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    name: str = ""

    @property
    def stages(self) -> int:
        return len(self.b)


def _scheme(order, a, b, name):
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    return RKScheme(order, a, b, a.sum(axis=1), name)


def rk_scheme(order: int) -> RKScheme:
    """Order 2: SSP Heun; 3: Shu-Osher SSP; 4: classical RK4; 5: Butcher's 6-stage method."""
    if order == 2:
        return _scheme(2, [[0, 0], [1, 0]], [0.5, 0.5], "ssprk22")
    if order == 3:
        return _scheme(3, [[0, 0, 0], [1, 0, 0], [0.25, 0.25, 0]],
                       [1 / 6, 1 / 6, 2 / 3], "ssprk33")
    if order == 4:
        return _scheme(4, [[0, 0, 0, 0], [0.5, 0, 0, 0], [0, 0.5, 0, 0], [0, 0, 1, 0]],
                       [1 / 6, 1 / 3, 1 / 3, 1 / 6], "rk4")
    if order == 5:
        a = [
            [0, 0, 0, 0, 0, 0],
            [1 / 4, 0, 0, 0, 0, 0],
            [1 / 8, 1 / 8, 0, 0, 0, 0],
            [0, -1 / 2, 1, 0, 0, 0],
            [3 / 16, 0, 0, 9 / 16, 0, 0],
            [-3 / 7, 2 / 7, 12 / 7, -12 / 7, 8 / 7, 0],
        ]
        b = [7 / 90, 0, 32 / 90, 12 / 90, 32 / 90, 7 / 90]
        return _scheme(5, a, b, "butcher5")
    raise ValueError(f"no Runge-Kutta scheme of order {order}; choose 2, 3, 4 or 5")


def step(scheme: RKScheme, u: np.ndarray, rhs: Callable[[np.ndarray], np.ndarray],
         solve: Callable[[np.ndarray], np.ndarray], dt: float) -> np.ndarray:
    """One explicit step; ``solve`` applies the inverse mass matrix to ``rhs(u)``."""
    k = []
    for i in range(scheme.stages):
        ui = u
        for j in range(i):
            if scheme.a[i, j] != 0.0:
                ui = ui + dt * scheme.a[i, j] * k[j]
        k.append(solve(rhs(ui)))
    out = u.copy()
    for bi, ki in zip(scheme.b, k):
        if bi != 0.0:
            out += dt * bi * ki
    return out


@dataclass
class TimeController:
    """``dt = cfl * h_min / (lambda_max * (2p + 1))``, adjusted to land on ``final_time``.

    The remaining interval is split into equal steps no longer than the
    CFL step, so constant wave speeds give a uniform step size.
    """

    cfl: float
    final_time: float
    h_min: float
    p: int

    def __post_init__(self):
        if self.cfl <= 0:
            raise ValueError("CFL number must be positive")
        if self.final_time < 0:
            raise ValueError("final time must be nonnegative")

    def max_step(self, wave_speed: float) -> float:
        return self.cfl * self.h_min / (max(wave_speed, 1e-300) * (2 * self.p + 1))

    def next_step(self, t: float, wave_speed: float) -> float:
        remaining = self.final_time - t
        n = max(1, math.ceil(remaining / self.max_step(wave_speed) - 1e-9))
        return remaining / n


@dataclass
class IntegrationResult:
    u: np.ndarray
    steps: int
    t: float
    history: list = field(default_factory=list)  # (t, min, max) per step when tracked


def integrate(controller: TimeController, scheme: RKScheme, u0: np.ndarray,
              rhs: Callable[[np.ndarray], np.ndarray],
              solve: Callable[[np.ndarray], np.ndarray],
              wave_speed: Callable[[np.ndarray], float] | float,
              track_extrema: bool = False,
              callback: Callable[[int, float, np.ndarray], None] | None = None) -> IntegrationResult:
    u = np.array(u0, dtype=float, copy=True)
    t = 0.0
    steps = 0
    history = []
    speed = wave_speed if callable(wave_speed) else (lambda _u, s=float(wave_speed): s)
    while controller.final_time - t > 1e-12 * max(1.0, controller.final_time):
        dt = controller.next_step(t, speed(u))
        u = step(scheme, u, rhs, solve, dt)
        steps += 1
        t = t + dt if controller.final_time - (t + dt) > 1e-12 else controller.final_time
        if not np.all(np.isfinite(u)):
            raise NumericalBlowup(steps, t)
        if track_extrema:
            history.append((t, float(u.min()), float(u.max())))
        if callback is not None:
            callback(steps, t, u)
    return IntegrationResult(u, steps, t, history)
