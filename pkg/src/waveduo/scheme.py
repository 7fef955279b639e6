"""Explicit three-level scheme for the coupled system.

Each interior node couples (u_j^{n+1}, y_j^{n+1}) through a 2x2 system

    M_j = [[1 + c_j dt/2,  b_j dt/2],
           [  -b_j dt/2,         1 ]]

whose inverse is folded into twelve per-node constants once per run.  Two
steppers are provided: the closed-form update driven by those constants and
a reference path that assembles and inverts M_j at every step.  They must
agree to rounding; the test-suite holds them to it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from . import _kernels
from .model import GridSpec, InitialData, PhysicalConfig, ValidationError, sample_profile

__all__ = [
    "CFLViolation",
    "InstabilityError",
    "TimeSpec",
    "WaveState",
    "NodeCoefficients",
    "RunResult",
    "max_stable_dt",
    "precompute_coefficients",
    "ghost_level",
    "first_step",
    "initial_state",
    "step_closed_form",
    "step_reference_solve",
    "run",
]

# slack for dt^2/dx^2 products that land on 1 up to rounding (a = 2 at CFL = 1)
_CFL_SLACK = 1e-12


class CFLViolation(ValidationError):
    pass


class InstabilityError(RuntimeError):
    """A non-finite value appeared; ``step`` is the first offending level."""

    def __init__(self, step: int, t: float):
        super().__init__(f"non-finite value at step {step} (t = {t!r})")
        self.step = step
        self.t = t


def max_stable_dt(a: float, dx: float) -> float:
    if not (a > 0 and dx > 0):
        raise ValidationError(f"a and dx must be positive, got a={a!r}, dx={dx!r}")
    return min(1.0, 1.0 / math.sqrt(a)) * dx


@dataclass(frozen=True)
class TimeSpec:
    dt: float
    lam: float
    T: float
    steps: int
    cfl_factor: float = 1.0

    @classmethod
    def build(cls, a: float, grid: GridSpec, T: float, cfl_factor: float = 1.0) -> "TimeSpec":
        """Time grid at ``cfl_factor`` times the largest stable step.

        ``steps`` is ceil(T/dt), ignoring a relative excess of 1e-12 so that
        T an exact multiple of dt up to rounding does not gain a level.
        """
        if not (math.isfinite(cfl_factor) and 0.0 < cfl_factor <= 1.0):
            raise CFLViolation(f"cfl_factor must lie in (0, 1], got {cfl_factor!r}")
        if not (math.isfinite(T) and T >= 0.0):
            raise ValidationError(f"T must be a finite nonnegative time, got {T!r}")
        dx = grid.dx
        dt = cfl_factor * max_stable_dt(a, dx)
        lam = dt * dt / (dx * dx)
        if lam > 1.0 + _CFL_SLACK or a * lam > 1.0 + _CFL_SLACK:
            raise CFLViolation(f"dt={dt!r} violates the CFL bound (lambda={lam!r}, a*lambda={a * lam!r})")
        ratio = T / dt
        steps = max(0, math.ceil(ratio * (1.0 - _CFL_SLACK)))
        return cls(dt=dt, lam=lam, T=float(T), steps=steps, cfl_factor=float(cfl_factor))


@dataclass
class WaveState:
    """Levels n-1 and n of both unknowns, boundary entries included."""

    u_prev: np.ndarray
    u_curr: np.ndarray
    y_prev: np.ndarray
    y_curr: np.ndarray
    n: int = 0
    t: float = 0.0

    def roll(self, u_next: np.ndarray, y_next: np.ndarray, dt: float) -> "WaveState":
        n = self.n + 1
        return WaveState(self.u_curr, u_next, self.y_curr, y_next, n, n * dt)

    def copy(self) -> "WaveState":
        return replace(
            self,
            u_prev=self.u_prev.copy(),
            u_curr=self.u_curr.copy(),
            y_prev=self.y_prev.copy(),
            y_curr=self.y_curr.copy(),
        )


@dataclass(frozen=True)
class NodeCoefficients:
    """Per-node update constants; every array has N+2 entries (boundary rows unused)."""

    det: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    rho: np.ndarray
    xi: np.ndarray
    kappa: np.ndarray
    alpha_t: np.ndarray
    beta_t: np.ndarray
    gamma_t: np.ndarray
    rho_t: np.ndarray
    xi_t: np.ndarray
    kappa_t: np.ndarray

    FIELDS = ("alpha", "beta", "gamma", "rho", "xi", "kappa",
              "alpha_t", "beta_t", "gamma_t", "rho_t", "xi_t", "kappa_t")

    def stacked(self) -> np.ndarray:
        return np.ascontiguousarray(np.stack([getattr(self, f) for f in self.FIELDS]))


def _check_dt(a: float, grid: GridSpec, dt: float) -> None:
    if not dt > 0:
        raise ValidationError(f"dt must be positive, got {dt!r}")
    if dt > max_stable_dt(a, grid.dx) * (1.0 + _CFL_SLACK):
        raise CFLViolation(f"dt={dt!r} exceeds the CFL bound {max_stable_dt(a, grid.dx)!r}")


def precompute_coefficients(config: PhysicalConfig, grid: GridSpec, dt: float) -> NodeCoefficients:
    _check_dt(config.a, grid, dt)
    a = config.a
    b = sample_profile(config.b, grid)
    c = sample_profile(config.c, grid)
    bdt = b * dt
    det = 1.0 + c * dt / 2.0 + (bdt / 2.0) ** 2
    return NodeCoefficients(
        det=det,
        alpha=2.0 / det,
        beta=a / det,
        gamma=(c * dt / 2.0 + (bdt / 2.0) ** 2 - 1.0) / det,
        rho=bdt / det,
        xi=bdt / (2.0 * det),
        kappa=bdt / det,
        alpha_t=2.0 - bdt ** 2 / (2.0 * det),
        beta_t=1.0 - bdt ** 2 / (4.0 * det),
        gamma_t=bdt ** 2 / (2.0 * det) - 1.0,
        rho_t=bdt / det,
        xi_t=a * bdt / (2.0 * det),
        kappa_t=-bdt / det,
    )


def _laplacian(v: np.ndarray, dx: float) -> np.ndarray:
    out = np.zeros_like(v)
    out[1:-1] = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / (dx * dx)
    return out


def first_step(sampled: Sequence[np.ndarray], config: PhysicalConfig, grid: GridSpec, dt: float):
    """Level 1 from level 0 and the initial velocities.

    This is the n = 0 scheme with the ghost level u^{-1} = u^1 - 2 dt u1(x)
    (same for y) eliminated; the resulting system is explicit::

        u^1 = u^0 + dt u1 + dt^2/2 (a D2 u^0 - b y1 - c u1)
        y^1 = y^0 + dt y1 + dt^2/2 (D2 y^0 + b u1)
    """
    _check_dt(config.a, grid, dt)
    u0, u1, y0, y1 = (np.asarray(v, dtype=float) for v in sampled)
    b = sample_profile(config.b, grid)
    c = sample_profile(config.c, grid)
    h = dt * dt / 2.0
    u_next = u0 + dt * u1 + h * (config.a * _laplacian(u0, grid.dx) - b * y1 - c * u1)
    y_next = y0 + dt * y1 + h * (_laplacian(y0, grid.dx) + b * u1)
    u_next[0] = u_next[-1] = 0.0
    y_next[0] = y_next[-1] = 0.0
    return u_next, y_next


def ghost_level(level1: np.ndarray, velocity: np.ndarray, dt: float) -> np.ndarray:
    g = level1 - 2.0 * dt * velocity
    g[0] = g[-1] = 0.0
    return g


def initial_state(config: PhysicalConfig, grid: GridSpec, dt: float,
                  initial: InitialData) -> tuple[WaveState, tuple[np.ndarray, np.ndarray]]:
    """State at n = 0 (with the ghost level as ``*_prev``) and level 1."""
    sampled = initial.sample(grid)
    u0, u1, y0, y1 = sampled
    u_1, y_1 = first_step(sampled, config, grid, dt)
    state = WaveState(ghost_level(u_1, u1, dt), u0.copy(), ghost_level(y_1, y1, dt), y0.copy(), 0, 0.0)
    return state, (u_1, y_1)


def step_closed_form(state: WaveState, coeffs: NodeCoefficients, lam: float, a: float):
    """Next level ``(u^{n+1}, y^{n+1})`` from the precomputed constants."""
    up, uc, yp, yc = state.u_prev, state.u_curr, state.y_prev, state.y_curr
    cu = 1.0 - a * lam
    cy = 1.0 - lam
    us = uc[2:] + uc[:-2]
    ys = yc[2:] + yc[:-2]
    k = {f: getattr(coeffs, f)[1:-1] for f in coeffs.FIELDS}
    u_next = np.zeros_like(uc)
    y_next = np.zeros_like(yc)
    u_next[1:-1] = (cu * k["alpha"] * uc[1:-1] + lam * k["beta"] * us + k["gamma"] * up[1:-1]
                    - cy * k["rho"] * yc[1:-1] - lam * k["xi"] * ys + k["kappa"] * yp[1:-1])
    y_next[1:-1] = (cy * k["alpha_t"] * yc[1:-1] + lam * k["beta_t"] * ys + k["gamma_t"] * yp[1:-1]
                    + cu * k["rho_t"] * uc[1:-1] + lam * k["xi_t"] * us + k["kappa_t"] * up[1:-1])
    return u_next, y_next


def step_reference_solve(state: WaveState, b: np.ndarray, c: np.ndarray,
                         lam: float, a: float, dt: float):
    """Next level by assembling M_j, A_j, B_j and inverting M_j (cofactors)."""
    up, uc, yp, yc = state.u_prev, state.u_curr, state.y_prev, state.y_curr
    bj = b[1:-1]
    cj = c[1:-1]
    m11 = 1.0 + cj * dt / 2.0
    m12 = bj * dt / 2.0
    m21 = -bj * dt / 2.0
    m22 = np.ones_like(bj)
    det = m11 * m22 - m12 * m21
    assert np.all(det > 0.0), "M_j must be invertible for c >= 0"
    A = (2.0 * (1.0 - a * lam) * uc[1:-1] + (cj / 2.0 * dt - 1.0) * up[1:-1]
         + a * lam * (uc[2:] + uc[:-2]) + bj / 2.0 * dt * yp[1:-1])
    B = (2.0 * (1.0 - lam) * yc[1:-1] + lam * (yc[2:] + yc[:-2]) - yp[1:-1]
         - bj / 2.0 * dt * up[1:-1])
    u_next = np.zeros_like(uc)
    y_next = np.zeros_like(yc)
    u_next[1:-1] = (m22 * A - m12 * B) / det
    y_next[1:-1] = (-m21 * A + m11 * B) / det
    return u_next, y_next


Observer = Callable[[int, float, WaveState, np.ndarray, np.ndarray], None]


@dataclass
class RunResult:
    state: WaveState
    observers: list
    recorded: list[int]


def record_indices(steps: int, stride: int) -> list[int]:
    """Levels at which observers fire: multiples of ``stride`` plus the last one."""
    if stride < 1:
        raise ValidationError(f"stride must be >= 1, got {stride}")
    idx = list(range(0, steps + 1, stride))
    if idx[-1] != steps:
        idx.append(steps)
    return idx


def run(config: PhysicalConfig, grid: GridSpec, timespec: TimeSpec, initial: InitialData,
        observers: Iterable[Observer] = (), stride: int = 1, mode: str = "closed_form",
        check_every: Optional[int] = None) -> RunResult:
    """Advance from level 0 to level ``timespec.steps``.

    Observers are called as ``obs(n, t, state, u_next, y_next)`` for every
    recorded level n, where ``state`` holds levels n-1 and n and
    ``(u_next, y_next)`` is level n+1.  The final level therefore gets one
    look-ahead step so that quantities coupling n and n+1 (the discrete
    energy) are available for it too.  Observers must not mutate their
    arguments.

    Finiteness is checked every ``check_every`` steps (default: the stride).
    """
    if mode not in ("closed_form", "reference_solve"):
        raise ValidationError(f"unknown mode {mode!r}")
    observers = list(observers)
    dt, lam, a = timespec.dt, timespec.lam, config.a
    coeffs = precompute_coefficients(config, grid, dt)
    state, level1 = initial_state(config, grid, dt, initial)
    if not all(np.all(np.isfinite(v)) for v in (*level1, state.u_curr, state.y_curr)):
        raise InstabilityError(1, dt)

    chunk_cap = max(1, check_every or stride)
    indices = record_indices(timespec.steps, stride)

    if mode == "closed_form":
        coef = coeffs.stacked()

        def advance(st: WaveState, nsteps: int) -> tuple[WaveState, bool]:
            U = np.stack([st.u_prev, st.u_curr])
            Y = np.stack([st.y_prev, st.y_curr])
            ok = _kernels.advance(U, Y, coef, lam, a, nsteps)
            n = st.n + nsteps
            return WaveState(U[0], U[1], Y[0], Y[1], n, n * dt), ok
    else:
        b = sample_profile(config.b, grid)
        c = sample_profile(config.c, grid)

        def advance(st: WaveState, nsteps: int) -> tuple[WaveState, bool]:
            for _ in range(nsteps):
                st = st.roll(*step_reference_solve(st, b, c, lam, a, dt), dt)
            return st, bool(np.all(np.isfinite(st.u_curr)) and np.all(np.isfinite(st.y_curr)))

    def guarded(st: WaveState, nsteps: int) -> WaveState:
        while nsteps > 0:
            k = min(nsteps, chunk_cap)
            nxt, ok = advance(st, k)
            if not ok:
                # replay the failing chunk one step at a time to pin the index
                for _ in range(k):
                    st, ok = advance(st, 1)
                    if not ok:
                        raise InstabilityError(st.n, st.t)
                raise InstabilityError(nxt.n, nxt.t)  # pragma: no cover
            st = nxt
            nsteps -= k
        return st

    # the trajectory continues from first_step's level 1, never a re-derived one
    ahead = state.roll(level1[0].copy(), level1[1].copy(), dt)
    for n in indices:
        if n > state.n:
            state = guarded(ahead, n - ahead.n)
            ahead = guarded(state, 1)
        for obs in observers:
            obs(n, n * dt, state, ahead.u_curr, ahead.y_curr)
    return RunResult(state=state, observers=observers, recorded=indices)
