"""Discrete energy of the scheme and its exact per-step dissipation identity.

E^n couples levels n and n+1::

    E^n = 1/2 sum_{j=1}^{N} ((u_j^{n+1} - u_j^n)/dt)^2
        + a/2 sum_{j=0}^{N} ((u_{j+1}^n - u_j^n)/dx) ((u_{j+1}^{n+1} - u_j^{n+1})/dx)
        + (same two terms for y, with a replaced by 1)

and every trajectory of the scheme satisfies

    E^n - E^{n-1} + dt sum_j c_j ((u_j^{n+1} - u_j^{n-1}) / (2 dt))^2 = 0.

The sums are plain (no dx weight), so E^0 for the default data is O(10).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Optional, Union

import numpy as np

from . import _kernels
from .model import GridSpec

__all__ = ["EnergyRecord", "EnergyObserver", "compute_energy", "dissipation_residual"]


@dataclass(frozen=True)
class EnergyRecord:
    n: int
    t: float
    e_ku: float
    e_pu: float
    e_ky: float
    e_py: float
    e_total: float
    damping_sum: float

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def compute_energy(u_window, y_window, grid: Union[GridSpec, float], dt: float, a: float, c,
                   n: int = 0, t: float = 0.0, compensated: bool = False) -> EnergyRecord:
    """Energy record for level n.

    Parameters
    ----------
    u_window, y_window : sequence of three arrays
        Levels n-1, n and n+1 (N+2 entries each, boundaries zero).  Level
        n-1 only enters the damping sum.
    grid : GridSpec or float
        The grid, or just its spacing.
    c : ndarray
        Damping coefficient sampled at the nodes.
    compensated : bool
        Use exactly rounded summation (``math.fsum``) instead of the plain
        ascending-j loop.
    """
    u_prev, u_curr, u_next = (np.asarray(v, dtype=float) for v in u_window)
    y_prev, y_curr, y_next = (np.asarray(v, dtype=float) for v in y_window)
    dx = grid.dx if isinstance(grid, GridSpec) else float(grid)
    c = np.asarray(c, dtype=float)
    if compensated:
        fs = math.fsum
        e_ku = 0.5 * fs((((u_next[1:-1] - u_curr[1:-1]) / dt) ** 2).tolist())
        e_pu = 0.5 * a * fs(((np.diff(u_curr) / dx) * (np.diff(u_next) / dx)).tolist())
        e_ky = 0.5 * fs((((y_next[1:-1] - y_curr[1:-1]) / dt) ** 2).tolist())
        e_py = 0.5 * fs(((np.diff(y_curr) / dx) * (np.diff(y_next) / dx)).tolist())
        damp = dt * fs((c[1:-1] * ((u_next[1:-1] - u_prev[1:-1]) / (2.0 * dt)) ** 2).tolist())
    else:
        e_ku, e_pu, e_ky, e_py, damp = _kernels.energy_terms(
            u_prev, u_curr, u_next, y_prev, y_curr, y_next, c, dt, dx, float(a))
    return EnergyRecord(
        n=int(n), t=float(t), e_ku=e_ku, e_pu=e_pu, e_ky=e_ky, e_py=e_py,
        e_total=e_ku + e_pu + e_ky + e_py, damping_sum=damp,
    )


def dissipation_residual(rec_n: EnergyRecord, rec_nm1: EnergyRecord) -> float:
    """``(E^n - E^{n-1}) + damping_sum^n``; zero in exact arithmetic."""
    if rec_n.n != rec_nm1.n + 1:
        raise ValueError(f"records must be consecutive, got n={rec_nm1.n} then n={rec_n.n}")
    return (rec_n.e_total - rec_nm1.e_total) + rec_n.damping_sum


class EnergyObserver:
    """Run observer collecting an :class:`EnergyRecord` per recorded level.

    With ``check_dissipation`` the observer expects to be called at every
    level (stride 1) and tracks the largest dissipation residual and the
    largest energy increase, both relative to ``max(E^0, 1)``.
    """

    def __init__(self, grid: GridSpec, dt: float, a: float, c, compensated: bool = False,
                 check_dissipation: bool = False, keep: bool = True):
        self.grid = grid
        self.dt = dt
        self.a = a
        self.c = np.asarray(c, dtype=float)
        self.compensated = compensated
        self.check_dissipation = check_dissipation
        self.keep = keep
        self.records: list[EnergyRecord] = []
        self.max_residual = 0.0
        self.max_increase = 0.0
        self._last: Optional[EnergyRecord] = None
        self._scale = 1.0

    def __call__(self, n, t, state, u_next, y_next):
        rec = compute_energy(
            (state.u_prev, state.u_curr, u_next), (state.y_prev, state.y_curr, y_next),
            self.grid, self.dt, self.a, self.c, n=n, t=t, compensated=self.compensated,
        )
        if n == 0:
            self._scale = max(rec.e_total, 1.0)
        if self.check_dissipation and self._last is not None:
            res = abs(dissipation_residual(rec, self._last)) / self._scale
            self.max_residual = max(self.max_residual, res)
            self.max_increase = max(self.max_increase, (rec.e_total - self._last.e_total) / self._scale)
        self._last = rec
        if self.keep:
            self.records.append(rec)
