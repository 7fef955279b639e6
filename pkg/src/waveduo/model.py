"""Problem data for the 1D coupled wave system on [0, 1].

    u_tt - a u_xx + b(x) y_t + c(x) u_t = 0
    y_tt -   y_xx - b(x) u_t            = 0

with homogeneous Dirichlet conditions on both unknowns.  Coefficients are
finite sums of weighted interval indicators, sampled pointwise at the grid
nodes (closed intervals, so a node on an endpoint receives the amplitude).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "GridSpec",
    "CoefficientProfile",
    "PhysicalConfig",
    "InitialData",
    "ValidationError",
    "CATALOG",
    "sample_profile",
    "named_case",
    "parse_profile",
    "default_initial_data",
    "sine_initial_data",
    "zero_initial_data",
    "initial_data_from_selector",
]


class ValidationError(ValueError):
    """Raised when user-supplied problem data violates an invariant."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid with ``N`` interior nodes, ``x_j = j * dx`` for j = 0..N+1."""

    N: int

    def __post_init__(self):
        if not isinstance(self.N, (int, np.integer)) or isinstance(self.N, bool):
            raise ValidationError(f"N must be an integer, got {self.N!r}")
        if self.N < 2:
            raise ValidationError(f"N must be >= 2, got {self.N}")

    @property
    def dx(self) -> float:
        return 1.0 / (self.N + 1)

    @property
    def nodes(self) -> np.ndarray:
        x = np.arange(self.N + 2) * self.dx
        x[-1] = 1.0
        return x


@dataclass(frozen=True)
class CoefficientProfile:
    """Sum of ``amplitude * 1_[lo, hi](x)`` over ``pieces``.

    ``damping=True`` marks a profile used as c(x); it must be nonnegative
    everywhere.
    """

    pieces: tuple[tuple[float, float, float], ...] = ()
    damping: bool = False
    label: str = ""

    def __post_init__(self):
        pieces = tuple((float(lo), float(hi), float(amp)) for lo, hi, amp in self.pieces)
        object.__setattr__(self, "pieces", pieces)
        for lo, hi, amp in pieces:
            if not (0.0 <= lo <= hi <= 1.0):
                raise ValidationError(f"invalid interval [{lo}, {hi}]; need 0 <= lo <= hi <= 1")
            if not math.isfinite(amp):
                raise ValidationError(f"non-finite amplitude {amp}")
        if self.damping and self._min_value() < 0.0:
            raise ValidationError(f"damping profile {self.describe()} takes negative values")

    def _min_value(self) -> float:
        # piecewise constant: check at every endpoint and between them
        pts = sorted({p for lo, hi, _ in self.pieces for p in (lo, hi)} | {0.0, 1.0})
        probes = pts + [(p + q) / 2 for p, q in zip(pts, pts[1:])]
        return min((self(x) for x in probes), default=0.0)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for lo, hi, amp in self.pieces:
            out = out + np.where((x >= lo) & (x <= hi), amp, 0.0)
        return out if out.ndim else float(out)

    def as_damping(self) -> "CoefficientProfile":
        return CoefficientProfile(self.pieces, damping=True, label=self.label)

    def negated(self) -> "CoefficientProfile":
        if self.damping:
            raise ValidationError("cannot negate a damping profile")
        return CoefficientProfile(
            tuple((lo, hi, -amp) for lo, hi, amp in self.pieces),
            label=f"-{self.label}" if self.label else "",
        )

    def support_text(self) -> str:
        """Human-readable support, e.g. ``[0.1,0.2],[0.8,0.9]`` or ``0``."""
        if not self.pieces:
            return "0"
        parts = []
        for lo, hi, amp in self.pieces:
            s = f"[{_fmt(lo)},{_fmt(hi)}]"
            if amp != 1.0:
                s += f"@{_fmt(amp)}"
            parts.append(s)
        return ",".join(parts)

    def to_text(self) -> str:
        """Inverse of :func:`parse_profile` (catalog name when labelled)."""
        if self.label in CATALOG_PIECES and not self.label.startswith("-"):
            return self.label
        if not self.pieces:
            return "indicator:"
        amps = {amp for _, _, amp in self.pieces}
        if len(amps) == 1:
            ivs = ",".join(f"{_fmt(lo)}-{_fmt(hi)}" for lo, hi, _ in self.pieces)
            return f"indicator:{ivs}@{_fmt(amps.pop())}"
        return ";".join(
            f"indicator:{_fmt(lo)}-{_fmt(hi)}@{_fmt(amp)}" for lo, hi, amp in self.pieces
        )

    def describe(self) -> str:
        return self.label or self.to_text()


def _fmt(v: float) -> str:
    s = repr(float(v))
    return s[:-2] if s.endswith(".0") else s


@dataclass(frozen=True)
class PhysicalConfig:
    a: float
    b: CoefficientProfile = field(default_factory=CoefficientProfile)
    c: CoefficientProfile = field(default_factory=lambda: CoefficientProfile(damping=True))

    def __post_init__(self):
        if not (math.isfinite(self.a) and self.a > 0):
            raise ValidationError(f"a must be a positive real, got {self.a!r}")
        if not self.c.damping:
            object.__setattr__(self, "c", self.c.as_damping())


@dataclass(frozen=True)
class InitialData:
    """Position/velocity profiles ``(u0, u1, y0, y1)`` as callables on [0, 1].

    ``name`` identifies the selector that built it, so runs can be replayed
    from a manifest.
    """

    u0: Callable
    u1: Callable
    y0: Callable
    y1: Callable
    name: str = "custom"

    def __post_init__(self):
        for label, f in (("u0", self.u0), ("y0", self.y0)):
            ends = np.asarray(f(np.array([0.0, 1.0])), dtype=float)
            if np.any(np.abs(ends) > 1e-12):
                raise ValidationError(f"{label} must vanish at x=0 and x=1, got {ends.tolist()}")

    def sample(self, grid: GridSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Node values of (u0, u1, y0, y1) with boundary entries forced to 0."""
        x = grid.nodes
        out = []
        for f in (self.u0, self.u1, self.y0, self.y1):
            v = np.array(np.broadcast_to(f(x), x.shape), dtype=float)
            v[0] = v[-1] = 0.0
            out.append(v)
        return tuple(out)

    @classmethod
    def from_nodes(cls, grid: GridSpec, u0, u1, y0, y1, name="tabulated") -> "InitialData":
        """Tabulated node values (length N+2), looked up by nearest node."""
        x = grid.nodes
        arrays = [np.asarray(v, dtype=float) for v in (u0, u1, y0, y1)]
        for v in arrays:
            if v.shape != x.shape:
                raise ValidationError(f"tabulated data must have {x.size} entries, got {v.shape}")

        def lookup(values):
            def f(t):
                idx = np.clip(np.rint(np.asarray(t) / grid.dx).astype(int), 0, grid.N + 1)
                return values[idx]
            return f

        return cls(*(lookup(v) for v in arrays), name=name)


# -- catalog ----------------------------------------------------------------

CATALOG_PIECES: dict[str, tuple[tuple[float, float], ...]] = {
    "1": (),
    "2": ((0.0, 1.0),),
    "3": ((0.1, 0.2), (0.8, 0.9)),
    "4": ((0.1, 0.2),),
    "5": ((0.4, 0.6),),
}
CATALOG_PIECES = {f"{k}{n}": v for k in "bc" for n, v in CATALOG_PIECES.items()}
CATALOG = tuple(sorted(CATALOG_PIECES))


def named_case(name: str) -> CoefficientProfile:
    """Catalog profile ``b1``..``b5`` / ``c1``..``c5``."""
    try:
        ivs = CATALOG_PIECES[name]
    except KeyError:
        raise ValidationError(
            f"unknown profile {name!r}; valid names: {', '.join(CATALOG)}"
        ) from None
    return CoefficientProfile(
        tuple((lo, hi, 1.0) for lo, hi in ivs), damping=name.startswith("c"), label=name
    )


_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_IND_RE = re.compile(
    rf"^indicator:\s*(?P<ivs>(?:{_NUM}\s*-\s*{_NUM}\s*(?:,\s*{_NUM}\s*-\s*{_NUM}\s*)*)?)"
    rf"(?:@\s*(?P<amp>{_NUM}))?\s*$"
)
_IV_RE = re.compile(rf"({_NUM})\s*-\s*({_NUM})")


def parse_profile(text: str, damping: bool = False) -> CoefficientProfile:
    """Parse ``"b4"`` or ``"indicator:0.1-0.2,0.8-0.9@1.0"``.

    Several indicator groups with different amplitudes may be joined with
    ``;``.
    """
    text = text.strip()
    if text in CATALOG_PIECES:
        prof = named_case(text)
        return prof.as_damping() if damping else CoefficientProfile(prof.pieces, label=prof.label)
    pieces: list[tuple[float, float, float]] = []
    for group in text.split(";"):
        m = _IND_RE.match(group.strip())
        if m is None:
            raise ValidationError(
                f"cannot parse profile {text!r}; expected a catalog name "
                f"({', '.join(CATALOG)}) or 'indicator:lo-hi[,lo-hi...][@amp]'"
            )
        amp = float(m.group("amp")) if m.group("amp") else 1.0
        for lo, hi in _IV_RE.findall(m.group("ivs")):
            pieces.append((float(lo), float(hi), amp))
    return CoefficientProfile(tuple(pieces), damping=damping)


def sample_profile(profile: CoefficientProfile, grid: GridSpec) -> np.ndarray:
    return np.asarray(profile(grid.nodes), dtype=float)


# -- initial data -----------------------------------------------------------

def _bubble(scale: float):
    return lambda x: scale * np.asarray(x) * (np.asarray(x) - 1.0)


def _zero(x):
    return np.zeros_like(np.asarray(x, dtype=float))


def default_initial_data() -> InitialData:
    """u0 = u1 = x(x-1), y0 = y1 = -x(x-1)."""
    return InitialData(_bubble(1.0), _bubble(1.0), _bubble(-1.0), _bubble(-1.0), name="paper")


def zero_initial_data() -> InitialData:
    return InitialData(_zero, _zero, _zero, _zero, name="zero")


def sine_initial_data(k: int = 1, target: str = "u") -> InitialData:
    """Standing-wave data: ``sin(k pi x)`` as the position of ``target``, all else zero."""
    mode = lambda x: np.sin(k * math.pi * np.asarray(x))  # noqa: E731
    if target == "u":
        return InitialData(mode, _zero, _zero, _zero, name=f"sine:{k}")
    if target == "y":
        return InitialData(_zero, _zero, mode, _zero, name=f"sine:{k}:y")
    raise ValidationError(f"sine target must be 'u' or 'y', got {target!r}")


def initial_data_from_selector(selector: str) -> InitialData:
    """Build initial data from ``paper``, ``zero``, ``sine:K`` or ``sine:K:y``.

    ``paper`` may carry a scale factor, ``paper*2.5``, applied to all four
    profiles (the sign of the y pair stays opposite to the u pair).
    """
    sel = selector.strip()
    if sel == "paper":
        return default_initial_data()
    if sel.startswith("paper*"):
        try:
            s = float(sel[len("paper*"):])
        except ValueError:
            raise ValidationError(f"bad scale in initial selector {selector!r}") from None
        return InitialData(_bubble(s), _bubble(s), _bubble(-s), _bubble(-s), name=sel)
    if sel == "zero":
        return zero_initial_data()
    parts = sel.split(":")
    if parts[0] == "sine" and len(parts) in (2, 3):
        try:
            k = int(parts[1])
        except ValueError:
            raise ValidationError(f"bad mode number in {selector!r}") from None
        return sine_initial_data(k, parts[2] if len(parts) == 3 else "u")
    raise ValidationError(
        f"unknown initial-data selector {selector!r}; use paper, paper*S, zero, sine:K or sine:K:y"
    )

