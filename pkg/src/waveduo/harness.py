"""Experiment orchestration: case catalog, runs, on-disk artifacts, plot scripts.

A run directory holds::

    energy.csv            t,E,E_ku,E_pu,E_ky,E_py,neg_lnE_over_t,t_times_E,neg_lnE_over_lnt
    profile_initial.csv   x,u,y
    profile_final.csv     x,u,y
    manifest.json         spec, derived quantities, decay report
    *.gp                  gnuplot scripts (see emit_plots)

Floats are written with ``repr`` (shortest round-trip decimal), so
re-reading a CSV recovers the exact doubles.
"""

from __future__ import annotations

import csv
import fnmatch
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable, Optional, Union

import numpy as np

from .analysis import DecayReport, Thresholds, classify, diagnostics, exponent_reading
from .energy import EnergyObserver
from .model import (
    GridSpec, PhysicalConfig, ValidationError, initial_data_from_selector, parse_profile, sample_profile,
)
from .scheme import TimeSpec, record_indices, run

__all__ = [
    "FORMAT_VERSION",
    "ENERGY_HEADER",
    "PROFILE_HEADER",
    "ExperimentSpec",
    "RunManifest",
    "ArtifactIOError",
    "DissipationViolation",
    "paper_catalog",
    "select_cases",
    "run_experiment",
    "run_catalog",
    "emit_plots",
    "read_energy_csv",
    "load_manifest",
    "load_config",
]

FORMAT_VERSION = "1"
ENERGY_HEADER = ("t", "E", "E_ku", "E_pu", "E_ky", "E_py",
                 "neg_lnE_over_t", "t_times_E", "neg_lnE_over_lnt")
PROFILE_HEADER = ("x", "u", "y")
TARGET_ROWS = 10_000
DISSIPATION_TOL = 1e-12

B5_C4_NOTE = ("figure caption for the a=2 b5/c4 energy lists the b4/c5 functions; "
              "this case follows the section text (b = b5, c = c4)")


class ArtifactIOError(OSError):
    """Reading or writing a run artifact failed; ``path`` names the file."""

    def __init__(self, path, cause):
        super().__init__(f"{path}: {cause}")
        self.path = str(path)


class DissipationViolation(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    a: float
    T: float
    N: int = 100
    cfl_factor: float = 1.0
    b_spec: str = "b1"
    c_spec: str = "c1"
    initial: str = "paper"
    stride: Optional[int] = None  # None: about TARGET_ROWS energy rows
    mode: str = "closed_form"
    check_dissipation: bool = False
    comment: str = ""

    def __post_init__(self):
        if not self.name or any(ch in self.name for ch in "/\\"):
            raise ValidationError(f"invalid experiment name {self.name!r}")
        if not (isinstance(self.T, (int, float)) and math.isfinite(self.T) and self.T >= 0):
            raise ValidationError(f"T must be a finite nonnegative time, got {self.T!r}")
        if self.stride is not None and (not isinstance(self.stride, int) or self.stride < 1):
            raise ValidationError(f"stride must be a positive integer or auto, got {self.stride!r}")
        if self.mode not in ("closed_form", "reference_solve"):
            raise ValidationError(f"mode must be closed_form or reference_solve, got {self.mode!r}")

    def elaborate(self):
        """Validated (config, grid, timespec, initial data, stride)."""
        config = PhysicalConfig(
            float(self.a), parse_profile(self.b_spec), parse_profile(self.c_spec, damping=True)
        )
        grid = GridSpec(int(self.N))
        ts = TimeSpec.build(config.a, grid, float(self.T), float(self.cfl_factor))
        initial = initial_data_from_selector(self.initial)
        stride = self.stride if self.stride is not None else max(1, math.ceil(ts.steps / TARGET_ROWS))
        return config, grid, ts, initial, stride

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown experiment keys: {', '.join(sorted(unknown))}")
        d = dict(d)
        if d.get("stride") == "auto":
            d["stride"] = None
        if "T" in d:
            d["T"] = float(d["T"])
        if "a" in d:
            d["a"] = float(d["a"])
        return cls(**d)


@dataclass
class RunManifest:
    spec: ExperimentSpec
    dt: float
    lam: float
    steps: int
    stride: int
    dx: float
    E0: float
    E_final: float
    report: DecayReport
    wall_clock_s: float
    files: dict
    max_residual: Optional[float] = None
    max_increase: Optional[float] = None
    exponent_reading: Optional[float] = None
    exponent_reading_dx: Optional[float] = None
    format_version: str = FORMAT_VERSION

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["spec"] = self.spec.to_dict()
        d["report"] = self.report.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        d = dict(d)
        if str(d.get("format_version")) != FORMAT_VERSION:
            raise ValidationError(f"unsupported manifest format {d.get('format_version')!r}")
        d["spec"] = ExperimentSpec.from_dict(d["spec"])
        d["report"] = DecayReport.from_dict(d["report"])
        return cls(**d)


# -- catalog ----------------------------------------------------------------

def _a_tag(a: float) -> str:
    return f"a{a:g}"


def paper_catalog() -> list[ExperimentSpec]:
    """All published cases, N = 100 at the CFL limit with the default data.

    Order: conservation, the three a = 1 cases, then for a = 2 and a = 0.5
    each pair as a T = 500000 run followed by its T = 500 short variant.
    """
    cases = [ExperimentSpec("b3-c1-a1", a=1.0, T=500.0, b_spec="b3", c_spec="c1")]
    pairs = (("b4", "c3"), ("b4", "c5"), ("b5", "c4"))
    for b, c in pairs:
        cases.append(ExperimentSpec(f"{b}-{c}-a1", a=1.0, T=500.0, b_spec=b, c_spec=c))
    for a in (2.0, 0.5):
        for b, c in pairs:
            note = B5_C4_NOTE if (a == 2.0 and (b, c) == ("b5", "c4")) else ""
            base = f"{b}-{c}-{_a_tag(a)}"
            cases.append(ExperimentSpec(base, a=a, T=500_000.0, b_spec=b, c_spec=c, comment=note))
            cases.append(ExperimentSpec(f"{base}-short", a=a, T=500.0, b_spec=b, c_spec=c, comment=note))
    return cases


def select_cases(pattern: Optional[str] = None, short: bool = False) -> list[ExperimentSpec]:
    cases = paper_catalog()
    if short:
        cases = [c for c in cases if c.T <= 500.0]
    if pattern:
        cases = [c for c in cases if fnmatch.fnmatchcase(c.name, pattern)]
    return cases


# -- i/o helpers --------------------------------------------------------------

def _num(v: float) -> str:
    return "" if v is None or not math.isfinite(v) else repr(float(v))


def _write_rows(path: Path, header, rows) -> None:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
    except OSError as exc:
        raise ArtifactIOError(path, exc.strerror or exc) from exc


def _write_profile(path: Path, x, u, y) -> None:
    _write_rows(path, PROFILE_HEADER, ([_num(a), _num(b), _num(c)] for a, b, c in zip(x, u, y)))


def read_energy_csv(path: Union[str, Path]) -> tuple[np.ndarray, np.ndarray]:
    """(t, E) columns of an energy CSV; ValueError names the bad row."""
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ArtifactIOError(path, exc.strerror or exc) from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != ENERGY_HEADER:
            raise ValueError(f"{path}: row 1: expected header {','.join(ENERGY_HEADER)}")
        t, E = [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(ENERGY_HEADER):
                raise ValueError(f"{path}: row {lineno}: expected {len(ENERGY_HEADER)} fields, got {len(row)}")
            try:
                t.append(float(row[0]))
                E.append(float(row[1]))
            except ValueError:
                raise ValueError(f"{path}: row {lineno}: non-numeric t or E") from None
    if not t:
        raise ValueError(f"{path}: no data rows")
    return np.array(t), np.array(E)


def load_manifest(run_dir: Union[str, Path]) -> RunManifest:
    path = Path(run_dir) / "manifest.json"
    try:
        text = path.read_text()
    except OSError as exc:
        raise ArtifactIOError(path, exc.strerror or exc) from exc
    return RunManifest.from_dict(json.loads(text))


def load_config(path: Union[str, Path]) -> ExperimentSpec:
    """Experiment from a JSON file (the manifest ``spec`` layout); a whole
    manifest is accepted too and replays its spec."""
    path = Path(path)
    try:
        d = json.loads(path.read_text())
    except OSError as exc:
        raise ArtifactIOError(path, exc.strerror or exc) from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON: {exc}") from None
    if "spec" in d and "format_version" in d:
        d = d["spec"]
    return ExperimentSpec.from_dict(d)


# -- running ------------------------------------------------------------------

def run_experiment(spec: ExperimentSpec, out_dir: Union[str, Path],
                   thresholds: Thresholds = Thresholds(), plots: bool = False) -> RunManifest:
    """Run one experiment and write its artifacts into ``out_dir``.

    Energy rows are recorded every ``stride`` levels (plus the last).  With
    ``spec.check_dissipation`` the run is observed at every level and the
    dissipation identity is enforced to ``DISSIPATION_TOL * max(E^0, 1)``;
    recorded rows are unaffected.
    """
    config, grid, ts, initial, stride = spec.elaborate()
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ArtifactIOError(out, exc.strerror or exc) from exc

    c_nodes = sample_profile(config.c, grid)
    wanted = set(record_indices(ts.steps, stride))
    obs = EnergyObserver(grid, ts.dt, config.a, c_nodes,
                         check_dissipation=spec.check_dissipation)
    if spec.check_dissipation:
        inner = obs
        obs.keep = False
        rows: list = []

        def observer(n, t, state, u_next, y_next):
            inner(n, t, state, u_next, y_next)
            if n in wanted:
                rows.append(inner._last)

        run_stride = 1
    else:
        observer = obs
        rows = obs.records
        run_stride = stride

    started = time.perf_counter()
    result = run(config, grid, ts, initial, [observer], stride=run_stride, mode=spec.mode)
    elapsed = time.perf_counter() - started

    if spec.check_dissipation:
        if obs.max_residual > DISSIPATION_TOL:
            raise DissipationViolation(
                f"{spec.name}: dissipation residual {obs.max_residual:.3e} exceeds {DISSIPATION_TOL:g}"
            )

    t = np.array([r.t for r in rows])
    E = np.array([r.e_total for r in rows])
    series = diagnostics(t, E)
    report = classify(series, thresholds)

    energy_path = out / "energy.csv"
    _write_rows(
        energy_path, ENERGY_HEADER,
        ([_num(r.t), _num(r.e_total), _num(r.e_ku), _num(r.e_pu), _num(r.e_ky), _num(r.e_py),
          _num(series.d1[i]), _num(series.d2[i]), _num(series.d3[i])]
         for i, r in enumerate(rows)),
    )
    x = grid.nodes
    u0, _, y0, _ = initial.sample(grid)
    _write_profile(out / "profile_initial.csv", x, u0, y0)
    _write_profile(out / "profile_final.csv", x, result.state.u_curr, result.state.y_curr)

    manifest = RunManifest(
        spec=spec, dt=ts.dt, lam=ts.lam, steps=ts.steps, stride=stride, dx=grid.dx,
        E0=float(E[0]), E_final=float(E[-1]), report=report, wall_clock_s=elapsed,
        files={"energy": "energy.csv", "profile_initial": "profile_initial.csv",
               "profile_final": "profile_final.csv"},
        max_residual=obs.max_residual if spec.check_dissipation else None,
        max_increase=obs.max_increase if spec.check_dissipation else None,
        exponent_reading=exponent_reading(series),
        exponent_reading_dx=exponent_reading(series, grid.dx),
    )
    _write_manifest(out, manifest)
    if plots:
        emit_plots(out)
    return manifest


def _write_manifest(out: Path, manifest: RunManifest) -> None:
    path = out / "manifest.json"
    try:
        path.write_text(json.dumps(manifest.to_dict(), indent=2) + "\n")
    except OSError as exc:
        raise ArtifactIOError(path, exc.strerror or exc) from exc


def _run_one(args):
    spec, out_dir, thresholds = args
    return run_experiment(spec, out_dir, thresholds, plots=True)


def run_catalog(specs: Iterable[ExperimentSpec], out_root: Union[str, Path], workers: int = 1,
                thresholds: Thresholds = Thresholds()) -> list[RunManifest]:
    """Run several experiments into ``out_root/<name>``; order is preserved.

    The first failure propagates.  ``workers > 1`` uses a process pool.
    """
    specs = list(specs)
    jobs = [(s, Path(out_root) / s.name, thresholds) for s in specs]
    if workers <= 1 or len(jobs) <= 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs))


# -- plots --------------------------------------------------------------------

_PANELS = (
    ("energy", "E(t)", 2, "E"),
    ("exp_rate", "-ln(E)/t", 7, "-ln(E(t))/t"),
    ("t_times_E", "t E(t)", 8, "t E(t)"),
    ("exponent", "-ln(E)/ln(t)", 9, "-ln(E(t))/ln(t)"),
)


def _gp_header(name: str, title: str) -> list[str]:
    return [
        "# generated by waveduo; run from this directory: gnuplot " + f"{name}.gp",
        "set terminal svg size 800,600 dynamic",
        f"set output '{name}.svg'",
        "set datafile separator ','",
        "set key autotitle columnhead",
        f"set title \"{title}\" noenhanced",
        "set grid",
        "set xlabel 't'",
    ]


def emit_plots(run_dir: Union[str, Path]) -> list[Path]:
    """Write one gnuplot script per panel into ``run_dir``.

    Panels: E, -ln(E)/t, t E, -ln(E)/ln(t) against t, and the final (u, y)
    profile.  Scripts refer to the CSVs by relative name and render SVG.
    Output is a pure function of the manifest, so re-emission is
    byte-identical.
    """
    run_dir = Path(run_dir)
    for name in ("manifest.json", "energy.csv", "profile_final.csv"):
        if not (run_dir / name).is_file():
            raise ArtifactIOError(run_dir / name, "missing run artifact")
    m = load_manifest(run_dir)
    s = m.spec
    title = f"{s.name}: a={s.a:g}, b={s.b_spec}, c={s.c_spec}, T={s.T:g}"
    decays = m.E_final < m.E0
    paths = []
    for name, ylabel, col, key in _PANELS:
        lines = _gp_header(name, f"{title} ({m.report.classification})")
        lines.append(f"set ylabel \"{ylabel}\" noenhanced")
        if name == "energy" and decays:
            lines.append("set logscale y")
        if name == "exponent":
            lines.append("set logscale x")
        lines.append(f"plot 'energy.csv' using 1:{col} with lines title \"{key}\" noenhanced")
        paths.append(_write_script(run_dir / f"{name}.gp", lines))
    lines = _gp_header("profile_final", f"{title}: final profile")
    lines[-1] = "set xlabel 'x'"
    lines.append(f"set ylabel 'value at t={s.T:g}'")
    lines.append("plot 'profile_final.csv' using 1:2 with linespoints title 'u', \\")
    lines.append("     'profile_final.csv' using 1:3 with linespoints title 'y'")
    paths.append(_write_script(run_dir / "profile_final.gp", lines))
    return paths


def _write_script(path: Path, lines: list[str]) -> Path:
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise ArtifactIOError(path, exc.strerror or exc) from exc
    return path


def default_out_root() -> Path:
    return Path(os.environ.get("WAVEDUO_OUT", "waveduo-runs"))
