"""``waveduo`` command line: run, paper, analyze, list-cases.

Exit codes: 0 success, 1 validation error, 2 runtime instability,
3 I/O error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .analysis import DecayReport, Thresholds, classify, diagnostics
from .harness import (
    ArtifactIOError,
    DissipationViolation,
    ExperimentSpec,
    default_out_root,
    load_config,
    paper_catalog,
    read_energy_csv,
    run_catalog,
    run_experiment,
    select_cases,
)
from .model import ValidationError, parse_profile
from .scheme import InstabilityError

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_UNSTABLE = 2
EXIT_IO = 3


def _stride(text: str):
    if text == "auto":
        return None
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"stride must be a positive integer or 'auto', got {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"stride must be >= 1, got {v}")
    return v


def _fraction(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"window fraction must lie in (0, 1), got {v}")
    return v


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for instability here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="waveduo", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="run a single experiment")
    r.add_argument("--config", type=Path, help="JSON experiment file (or a manifest to replay); flags override it")
    r.add_argument("--name", help="run name (default: derived from b, c and a)")
    r.add_argument("--a", type=float, help="speed ratio of the u equation (default 1)")
    r.add_argument("--N", type=int, help="interior node count (default 100)")
    r.add_argument("--T", type=float, help="final time (default 500)")
    r.add_argument("--cfl-factor", type=float, help="fraction of the maximal stable time step, in (0, 1]")
    r.add_argument("--b", help="coupling profile: catalog name or indicator:lo-hi[,lo-hi][@amp]")
    r.add_argument("--c", help="damping profile, same syntax")
    r.add_argument("--initial", help="initial data: paper, paper*S, zero, sine:K, sine:K:y")
    r.add_argument("--stride", type=_stride, help="energy recording stride in steps, or 'auto'")
    r.add_argument("--mode", choices=("closed-form", "solve"), help="stepper (default closed-form)")
    r.add_argument("--check-dissipation", action="store_true", default=None,
                   help="verify the discrete dissipation identity at every step")
    r.add_argument("--out", type=Path, help="output directory (default $WAVEDUO_OUT/<name>)")
    r.add_argument("--plots", action="store_true", help="also write gnuplot scripts")

    pp = sub.add_parser("paper", help="run the published case catalog")
    pp.add_argument("--out", type=Path, help="output root (default $WAVEDUO_OUT)")
    pp.add_argument("--only", metavar="GLOB", help="only cases whose name matches GLOB")
    pp.add_argument("--workers", type=int, default=1, help="parallel runs (default 1)")
    pp.add_argument("--short", action="store_true", help="only the T=500 cases")

    a = sub.add_parser("analyze", help="classify the decay in an energy CSV")
    a.add_argument("--in", dest="infile", type=Path, required=True, help="energy.csv of a run")
    a.add_argument("--window", type=_fraction, default=Thresholds.window,
                   help="tail window fraction for fitting (default %(default)s)")

    sub.add_parser("list-cases", help="print the case catalog")
    return p


_MODES = {"closed-form": "closed_form", "solve": "reference_solve"}


def _spec_from_args(args) -> ExperimentSpec:
    base = load_config(args.config).to_dict() if args.config else {
        "a": 1.0, "N": 100, "T": 500.0, "b_spec": "b1", "c_spec": "c1"}
    overrides = {
        "a": args.a, "N": args.N, "T": args.T, "cfl_factor": args.cfl_factor,
        "b_spec": args.b, "c_spec": args.c, "initial": args.initial,
        "mode": _MODES.get(args.mode) if args.mode else None,
        "check_dissipation": args.check_dissipation,
    }
    base.update({k: v for k, v in overrides.items() if v is not None})
    if args.stride is not None or args.config is None:
        base["stride"] = args.stride
    if args.name:
        base["name"] = args.name
    elif args.config is None or "name" not in base:
        a_tag = f"{float(base['a']):g}"
        base["name"] = f"{base['b_spec']}-{base['c_spec']}-a{a_tag}".replace(":", "_").replace("/", "_")
    return ExperimentSpec.from_dict(base)


def cmd_run(args) -> int:
    spec = _spec_from_args(args)
    out = args.out if args.out is not None else default_out_root() / spec.name
    manifest = run_experiment(spec, out, plots=args.plots)
    print(f"{spec.name}: {manifest.report.summary_line()}")
    if manifest.max_residual is not None:
        print(f"max dissipation residual (relative): {manifest.max_residual:.3e}")
    print(f"artifacts: {out}")
    return EXIT_OK


def cmd_paper(args) -> int:
    specs = select_cases(args.only, args.short)
    if not specs:
        print(f"no catalog case matches {args.only!r}", file=sys.stderr)
        return EXIT_VALIDATION
    out = args.out if args.out is not None else default_out_root()
    manifests = run_catalog(specs, out, workers=max(1, args.workers))
    width = max(len(s.name) for s in specs)
    print(f"{'case':<{width}}  {'class':<12}  {'alpha':>6}  {'rate':>10}  {'d3(T)dx':>7}")
    for m in manifests:
        rep = m.report
        alpha = f"{rep.alpha:.2f}" if rep.alpha is not None else "-"
        rate = f"{rep.exp_rate:.4g}" if rep.exp_rate is not None else "-"
        reading = f"{m.exponent_reading_dx:.2f}" if m.exponent_reading_dx is not None else "-"
        print(f"{m.spec.name:<{width}}  {rep.classification:<12}  {alpha:>6}  {rate:>10}  {reading:>7}")
    return EXIT_OK


def analyze_file(path: Path, window: float = Thresholds.window) -> DecayReport:
    t, E = read_energy_csv(path)
    alt = Thresholds.window_alt if window < Thresholds.window_alt else (1.0 + window) / 2.0
    th = Thresholds(window=window, window_alt=alt)
    return classify(diagnostics(t, E), th)


def cmd_analyze(args) -> int:
    report = analyze_file(args.infile, args.window)
    print(report.summary_line())
    for k, v in report.diagnostics.items():
        print(f"  {k} = {v!r}")
    return EXIT_OK


def cmd_list_cases(args) -> int:
    cases = paper_catalog()
    for s in cases:
        b = parse_profile(s.b_spec)
        c = parse_profile(s.c_spec, damping=True)
        print(f"{s.name:<18} {s.b_spec} = {b.support_text():<22} {s.c_spec} = {c.support_text():<22} "
              f"a={s.a:g}  T={s.T:g}")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "paper": cmd_paper, "analyze": cmd_analyze, "list-cases": cmd_list_cases}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors, --help, --version
        return exc.code if isinstance(exc.code, int) else EXIT_VALIDATION
    try:
        return COMMANDS[args.command](args)
    except (InstabilityError, DissipationViolation) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except ArtifactIOError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
