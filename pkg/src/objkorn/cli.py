"""Command-line front end.

Examples::

    objkorn analyze --structure chain --norm-a PatchIso --norm-b PatchIso0 --periods 4,8,16,32
    objkorn kernel --structure chain --range id,t --norm PatchIso --periods 8
    objkorn fourier-check --structure zigzag --periods 8,16 --trials 100 --seed 1 --out fc.csv
    objkorn verify --structure helix

Exit codes: 0 success, 1 failed catalog check, 2 usage or configuration
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, catalog
from .group import GroupSpec, GroupSpecError, RangeSet, load_spec_file, parse_range
from .korn import (FOURIER_STRUCTURES, NumericalError, UnsupportedStructure, fourier_check, sweep,
                   sweep_csv, sweep_json)
from .seminorms import SeminormKind, SizeGuardError, kernel, kernel_formula

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3
DEFAULT_RANGE_LABELS = ("P2", "P1")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    spec: GroupSpec
    entry: catalog.CatalogEntry | None
    range_a: RangeSet
    range_b: RangeSet
    norm_a: SeminormKind
    norm_b: SeminormKind
    periods: list
    seed: int


# -- argument parsing ---------------------------------------------------------

def _periods(text: str) -> list[int]:
    try:
        vals = [int(x) for x in text.replace(" ", ",").split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"periods must be integers, got {text!r}")
    if not vals or any(v < 1 for v in vals):
        raise argparse.ArgumentTypeError("periods must be positive integers")
    return vals


def _norm(text: str) -> SeminormKind:
    try:
        return SeminormKind(text)
    except ValueError:
        names = ", ".join(k.value for k in SeminormKind)
        raise argparse.ArgumentTypeError(f"unknown seminorm {text!r}; choose from {names}")


def _common(p: argparse.ArgumentParser, figure: bool = True) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--structure", help="catalog entry name")
    src.add_argument("--spec-file", type=Path, help="JSON group spec file")
    p.add_argument("--catalog-dir", help="extra catalog directory (default: $KORN_CATALOG_DIR)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("-q", "--quiet", action="store_true", help="suppress the summary line")
    if figure:
        p.add_argument("--figure", type=Path,
                       help="figure path (default: next to --out with a .png suffix)")
        p.add_argument("--no-figure", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="objkorn", description="Rigidity seminorms on objective structures.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="sweep equivalence constants of two seminorms over periods")
    _common(p)
    p.add_argument("--range", help="range label or word list, e.g. 'id,t,t^2' (default: P2)")
    p.add_argument("--range-b", help="range for the second seminorm (default: --range)")
    p.add_argument("--norm-a", type=_norm, default=SeminormKind.PatchIso)
    p.add_argument("--norm-b", type=_norm, default=SeminormKind.PatchIso0)
    p.add_argument("--periods", type=_periods, default=[4, 8, 16, 32])
    p.add_argument("--samples", type=int, default=0, help="random Rayleigh cross-checks per period")
    p.add_argument("--jobs", type=int, default=1, help="periods evaluated in parallel")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("kernel", help="kernel dimension of one seminorm")
    _common(p, figure=False)
    p.add_argument("--range")
    p.add_argument("--norm", "--norm-a", dest="norm_a", type=_norm, default=SeminormKind.PatchIso)
    p.add_argument("--periods", type=_periods, default=[8])
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("fourier-check", help="spectral sums against seminorms on random fields")
    _common(p)
    p.add_argument("--range")
    p.add_argument("--periods", type=_periods, default=[8, 16, 32, 64])
    p.add_argument("--trials", type=int, default=100)
    p.set_defaults(func=cmd_fourier_check)

    p = sub.add_parser("verify", help="recompute a catalog entry's ground truth")
    p.add_argument("--structure", help="entry name (default: all entries)")
    p.add_argument("--catalog-dir")
    p.add_argument("--out", type=Path)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("-q", "--quiet", action="store_true")
    p.set_defaults(func=cmd_verify)
    return parser


# -- configuration --------------------------------------------------------------

def _resolve_range(spec, entry, label):
    if label is None:
        ranges = entry.reference_ranges if entry else {}
        for name in DEFAULT_RANGE_LABELS:
            if name in ranges:
                return ranges[name]
        raise ConfigError("no default range for this structure; pass --range")
    if entry and label in entry.reference_ranges:
        return entry.reference_ranges[label]
    return parse_range(spec, label)


def make_config(args) -> RunConfig:
    entry = None
    if getattr(args, "spec_file", None):
        spec = load_spec_file(args.spec_file)
    else:
        entry = catalog.load(args.structure, args.catalog_dir)
        spec = entry.spec
    range_a = _resolve_range(spec, entry, getattr(args, "range", None))
    rb = getattr(args, "range_b", None)
    range_b = range_a if rb is None else _resolve_range(spec, entry, rb)
    periods = list(getattr(args, "periods", []))
    for N in periods:
        spec.period_factor(N)
    return RunConfig(spec, entry, range_a, range_b, getattr(args, "norm_a", SeminormKind.PatchIso),
                     getattr(args, "norm_b", SeminormKind.PatchIso0), periods, args.seed)


# -- output -------------------------------------------------------------------

def _write(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)


def _say(args, line: str) -> None:
    """Summary line: stdout when data went to a file, stderr otherwise."""
    if args.quiet:
        return
    print(line, file=sys.stdout if args.out is not None else sys.stderr)


def _figure_path(args) -> Path | None:
    if getattr(args, "no_figure", False):
        return None
    if getattr(args, "figure", None) is not None:
        return args.figure
    return args.out.with_suffix(".png") if args.out is not None else None


def _rows_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


# -- commands -------------------------------------------------------------------

def cmd_analyze(args) -> int:
    cfg = make_config(args)
    result = sweep(cfg.spec, ((cfg.range_a, cfg.norm_a), (cfg.range_b, cfg.norm_b)), cfg.periods,
                   samples=args.samples, seed=cfg.seed, workers=args.jobs)
    _write(sweep_csv(result) if args.format == "csv" else sweep_json(result), args.out)
    fig = _figure_path(args)
    if fig is not None:
        from .plotting import sweep_figure
        sweep_figure(result, fig)
    _say(args, f"{result.diagnosis} exponent={result.exponent:.4f}")
    return EXIT_OK


KERNEL_HEADER = ["structure", "N", "range", "norm", "dim", "formula_dim", "match"]


def cmd_kernel(args) -> int:
    cfg = make_config(args)
    formula = kernel_formula(cfg.spec, cfg.range_a, cfg.norm_a)
    records = []
    for N in cfg.periods:
        dim, _ = kernel(cfg.spec, cfg.range_a, cfg.norm_a, N)
        records.append({"structure": cfg.spec.name, "N": N, "range": ",".join(cfg.range_a.labels),
                        "norm": cfg.norm_a.value, "dim": int(dim), "formula_dim": formula,
                        "match": None if formula is None else bool(dim == formula)})
    if args.format == "json":
        text = "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)
    else:
        text = _rows_csv(KERNEL_HEADER, [[_cell(r[k]) for k in KERNEL_HEADER] for r in records])
    _write(text, args.out)
    for r in records:
        _say(args, f"N={r['N']} dim={r['dim']} formula_dim={r['formula_dim']} match={r['match']}")
    return EXIT_OK


FOURIER_HEADER = ["structure", "N", "trials", "assertion", "min_ratio", "max_ratio", "spread"]


def cmd_fourier_check(args) -> int:
    if args.trials < 1:
        raise ConfigError("--trials must be at least 1")
    cfg = make_config(args)
    if cfg.spec.name not in FOURIER_STRUCTURES:
        raise UnsupportedStructure(
            f"fourier-check supports {', '.join(FOURIER_STRUCTURES)}, not {cfg.spec.name!r}")
    checks = [fourier_check(cfg.spec, cfg.range_a, N, args.trials, seed=cfg.seed) for N in cfg.periods]
    if args.format == "json":
        text = "".join(json.dumps(c.as_dict(), sort_keys=True) + "\n" for c in checks)
    else:
        rows = [[c.structure, c.N, c.trials, name, _cell(v["min_ratio"]), _cell(v["max_ratio"]),
                 _cell(v["spread"])] for c in checks for name, v in sorted(c.assertions.items())]
        text = _rows_csv(FOURIER_HEADER, rows)
    _write(text, args.out)
    fig = _figure_path(args)
    if fig is not None:
        from .plotting import fourier_figure
        fourier_figure(checks, fig)
    for c in checks:
        parts = " ".join(f"{k}=[{v['min_ratio']:.4g},{v['max_ratio']:.4g}]" for k, v in sorted(c.assertions.items()))
        _say(args, f"N={c.N} {parts}")
    return EXIT_OK


VERIFY_HEADER = ["structure", "check", "source", "N", "expected", "actual", "passed"]


def cmd_verify(args) -> int:
    names = [args.structure] if args.structure else catalog.list_entries(args.catalog_dir)
    records = []
    for name in names:
        entry = catalog.load(name, args.catalog_dir)
        for o in catalog.verify(entry):
            records.append({"structure": name, "check": o.check, "source": o.source, "N": o.N,
                            "expected": o.expected, "actual": o.actual, "passed": o.passed, **o.detail})
    if args.format == "json":
        text = json.dumps(records, indent=2, sort_keys=True, default=str) + "\n"
    else:
        text = _rows_csv(VERIFY_HEADER, [[_cell(r[k]) if not isinstance(r[k], (list, dict)) else json.dumps(r[k])
                                          for k in VERIFY_HEADER] for r in records])
    _write(text, args.out)
    failed = sum(not r["passed"] for r in records)
    _say(args, f"{len(records) - failed}/{len(records)} checks passed")
    return EXIT_CHECK_FAILED if failed else EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, catalog.CatalogError, GroupSpecError, UnsupportedStructure,
            FileNotFoundError, ValueError) as exc:
        print(f"objkorn: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, SizeGuardError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"objkorn: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
