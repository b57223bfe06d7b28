"""Built-in reference structures with tagged ground-truth values.

Each entry is a JSON file holding a group spec, named reference ranges and a
list of ground-truth checks.  Every check carries a ``source`` tag:
``published`` (stated in the literature), ``trivial`` (forced arithmetic) or
``derived`` (computed independently and frozen).  Extra entries can be
dropped into a directory named by ``KORN_CATALOG_DIR``.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .group import (GroupSpec, RangeSet, affine_dimension, has_property_1,
                    has_property_2, orbit, parse_range, spec_from_dict)
from .seminorms import (build_subspace, global_subspace_dimension, kernel,
                        periodic_intersection_dimension)

ENV_VAR = "KORN_CATALOG_DIR"
SOURCES = ("published", "trivial", "derived")
ENTRY_KEYS = {"spec", "reference_ranges", "ground_truth", "companions"}
ORDER_CAP = 360

_BUILTIN_DIR = Path(__file__).with_name("structures")


class CatalogError(ValueError):
    """Unknown entry or malformed entry file."""


@dataclass
class CatalogEntry:
    name: str
    spec: GroupSpec
    reference_ranges: dict
    ground_truth: list
    companions: dict = field(default_factory=dict)
    path: Path | None = None

    def range(self, label: str) -> RangeSet:
        """A reference range by label, or a literal range expression."""
        if label in self.reference_ranges:
            return self.reference_ranges[label]
        return parse_range(self.spec, label)


def search_dirs(catalog_dir=None) -> list[Path]:
    dirs = []
    extra = catalog_dir if catalog_dir is not None else os.environ.get(ENV_VAR)
    if extra:
        dirs.append(Path(extra))
    dirs.append(_BUILTIN_DIR)
    return dirs


def list_entries(catalog_dir=None) -> list[str]:
    names = set()
    for d in search_dirs(catalog_dir):
        if d.is_dir():
            names.update(p.stem for p in d.glob("*.json"))
    return sorted(names)


def _locate(name: str, catalog_dir=None) -> Path:
    for d in search_dirs(catalog_dir):
        p = d / f"{name}.json"
        if p.is_file():
            return p
    raise CatalogError(f"unknown structure {name!r}; known: {', '.join(list_entries(catalog_dir))}")


def _validate_ground_truth(items, ranges: dict, companions: dict) -> list:
    if not isinstance(items, list):
        raise CatalogError("ground_truth must be a list")
    for i, item in enumerate(items):
        if not isinstance(item, dict) or "check" not in item or "value" not in item:
            raise CatalogError(f"ground_truth[{i}] needs 'check' and 'value'")
        if item.get("source") not in SOURCES:
            raise CatalogError(f"ground_truth[{i}] ({item['check']}) has no valid source tag; "
                               f"expected one of {SOURCES}")
        if item["check"] not in CHECKS:
            raise CatalogError(f"ground_truth[{i}] has unknown check {item['check']!r}")
        if "range" in item and item["range"] not in ranges:
            raise CatalogError(f"ground_truth[{i}] refers to unknown range {item['range']!r}")
        if "companion" in item and item["companion"] not in companions:
            raise CatalogError(f"ground_truth[{i}] refers to unknown companion {item['companion']!r}")
    return items


def entry_from_dict(data: dict, path: Path | None = None) -> CatalogEntry:
    unknown = set(data) - ENTRY_KEYS
    if unknown:
        raise CatalogError(f"unknown entry keys: {sorted(unknown)}")
    if "spec" not in data:
        raise CatalogError("entry has no 'spec'")
    try:
        spec = spec_from_dict(data["spec"])
        companions = {k: spec_from_dict(v) for k, v in data.get("companions", {}).items()}
        ranges = {k: parse_range(spec, v) for k, v in data.get("reference_ranges", {}).items()}
    except ValueError as exc:
        raise CatalogError(str(exc)) from exc
    truth = _validate_ground_truth(data.get("ground_truth", []), ranges, companions)
    return CatalogEntry(spec.name, spec, ranges, truth, companions, path)


def load(name: str, catalog_dir=None) -> CatalogEntry:
    path = _locate(name, catalog_dir)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise CatalogError(f"{path}: {exc}") from exc
    return entry_from_dict(data, path)


# -- verification -------------------------------------------------------------

def element_order(spec: GroupSpec, g, cap: int = ORDER_CAP) -> int | None:
    x = g
    for n in range(1, cap + 1):
        if x == spec.identity():
            return n
        x = spec.multiply(x, g)
    return None


def max_element_order(spec: GroupSpec) -> int | None:
    """Largest element order of a finite group (``d2 = 0``)."""
    if spec.d2:
        return None
    orders = [element_order(spec, g) for g in spec.word_ball(spec.n_cosets)]
    return None if any(o is None for o in orders) else max(orders)


def _same_points(a, b, tol=1e-8) -> bool:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.shape != b.shape:
        return False
    return all(np.min(np.linalg.norm(b - p, axis=1)) < tol for p in a)


def _periods(item):
    return item.get("periods") or [None]


def _expected(item, N):
    v = item["value"]
    return v[str(N)] if isinstance(v, dict) else v


def _check_kernel(entry, item):
    out = []
    for N in _periods(item):
        dim, _ = kernel(entry.spec, entry.range(item["range"]), item["norm"], N)
        out.append((N, dim, _expected(item, N)))
    return out


def _check_intersection(entry, item):
    return [(N, periodic_intersection_dimension(entry.spec, item["kind"], N), _expected(item, N))
            for N in _periods(item)]


def _single(fn):
    def run(entry, item):
        return [(None, fn(entry, item), item["value"])]
    return run


CHECKS = {
    "affine_dimension": _single(lambda e, it: affine_dimension(e.spec)),
    "property_1": _single(lambda e, it: has_property_1(e.spec, e.range(it["range"]))),
    "property_2": _single(lambda e, it: has_property_2(e.spec, e.range(it["range"]))),
    "subspace_rank": _single(lambda e, it: build_subspace(e.spec, e.range(it["range"]), it["kind"]).rank),
    "global_dimension": _single(lambda e, it: global_subspace_dimension(e.spec, it["kind"])),
    "kernel_dim": _check_kernel,
    "periodic_intersection": _check_intersection,
    "orbit": _single(lambda e, it: orbit(e.spec, it["radius"]).tolist()),
    "companion_orbit": _single(lambda e, it: orbit(e.companions[it["companion"]], it["radius"]).tolist()),
    "max_element_order": _single(lambda e, it: max_element_order(e.spec)),
    "companion_max_element_order": _single(lambda e, it: max_element_order(e.companions[it["companion"]])),
}


@dataclass
class CheckOutcome:
    check: str
    source: str
    N: int | None
    expected: object
    actual: object
    passed: bool
    detail: dict


def verify(entry: CatalogEntry) -> list[CheckOutcome]:
    """Recompute every ground-truth value of ``entry``."""
    out = []
    for item in entry.ground_truth:
        detail = {k: v for k, v in item.items() if k not in ("check", "value", "source")}
        for N, actual, expected in CHECKS[item["check"]](entry, item):
            if item["check"].endswith("orbit"):
                ok = _same_points(actual, expected)
            else:
                ok = actual == expected
            out.append(CheckOutcome(item["check"], item["source"], N, expected, actual, bool(ok), detail))
    return out
