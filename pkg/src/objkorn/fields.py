"""Periodic displacement fields on a group and their discrete derivatives.

A field with period ``N`` is stored on the sites ``C_N`` in the order of
``GroupSpec.site_elements``: coset-major, then exponents in C order, each
exponent taken modulo ``k = N / m0``.
"""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path

import numpy as np

from .group import CanonicalElement, GroupSpec, RangeSet


class PeriodicDisplacement:
    """A ``T^N``-periodic field ``u: G -> R^d`` (or ``C^d``).

    ``values`` has shape ``(n_cosets, k, ..., k, d)`` with ``d2`` lattice axes.
    """

    __slots__ = ("spec", "N", "values")

    def __init__(self, spec: GroupSpec, N: int, values):
        k = spec.period_factor(N)
        vals = np.array(values)
        if not np.iscomplexobj(vals):
            vals = vals.astype(float)
        shape = (spec.n_cosets,) + (k,) * spec.d2 + (spec.d,)
        if vals.size != math.prod(shape):
            raise ValueError(f"expected {math.prod(shape)} entries for shape {shape}, got {vals.size}")
        vals = vals.reshape(shape)
        vals.setflags(write=False)
        self.spec, self.N, self.values = spec, int(N), vals

    @property
    def k(self) -> int:
        return self.N // self.spec.m0

    @property
    def n_sites(self) -> int:
        return self.spec.coset_count(self.N)

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.values)

    def site_values(self) -> np.ndarray:
        """Values on ``C_N`` as an ``(n_sites, d)`` array."""
        return self.values.reshape(self.n_sites, self.spec.d)

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1).copy()

    @classmethod
    def from_flat(cls, spec, N, vec) -> "PeriodicDisplacement":
        return cls(spec, N, np.asarray(vec))

    @classmethod
    def from_function(cls, spec, N, func) -> "PeriodicDisplacement":
        """Sample ``func(CanonicalElement) -> d-vector`` on ``C_N``."""
        cosets, exps = spec.site_elements(N)
        vals = [func(CanonicalElement(c, a)) for c, a in zip(cosets, exps)]
        return cls(spec, N, np.array(vals))

    def __call__(self, g: CanonicalElement) -> np.ndarray:
        idx = (g.coset_index,) + tuple(int(a) % self.k for a in g.exponents)
        return self.values[idx]

    def at(self, cosets: np.ndarray, exps: np.ndarray) -> np.ndarray:
        """Vectorized evaluation on arrays of coordinates."""
        return self.site_values()[site_index(self.spec, self.N, cosets, exps)]

    def lift(self, N2: int) -> "PeriodicDisplacement":
        """The same field viewed as ``T^N2``-periodic, ``N | N2``."""
        if N2 % self.N:
            raise ValueError(f"cannot lift period {self.N} to {N2}")
        reps = N2 // self.N
        tile = (1,) + (reps,) * self.spec.d2 + (1,)
        return PeriodicDisplacement(self.spec, N2, np.tile(self.values, tile))

    def _aligned(self, other):
        if not isinstance(other, PeriodicDisplacement):
            return NotImplemented
        if other.spec is not self.spec:
            raise ValueError("fields belong to different group specs")
        M = math.lcm(self.N, other.N)
        return self.lift(M), other.lift(M)

    def __add__(self, other):
        a, b = self._aligned(other)
        return PeriodicDisplacement(self.spec, a.N, a.values + b.values)

    def __sub__(self, other):
        a, b = self._aligned(other)
        return PeriodicDisplacement(self.spec, a.N, a.values - b.values)

    def __mul__(self, scalar):
        return PeriodicDisplacement(self.spec, self.N, self.values * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return PeriodicDisplacement(self.spec, self.N, -self.values)

    def __repr__(self):
        return f"PeriodicDisplacement(spec={self.spec.name!r}, N={self.N})"


def site_index(spec: GroupSpec, N: int, cosets, exps) -> np.ndarray:
    """Storage index of ``(coset, exps mod k)``."""
    k = spec.period_factor(N)
    cosets = np.asarray(cosets, dtype=np.int64)
    exps = np.asarray(exps, dtype=np.int64).reshape(len(cosets), spec.d2)
    idx = cosets.copy()
    for j in range(spec.d2):
        idx = idx * k + np.mod(exps[:, j], k)
    return idx


def product_indices(spec: GroupSpec, N: int, R: RangeSet) -> np.ndarray:
    """``P[s, j]`` = storage index of ``g_s h_j`` for every site ``g_s`` of ``C_N``."""
    cosets, exps = spec.site_elements(N)
    cols = []
    for h in R:
        c, e = spec.multiply_sites(cosets, exps, h)
        cols.append(site_index(spec, N, c, e))
    return np.stack(cols, axis=1) if cols else np.zeros((len(cosets), 0), dtype=np.int64)


def range_rotations(spec: GroupSpec, R: RangeSet) -> np.ndarray:
    """``rot(h)`` for each ``h`` in ``R``, shape ``(|R|, d, d)``."""
    return np.array([spec.rotation_of(h) for h in R]).reshape(len(R), spec.d, spec.d)


def site_rotations(spec: GroupSpec, N: int) -> np.ndarray:
    """``rot(g)`` for every ``g`` in ``C_N``, shape ``(n_sites, d, d)``."""
    cosets, exps = spec.site_elements(N)
    k = spec.period_factor(N)
    powers = []
    for t in spec.translation_basis:
        P = [np.eye(spec.d)]
        for _ in range(1, k):
            P.append(P[-1] @ t.rotation)
        powers.append(P)
    out = np.empty((len(cosets), spec.d, spec.d))
    for s, (c, a) in enumerate(zip(cosets, exps)):
        A = spec.coset_reps[c].rotation
        for j in range(spec.d2):
            A = A @ powers[j][a[j]]
        out[s] = A
    return out


def inner_product(u: PeriodicDisplacement, v: PeriodicDisplacement):
    """``(1/|C_N|) sum_g <u(g), v(g)>`` on a common period (conjugate-linear in ``u``)."""
    a, b = u._aligned(v)
    val = np.vdot(a.values.reshape(-1), b.values.reshape(-1)) / a.n_sites
    if not (a.is_complex or b.is_complex):
        return float(np.real(val))
    return complex(val)


def norm(u: PeriodicDisplacement) -> float:
    return float(np.sqrt(max(np.real(inner_product(u, u)), 0.0)))


def displacement_to_deformation(u: PeriodicDisplacement, g: CanonicalElement) -> np.ndarray:
    """``v(g) = g (x0 + u(g))``."""
    return u.spec.reconstruct(g).act(u.spec.base_point + u(g))


def patches(u: PeriodicDisplacement, R: RangeSet) -> np.ndarray:
    """Local patches ``u(g h)`` for ``g`` in ``C_N``, ``h`` in ``R``: shape ``(n_sites, |R|, d)``."""
    P = product_indices(u.spec, u.N, R)
    return u.site_values()[P]


def discrete_derivative_all(u: PeriodicDisplacement, R: RangeSet) -> np.ndarray:
    """``u(g h) - rot(h)^T u(g)`` for all sites and ``h`` in ``R``."""
    vals = u.site_values()
    rots = range_rotations(u.spec, R)
    # rot(h)^T u(g) for each (g, h)
    back = np.einsum("hji,sj->shi", rots, vals)
    return patches(u, R) - back


def discrete_derivative(u: PeriodicDisplacement, R: RangeSet, g: CanonicalElement) -> np.ndarray:
    """``(nabla_R u)(g)`` as an ``(|R|, d)`` array, rows ordered like ``R``."""
    ug = u(g)
    rows = [u(u.spec.multiply(g, h)) - u.spec.rotation_of(h).T @ ug for h in R]
    return np.array(rows).reshape(len(R), u.spec.d)


def random_field(spec: GroupSpec, N: int, seed=None) -> PeriodicDisplacement:
    """I.i.d. uniform ``[-1, 1]`` entries from ``numpy.random.default_rng(seed)``."""
    k = spec.period_factor(N)
    rng = np.random.default_rng(seed)
    shape = (spec.n_cosets,) + (k,) * spec.d2 + (spec.d,)
    return PeriodicDisplacement(spec, N, rng.uniform(-1.0, 1.0, size=shape))


def translation_field(spec: GroupSpec, N: int, a) -> PeriodicDisplacement:
    """Samples of ``u(g) = rot(g)^T a`` on ``C_N``.

    This is the periodic extension of those samples; it coincides with the
    infinitesimal translation on all of ``G`` only when ``rot(t^N) a = a``.
    """
    a = np.asarray(a, dtype=float)
    rots = site_rotations(spec, N)
    return PeriodicDisplacement(spec, N, np.einsum("sji,j->si", rots, a))


def zero_field(spec: GroupSpec, N: int) -> PeriodicDisplacement:
    k = spec.period_factor(N)
    return PeriodicDisplacement(spec, N, np.zeros((spec.n_cosets,) + (k,) * spec.d2 + (spec.d,)))


# -- CSV -------------------------------------------------------------------

def field_header(spec: GroupSpec) -> list[str]:
    return (["coset_index"] + [f"a_{j + 1}" for j in range(spec.d2)]
            + [f"u_{i + 1}" for i in range(spec.d)])


def write_field_csv(u: PeriodicDisplacement, path_or_buffer) -> None:
    if u.is_complex:
        raise ValueError("CSV export supports real fields only")
    cosets, exps = u.spec.site_elements(u.N)
    vals = u.site_values()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(field_header(u.spec))
    for c, a, row in zip(cosets, exps, vals):
        w.writerow([int(c)] + [int(x) for x in a] + [format(float(x), ".17g") for x in row])
    _emit(buf.getvalue(), path_or_buffer)


def read_field_csv(spec: GroupSpec, path_or_buffer) -> PeriodicDisplacement:
    """Read a field CSV; the period is inferred as ``(max a + 1) * m0``."""
    text = _slurp(path_or_buffer)
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != field_header(spec):
        raise ValueError(f"field CSV header must be {','.join(field_header(spec))}")
    body = [r for r in rows[1:] if r]
    if not body:
        raise ValueError("field CSV has no rows")
    cosets = np.array([int(r[0]) for r in body])
    exps = np.array([[int(x) for x in r[1:1 + spec.d2]] for r in body], dtype=np.int64).reshape(len(body), spec.d2)
    vals = np.array([[float(x) for x in r[1 + spec.d2:]] for r in body])
    k = int(exps.max()) + 1 if spec.d2 else 1
    if exps.size and exps.min() < 0:
        raise ValueError("exponents must be nonnegative")
    N = k * spec.m0
    n_sites = spec.coset_count(N)
    if len(body) != n_sites:
        raise ValueError(f"expected {n_sites} rows for period {N}, got {len(body)}")
    idx = site_index(spec, N, cosets, exps)
    if len(set(idx.tolist())) != n_sites or cosets.max() >= spec.n_cosets:
        raise ValueError("field CSV rows do not cover C_N exactly once")
    out = np.empty((n_sites, spec.d))
    out[idx] = vals
    return PeriodicDisplacement(spec, N, out)


def _emit(text: str, path_or_buffer) -> None:
    if hasattr(path_or_buffer, "write"):
        path_or_buffer.write(text)
    else:
        Path(path_or_buffer).write_text(text)


def _slurp(path_or_buffer) -> str:
    if hasattr(path_or_buffer, "read"):
        return path_or_buffer.read()
    return Path(path_or_buffer).read_text()
