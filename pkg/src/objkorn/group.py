"""Discrete groups in canonical ``O(d1) + S`` form with coset coordinates.

Every element is stored as ``(i, a)`` meaning ``c_i t_1^a_1 ... t_d2^a_d2``,
where ``c_i`` runs over the coset representatives of ``G / T^m0`` and
``t_1..t_d2`` is the translation basis.  Products are computed exactly in
these integer coordinates::

    (i, a)(j, b) = (k, e + M_j a + b)   with c_i c_j = c_k t^e,
                                         c_j^-1 t^a c_j = t^(M_j a).
"""

from __future__ import annotations

import itertools
import json
import re
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .euclid import Isometry, IsometryError

ELEMENT_TOL = 1e-8
CANONICAL_TOL = 1e-10
PROPERTY2_CAP = 12


class GroupSpecError(ValueError):
    """Invalid group description."""


class NotAGroupElement(ValueError):
    pass


@dataclass(frozen=True, order=True)
class CanonicalElement:
    coset_index: int
    exponents: tuple

    def __post_init__(self):
        object.__setattr__(self, "coset_index", int(self.coset_index))
        object.__setattr__(self, "exponents", tuple(int(x) for x in self.exponents))

    def __repr__(self):
        return f"({self.coset_index}, {self.exponents})"


@dataclass(frozen=True)
class RangeSet:
    """A finite interaction range ``R``; ``labels`` are the words it was parsed from."""

    elements: tuple
    labels: tuple = ()

    def __post_init__(self):
        els = tuple(self.elements)
        if len(set(els)) != len(els):
            raise ValueError("range contains duplicate elements")
        labels = tuple(self.labels) if self.labels else tuple(repr(e) for e in els)
        if len(labels) != len(els):
            raise ValueError("labels must match elements")
        object.__setattr__(self, "elements", els)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def without(self, element: CanonicalElement) -> "RangeSet":
        keep = [(e, l) for e, l in zip(self.elements, self.labels) if e != element]
        return RangeSet(tuple(e for e, _ in keep), tuple(l for _, l in keep))


class GroupSpec:
    """A validated discrete group ``G < O(d1) + S`` with a base point.

    Parameters
    ----------
    d, d1, d2 : int
        Dimension split, ``d = d1 + d2``.
    generators : sequence of Isometry
        Declared generating set.
    translation_basis : sequence of Isometry
        ``t_1..t_d2``, commuting, generating ``T^m0``.
    m0 : int
        Smallest period for which ``T^m0`` is normal.
    coset_reps : sequence of Isometry
        Representatives of ``G / T^m0``; the first must be the identity.
    base_point : array_like
        ``x0``.
    generator_names : sequence of str, optional
        Names used in range expressions; default ``g1, g2, ...``.

    Raises
    ------
    GroupSpecError
        If any structural check fails.
    """

    def __init__(self, d, d1, d2, generators, translation_basis, m0, coset_reps,
                 base_point, generator_names=None, name="custom", injectivity_sample=1000):
        self.d, self.d1, self.d2 = int(d), int(d1), int(d2)
        self.name = name
        self.m0 = int(m0)
        if self.d1 < 0 or self.d2 < 0 or self.d1 + self.d2 != self.d:
            raise GroupSpecError(f"invalid split d={d}, d1={d1}, d2={d2}")
        if self.m0 < 1:
            raise GroupSpecError("m0 must be a positive integer")
        self.generators = tuple(generators)
        self.translation_basis = tuple(translation_basis)
        self.coset_reps = tuple(coset_reps)
        self.base_point = np.array(base_point, dtype=float).reshape(-1)
        self.base_point.setflags(write=False)
        if generator_names is None:
            generator_names = [f"g{i + 1}" for i in range(len(self.generators))]
        self.generator_names = tuple(generator_names)
        if len(self.generator_names) != len(self.generators):
            raise GroupSpecError("generator_names must match generators")
        if len(set(self.generator_names)) != len(self.generator_names) or "id" in self.generator_names:
            raise GroupSpecError("generator names must be distinct and differ from 'id'")
        self._validate_shapes()
        self._build_tables()
        self._validate_generation()
        self._validate_injectivity(injectivity_sample)

    # -- construction ---------------------------------------------------------

    def _validate_shapes(self):
        if not self.generators:
            raise GroupSpecError("at least one generator required")
        if len(self.translation_basis) != self.d2:
            raise GroupSpecError(f"translation basis must have d2={self.d2} elements")
        if not self.coset_reps:
            raise GroupSpecError("coset_reps must not be empty")
        if self.base_point.shape != (self.d,):
            raise GroupSpecError(f"base point must have length {self.d}")
        groups = [("generator", self.generators), ("translation basis element", self.translation_basis),
                  ("coset representative", self.coset_reps)]
        for label, items in groups:
            for g in items:
                if not isinstance(g, Isometry) or g.d != self.d:
                    raise GroupSpecError(f"{label} is not an isometry of R^{self.d}")
                if not g.is_block_canonical(self.d1, CANONICAL_TOL):
                    raise GroupSpecError(f"{label} {g!r} is not in canonical block form")
        if not self.coset_reps[0].is_close(Isometry.identity(self.d), CANONICAL_TOL):
            raise GroupSpecError("first coset representative must be the identity")
        for t in self.translation_basis:
            if np.linalg.norm(t.rotation[self.d1:, self.d1:] - np.eye(self.d2)) > CANONICAL_TOL:
                raise GroupSpecError("translation basis elements must act as pure translations on R^d2")
        for s, t in itertools.combinations(self.translation_basis, 2):
            if not (s @ t).is_close(t @ s, CANONICAL_TOL):
                raise GroupSpecError("translation basis elements do not commute")
        L = np.array([t.translation[self.d1:] for t in self.translation_basis]).T.reshape(self.d2, self.d2)
        if self.d2 and np.linalg.matrix_rank(L, tol=1e-10) < self.d2:
            raise GroupSpecError("translation basis parts in R^d2 are linearly dependent")
        self.lattice = L
        self.lattice.setflags(write=False)

    def _build_tables(self):
        n = self.n_cosets
        self._rep_inverses = [c.inverse() for c in self.coset_reps]
        for j, c in enumerate(self.coset_reps):
            e = self._canonicalize_iso(c)
            if e != CanonicalElement(j, (0,) * self.d2):
                raise GroupSpecError(
                    f"coset representative {j} is not distinct modulo T^m0 (matches {e})")
        table = np.zeros((n, n), dtype=np.int64)
        shift = np.zeros((n, n, self.d2), dtype=np.int64)
        for i, j in itertools.product(range(n), repeat=2):
            e = self._canonicalize_iso(self.coset_reps[i] @ self.coset_reps[j], "coset representative products")
            table[i, j] = e.coset_index
            shift[i, j] = e.exponents
        conj = np.zeros((n, self.d2, self.d2), dtype=np.int64)
        conj_inv = np.zeros_like(conj)
        for j, c in enumerate(self.coset_reps):
            cinv = self._rep_inverses[j]
            for i, t in enumerate(self.translation_basis):
                e = self._canonicalize_iso(cinv @ t @ c, "conjugated translation basis")
                if e.coset_index != 0:
                    raise GroupSpecError("T^m0 is not normal: conjugate of a basis element leaves T^m0")
                conj[j, :, i] = e.exponents
                f = self._canonicalize_iso(c @ t @ cinv, "conjugated translation basis")
                if f.coset_index != 0:
                    raise GroupSpecError("T^m0 is not normal: conjugate of a basis element leaves T^m0")
                conj_inv[j, :, i] = f.exponents
            if self.d2:
                if abs(round(np.linalg.det(conj[j]))) != 1:
                    raise GroupSpecError("conjugation action on T^m0 is not unimodular")
                if not np.array_equal(conj[j] @ conj_inv[j], np.eye(self.d2, dtype=np.int64)):
                    raise GroupSpecError("conjugation matrices are inconsistent")
        inv_idx = np.zeros(n, dtype=np.int64)
        inv_shift = np.zeros((n, self.d2), dtype=np.int64)
        for i in range(n):
            e = self._canonicalize_iso(self._rep_inverses[i], "coset representative inverses")
            inv_idx[i] = e.coset_index
            inv_shift[i] = e.exponents
        for arr in (table, shift, conj, conj_inv, inv_idx, inv_shift):
            arr.setflags(write=False)
        self.coset_table, self.coset_shift = table, shift
        self.conjugation, self.conjugation_inverse = conj, conj_inv
        self._inv_idx, self._inv_shift = inv_idx, inv_shift
        try:
            self.generators_canonical = tuple(self.canonicalize(g) for g in self.generators)
        except NotAGroupElement as exc:
            raise GroupSpecError(f"generator outside the described group: {exc}") from None

    def _validate_generation(self):
        # the quotient G/T^m0 must be generated by the generator images
        reached = {0}
        frontier = [0]
        gen_cosets = {g.coset_index for g in self.generators_canonical}
        gen_cosets |= {self.inverse(g).coset_index for g in self.generators_canonical}
        while frontier:
            nxt = []
            for i in frontier:
                for j in gen_cosets:
                    k = int(self.coset_table[i, j])
                    if k not in reached:
                        reached.add(k)
                        nxt.append(k)
            frontier = nxt
        if len(reached) != self.n_cosets:
            raise GroupSpecError("generators do not reach every coset of T^m0")
        targets = [self.canonicalize(t) for t in self.translation_basis]
        radius = 2 * self.n_cosets + 4
        ball = self.word_ball(radius, max_elements=50000)
        missing = [t for t in targets if t not in ball]
        if missing:
            raise GroupSpecError(
                f"translation basis elements {missing} not generated within word length {radius}")

    def _validate_injectivity(self, n_sample):
        elements = self.sample_elements(n_sample)
        pts = np.array([self.point(e) for e in elements])
        if len(pts) > 1:
            pairs = cKDTree(pts).query_pairs(ELEMENT_TOL)
            if pairs:
                i, j = sorted(pairs)[0]
                raise GroupSpecError(
                    f"orbit map is not injective: {elements[i]} and {elements[j]} give the same point")

    # -- basic properties -----------------------------------------------------

    @property
    def n_cosets(self) -> int:
        return len(self.coset_reps)

    def identity(self) -> CanonicalElement:
        return CanonicalElement(0, (0,) * self.d2)

    def coset_count(self, N: int) -> int:
        """``|C_N| = |C_m0| (N/m0)^d2``."""
        return self.n_cosets * self.period_factor(N) ** self.d2

    def period_factor(self, N: int) -> int:
        N = int(N)
        if N < 1 or N % self.m0:
            raise ValueError(f"period N={N} is not a positive multiple of m0={self.m0}")
        return N // self.m0

    def __repr__(self):
        return f"GroupSpec(name={self.name!r}, d={self.d}, d1={self.d1}, d2={self.d2}, m0={self.m0}, cosets={self.n_cosets})"

    # -- element arithmetic ---------------------------------------------------

    def translation_power(self, a) -> Isometry:
        out = Isometry.identity(self.d)
        for t, ai in zip(self.translation_basis, a):
            out = out @ (t ** int(ai))
        return out

    def reconstruct(self, e: CanonicalElement) -> Isometry:
        return self.coset_reps[e.coset_index] @ self.translation_power(e.exponents)

    def _canonicalize_iso(self, g: Isometry, context: str = "") -> CanonicalElement:
        try:
            return self.canonicalize(g)
        except NotAGroupElement:
            where = f" ({context})" if context else ""
            raise GroupSpecError(f"not a group element{where}: {g!r}") from None

    def canonicalize(self, g: Isometry) -> CanonicalElement:
        """Coset coordinates ``(i, a)`` of ``g``; raises ``NotAGroupElement``."""
        if g.d != self.d:
            raise NotAGroupElement(f"dimension {g.d} != {self.d}")
        d1 = self.d1
        for i, cinv in enumerate(self._rep_inverses):
            r = cinv @ g
            if np.linalg.norm(r.rotation[d1:, d1:] - np.eye(self.d2)) > ELEMENT_TOL:
                continue
            if self.d2:
                a_real = np.linalg.solve(self.lattice, r.translation[d1:])
                a = np.rint(a_real).astype(np.int64)
                if np.linalg.norm(self.lattice @ a - r.translation[d1:]) > ELEMENT_TOL:
                    continue
            else:
                a = np.zeros(0, dtype=np.int64)
            if self.translation_power(a).is_close(r, ELEMENT_TOL):
                return CanonicalElement(i, tuple(a))
        raise NotAGroupElement(f"not a group element: {g!r}")

    def multiply(self, x: CanonicalElement, y: CanonicalElement) -> CanonicalElement:
        i, a = x.coset_index, np.asarray(x.exponents, dtype=np.int64)
        j, b = y.coset_index, np.asarray(y.exponents, dtype=np.int64)
        k = int(self.coset_table[i, j])
        e = self.coset_shift[i, j] + self.conjugation[j] @ a + b
        return CanonicalElement(k, tuple(e))

    def inverse(self, x: CanonicalElement) -> CanonicalElement:
        i, a = x.coset_index, np.asarray(x.exponents, dtype=np.int64)
        return CanonicalElement(int(self._inv_idx[i]), tuple(self._inv_shift[i] - self.conjugation_inverse[i] @ a))

    def power(self, x: CanonicalElement, n: int) -> CanonicalElement:
        n = int(n)
        if n < 0:
            x, n = self.inverse(x), -n
        out, base = self.identity(), x
        while n:
            if n & 1:
                out = self.multiply(out, base)
            base = self.multiply(base, base)
            n >>= 1
        return out

    def multiply_sites(self, cosets: np.ndarray, exps: np.ndarray, h: CanonicalElement):
        """Vectorized right multiplication ``g -> g h`` on arrays of coordinates."""
        j = h.coset_index
        new_c = self.coset_table[cosets, j]
        new_e = self.coset_shift[cosets, j] + exps @ self.conjugation[j].T + np.asarray(h.exponents, dtype=np.int64)
        return new_c, new_e

    def rotation_of(self, e: CanonicalElement) -> np.ndarray:
        return self.reconstruct(e).rotation

    def point(self, e: CanonicalElement) -> np.ndarray:
        return self.reconstruct(e).act(self.base_point)

    # -- enumeration ----------------------------------------------------------

    def word_ball(self, radius: int, max_elements: int | None = None) -> dict:
        """Elements reachable by words of length <= radius, mapped to their word length."""
        steps = []
        for g in self.generators_canonical:
            steps += [g, self.inverse(g)]
        seen = {self.identity(): 0}
        frontier = [self.identity()]
        for r in range(1, int(radius) + 1):
            nxt = []
            for x in frontier:
                for s in steps:
                    y = self.multiply(x, s)
                    if y not in seen:
                        seen[y] = r
                        nxt.append(y)
                        if max_elements is not None and len(seen) >= max_elements:
                            return seen
            frontier = nxt
        return seen

    def sample_elements(self, n_min: int) -> list:
        """Deterministic element sample: every coset times a centered exponent box."""
        if self.d2 == 0:
            return [CanonicalElement(i, ()) for i in range(self.n_cosets)]
        K = 0
        while self.n_cosets * (2 * K + 1) ** self.d2 < n_min:
            K += 1
        rng = range(-K, K + 1)
        return [CanonicalElement(i, a) for i in range(self.n_cosets)
                for a in itertools.product(rng, repeat=self.d2)]

    def site_elements(self, N: int) -> tuple[np.ndarray, np.ndarray]:
        """Coordinates of ``C_N`` in storage order: coset-major, then C-order exponents."""
        k = self.period_factor(N)
        combos = list(itertools.product(range(k), repeat=self.d2))
        grid = np.array(combos, dtype=np.int64).reshape(len(combos), self.d2)
        cosets = np.repeat(np.arange(self.n_cosets, dtype=np.int64), len(grid))
        exps = np.tile(grid, (self.n_cosets, 1))
        return cosets, exps

    # -- derived quantities ---------------------------------------------------

    @cached_property
    def affine_dimension(self) -> int:
        return affine_dimension(self)

    @cached_property
    def rotation_group_finite(self) -> bool:
        return rotation_group_finite(self)


def orbit(spec: GroupSpec, word_radius: int) -> np.ndarray:
    """Points ``g x0`` for ``g`` within ``word_radius``, deduplicated at 1e-8."""
    if word_radius < 0:
        raise ValueError("word_radius must be nonnegative")
    ball = spec.word_ball(word_radius)
    order = sorted(ball, key=lambda e: (ball[e], e))
    pts = np.array([spec.point(e) for e in order])
    keep = []
    tree = cKDTree(pts)
    dropped = set()
    for i in range(len(pts)):
        if i in dropped:
            continue
        keep.append(i)
        dropped.update(j for j in tree.query_ball_point(pts[i], ELEMENT_TOL) if j > i)
    return pts[keep]


def affine_dimension(spec: GroupSpec, sample_radius: int | None = None) -> int:
    """Dimension of ``aff(G x0)`` from an orbit sample (default radius ``max(2d, 4)``)."""
    if sample_radius is None:
        sample_radius = max(2 * spec.d, 4)
    pts = orbit(spec, sample_radius)
    return _difference_rank(pts - spec.base_point)


def _difference_rank(diffs: np.ndarray) -> int:
    if diffs.size == 0:
        return 0
    s = np.linalg.svd(np.atleast_2d(diffs), compute_uv=False)
    return int(np.sum(s > 1e-8 * max(1.0, s[0]))) if s.size else 0


def rotation_group_finite(spec: GroupSpec, max_order: int = 360) -> bool:
    """True if every ``rot(t_i)`` has finite order ``<= max_order`` (then ``rot(G)`` is finite)."""
    for t in spec.translation_basis:
        A = t.rotation
        P = np.eye(spec.d)
        for _ in range(max_order):
            P = P @ A
            if np.linalg.norm(P - np.eye(spec.d)) < ELEMENT_TOL:
                break
        else:
            return False
    return True


def has_property_1(spec: GroupSpec, R) -> bool:
    elements = list(R)
    if spec.identity() not in elements:
        return False
    diffs = np.array([spec.point(h) - spec.base_point for h in elements])
    return _difference_rank(diffs) == spec.affine_dimension


def generates(spec: GroupSpec, subset, radius: int | None = None) -> bool:
    """Whether ``subset`` generates ``G``, via a bounded word search for each declared generator."""
    subset = list(subset)
    targets = set(spec.generators_canonical)
    if radius is None:
        radius = 2 * spec.n_cosets + 6
    steps = []
    for g in subset:
        steps += [g, spec.inverse(g)]
    seen = {spec.identity()}
    frontier = [spec.identity()]
    for _ in range(radius):
        if targets <= seen:
            return True
        nxt = []
        for x in frontier:
            for s in steps:
                y = spec.multiply(x, s)
                if y not in seen:
                    seen.add(y)
                    nxt.append(y)
        frontier = nxt
        if not frontier:
            break
    return targets <= seen


def has_property_2(spec: GroupSpec, R, cap: int = PROPERTY2_CAP):
    """Property 2 test; returns ``None`` when ``|R|`` exceeds ``cap``.

    Any witness ``R'`` lies inside ``R`` (because ``id`` is in ``R''``), and
    for fixed ``R'`` the best ``R''`` is ``{h in R : R' h in R}``.  Subsets
    ``R'`` of ``R`` containing the identity are tried in increasing size.
    """
    elements = list(R)
    ident = spec.identity()
    if ident not in elements:
        return False
    if len(elements) > cap:
        return None
    others = [e for e in elements if e != ident]
    Rset = set(elements)
    tried_generating = []
    for size in range(1, len(others) + 1):
        for combo in itertools.combinations(others, size):
            cset = set(combo)
            if any(g <= cset for g in tried_generating):
                continue
            if not generates(spec, combo):
                continue
            tried_generating.append(cset)
            Rp = [ident, *combo]
            Rpp = [h for h in elements if all(spec.multiply(r, h) in Rset for r in Rp)]
            if has_property_1(spec, Rpp):
                return True
    return False


# -- words and ranges -------------------------------------------------------

_TOKEN = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*(?:\^\s*([+-]?\d+))?\s*$")


def parse_word(spec: GroupSpec, word: str) -> CanonicalElement:
    """Evaluate a word such as ``"t1*t2^-1"`` or ``"id"`` in canonical coordinates."""
    names = dict(zip(spec.generator_names, spec.generators_canonical))
    out = spec.identity()
    if not word.strip():
        raise ValueError("empty word")
    for tok in word.split("*"):
        m = _TOKEN.match(tok)
        if not m:
            raise ValueError(f"malformed word token {tok!r}")
        name, exp = m.group(1), int(m.group(2)) if m.group(2) is not None else 1
        if name in ("id", "e"):
            continue
        if name not in names:
            raise ValueError(f"unknown generator {name!r}; known: {', '.join(names)}")
        out = spec.multiply(out, spec.power(names[name], exp))
    return out


def parse_range(spec: GroupSpec, expr: str) -> RangeSet:
    """Parse a comma-separated list of words into a ``RangeSet``."""
    words = [w.strip() for w in expr.split(",")]
    if not expr.strip() or any(not w for w in words):
        raise ValueError(f"malformed range expression {expr!r}")
    return RangeSet(tuple(parse_word(spec, w) for w in words), tuple(words))


# -- spec files -------------------------------------------------------------

SPEC_KEYS = {"name", "description", "dimension", "generators", "translation_basis",
             "m0", "coset_reps", "base_point"}


def _word_isometry(word: str, gens: dict, d: int) -> Isometry:
    out = Isometry.identity(d)
    for tok in word.split("*"):
        m = _TOKEN.match(tok)
        if not m:
            raise GroupSpecError(f"malformed word token {tok!r}")
        name, exp = m.group(1), int(m.group(2)) if m.group(2) is not None else 1
        if name in ("id", "e"):
            continue
        if name not in gens:
            raise GroupSpecError(f"unknown generator {name!r} in word {word!r}")
        out = out @ (gens[name] ** exp)
    return out


def _isometry_entry(entry, gens, d, what) -> Isometry:
    if isinstance(entry, str):
        return _word_isometry(entry, gens, d)
    if isinstance(entry, dict):
        extra = set(entry) - {"rotation", "translation", "name"}
        if extra:
            raise GroupSpecError(f"unknown keys in {what}: {sorted(extra)}")
        try:
            return Isometry(np.array(entry["rotation"], dtype=float).reshape(d, d),
                            np.array(entry["translation"], dtype=float))
        except (KeyError, ValueError, IsometryError) as exc:
            raise GroupSpecError(f"bad {what}: {exc}") from None
    raise GroupSpecError(f"{what} must be a word or an object with rotation/translation")


def spec_from_dict(data: dict) -> GroupSpec:
    """Build a ``GroupSpec`` from the decoded spec-file mapping."""
    if not isinstance(data, dict):
        raise GroupSpecError("spec must be a mapping")
    unknown = set(data) - SPEC_KEYS
    if unknown:
        raise GroupSpecError(f"unknown spec keys: {sorted(unknown)}")
    for key in ("dimension", "generators", "m0", "coset_reps", "base_point"):
        if key not in data:
            raise GroupSpecError(f"missing spec key {key!r}")
    dim = data["dimension"]
    if not isinstance(dim, dict) or set(dim) != {"d", "d1", "d2"}:
        raise GroupSpecError("dimension must have exactly the keys d, d1, d2")
    d, d1, d2 = (int(dim[k]) for k in ("d", "d1", "d2"))
    gens, names = [], []
    for i, g in enumerate(data["generators"]):
        if not isinstance(g, dict):
            raise GroupSpecError("each generator must be an object")
        names.append(str(g.get("name", f"g{i + 1}")))
        gens.append(_isometry_entry(g, {}, d, f"generator {i}"))
    gmap = dict(zip(names, gens))
    basis = [_isometry_entry(t, gmap, d, "translation basis element")
             for t in data.get("translation_basis", [])]
    reps = [_isometry_entry(c, gmap, d, "coset representative") for c in data["coset_reps"]]
    m0 = data["m0"]
    if not isinstance(m0, int) or isinstance(m0, bool):
        raise GroupSpecError("m0 must be an integer")
    return GroupSpec(d, d1, d2, gens, basis, m0, reps, data["base_point"],
                     generator_names=names, name=str(data.get("name", "custom")))


def load_spec_file(path) -> GroupSpec:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise GroupSpecError(f"{path}: invalid JSON ({exc})") from None
    return spec_from_dict(data)
