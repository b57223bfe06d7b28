"""Local rigidity subspaces and the seminorms built from them.

A patch at ``g`` is the vector ``(u(g h))_{h in R}`` in ``R^{d|R|}``, laid out
block by block in the order of ``R``.  Patch seminorms measure its distance to
an isometry subspace; gradient seminorms measure the distance of the discrete
derivative ``(u(g h) - rot(h)^T u(g))_h`` to a rotation subspace.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .euclid import SkewBlockPattern, skew_basis
from .fields import (PeriodicDisplacement, discrete_derivative_all, patches, product_indices,
                     range_rotations)
from .group import GroupSpec, RangeSet, has_property_2

BASIS_RTOL = 1e-10
KERNEL_RTOL = 1e-9
MAX_FORM_SIZE = 20000


class SizeGuardError(RuntimeError):
    """Requested quadratic form exceeds the dense-size guard."""


class SubspaceKind(enum.Enum):
    Trans = "Trans"
    Rot = "Rot"
    Rot0 = "Rot0"
    Rot00 = "Rot00"
    Iso = "Iso"
    Iso0 = "Iso0"
    Iso00 = "Iso00"

    @property
    def pattern(self):
        return {"Rot": SkewBlockPattern.Full, "Iso": SkewBlockPattern.Full,
                "Rot0": SkewBlockPattern.ZeroS3, "Iso0": SkewBlockPattern.ZeroS3,
                "Rot00": SkewBlockPattern.S1Only, "Iso00": SkewBlockPattern.S1Only}.get(self.value)

    @property
    def has_translations(self) -> bool:
        return self in (SubspaceKind.Trans, SubspaceKind.Iso, SubspaceKind.Iso0, SubspaceKind.Iso00)


class SeminormKind(enum.Enum):
    PatchIso = "PatchIso"
    PatchIso0 = "PatchIso0"
    PatchIso00 = "PatchIso00"
    GradRot = "GradRot"
    GradRot0 = "GradRot0"
    GradRot00 = "GradRot00"
    GradPlain = "GradPlain"

    @property
    def is_patch(self) -> bool:
        return self.value.startswith("Patch")

    @property
    def subspace(self):
        """Subspace projected out (``None`` for the plain gradient norm)."""
        return {"PatchIso": SubspaceKind.Iso, "PatchIso0": SubspaceKind.Iso0,
                "PatchIso00": SubspaceKind.Iso00, "GradRot": SubspaceKind.Rot,
                "GradRot0": SubspaceKind.Rot0, "GradRot00": SubspaceKind.Rot00}.get(self.value)


@dataclass(frozen=True)
class SubspaceBasis:
    range: RangeSet
    kind: SubspaceKind
    columns: np.ndarray

    @property
    def rank(self) -> int:
        return self.columns.shape[1]

    def project_out(self, vectors: np.ndarray) -> np.ndarray:
        """Rows of ``vectors`` minus their orthogonal projection onto the subspace."""
        if self.rank == 0:
            return vectors
        B = self.columns
        return vectors - (vectors @ B) @ B.T

    def projector_complement(self) -> np.ndarray:
        n = self.columns.shape[0]
        return np.eye(n) - self.columns @ self.columns.T


def _orthonormalize(gen: np.ndarray, rtol: float = BASIS_RTOL) -> np.ndarray:
    if gen.size == 0 or gen.shape[1] == 0:
        return np.zeros((gen.shape[0], 0))
    U, s, _ = np.linalg.svd(gen, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros((gen.shape[0], 0))
    r = int(np.sum(s > rtol * s[0]))
    return U[:, :r]


def subspace_generators(spec: GroupSpec, R: RangeSet, kind) -> np.ndarray:
    """Unnormalized generating columns of the subspace on ``R``."""
    kind = SubspaceKind(kind)
    rots = range_rotations(spec, R)
    cols = []
    if kind.has_translations:
        for i in range(spec.d):
            e = np.zeros(spec.d)
            e[i] = 1.0
            cols.append(np.concatenate([A.T @ e for A in rots]))
    if kind.pattern is not None:
        diffs = [spec.point(h) - spec.base_point for h in R]
        for S in skew_basis(spec.d, spec.d1, spec.d2, kind.pattern):
            cols.append(np.concatenate([A.T @ (S @ x) for A, x in zip(rots, diffs)]))
    if not cols:
        return np.zeros((spec.d * len(R), 0))
    return np.array(cols).T


def build_subspace(spec: GroupSpec, R: RangeSet, kind) -> SubspaceBasis:
    """Orthonormal basis of ``U_kind(R)`` (SVD, cutoff ``1e-10 sigma_max``)."""
    if len(R) == 0:
        raise ValueError("range must not be empty")
    kind = SubspaceKind(kind)
    cols = _orthonormalize(subspace_generators(spec, R, kind))
    cols.setflags(write=False)
    return SubspaceBasis(R, kind, cols)


def dimension_formulas(spec: GroupSpec) -> dict:
    """Closed-form subspace dimensions, valid for ranges with Property 1."""
    d, d1, d2 = spec.d, spec.d1, spec.d2
    daff = spec.affine_dimension
    d3, d4 = d - daff, daff - d2
    trans = d
    rot = daff * (2 * d - daff - 1) // 2
    rot0 = d3 * daff + d4 * (daff + d2 - 1) // 2
    rot00 = d4 * (d3 + d1 - 1) // 2
    return {SubspaceKind.Trans: trans, SubspaceKind.Rot: rot, SubspaceKind.Rot0: rot0,
            SubspaceKind.Rot00: rot00, SubspaceKind.Iso: trans + rot,
            SubspaceKind.Iso0: trans + rot0, SubspaceKind.Iso00: trans + rot00}


def kernel_formula(spec: GroupSpec, R: RangeSet, kind=None):
    """Predicted kernel dimension, or ``None`` when ``rot(G)`` is infinite or ``R`` lacks Property 2.

    Every kind except ``GradPlain`` has kernel ``U_iso00``, of dimension
    ``d + d4 (d3 + d1 - 1) / 2``; ``GradPlain`` has kernel ``U_trans``.
    """
    kind = SeminormKind.PatchIso if kind is None else SeminormKind(kind)
    if not spec.rotation_group_finite or not has_property_2(spec, R):
        return None
    target = SubspaceKind.Trans if kind is SeminormKind.GradPlain else SubspaceKind.Iso00
    return dimension_formulas(spec)[target]


def _local_vectors(u: PeriodicDisplacement, R: RangeSet, kind: SeminormKind) -> np.ndarray:
    arr = patches(u, R) if kind.is_patch else discrete_derivative_all(u, R)
    return arr.reshape(arr.shape[0], -1)


def local_distances(u: PeriodicDisplacement, R: RangeSet, kind, basis: SubspaceBasis | None = None) -> np.ndarray:
    """Squared local distance for every site of ``C_N``."""
    kind = SeminormKind(kind)
    V = _local_vectors(u, R, kind)
    if kind.subspace is not None:
        basis = basis or build_subspace(u.spec, R, kind.subspace)
        V = basis.project_out(V)
    return np.sum(np.abs(V) ** 2, axis=1)


def seminorm(u: PeriodicDisplacement, R: RangeSet, kind, basis: SubspaceBasis | None = None) -> float:
    """Root mean square over ``C_N`` of the local distances."""
    return float(np.sqrt(np.mean(local_distances(u, R, kind, basis))))


def local_operator(spec: GroupSpec, R: RangeSet, kind, N: int) -> sp.csr_matrix:
    """Sparse map from a flattened field to the stacked local vectors of all sites."""
    kind = SeminormKind(kind)
    d, m = spec.d, len(R)
    n = spec.coset_count(N)
    P = product_indices(spec, N, R)
    rows, cols, vals = [], [], []
    base_rows = (np.arange(n)[:, None, None] * (m * d) + np.arange(m)[None, :, None] * d
                 + np.arange(d)[None, None, :])
    # patch entries u(g h)_i
    rows.append(base_rows.reshape(-1))
    cols.append((P[:, :, None] * d + np.arange(d)[None, None, :]).reshape(-1))
    vals.append(np.ones(n * m * d))
    if not kind.is_patch:
        rots = range_rotations(spec, R)
        # -(rot(h)^T u(g))_i = -sum_j rot(h)[j, i] u(g)_j
        r = np.broadcast_to(base_rows[:, :, :, None], (n, m, d, d))
        c = np.broadcast_to((np.arange(n)[:, None, None, None] * d + np.arange(d)[None, None, None, :]),
                            (n, m, d, d))
        v = np.broadcast_to(-np.transpose(rots, (0, 2, 1))[None], (n, m, d, d))
        rows.append(r.reshape(-1))
        cols.append(c.reshape(-1))
        vals.append(v.reshape(-1))
    L = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n * m * d, n * d))
    return L.tocsr()


def quadratic_form(spec: GroupSpec, R: RangeSet, kind, N: int) -> sp.csr_matrix:
    """Sparse symmetric ``Q`` with ``u^T Q u = seminorm(u)^2`` for flattened fields."""
    kind = SeminormKind(kind)
    n = spec.coset_count(N)
    D = n * spec.d
    if D > MAX_FORM_SIZE:
        raise SizeGuardError(f"form size {D} exceeds the guard {MAX_FORM_SIZE}")
    L = local_operator(spec, R, kind, N)
    if kind.subspace is None:
        Q = (L.T @ L) / n
    else:
        B = build_subspace(spec, R, kind.subspace).columns
        LB = (L.T @ sp.kron(sp.identity(n), sp.csr_matrix(B), format="csr")).tocsr()
        Q = (L.T @ L - LB @ LB.T) / n
    Q = ((Q + Q.T) * 0.5).tocsr()
    Q.eliminate_zeros()
    return Q


def _dense(Q) -> np.ndarray:
    return Q.toarray() if sp.issparse(Q) else np.asarray(Q)


def kernel_from_form(Q, rtol: float = KERNEL_RTOL):
    """Eigen-decomposition split: ``(eigenvalues, kernel vectors, range vectors)``."""
    w, V = np.linalg.eigh(_dense(Q))
    scale = max(abs(w).max(), np.finfo(float).tiny) if w.size else 1.0
    mask = w < rtol * scale
    return w, V[:, mask], V[:, ~mask]


def kernel(spec: GroupSpec, R: RangeSet, kind, N: int, rtol: float = KERNEL_RTOL):
    """Null space of the quadratic form as ``(dimension, [PeriodicDisplacement, ...])``."""
    Q = quadratic_form(spec, R, kind, N)
    _, K, _ = kernel_from_form(Q, rtol)
    fields = [PeriodicDisplacement.from_flat(spec, N, K[:, j]) for j in range(K.shape[1])]
    return K.shape[1], fields


# -- global subspaces on G --------------------------------------------------

def _global_parametrization(spec: GroupSpec, kind: SubspaceKind, elements):
    """Matrix ``F`` with ``F p`` = stacked values ``u_p(g)`` over ``elements``."""
    blocks = []
    pats = skew_basis(spec.d, spec.d1, spec.d2, kind.pattern) if kind.pattern is not None else []
    for g in elements:
        A = spec.rotation_of(g)
        x = spec.point(g) - spec.base_point
        cols = []
        if kind.has_translations:
            cols.append(A.T)
        if pats:
            cols.append(np.stack([A.T @ (S @ x) for S in pats], axis=1))
        blocks.append(np.hstack(cols) if cols else np.zeros((spec.d, 0)))
    return np.vstack(blocks)


def _nullity(M: np.ndarray, rtol: float) -> int:
    if M.shape[1] == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    top = s[0] if s.size else 0.0
    if top == 0:
        return M.shape[1]
    return M.shape[1] - int(np.sum(s > rtol * max(top, 1.0)))


def global_subspace_dimension(spec: GroupSpec, kind, n_sample: int = 200, rtol: float = KERNEL_RTOL) -> int:
    """``dim U_kind`` on ``G``, from a finite sample of group elements."""
    kind = SubspaceKind(kind)
    F = _global_parametrization(spec, kind, spec.sample_elements(n_sample))
    return F.shape[1] - _nullity(F, rtol)


def periodic_intersection_dimension(spec: GroupSpec, kind, N: int, n_sample: int = 200,
                                    rtol: float = KERNEL_RTOL) -> int:
    """``dim(U_kind cap {T^N-periodic fields})`` on ``G``, from a finite sample.

    Computed as nullity of the periodicity defects ``u(g t_i^K) - u(g)``
    minus nullity of the parametrization itself.
    """
    kind = SubspaceKind(kind)
    K = spec.period_factor(N)
    elements = spec.sample_elements(n_sample)
    F = _global_parametrization(spec, kind, elements)
    defects = []
    for i in range(spec.d2):
        step = [0] * spec.d2
        step[i] = K
        shifted = [spec.multiply(g, type(g)(0, step)) for g in elements]
        defects.append(_global_parametrization(spec, kind, shifted) - F)
    if not defects:
        return F.shape[1] - _nullity(F, rtol)
    Pm = np.vstack(defects)
    return _nullity(Pm, rtol) - _nullity(F, rtol)
