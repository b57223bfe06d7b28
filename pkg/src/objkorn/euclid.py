"""Euclidean isometries and small linear-algebra helpers.

An isometry ``(A|b)`` acts on ``R^d`` by ``x -> A x + b``; composition follows
``(A1|b1)(A2|b2) = (A1 A2 | b1 + A1 b2)``.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import numpy as np
import scipy.linalg

ORTHO_TOL = 1e-10
MATRIX_TOL = 1e-10


class IsometryError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Isometry:
    """A Euclidean isometry with orthogonal ``rotation`` and ``translation``."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        A = np.array(self.rotation, dtype=float)
        b = np.array(self.translation, dtype=float).reshape(-1)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise IsometryError(f"rotation must be square, got shape {A.shape}")
        if A.shape[0] != b.shape[0]:
            raise IsometryError(
                f"rotation is {A.shape[0]}x{A.shape[0]} but translation has length {b.shape[0]}"
            )
        err = np.linalg.norm(A.T @ A - np.eye(A.shape[0]))
        if err > ORTHO_TOL:
            raise IsometryError(f"rotation is not orthogonal (|A^T A - I| = {err:.3e})")
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "rotation", A)
        object.__setattr__(self, "translation", b)

    @classmethod
    def identity(cls, d: int) -> "Isometry":
        return cls(np.eye(d), np.zeros(d))

    @property
    def d(self) -> int:
        return self.translation.shape[0]

    def inverse(self) -> "Isometry":
        At = self.rotation.T
        return Isometry(At, -At @ self.translation)

    def __matmul__(self, other: "Isometry") -> "Isometry":
        return compose(self, other)

    def __pow__(self, n: int) -> "Isometry":
        return power(self, n)

    def __call__(self, x) -> np.ndarray:
        return act(self, x)

    def act(self, x) -> np.ndarray:
        return act(self, x)

    def is_close(self, other: "Isometry", tol: float = MATRIX_TOL) -> bool:
        return (
            self.d == other.d
            and np.linalg.norm(self.rotation - other.rotation) <= tol
            and np.linalg.norm(self.translation - other.translation) <= tol
        )

    def is_block_canonical(self, d1: int, tol: float = MATRIX_TOL) -> bool:
        """True if rotation is O(d1)+O(d2) block diagonal and translation lies in {0}xR^d2."""
        A, b = self.rotation, self.translation
        return (
            np.linalg.norm(A[:d1, d1:]) <= tol
            and np.linalg.norm(A[d1:, :d1]) <= tol
            and np.linalg.norm(b[:d1]) <= tol
        )

    def __repr__(self):
        return f"Isometry(rotation={self.rotation.tolist()}, translation={self.translation.tolist()})"


def compose(g: Isometry, h: Isometry) -> Isometry:
    if g.d != h.d:
        raise IsometryError(f"dimension mismatch: {g.d} vs {h.d}")
    return Isometry(g.rotation @ h.rotation, g.translation + g.rotation @ h.translation)


def act(g: Isometry, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != g.d:
        raise IsometryError(f"point has dimension {x.shape[-1]}, isometry acts on R^{g.d}")
    return x @ g.rotation.T + g.translation


def power(g: Isometry, n: int) -> Isometry:
    """``g**n`` for any integer ``n`` by repeated squaring."""
    n = int(n)
    if n < 0:
        return power(g.inverse(), -n)
    result = Isometry.identity(g.d)
    base = g
    while n:
        if n & 1:
            result = compose(result, base)
        base = compose(base, base)
        n >>= 1
    return result


class SkewBlockPattern(enum.Enum):
    """Which blocks of ``S = [[S1, S2], [-S2^T, S3]]`` may be nonzero."""

    Full = "Full"
    ZeroS3 = "ZeroS3"
    S1Only = "S1Only"


def skew_basis(d: int, d1: int, d2: int, pattern: SkewBlockPattern) -> list[np.ndarray]:
    """Frobenius-orthonormal basis of a block pattern of skew matrices.

    Basis matrices ``(E_ij - E_ji)/sqrt(2)`` come in lexicographic ``(i, j)``
    order, ``i < j``.  Indices ``< d1`` belong to the ``O(d1)`` block.
    """
    if d1 < 0 or d2 < 0 or d1 + d2 != d:
        raise ValueError(f"invalid split d={d}, d1={d1}, d2={d2}")
    pattern = SkewBlockPattern(pattern)
    out = []
    for i, j in itertools.combinations(range(d), 2):
        if pattern is SkewBlockPattern.ZeroS3 and i >= d1:
            continue
        if pattern is SkewBlockPattern.S1Only and j >= d1:
            continue
        S = np.zeros((d, d))
        S[i, j] = -1.0 / np.sqrt(2.0)
        S[j, i] = 1.0 / np.sqrt(2.0)
        out.append(S)
    return out


def rotation_2d(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class Quasidiagonalization:
    Q: np.ndarray
    q: int
    signs: list[np.ndarray]
    angles: list[np.ndarray]

    def assembled(self, index: int) -> np.ndarray:
        """Reassemble ``Lambda(A) + R(theta_1) + ... + R(theta_q)`` for family member ``index``."""
        blocks = [np.diag(self.signs[index])] if self.signs[index].size else []
        blocks += [rotation_2d(th) for th in self.angles[index]]
        if not blocks:
            return np.zeros((0, 0))
        return scipy.linalg.block_diag(*blocks)


def simultaneous_quasidiagonalize(family, seed: int = 0, tol: float = 1e-8) -> Quasidiagonalization:
    """Common orthogonal reduction of commuting orthogonal matrices.

    A random real combination ``M`` of the family is a normal matrix whose
    real Schur form is quasi-diagonal; generically its invariant blocks are
    joint invariant blocks of every member.  One-dimensional blocks are
    ordered first, two-dimensional rotation blocks after.

    Raises ``ValueError`` for non-orthogonal or non-commuting input.
    """
    mats = [np.asarray(A, dtype=float) for A in family]
    if not mats:
        raise ValueError("empty family")
    n = mats[0].shape[0]
    for A in mats:
        if A.shape != (n, n):
            raise ValueError("family members must share one square shape")
        if np.linalg.norm(A.T @ A - np.eye(n)) > tol:
            raise ValueError("family contains a non-orthogonal matrix")
    for A, B in itertools.combinations(mats, 2):
        if np.linalg.norm(A @ B - B @ A) > tol:
            raise ValueError("family is not commuting")

    rng = np.random.default_rng(seed)
    for _attempt in range(20):
        coeffs = rng.standard_normal(len(mats))
        M = sum(c * A for c, A in zip(coeffs, mats))
        T, Z = scipy.linalg.schur(M, output="real")
        # split into 1x1 and 2x2 diagonal blocks
        blocks, i = [], 0
        while i < n:
            if i + 1 < n and abs(T[i + 1, i]) > tol:
                blocks.append((i, 2))
                i += 2
            else:
                blocks.append((i, 1))
                i += 1
        order = [b for b in blocks if b[1] == 1] + [b for b in blocks if b[1] == 2]
        cols = np.concatenate([np.arange(s, s + w) for s, w in order]) if order else np.arange(0)
        Q = Z[:, cols]
        q = sum(1 for b in order if b[1] == 2)
        p = n - 2 * q
        signs, angles, ok = [], [], True
        for A in mats:
            B = Q.T @ A @ Q
            lam = np.diag(B)[:p].copy()
            th = []
            for j in range(q):
                s = p + 2 * j
                blk = B[s:s + 2, s:s + 2]
                th.append(np.arctan2(blk[1, 0], blk[0, 0]) % (2 * np.pi))
            signs.append(np.sign(lam) + (lam == 0))
            angles.append(np.array(th))
            rebuilt = scipy.linalg.block_diag(
                *([np.diag(signs[-1])] if p else []), *[rotation_2d(t) for t in th]
            ) if n else np.zeros((0, 0))
            if np.linalg.norm(B - rebuilt) > tol:
                ok = False
                break
        if ok:
            return Quasidiagonalization(Q, q, signs, angles)
    raise ValueError("quasidiagonalization failed to separate joint invariant subspaces")


def turan_lower_bound_check(b, z, m: int) -> bool:
    """Check the generalized power sum lower bound ``(1/n)(delta/2)^(n-1)``.

    Evaluates ``max_{nu=m+1..m+n} |sum b_j z_j^nu| / sum |b_j||z_j|^nu``.
    """
    b = np.asarray(b, dtype=complex).reshape(-1)
    z = np.asarray(z, dtype=complex).reshape(-1)
    n = z.size
    if b.size != n:
        raise ValueError("b and z must have equal length")
    if m < 0:
        raise ValueError("m must be nonnegative")
    if np.any(z == 0):
        raise ValueError("z entries must be nonzero")
    if n == 1:
        delta = 1.0
    else:
        gaps = np.abs(z[:, None] - z[None, :])[~np.eye(n, dtype=bool)]
        delta = gaps.min() / np.abs(z).max()
        if delta <= 0:
            raise ValueError("z values must be pairwise distinct")
    if not np.any(b):
        raise ValueError("b must not vanish identically")
    nus = np.arange(m + 1, m + n + 1)
    powers = z[None, :] ** nus[:, None]
    num = np.abs(powers @ b)
    den = (np.abs(b)[None, :] * np.abs(z)[None, :] ** nus[:, None]).sum(axis=1)
    best = np.max(num / den)
    bound = (1.0 / n) * (delta / 2.0) ** (n - 1)
    return bool(best >= bound * (1 - 1e-12))


def distance_to_nearest_integer(k) -> float:
    k = float(k)
    return abs(k - round(k))


def rank_one_skew_ratio(x, y, A) -> float:
    """``|x y^T + A| / (|x y^T| + |A|)`` in Frobenius norm, ``A`` complex skew."""
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    A = np.asarray(A, dtype=complex)
    if np.linalg.norm(A + A.T) > 1e-12 * max(1.0, np.linalg.norm(A)):
        raise ValueError("A must be skew symmetric")
    P = np.outer(x, y)
    den = np.linalg.norm(P) + np.linalg.norm(A)
    if den == 0:
        return 1.0
    return float(np.linalg.norm(P + A) / den)
