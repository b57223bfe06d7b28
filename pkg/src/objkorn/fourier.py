"""Characters of the translation lattice and the periodic Fourier transform.

Signals live on ``T^m0 ~ Z^d2`` and are stored as arrays whose first ``d2``
axes run over exponents ``0..K-1`` (one period); any trailing axes are the
vector or matrix value.  Conventions::

    f_hat(chi_k) = (1/K^d2) sum_a exp(+2 pi i k.a) f(a)
    f(a)         = sum_k exp(-2 pi i k.a) f_hat(chi_k)
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .fields import PeriodicDisplacement, _emit
from .group import GroupSpec


@dataclass(frozen=True, order=True)
class Character:
    """``chi_k(t^a) = exp(2 pi i k.a)`` with exact rational ``k`` in ``[0, 1)^d2``."""

    k: tuple

    def __post_init__(self):
        ks = tuple(Fraction(x) % 1 for x in self.k)
        object.__setattr__(self, "k", ks)

    @property
    def rank(self) -> int:
        return len(self.k)

    @property
    def denominator(self) -> int:
        return math.lcm(*(x.denominator for x in self.k)) if self.k else 1

    def is_periodic(self, K: int) -> bool:
        """Trivial on ``T^N`` with ``K = N/m0``."""
        return all((x * K).denominator == 1 for x in self.k)

    def __call__(self, a) -> complex:
        phase = sum(float(x) * int(ai) for x, ai in zip(self.k, a))
        return complex(np.exp(2j * np.pi * phase))

    def phases(self, K: int) -> np.ndarray:
        """``chi(t^a)`` on the grid ``{0..K-1}^d2``."""
        if self.rank == 0:
            return np.ones(())
        grids = np.meshgrid(*[np.arange(K, dtype=np.int64)] * self.rank, indexing="ij")
        if self.is_periodic(K):
            # k.a mod 1 = (sum p_i (K/q_i) a_i mod K) / K, exact in integers
            num = sum(x.numerator * (K // x.denominator) * g for x, g in zip(self.k, grids))
            return np.exp(2j * np.pi * (np.mod(num, K) / K))
        phase = sum(float(x) * g for x, g in zip(self.k, grids))
        return np.exp(2j * np.pi * phase)

    def __str__(self):
        return "(" + ", ".join(str(x) for x in self.k) + ")"


def periodic_characters_rank(K: int, d2: int) -> list[Character]:
    if K < 1:
        raise ValueError("K must be positive")
    return [Character(tuple(Fraction(j, K) for j in js))
            for js in itertools.product(range(K), repeat=d2)]


def periodic_characters(spec: GroupSpec, N: int) -> list[Character]:
    """All characters trivial on ``T^N``: ``k_i`` in ``{0, 1/K, ..., (K-1)/K}``, ``K = N/m0``."""
    return periodic_characters_rank(spec.period_factor(N), spec.d2)


def _period_of(f: np.ndarray, d2: int) -> int:
    if d2 == 0:
        return 1
    K = f.shape[0]
    if any(s != K for s in f.shape[:d2]):
        raise ValueError(f"lattice axes must share one length, got {f.shape[:d2]}")
    return K


def lift_signal(f: np.ndarray, d2: int, K2: int) -> np.ndarray:
    K = _period_of(f, d2)
    if K2 % K:
        raise ValueError(f"cannot lift period {K} to {K2}")
    return np.tile(f, (K2 // K,) * d2 + (1,) * (f.ndim - d2))


def transform(f, chi: Character) -> np.ndarray:
    """Fourier coefficient ``f_hat(chi)`` by direct summation.

    ``f`` is lifted to a common period with ``chi`` when needed.
    """
    f = np.asarray(f)
    d2 = chi.rank
    K = _period_of(f, d2)
    if not chi.is_periodic(K):
        K2 = math.lcm(K, chi.denominator)
        f, K = lift_signal(f, d2, K2), K2
    ph = chi.phases(K)
    total = np.tensordot(ph, f, axes=(list(range(d2)), list(range(d2)))) if d2 else f * 1.0
    return total / (K ** d2)


def spectrum(f, d2: int) -> tuple[list[Character], np.ndarray]:
    """All coefficients over the characters of ``f``'s period, C-ordered.

    The positive-exponent, ``1/K^d2``-normalized sum is ``numpy.fft.ifftn``.
    """
    f = np.asarray(f)
    K = _period_of(f, d2)
    chars = periodic_characters_rank(K, d2)
    if d2 == 0:
        return chars, f[None] * 1.0
    coeffs = np.fft.ifftn(f, axes=tuple(range(d2)))
    return chars, coeffs.reshape((K ** d2,) + f.shape[d2:])


def inverse_transform(coeffs, K: int, d2: int) -> np.ndarray:
    """Rebuild ``f`` on ``{0..K-1}^d2`` from the C-ordered coefficient array."""
    coeffs = np.asarray(coeffs)
    chars = periodic_characters_rank(K, d2)
    if coeffs.shape[0] != len(chars):
        raise ValueError(f"expected {len(chars)} coefficients, got {coeffs.shape[0]}")
    out = 0
    for c, fc in zip(chars, coeffs):
        ph = np.conj(c.phases(K))
        out = out + np.multiply.outer(ph, fc)
    return np.asarray(out)


def _lattice_inner(f, g, d2):
    K = _period_of(f, d2)
    return np.vdot(f.reshape(-1), g.reshape(-1)) / (K ** d2)


def _common(f, g, d2):
    f, g = np.asarray(f), np.asarray(g)
    Kf, Kg = _period_of(f, d2), _period_of(g, d2)
    K = math.lcm(Kf, Kg)
    return lift_signal(f, d2, K), lift_signal(g, d2, K)


def plancherel_residual(f, g, d2: int = 1) -> float:
    """``|<f, g> - sum_chi <f_hat(chi), g_hat(chi)>|`` on a common period."""
    f, g = _common(f, g, d2)
    _, F = spectrum(f, d2)
    _, G = spectrum(g, d2)
    lhs = _lattice_inner(f, g, d2)
    rhs = np.vdot(F.reshape(-1), G.reshape(-1))
    return float(abs(lhs - rhs))


def translation_property_residual(f, b, chi: Character) -> float:
    """``|(tau_b f)^(chi) - chi(t^-b) f_hat(chi)|`` with ``tau_b f(a) = f(a + b)``."""
    f = np.asarray(f)
    d2 = chi.rank
    b = tuple(int(x) for x in b)
    shifted = np.roll(f, shift=tuple(-x for x in b), axis=tuple(range(d2))) if d2 else f
    lhs = transform(shifted, chi)
    rhs = chi(tuple(-x for x in b)) * transform(f, chi)
    return float(np.linalg.norm(np.asarray(lhs - rhs).reshape(-1)))


def lattice_restriction(u: PeriodicDisplacement, coset: int = 0) -> np.ndarray:
    """``a -> u(c t^a)`` on one period, shape ``(K,)*d2 + (d,)``."""
    return np.asarray(u.values[coset])


def field_spectrum(u: PeriodicDisplacement):
    """Per-coset spectra, shape ``(n_cosets, K^d2, d)``."""
    chars = periodic_characters(u.spec, u.N)
    out = np.array([spectrum(lattice_restriction(u, c), u.spec.d2)[1] for c in range(u.spec.n_cosets)])
    return chars, out


def field_plancherel_residual(u: PeriodicDisplacement, v: PeriodicDisplacement) -> float:
    """Plancherel on ``G``: ``<u, v> = (1/|C_m0|) sum_c sum_chi <u_c_hat, v_c_hat>``."""
    from .fields import inner_product

    a, b = u._aligned(v)
    _, U = field_spectrum(a)
    _, V = field_spectrum(b)
    rhs = np.vdot(U.reshape(-1), V.reshape(-1)) / a.spec.n_cosets
    return float(abs(inner_product(a, b) - rhs))


def write_spectrum_csv(u: PeriodicDisplacement, path_or_buffer) -> None:
    """Columns ``[coset_index,] k_1..k_d2, re_u_1, im_u_1, ..., re_u_d, im_u_d``."""
    chars, S = field_spectrum(u)
    spec = u.spec
    with_coset = spec.n_cosets > 1
    header = (["coset_index"] if with_coset else []) + [f"k_{j + 1}" for j in range(spec.d2)]
    for i in range(spec.d):
        header += [f"re_u_{i + 1}", f"im_u_{i + 1}"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for c in range(spec.n_cosets):
        for chi, coef in zip(chars, S[c]):
            row = ([c] if with_coset else []) + [format(float(x), ".17g") for x in chi.k]
            for z in coef:
                row += [format(float(z.real), ".17g"), format(float(z.imag), ".17g")]
            w.writerow(row)
    _emit(buf.getvalue(), path_or_buffer)
