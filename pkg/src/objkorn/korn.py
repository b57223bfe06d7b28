"""Equivalence constants between seminorm pairs and period sweeps.

For quadratic forms ``Q_a``, ``Q_b`` on period-``N`` fields the report gives
the extreme generalized Rayleigh quotients ``u^T Q_b u / u^T Q_a u``.  Two
seminorms are equivalent iff their kernels agree and these extremes stay
bounded away from 0 and infinity as ``N`` grows.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np
import scipy.linalg

from .euclid import distance_to_nearest_integer
from .fields import PeriodicDisplacement, random_field
from .fourier import Character, transform
from .group import CanonicalElement, GroupSpec, RangeSet
from .seminorms import (KERNEL_RTOL, SeminormKind, kernel_from_form, quadratic_form, seminorm)

ANGLE_TOL = 1e-6
BOUNDED_EXPONENT = 0.2
GROWING_EXPONENT = 0.5
SAMPLING_THRESHOLD = 2000


class NumericalError(RuntimeError):
    """Eigen-solve and sampling disagree, or a computation failed to converge."""


class UnsupportedStructure(ValueError):
    pass


@dataclass
class EquivalenceReport:
    N: int
    kind_a: str
    kind_b: str
    range_a: tuple
    range_b: tuple
    c_min: float
    c_max: float
    dim_ker_a: int
    dim_ker_b: int
    kernels_equal: bool
    sampled_min: float | None = None
    sampled_max: float | None = None

    def as_row(self) -> list:
        return [self.N, _fmt(self.c_min), _fmt(self.c_max), self.dim_ker_a, self.dim_ker_b,
                str(self.kernels_equal).lower()]


def _fmt(x) -> str:
    if x is None:
        return ""
    if math.isinf(x):
        return "inf"
    return format(float(x), ".17g")


def _contained(A: np.ndarray, B: np.ndarray, tol: float = ANGLE_TOL) -> bool:
    """Column space of ``A`` inside that of ``B`` (both orthonormal)."""
    if A.shape[1] == 0:
        return True
    if B.shape[1] == 0:
        return False
    return float(np.linalg.norm(A - B @ (B.T @ A), 2)) < tol


def kernels_match(Ka: np.ndarray, Kb: np.ndarray, tol: float = ANGLE_TOL) -> bool:
    if Ka.shape[1] != Kb.shape[1]:
        return False
    if Ka.shape[1] == 0:
        return True
    return float(np.max(scipy.linalg.subspace_angles(Ka, Kb))) < tol


def compare_forms(Qa, Qb, rtol: float = KERNEL_RTOL):
    """``(c_min, c_max, dim_ker_a, dim_ker_b, kernels_equal)`` for two dense PSD forms.

    The pencil is reduced to the range of ``Q_a``:
    ``M = L^-1/2 W^T Q_b W L^-1/2`` with ``Q_a W = W L``.  When the kernels
    differ ``c_min`` is 0 by convention and ``c_max`` is infinite exactly when
    ``ker Q_a`` is not contained in ``ker Q_b``.
    """
    wa, Ka, Wa = kernel_from_form(Qa, rtol)
    _, Kb, _ = kernel_from_form(Qb, rtol)
    equal = kernels_match(Ka, Kb)
    lam = wa[wa >= rtol * max(abs(wa).max(), np.finfo(float).tiny)] if wa.size else wa
    Qb_d = Qb.toarray() if hasattr(Qb, "toarray") else np.asarray(Qb)
    if Wa.shape[1]:
        S = Wa / np.sqrt(lam)[None, :]
        M = S.T @ Qb_d @ S
        mu = np.linalg.eigvalsh(0.5 * (M + M.T))
        lo, hi = float(mu[0]), float(mu[-1])
    else:
        lo, hi = 1.0, 1.0
    if equal:
        c_min, c_max = max(lo, 0.0), hi
    else:
        c_min = 0.0
        c_max = math.inf if not _contained(Ka, Kb) else hi
    return c_min, c_max, Ka.shape[1], Kb.shape[1], equal


def compare(spec: GroupSpec, a, b, N: int, samples: int = 0, seed: int = 0) -> EquivalenceReport:
    """Extreme quotients of ``(R_b, kind_b)`` against ``(R_a, kind_a)`` at period ``N``.

    ``a`` and ``b`` are ``(RangeSet, kind)`` pairs.  When ``samples > 0`` (or the
    form size exceeds 2000) random-field quotients are drawn as a cross-check.
    """
    (Ra, ka), (Rb, kb) = a, b
    ka, kb = SeminormKind(ka), SeminormKind(kb)
    Qa = quadratic_form(spec, Ra, ka, N)
    Qb = quadratic_form(spec, Rb, kb, N)
    c_min, c_max, da, db, equal = compare_forms(Qa, Qb)
    report = EquivalenceReport(N, ka.value, kb.value, tuple(Ra.labels), tuple(Rb.labels),
                               c_min, c_max, da, db, equal)
    D = Qa.shape[0]
    if samples or D > SAMPLING_THRESHOLD:
        n = samples or 64
        rng = np.random.default_rng(seed)
        X = rng.uniform(-1.0, 1.0, size=(D, n))
        qa = np.einsum("ij,ij->j", X, Qa @ X)
        qb = np.einsum("ij,ij->j", X, Qb @ X)
        ok = qa > 1e-14 * np.max(np.abs(qa))
        ratios = qb[ok] / qa[ok]
        if ratios.size:
            report.sampled_min, report.sampled_max = float(ratios.min()), float(ratios.max())
            slack = 1e-8 * max(1.0, report.sampled_max)
            if equal and (report.sampled_min < c_min - slack or report.sampled_max > c_max + slack):
                raise NumericalError(
                    f"sampled quotients [{report.sampled_min}, {report.sampled_max}] fall outside "
                    f"the eigen-solve interval [{c_min}, {c_max}] at N={N}")
    return report


@dataclass
class SweepResult:
    reports: list
    exponent_max: float
    exponent_min: float
    exponent: float
    diagnosis: str
    summary: dict = field(default_factory=dict)


def growth_exponent(Ns, values) -> float:
    """Least-squares slope of ``log(values)`` against ``log(N)``."""
    Ns = np.asarray(Ns, dtype=float)
    v = np.asarray(values, dtype=float)
    if np.any(~np.isfinite(v)) or np.any(v <= 0):
        return math.inf
    if len(Ns) < 2:
        return 0.0
    slope, _ = np.polyfit(np.log(Ns), np.log(v), 1)
    return float(slope)


def diagnose(exponent: float) -> str:
    if exponent < BOUNDED_EXPONENT:
        return "BOUNDED"
    if exponent > GROWING_EXPONENT:
        return "GROWING"
    return "INDETERMINATE"


def sweep(spec: GroupSpec, pair, N_list, samples: int = 0, seed: int = 0, workers: int = 1) -> SweepResult:
    """Run ``compare`` over ascending periods and fit growth exponents.

    The diagnosis uses the larger of the slopes of ``c_max`` and ``1/c_min``,
    since equivalence needs both constants bounded.  With ``workers > 1`` the
    periods are evaluated on a thread pool; results do not depend on it.
    """
    N_list = [int(N) for N in N_list]
    if not N_list:
        raise ValueError("empty period list")
    if N_list != sorted(N_list) or len(set(N_list)) != len(N_list):
        raise ValueError("periods must be strictly ascending")
    for N in N_list:
        spec.period_factor(N)
    if workers < 1:
        raise ValueError("workers must be positive")
    a, b = pair

    def run(N):
        return compare(spec, a, b, N, samples=samples, seed=seed)

    if workers == 1:
        reports = [run(N) for N in N_list]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(run, N_list))
    e_max = growth_exponent(N_list, [r.c_max for r in reports])
    inv_min = [1.0 / r.c_min if r.c_min > 0 else math.inf for r in reports]
    e_min = growth_exponent(N_list, inv_min)
    e = max(e_max, e_min)
    diag = diagnose(e)
    summary = {"structure": spec.name, "norm_a": reports[0].kind_a, "norm_b": reports[0].kind_b,
               "range_a": ",".join(reports[0].range_a), "range_b": ",".join(reports[0].range_b),
               "periods": N_list, "exponent": _json_float(e), "exponent_c_max": _json_float(e_max),
               "exponent_inv_c_min": _json_float(e_min), "diagnosis": diag,
               "kernels_equal": all(r.kernels_equal for r in reports)}
    return SweepResult(reports, e_max, e_min, e, diag, summary)


def _json_float(x):
    return None if not math.isfinite(x) else round(float(x), 12)


SWEEP_HEADER = ["N", "c_min", "c_max", "dim_ker_a", "dim_ker_b", "kernels_equal"]


def sweep_csv(result: SweepResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for r in result.reports:
        w.writerow(r.as_row())
    buf.write("# " + json.dumps(result.summary, sort_keys=True) + "\n")
    return buf.getvalue()


def sweep_json(result: SweepResult) -> str:
    rows = []
    for r in result.reports:
        d = asdict(r)
        for key in ("c_min", "c_max", "sampled_min", "sampled_max"):
            if d[key] is not None and not math.isfinite(d[key]):
                d[key] = None
        d["range_a"], d["range_b"] = ",".join(r.range_a), ",".join(r.range_b)
        rows.append(d)
    return json.dumps({"reports": rows, "summary": result.summary}, indent=2, sort_keys=True) + "\n"


# -- explicit modes -----------------------------------------------------------

def buckling_mode(spec: GroupSpec, N: int) -> PeriodicDisplacement:
    """Long-wave bending along ``e_1``, normal to the lattice directions.

    In space the site ``p = g x0`` at height ``s`` along the first lattice
    vector (length ``L``) moves by ``w(s) e_1 - w'(s) p_1 tau``, with
    ``w(s) = sin(2 pi s / (K L))``, ``K = N / m0`` and ``tau`` the unit lattice
    direction: a deflection plus the matching tilt of the cross-section.
    The stored field is the pull-back ``rot(g)^T`` of that displacement.
    """
    if spec.d2 < 1 or spec.d1 < 1:
        raise UnsupportedStructure("buckling mode needs d1 >= 1 and d2 >= 1")
    K = spec.period_factor(N)
    tau = np.zeros(spec.d)
    tau[spec.d1:] = spec.lattice[:, 0]
    L = float(np.linalg.norm(tau))
    tau /= L
    e1 = np.eye(spec.d)[0]
    omega = 2 * np.pi / (K * L)
    cosets, exps = spec.site_elements(N)
    vals = np.empty((len(cosets), spec.d))
    for i, (c, a) in enumerate(zip(cosets, exps)):
        g = spec.reconstruct(CanonicalElement(int(c), a))
        p = g.act(spec.base_point)
        s = float((p - spec.base_point) @ tau)
        disp = np.sin(omega * s) * e1 - omega * np.cos(omega * s) * p[0] * tau
        vals[i] = g.rotation.T @ disp
    return PeriodicDisplacement(spec, N, vals)


def rayleigh_quotient(u: PeriodicDisplacement, a, b) -> float:
    """``seminorm_b(u)^2 / seminorm_a(u)^2``."""
    (Ra, ka), (Rb, kb) = a, b
    na = seminorm(u, Ra, ka)
    nb = seminorm(u, Rb, kb)
    if na == 0:
        return math.inf if nb > 0 else math.nan
    return (nb / na) ** 2


# -- Fourier characterizations for the two planar chains ----------------------

FOURIER_STRUCTURES = ("chain", "zigzag")


def _sequence(spec: GroupSpec, u: PeriodicDisplacement) -> np.ndarray:
    """Values ``u(t^n)`` for ``n = 0..N-1`` along the cyclic group ``<t>``."""
    if spec.name == "chain":
        if spec.n_cosets != 1 or spec.d != 2 or spec.d2 != 1:
            raise UnsupportedStructure("spec named 'chain' does not have the chain layout")
        return np.asarray(u.values[0])
    if spec.name == "zigzag":
        if spec.n_cosets != 2 or spec.d != 2 or spec.d2 != 1:
            raise UnsupportedStructure("spec named 'zigzag' does not have the zigzag layout")
        # t^(2j) = (t^2)^j in coset 0, t^(2j+1) = t (t^2)^j in coset 1
        K = u.k
        seq = np.empty((2 * K, 2), dtype=u.values.dtype)
        seq[0::2] = u.values[0]
        seq[1::2] = u.values[1]
        return seq
    raise UnsupportedStructure(f"no closed-form Fourier weights for structure {spec.name!r}")


def _dist(x) -> float:
    return distance_to_nearest_integer(x)


def fourier_weighted_sum(spec: GroupSpec, u: PeriodicDisplacement, variant: str) -> float:
    """Weighted spectral sum for the chain or zigzag structure.

    ``variant="grad"`` pairs with the plain discrete gradient norm and
    ``variant="seminorm"`` with the patch seminorm; ``|x|_1`` is the distance
    to the nearest integer.
    """
    if variant not in ("grad", "seminorm"):
        raise ValueError("variant must be 'grad' or 'seminorm'")
    seq = _sequence(spec, u)
    L = seq.shape[0]
    total = 0.0
    for j in range(L):
        k = j / L
        c = transform(seq, Character((Fraction(j, L),)))
        c1, c2 = abs(c[0]) ** 2, abs(c[1]) ** 2
        if spec.name == "chain":
            w = _dist(k)
            if variant == "grad":
                total += w ** 2 * (c1 + c2)
            else:
                total += w ** 4 * c1 + w ** 2 * c2
        else:
            w1, w2 = _dist(k - 0.5), _dist(k)
            if variant == "grad":
                total += w1 ** 2 * c1 + w2 ** 2 * c2
            else:
                mix = 2j * np.pi * (k - 0.5) * c[0] - c[1]
                total += w1 ** 4 * c1 + w2 ** 2 * abs(mix) ** 2
    return float(total)


@dataclass
class FourierCheck:
    structure: str
    N: int
    trials: int
    assertions: dict

    def as_dict(self) -> dict:
        return {"structure": self.structure, "N": self.N, "trials": self.trials,
                "assertions": self.assertions}


def fourier_check(spec: GroupSpec, R: RangeSet, N: int, trials: int, seed: int = 0) -> FourierCheck:
    """Ratio extremes of spectral sums against squared seminorms over random fields.

    The ``grad`` assertion compares with the plain gradient norm, the
    ``seminorm`` assertion with the patch seminorm, both on ``R``.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    pairs = {"grad": SeminormKind.GradPlain, "seminorm": SeminormKind.PatchIso}
    ratios = {name: [] for name in pairs}
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        u = random_field(spec, N, rng)
        for name, kind in pairs.items():
            s2 = seminorm(u, R, kind) ** 2
            ratios[name].append(fourier_weighted_sum(spec, u, name) / s2)
    out = {}
    for name, vals in ratios.items():
        lo, hi = float(min(vals)), float(max(vals))
        out[name] = {"min_ratio": lo, "max_ratio": hi, "spread": hi / lo}
    return FourierCheck(spec.name, int(N), int(trials), out)
