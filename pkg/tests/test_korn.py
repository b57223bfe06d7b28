import json
import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from objkorn import korn
from objkorn.fields import PeriodicDisplacement, random_field
from objkorn.korn import (NumericalError, UnsupportedStructure, buckling_mode, compare, compare_forms, diagnose,
                          fourier_check, fourier_weighted_sum, growth_exponent, rayleigh_quotient, sweep,
                          sweep_csv, sweep_json)

from oracles import brute_seminorm


def brute_form(spec, R, kind, N):
    """Gram matrix of the squared seminorm by polarization of the least-squares oracle."""
    n = spec.coset_count(N) * spec.d
    shape = (spec.n_cosets,) + (N // spec.m0,) * spec.d2 + (spec.d,)
    E = np.eye(n)
    q = lambda x: brute_seminorm(PeriodicDisplacement(spec, N, x.reshape(shape)), R, kind) ** 2
    diag = np.array([q(E[i]) for i in range(n)])
    Q = np.diag(diag)
    for i in range(n):
        for j in range(i + 1, n):
            Q[i, j] = Q[j, i] = 0.5 * (q(E[i] + E[j]) - diag[i] - diag[j])
    return Q


def pencil_oracle(Qa, Qb, tol=1e-9):
    """Extreme eigenvalues of ``Qb`` against ``Qa`` on the range of ``Qa``."""
    w, V = scipy.linalg.eigh(Qa)
    keep = w > tol * w.max()
    W = V[:, keep]
    mu = scipy.linalg.eigh(W.T @ Qb @ W, W.T @ Qa @ W, eigvals_only=True)
    return mu.min(), mu.max()


@pytest.mark.parametrize("name, ka, kb", [
    ("chain", "PatchIso", "PatchIso00"),
    ("chain", "PatchIso", "GradRot"),
    ("zigzag", "PatchIso", "PatchIso00"),
    ("zigzag", "GradRot", "PatchIso0"),
])
def test_compare_matches_oracle_pencil(entries, name, ka, kb):
    e = entries[name]
    R = e.reference_ranges["P2"]
    N = 4
    lo, hi = pencil_oracle(brute_form(e.spec, R, ka, N), brute_form(e.spec, R, kb, N))
    rep = compare(e.spec, (R, ka), (R, kb), N)
    assert rep.kernels_equal
    assert rep.c_min == pytest.approx(lo, rel=1e-8)
    assert rep.c_max == pytest.approx(hi, rel=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 7))
def test_compare_forms_definite_case(seed, n):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, n))
    B = rng.normal(size=(n, n))
    Qa, Qb = A @ A.T + 0.1 * np.eye(n), B @ B.T + 0.1 * np.eye(n)
    c_min, c_max, da, db, equal = compare_forms(Qa, Qb)
    mu = scipy.linalg.eigh(Qb, Qa, eigvals_only=True)
    assert equal and da == db == 0
    assert c_min == pytest.approx(mu.min(), rel=1e-9)
    assert c_max == pytest.approx(mu.max(), rel=1e-9)


def test_compare_forms_unequal_kernels():
    # ker Qa = span(e2) is not inside ker Qb = {0}
    c_min, c_max, da, db, equal = compare_forms(np.diag([1.0, 0.0]), np.eye(2))
    assert (c_min, c_max, da, db, equal) == (0.0, math.inf, 1, 0, False)
    # ker Qa = {0} inside ker Qb = span(e2): c_max stays finite
    c_min, c_max, da, db, equal = compare_forms(np.eye(2), np.diag([3.0, 0.0]))
    assert c_min == 0.0 and c_max == pytest.approx(3.0) and not equal


def test_chain_short_range_kernels_differ(chain):
    rep = compare(chain.spec, (chain.reference_ranges["P1"], "PatchIso"),
                  (chain.reference_ranges["P2"], "PatchIso"), 4)
    assert (rep.dim_ker_a, rep.dim_ker_b, rep.kernels_equal) == (5, 2, False)
    assert rep.c_min == 0.0 and rep.c_max == math.inf


def test_sampling_cross_check_lies_inside_interval(zigzag):
    R = zigzag.reference_ranges["P2"]
    rep = compare(zigzag.spec, (R, "PatchIso"), (R, "PatchIso00"), 8, samples=50, seed=1)
    assert rep.c_min - 1e-9 <= rep.sampled_min <= rep.sampled_max <= rep.c_max + 1e-9


def test_sampling_disagreement_raises(monkeypatch, chain):
    monkeypatch.setattr(korn, "compare_forms", lambda Qa, Qb: (5.0, 6.0, 2, 2, True))
    R = chain.reference_ranges["P2"]
    with pytest.raises(NumericalError):
        compare(chain.spec, (R, "PatchIso"), (R, "PatchIso00"), 4, samples=10)


@pytest.mark.parametrize("p", [0.0, 1.0, 2.0, -0.5])
def test_growth_exponent_of_power_law(p):
    Ns = [4, 8, 16, 32]
    assert growth_exponent(Ns, [3.0 * N ** p for N in Ns]) == pytest.approx(p, abs=1e-12)


@pytest.mark.parametrize("values", [[1.0, math.inf], [1.0, 0.0], [1.0, -2.0]])
def test_growth_exponent_degenerate(values):
    assert growth_exponent([4, 8], values) == math.inf


@pytest.mark.parametrize("e, label", [(0.0, "BOUNDED"), (0.19, "BOUNDED"), (0.2, "INDETERMINATE"),
                                      (0.5, "INDETERMINATE"), (0.51, "GROWING"), (math.inf, "GROWING")])
def test_diagnose(e, label):
    assert diagnose(e) == label


@pytest.mark.parametrize("periods", [[], [8, 4], [4, 4], [4, 5]])
def test_sweep_rejects_bad_periods(zigzag, periods):
    R = zigzag.reference_ranges["P2"]
    with pytest.raises(ValueError):
        sweep(zigzag.spec, ((R, "PatchIso"), (R, "PatchIso0")), periods)


def test_parallel_sweep_is_identical(zigzag):
    R = zigzag.reference_ranges["P2"]
    pair = ((R, "PatchIso"), (R, "PatchIso00"))
    serial = sweep(zigzag.spec, pair, [4, 8, 16, 32], samples=5, seed=2)
    parallel = sweep(zigzag.spec, pair, [4, 8, 16, 32], samples=5, seed=2, workers=3)
    assert sweep_csv(serial) == sweep_csv(parallel)
    with pytest.raises(ValueError):
        sweep(zigzag.spec, pair, [4], workers=0)


@pytest.mark.parametrize("name", ["chain", "zigzag", "helix"])
def test_korn_pair_bounded(entries, name):
    e = entries[name]
    R = e.reference_ranges["P2"]
    res = sweep(e.spec, ((R, "PatchIso"), (R, "PatchIso0")), [4, 8, 16])
    assert res.diagnosis == "BOUNDED"
    assert all(r.kernels_equal for r in res.reports)


@pytest.mark.parametrize("name", ["chain", "zigzag"])
def test_buckling_pair_grows(entries, name):
    e = entries[name]
    R = e.reference_ranges["P2"]
    res = sweep(e.spec, ((R, "PatchIso"), (R, "PatchIso00")), [8, 16, 32])
    assert res.diagnosis == "GROWING"
    assert 1.6 <= res.exponent_max <= 2.4


def test_flat_sheet_korn_constant_levels_off(entries):
    e = entries["flat-sheet"]
    R = e.reference_ranges["P2"]
    c = [compare(e.spec, (R, "PatchIso"), (R, "PatchIso0"), N).c_max for N in (8, 16)]
    # in-plane rotations are not locally constrained; the constant saturates near 4
    assert c[1] < 4.0 and c[1] / c[0] < 1.5


def test_sweep_csv_layout(chain):
    R = chain.reference_ranges
    res = sweep(chain.spec, ((R["P1"], "PatchIso"), (R["P2"], "PatchIso")), [2, 4])
    lines = sweep_csv(res).splitlines()
    assert lines[0] == "N,c_min,c_max,dim_ker_a,dim_ker_b,kernels_equal"
    assert lines[1] == "2,0,inf,3,2,false"
    assert lines[2] == "4,0,inf,5,2,false"
    summary = json.loads(lines[3][2:])
    assert summary["diagnosis"] == "GROWING" and summary["exponent"] is None
    assert json.loads(sweep_json(res))["reports"][0]["c_max"] is None


@pytest.mark.parametrize("name", ["chain", "zigzag"])
def test_buckling_mode_rayleigh_growth(entries, name):
    e = entries[name]
    R = e.reference_ranges["P2"]
    Ns = [16, 32, 64]
    q = [rayleigh_quotient(buckling_mode(e.spec, N), (R, "PatchIso"), (R, "PatchIso00")) for N in Ns]
    assert 1.6 <= growth_exponent(Ns, q) <= 2.4


def test_buckling_mode_needs_normal_direction(square):
    with pytest.raises(UnsupportedStructure):
        buckling_mode(square.spec, 4)


# -- Fourier weights ------------------------------------------------------------

def alternating_chain_mode(chain):
    return PeriodicDisplacement(chain.spec, 2, np.array([[1.0, 0.0], [-1.0, 0.0]]))


def test_alternating_mode_spot_values(chain):
    u = alternating_chain_mode(chain)
    assert abs(fourier_weighted_sum(chain.spec, u, "grad") - 0.25) < 1e-12
    assert abs(fourier_weighted_sum(chain.spec, u, "seminorm") - 0.0625) < 1e-12


def _dist(x):
    return np.abs(x - np.round(x))


def fft_weighted_sum(name, seq, variant):
    L = seq.shape[0]
    c = np.fft.ifft(seq, axis=0)
    k = np.arange(L) / L
    if name == "chain":
        w = _dist(k)
        if variant == "grad":
            return float(np.sum(w ** 2 * np.sum(np.abs(c) ** 2, axis=1)))
        return float(np.sum(w ** 4 * np.abs(c[:, 0]) ** 2 + w ** 2 * np.abs(c[:, 1]) ** 2))
    w1, w2 = _dist(k - 0.5), _dist(k)
    if variant == "grad":
        return float(np.sum(w1 ** 2 * np.abs(c[:, 0]) ** 2 + w2 ** 2 * np.abs(c[:, 1]) ** 2))
    mix = 2j * np.pi * (k - 0.5) * c[:, 0] - c[:, 1]
    return float(np.sum(w1 ** 4 * np.abs(c[:, 0]) ** 2 + w2 ** 2 * np.abs(mix) ** 2))


@pytest.mark.parametrize("name", ["chain", "zigzag"])
@pytest.mark.parametrize("variant", ["grad", "seminorm"])
def test_weighted_sum_matches_fft(entries, name, variant):
    spec = entries[name].spec
    u = random_field(spec, 8, seed=3)
    if name == "chain":
        seq = np.asarray(u.values[0])
    else:
        seq = np.empty((8, 2))
        seq[0::2], seq[1::2] = u.values[0], u.values[1]
    assert fourier_weighted_sum(spec, u, variant) == pytest.approx(fft_weighted_sum(name, seq, variant), rel=1e-12)


def test_weighted_sum_rejects_unknown_variant(chain):
    with pytest.raises(ValueError):
        fourier_weighted_sum(chain.spec, alternating_chain_mode(chain), "hessian")


def test_fourier_check_shape_and_determinism(zigzag):
    R = zigzag.reference_ranges["P2"]
    a = fourier_check(zigzag.spec, R, 8, trials=10, seed=4).as_dict()
    b = fourier_check(zigzag.spec, R, 8, trials=10, seed=4).as_dict()
    assert a == b
    for name in ("grad", "seminorm"):
        v = a["assertions"][name]
        assert 0 < v["min_ratio"] <= v["max_ratio"] < math.inf


def test_fourier_check_rejects(entries):
    e = entries["zigzag"]
    with pytest.raises(ValueError):
        fourier_check(e.spec, e.reference_ranges["P2"], 8, trials=0)
    h = entries["helix"]
    with pytest.raises(UnsupportedStructure):
        fourier_check(h.spec, h.reference_ranges["P2"], 8, trials=1)
