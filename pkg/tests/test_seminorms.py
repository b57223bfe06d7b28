import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from objkorn import seminorms
from objkorn.fields import PeriodicDisplacement, random_field, translation_field
from objkorn.group import has_property_1, parse_range
from objkorn.seminorms import (SeminormKind, SizeGuardError, SubspaceKind, build_subspace, dimension_formulas,
                               global_subspace_dimension, kernel, kernel_formula, local_distances,
                               periodic_intersection_dimension, quadratic_form, seminorm)

from oracles import brute_seminorm

KINDS = [k.value for k in SeminormKind]

# (Trans, Rot, Rot0, Rot00) worked out by hand from d, d1, d2 and the affine dimension
SUBSPACE_DIMS = {
    "chain": (2, 1, 1, 0),
    "zigzag": (2, 1, 1, 0),
    "helix": (3, 3, 3, 1),
    "square-lattice": (2, 1, 0, 0),
    "flat-sheet": (3, 3, 2, 0),
    "c4-vs-klein": (2, 1, 1, 1),
}


@pytest.mark.parametrize("name", sorted(SUBSPACE_DIMS))
def test_dimension_formulas_frozen(entries, name):
    f = dimension_formulas(entries[name].spec)
    trans, rot, rot0, rot00 = SUBSPACE_DIMS[name]
    assert (f[SubspaceKind.Trans], f[SubspaceKind.Rot], f[SubspaceKind.Rot0], f[SubspaceKind.Rot00]) == \
        (trans, rot, rot0, rot00)
    assert f[SubspaceKind.Iso] == trans + rot
    assert f[SubspaceKind.Iso00] == trans + rot00


@pytest.mark.parametrize("name", sorted(SUBSPACE_DIMS))
def test_local_ranks_match_formulas_for_property_1_ranges(entries, name):
    entry = entries[name]
    expected = dimension_formulas(entry.spec)
    tested = 0
    for label, R in entry.reference_ranges.items():
        if not has_property_1(entry.spec, R):
            continue
        for kind in SubspaceKind:
            assert build_subspace(entry.spec, R, kind).rank == expected[kind], (label, kind)
        tested += 1
    assert tested


def test_subspace_basis_is_orthonormal(helix):
    B = build_subspace(helix.spec, helix.reference_ranges["P2"], "Iso")
    assert np.allclose(B.columns.T @ B.columns, np.eye(B.rank), atol=1e-12)


@pytest.mark.parametrize("name", ["chain", "zigzag", "helix", "square-lattice", "flat-sheet", "c4-vs-klein"])
@pytest.mark.parametrize("kind", KINDS)
def test_seminorm_matches_least_squares_oracle(entries, name, kind):
    entry = entries[name]
    spec = entry.spec
    for i, R in enumerate(entry.reference_ranges.values()):
        u = random_field(spec, 2 * spec.m0 if spec.d2 == 2 else 4 * spec.m0, seed=i)
        assert seminorm(u, R, kind) == pytest.approx(brute_seminorm(u, R, kind), abs=1e-10)


@pytest.mark.parametrize("kind", KINDS)
def test_quadratic_form_reproduces_seminorm(zigzag, kind):
    R = zigzag.reference_ranges["P2"]
    Q = quadratic_form(zigzag.spec, R, kind, 8)
    for seed in range(5):
        u = random_field(zigzag.spec, 8, seed)
        x = u.flat()
        assert x @ (Q @ x) == pytest.approx(seminorm(u, R, kind) ** 2, rel=1e-10, abs=1e-14)


def test_quadratic_form_is_symmetric_psd(helix):
    Q = quadratic_form(helix.spec, helix.reference_ranges["P1"], "PatchIso0", 4).toarray()
    assert np.allclose(Q, Q.T)
    assert np.linalg.eigvalsh(Q).min() > -1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 10**6), st.floats(-5, 5), st.sampled_from(KINDS))
def test_seminorm_axioms(entries, s1, s2, lam, kind):
    e = entries["zigzag"]
    R = e.reference_ranges["P2"]
    u, v = random_field(e.spec, 4, s1), random_field(e.spec, 4, s2)
    su, sv, suv = seminorm(u, R, kind), seminorm(v, R, kind), seminorm(u + v, R, kind)
    assert suv <= su + sv + 1e-12
    assert seminorm(lam * u, R, kind) == pytest.approx(abs(lam) * su, abs=1e-12)


@pytest.mark.parametrize("name", ["chain", "zigzag", "square-lattice", "c4-vs-klein"])
@pytest.mark.parametrize("kind", KINDS)
def test_translations_are_in_every_kernel(entries, name, kind):
    e = entries[name]
    spec = e.spec
    R = e.reference_ranges.get("P2") or next(iter(e.reference_ranges.values()))
    N = 4 * spec.m0
    u = random_field(spec, N, seed=9)
    for a in np.eye(spec.d):
        t = translation_field(spec, N, a)
        assert seminorm(t, R, kind) < 1e-12
        assert seminorm(u + 2.5 * t, R, kind) == pytest.approx(seminorm(u, R, kind), abs=1e-12)


@pytest.mark.parametrize("name, label, kind, N, dim", [
    ("chain", "P2", "PatchIso", 4, 2),
    ("chain", "P2", "PatchIso", 8, 2),
    ("chain", "P2", "GradRot00", 8, 2),
    ("chain", "P1", "PatchIso", 2, 3),
    ("chain", "P1", "PatchIso", 4, 5),
    ("chain", "P1", "PatchIso", 8, 9),
    ("zigzag", "P2", "PatchIso", 8, 2),
    ("zigzag", "P2", "PatchIso00", 8, 2),
    ("helix", "P2", "PatchIso", 8, 2),
    ("helix", "P2", "GradPlain", 8, 1),
    ("square-lattice", "P2", "PatchIso", 4, 2),
    ("square-lattice", "P2", "GradPlain", 4, 2),
    ("flat-sheet", "P2", "PatchIso", 2, 3),
    ("c4-vs-klein", "ALL", "PatchIso", 1, 3),
    ("c4-vs-klein", "ALL", "GradPlain", 1, 2),
])
def test_kernel_dimensions(entries, name, label, kind, N, dim):
    e = entries[name]
    d, fields = kernel(e.spec, e.reference_ranges[label], kind, N)
    assert d == dim
    for u in fields:
        assert seminorm(u, e.reference_ranges[label], kind) < 1e-7


def test_chain_short_range_kernel_is_constant_second_component(chain):
    R = chain.reference_ranges["P1"]
    rng = np.random.default_rng(0)
    vals = np.column_stack([rng.normal(size=8), np.full(8, 0.7)])
    u = PeriodicDisplacement(chain.spec, 8, vals)
    assert seminorm(u, R, "PatchIso") < 1e-12
    assert seminorm(u, chain.reference_ranges["P2"], "PatchIso") > 1e-3


@pytest.mark.parametrize("name, label, kind, expected", [
    ("chain", "P2", "PatchIso", 2),
    ("chain", "P2", "GradPlain", 2),
    ("chain", "P1", "PatchIso", None),
    ("zigzag", "P2", "PatchIso0", 2),
    ("helix", "P2", "PatchIso", None),
    ("square-lattice", "P2", "GradRot", 2),
    ("flat-sheet", "P2", "PatchIso", 3),
    ("c4-vs-klein", "ALL", "PatchIso", 3),
    ("c4-vs-klein", "ALL", "GradPlain", 2),
])
def test_kernel_formula(entries, name, label, kind, expected):
    e = entries[name]
    assert kernel_formula(e.spec, e.reference_ranges[label], kind) == expected


def test_helix_global_dimensions(helix):
    spec = helix.spec
    assert global_subspace_dimension(spec, "Trans") == 3
    assert global_subspace_dimension(spec, "Rot0") == 3
    assert global_subspace_dimension(spec, "Rot00") == 1
    assert global_subspace_dimension(spec, "Iso00") == 4


@pytest.mark.parametrize("N", [4, 8, 16])
def test_helix_periodic_intersections(helix, N):
    spec = helix.spec
    assert periodic_intersection_dimension(spec, "Trans", N) == 1
    assert periodic_intersection_dimension(spec, "Rot00", N) == 0
    # the helix kernel: axial translation plus the screw motion
    assert periodic_intersection_dimension(spec, "Iso00", N) == 2


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(["chain", "zigzag"]), st.sampled_from(["P1", "P2"]))
def test_gradient_seminorm_bounds(entries, seed, name, label):
    e = entries[name]
    R = e.reference_ranges[label]
    u = random_field(e.spec, 8, seed)
    a = seminorm(u, R, "PatchIso")
    b = seminorm(u, R, "GradRot")
    n = len(R.without(e.spec.identity()))
    assert a <= b + 1e-9
    assert b <= np.sqrt(2 * n) * a + 1e-9


def test_local_distances_shape(zigzag):
    u = random_field(zigzag.spec, 4, 0)
    assert local_distances(u, zigzag.reference_ranges["P2"], "PatchIso").shape == (4,)


def test_size_guard(monkeypatch, chain):
    monkeypatch.setattr(seminorms, "MAX_FORM_SIZE", 10)
    with pytest.raises(SizeGuardError):
        quadratic_form(chain.spec, chain.reference_ranges["P2"], "PatchIso", 8)


def test_kind_names():
    assert SeminormKind("PatchIso00").subspace is SubspaceKind.Iso00
    assert SeminormKind("GradRot0").subspace is SubspaceKind.Rot0
    assert SeminormKind("GradPlain").subspace is None
    with pytest.raises(ValueError):
        SeminormKind("Patch")


def test_ranges_from_words(chain):
    R = parse_range(chain.spec, "id,t,t^2")
    assert build_subspace(chain.spec, R, "Trans").rank == 2
