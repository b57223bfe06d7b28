import io
from fractions import Fraction

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from objkorn.fields import PeriodicDisplacement, random_field
from objkorn.fourier import (Character, field_plancherel_residual, field_spectrum, inverse_transform,
                             periodic_characters, plancherel_residual, spectrum, transform,
                             translation_property_residual, write_spectrum_csv)

from oracles import dft_spectrum

seeds = st.integers(0, 2**32 - 1)


def test_chain_characters_at_period_four(chain):
    ks = [c.k[0] for c in periodic_characters(chain.spec, 4)]
    assert ks == [Fraction(0), Fraction(1, 4), Fraction(1, 2), Fraction(3, 4)]


def test_zigzag_characters_use_lattice_period(zigzag):
    ks = [c.k[0] for c in periodic_characters(zigzag.spec, 8)]
    assert ks == [Fraction(j, 4) for j in range(4)]


def test_character_reduces_mod_one():
    assert Character((Fraction(5, 4), -0.5)).k == (Fraction(1, 4), Fraction(1, 2))
    assert Character((Fraction(1, 3),)).is_periodic(6)
    assert not Character((Fraction(1, 3),)).is_periodic(4)


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(1, 3), st.integers(1, 9))
def test_spectrum_matches_naive_dft(seed, d2, K):
    if K ** d2 > 200:
        K = 4
    rng = np.random.default_rng(seed)
    f = rng.normal(size=(K,) * d2 + (2,)) + 1j * rng.normal(size=(K,) * d2 + (2,))
    _, S = spectrum(f, d2)
    assert np.allclose(S, dft_spectrum(f, d2), atol=1e-12)
    # direct per-character summation agrees with the FFT path
    chars, _ = spectrum(f, d2)
    assert np.allclose(S, [transform(f, c) for c in chars], atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(1, 2), st.integers(1, 8))
def test_inverse_transform_roundtrip(seed, d2, K):
    rng = np.random.default_rng(seed)
    f = rng.normal(size=(K,) * d2 + (3,))
    _, S = spectrum(f, d2)
    assert np.allclose(inverse_transform(S, K, d2), f, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(1, 2), st.integers(1, 8), st.integers(1, 3))
def test_plancherel_with_mismatched_periods(seed, d2, K, m):
    rng = np.random.default_rng(seed)
    f = rng.normal(size=(K,) * d2 + (2,))
    g = rng.normal(size=(K * m,) * d2 + (2,))
    assert plancherel_residual(f, g, d2) < 1e-10


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(1, 12), st.integers(-20, 20), st.integers(0, 11))
def test_translation_property(seed, K, b, j):
    rng = np.random.default_rng(seed)
    f = rng.normal(size=(K, 2)) + 1j * rng.normal(size=(K, 2))
    chi = Character((Fraction(j % K, K),))
    assert translation_property_residual(f, (b,), chi) < 1e-10


def test_translation_property_example():
    # f(t^n) = exp(2 pi i n / 4) e_1 on the chain, chi_{1/4}
    n = np.arange(4)
    f = np.zeros((4, 2), dtype=complex)
    f[:, 0] = np.exp(2j * np.pi * n / 4)
    chi = Character((Fraction(1, 4),))
    for b in range(-3, 5):
        assert translation_property_residual(f, (b,), chi) < 1e-12


def test_transform_lifts_to_character_period():
    f = np.array([[1.0], [2.0]])
    chi = Character((Fraction(1, 4),))
    lifted = np.tile(f, (2, 1))
    assert np.allclose(transform(f, chi), dft_spectrum(lifted, 1)[1])


def test_field_plancherel(entries):
    for name in ("chain", "zigzag", "helix", "square-lattice"):
        spec = entries[name].spec
        u = random_field(spec, 4 * spec.m0, seed=1)
        v = random_field(spec, 2 * spec.m0, seed=2)
        assert field_plancherel_residual(u, v) < 1e-12


def test_field_spectrum_shape(zigzag):
    u = random_field(zigzag.spec, 8, seed=0)
    chars, S = field_spectrum(u)
    assert len(chars) == 4 and S.shape == (2, 4, 2)


def test_spectrum_csv(chain, zigzag):
    u = PeriodicDisplacement(chain.spec, 2, np.array([[1.0, 0.0], [-1.0, 0.0]]))
    buf = io.StringIO()
    write_spectrum_csv(u, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "k_1,re_u_1,im_u_1,re_u_2,im_u_2"
    assert lines[2].split(",")[:2] == ["0.5", "1"]
    buf = io.StringIO()
    write_spectrum_csv(random_field(zigzag.spec, 4, 0), buf)
    assert buf.getvalue().splitlines()[0].startswith("coset_index,k_1,")
