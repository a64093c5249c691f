import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from holex.spectral import (
    circular_correlation,
    circular_correlation_direct,
    circular_convolution,
    dft,
    dft_naive,
    fft_radix2,
    idft,
    parseval_dot,
    spectrum_alternating_sum,
    spectrum_sum,
    trilinear_product,
)

from conftest import direct_correlation, naive_dft

finite = st.floats(-100, 100, allow_nan=False, allow_infinity=False).filter(lambda v: v == 0 or abs(v) > 1e-100)


def vectors(min_size=1, max_size=64):
    return st.integers(min_size, max_size).flatmap(lambda k: arrays(np.float64, k, elements=finite))


def pairs(max_size=64):
    return st.integers(1, max_size).flatmap(
        lambda k: st.tuples(arrays(np.float64, k, elements=finite), arrays(np.float64, k, elements=finite))
    )


class TestDFT:
    def test_delta(self):
        np.testing.assert_allclose(dft([1, 0, 0]), [1, 1, 1], atol=1e-15)

    def test_two_point(self):
        np.testing.assert_allclose(dft([1, 2]), [3, -1], atol=1e-15)

    def test_constant(self):
        np.testing.assert_allclose(dft([1, 1, 1, 1]), [4, 0, 0, 0], atol=1e-14)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            dft([])
        with pytest.raises(ValueError):
            idft([])

    @pytest.mark.parametrize("k", [1, 2, 3, 4, 5, 7, 8, 12, 16, 31, 32, 64])
    def test_matches_double_loop(self, k, rng):
        x = rng.normal(size=k)
        np.testing.assert_allclose(dft(x), naive_dft(list(x)), rtol=1e-10, atol=1e-10)

    @pytest.mark.parametrize("k", [1, 2, 4, 8, 64, 1024])
    def test_radix2_matches_naive(self, k, rng):
        x = rng.normal(size=k) + 1j * rng.normal(size=k)
        np.testing.assert_allclose(fft_radix2(x), dft_naive(x), atol=1e-9 * k)

    def test_radix2_rejects_other_lengths(self):
        with pytest.raises(ValueError):
            fft_radix2(np.ones(6))

    def test_batched_rows(self, rng):
        x = rng.normal(size=(5, 8))
        np.testing.assert_allclose(dft(x), np.stack([dft(r) for r in x]))


class TestInverse:
    def test_round_trip(self):
        z = idft(dft([1, 2, 3]))
        np.testing.assert_allclose(z.real, [1, 2, 3], atol=1e-12)
        assert np.max(np.abs(z.imag)) <= 1e-10

    def test_constant_spectrum(self):
        c = 2.5 - 1.5j
        np.testing.assert_allclose(idft([c] * 4), [c, 0, 0, 0], atol=1e-15)
        np.testing.assert_allclose(idft([c] * 5), [c, 0, 0, 0, 0], atol=1e-15)

    def test_two_point(self):
        np.testing.assert_allclose(idft([3, -1]), [1, 2], atol=1e-15)

    @given(vectors())
    @settings(max_examples=60, deadline=None)
    def test_round_trip_property(self, x):
        z = idft(dft(x))
        np.testing.assert_allclose(z.real, x, atol=1e-10 * max(1.0, np.max(np.abs(x))))
        assert np.max(np.abs(z.imag)) <= 1e-10 * max(1.0, np.max(np.abs(x)))


class TestStructure:
    @given(vectors())
    @settings(max_examples=60, deadline=None)
    def test_conjugate_symmetry(self, x):
        f = dft(x)
        k = len(x)
        tol = 1e-10 * max(1.0, float(np.sum(np.abs(x))))
        for j in range(1, k):
            assert abs(f[k - j] - np.conj(f[j])) <= tol

    @given(vectors())
    @settings(max_examples=60, deadline=None)
    def test_zero_slot_is_sum(self, x):
        f0 = dft(x)[0]
        tol = 1e-10 * max(1.0, float(np.sum(np.abs(x))))
        assert abs(f0.imag) <= tol
        assert abs(f0.real - spectrum_sum(x)) <= tol

    @given(st.integers(1, 32).flatmap(lambda h: arrays(np.float64, 2 * h, elements=finite)))
    @settings(max_examples=60, deadline=None)
    def test_nyquist_slot_is_alternating_sum(self, x):
        fk = dft(x)[len(x) // 2]
        tol = 1e-10 * max(1.0, float(np.sum(np.abs(x))))
        assert abs(fk.imag) <= tol
        assert abs(fk.real - spectrum_alternating_sum(x)) <= tol

    def test_alternating_sum_needs_even_length(self):
        with pytest.raises(ValueError):
            spectrum_alternating_sum([1.0, 2.0, 3.0])


class TestCorrelation:
    def test_delta_identity(self):
        np.testing.assert_allclose(circular_correlation([1, 0, 0], [0, 1, 0]), [0, 1, 0], atol=1e-15)

    def test_two_point(self):
        np.testing.assert_allclose(circular_correlation([1, 2], [3, 4]), [11, 10], atol=1e-13)
        assert direct_correlation([1, 2], [3, 4]) == [11, 10]

    def test_constant_autocorrelation(self):
        np.testing.assert_allclose(circular_correlation([1, 1], [1, 1]), [2, 2], atol=1e-15)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            circular_correlation([1, 2], [1, 2, 3])
        with pytest.raises(ValueError):
            circular_correlation_direct([1, 2], [1, 2, 3])

    @given(pairs())
    @settings(max_examples=80, deadline=None)
    def test_spectral_matches_direct(self, ab):
        a, b = ab
        want = np.array(direct_correlation(list(a), list(b)))
        scale = max(1.0, float(np.sum(np.abs(a)) * np.max(np.abs(b))))
        np.testing.assert_allclose(circular_correlation(a, b), want, rtol=1e-9, atol=1e-9 * scale)
        np.testing.assert_allclose(circular_correlation_direct(a, b), want, rtol=1e-9, atol=1e-9 * scale)

    def test_convolution_direct(self, rng):
        a, b = rng.normal(size=7), rng.normal(size=7)
        want = [sum(a[i] * b[(k - i) % 7] for i in range(7)) for k in range(7)]
        np.testing.assert_allclose(circular_convolution(a, b), want, atol=1e-12)


class TestTrilinear:
    def test_identity(self):
        assert trilinear_product([1], [1], [1]) == 1 + 0j

    def test_single_term(self):
        assert abs(trilinear_product([1 + 1j], [1 - 1j], [1j]) - 2j) < 1e-15

    def test_zero_annihilates(self, rng):
        z = rng.normal(size=4) + 1j * rng.normal(size=4)
        assert trilinear_product(z, np.zeros(4), z) == 0

    def test_permutation_symmetric(self, rng):
        a, b, c = (rng.normal(size=5) + 1j * rng.normal(size=5) for _ in range(3))
        ref = trilinear_product(a, b, c)
        for args in ((a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)):
            assert abs(trilinear_product(*args) - ref) < 1e-12

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            trilinear_product([1], [1, 2], [1])


class TestParseval:
    def test_examples(self):
        assert parseval_dot([1, 1], [1, 1]) == pytest.approx(2.0)
        assert parseval_dot([1, 0], [0, 1]) == pytest.approx(0.0, abs=1e-15)

    def test_random_length_eight(self, rng):
        x, y = rng.normal(size=8), rng.normal(size=8)
        assert parseval_dot(x, y) == pytest.approx(float(x @ y), rel=1e-12)

    @given(pairs())
    @settings(max_examples=80, deadline=None)
    def test_matches_dot(self, xy):
        x, y = xy
        scale = float(np.linalg.norm(x) * np.linalg.norm(y))
        assert abs(parseval_dot(x, y) - float(x @ y)) <= 1e-9 * max(scale, 1e-300)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            parseval_dot([1, 2], [1])
