"""Discrete Fourier transform and the vector products built on it.

Every transform here works along the last axis, so a batch of vectors can be
passed as a 2-D array.  Two forward paths exist: :func:`dft_naive` (direct
double sum, kept as the reference) and :func:`fft_radix2` (iterative
Cooley-Tukey for power-of-two lengths).  :func:`dft` dispatches between them.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

IMAG_TOL = 1e-10


def _as_real(x, name="x"):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0 or x.shape[-1] == 0:
        raise ValueError(f"{name} must be a non-empty vector")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} has non-finite entries")
    return x


def _as_complex(x, name="x"):
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim == 0 or x.shape[-1] == 0:
        raise ValueError(f"{name} must be a non-empty vector")
    return x


def _check_same_length(a, b, *more):
    k = a.shape[-1]
    for v in (b, *more):
        if v.shape[-1] != k:
            raise ValueError(f"length mismatch: {k} != {v.shape[-1]}")


def is_power_of_two(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


@lru_cache(maxsize=64)
def dft_matrix(k: int, inverse: bool = False) -> np.ndarray:
    """K x K kernel matrix ``W[k, j] = exp(-+2i*pi*j*k/K)`` (unnormalized)."""
    sign = 1.0 if inverse else -1.0
    jk = np.outer(np.arange(k), np.arange(k)) % k
    w = np.exp(sign * 2j * np.pi * jk / k)
    w.setflags(write=False)
    return w


def dft_naive(x) -> np.ndarray:
    """Direct O(K^2) summation of the forward transform."""
    x = _as_complex(x)
    return x @ dft_matrix(x.shape[-1])


def _bit_reverse(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def fft_radix2(x, inverse: bool = False) -> np.ndarray:
    """Iterative radix-2 decimation-in-time transform (unnormalized).

    Length must be a power of two.  ``inverse`` flips the twiddle sign but does
    not apply the 1/K factor.
    """
    x = _as_complex(x)
    n = x.shape[-1]
    if not is_power_of_two(n):
        raise ValueError(f"radix-2 transform needs a power-of-two length, got {n}")
    out = x[..., _bit_reverse(n)].copy()
    sign = 1.0 if inverse else -1.0
    m = 2
    while m <= n:
        half = m // 2
        tw = np.exp(sign * 2j * np.pi * np.arange(half) / m)
        blocks = out.reshape(*out.shape[:-1], n // m, m)
        u = blocks[..., :half].copy()
        t = blocks[..., half:] * tw
        blocks[..., :half] = u + t
        blocks[..., half:] = u - t
        m *= 2
    return out


def dft(x) -> np.ndarray:
    """Forward transform: radix-2 for power-of-two K, direct summation otherwise."""
    x = _as_complex(x)
    if is_power_of_two(x.shape[-1]):
        return fft_radix2(x)
    return dft_naive(x)


def idft(spectrum) -> np.ndarray:
    """Inverse transform with the 1/K factor on the inverse."""
    spectrum = _as_complex(spectrum, "spectrum")
    k = spectrum.shape[-1]
    if is_power_of_two(k):
        return fft_radix2(spectrum, inverse=True) / k
    return (spectrum @ dft_matrix(k, inverse=True)) / k


def real_part_checked(z, scale=1.0) -> np.ndarray:
    """Drop the imaginary part after checking it is numerical residue only.

    The tolerance is ``IMAG_TOL * max(1, scale)`` so large-magnitude inputs are
    judged relative to their size.
    """
    z = np.asarray(z)
    if np.iscomplexobj(z):
        resid = float(np.max(np.abs(z.imag), initial=0.0))
        if resid > IMAG_TOL * max(1.0, float(scale)):
            raise ArithmeticError(f"imaginary residue {resid:.3e} exceeds tolerance")
        return np.array(z.real)
    return z


def _scale(*arrays) -> float:
    return float(np.prod([np.max(np.abs(a), initial=0.0) for a in arrays]) * arrays[0].shape[-1])


def circular_correlation_direct(a, b) -> np.ndarray:
    """``(a * b)[k] = sum_i a[i] * b[(i + k) mod K]`` by direct summation."""
    a = _as_real(a, "a")
    b = _as_real(b, "b")
    _check_same_length(a, b)
    k = a.shape[-1]
    idx = (np.arange(k)[:, None] + np.arange(k)[None, :]) % k  # [i, k] -> i + k
    return np.einsum("...i,...ik->...k", a, b[..., idx])


def circular_correlation(a, b) -> np.ndarray:
    """Circular correlation computed in the frequency domain."""
    a = _as_real(a, "a")
    b = _as_real(b, "b")
    _check_same_length(a, b)
    z = idft(np.conj(dft(a)) * dft(b))
    return real_part_checked(z, _scale(a, b))


def circular_convolution(a, b) -> np.ndarray:
    """``(a (*) b)[k] = sum_i a[i] * b[(k - i) mod K]`` in the frequency domain."""
    a = _as_real(a, "a")
    b = _as_real(b, "b")
    _check_same_length(a, b)
    z = idft(dft(a) * dft(b))
    return real_part_checked(z, _scale(a, b))


def trilinear_product(a, b, c) -> complex | np.ndarray:
    """``sum_j a[j] * b[j] * c[j]`` over complex vectors."""
    a = _as_complex(a, "a")
    b = _as_complex(b, "b")
    c = _as_complex(c, "c")
    _check_same_length(a, b, c)
    out = np.sum(a * b * c, axis=-1)
    return complex(out) if np.ndim(out) == 0 else out


def parseval_dot(x, y) -> float:
    """Dot product evaluated as ``(1/K) * sum_j F(x)_j * conj(F(y)_j)``."""
    x = _as_real(x, "x")
    y = _as_real(y, "y")
    _check_same_length(x, y)
    if x.ndim != 1 or y.ndim != 1:
        raise ValueError("parseval_dot takes 1-D vectors")
    z = np.sum(dft(x) * np.conj(dft(y))) / x.shape[0]
    return float(real_part_checked(z, _scale(x, y)))


def spectrum_sum(x) -> np.ndarray:
    """Sum of entries; equals the (always real) zero-frequency slot."""
    return np.sum(_as_real(x), axis=-1)


def spectrum_alternating_sum(x) -> np.ndarray:
    """``sum_k x[2k] - x[2k+1]``; equals the real Nyquist slot for even K."""
    x = _as_real(x)
    if x.shape[-1] % 2:
        raise ValueError("alternating sum slot only exists for even length")
    return np.sum(x[..., 0::2] - x[..., 1::2], axis=-1)
