"""
Independent reference computations used by the tests.

Each oracle takes a different route from the library code it checks:
quadrature instead of series, cascaded ABCD matrices instead of a closed
form, normal equations instead of SVD solves.
"""

import numpy as np
from scipy import integrate


def dawson_quad(w):
    """Dawson's integral by adaptive quadrature of its definition."""
    val, _ = integrate.quad(lambda t: np.exp(t * t - w * w), 0.0, w,
                            epsabs=1e-15, epsrel=1e-13, limit=200)
    return val


def s11_abcd_cascade(w, R, L, G, C, length, z_ref, n_seg=5000):
    """
    Reflection of a line built from ``n_seg`` cascaded uniform sections.

    Each section uses the exact ABCD matrix of a short line; products are
    accumulated in order and converted to S11 at the end.
    """
    zs = R + 1j * w * L
    yp = G + 1j * w * C
    g = np.sqrt(zs * yp)
    z0 = np.sqrt(zs / yp)
    d = length / n_seg
    ch, sh = np.cosh(g * d), np.sinh(g * d)
    seg = np.array([[ch, z0 * sh], [sh / z0, ch]])
    T = np.eye(2, dtype=complex)
    for _ in range(n_seg):
        T = T @ seg
    A, B, Cc, D = T[0, 0], T[0, 1], T[1, 0], T[1, 1]
    num = A + B / z_ref - Cc * z_ref - D
    den = A + B / z_ref + Cc * z_ref + D
    return num / den


def lstsq_normal(A, b):
    """Least squares through the normal equations with an explicit SVD
    based inverse of ``A^H A``."""
    N = A.conj().T @ A
    U, s, Vt = np.linalg.svd(N)
    return Vt.conj().T @ ((U.conj().T @ (A.conj().T @ b)) / s)


def simpson_norm(coeffs, b, intervals, n=10001):
    """``L2`` norm of ``sum_k c_k exp(-2 pi i k x / b)`` by Simpson's rule."""
    total = 0.0
    k = np.arange(1, len(coeffs) + 1)
    for lo, hi in intervals:
        x = np.linspace(lo, hi, n)
        f = np.exp(-2j * np.pi * np.outer(x, k) / b) @ coeffs
        total += integrate.simpson(np.abs(f) ** 2, x=x)
    return np.sqrt(total)


def periodic_hilbert(f):
    """Hilbert transform of samples over one period via the FFT."""
    n = len(f)
    F = np.fft.fft(f)
    k = np.fft.fftfreq(n)
    return np.real(np.fft.ifft(-1j * np.sign(k) * F))


def db_to_linear(db):
    return 10.0 ** (db / 20.0)
