"""
Analytic test responses with known delays, plus the sine perturbation used
to emulate noisy measurements.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectrum import RescaledGrid, SampledResponse

INCH = 0.0254
C0 = 3e8


@dataclass(frozen=True)
class FourPoleParams:
    r1: complex = 1 + 2j
    p1: complex = 1 + 3j
    r2: complex = 2 / 3 + 0.5j
    p2: complex = 0.5 + 5j
    t0: float = 0.25

    def __post_init__(self):
        if self.p1.real <= 0 or self.p2.real <= 0:
            raise ValueError("poles must have positive real part")


@dataclass(frozen=True)
class RlgcParams:
    """Per-unit-length line constants in SI units."""

    R: float
    L: float
    G: float
    C: float
    length: float
    z_ref: float = 50.0

    def __post_init__(self):
        if self.L <= 0 or self.C <= 0:
            raise ValueError("L and C must be positive")
        if self.R < 0 or self.G < 0:
            raise ValueError("R and G must be non-negative")
        if self.length <= 0 or self.z_ref <= 0:
            raise ValueError("length and z_ref must be positive")

    @classmethod
    def per_inch(cls, R, L, G, C, length_in, z_ref=50.0):
        return cls(R / INCH, L / INCH, G / INCH, C / INCH, length_in * INCH,
                   z_ref)


# 5 inch lossy line with per-inch constants 16.278 mOhm, 7.574 nH,
# 5.58 uS and 2.61166 pF.
TLINE = RlgcParams.per_inch(16.278e-3, 7.574e-9, 5.58e-6, 2.61166e-12, 5.0)


@dataclass(frozen=True)
class NoiseSpec:
    amplitude: float
    angular_factor: float = 10 * np.pi

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("noise amplitude must be non-negative")


def four_pole(w, p: FourPoleParams = FourPoleParams()):
    """
    ``exp(-i w t0) sum_j [r_j/(iw + p_j) + conj(r_j)/(iw + conj(p_j))]``.
    """
    w = np.asarray(w, dtype=float)
    iw = 1j * w
    h = 0
    for r, p_ in ((p.r1, p.p1), (p.r2, p.p2)):
        h = h + r / (iw + p_) + np.conj(r) / (iw + np.conj(p_))
    return np.exp(-1j * w * p.t0) * h


def rlgc_s11(w, p: RlgcParams = TLINE):
    """
    Input reflection of a uniform RLGC line between ``z_ref`` ports.

    Written with ``tanh`` expressed through ``exp(-2 gamma l)`` so long or
    very lossy lines never overflow.
    """
    w = np.asarray(w, dtype=float)
    zs = p.R + 1j * w * p.L
    yp = p.G + 1j * w * p.C
    gl = np.sqrt(zs * yp) * p.length
    gl = np.where(gl.real < 0, -gl, gl)
    z2 = zs / yp
    e = np.exp(-2 * gl)
    th = (1 - e) / (1 + e)
    zr = p.z_ref
    return (z2 - zr ** 2) * th / (2 * np.sqrt(z2) * zr + (z2 + zr ** 2) * th)


def tline(w, t0=0.0, p: RlgcParams = TLINE):
    """``rlgc_s11`` with an extra linear-phase delay ``t0``."""
    w = np.asarray(w, dtype=float)
    return np.exp(-1j * w * t0) * rlgc_s11(w, p)


_SERIES_LIMIT = 4.0


def _dawson_series(w):
    # exp(-w^2) * sum w^(2n+1) / (n! (2n+1)); every term positive
    w2 = w * w
    p = w.copy()
    s = w.copy()
    for n in range(1, 200):
        p = p * w2 / n
        s = s + p / (2 * n + 1)
    return np.exp(-w2) * s


def _dawson_cfrac(w, depth=80):
    w2 = w * w
    t = np.zeros_like(w)
    for n in range(depth, 0, -1):
        t = 4 * n * w2 / (2 * n + 1 + 2 * w2 - t)
    return w / (1 + 2 * w2 - t)


def dawson(w):
    """
    Dawson's integral ``D(w) = exp(-w^2) int_0^w exp(t^2) dt``.

    Power series below ``|w| = 4``, continued fraction above.
    """
    w = np.asarray(w, dtype=float)
    a = np.abs(np.atleast_1d(w))
    out = np.empty_like(a)
    small = a < _SERIES_LIMIT
    out[small] = _dawson_series(a[small])
    out[~small] = _dawson_cfrac(a[~small])
    out = np.sign(np.atleast_1d(w)) * out
    return out.reshape(w.shape) if w.ndim else float(out[0])


def dawson_response(w, t0=0.125):
    """``exp(-i w t0) [exp(-w^2) - (2i/sqrt(pi)) D(w)]``."""
    w = np.asarray(w, dtype=float)
    h = np.exp(-w ** 2) - 2j / np.sqrt(np.pi) * dawson(w)
    return np.exp(-1j * w * t0) * h


def stripline_closed_form_delay(length_m, eps_r):
    """Propagation delay ``length sqrt(eps_r) / c0`` with ``c0 = 3e8``."""
    if length_m <= 0:
        raise ValueError("length must be positive")
    if eps_r < 1:
        raise ValueError("eps_r must be at least 1")
    return length_m * np.sqrt(eps_r) / C0


def add_sine_noise(grid: RescaledGrid, spec: NoiseSpec):
    """
    Add ``a sin(k x)`` to the real part of every grid value.

    The perturbation is odd in ``x`` while a causal real part is even, so it
    breaks causality at level ``O(a)``.
    """
    if spec.amplitude == 0:
        return grid
    pert = spec.amplitude * np.sin(spec.angular_factor * grid.xs)
    return grid.with_values(grid.values + pert)


# name -> (generator, w_max, includes zero, default delay)
EXAMPLES = {
    "four-pole": (lambda w, t0: four_pole(w, FourPoleParams(t0=t0)),
                  6.0, True, 0.25),
    "tline": (lambda w, t0: tline(w, t0), 2 * np.pi * 5e9, False, 1.25e-9),
    "dawson": (dawson_response, 20.0, True, 0.125),
}


def sample(name, n, t0=None, w_max=None):
    """
    Uniformly sampled example response.

    ``four-pole`` and ``dawson`` include ``w = 0``; ``tline`` is sampled on
    ``(0, w_max]``.
    """
    try:
        fun, wm, zero, td = EXAMPLES[name]
    except KeyError:
        raise ValueError(f"unknown example {name!r}") from None
    wm = w_max or wm
    t0 = td if t0 is None else t0
    w = np.linspace(0.0, wm, n) if zero else np.linspace(wm / n, wm, n)
    return SampledResponse(w, fun(w, t0), label=name)
