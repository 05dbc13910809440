"""
Frequency response containers and the rescaled, conjugate-symmetric grid
on which causal continuations are built.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class SampledResponse:
    """
    Tabulated complex frequency response.

    Parameters
    ----------
    freqs : ndarray
        Angular frequencies in rad/s, strictly increasing and non-negative.
    values : ndarray
        Complex response at ``freqs``.
    label : str
        Free text tag, e.g. ``"S11"``.
    """

    freqs: np.ndarray
    values: np.ndarray
    label: str = ""
    warnings: tuple = field(default=(), compare=False)

    def __post_init__(self):
        w = np.asarray(self.freqs, dtype=float)
        h = np.asarray(self.values, dtype=complex)
        if w.ndim != 1 or h.shape != w.shape:
            raise ValueError("freqs and values must be 1-D arrays of equal length")
        if len(w) < 2:
            raise ValueError("at least two samples are required")
        if not np.all(np.isfinite(w)) or not np.all(np.isfinite(h)):
            raise ValueError("non-finite frequency or value")
        if w[0] < 0:
            raise ValueError("frequencies must be non-negative")
        steps = np.diff(w)
        if np.any(steps == 0):
            j = int(np.nonzero(steps == 0)[0][0]) + 1
            raise ValueError(f"duplicate frequency at index {j}")
        if np.any(steps < 0):
            j = int(np.nonzero(steps < 0)[0][0]) + 1
            raise ValueError(f"frequencies not increasing at index {j}")
        if w[-1] <= 0:
            raise ValueError("w_max must be positive")
        notes = list(self.warnings)
        if w[0] == 0 and h[0].imag != 0:
            h = h.copy()
            h[0] = h[0].real
            notes.append("imaginary part at w=0 set to zero")
        w.flags.writeable = False
        h.flags.writeable = False
        object.__setattr__(self, "freqs", w)
        object.__setattr__(self, "values", h)
        object.__setattr__(self, "warnings", tuple(notes))

    @property
    def n(self):
        return len(self.freqs)

    @property
    def w_max(self):
        return float(self.freqs[-1])


@dataclass(frozen=True)
class RescaledGrid:
    """
    Symmetrized samples on ``x in [-0.5, 0.5]``.

    ``scale_a`` converts scaled delays back to seconds.
    """

    xs: np.ndarray
    values: np.ndarray
    scale_a: float
    includes_zero: bool

    @property
    def n_points(self):
        return len(self.xs)

    @property
    def n_original(self):
        """Number of samples on the non-negative half."""
        return (len(self.xs) + 1) // 2

    @property
    def gap(self):
        """Half-width ``a*`` of the excluded band around zero."""
        pos = self.xs[self.xs >= 0]
        return float(pos[0])

    def intervals(self):
        """The sampled domain as a list of closed intervals."""
        g = self.gap
        if g == 0:
            return [(-0.5, 0.5)]
        return [(-0.5, -g), (g, 0.5)]

    def with_values(self, values):
        return RescaledGrid(self.xs, np.asarray(values, dtype=complex),
                            self.scale_a, self.includes_zero)


def rescale_and_symmetrize(resp: SampledResponse) -> RescaledGrid:
    """
    Map ``[0, w_max]`` onto ``[0, 0.5]`` and reflect by conjugate symmetry.

    Parameters
    ----------
    resp : SampledResponse

    Returns
    -------
    RescaledGrid
        ``2N - 1`` points when ``w = 0`` is sampled, else ``2N``.
    """
    w, h = resp.freqs, resp.values
    x = 0.5 * w / resp.w_max
    x[-1] = 0.5
    zero = bool(w[0] == 0)
    if zero:
        xs = np.concatenate([-x[:0:-1], x])
        vals = np.concatenate([np.conj(h[:0:-1]), h])
    else:
        xs = np.concatenate([-x[::-1], x])
        vals = np.concatenate([np.conj(h[::-1]), h])
    return RescaledGrid(xs, vals, 0.5 / resp.w_max, zero)


def unscale_delay(t_scaled, a):
    """Convert a delay measured on the rescaled axis to seconds."""
    if np.any(np.asarray(t_scaled) < 0):
        raise ValueError("scaled delay must be non-negative")
    return t_scaled * a
