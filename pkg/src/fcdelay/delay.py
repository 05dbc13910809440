"""
Delay extraction from the causality-violation transition.

Multiplying the data by ``exp(i x T)`` removes a trial delay ``T`` (scaled
units). While ``T`` stays below the true delay the shifted data remain causal
and the continuation error sits on a plateau. Past it, the error grows
roughly as a power of ``T``. The growth region is fitted by a quadratic on
log-log axes and the fit is read off either at the plateau level (critical
time) or at the singular value cutoff (extrapolation).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .continuation import ContinuationConfig, SweepSolver
from .spectrum import RescaledGrid, SampledResponse, rescale_and_symmetrize
from .synth import NoiseSpec, add_sine_noise

T_MAX = 4 * np.pi
STRATEGIES = ("critical", "extrapolate")
_TINY = np.finfo(float).tiny


class NoTransition(RuntimeError):
    """No growth region: data causal over the sweep, or delay out of range."""


class DegenerateFit(RuntimeError):
    """The fitted curve is flat and cannot be inverted."""


class AllFailed(RuntimeError):
    """Every coefficient count in a delay estimate failed."""


@dataclass(frozen=True)
class ErrorCurve:
    """
    Continuation errors along a sweep of scaled trial delays.

    ``offset`` is the basis offset subtracted from each trial delay before
    the phase shift is applied.
    """

    M: int
    ts: np.ndarray
    errs: np.ndarray
    errs_im: np.ndarray
    scale_a: float
    offset: float = 0.0
    errs_rel: np.ndarray | None = field(default=None, repr=False)
    floored: bool = False

    @property
    def t_seconds(self):
        return self.ts * self.scale_a

    def __len__(self):
        return len(self.ts)


@dataclass(frozen=True)
class QuadraticFit:
    """
    ``ln T = a2 (ln e)^2 + a1 ln e + a0`` over a growth window.
    """

    a0: float
    a1: float
    a2: float
    window: tuple
    t_range: tuple
    e_range: tuple
    rms_residual: float
    n_points: int

    @property
    def coeffs(self):
        return np.array([self.a2, self.a1, self.a0])

    def log_time(self, u):
        """
        Fitted ``ln T`` at ``u = ln e``, kept on the branch of the window.

        When the parabola turns between the window and ``u``, the value at
        the vertex is returned instead of climbing the other branch.
        """
        lo = math.log(self.e_range[0])
        hi = math.log(self.e_range[1])
        if self.a2 != 0:
            uv = -self.a1 / (2 * self.a2)
            if u < uv <= lo or hi <= uv < u:
                u = uv
        return float(np.polyval(self.coeffs, u))

    def time_at(self, e):
        return math.exp(self.log_time(math.log(e)))

    def covers(self, e):
        return self.e_range[0] <= e <= self.e_range[1]


@dataclass(frozen=True)
class WindowPolicy:
    """
    Growth-window detection and sweep extension settings.

    Parameters
    ----------
    plateau_fraction : float
        Leading fraction of the base grid whose median error is the plateau.
    onset_factor : float
        The window starts once errors exceed this multiple of the plateau.
    saturation : float
        The saturation peak is the first local maximum at or above this
        fraction of the largest error.
    peak_fraction, decades : float
        The window ends below ``peak_fraction`` times the peak error and below
        ``decades`` decades above the onset level, whichever is lower.
    refine : int
        Points used to resample the window.
    narrow : float or None or "auto"
        Keep only this central fraction of the window. ``"auto"`` narrows to
        ``narrow_fraction`` when the plateau exceeds ``auto_factor * xi``.
    extend : bool
        Double the sweep range beyond ``4 pi`` until the peak is reached.
    edge_offset : bool
        Measure trial delays from the first basis term, i.e. subtract
        ``2 pi / b`` before phase shifting.
    """

    plateau_fraction: float = 0.15
    onset_factor: float = 10.0
    saturation: float = 0.5
    peak_fraction: float = 0.01
    decades: float = 5.0
    refine: int = 200
    narrow: object = "auto"
    narrow_fraction: float = 0.6
    auto_factor: float = 100.0
    extend: bool = True
    edge_offset: bool = True

    def narrowing(self, plateau, xi):
        if self.narrow == "auto":
            return self.narrow_fraction if plateau > self.auto_factor * xi \
                else None
        if self.narrow is None or self.narrow == 0:
            return None
        f = float(self.narrow)
        if not 0 < f <= 1:
            raise ValueError("narrowing fraction must lie in (0, 1]")
        return f


@dataclass
class MEstimate:
    M: int
    t_scaled: float
    seconds: float
    strategy: str
    fit: QuadraticFit
    plateau: float
    narrowed: float | None = None
    included: bool = True
    flags: tuple = ()
    curve: ErrorCurve | None = field(default=None, repr=False)
    detail: ErrorCurve | None = field(default=None, repr=False)


@dataclass
class DelayEstimate:
    per_m: list
    averaged: float
    strategy: str
    failures: dict = field(default_factory=dict)

    @property
    def included(self):
        return [e for e in self.per_m if e.included]


def apply_phase_shift(grid: RescaledGrid, t_scaled):
    """Multiply grid values by ``exp(i x t)``; ``|values|`` is unchanged."""
    if t_scaled < 0:
        raise ValueError("trial delay must be non-negative")
    return grid.with_values(_shift(grid.xs, grid.values, t_scaled))


def _shift(xs, values, t):
    return values * np.exp(1j * xs * t)


def base_grid(n=120, t_max=T_MAX):
    """``t = 0`` followed by ``n - 1`` log-spaced points up to ``t_max``."""
    if n < 3:
        raise ValueError("need at least 3 sweep points")
    return np.concatenate([[0.0], np.geomspace(t_max * 1e-3, t_max, n - 1)])


def extended_grid(n, t_max):
    """Base grid continued past ``4 pi`` at the same log density."""
    per_decade = (n - 2) / 3.0
    lo = T_MAX * 1e-3
    k = int(round(per_decade * math.log10(t_max / lo))) + 1
    return np.concatenate([[0.0], np.geomspace(lo, t_max, k)])


def sweep_delay(grid: RescaledGrid, cfg: ContinuationConfig, t_grid,
                offset=0.0, solver=None, chunk=256):
    """
    Continuation errors for each trial delay in ``t_grid``.

    Every point solves the same least-squares problem as
    ``build_continuation(apply_phase_shift(grid, t - offset), cfg)``.
    """
    ts = np.asarray(t_grid, dtype=float)
    if ts.ndim != 1 or len(ts) == 0 or np.any(ts < 0):
        raise ValueError("trial delays must be a non-empty list of t >= 0")
    solver = solver or SweepSolver(grid.xs, cfg)
    mag = np.abs(grid.values)
    mag = np.where(mag > 0, mag, np.inf)
    er, ei, rel = [], [], []
    for i in range(0, len(ts), chunk):
        t = ts[i:i + chunk] - offset
        v = grid.values[:, None] * np.exp(1j * np.outer(grid.xs, t))
        a, b, r = solver.errors(v, weights=1 / mag)
        er.append(a)
        ei.append(b)
        rel.append(r)
    er = np.concatenate(er)
    floored = bool(np.any(er <= 0))
    er = np.maximum(er, _TINY)
    return ErrorCurve(cfg.M, ts, er, np.concatenate(ei), grid.scale_a,
                      offset, np.concatenate(rel), floored)


def plateau_level(curve: ErrorCurve, fraction=0.15, n_base=None):
    """Median error over the leading ``fraction`` of the base sweep."""
    n = n_base or len(curve)
    k = max(1, int(round(fraction * n)))
    return float(np.median(curve.errs[:k]))


def _peak(errs, threshold, saturation):
    if not np.any(errs > threshold):
        return None
    p = int(np.nonzero(errs >= saturation * errs.max())[0][0])
    while p + 1 < len(errs) and errs[p + 1] > errs[p]:
        p += 1
    return p


def _walk_down(errs, start, threshold):
    i = start
    while i > 0 and threshold < errs[i - 1] < errs[i]:
        i -= 1
    return i


def detect_growth_window(errs, plateau, policy: WindowPolicy = WindowPolicy()):
    """
    Index range of the growth region of a sampled error curve.

    The region is the monotone run of errors above ``onset_factor *
    plateau`` that ends just below the window top, where the top lies under
    the first saturation peak.

    Returns
    -------
    (lo, hi, top) or None
        ``hi`` is inclusive; ``top`` is the error ceiling. ``None`` when
        no error rises above the onset level.
    """
    errs = np.asarray(errs, dtype=float)
    thr = policy.onset_factor * plateau
    p = _peak(errs, thr, policy.saturation)
    if p is None:
        return None
    top = min(policy.peak_fraction * errs[p], thr * 10 ** policy.decades)
    u = int(np.nonzero(errs[:p + 1] >= top)[0][0])
    lo = _walk_down(errs, u, thr)
    hi = u - 1 if errs[u] > top and u > lo else u
    return lo, hi, top


def fit_growth_region(curve: ErrorCurve, policy: WindowPolicy = WindowPolicy(),
                      window=None, plateau=None):
    """
    Least-squares quadratic of ``ln T`` on ``ln e`` over the growth window.

    Parameters
    ----------
    curve : ErrorCurve
    policy : WindowPolicy
        Used to detect the window when ``window`` is not given.
    window : (lo, hi), optional
        Inclusive index range.
    plateau : float, optional
        Plateau level for detection; defaults to :func:`plateau_level`.
    """
    if window is None:
        plateau = plateau_level(curve, policy.plateau_fraction) \
            if plateau is None else plateau
        found = detect_growth_window(curve.errs, plateau, policy)
        if found is None:
            raise NoTransition(f"M={curve.M}: no growth above the plateau")
        window = found[:2]
    lo, hi = window
    t = curve.ts[lo:hi + 1]
    e = curve.errs[lo:hi + 1]
    if len(t) < 4:
        raise NoTransition(
            f"M={curve.M}: growth window has {len(t)} points, need 4")
    if np.any(t <= 0):
        raise NoTransition(f"M={curve.M}: growth window touches T=0")
    u, y = np.log(e), np.log(t)
    c, res, *_ = np.polyfit(u, y, 2, full=True)
    rms = float(np.sqrt(res[0] / len(u))) if len(res) else 0.0
    return QuadraticFit(a0=float(c[2]), a1=float(c[1]), a2=float(c[0]),
                        window=(int(lo), int(hi)),
                        t_range=(float(t[0]), float(t[-1])),
                        e_range=(float(e.min()), float(e.max())),
                        rms_residual=rms, n_points=len(t))


def _check_degenerate(fit: QuadraticFit):
    if abs(fit.a2) < 1e-12 and abs(fit.a1) < 1e-12:
        raise DegenerateFit("fitted curve is flat in ln e")


def extrapolate_to_threshold(fit: QuadraticFit, xi):
    """Trial delay at which the fitted curve reaches ``xi``."""
    _check_degenerate(fit)
    return fit.time_at(xi)


def critical_time(fit: QuadraticFit, curve: ErrorCurve, xi=1e-13):
    """
    Fitted delay at the error level of ``T = 0``.

    Falls back to ``xi`` when that level is within a factor 10 of it.

    Returns
    -------
    t : float
    extrapolated : bool
        True when the evaluation level lies outside the fitted range.
    """
    _check_degenerate(fit)
    e0 = float(curve.errs[0])
    level = xi if e0 <= 10 * xi else e0
    return fit.time_at(level), not fit.covers(level)


def _resample(solver, grid, cfg, t_lo, t_hi, n, offset):
    ts = np.geomspace(t_lo, t_hi, n)
    return sweep_delay(grid, cfg, ts, offset=offset, solver=solver)


def analyze(grid: RescaledGrid, cfg: ContinuationConfig,
            strategy="extrapolate", policy: WindowPolicy = WindowPolicy(),
            n_grid=120):
    """
    Full single-``M`` pipeline: sweep, detect, refine, fit and evaluate.

    Returns
    -------
    MEstimate
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"strategy must be one of {STRATEGIES}")
    solver = SweepSolver(grid.xs, cfg)
    offset = 2 * np.pi / cfg.b if policy.edge_offset else 0.0
    cap = max(T_MAX, 2 * np.pi * cfg.M / cfg.b)
    flags = []

    t_max = T_MAX
    curve = sweep_delay(grid, cfg, base_grid(n_grid), offset, solver)
    plateau = plateau_level(curve, policy.plateau_fraction)
    thr = policy.onset_factor * plateau
    while True:
        p = _peak(curve.errs, thr, policy.saturation)
        interior = p is not None and p < len(curve) - 1
        if interior or not policy.extend or t_max >= cap:
            break
        t_max = min(2 * t_max, cap)
        curve = sweep_delay(grid, cfg, extended_grid(n_grid, t_max), offset,
                            solver)
    if t_max > T_MAX:
        flags.append(f"sweep extended to {t_max:.6g}")
    found = detect_growth_window(curve.errs, plateau, policy)
    if found is None:
        raise NoTransition(f"M={cfg.M}: no growth above the plateau")
    lo, hi, top = found
    if hi == len(curve) - 1 and not interior:
        flags.append("saturation not reached")

    # resample around the coarse window, then once more over the monotone
    # run found on the finer samples
    t_lo = curve.ts[max(lo - 1, 1)]
    t_hi = curve.ts[min(hi + 1, len(curve) - 1)]
    fine = _resample(solver, grid, cfg, t_lo, t_hi, policy.refine, offset)
    ok = np.nonzero(fine.errs <= top)[0]
    q = int(ok[-1]) if len(ok) else len(fine) - 1
    j = _walk_down(fine.errs, q, thr)
    if q > j:
        fine = _resample(solver, grid, cfg, fine.ts[j], fine.ts[q],
                         policy.refine, offset)
    keep = (fine.errs > thr) & (fine.errs <= top)
    idx = np.nonzero(keep)[0]
    if len(idx) == 0:
        raise NoTransition(f"M={cfg.M}: empty refined growth window")
    lo, hi = int(idx[0]), int(idx[-1])
    narrowed = policy.narrowing(plateau, cfg.xi)
    if narrowed:
        k = hi - lo + 1
        cut = int(round(k * (1 - narrowed) / 2))
        lo, hi = lo + cut, hi - cut
    fit = fit_growth_region(fine, policy, window=(lo, hi))

    if strategy == "extrapolate":
        t = extrapolate_to_threshold(fit, cfg.xi)
        if not fit.covers(cfg.xi):
            flags.append("extrapolated")
    else:
        t, out = critical_time(fit, curve, cfg.xi)
        if out:
            flags.append("extrapolated")
    return MEstimate(M=cfg.M, t_scaled=t, seconds=t * grid.scale_a,
                     strategy=strategy, fit=fit, plateau=plateau,
                     narrowed=narrowed, flags=tuple(flags), curve=curve,
                     detail=fine)


def select_for_average(estimates, xi, plateau_factor=10.0, keep=0.9):
    """
    Mark which per-``M`` estimates enter the average.

    Estimates whose plateau sits within ``plateau_factor * xi`` are preferred
    (all are eligible if none qualifies); of those, the best ``keep``
    fraction by fit residual is included.
    """
    if not estimates:
        return
    eligible = [e for e in estimates if e.plateau <= plateau_factor * xi]
    if not eligible:
        eligible = list(estimates)
    n = max(1, math.ceil(keep * len(eligible)))
    best = sorted(eligible, key=lambda e: (e.fit.rms_residual, e.M))[:n]
    chosen = {id(e) for e in best}
    for e in estimates:
        e.included = id(e) in chosen


def _prepare(source, M, noise):
    resp = source(M) if callable(source) else source
    if not isinstance(resp, SampledResponse):
        raise TypeError("source must give a SampledResponse")
    if M > resp.n:
        raise ValueError(f"M={M} exceeds the {resp.n} available samples")
    grid = rescale_and_symmetrize(resp)
    if noise is not None:
        grid = add_sine_noise(grid, noise)
    return grid


def estimate_delay(source, m_list, b=2.0, xi=1e-13, formulation="real",
                   strategy="extrapolate", policy: WindowPolicy = WindowPolicy(),
                   n_grid=120, noise: NoiseSpec | None = None, parallel=1):
    """
    Delay estimates for several coefficient counts and their average.

    Parameters
    ----------
    source : SampledResponse or callable
        Either one response used for every ``M``, or ``M -> response`` to
        resample per ``M`` (e.g. with ``N = M`` points).
    m_list : sequence of int
    strategy : {"extrapolate", "critical"}
    noise : NoiseSpec, optional
        Sine perturbation added after symmetrization.
    parallel : int
        Worker threads; results do not depend on it.

    Returns
    -------
    DelayEstimate
        ``averaged`` is in seconds.
    """
    m_list = [int(m) for m in m_list]
    if not m_list:
        raise ValueError("m_list is empty")

    def one(M):
        cfg = ContinuationConfig(M, b, xi, formulation)
        try:
            return analyze(_prepare(source, M, noise), cfg, strategy, policy,
                           n_grid)
        except (NoTransition, DegenerateFit, np.linalg.LinAlgError,
                RuntimeError) as exc:
            return exc

    if parallel > 1:
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(one, m_list))
    else:
        results = [one(M) for M in m_list]

    per_m, failures = [], {}
    for M, r in zip(m_list, results):
        if isinstance(r, Exception):
            failures[M] = f"{type(r).__name__}: {r}"
        else:
            per_m.append(r)
    if not per_m:
        raise AllFailed("; ".join(f"M={m}: {v}" for m, v in failures.items()))
    select_for_average(per_m, xi)
    avg = float(np.mean([e.seconds for e in per_m if e.included]))
    return DelayEstimate(per_m, avg, strategy, failures)
