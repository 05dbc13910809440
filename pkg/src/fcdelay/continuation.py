"""
Causal Fourier continuation by truncated-SVD least squares.

A causal continuation of ``H(x)`` on ``[-0.5, 0.5]`` is a Fourier series with
period ``b`` built only from ``phi_k(x) = exp(-2 pi i k x / b)``, ``k >= 1``.
Those functions are eigenfunctions of the periodic Hilbert transform, so any
such series satisfies the dispersion relations by construction. The size of
the residual left on the data is therefore a measure of non-causality.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .spectrum import RescaledGrid

FORMULATIONS = ("real", "complex")


class SvdError(RuntimeError):
    """Raised when no LAPACK driver manages to factor the design matrix."""


@dataclass(frozen=True)
class ContinuationConfig:
    """
    Parameters
    ----------
    M : int
        Number of Fourier coefficients.
    b : float
        Period of the continuation, ``1 < b <= 4``.
    xi : float
        Relative singular value cutoff.
    formulation : {"real", "complex"}
    """

    M: int
    b: float = 2.0
    xi: float = 1e-13
    formulation: str = "real"

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 1:
            raise ValueError("M must be a positive integer")
        if not 1.0 < self.b <= 4.0:
            raise ValueError("b must lie in (1, 4]")
        if not 0.0 < self.xi < 1.0:
            raise ValueError("xi must lie in (0, 1)")
        if self.formulation not in FORMULATIONS:
            raise ValueError(f"formulation must be one of {FORMULATIONS}")


@dataclass
class SvdInfo:
    """
    Diagnostics of one truncated-SVD solve.

    ``Lambda1`` and ``Lambda2`` stay NaN until :func:`bound_constants` has
    been applied; :func:`build_continuation` fills them.
    """

    singular_values: np.ndarray
    K: int
    residual_norm: float
    n_points: int = 0
    Lambda1: float = float("nan")
    Lambda2: float = float("nan")
    lambda1_empty: bool = False
    max_discarded_imag: float = 0.0
    vt: np.ndarray | None = field(default=None, repr=False)

    @property
    def kept(self):
        return len(self.singular_values) - self.K


@dataclass(frozen=True)
class CausalContinuation:
    alphas: np.ndarray
    b: float
    scale_a: float = 1.0

    @property
    def M(self):
        return len(self.alphas)

    def __call__(self, xs):
        return evaluate_continuation(self, xs)


@dataclass(frozen=True)
class ErrorSample:
    err_re_inf: float
    err_im_inf: float
    err_re_l2: float
    err_im_l2: float
    pointwise_re: np.ndarray = field(repr=False)
    pointwise_im: np.ndarray = field(repr=False)


def basis(xs, M, b, k0=1):
    """Complex matrix ``phi_k(x_j)`` for ``k = k0 .. k0 + M - 1``."""
    k = np.arange(k0, k0 + M)
    return np.exp(-2j * np.pi * np.outer(np.asarray(xs, dtype=float), k) / b)


def assemble_system(grid: RescaledGrid, cfg: ContinuationConfig):
    """
    Design matrix and right-hand side for the continuation of ``grid``.

    The real formulation stacks real and imaginary parts, giving a
    ``2N x M`` real system whose least-squares solution is exactly real.
    """
    if grid.n_points < cfg.M:
        raise ValueError(
            f"underdetermined system: {grid.n_points} points for M={cfg.M}")
    A = basis(grid.xs, cfg.M, cfg.b)
    h = grid.values
    if cfg.formulation == "complex":
        return A, h.copy()
    return np.vstack([A.real, A.imag]), np.concatenate([h.real, h.imag])


def svd(matrix):
    """
    Thin SVD, retrying with the slower but more robust ``gesvd`` driver.
    """
    try:
        return np.linalg.svd(matrix, full_matrices=False)
    except np.linalg.LinAlgError:
        pass
    try:
        return scipy.linalg.svd(matrix, full_matrices=False,
                                lapack_driver="gesvd")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SvdError(
            f"SVD failed to converge for a {matrix.shape[0]}x{matrix.shape[1]}"
            f" matrix (finite entries: {bool(np.isfinite(matrix).all())})"
        ) from exc


def cutoff_rank(s, xi):
    """Number of singular values kept under the relative cutoff."""
    if len(s) == 0 or s[0] == 0:
        return 0
    return int(np.count_nonzero(s >= xi * s[0]))


def truncated_svd_solve(matrix, rhs, xi):
    """
    Least-squares solve discarding singular directions with
    ``sigma_j < xi * sigma_max``.

    Returns
    -------
    coeffs : ndarray
    info : SvdInfo
    """
    U, s, Vt = svd(matrix)
    r = cutoff_rank(s, xi)
    coeffs = Vt[:r].conj().T @ ((U[:, :r].conj().T @ rhs) / s[:r])
    resid = float(np.linalg.norm(matrix @ coeffs - rhs))
    info = SvdInfo(singular_values=s, K=len(s) - r, residual_norm=resid,
                   n_points=matrix.shape[0], vt=Vt)
    return coeffs, info


def gram_matrix(M, b, intervals):
    """
    Inner products ``G[k, m] = integral of phi_k conj(phi_m)`` over a union
    of intervals, in closed form.
    """
    k = np.arange(1, M + 1)
    om = 2 * np.pi * (k[:, None] - k[None, :]) / b
    G = np.zeros((M, M), dtype=complex)
    diag = om == 0
    safe = np.where(diag, 1.0, om)
    for lo, hi in intervals:
        part = (np.exp(-1j * safe * lo) - np.exp(-1j * safe * hi)) / (1j * safe)
        G += np.where(diag, hi - lo, part)
    return G


def basis_norms(vt, b, intervals):
    """``L2`` norms over the intervals of ``v_j(x) = sum_k V[k, j] phi_k(x)``."""
    G = gram_matrix(vt.shape[1], b, intervals)
    sq = np.sum((vt.conj() @ G) * vt, axis=1).real
    return np.sqrt(np.maximum(sq, 0.0))


def bound_constants(info: SvdInfo, cfg: ContinuationConfig, omega):
    """
    Error bound constants of the truncated continuation.

    Parameters
    ----------
    info : SvdInfo
        Must hold the right singular vectors.
    cfg : ContinuationConfig
    omega : list of (lo, hi)
        The sampled sub-domain of ``[-0.5, 0.5]``.

    Returns
    -------
    Lambda1, Lambda2, K
        ``Lambda1`` is the largest norm among discarded directions (0 with
        ``info.lambda1_empty`` set when none is discarded) and ``Lambda2``
        the largest ``||v_j|| / sigma_j`` among kept ones.
    """
    if info.vt is None:
        raise ValueError("SVD factors were not retained")
    norms = basis_norms(info.vt, cfg.b, omega)
    s = info.singular_values
    r = info.kept
    info.lambda1_empty = info.K == 0
    info.Lambda1 = float(norms[r:].max()) if info.K else 0.0
    info.Lambda2 = float((norms[:r] / s[:r]).max()) if r else 0.0
    return info.Lambda1, info.Lambda2, info.K


def build_continuation(grid: RescaledGrid, cfg: ContinuationConfig,
                       constants=True):
    """
    Causal continuation of ``grid`` together with its SVD diagnostics.
    """
    A, rhs = assemble_system(grid, cfg)
    coeffs, info = truncated_svd_solve(A, rhs, cfg.xi)
    if cfg.formulation == "complex":
        info.max_discarded_imag = float(np.abs(coeffs.imag).max())
        coeffs = coeffs.real.copy()
    if constants:
        bound_constants(info, cfg, grid.intervals())
    return CausalContinuation(coeffs, cfg.b, grid.scale_a), info


def evaluate_continuation(cont: CausalContinuation, xs):
    """``sum_k alpha_k phi_k(x)`` at each point of ``xs``."""
    xs = np.asarray(xs, dtype=float)
    vals = basis(xs.ravel(), cont.M, cont.b) @ cont.alphas.astype(complex)
    return vals.reshape(xs.shape) if xs.ndim else complex(vals[0])


def reconstruction_error(grid: RescaledGrid, cont: CausalContinuation):
    d = grid.values - evaluate_continuation(cont, grid.xs)
    return ErrorSample(
        err_re_inf=float(np.abs(d.real).max()),
        err_im_inf=float(np.abs(d.imag).max()),
        err_re_l2=float(np.linalg.norm(d.real)),
        err_im_l2=float(np.linalg.norm(d.imag)),
        pointwise_re=d.real,
        pointwise_im=d.imag,
    )


def error_budget(info: SvdInfo, cfg: ContinuationConfig, noise_inf,
                 cont: CausalContinuation, omega=None, n_dense=None):
    """
    Terms of the a-priori error bound.

    Returns
    -------
    eps_F_factor : float
        Amplification ``1 + Lambda2 sqrt(2N(M-K))`` of the unknown
        approximation error.
    eps_T : float
        Contribution of the discarded singular directions, with the
        continuation itself standing in for the best approximant.
    eps_n : float
        Amplified data noise.
    """
    if np.isnan(info.Lambda2):
        bound_constants(info, cfg, omega or [(-0.5, 0.5)])
    n = (info.n_points // 2 if cfg.formulation == "real" else info.n_points)
    n_orig = (n + 1) // 2
    factor = 1.0 + info.Lambda2 * np.sqrt(2 * n_orig * (cfg.M - info.K))
    eps_n = factor * noise_inf
    if info.K == 0:
        return factor, 0.0, eps_n
    n_dense = n_dense or 8 * cfg.M
    xd = np.linspace(-cfg.b / 2, cfg.b / 2, n_dense)
    inside = np.zeros(n_dense, dtype=bool)
    for lo, hi in (omega or [(-0.5, 0.5)]):
        inside |= (xd >= lo) & (xd <= hi)
    outside = xd[~inside]
    sup = float(np.abs(evaluate_continuation(cont, outside)).max()) \
        if len(outside) else 0.0
    eps_t = info.Lambda1 * np.sqrt(info.K / cfg.b) * sup
    return factor, eps_t, eps_n


class SweepSolver:
    """
    Reusable factorization for many right-hand sides on one grid.

    The design matrix does not depend on the data, so a delay sweep needs a
    single SVD per ``M``; each trial delay then costs two matrix products.
    Errors agree with :func:`build_continuation` followed by
    :func:`reconstruction_error` up to rounding.
    """

    def __init__(self, xs, cfg: ContinuationConfig):
        self.xs = np.asarray(xs, dtype=float)
        self.cfg = cfg
        A = basis(self.xs, cfg.M, cfg.b)
        if cfg.formulation == "real":
            A = np.vstack([A.real, A.imag])
        U, s, Vt = svd(A)
        r = cutoff_rank(s, cfg.xi)
        self.singular_values = s
        self.U = U[:, :r]
        if cfg.formulation == "complex":
            self._A = A
            self._pinv = Vt[:r].conj().T / s[:r]

    def errors(self, values, weights=None):
        """
        Reconstruction errors for each column of ``values``.

        Returns
        -------
        err_re, err_im : ndarray
            Infinity norms per column.
        err_rel : ndarray or None
            Infinity norm of the real-part error scaled by ``weights``.
        """
        v = np.asarray(values, dtype=complex)
        if v.ndim == 1:
            v = v[:, None]
        n = len(self.xs)
        if self.cfg.formulation == "real":
            R = np.vstack([v.real, v.imag])
            r = R - self.U @ (self.U.T @ R)
            re, im = r[:n], r[n:]
        else:
            alphas = (self._pinv @ (self.U.conj().T @ v)).real
            d = v - self._A @ alphas
            re, im = d.real, d.imag
        rel = None
        if weights is not None:
            rel = np.abs(re * np.asarray(weights)[:, None]).max(axis=0)
        return np.abs(re).max(axis=0), np.abs(im).max(axis=0), rel
