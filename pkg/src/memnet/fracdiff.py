"""Fractional differencing: filter coefficients and the autocovariances of
fractionally integrated white noise (FIWN).

Memory exponents d live in [0, 1/2) componentwise; model fitting uses the
open interval (0, 1/2) and d = 0 entries appear only as padding in the
companion-form reduction of higher-order models. Every gamma evaluation
goes through log-gamma; large-lag values use a stable ratio recursion.
"""
from __future__ import annotations

import numpy as np
from scipy.special import gammaln

from .errors import NonPositiveVariance, ValidationError


def validate_memory(d, allow_zero: bool = True) -> np.ndarray:
    """Check a memory vector and return it as a float array."""
    d = np.atleast_1d(np.asarray(d, dtype=float))
    if d.ndim != 1:
        raise ValidationError("memory vector must be one-dimensional")
    lo = 0.0 if allow_zero else np.nextafter(0.0, 1.0)
    if np.any(d < lo) or np.any(d >= 0.5):
        raise ValidationError("memory exponents must lie in [0, 1/2)"
                              if allow_zero else "memory exponents must lie in (0, 1/2)")
    return d


def frac_coeffs(d, J: int) -> np.ndarray:
    """Coefficients of the differencing filter (1 - L)^d, per node.

    Returns an (N, J + 1) array ``pi`` with ``pi[:, 0] = 1`` and
    ``pi[:, j] = pi[:, j-1] * (j - 1 - d) / j``. For d in (0, 1/2) all
    coefficients beyond lag 0 are negative.
    """
    if J < 1:
        raise ValidationError("J must be >= 1")
    d = validate_memory(d)
    j = np.arange(1, J + 1)
    factors = (j[None, :] - 1.0 - d[:, None]) / j[None, :]
    out = np.empty((d.size, J + 1))
    out[:, 0] = 1.0
    out[:, 1:] = np.cumprod(factors, axis=1)
    return out


def frac_integ_coeffs(d, J: int) -> np.ndarray:
    """Coefficients of the integration filter (1 - L)^(-d), per node.

    (N, J + 1) array ``psi`` with ``psi[:, 0] = 1`` and
    ``psi[:, j] = psi[:, j-1] * (j - 1 + d) / j``.
    """
    if J < 1:
        raise ValidationError("J must be >= 1")
    d = validate_memory(d)
    j = np.arange(1, J + 1)
    factors = (j[None, :] - 1.0 + d[:, None]) / j[None, :]
    out = np.empty((d.size, J + 1))
    out[:, 0] = 1.0
    out[:, 1:] = np.cumprod(factors, axis=1)
    return out


def _phi_zero(d: np.ndarray) -> np.ndarray:
    """Matrix of lag-0 values G(1-di-dk) / (G(1-di) G(1-dk))."""
    di = d[:, None]
    dk = d[None, :]
    return np.exp(gammaln(1.0 - di - dk) - gammaln(1.0 - di) - gammaln(1.0 - dk))


def fiwn_cross_acv(d, i: int, k: int, h: int) -> float:
    """Cross-autocovariance kernel of unit-noise fractional integration.

    For the pair of processes U_a = (1-L)^(-d_a) e driven by the same unit
    white noise, returns, for h >= 0,

        G(1-d_i-d_k) G(h+d_k) / [G(d_k) G(1-d_k) G(h+1-d_i)],

    and the index-swapped value at -h for h < 0. Nodes are 1-indexed.
    Uses log-gamma at lag 0 or 1 and the exact gamma recurrence
    ``phi(h) = phi(h-1) (h-1+d_k) / (h-d_i)`` beyond, which is stable for
    arbitrarily large h.
    """
    d = validate_memory(d)
    if h < 0:
        i, k, h = k, i, -h
    di, dk = d[i - 1], d[k - 1]
    if di + dk >= 1.0:
        raise ValidationError("d_i + d_k must be < 1")
    val = float(np.exp(gammaln(1.0 - di - dk) - gammaln(1.0 - di) - gammaln(1.0 - dk)))
    if h == 0:
        return val
    if dk == 0.0:
        return 0.0
    if h <= 4096:
        for m in range(1, h + 1):
            val *= (m - 1.0 + dk) / (m - di)
        return val
    # long lags: exactly-rounded compensated summation of the log ratios
    # keeps the recursion within ~1e-15 of the direct log-gamma value
    import math

    logs = math.fsum(math.log((m - 1.0 + dk) / (m - di)) for m in range(1, h + 1))
    return val * math.exp(logs)


def fiwn_cross_acv_direct(d, i: int, k: int, h: int) -> float:
    """Single log-gamma evaluation of the same kernel (h >= 1); used to
    cross-check the ratio recursion."""
    d = validate_memory(d)
    di, dk = d[i - 1], d[k - 1]
    if dk == 0.0:
        return 0.0
    return float(np.exp(gammaln(1.0 - di - dk) + gammaln(h + dk)
                        - gammaln(dk) - gammaln(1.0 - dk) - gammaln(h + 1.0 - di)))


def cross_kernel(d, h_max: int) -> np.ndarray:
    """Stack of kernel matrices K(h) for h = 0..h_max, oriented so that
    ``K(h)[i, k] = Cov(U_{i,t+h}, U_{k,t})`` for shared unit noise.

    Negative lags follow from ``K(-h) = K(h).T``. In terms of
    :func:`fiwn_cross_acv` this is the index-transposed table; the
    orientation here matches autocovariances defined as
    ``Cov(X_{t+h}, X_t)``.
    """
    d = validate_memory(d)
    n = d.size
    out = np.empty((h_max + 1, n, n))
    out[0] = _phi_zero(d)
    if h_max == 0:
        return out
    # Cov(U_{i,t+h}, U_{k,t}) ratio: (h-1+d_i) / (h-d_k)
    h = np.arange(1, h_max + 1)[:, None, None]
    ratios = (h - 1.0 + d[None, :, None]) / (h - d[None, None, :])
    np.cumprod(ratios, axis=0, out=ratios)
    np.multiply(ratios, out[0][None], out=out[1:])
    return out


def fiwn_acv_matrix(d, sigma2, h: int) -> np.ndarray:
    """FIWN autocovariance eta(h) = Sigma_eps (*) phi(h) with diagonal noise.

    With independent per-node innovations the Hadamard product leaves only
    the diagonal: ``eta(h)[i, i] = sigma2[i] * phi_ii(h)``.
    """
    d = validate_memory(d)
    sigma2 = np.atleast_1d(np.asarray(sigma2, dtype=float))
    if sigma2.shape != d.shape:
        raise ValidationError("sigma2 must match the memory vector length")
    if np.any(sigma2 <= 0):
        raise NonPositiveVariance("noise variances must be positive")
    diag = np.array([fiwn_cross_acv(d, i, i, h) for i in range(1, d.size + 1)])
    return np.diag(sigma2 * diag)


def fiwn_diag_acv(d, sigma2, h_max: int) -> np.ndarray:
    """Per-node FIWN autocovariances, shape (N, h_max + 1); row i holds
    sigma2[i] * phi_ii(h) for h = 0..h_max."""
    d = validate_memory(d)
    sigma2 = np.atleast_1d(np.asarray(sigma2, dtype=float))
    if np.any(sigma2 <= 0):
        raise NonPositiveVariance("noise variances must be positive")
    n = d.size
    out = np.empty((n, h_max + 1))
    out[:, 0] = np.exp(gammaln(1.0 - 2 * d) - 2 * gammaln(1.0 - d))
    if h_max >= 1:
        h = np.arange(1, h_max + 1)
        ratios = (h[None, :] - 1.0 + d[:, None]) / (h[None, :] - d[:, None])
        out[:, 1:] = out[:, :1] * np.cumprod(ratios, axis=1)
    return sigma2[:, None] * out
