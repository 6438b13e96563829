"""Model-implied autocovariance sequences.

The lag convention throughout is ``Omega(h) = Cov(X_{t+h}, X_t)``, so
``Omega(-h) = Omega(h)^T`` and the stacked covariance with block (t, s)
equal to ``Omega(t - s)`` is symmetric.

The long-memory autocovariance of the fractionally-integrated process is
the elementwise (Hadamard) convolution of the short-memory autocovariance
with the FIWN cross kernel; the noise-first ordering instead resums powers
of the AR matrix against the FIWN autocovariance through the
eigendecomposition of the companion matrix.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.fft import next_fast_len

from .errors import (
    DimensionMismatch,
    NearDefective,
    NonPositiveVariance,
    NotStationary,
    NumericalError,
    ValidationError,
)
from .fracdiff import cross_kernel, fiwn_diag_acv, validate_memory

_STATIONARITY_EPS = 1e-8


@dataclass(frozen=True)
class AutocovSequence:
    """Lag-indexed autocovariance matrices Omega(0..H); negative lags are
    implied by transposition. ``m_trunc`` reports where a truncated
    construction zeroed its tail (None when not applicable)."""

    gammas: np.ndarray  # (H + 1, N, N)
    m_trunc: int = None

    def __post_init__(self):
        g = np.asarray(self.gammas, dtype=float)
        if g.ndim != 3 or g.shape[1] != g.shape[2]:
            raise DimensionMismatch("gammas must be (H + 1, N, N)")
        if not np.all(np.isfinite(g)):
            raise ValidationError("autocovariances must be finite")
        object.__setattr__(self, "gammas", g)

    @property
    def dim(self):
        return self.gammas.shape[1]

    @property
    def max_lag(self):
        return self.gammas.shape[0] - 1

    def at(self, h: int) -> np.ndarray:
        """Omega(h) for |h| <= max_lag."""
        if abs(h) > self.max_lag:
            raise ValidationError(f"lag {h} beyond stored maximum {self.max_lag}")
        return self.gammas[h] if h >= 0 else self.gammas[-h].T

    def dense(self, t: int) -> np.ndarray:
        """Dense (N t x N t) covariance under node-major stacking: entry
        ((i, u), (k, v)) equals Omega(u - v)[i, k]. Intended for small t
        (oracles, exact draws)."""
        if t - 1 > self.max_lag:
            raise ValidationError(f"need lags up to {t - 1}, have {self.max_lag}")
        n = self.dim
        idx = np.arange(t)
        lag = idx[:, None] - idx[None, :]  # (t, t)
        # two-sided table: lag -> matrix, index shifted by max_lag
        two = np.concatenate([self.gammas[::-1].transpose(0, 2, 1)[:-1], self.gammas])
        blocks = two[lag + self.max_lag]  # (t, t, n, n)
        return blocks.transpose(2, 0, 3, 1).reshape(n * t, n * t)


def _spectral_radius(f: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(f))))


def _lyapunov(f: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Solve G = F G F^T + Q; direct vectorised solve for small systems,
    squaring iteration otherwise."""
    m = f.shape[0]
    if m <= 64:
        a = np.eye(m * m) - np.kron(f, f)
        g = np.linalg.solve(a, q.reshape(-1)).reshape(m, m)
        return 0.5 * (g + g.T)
    g, p = q.copy(), f.copy()
    for _ in range(200):
        step = p @ g @ p.T
        g += step
        if np.max(np.abs(step)) < 1e-16 * max(1.0, np.max(np.abs(g))):
            break
        p = p @ p
    return 0.5 * (g + g.T)


def var_autocov(matrices, sigma2, max_lag: int, trunc_tol: float = 1e-12,
                lag_cap: int = 200000) -> AutocovSequence:
    """Autocovariances of X_t = sum_j A_j X_{t-j} + e_t with diagonal noise.

    ``max_lag=None`` runs until the decay cutoff alone. Lags past the
    cutoff (largest entry below ``trunc_tol`` times the lag-0 maximum) are
    zeroed; the cutoff index is reported as ``m_trunc``.
    """
    mats = [np.asarray(m, dtype=float) for m in matrices]
    n = mats[0].shape[0]
    p = len(mats)
    sigma2 = np.atleast_1d(np.asarray(sigma2, dtype=float))
    if sigma2.size != n:
        raise DimensionMismatch("sigma2 must have one entry per node")
    if np.any(sigma2 <= 0):
        raise NonPositiveVariance("noise variances must be positive")

    from .gnar import companion_matrix  # local import to keep module layering one-way

    f = companion_matrix(mats)
    rho = _spectral_radius(f)
    if rho >= 1.0 - _STATIONARITY_EPS:
        raise NotStationary(f"companion spectral radius {rho:.6f} too close to one")

    q = np.zeros_like(f)
    q[:n, :n] = np.diag(sigma2)
    gamma_y = _lyapunov(f, q)

    xi0 = gamma_y[:n, :n]
    scale = np.max(np.abs(xi0))
    out = [0.5 * (xi0 + xi0.T)]
    m_trunc = 0
    g = gamma_y
    h = 0
    limit = lag_cap if max_lag is None else max(max_lag, 0)
    while h < limit:
        h += 1
        g = f @ g
        xi = g[:n, :n]
        if np.max(np.abs(xi)) < trunc_tol * scale:
            m_trunc = h - 1
            break
        out.append(xi.copy())
    else:
        m_trunc = h
    if max_lag is not None and len(out) < max_lag + 1:
        out.extend([np.zeros((n, n))] * (max_lag + 1 - len(out)))
    gammas = np.stack(out if max_lag is None else out[:max_lag + 1])
    return AutocovSequence(gammas=gammas, m_trunc=m_trunc)


def _filter_list(filters):
    return [np.asarray(m, dtype=float) for m in getattr(filters, "matrices", filters)]


def _cached(cache, key, build):
    if cache is None:
        return build()
    hit = cache.get(key)
    if hit is None:
        hit = build()
        if len(cache) > 32:
            cache.clear()
        cache[key] = hit
    return hit


def fignar_acv(filters, d, sigma2, max_lag: int, trunc_tol: float = 1e-12,
               cache: dict = None) -> AutocovSequence:
    """Autocovariance of fractional integration applied to the network
    process: ``Omega(h)[i,k] = sum_m xi(m)[i,k] * phi_ik(h - m)``, the
    two-sided sum running over the lags where the short-memory
    autocovariance xi survives truncation.

    ``cache`` (a mutable dict) memoises the short-memory sequence and the
    cross kernel across calls that vary only part of the parameters, as
    finite-difference gradients do.
    """
    d = validate_memory(d)
    mats = _filter_list(filters)
    sig = np.atleast_1d(np.asarray(sigma2, dtype=float))
    xi_key = ("xi", b"".join(a.tobytes() for a in mats), sig.tobytes(), trunc_tol)
    short = _cached(cache, xi_key,
                    lambda: var_autocov(mats, sig, None, trunc_tol=trunc_tol))
    m = short.max_lag
    xi_two = np.concatenate([short.gammas[::-1].transpose(0, 2, 1)[:-1], short.gammas])

    ker_key = ("ker", d.tobytes(), max_lag + m)
    ker_pos = _cached(cache, ker_key, lambda: cross_kernel(d, max_lag + m))
    ker = np.concatenate([ker_pos[::-1].transpose(0, 2, 1)[:-1], ker_pos])

    # elementwise-lagwise FFT convolution, lag axis last for contiguity
    n_full = xi_two.shape[0] + ker.shape[0] - 1
    n_fft = next_fast_len(n_full, real=True)
    xh = np.fft.rfft(xi_two.transpose(1, 2, 0), n=n_fft, axis=-1)
    kh = np.fft.rfft(ker.transpose(1, 2, 0), n=n_fft, axis=-1)
    conv = np.fft.irfft(xh * kh, n=n_fft, axis=-1)[..., :n_full].transpose(2, 0, 1)
    centre = 2 * m + max_lag  # index of lag zero in the full convolution
    pos = conv[centre:centre + max_lag + 1]
    neg = conv[centre - max_lag:centre + 1][::-1].transpose(0, 2, 1)
    gammas = 0.5 * (pos + neg)
    return AutocovSequence(gammas=gammas, m_trunc=short.m_trunc)


def companion_reduce(filters, d):
    """Stack an order-p filter into VAR(1) form and pad the memory vector
    with zeros for the companion slots. Identity for p = 1."""
    mats = _filter_list(filters)
    d = validate_memory(d)
    p = len(mats)
    n = mats[0].shape[0]
    if p == 1:
        return [mats[0]], d
    from .gnar import companion_matrix

    f = companion_matrix(mats)
    d_pad = np.concatenate([d, np.zeros(n * (p - 1))])
    return [f], d_pad


def gnarfi_acv(filters, d, sigma2, max_lag: int, trunc_tol: float = 1e-12,
               cond_max: float = 1e8) -> AutocovSequence:
    """Autocovariance of the network process driven by FIWN noise.

    The order-p case is reduced to companion form first. With
    ``A = V Lam V^H`` the double power series in A against the FIWN
    autocovariance eta is resummed per eigen-pair with a geometric tail
    bound below ``trunc_tol``; the result is conjugated back by V, the
    imaginary residue checked and discarded, and each lag pair
    real-symmetrised.
    """
    d = validate_memory(d)
    mats = _filter_list(filters)
    n = mats[0].shape[0]
    sigma2 = np.atleast_1d(np.asarray(sigma2, dtype=float))
    if np.any(sigma2 <= 0):
        raise NonPositiveVariance("noise variances must be positive")

    red, d_pad = companion_reduce(mats, d)
    a = red[0]
    m = a.shape[0]
    rho = _spectral_radius(a)
    if rho >= 1.0 - _STATIONARITY_EPS:
        raise NotStationary(f"AR spectral radius {rho:.6f} too close to one")

    lam, v = np.linalg.eig(a)
    if np.linalg.cond(v) > cond_max:
        raise NearDefective(
            f"eigenvector condition number exceeds {cond_max:.1e}")
    vinv = np.linalg.inv(v)

    if rho < 1e-300:
        k_tail = 0
    else:
        k_tail = min(int(np.ceil(np.log(trunc_tol) / np.log(rho))) + 8, 200000)

    h_hi = max_lag + k_tail
    # FIWN autocovariance of the padded system is diagonal with zero rows
    # on the companion slots; rows 1..N carry the per-node FIWN acv.
    diag_pos = np.zeros((m, h_hi + 1))
    diag_pos[:n] = fiwn_diag_acv(d, sigma2, h_hi)
    # eta is symmetric per lag here (diagonal), so a one-sided table suffices.
    grid = np.concatenate([diag_pos[:, ::-1][:, :-1], diag_pos], axis=1)  # (m, 2*h_hi+1)
    g0 = h_hi  # grid index of lag zero

    vinv_h = vinv.conj().T
    # eta_tilde(g) = Vinv diag(grid[:, g]) Vinv^H for every grid lag
    eta_t = np.einsum("ab,bg,bc->gac", vinv, grid, vinv_h, optimize=True)

    glen = eta_t.shape[0]
    lam_row = lam[:, None]
    lam_col_c = lam.conj()[None, :]
    denom = 1.0 - lam_row * lam_col_c

    # P(h) = sum_{k>=0} lam_a^k eta_t(h-k): forward recursion from the grid base
    p_acc = np.empty_like(eta_t)
    p_acc[0] = eta_t[0]
    for g in range(1, glen):
        p_acc[g] = lam_row * p_acc[g - 1] + eta_t[g]
    # Q(h) = sum_{k>=1} conj(lam_b)^k eta_t(h+k): backward recursion
    q_acc = np.empty_like(eta_t)
    q_acc[-1] = 0.0
    for g in range(glen - 2, -1, -1):
        q_acc[g] = lam_col_c * (q_acc[g + 1] + eta_t[g + 1])

    lo, hi = g0 - max_lag, g0 + max_lag
    t_mid = (p_acc[lo:hi + 1] + q_acc[lo:hi + 1]) / denom
    omega = v[None] @ t_mid @ v.conj().T[None]

    resid = np.max(np.abs(omega.imag))
    ref = max(1.0, np.max(np.abs(omega.real)))
    if resid >= 1e-8 * ref:
        raise NumericalError(f"imaginary residue {resid:.2e} too large")
    omega = omega.real[:, :n, :n]

    centre = max_lag
    pos = omega[centre:]
    neg = omega[:centre + 1][::-1].transpose(0, 2, 1)
    gammas = 0.5 * (pos + neg)
    return AutocovSequence(gammas=gammas, m_trunc=k_tail)
