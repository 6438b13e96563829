"""Network-autoregressive filter matrices, stationarity, short-memory
autocovariances and a least-squares fitter.

Sign convention: parameters keep their natural autoregressive meaning,
``X_t = sum_j A_j X_{t-j} + eps_t`` with ``A_j = diag(alpha_j) +
sum_{c} sum_{r<=s_j} beta_{j,r,c} W^{(r,c)}``; the lag operator applied to
X is therefore ``I - sum_j A_j L^j``. Node-wise this matches the model's
defining per-node regression displays.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autocov import AutocovSequence, var_autocov
from .errors import DimensionMismatch, InsufficientData, SingularDesign, ValidationError
from .network import Graph, WeightMatrices, build_neighbour_stages, compute_weights


@dataclass(frozen=True)
class GnarOrder:
    """Autoregressive order p, neighbour stages s (one per lag) and the
    covariate count C."""

    p: int
    s: tuple
    C: int = 1

    def __post_init__(self):
        if self.p < 1:
            raise ValidationError("p must be >= 1")
        s = tuple(int(v) for v in self.s)
        if len(s) != self.p or any(v < 0 for v in s):
            raise ValidationError("s must hold one nonnegative stage per lag")
        if self.C < 1:
            raise ValidationError("C must be >= 1")
        object.__setattr__(self, "s", s)

    @property
    def max_stage(self):
        return max(self.s)

    @property
    def num_beta(self):
        return self.C * sum(self.s)


@dataclass(frozen=True)
class GnarParams:
    """AR coefficients: ``alpha`` is (p,) in global mode or (N, p) in
    individual mode; ``beta[j]`` is an (s_j, C) array for lag j+1."""

    alpha: np.ndarray
    beta: tuple

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float)
        if alpha.ndim not in (1, 2):
            raise DimensionMismatch("alpha must be (p,) or (N, p)")
        beta = tuple(np.asarray(b, dtype=float).reshape(np.asarray(b).shape[0], -1)
                     if np.asarray(b).size else np.zeros((0, 1))
                     for b in self.beta)
        if not np.all(np.isfinite(alpha)) or any(not np.all(np.isfinite(b)) for b in beta):
            raise ValidationError("parameters must be finite")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    @property
    def alpha_mode(self):
        return "global" if self.alpha.ndim == 1 else "individual"

    @property
    def p(self):
        return self.alpha.shape[-1]

    def alpha_by_node(self, n: int) -> np.ndarray:
        """(N, p) view of alpha, broadcasting the global case."""
        if self.alpha.ndim == 1:
            return np.broadcast_to(self.alpha, (n, self.alpha.size))
        if self.alpha.shape[0] != n:
            raise DimensionMismatch("alpha rows do not match the node count")
        return self.alpha


@dataclass(frozen=True)
class FilterMatrices:
    """The lag matrices A_1..A_p of the network filter."""

    matrices: tuple

    def __post_init__(self):
        mats = tuple(np.asarray(m, dtype=float) for m in self.matrices)
        n = mats[0].shape[0]
        if any(m.shape != (n, n) for m in mats):
            raise DimensionMismatch("all filter matrices must be square of equal size")
        object.__setattr__(self, "matrices", mats)

    @property
    def p(self):
        return len(self.matrices)

    @property
    def num_nodes(self):
        return self.matrices[0].shape[0]

    def __iter__(self):
        return iter(self.matrices)

    def __getitem__(self, j):
        return self.matrices[j]


def build_filter_matrices(params: GnarParams, weights: WeightMatrices,
                          order: GnarOrder) -> FilterMatrices:
    """Assemble A_j = diag(alpha_j) + sum_c sum_{r<=s_j} beta_{j,r,c} W^(r,c)."""
    n = weights.num_nodes
    alpha = params.alpha_by_node(n)
    if alpha.shape[1] != order.p or len(params.beta) != order.p:
        raise DimensionMismatch("parameter lags do not match the order")
    if weights.max_stage < order.max_stage:
        raise DimensionMismatch(
            f"weights cover stages up to {weights.max_stage}, order needs {order.max_stage}")
    mats = []
    for j in range(order.p):
        bj = params.beta[j]
        if bj.shape != (order.s[j], order.C):
            raise DimensionMismatch(f"beta[{j}] must be ({order.s[j]}, {order.C})")
        a = np.diag(alpha[:, j]).astype(float)
        for r in range(1, order.s[j] + 1):
            for c in range(1, order.C + 1):
                a += bj[r - 1, c - 1] * weights.stage_matrix(r, c)
        mats.append(a)
    return FilterMatrices(tuple(mats))


def filters_from_graph(params: GnarParams, graph: Graph, order: GnarOrder,
                       scheme: str = "equal") -> FilterMatrices:
    """Convenience: neighbour stages + weights + filter assembly in one go."""
    max_stage = max(1, order.max_stage)
    ns = build_neighbour_stages(graph, max_stage)
    w = compute_weights(ns, scheme, graph, num_covariates=order.C)
    return build_filter_matrices(params, w, order)


def stationarity_margin(params: GnarParams, order: GnarOrder, n: int = None) -> np.ndarray:
    """Per-node value of sum_j (|alpha_{i,j}| + sum_{c,r} |beta_{j,r,c}|);
    strictly below one is sufficient for stationarity."""
    if n is None:
        n = params.alpha.shape[0] if params.alpha.ndim == 2 else 1
    alpha = params.alpha_by_node(n)
    beta_total = sum(float(np.abs(b).sum()) for b in params.beta)
    return np.abs(alpha).sum(axis=1) + beta_total


def check_stationarity(params: GnarParams, order: GnarOrder, n: int = None) -> bool:
    """True iff every node's coefficient-magnitude sum is strictly < 1."""
    return bool(np.all(stationarity_margin(params, order, n) < 1.0))


def companion_matrix(filters) -> np.ndarray:
    """Stacked VAR(1) companion of the lag matrices."""
    mats = list(getattr(filters, "matrices", filters))
    n = mats[0].shape[0]
    p = len(mats)
    if p == 1:
        return np.asarray(mats[0], dtype=float)
    f = np.zeros((n * p, n * p))
    f[:n] = np.hstack(mats)
    f[n:, :-n] = np.eye(n * (p - 1))
    return f


def gnar_acv(filters, sigma2, max_lag: int, trunc_tol: float = 1e-12) -> AutocovSequence:
    """Autocovariances of the short-memory network process.

    Lag zero solves the companion-form Lyapunov equation; higher lags
    follow the companion recursion. Lags whose largest entry falls below
    ``trunc_tol`` relative to the lag-0 maximum are zeroed and the cutoff
    is reported on the result.
    """
    return var_autocov(getattr(filters, "matrices", filters), sigma2, max_lag,
                       trunc_tol=trunc_tol)


def _neighbour_averages(x: np.ndarray, graph: Graph, max_stage: int,
                        C: int, scheme: str = "equal") -> np.ndarray:
    """Stage-wise weighted neighbour averages; (T, N, max_stage, C)."""
    ns = build_neighbour_stages(graph, max_stage)
    w = compute_weights(ns, scheme, graph, num_covariates=C)
    t, n = x.shape
    out = np.zeros((t, n, max_stage, C))
    for r in range(1, max_stage + 1):
        for c in range(1, C + 1):
            out[:, :, r - 1, c - 1] = x @ w.stage_matrix(r, c).T
    return out


def gnar_ls_fit(data, graph: Graph, order: GnarOrder, alpha_mode: str = "global",
                scheme: str = "equal"):
    """Ordinary least squares on the network regression representation.

    Returns ``(GnarParams, sigma2)`` where sigma2 holds per-node residual
    variances (mean squared residuals). Rows are stacked across nodes so
    the beta coefficients are shared; alpha columns are shared or per-node
    according to ``alpha_mode``.
    """
    x = np.asarray(getattr(data, "values", data), dtype=float)
    t, n = x.shape
    p, s = order.p, order.s
    n_alpha = p if alpha_mode == "global" else n * p
    n_cols = n_alpha + order.num_beta
    if t <= p + n_cols:
        raise InsufficientData(f"need T > {p + n_cols}, got {t}")
    max_stage = max(1, order.max_stage)
    z = _neighbour_averages(x, graph, max_stage, order.C, scheme)

    rows = t - p
    y = x[p:].reshape(-1, order="F")  # node-major stacking of the response
    design = np.zeros((rows * n, n_cols))
    col = 0
    for j in range(1, p + 1):
        lagged = x[p - j:t - j]  # (rows, n)
        if alpha_mode == "global":
            design[:, col] = lagged.reshape(-1, order="F")
            col += 1
        else:
            for i in range(n):
                design[i * rows:(i + 1) * rows, col + i * p + (j - 1)] = lagged[:, i]
    if alpha_mode != "global":
        col += n * p
    for j in range(1, p + 1):
        for r in range(1, s[j - 1] + 1):
            for c in range(1, order.C + 1):
                design[:, col] = z[p - j:t - j, :, r - 1, c - 1].reshape(-1, order="F")
                col += 1

    rank = np.linalg.matrix_rank(design)
    if rank < n_cols:
        raise SingularDesign(f"design rank {rank} < {n_cols} columns")
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)

    if alpha_mode == "global":
        alpha = coef[:p]
        beta_flat = coef[p:]
    else:
        alpha = coef[:n * p].reshape(n, p)
        beta_flat = coef[n * p:]
    beta, pos = [], 0
    for j in range(p):
        blk = beta_flat[pos:pos + s[j] * order.C].reshape(s[j], order.C)
        beta.append(blk)
        pos += s[j] * order.C
    params = GnarParams(alpha=alpha, beta=tuple(beta))

    resid = (y - design @ coef).reshape(rows, n, order="F")
    sigma2 = np.mean(resid ** 2, axis=0)
    return params, sigma2
