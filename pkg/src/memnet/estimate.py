"""Maximum-likelihood estimation: parameter packing with feasibility
transforms, the exact and conditional objectives, and a quasi-Newton fit
loop with finite-difference gradients.

The search runs in an unconstrained space: memory exponents map through a
scaled logistic onto (0, 1/2), variances through the exponential, and the
autoregressive block is kept inside the stationarity region by a smooth
barrier that switches on near the boundary.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, logit

from .autocov import fignar_acv, gnarfi_acv
from .errors import (
    InfeasibleInit,
    NumericalError,
    ValidationError,
)
from .gnar import (
    FilterMatrices,
    GnarOrder,
    GnarParams,
    build_filter_matrices,
    filters_from_graph,
    stationarity_margin,
)
from .network import Graph, build_neighbour_stages, compute_weights
from .toeplitz import durbin_levinson, gaussian_loglik

_LOG2PI = float(np.log(2.0 * np.pi))
_BIG = 1e10
_MARGIN_BARRIER = 0.995
_MARGIN_HARD = 1.0 - 1e-8


@dataclass(frozen=True)
class ModelSpec:
    """Model identity: operator ordering, estimation flavour, order,
    global/individual switches, and the graph the weights come from."""

    kind: str
    order: GnarOrder
    graph: Graph = None
    estimation: str = "exact"
    alpha_mode: str = "individual"
    d_mode: str = "individual"
    sigma_mode: str = "individual"
    scheme: str = "equal"

    def __post_init__(self):
        if self.kind not in ("fignar", "gnarfi"):
            raise ValidationError(f"unknown model kind {self.kind!r}")
        if self.estimation not in ("exact", "conditional"):
            raise ValidationError(f"unknown estimation {self.estimation!r}")
        if self.estimation == "conditional" and self.kind != "gnarfi":
            raise ValidationError("conditional estimation applies to the "
                                  "noise-first (gnarfi) ordering only")
        for mode in (self.alpha_mode, self.d_mode, self.sigma_mode):
            if mode not in ("global", "individual"):
                raise ValidationError(f"mode must be global/individual, got {mode!r}")
        if self.order.max_stage >= 1 and self.graph is None:
            raise ValidationError("an order with neighbour stages needs a graph")

    def describe(self) -> str:
        s = ",".join(str(v) for v in self.order.s)
        return f"{self.kind}({self.order.p},[{s}])/{self.estimation}"


def param_count(spec: ModelSpec, n: int) -> int:
    """Number of free parameters M under the spec's mode switches."""
    p, order = spec.order.p, spec.order
    m = (n * p if spec.alpha_mode == "individual" else p) + order.num_beta
    m += n if spec.d_mode == "individual" else 1
    m += n if spec.sigma_mode == "individual" else 1
    return m


@dataclass(frozen=True)
class ParamLayout:
    """Slice map of the packed vector (alpha, beta, d, sigma2)."""

    n: int
    spec: ModelSpec
    alpha: slice
    beta: slice
    d: slice
    sigma2: slice
    size: int


def layout(spec: ModelSpec, n: int) -> ParamLayout:
    p = spec.order.p
    na = n * p if spec.alpha_mode == "individual" else p
    nb = spec.order.num_beta
    nd = n if spec.d_mode == "individual" else 1
    ns = n if spec.sigma_mode == "individual" else 1
    a = slice(0, na)
    b = slice(na, na + nb)
    dd = slice(na + nb, na + nb + nd)
    ss = slice(na + nb + nd, na + nb + nd + ns)
    return ParamLayout(n, spec, a, b, dd, ss, na + nb + nd + ns)


def split_theta(spec: ModelSpec, n: int, theta: np.ndarray):
    """Natural-scale theta -> (GnarParams, d vector, sigma2 vector)."""
    lo = layout(spec, n)
    theta = np.asarray(theta, dtype=float)
    if theta.size != lo.size:
        raise ValidationError(f"theta must have {lo.size} entries, got {theta.size}")
    alpha = theta[lo.alpha]
    if spec.alpha_mode == "individual":
        alpha = alpha.reshape(n, spec.order.p)
    beta, pos = [], lo.beta.start
    for j in range(spec.order.p):
        cnt = spec.order.s[j] * spec.order.C
        beta.append(theta[pos:pos + cnt].reshape(spec.order.s[j], spec.order.C))
        pos += cnt
    params = GnarParams(alpha=alpha, beta=tuple(beta))
    d = theta[lo.d]
    s2 = theta[lo.sigma2]
    d_full = np.full(n, d[0]) if spec.d_mode == "global" else d
    s2_full = np.full(n, s2[0]) if spec.sigma_mode == "global" else s2
    return params, d_full, s2_full


def pack(spec: ModelSpec, n: int, theta: np.ndarray) -> np.ndarray:
    """Natural-scale theta -> unconstrained search point u."""
    lo = layout(spec, n)
    theta = np.asarray(theta, dtype=float)
    u = theta.copy()
    d = theta[lo.d]
    if np.any(d <= 0) or np.any(d >= 0.5):
        raise ValidationError("d must lie strictly inside (0, 1/2)")
    s2 = theta[lo.sigma2]
    if np.any(s2 <= 0):
        raise ValidationError("variances must be positive")
    u[lo.d] = logit(2.0 * d)
    u[lo.sigma2] = np.log(s2)
    return u


def unpack(spec: ModelSpec, n: int, u: np.ndarray) -> np.ndarray:
    """Unconstrained point -> natural-scale theta."""
    lo = layout(spec, n)
    theta = np.asarray(u, dtype=float).copy()
    theta[lo.d] = 0.5 * expit(u[lo.d])
    theta[lo.sigma2] = np.exp(u[lo.sigma2])
    return theta


@dataclass(frozen=True)
class FitOptions:
    """Optimizer and likelihood-evaluation controls."""

    tol: float = 1e-7
    max_iter: int = 500
    det_method: str = "auto"      # exact below the cutoff, spline above
    det_exact_max_t: int = 160
    eps_s: float = 1e-6           # adaptive spline rule (explicit det_method only)
    pcg_tol: float = 1e-9
    spline_s: int = 128
    trunc_tol: float = 1e-12
    fd_step: float = 1e-5
    restart_on_failure: bool = True
    restart_seed: int = 20090527

    def resolved_det(self, t: int) -> str:
        if self.det_method != "auto":
            return self.det_method
        return "exact" if t <= self.det_exact_max_t else "tail"


@dataclass(frozen=True)
class FitResult:
    """Fitted parameters plus bookkeeping.

    ``theta`` is on the natural scale in packed layout (alpha, beta, d,
    sigma2 with global modes collapsed); ``d`` and ``sigma2`` are the
    per-node broadcasts.
    """

    spec: ModelSpec
    n: int
    t: int
    theta: np.ndarray
    params: GnarParams
    d: np.ndarray
    sigma2: np.ndarray
    loglik: float
    m: int
    bic: float
    aic: float
    converged: bool
    iterations: int
    n_evals: int
    m_trunc: int
    wall_time: float
    trace: tuple = ()
    message: str = ""

    def filters(self) -> FilterMatrices:
        if self.spec.order.max_stage >= 1:
            return filters_from_graph(self.params, self.spec.graph, self.spec.order,
                                      self.spec.scheme)
        zero = np.zeros((self.n, self.n))
        mats = []
        alpha = self.params.alpha_by_node(self.n)
        for j in range(self.spec.order.p):
            mats.append(np.diag(alpha[:, j]))
        return FilterMatrices(tuple(mats))

    def acv(self, max_lag: int, trunc_tol: float = 1e-12):
        fn = fignar_acv if self.spec.kind == "fignar" else gnarfi_acv
        return fn(self.filters(), self.d, self.sigma2, max_lag, trunc_tol)

    def report_lines(self):
        """Flat key=value fit report."""
        lines = []
        alpha = self.params.alpha_by_node(self.n) if self.spec.alpha_mode == "individual" \
            else self.params.alpha
        if alpha.ndim == 1:
            for j, v in enumerate(alpha, 1):
                lines.append(f"alpha.{j}={v:.10g}")
        else:
            for i in range(self.n):
                for j in range(self.spec.order.p):
                    lines.append(f"alpha.{i + 1}.{j + 1}={alpha[i, j]:.10g}")
        for j, blk in enumerate(self.params.beta, 1):
            for r in range(blk.shape[0]):
                for c in range(blk.shape[1]):
                    lines.append(f"beta.{j}.{r + 1}.{c + 1}={blk[r, c]:.10g}")
        dd = self.d if self.spec.d_mode == "individual" else self.d[:1]
        for i, v in enumerate(dd, 1):
            lines.append(f"d.{i}={v:.10g}")
        ss = self.sigma2 if self.spec.sigma_mode == "individual" else self.sigma2[:1]
        for i, v in enumerate(ss, 1):
            lines.append(f"sigma2.{i}={v:.10g}")
        lines.append(f"loglik={self.loglik:.10g}")
        lines.append(f"bic={self.bic:.10g}")
        lines.append(f"aic={self.aic:.10g}")
        lines.append(f"converged={str(self.converged).lower()}")
        lines.append(f"iterations={self.iterations}")
        return lines


def _filters_for(spec: ModelSpec, params: GnarParams, n: int,
                 weights=None) -> FilterMatrices:
    if spec.order.max_stage >= 1:
        return build_filter_matrices(params, weights, spec.order)
    alpha = params.alpha_by_node(n)
    return FilterMatrices(tuple(np.diag(alpha[:, j]) for j in range(spec.order.p)))


def _weights_for(spec: ModelSpec):
    if spec.order.max_stage < 1:
        return None
    ns = build_neighbour_stages(spec.graph, spec.order.max_stage)
    return compute_weights(ns, spec.scheme, spec.graph, num_covariates=spec.order.C)


def conditional_residuals(params: GnarParams, order: GnarOrder, x: np.ndarray,
                          weights=None, n: int = None) -> np.ndarray:
    """z_t = x_t - sum_j A_j x_{t-j} with zero pre-sample values."""
    n = x.shape[1] if n is None else n
    spec_filters = []
    alpha = params.alpha_by_node(n)
    for j in range(order.p):
        a = np.diag(alpha[:, j]).astype(float)
        if weights is not None:
            bj = params.beta[j]
            for r in range(1, order.s[j] + 1):
                for c in range(1, order.C + 1):
                    a += bj[r - 1, c - 1] * weights.stage_matrix(r, c)
        spec_filters.append(a)
    z = x.copy()
    for j, a in enumerate(spec_filters, 1):
        z[j:] -= x[:-j] @ a.T
    return z


class _Workspace:
    """Mutable per-fit scratch shared across objective evaluations."""

    def __init__(self):
        self.pcg = {}
        self.acv_cache = {}
        self.evals = 0
        self.last_m_trunc = 0
        self.pre_anchor = None

    def refresh_preconditioner(self, u, radius=0.05):
        """Drop cached preconditioners once the search point moves beyond
        ``radius`` of the anchor; the finite-difference cloud stays inside."""
        if self.pre_anchor is None or np.max(np.abs(u - self.pre_anchor)) > radius:
            for key in [k for k in self.pcg if isinstance(k, tuple) and k[0] == "pre"]:
                del self.pcg[key]
            self.pre_anchor = u.copy()


def _make_objective(spec: ModelSpec, data, opts: FitOptions, ws: _Workspace):
    x = np.asarray(getattr(data, "values", data), dtype=float)
    t, n = x.shape
    weights = _weights_for(spec)
    det = opts.resolved_det(t)
    eta_identity = np.eye(n)

    def objective(u):
        ws.evals += 1
        ws.refresh_preconditioner(np.asarray(u, dtype=float))
        theta = unpack(spec, n, u)
        params, d, s2 = split_theta(spec, n, theta)
        margins = stationarity_margin(params, spec.order, n)
        worst = float(np.max(margins))
        if worst >= _MARGIN_HARD:
            return _BIG * (1.0 + worst)
        barrier = 0.0
        if worst >= _MARGIN_BARRIER:
            over = margins[margins >= _MARGIN_BARRIER]
            barrier = float(np.sum((over - _MARGIN_BARRIER) ** 2 / (1.0 - over))) * 1e4
        try:
            filters = _filters_for(spec, params, n, weights)
            if spec.estimation == "conditional":
                z = conditional_residuals(params, spec.order, x, weights, n)
                from .autocov import AutocovSequence
                from .fracdiff import fiwn_diag_acv
                eta = fiwn_diag_acv(d, s2, t - 1)
                acv = AutocovSequence(
                    gammas=np.einsum("ih,ij->hij", eta, eta_identity))
                state = durbin_levinson(acv, t, data=z)
                nll = 0.5 * (t * n * _LOG2PI + float(np.sum(state.logdet_v))
                             + state.quadform)
            elif spec.kind == "fignar":
                acv = fignar_acv(filters, d, s2, t - 1, trunc_tol=opts.trunc_tol,
                                 cache=ws.acv_cache)
            else:
                acv = gnarfi_acv(filters, d, s2, t - 1, trunc_tol=opts.trunc_tol)
            if spec.estimation != "conditional":
                ws.last_m_trunc = acv.m_trunc
                nll = -gaussian_loglik(acv, x, det_method=det,
                                       pcg_tol=opts.pcg_tol, eps_s=opts.eps_s,
                                       workspace=ws.pcg,
                                       spline_s=min(opts.spline_s, t - 2))
        except NumericalError:
            return _BIG * (1.0 + worst)
        if not np.isfinite(nll):
            return _BIG * (1.0 + worst)
        return nll + barrier

    return objective, t, n


def negloglik_exact(spec: ModelSpec, theta, data, opts: FitOptions = None) -> float:
    """Negative exact Gaussian log-likelihood at a natural-scale theta;
    infeasible points return +inf."""
    opts = opts or FitOptions(det_method="exact")
    x = np.asarray(getattr(data, "values", data), dtype=float)
    t, n = x.shape
    params, d, s2 = split_theta(spec, n, np.asarray(theta, dtype=float))
    if float(np.max(stationarity_margin(params, spec.order, n))) >= 1.0:
        return float("inf")
    if np.any(d <= 0) or np.any(d >= 0.5) or np.any(s2 <= 0):
        return float("inf")
    try:
        filters = _filters_for(spec, params, n, _weights_for(spec))
        fn = fignar_acv if spec.kind == "fignar" else gnarfi_acv
        acv = fn(filters, d, s2, t - 1, trunc_tol=opts.trunc_tol)
        return -gaussian_loglik(acv, x, det_method=opts.resolved_det(t),
                                pcg_tol=opts.pcg_tol, eps_s=opts.eps_s)
    except NumericalError:
        return float("inf")


def negloglik_cond_gnarfi(spec: ModelSpec, theta, data) -> float:
    """Negative conditional likelihood: the filtered series z = A(L)x is
    scored under its FIWN law through the innovations decomposition."""
    if spec.kind != "gnarfi":
        raise ValidationError("conditional likelihood is defined for the "
                              "noise-first ordering")
    x = np.asarray(getattr(data, "values", data), dtype=float)
    t, n = x.shape
    params, d, s2 = split_theta(spec, n, np.asarray(theta, dtype=float))
    if float(np.max(stationarity_margin(params, spec.order, n))) >= 1.0:
        return float("inf")
    if np.any(d <= 0) or np.any(d >= 0.5) or np.any(s2 <= 0):
        return float("inf")
    from .autocov import AutocovSequence
    from .fracdiff import fiwn_diag_acv

    z = conditional_residuals(params, spec.order, x, _weights_for(spec), n)
    eta = fiwn_diag_acv(d, s2, t - 1)
    acv = AutocovSequence(gammas=np.einsum("ih,ij->hij", eta, np.eye(n)))
    try:
        state = durbin_levinson(acv, t, data=z)
    except NumericalError:
        return float("inf")
    return 0.5 * (t * n * _LOG2PI + float(np.sum(state.logdet_v)) + state.quadform)


def default_init(spec: ModelSpec, data) -> np.ndarray:
    """Natural-scale starting point: small equal AR mass, mid-range memory,
    variance of the differenced series."""
    x = np.asarray(getattr(data, "values", data), dtype=float)
    n = x.shape[1]
    lo = layout(spec, n)
    theta = np.zeros(lo.size)
    a0 = 0.1 / (spec.order.p * (1.0 + max(spec.order.max_stage, 0)))
    theta[lo.alpha] = a0
    theta[lo.beta] = a0
    theta[lo.d] = 0.25
    dv = np.var(np.diff(x, axis=0), axis=0)
    theta[lo.sigma2] = dv if spec.sigma_mode == "individual" else float(np.mean(dv))
    return theta


def _fd_gradient(fun, u, step):
    g = np.empty_like(u)
    for i in range(u.size):
        h = step * (1.0 + abs(u[i]))
        up = u.copy(); up[i] += h
        um = u.copy(); um[i] -= h
        g[i] = (fun(up) - fun(um)) / (2.0 * h)
    return g


def fit(spec: ModelSpec, data, init=None, opts: FitOptions = None) -> FitResult:
    """Quasi-Newton maximum likelihood.

    Minimises the objective in the unconstrained space with BFGS and
    central finite-difference gradients; one automatic restart from a
    perturbed initial point on failure. Deterministic given ``init`` and
    the data.
    """
    opts = opts or FitOptions()
    x = np.asarray(getattr(data, "values", data), dtype=float)
    t, n = x.shape
    if t < spec.order.p + 2:
        raise ValidationError("series too short for the requested order")
    ws = _Workspace()
    objective, _, _ = _make_objective(spec, data, opts, ws)

    theta0 = default_init(spec, data) if init is None else np.asarray(init, dtype=float)
    try:
        u0 = pack(spec, n, theta0)
    except ValidationError as exc:
        raise InfeasibleInit(str(exc)) from exc
    if objective(u0) >= _BIG:
        raise InfeasibleInit("initial point rejected by the likelihood")

    start = time.perf_counter()
    memo = {}

    def remembered(u):
        key = u.tobytes()
        val = memo.get(key)
        if val is None:
            val = objective(u)
            if len(memo) > 512:
                memo.clear()
            memo[key] = val
        return val

    def run(u_start):
        trace = []
        res = minimize(remembered, u_start, method="BFGS",
                       jac=lambda u: _fd_gradient(remembered, u, opts.fd_step),
                       callback=lambda uk: trace.append(remembered(uk)),
                       options={"gtol": opts.tol, "maxiter": opts.max_iter})
        ok = bool(res.success)
        if not ok:
            # BFGS ends on precision loss at the finite-difference noise
            # floor of an optimum; a gradient at that floor counts as
            # converged, an order-one gradient does not
            ok = bool(np.isfinite(res.fun) and res.fun < _BIG
                      and np.max(np.abs(res.jac)) <= 0.1)
        return res, trace, ok

    res, trace, converged = run(u0)
    if not converged and opts.restart_on_failure:
        rng = np.random.Generator(np.random.PCG64(opts.restart_seed))
        res2, trace2, ok2 = run(u0 + 0.1 * rng.standard_normal(u0.size))
        if res2.fun < res.fun:
            res, trace, converged = res2, trace2, ok2

    wall = time.perf_counter() - start
    theta_hat = unpack(spec, n, res.x)
    params, d, s2 = split_theta(spec, n, theta_hat)
    loglik = -float(res.fun)
    m = param_count(spec, n)
    return FitResult(
        spec=spec, n=n, t=t, theta=theta_hat, params=params, d=d, sigma2=s2,
        loglik=loglik, m=m,
        bic=-2.0 * loglik + m * np.log(t),
        aic=-2.0 * loglik + 2.0 * m,
        converged=converged, iterations=int(res.nit), n_evals=ws.evals,
        m_trunc=ws.last_m_trunc, wall_time=wall, trace=tuple(trace),
        message=str(res.message),
    )
