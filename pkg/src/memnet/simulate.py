"""Simulation of FIWN, long-memory network processes, and preset
data-generating processes.

The truncated-filter method drives everything off one noise panel of
length ``burn_in + filter_order + T``: both operator orderings consume the
same noise array with zero-padded pre-samples and discard the same prefix,
so matched seeds with d = 0 give bit-identical panels for either ordering.
The exact method draws jointly from the model autocovariance through the
prediction-error recursion.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .autocov import AutocovSequence, fignar_acv, gnarfi_acv
from .errors import NotStationary, UnknownPreset, ValidationError
from .fracdiff import frac_integ_coeffs, validate_memory
from .gnar import FilterMatrices, GnarOrder, GnarParams, check_stationarity, filters_from_graph
from .network import Graph, read_graph_file
from .toeplitz import durbin_levinson

PRNG_NAME = "pcg64"  # recorded in output metadata for reproducibility


@dataclass(frozen=True)
class SimConfig:
    """Simulation controls; ``filter_order`` is the truncation J of the
    integration filter and ``burn_in`` the discarded recursion prefix."""

    method: str = "truncated_filter"
    burn_in: int = 5000
    filter_order: int = 2000
    seed: int = 0

    def __post_init__(self):
        if self.method not in ("truncated_filter", "exact"):
            raise ValidationError(f"unknown simulation method {self.method!r}")
        if self.burn_in < 0 or self.filter_order < 1:
            raise ValidationError("burn_in must be >= 0 and filter_order >= 1")


@dataclass(frozen=True)
class SeriesPanel:
    """T x N observation matrix with node labels."""

    values: np.ndarray
    labels: tuple = None
    time_index: np.ndarray = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise ValidationError("panel values must be 2-D (time x nodes)")
        object.__setattr__(self, "values", v)
        if self.labels is None:
            object.__setattr__(self, "labels",
                               tuple(str(i + 1) for i in range(v.shape[1])))
        elif len(self.labels) != v.shape[1]:
            raise ValidationError("one label per node required")
        else:
            object.__setattr__(self, "labels", tuple(str(l) for l in self.labels))

    @property
    def t(self):
        return self.values.shape[0]

    @property
    def n(self):
        return self.values.shape[1]

    def node_major(self) -> np.ndarray:
        """Stacked vector (x_1, ..., x_N)."""
        return self.values.T.ravel()


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def replicate_rng(seed: int, replicate: int) -> np.random.Generator:
    """Independent stream for a replicate index under a master seed."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, replicate))))


def _draw_noise(sigma2, length: int, rng) -> np.ndarray:
    sigma2 = np.atleast_1d(np.asarray(sigma2, dtype=float))
    return rng.standard_normal((length, sigma2.size)) * np.sqrt(sigma2)[None, :]


def _apply_integration_filter(y: np.ndarray, d, j_order: int) -> np.ndarray:
    """Componentwise (1-L)^(-d) with the filter truncated at ``j_order``
    and zero pre-sample padding; output aligned with the input.
    Zero-memory components pass through untouched (exact identity)."""
    d = validate_memory(d)
    t, _ = y.shape
    out = y.copy()
    live = d > 0
    if not np.any(live):
        return out
    psi = frac_integ_coeffs(d[live], j_order)
    from scipy.fft import next_fast_len
    n_fft = next_fast_len(t + j_order, real=True)
    yh = np.fft.rfft(y[:, live], n=n_fft, axis=0)
    ph = np.fft.rfft(psi.T, n=n_fft, axis=0)
    out[:, live] = np.fft.irfft(yh * ph, n=n_fft, axis=0)[:t]
    return out


def _gnar_recursion(filters, noise: np.ndarray) -> np.ndarray:
    """X_t = sum_j A_j X_{t-j} + noise_t with zero pre-sample values."""
    mats = list(getattr(filters, "matrices", filters))
    p = len(mats)
    t, n = noise.shape
    a_t = [m.T.copy() for m in mats]
    x = noise.copy()
    for s in range(t):
        row = x[s]
        for j in range(1, min(p, s) + 1):
            row += x[s - j] @ a_t[j - 1]
    return x


def _require_stationary(params: GnarParams, order: GnarOrder, n: int):
    if not check_stationarity(params, order, n):
        raise NotStationary("coefficient magnitudes violate the stationarity bound")


def _exact_draw(acv: AutocovSequence, t: int, rng) -> np.ndarray:
    state = durbin_levinson(acv, t, sample_rng=rng)
    return state.sample


def _circulant_embedding_draw(acv_row: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Exact stationary Gaussian draw of length T from a scalar
    autocovariance row c(0..T-1), by circulant embedding.

    ``w`` supplies the 2(T-1) standard normals, so the map is a fixed
    linear function of the noise. Requires the embedding to be
    nonnegative definite (it is for the fractional-noise family here).
    """
    t = acv_row.size
    m = 2 * (t - 1)
    emb = np.concatenate([acv_row, acv_row[-2:0:-1]])
    lam = np.fft.fft(emb).real
    floor = -1e-8 * float(np.max(lam))
    if np.min(lam) < floor:
        raise ValidationError("circulant embedding not nonnegative definite")
    lam = np.clip(lam, 0.0, None)
    half = m // 2
    u = np.zeros(m, dtype=complex)
    u[0] = np.sqrt(lam[0]) * w[0]
    u[half] = np.sqrt(lam[half]) * w[1]
    a = w[2:2 + half - 1]
    b = w[2 + half - 1:2 * half]
    u[1:half] = np.sqrt(lam[1:half] / 2.0) * (a + 1j * b)
    u[half + 1:] = np.conj(u[1:half][::-1])
    x = np.fft.fft(u) / np.sqrt(m)
    return x.real[:t]


def simulate_fiwn_exact_embedding(d, sigma2, t: int, rng) -> np.ndarray:
    """Exact FIWN panel via per-node circulant embedding, O(N T log T).

    Distribution-exact for any length (unlike the truncated filter, whose
    spectral mass below frequency 1/J is lost); used where long panels
    must carry the exact law.
    """
    d = validate_memory(d)
    sigma2 = np.atleast_1d(np.asarray(sigma2, dtype=float))
    from .fracdiff import fiwn_diag_acv

    rows = fiwn_diag_acv(d, sigma2, t - 1)
    out = np.empty((t, d.size))
    for i in range(d.size):
        w = rng.standard_normal(2 * (t - 1))
        out[:, i] = _circulant_embedding_draw(rows[i], w)
    return out


def simulate_fiwn(d, sigma2, t: int, cfg: SimConfig, labels=None) -> SeriesPanel:
    """Fractionally integrated white noise panel."""
    d = validate_memory(d)
    rng = make_rng(cfg.seed)
    if cfg.method == "exact":
        from .fracdiff import fiwn_diag_acv
        eta = fiwn_diag_acv(d, sigma2, t - 1)
        acv = AutocovSequence(gammas=np.einsum("ih,ij->hij", eta, np.eye(d.size)))
        return SeriesPanel(_exact_draw(acv, t, rng), labels)
    lead = cfg.burn_in + cfg.filter_order
    noise = _draw_noise(sigma2, lead + t, rng)
    z = _apply_integration_filter(noise, d, cfg.filter_order)
    return SeriesPanel(z[lead:], labels)


def simulate_fignar(params: GnarParams, graph: Graph, order: GnarOrder, d, sigma2,
                    t: int, cfg: SimConfig, scheme: str = "equal",
                    labels=None) -> SeriesPanel:
    """Fractional integration of a network-autoregressive panel."""
    d = validate_memory(d)
    n = graph.num_nodes
    _require_stationary(params, order, n)
    filters = filters_from_graph(params, graph, order, scheme)
    rng = make_rng(cfg.seed)
    if cfg.method == "exact":
        acv = fignar_acv(filters, d, sigma2, t - 1)
        return SeriesPanel(_exact_draw(acv, t, rng), labels)
    lead = cfg.burn_in + cfg.filter_order
    noise = _draw_noise(sigma2, lead + t, rng)
    y = _gnar_recursion(filters, noise)
    x = _apply_integration_filter(y, d, cfg.filter_order)
    return SeriesPanel(x[lead:], labels)


def simulate_gnarfi(params: GnarParams, graph: Graph, order: GnarOrder, d, sigma2,
                    t: int, cfg: SimConfig, scheme: str = "equal",
                    labels=None) -> SeriesPanel:
    """Network autoregression driven by fractionally integrated noise."""
    d = validate_memory(d)
    n = graph.num_nodes
    _require_stationary(params, order, n)
    filters = filters_from_graph(params, graph, order, scheme)
    rng = make_rng(cfg.seed)
    if cfg.method == "exact":
        acv = gnarfi_acv(filters, d, sigma2, t - 1)
        return SeriesPanel(_exact_draw(acv, t, rng), labels)
    lead = cfg.burn_in + cfg.filter_order
    noise = _draw_noise(sigma2, lead + t, rng)
    z = _apply_integration_filter(noise, d, cfg.filter_order)
    x = _gnar_recursion(filters, z)
    return SeriesPanel(x[lead:], labels)


# -- preset data generating processes ------------------------------------

def load_fixture_graph(name: str) -> Graph:
    """Bundled graph fixtures (``fivenet``/``tennet``)."""
    key = name.lower()
    if key not in ("fivenet", "tennet"):
        raise UnknownPreset(f"unknown fixture graph {name!r}")
    ref = resources.files("memnet.data").joinpath(f"{key}.txt")
    with resources.as_file(ref) as path:
        return read_graph_file(path)


@dataclass(frozen=True)
class DgpPreset:
    """Full parameter bundle for a preset generating process."""

    name: str
    graph_name: str
    graph: Graph
    order: GnarOrder
    params: GnarParams
    d: np.ndarray
    sigma2: np.ndarray
    alpha_mode: str
    d_mode: str
    sigma_mode: str

    def theta(self) -> np.ndarray:
        """True parameters packed in estimation layout (alpha, beta, d,
        sigma2) under the preset's modes."""
        alpha = self.params.alpha.reshape(-1)
        beta = np.concatenate([b.reshape(-1) for b in self.params.beta])
        d = self.d[:1] if self.d_mode == "global" else self.d
        s2 = self.sigma2[:1] if self.sigma_mode == "global" else self.sigma2
        return np.concatenate([alpha, beta, d, s2])


# frozen stand-in coefficients for the larger-network third process; the
# magnitudes keep every node's coefficient sum below one with beta = 0.3
_TENNET_DGP3_ALPHA = np.array(
    [-0.38, 0.27, 0.33, -0.15, 0.22, -0.31, 0.18, 0.41, -0.24, 0.12])


def dgp_preset(name: str, graph: str = "fivenet") -> DgpPreset:
    """Preset generating processes on the bundled fixture graphs."""
    key = name.upper()
    gkey = graph.lower()
    g = load_fixture_graph(gkey)
    n = g.num_nodes
    order = GnarOrder(p=1, s=(1,))
    if gkey == "fivenet":
        d_rising = np.array([0.05, 0.15, 0.25, 0.35, 0.45])
    else:
        d_rising = 0.05 + 2.0 * np.arange(n) / 45.0
    sigma2 = np.ones(n)

    if key == "DGP1":
        params = GnarParams(alpha=np.array([0.35]), beta=(np.array([[0.2]]),))
        return DgpPreset(key, gkey, g, order, params, d_rising, sigma2,
                         "global", "individual", "individual")
    if key == "DGP2":
        params = GnarParams(alpha=np.array([0.35]), beta=(np.array([[0.2]]),))
        return DgpPreset(key, gkey, g, order, params, np.full(n, 0.25), sigma2,
                         "global", "global", "individual")
    if key == "DGP3":
        if gkey == "fivenet":
            alpha = np.array([-0.4, 0.3, 0.3, 0.2, -0.3])
            beta = 0.4
        else:
            alpha = _TENNET_DGP3_ALPHA
            beta = 0.3
        params = GnarParams(alpha=alpha[:, None], beta=(np.array([[beta]]),))
        return DgpPreset(key, gkey, g, order, params, d_rising, sigma2,
                         "individual", "individual", "individual")
    raise UnknownPreset(f"unknown preset {name!r}")


def simulate_preset(preset: DgpPreset, kind: str, t: int, cfg: SimConfig) -> SeriesPanel:
    """Draw one panel from a preset under either operator ordering."""
    fn = simulate_fignar if kind.lower() == "fignar" else simulate_gnarfi
    return fn(preset.params, preset.graph, preset.order, preset.d, preset.sigma2,
              t, cfg, labels=preset.graph.labels)
