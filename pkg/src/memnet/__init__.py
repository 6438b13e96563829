"""Long-memory network time series.

Simulation, exact and conditional maximum-likelihood estimation,
forecasting, and order/model/graph selection for network-autoregressive
processes with componentwise fractional differencing, built on a
block-Toeplitz Gaussian-likelihood engine.
"""

from .autocov import AutocovSequence, companion_reduce, fignar_acv, gnarfi_acv
from .estimate import (
    FitOptions,
    FitResult,
    ModelSpec,
    fit,
    negloglik_cond_gnarfi,
    negloglik_exact,
    param_count,
)
from .forecast import (
    ForecastResult,
    evaluate_fixed_origin,
    evaluate_rolling,
    forecast,
    forecast_dlf,
    forecast_ef,
    forecast_rf,
    mspe,
)
from .fracdiff import fiwn_acv_matrix, fiwn_cross_acv, frac_coeffs, frac_integ_coeffs
from .gnar import (
    FilterMatrices,
    GnarOrder,
    GnarParams,
    build_filter_matrices,
    check_stationarity,
    gnar_acv,
    gnar_ls_fit,
)
from .ingest import ingest_series, write_series
from .network import (
    Graph,
    NeighbourStructure,
    WeightMatrices,
    build_neighbour_stages,
    compute_weights,
    fully_connected,
    graph_from_edges,
    mst_from_coords,
    read_coords_file,
    read_graph_file,
    write_graph_file,
)
from .select import (
    DiscoveryConfig,
    SelectionReport,
    discover_graph,
    grid_search,
    information_criteria,
)
from .simulate import (
    DgpPreset,
    SeriesPanel,
    SimConfig,
    dgp_preset,
    load_fixture_graph,
    simulate_fignar,
    simulate_fiwn,
    simulate_gnarfi,
    simulate_preset,
)
from .toeplitz import (
    BlockToeplitzOperator,
    DLState,
    bt_apply,
    durbin_levinson,
    gaussian_loglik,
    logdet_exact,
    logdet_spline,
    pcg_quadform,
    pcg_solve,
)

__version__ = "0.1.0"
