"""Series ingestion: CSV panels with optional gap interpolation and the
standard preprocessing switches (mean removal, log transform)."""
from __future__ import annotations

import numpy as np
import pandas as pd

from .errors import LeadingGap, MalformedCSV
from .simulate import SeriesPanel


def ingest_series(path, policy: str = "strict", demean: bool = False,
                  log_transform: bool = False) -> SeriesPanel:
    """Load a panel CSV (header = node labels, rows = time).

    ``strict`` rejects any missing cell; ``interpolate`` fills interior
    gaps linearly per node and rejects leading or trailing gaps. The log
    transform applies before mean removal.
    """
    if policy not in ("strict", "interpolate"):
        raise MalformedCSV(f"unknown missing-value policy {policy!r}")
    try:
        frame = pd.read_csv(path)
    except Exception as exc:
        raise MalformedCSV(f"{path}: {exc}") from exc
    if frame.shape[1] < 1 or frame.shape[0] < 1:
        raise MalformedCSV(f"{path}: empty panel")
    labels = [str(c) for c in frame.columns]
    try:
        values = frame.to_numpy(dtype=float)
    except (TypeError, ValueError) as exc:
        raise MalformedCSV(f"{path}: non-numeric cell ({exc})") from exc

    missing = np.isnan(values)
    if missing.any():
        if policy == "strict":
            t, i = np.argwhere(missing)[0]
            raise MalformedCSV(f"{path}: missing value at row {t + 1}, "
                               f"column {labels[i]}")
        for i in range(values.shape[1]):
            col = values[:, i]
            gaps = np.isnan(col)
            if not gaps.any():
                continue
            if gaps[0] or gaps[-1]:
                raise LeadingGap(f"{path}: column {labels[i]} starts or ends "
                                 "with a gap; interpolation is interior-only")
            good = np.flatnonzero(~gaps)
            col[gaps] = np.interp(np.flatnonzero(gaps), good, col[good])

    if log_transform:
        if np.any(values <= 0):
            raise MalformedCSV(f"{path}: log transform needs positive values")
        values = np.log(values)
    if demean:
        values = values - values.mean(axis=0, keepdims=True)
    return SeriesPanel(values=values, labels=tuple(labels))


def write_series(panel: SeriesPanel, path):
    """Inverse of :func:`ingest_series` for complete panels."""
    pd.DataFrame(panel.values, columns=list(panel.labels)).to_csv(path, index=False)
