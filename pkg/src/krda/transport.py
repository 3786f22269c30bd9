"""Knothe-Rosenblatt transfer of source rows into the target domain.

For each component ``i`` the source conditional CDF is evaluated at the
source value, and the target conditional (given the already transferred
components) is inverted at that probability.  Rows are independent; batches
are cut into fixed-size chunks so output bits never depend on the worker
count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .errors import BracketNotFound, DimensionMismatch
from .mixture import QUANTILE_EPS, cdf_batch, inverse_cdf_batch
from .nade import KrdaModel, activations, factor_params

CHUNK_ROWS = 256


@dataclass
class TransferReport:
    transferred: np.ndarray  # (n, d), original coordinates
    quantiles: np.ndarray  # (n, d), clipped source CDF values
    residuals: np.ndarray  # (n, d), |F_T(T(x)^i) - quantile|
    failures: list = field(default_factory=list)  # (row, component, message); component is 1-based

    @property
    def max_residual(self) -> float:
        ok = np.ones(self.residuals.shape, dtype=bool)
        for row, comp, _ in self.failures:
            ok[row, comp - 1] = False
        return float(self.residuals[ok].max()) if ok.any() else 0.0


def _transfer_block(model: KrdaModel, z_source: np.ndarray):
    """Transfer standardized rows; returns (z_target, quantiles, residuals, failed mask)."""
    n, d = z_source.shape
    src_act = activations(model, z_source)
    z_target = np.zeros((n, d))
    quantiles = np.zeros((n, d))
    residuals = np.zeros((n, d))
    failed = np.zeros((n, d), dtype=bool)
    a_t = np.broadcast_to(model.backbone.c, (n, model.H)).copy()
    for i in range(d):
        ws, mus, ss = factor_params(model, "source", src_act[:, i, :], i)
        q = np.clip(cdf_batch(ws, mus, ss, z_source[:, i]), QUANTILE_EPS, 1.0 - QUANTILE_EPS)
        wt, mut, st = factor_params(model, "target", a_t, i)
        z, ok = inverse_cdf_batch(wt, mut, st, q)
        if not ok.all():
            # fall back to the target conditional median so the output stays rectangular
            med, ok_med = inverse_cdf_batch(wt[~ok], mut[~ok], st[~ok], 0.5)
            z[~ok] = np.where(ok_med, med, 0.0)
        z_target[:, i] = z
        quantiles[:, i] = q
        residuals[:, i] = np.abs(cdf_batch(wt, mut, st, z) - q)
        failed[:, i] = ~ok
        a_t = a_t + z[:, None] * model.backbone.W[:, i]
    return z_target, quantiles, residuals, failed


def transfer_sample(model: KrdaModel, x_source) -> np.ndarray:
    """Map one source row (original coordinates) into the target domain."""
    x = np.asarray(x_source, dtype=float)
    if x.shape != (model.d,):
        raise DimensionMismatch(f"expected a vector of length {model.d}, got shape {x.shape}")
    z, _, _, failed = _transfer_block(model, model.standardizer.apply(x)[None, :])
    if failed.any():
        comp = int(np.argmax(failed[0])) + 1
        raise BracketNotFound(f"quantile inversion failed for component {comp}", component=comp)
    return model.standardizer.invert(z[0])


def transfer_dataset(model: KrdaModel, source: Dataset, workers=None) -> TransferReport:
    """Transfer every row; failures are recorded, never raised."""
    if source.d != model.d:
        raise DimensionMismatch(f"source has d={source.d}, model expects d={model.d}")
    n, d = source.n, model.d
    if n == 0:
        empty = np.zeros((0, d))
        return TransferReport(empty, empty.copy(), empty.copy(), [])
    z_source = model.standardizer.apply(source.features)
    chunks = [(k, min(k + CHUNK_ROWS, n)) for k in range(0, n, CHUNK_ROWS)]
    workers = workers or os.cpu_count() or 1

    def run(bounds):
        lo, hi = bounds
        return _transfer_block(model, z_source[lo:hi])

    if workers == 1 or len(chunks) == 1:
        parts = [run(b) for b in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, chunks))
    z_target = np.vstack([p[0] for p in parts])
    quantiles = np.vstack([p[1] for p in parts])
    residuals = np.vstack([p[2] for p in parts])
    failed = np.vstack([p[3] for p in parts])
    failures = [
        (int(r), int(c) + 1, "no bracket [-2**k, 2**k] found; substituted target conditional median")
        for r, c in zip(*np.nonzero(failed))
    ]
    return TransferReport(model.standardizer.invert(z_target), quantiles, residuals, failures)
