"""Reconstruction quality metrics.

NMSE averages per-sample error-energy ratios before taking dB.  Cosine
similarity averages per-subcarrier-row normalized correlations, which makes it
invariant to per-row complex scaling (beamforming gain direction match).
"""

from __future__ import annotations

import numpy as np

NMSE_FLOOR_DB = -300.0


def nmse_db(h_hat, h_ref):
    """10*log10(mean_j ||err_j||^2 / ||ref_j||^2), floored at -300 dB.

    Inputs are a single array or a batch with samples along the first axis
    (any trailing shape).  A zero-energy reference sample is an error.
    """
    h_hat = np.asarray(h_hat)
    h_ref = np.asarray(h_ref)
    if h_hat.shape != h_ref.shape:
        raise ValueError("estimate and reference shapes differ")
    if h_hat.ndim <= 2:
        h_hat = h_hat[None]
        h_ref = h_ref[None]
    n = h_hat.shape[0]
    err = (h_hat - h_ref).reshape(n, -1)
    ref = h_ref.reshape(n, -1)
    num = np.sum(np.abs(err) ** 2, axis=1)
    den = np.sum(np.abs(ref) ** 2, axis=1)
    if np.any(den == 0):
        raise ValueError("zero-energy reference sample")
    mean_ratio = float(np.mean(num / den))
    if mean_ratio <= 10.0 ** (NMSE_FLOOR_DB / 10.0):
        return NMSE_FLOOR_DB
    return float(10.0 * np.log10(mean_ratio))


def cos_similarity(h_hat, h_ref, return_skipped=False):
    """Mean over subcarrier rows of |h_hat^H h| / (||h_hat|| ||h||).

    Batches pool rows across samples.  Rows where either side has norm below
    1e-12 are excluded; the exclusion count is returned when asked for.
    """
    h_hat = np.asarray(h_hat)
    h_ref = np.asarray(h_ref)
    if h_hat.shape != h_ref.shape:
        raise ValueError("estimate and reference shapes differ")
    rows_hat = h_hat.reshape(-1, h_hat.shape[-1])
    rows_ref = h_ref.reshape(-1, h_ref.shape[-1])
    n_hat = np.linalg.norm(rows_hat, axis=1)
    n_ref = np.linalg.norm(rows_ref, axis=1)
    keep = (n_hat >= 1e-12) & (n_ref >= 1e-12)
    skipped = int(np.sum(~keep))
    if not np.any(keep):
        raise ValueError("all rows have near-zero norm")
    inner = np.abs(np.sum(np.conj(rows_hat[keep]) * rows_ref[keep], axis=1))
    value = float(np.mean(inner / (n_hat[keep] * n_ref[keep])))
    if return_skipped:
        return value, skipped
    return value
