"""Classical comparison estimators.

The pilot tasks are benchmarked against empirical LMMSE filtering: channel
correlation matrices are averaged over a training split, and each antenna
column gets its own frequency-domain filter acting on the least-squares
pilot estimates.  A joint filter over the flattened grid is also available
for small problems, where it cross-checks the per-column factorization.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .fileformats import load_tensors, save_tensors
from .tasks import PilotObservation, PilotPattern


@dataclass(frozen=True)
class LmmseFilter:
    """Fitted filter a_lmmse = r_h_hp @ inv(r_hp_hp + sigma2*I) together with
    the empirical correlation matrices that produced it."""

    a_lmmse: np.ndarray
    r_h_hp: np.ndarray
    r_hp_hp: np.ndarray
    sigma2: float
    pilot_idx: np.ndarray
    column: Optional[int]


def _fit(h_vecs: np.ndarray, pilot_idx: np.ndarray, sigma2: float,
         column: Optional[int]) -> LmmseFilter:
    """Empirical LMMSE from sample vectors (rows of h_vecs) onto their pilot
    coordinates observed in noise of variance sigma2."""
    if sigma2 < 0:
        raise ValueError("sigma2 must be non-negative")
    k = h_vecs.shape[0]
    if k < 10 * pilot_idx.size:
        raise ValueError(
            f"need at least {10 * pilot_idx.size} training samples for "
            f"{pilot_idx.size} pilot dimensions, got {k}")
    hp = h_vecs[:, pilot_idx]
    r_h_hp = h_vecs.T @ np.conj(hp) / k
    r_hp_hp = hp.T @ np.conj(hp) / k
    gram = r_hp_hp + sigma2 * np.eye(pilot_idx.size)
    if sigma2 == 0.0:
        w = np.linalg.eigvalsh(r_hp_hp)
        if w[0] <= 1e-12 * max(w[-1], 1e-300):
            raise ValueError("rank-deficient pilot correlation needs "
                             "sigma2 > 0 for regularization")
    # a @ gram = r_h_hp, solved through the transposed system
    a = np.linalg.solve(gram.T, r_h_hp.T).T
    return LmmseFilter(a_lmmse=a, r_h_hp=r_h_hp, r_hp_hp=r_hp_hp,
                       sigma2=float(sigma2), pilot_idx=pilot_idx,
                       column=column)


def fit_lmmse(h_train: np.ndarray, pattern: PilotPattern, sigma2: float,
              column: int) -> LmmseFilter:
    """Fit one antenna column's frequency-domain filter from training
    channels (k, n_s, n_t)."""
    idx = np.flatnonzero(pattern.mask[:, column])
    vecs = np.asarray(h_train[:, :, column], dtype=complex)
    return _fit(vecs, idx, sigma2, column)


def fit_lmmse_all(h_train: np.ndarray, pattern: PilotPattern,
                  sigma2: float) -> list:
    return [fit_lmmse(h_train, pattern, sigma2, j)
            for j in range(pattern.mask.shape[1])]


def fit_lmmse_joint(h_train: np.ndarray, pattern: PilotPattern,
                    sigma2: float) -> LmmseFilter:
    """Single filter over the flattened grid; feasible only at small sizes
    but free of the per-column independence assumption."""
    k = h_train.shape[0]
    idx = np.flatnonzero(pattern.mask.ravel())
    vecs = np.asarray(h_train, dtype=complex).reshape(k, -1)
    return _fit(vecs, idx, sigma2, None)


def _ls_at_pilots(obs: PilotObservation, pattern: PilotPattern) -> np.ndarray:
    m = pattern.mask
    if np.any(m & (np.abs(obs.x) == 0)):
        raise ValueError("zero pilot symbol on the mask")
    out = np.zeros(m.shape, dtype=complex)
    out[m] = obs.y[m] / obs.x[m]
    return out


def lmmse_estimate(obs: PilotObservation, pattern: PilotPattern,
                   filters: list) -> np.ndarray:
    """Apply per-column filters to the least-squares pilot estimates."""
    n_s, n_t = pattern.mask.shape
    if len(filters) != n_t:
        raise ValueError("need one filter per antenna column")
    ls = _ls_at_pilots(obs, pattern)
    out = np.empty((n_s, n_t), dtype=complex)
    for j, filt in enumerate(filters):
        idx = np.flatnonzero(pattern.mask[:, j])
        if filt.column != j or not np.array_equal(filt.pilot_idx, idx):
            raise ValueError(f"filter {j} was fitted for a different "
                             "pilot pattern")
        out[:, j] = filt.a_lmmse @ ls[idx, j]
    return out


def lmmse_estimate_joint(obs: PilotObservation, pattern: PilotPattern,
                         filt: LmmseFilter) -> np.ndarray:
    idx = np.flatnonzero(pattern.mask.ravel())
    if filt.column is not None or not np.array_equal(filt.pilot_idx, idx):
        raise ValueError("filter was fitted for a different pilot pattern")
    ls = _ls_at_pilots(obs, pattern)
    return (filt.a_lmmse @ ls.ravel()[idx]).reshape(pattern.mask.shape)


def save_filters(path, filters: list) -> None:
    """Persist a per-column filter bank in the shared tensor container."""
    tensors = {"meta.count": np.array(float(len(filters)), dtype=np.float32)}
    for j, f in enumerate(filters):
        if f.column != j:
            raise ValueError("filter bank must be ordered by column")
        tensors[f"col{j}.sigma2"] = np.array(f.sigma2, dtype=np.float32)
        tensors[f"col{j}.pilot_idx"] = f.pilot_idx.astype(np.float32)
        for name, mat in (("a_lmmse", f.a_lmmse), ("r_h_hp", f.r_h_hp),
                          ("r_hp_hp", f.r_hp_hp)):
            tensors[f"col{j}.{name}.re"] = mat.real.astype(np.float32)
            tensors[f"col{j}.{name}.im"] = mat.imag.astype(np.float32)
    save_tensors(path, tensors)


def load_filters(path) -> list:
    tensors = load_tensors(path)
    if "meta.count" not in tensors:
        raise ValueError(f"{path}: not a filter bank file")
    count = int(tensors["meta.count"])
    out = []
    for j in range(count):
        mats = {}
        for name in ("a_lmmse", "r_h_hp", "r_hp_hp"):
            mats[name] = (tensors[f"col{j}.{name}.re"].astype(complex)
                          + 1j * tensors[f"col{j}.{name}.im"])
        out.append(LmmseFilter(
            a_lmmse=mats["a_lmmse"], r_h_hp=mats["r_h_hp"],
            r_hp_hp=mats["r_hp_hp"],
            sigma2=float(tensors[f"col{j}.sigma2"]),
            pilot_idx=tensors[f"col{j}.pilot_idx"].astype(int),
            column=j))
    return out
