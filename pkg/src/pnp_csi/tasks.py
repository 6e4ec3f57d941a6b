"""Task heads for the three reconstruction problems.

Each task pairs an observation model with the closed-form proximal step of
its data-fidelity term and a cheap initializer, then hands everything to the
shared splitting driver:

* channel estimation: scattered pilot symbols on a subcarrier/antenna grid,
  per-entry scalar prox, nearest-pilot least-squares initializer;
* antenna extrapolation: a subset of antenna columns observed directly,
  per-column averaging prox, natural cubic spline initializer;
* compressed feedback: a real random projection of the truncated
  angular-delay image, ridge-regression prox solved through a cached SVD.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .channel_model import ad2sf, sf2ad
from .hqs import IterationTrace, SolverConfig, run_pnp, run_pnp_batch

_PILOT_PRESETS = {"A": (4, False), "B": (4, True), "C": (8, False),
                  "D": (8, True)}


@dataclass(frozen=True)
class PilotPattern:
    """Boolean pilot mask over the subcarrier/antenna grid.

    Every antenna column must carry at least one pilot so the least-squares
    initializer has something to hold.
    """

    mask: np.ndarray

    def __post_init__(self):
        mask = np.asarray(self.mask, dtype=bool)
        if mask.ndim != 2:
            raise ValueError("pilot mask must be 2-D")
        if not np.all(mask.sum(axis=0) >= 1):
            raise ValueError("every antenna column needs at least one pilot")
        object.__setattr__(self, "mask", mask)

    @classmethod
    def preset(cls, name: str, n_subcarriers: int, n_antennas: int):
        """Comb patterns A-D: full antenna rows on 4 (A, B) or 8 (C, D)
        evenly spaced subcarriers, shifted by half a spacing for B and D.
        On a 256-subcarrier grid this is 128 pilots at frequency spacing 64
        for A/B and 256 pilots at spacing 32 for C/D; smaller grids keep the
        row counts so the problem geometry survives downscaling."""
        if name not in _PILOT_PRESETS:
            raise ValueError(f"unknown pilot preset {name!r}")
        n_rows, shifted = _PILOT_PRESETS[name]
        spacing, rem = divmod(n_subcarriers, n_rows)
        if rem or spacing < 2:
            raise ValueError(
                f"preset {name} needs a subcarrier count divisible by "
                f"{n_rows} with spacing >= 2, got {n_subcarriers}")
        offset = spacing // 2 if shifted else 0
        mask = np.zeros((n_subcarriers, n_antennas), dtype=bool)
        mask[np.arange(offset, n_subcarriers, spacing), :] = True
        return cls(mask)

    @classmethod
    def from_file(cls, path, n_subcarriers: int, n_antennas: int):
        """Read 'subcarrier antenna' index pairs, one per line; '#' starts a
        comment."""
        mask = np.zeros((n_subcarriers, n_antennas), dtype=bool)
        with open(path) as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                parts = line.split()
                if len(parts) != 2:
                    raise ValueError(
                        f"line {lineno}: expected 'subcarrier antenna', "
                        f"got {raw.strip()!r}")
                try:
                    i, j = int(parts[0]), int(parts[1])
                except ValueError:
                    raise ValueError(f"line {lineno}: indices must be "
                                     "integers") from None
                if not (0 <= i < n_subcarriers and 0 <= j < n_antennas):
                    raise ValueError(f"line {lineno}: index out of range")
                mask[i, j] = True
        return cls(mask)

    def to_file(self, path):
        with open(path, "w") as fh:
            fh.write("# subcarrier antenna\n")
            for i, j in np.argwhere(self.mask):
                fh.write(f"{i} {j}\n")


@dataclass(frozen=True)
class PilotObservation:
    """Transmitted pilot symbols x, received samples y (both zero off the
    pilot mask), and the noise variance used."""

    x: np.ndarray
    y: np.ndarray
    sigma2: float

    def __post_init__(self):
        if self.x.shape != self.y.shape:
            raise ValueError("pilot symbol and observation shapes differ")


def observe_pilots(h: np.ndarray, pattern: PilotPattern, snr_db: float,
                   rng: np.random.Generator) -> PilotObservation:
    """Transmit unit-modulus QPSK pilots through h and add receiver noise.

    The noise variance is set relative to the mean squared channel entry, the
    same convention used when corrupting full channel snapshots.
    """
    mask = pattern.mask
    if h.shape != mask.shape:
        raise ValueError("channel and pilot mask shapes differ")
    n_pilots = int(mask.sum())
    quadrant = rng.integers(0, 4, size=n_pilots)
    symbols = np.exp(1j * (np.pi / 4 + np.pi / 2 * quadrant))
    x = np.zeros(mask.shape, dtype=complex)
    x[mask] = symbols
    sig_pow = float(np.mean(np.abs(h) ** 2))
    if np.isinf(snr_db):
        sigma2 = 0.0
        noise = 0.0
    else:
        sigma2 = sig_pow * 10.0 ** (-snr_db / 10.0)
        noise = np.sqrt(sigma2 / 2.0) * (
            rng.standard_normal(n_pilots) + 1j * rng.standard_normal(n_pilots))
    y = np.zeros(mask.shape, dtype=complex)
    y[mask] = x[mask] * h[mask] + noise
    return PilotObservation(x=x, y=y, sigma2=sigma2)


def ls_init(obs: PilotObservation, pattern: PilotPattern) -> np.ndarray:
    """Per-pilot least squares y/x, held to the nearest pilot row along each
    column (ties go to the lower row)."""
    mask = pattern.mask
    if np.any(mask & (np.abs(obs.x) == 0)):
        raise ValueError("zero pilot symbol on the mask")
    ls = np.zeros(mask.shape, dtype=complex)
    ls[mask] = obs.y[mask] / obs.x[mask]
    out = np.empty(mask.shape, dtype=complex)
    rows = np.arange(mask.shape[0])
    for j in range(mask.shape[1]):
        p = np.flatnonzero(mask[:, j])
        idx = np.searchsorted(p, rows)
        lo = p[np.clip(idx - 1, 0, p.size - 1)]
        hi = p[np.clip(idx, 0, p.size - 1)]
        nearest = np.where(rows - lo <= hi - rows, lo, hi)
        out[:, j] = ls[nearest, j]
    return out


def prox_ce(obs: PilotObservation, pattern: PilotPattern, z: np.ndarray,
            rho: float) -> np.ndarray:
    """Minimize |y - x*h|^2 + rho*|h - z|^2 entrywise.

    Pilot entries blend the matched-filtered observation with z; entries off
    the mask have no data term and pass z through.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    m = pattern.mask
    if z.shape != m.shape:
        raise ValueError("iterate and pilot mask shapes differ")
    out = np.array(z, dtype=complex, copy=True)
    xm = obs.x[m]
    out[m] = (np.conj(xm) * obs.y[m] + rho * z[m]) / (np.abs(xm) ** 2 + rho)
    return out


@dataclass(frozen=True)
class AntennaSelection:
    """Sorted antenna column indices observed by the extrapolation task."""

    indices: np.ndarray
    n_antennas: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=int)
        if idx.ndim != 1 or idx.size == 0:
            raise ValueError("need a non-empty 1-D index list")
        if np.unique(idx).size != idx.size:
            raise ValueError("duplicate antenna indices")
        if idx.min() < 0 or idx.max() >= self.n_antennas:
            raise ValueError("antenna index out of range")
        object.__setattr__(self, "indices", np.sort(idx))

    @classmethod
    def preset(cls, name: str, n_antennas: int):
        """Preset A keeps the odd-numbered antennas counting from 1, which
        are the even 0-based indices; preset B keeps the rest."""
        if name == "A":
            idx = np.arange(0, n_antennas, 2)
        elif name == "B":
            idx = np.arange(1, n_antennas, 2)
        else:
            raise ValueError(f"unknown antenna preset {name!r}")
        return cls(indices=idx, n_antennas=n_antennas)

    @property
    def complement(self) -> np.ndarray:
        return np.setdiff1d(np.arange(self.n_antennas), self.indices)


def observe_antennas(h: np.ndarray, selection: AntennaSelection) -> np.ndarray:
    if h.shape[1] != selection.n_antennas:
        raise ValueError("channel width and selection size differ")
    return h[:, selection.indices]


def spline_init(h_sel: np.ndarray, selection: AntennaSelection,
                n_antennas: int) -> np.ndarray:
    """Natural cubic spline through the observed columns, fit separately to
    the real and imaginary parts of each subcarrier row; columns outside the
    observed range take the boundary polynomial."""
    if n_antennas != selection.n_antennas:
        raise ValueError("selection was built for a different array size")
    if h_sel.shape[1] != selection.indices.size:
        raise ValueError("observed columns and selection size differ")
    if selection.indices.size < 2:
        raise ValueError("spline initializer needs at least two antennas")
    xq = np.arange(n_antennas)
    re = CubicSpline(selection.indices, h_sel.real, axis=1,
                     bc_type="natural")(xq)
    im = CubicSpline(selection.indices, h_sel.imag, axis=1,
                     bc_type="natural")(xq)
    return re + 1j * im


def prox_ae(h_sel: np.ndarray, selection: AntennaSelection, z: np.ndarray,
            rho: float) -> np.ndarray:
    """Minimize ||h_sel - h[:, sel]||^2 + rho*||h - z||^2 columnwise.

    Observed columns average the measurement with z; unobserved columns pass
    z through.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    if z.shape[1] != selection.n_antennas:
        raise ValueError("iterate width and selection size differ")
    out = np.array(z, dtype=complex, copy=True)
    idx = selection.indices
    out[:, idx] = (h_sel + rho * z[:, idx]) / (1.0 + rho)
    return out


def make_projection(m: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Real (m, n) compression matrix with orthonormal rows, from the QR
    factorization of a Gaussian draw (signs fixed so the result is unique)."""
    if not 1 <= m <= n:
        raise ValueError("need 1 <= m <= n")
    g = rng.standard_normal((n, m))
    q, r = np.linalg.qr(g, mode="reduced")
    d = np.sign(np.diag(r))
    d[d == 0] = 1.0
    return np.ascontiguousarray((q * d).T)


@dataclass(frozen=True)
class SvdCache:
    """Right singular vectors (rows of v), singular values, and row count of
    a projection matrix, precomputed once per compression ratio."""

    v: np.ndarray
    s: np.ndarray
    m: int


def make_svd_cache(a: np.ndarray) -> SvdCache:
    _, s, vh = np.linalg.svd(a, full_matrices=True)
    return SvdCache(v=vh, s=s, m=a.shape[0])


def quantize_uniform(v: np.ndarray, bits: int, lo: float, hi: float) -> np.ndarray:
    """Uniform mid-rise codes over [lo, hi): 2**bits cells, out-of-range
    values clamp to the edge cells."""
    if bits < 1:
        raise ValueError("bits must be >= 1")
    if not hi > lo:
        raise ValueError("need hi > lo")
    levels = 2 ** bits
    delta = (hi - lo) / levels
    codes = np.floor((np.asarray(v, dtype=float) - lo) / delta).astype(np.int64)
    return np.clip(codes, 0, levels - 1)


def dequantize_uniform(codes: np.ndarray, bits: int, lo: float,
                       hi: float) -> np.ndarray:
    if bits < 1:
        raise ValueError("bits must be >= 1")
    if not hi > lo:
        raise ValueError("need hi > lo")
    delta = (hi - lo) / 2 ** bits
    return lo + (np.asarray(codes, dtype=float) + 0.5) * delta


@dataclass(frozen=True)
class FeedbackCode:
    """Fed-back measurement vector, the projection that produced it, and the
    quantizer settings (bits is None when the projection is fed back
    unquantized)."""

    y: np.ndarray
    a: np.ndarray
    bits: Optional[int] = None
    q_range: Optional[float] = None


def pack_csi(hbar: np.ndarray) -> np.ndarray:
    """Stack the real then imaginary parts of the truncated angular-delay
    image into one real vector (row-major within each half)."""
    if hbar.ndim != 2:
        raise ValueError("expected a 2-D angular-delay image")
    return np.concatenate([np.asarray(hbar.real, dtype=np.float64).ravel(),
                           np.asarray(hbar.imag, dtype=np.float64).ravel()])


def unpack_csi(v: np.ndarray, rows: int, cols: int) -> np.ndarray:
    n = rows * cols
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (2 * n,):
        raise ValueError("packed vector length does not match rows*cols")
    return v[:n].reshape(rows, cols) + 1j * v[n:].reshape(rows, cols)


def compress(h: np.ndarray, a: np.ndarray, bits: Optional[int] = None
             ) -> FeedbackCode:
    """Project the packed vector and optionally quantize each measurement
    with a mid-rise quantizer spanning the symmetric observed range."""
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 1 or h.size != a.shape[1]:
        raise ValueError("vector length and projection width differ")
    y = a @ h
    if bits is None:
        return FeedbackCode(y=y, a=a)
    r = float(np.max(np.abs(y)))
    if r == 0.0:
        return FeedbackCode(y=y, a=a, bits=bits, q_range=0.0)
    codes = quantize_uniform(y, bits, -r, r)
    return FeedbackCode(y=dequantize_uniform(codes, bits, -r, r), a=a,
                        bits=bits, q_range=r)


def prox_cf(code: FeedbackCode, cache: SvdCache, z: np.ndarray,
            rho: float) -> np.ndarray:
    """Minimize ||y - A h||^2 + rho*||h - z||^2 over the packed real vector.

    The normal-equations solve (A^T A + rho I)^{-1} (A^T y + rho z) reduces,
    through the cached SVD, to scaling the m row-space coordinates of the
    right-hand side; the orthogonal complement is a plain division by rho.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    n = cache.v.shape[0]
    if code.a.shape != (cache.m, n):
        raise ValueError("projection and SVD cache shapes differ")
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (n,):
        raise ValueError("iterate length and projection width differ")
    t = code.a.T @ code.y + rho * z
    vm = cache.v[: cache.m]
    w = vm @ t
    return t / rho + vm.T @ ((1.0 / (cache.s ** 2 + rho) - 1.0 / rho) * w)


def _as_denoise_fn(den) -> Callable[[np.ndarray, float], np.ndarray]:
    """Accept either a denoiser object exposing .denoise or a bare
    callable(hbar, sigma2)."""
    if hasattr(den, "denoise"):
        return den.denoise
    if callable(den):
        return den
    raise TypeError("denoiser must be callable or provide a denoise method")


def pppce(obs: PilotObservation, pattern: PilotPattern, den,
          cfg: SolverConfig, crop_rows: int,
          ground_truth: Optional[np.ndarray] = None):
    """Estimate the full channel from scattered pilots.

    Iterates live in the spatial-frequency domain; the denoiser sees the
    truncated angular-delay image through the transform bridge.  Returns the
    reconstructed channel and the iteration trace.
    """
    n_s = pattern.mask.shape[0]
    den_fn = _as_denoise_fn(den)
    bridge = (lambda x: sf2ad(x, crop_rows), lambda xb: ad2sf(xb, n_s))
    z0 = ls_init(obs, pattern)
    prox = lambda z, rho: prox_ce(obs, pattern, z, rho)
    return run_pnp(prox, den_fn, z0, cfg, bridge=bridge,
                   ground_truth=ground_truth)


def pppae(h_sel: np.ndarray, selection: AntennaSelection, den,
          cfg: SolverConfig, crop_rows: int,
          ground_truth: Optional[np.ndarray] = None):
    """Extrapolate the unobserved antenna columns from the observed ones.

    Same bridge arrangement as channel estimation; the spline initializer
    fills the missing columns before the first data step.
    """
    n_s = h_sel.shape[0]
    den_fn = _as_denoise_fn(den)
    bridge = (lambda x: sf2ad(x, crop_rows), lambda xb: ad2sf(xb, n_s))
    z0 = spline_init(h_sel, selection, selection.n_antennas)
    prox = lambda z, rho: prox_ae(h_sel, selection, z, rho)
    return run_pnp(prox, den_fn, z0, cfg, bridge=bridge,
                   ground_truth=ground_truth)


def pppcf(code: FeedbackCode, cache: SvdCache, den, cfg: SolverConfig,
          crop_rows: int, n_antennas: int,
          ground_truth: Optional[np.ndarray] = None):
    """Reconstruct the truncated angular-delay image from its fed-back
    projection.

    The whole loop runs in the denoiser's domain, so no bridge is needed; the
    iterate is packed to a real vector only inside the data step.  The loop
    starts from the adjoint reconstruction A^T y.
    """
    n = cache.v.shape[0]
    if 2 * crop_rows * n_antennas != n:
        raise ValueError("projection width does not match the image size")
    den_fn = _as_denoise_fn(den)
    z0 = unpack_csi(code.a.T @ code.y, crop_rows, n_antennas)
    prox = lambda z, rho: unpack_csi(
        prox_cf(code, cache, pack_csi(z), rho), crop_rows, n_antennas)
    return run_pnp(prox, den_fn, z0, cfg, ground_truth=ground_truth)


def _as_batch_denoise_fn(den) -> Callable[[np.ndarray, float], np.ndarray]:
    """Batched counterpart of _as_denoise_fn: use a native denoise_batch when
    the denoiser has one, otherwise loop a per-sample callable."""
    if hasattr(den, "denoise_batch"):
        return lambda hb, s2: den.denoise_batch(hb, np.full(len(hb), s2))
    fn = _as_denoise_fn(den)
    return lambda hb, s2: np.stack([fn(h, s2) for h in hb])


def pppce_batch(obs_list, pattern: PilotPattern, den, cfg: SolverConfig,
                crop_rows: int, ground_truth: Optional[np.ndarray] = None):
    """pppce over a batch of observations sharing one pilot pattern.

    Lockstep iterations with one batched denoiser call per step; per-sample
    results match pppce.  Returns stacked estimates and one trace per sample.
    """
    if len(obs_list) == 0:
        raise ValueError("need at least one observation")
    m = pattern.mask
    n_s = m.shape[0]
    x = np.stack([o.x for o in obs_list])
    y = np.stack([o.y for o in obs_list])
    xm, ym = x[:, m], y[:, m]

    def prox(z, rho):
        out = np.array(z, dtype=complex, copy=True)
        out[:, m] = (np.conj(xm) * ym + rho * z[:, m]) \
            / (np.abs(xm) ** 2 + rho)
        return out

    bridge = (lambda v: sf2ad(v, crop_rows), lambda vb: ad2sf(vb, n_s))
    z0 = np.stack([ls_init(o, pattern) for o in obs_list])
    return run_pnp_batch(prox, _as_batch_denoise_fn(den), z0, cfg,
                         bridge=bridge, ground_truth=ground_truth)


def pppae_batch(h_sel: np.ndarray, selection: AntennaSelection, den,
                cfg: SolverConfig, crop_rows: int,
                ground_truth: Optional[np.ndarray] = None):
    """pppae over stacked (n, n_s, observed) column subsets."""
    if h_sel.ndim != 3:
        raise ValueError("expected stacked observations (n, rows, selected)")
    n_s = h_sel.shape[1]
    idx = selection.indices

    def prox(z, rho):
        out = np.array(z, dtype=complex, copy=True)
        out[:, :, idx] = (h_sel + rho * z[:, :, idx]) / (1.0 + rho)
        return out

    bridge = (lambda v: sf2ad(v, crop_rows), lambda vb: ad2sf(vb, n_s))
    z0 = np.stack([spline_init(h, selection, selection.n_antennas)
                   for h in h_sel])
    return run_pnp_batch(prox, _as_batch_denoise_fn(den), z0, cfg,
                         bridge=bridge, ground_truth=ground_truth)


def pppcf_batch(codes, cache: SvdCache, den, cfg: SolverConfig,
                crop_rows: int, n_antennas: int,
                ground_truth: Optional[np.ndarray] = None):
    """pppcf over a batch of feedback codes sharing one projection."""
    if len(codes) == 0:
        raise ValueError("need at least one feedback code")
    a = codes[0].a
    if any(c.a is not a and not np.array_equal(c.a, a) for c in codes):
        raise ValueError("feedback codes must share one projection")
    dim = cache.v.shape[0]
    if 2 * crop_rows * n_antennas != dim:
        raise ValueError("projection width does not match the image size")
    half = crop_rows * n_antennas
    y = np.stack([c.y for c in codes])
    adj = y @ a
    vm = cache.v[: cache.m]

    def unpack(p):
        return (p[:, :half] + 1j * p[:, half:]).reshape(
            len(p), crop_rows, n_antennas)

    def pack(z):
        zf = z.reshape(len(z), half)
        return np.concatenate([zf.real, zf.imag], axis=1)

    def prox(z, rho):
        t = adj + rho * pack(z)
        w = t @ vm.T
        p = t / rho + ((1.0 / (cache.s ** 2 + rho) - 1.0 / rho) * w) @ vm
        return unpack(p)

    z0 = unpack(adj)
    return run_pnp_batch(prox, _as_batch_denoise_fn(den), z0, cfg,
                         ground_truth=ground_truth)
