"""Multipath MIMO-OFDM channel synthesis and angular-delay transforms.

The spatial-frequency (SF) channel H is an (n_subcarriers, n_antennas) complex
matrix, one row per subcarrier.  The angular-delay (AD) domain applies a
unitary 2-D Fourier transform: an inverse DFT along the subcarrier axis, so
that propagation delays exp(-j*2*pi*f*tau) concentrate in the first rows, and
a forward DFT along the antenna axis.  Cropping the trailing delay rows gives
the truncated CSI the denoiser and the feedback task operate on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

C_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear transmit array over an OFDM subcarrier grid."""

    n_antennas: int
    spacing_m: float
    subcarrier_hz: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.subcarrier_hz, dtype=float)
        object.__setattr__(self, "subcarrier_hz", f)
        if self.n_antennas < 1:
            raise ValueError("n_antennas must be >= 1")
        if self.spacing_m <= 0:
            raise ValueError("antenna spacing must be positive")
        if f.ndim != 1 or f.size < 1:
            raise ValueError("subcarrier_hz must be a non-empty 1-D array")
        if f.size > 1 and np.any(np.diff(f) <= 0):
            raise ValueError("subcarrier frequencies must be strictly increasing")

    @property
    def n_subcarriers(self) -> int:
        return self.subcarrier_hz.size

    @classmethod
    def uniform(cls, n_subcarriers, n_antennas, carrier_hz=28e9,
                subcarrier_spacing_hz=500e3, spacing_m=None):
        """Regular subcarrier grid starting at carrier_hz.

        Antenna spacing defaults to a half wavelength at the band center,
        d = c / (2 * f_center).
        """
        f = carrier_hz + subcarrier_spacing_hz * np.arange(n_subcarriers)
        if spacing_m is None:
            spacing_m = C_LIGHT / (2.0 * float(f.mean()))
        return cls(n_antennas=n_antennas, spacing_m=spacing_m, subcarrier_hz=f)


@dataclass(frozen=True)
class PathParams:
    """Per-path attenuation, phase shift, delay, and angle of departure."""

    alpha: np.ndarray
    phi: np.ndarray
    tau_s: np.ndarray
    theta_rad: np.ndarray

    def __post_init__(self):
        for name in ("alpha", "phi", "tau_s", "theta_rad"):
            object.__setattr__(
                self, name,
                np.atleast_1d(np.asarray(getattr(self, name), dtype=float)))
        n = self.alpha.size
        if n == 0:
            raise ValueError("at least one path is required")
        for name in ("phi", "tau_s", "theta_rad"):
            if getattr(self, name).size != n:
                raise ValueError("path parameter arrays must share one length")
        if np.any(self.alpha < 0):
            raise ValueError("attenuations must be >= 0")
        if np.any(self.tau_s < 0):
            raise ValueError("delays must be >= 0")
        if np.any(np.abs(self.theta_rad) >= np.pi / 2):
            raise ValueError("angles must lie in (-pi/2, pi/2)")

    @property
    def n_paths(self) -> int:
        return self.alpha.size


def steering_vector(theta, f_hz, geom):
    """Far-field ULA steering vector at angle theta and frequency f_hz.

    Element k is exp(-j * 2*pi * d * f * k * sin(theta) / c); entries have
    unit modulus.
    """
    if not -np.pi / 2 < theta < np.pi / 2:
        raise ValueError("theta must lie in (-pi/2, pi/2)")
    k = np.arange(geom.n_antennas)
    return np.exp(-2j * np.pi * geom.spacing_m * f_hz * k
                  * np.sin(theta) / C_LIGHT)


def gen_channel(paths, geom):
    """Sum of per-path rank-one contributions, one row per subcarrier.

    H[n, :] = sum_l alpha_l * exp(-j*2*pi*f_n*tau_l + j*phi_l)
              * a(theta_l, f_n)
    """
    f = geom.subcarrier_hz
    k = np.arange(geom.n_antennas)
    H = np.zeros((f.size, geom.n_antennas), dtype=complex)
    fk = np.outer(f, k)
    for a, p, t, th in zip(paths.alpha, paths.phi, paths.tau_s,
                           paths.theta_rad):
        gain = a * np.exp(-2j * np.pi * f * t + 1j * p)
        steer = np.exp(-2j * np.pi * geom.spacing_m * np.sin(th) / C_LIGHT * fk)
        H += gain[:, None] * steer
    return H


def normalize_power(H):
    """Scale H so that its squared Frobenius norm equals its entry count."""
    H = np.asarray(H)
    energy = np.vdot(H, H).real
    if energy == 0:
        raise ValueError("cannot normalize an all-zero channel")
    return H * np.sqrt(H.size / energy)


def add_awgn(H, snr_db, rng):
    """Add complex white Gaussian noise at the given per-entry SNR.

    Returns (noisy, sigma2) with sigma2 = 10^(-snr_db/10) * mean(|h|^2), the
    per-entry complex noise variance.  snr_db = inf returns a clean copy with
    sigma2 = 0.
    """
    H = np.asarray(H)
    if np.isinf(snr_db) and snr_db > 0:
        return H.copy(), 0.0
    sigma2 = float(10.0 ** (-snr_db / 10.0) * np.mean(np.abs(H) ** 2))
    w = rng.standard_normal(H.shape) + 1j * rng.standard_normal(H.shape)
    return H + np.sqrt(sigma2 / 2.0) * w, sigma2


def sf2ad(H, crop_rows):
    """Unitary SF -> angular-delay transform keeping the first crop_rows rows.

    Inverse DFT along the subcarrier axis (delay), forward DFT along the
    antenna axis (angle), both with 1/sqrt(N) scaling.  The two trailing axes
    are (subcarriers, antennas); leading axes are treated as a batch.
    """
    H = np.asarray(H)
    if crop_rows > H.shape[-2]:
        raise ValueError("crop_rows exceeds the subcarrier count")
    X = np.fft.ifft(H, axis=-2, norm="ortho")
    X = np.fft.fft(X, axis=-1, norm="ortho")
    return X[..., :crop_rows, :]


def ad2sf(Hbar, n_subcarriers):
    """Zero-pad the cropped delay rows back to n_subcarriers and invert sf2ad."""
    Hbar = np.asarray(Hbar)
    if Hbar.shape[-2] > n_subcarriers:
        raise ValueError("crop_rows exceeds the subcarrier count")
    shape = Hbar.shape[:-2] + (n_subcarriers, Hbar.shape[-1])
    X = np.zeros(shape, dtype=complex)
    X[..., :Hbar.shape[-2], :] = Hbar
    X = np.fft.ifft(X, axis=-1, norm="ortho")
    return np.fft.fft(X, axis=-2, norm="ortho")


def draw_paths(rng, n_paths, delay_max_s, decay_db_per_path=3.0,
               aod_limit_rad=np.pi / 3):
    """Random multipath draw.

    Amplitudes are Rayleigh with mean power decaying decay_db_per_path per
    path; phases are uniform on [0, 2*pi), delays uniform on [0, delay_max_s],
    departure angles uniform on (-aod_limit_rad, aod_limit_rad).
    """
    scale = 10.0 ** (-decay_db_per_path * np.arange(n_paths) / 20.0)
    return PathParams(
        alpha=rng.rayleigh(scale=scale / np.sqrt(2.0)),
        phi=rng.uniform(0.0, 2.0 * np.pi, n_paths),
        tau_s=rng.uniform(0.0, delay_max_s, n_paths),
        theta_rad=rng.uniform(-aod_limit_rad, aod_limit_rad, n_paths),
    )


@dataclass
class DatasetConfig:
    """Synthetic dataset geometry, path statistics, and split sizes."""

    n_subcarriers: int = 64
    n_antennas: int = 32
    crop_rows: int = 32
    n_paths: int = 5
    n_train: int = 2000
    n_val: int = 500
    n_test: int = 500
    carrier_hz: float = 28e9
    subcarrier_spacing_hz: float = 500e3
    snr_db_min: float = 0.0
    snr_db_max: float = 40.0
    decay_db_per_path: float = 3.0
    aod_limit_rad: float = np.pi / 3
    # Fraction of the crop window the delay spread may occupy; delays at the
    # window edge would peak exactly at the crop boundary and leak out.
    delay_guard: float = 0.8

    @property
    def bandwidth_hz(self) -> float:
        return self.n_subcarriers * self.subcarrier_spacing_hz

    @property
    def delay_max_s(self) -> float:
        return self.delay_guard * self.crop_rows / self.bandwidth_hz

    def geometry(self) -> ArrayGeometry:
        return ArrayGeometry.uniform(self.n_subcarriers, self.n_antennas,
                                     self.carrier_hz,
                                     self.subcarrier_spacing_hz)


@dataclass
class DatasetSplit:
    """One sample set: clean/noisy SF channels plus their cropped AD forms."""

    h_clean: np.ndarray     # (n, N_s, N_t) complex64
    h_noisy: np.ndarray
    sigma2: np.ndarray      # (n,) float32
    hbar_clean: np.ndarray  # (n, crop_rows, N_t) complex64
    hbar_noisy: np.ndarray

    def __len__(self) -> int:
        return self.h_clean.shape[0]

    @property
    def crop_rows(self) -> int:
        return self.hbar_clean.shape[1]


@dataclass
class ChannelDataset:
    config: DatasetConfig
    train: DatasetSplit
    val: DatasetSplit
    test: DatasetSplit


_SPLIT_TAGS = {"train": 0, "val": 1, "test": 2}


def _gen_split(cfg, geom, seed, split_name, count):
    ns, nt, crop = cfg.n_subcarriers, cfg.n_antennas, cfg.crop_rows
    h_clean = np.empty((count, ns, nt), dtype=np.complex64)
    h_noisy = np.empty_like(h_clean)
    sigma2 = np.empty(count, dtype=np.float32)
    hbar_clean = np.empty((count, crop, nt), dtype=np.complex64)
    hbar_noisy = np.empty_like(hbar_clean)
    tag = _SPLIT_TAGS[split_name]
    for i in range(count):
        # per-sample stream keyed by (seed, split, index): samples are stable
        # under count changes and safe to generate in parallel
        rng = np.random.default_rng(np.random.SeedSequence((seed, tag, i)))
        paths = draw_paths(rng, cfg.n_paths, cfg.delay_max_s,
                           cfg.decay_db_per_path, cfg.aod_limit_rad)
        H = normalize_power(gen_channel(paths, geom))
        snr_db = rng.uniform(cfg.snr_db_min, cfg.snr_db_max)
        noisy, s2 = add_awgn(H, snr_db, rng)
        h_clean[i] = H
        h_noisy[i] = noisy
        sigma2[i] = s2
        hbar_clean[i] = sf2ad(H, crop)
        hbar_noisy[i] = sf2ad(noisy, crop)
    return DatasetSplit(h_clean, h_noisy, sigma2, hbar_clean, hbar_noisy)


def gen_dataset(cfg: DatasetConfig, seed: int) -> ChannelDataset:
    """Generate train/val/test splits; deterministic for a given seed."""
    if min(cfg.n_train, cfg.n_val, cfg.n_test) <= 0:
        raise ValueError("all split sizes must be positive")
    geom = cfg.geometry()
    return ChannelDataset(
        config=cfg,
        train=_gen_split(cfg, geom, seed, "train", cfg.n_train),
        val=_gen_split(cfg, geom, seed, "val", cfg.n_val),
        test=_gen_split(cfg, geom, seed, "test", cfg.n_test),
    )
