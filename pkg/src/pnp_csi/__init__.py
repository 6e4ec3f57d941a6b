"""Plug-and-play prior framework for massive MIMO downlink CSI reconstruction.

One convolutional denoiser, trained once on noisy channel matrices, serves as
the shared prior for three reconstruction tasks solved by half-quadratic
splitting: pilot-based channel estimation, antenna extrapolation, and
compressed CSI feedback.
"""

from .channel_model import (
    ArrayGeometry,
    DatasetConfig,
    PathParams,
    ad2sf,
    add_awgn,
    gen_channel,
    gen_dataset,
    normalize_power,
    sf2ad,
    steering_vector,
)
from .denoiser import CnnDenoiser, DenoiserSpec, TrainConfig, shrink_denoise, train_denoiser
from .hqs import IterationTrace, SolverConfig, run_pnp, sigma_schedule
from .metrics import cos_similarity, nmse_db
from .tasks import (
    AntennaSelection,
    FeedbackCode,
    PilotObservation,
    PilotPattern,
    SvdCache,
    compress,
    ls_init,
    make_projection,
    make_svd_cache,
    observe_antennas,
    observe_pilots,
    pppae,
    pppce,
    pppcf,
    prox_ae,
    prox_ce,
    prox_cf,
    spline_init,
)

__version__ = "0.1.0"

__all__ = [
    "ArrayGeometry", "DatasetConfig", "PathParams", "ad2sf", "add_awgn",
    "gen_channel", "gen_dataset", "normalize_power", "sf2ad",
    "steering_vector",
    "CnnDenoiser", "DenoiserSpec", "TrainConfig", "shrink_denoise",
    "train_denoiser",
    "IterationTrace", "SolverConfig", "run_pnp", "sigma_schedule",
    "cos_similarity", "nmse_db",
    "AntennaSelection", "FeedbackCode", "PilotObservation", "PilotPattern",
    "SvdCache", "compress", "ls_init", "make_projection", "make_svd_cache",
    "observe_antennas", "observe_pilots", "pppae", "pppce", "pppcf",
    "prox_ae", "prox_ce", "prox_cf", "spline_init",
]
