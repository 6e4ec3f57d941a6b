"""Experiment orchestration.

Loads a saved dataset, sweeps the configured SNR or compression grid, runs
the splitting solver next to its classical baselines, and emits one CSV row
per (task, method, operating point) cell plus optional per-iteration trace
files.  Everything is driven by per-sample seeds derived from the experiment
seed, so a rerun with the same config reproduces every column except the
wall-clock runtime.
"""

from __future__ import annotations

import csv
import os
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .baselines import fit_lmmse_all, lmmse_estimate
from .channel_model import DatasetSplit, add_awgn, sf2ad
from .config import get_float, get_float_list, get_int, get_str
from .denoiser import CnnDenoiser, shrink_denoise
from .fileformats import load_dataset_split
from .hqs import SolverConfig
from .metrics import cos_similarity, nmse_db
from .tasks import (
    AntennaSelection,
    PilotPattern,
    compress,
    ls_init,
    make_projection,
    make_svd_cache,
    observe_antennas,
    observe_pilots,
    pack_csi,
    pppae,
    pppce,
    pppcf,
    spline_init,
)

CSV_COLUMNS = ["task", "method", "snr_db", "cr", "bits", "nmse_db", "cos",
               "runtime_ms", "iters", "cos_skipped_rows"]

_TASK_TAGS = {"ce": 1, "ae": 2, "cf": 3}


@dataclass
class ResultRow:
    """One aggregated metrics cell; cr/bits are 1/0 for the pilot tasks and
    snr_db is inf for the noiseless feedback task."""

    task: str
    method: str
    snr_db: float
    cr: float
    bits: int
    nmse_db: float
    cos: float
    runtime_ms: float
    iters: int
    cos_skipped_rows: int

    def as_csv(self) -> list:
        return [self.task, self.method, f"{self.snr_db:.10g}",
                f"{self.cr:.10g}", str(self.bits), f"{self.nmse_db:.10g}",
                f"{self.cos:.10g}", f"{self.runtime_ms:.3f}",
                str(self.iters), str(self.cos_skipped_rows)]


@dataclass
class ExperimentConfig:
    task: str
    dataset: str
    out: str = "results.csv"
    denoiser: str = "shrink"
    pattern: str = "A"
    selection: str = "A"
    snr_list: tuple = (0.0, 10.0, 20.0, 30.0)
    cr_list: tuple = (0.25,)
    bits: int = 0
    solver: SolverConfig = field(default_factory=SolverConfig)
    seed: int = 0
    trace_dir: Optional[str] = None
    n_samples: Optional[int] = None

    @classmethod
    def from_dict(cls, cfg: dict, task: Optional[str] = None):
        solver = SolverConfig(lam=get_float(cfg, "lam", 0.5),
                              rho0=get_float(cfg, "rho0", 0.1),
                              alpha=get_float(cfg, "alpha", 1.5),
                              n_iters=get_int(cfg, "n_iters", 10))
        n_samples = get_int(cfg, "n_samples", 0)
        return cls(task=task if task is not None else get_str(cfg, "task"),
                   dataset=get_str(cfg, "dataset"),
                   out=get_str(cfg, "out", "results.csv"),
                   denoiser=get_str(cfg, "denoiser", "shrink"),
                   pattern=get_str(cfg, "pattern", "A"),
                   selection=get_str(cfg, "selection", "A"),
                   snr_list=get_float_list(cfg, "snr_list",
                                           (0.0, 10.0, 20.0, 30.0)),
                   cr_list=get_float_list(cfg, "cr_list", (0.25,)),
                   bits=get_int(cfg, "bits", 0),
                   solver=solver,
                   seed=get_int(cfg, "seed", 0),
                   trace_dir=get_str(cfg, "trace_dir", None),
                   n_samples=n_samples if n_samples > 0 else None)

    def validate(self) -> None:
        if self.task not in _TASK_TAGS:
            raise ValueError(f"unknown task {self.task!r}")
        if len(self.snr_list) == 0:
            raise ValueError("snr_list must not be empty")
        test_path = f"{self.dataset}.test.pnpd"
        if not os.path.exists(test_path):
            raise ValueError(f"dataset file {test_path} does not exist")
        if self.task == "ce" and not os.path.exists(
                f"{self.dataset}.train.pnpd"):
            raise ValueError("channel estimation needs the training split "
                             "for the filtering baseline")
        if self.denoiser.startswith("cnn:"):
            path = self.denoiser[4:]
            if not os.path.exists(path):
                raise ValueError(f"weight file {path} does not exist")
        if self.pattern.startswith("file:"):
            path = self.pattern[5:]
            if not os.path.exists(path):
                raise ValueError(f"pilot pattern file {path} does not exist")
        if self.task == "cf" and len(self.cr_list) == 0:
            raise ValueError("cr_list must not be empty")


def _batch_sf2ad(h: np.ndarray, crop_rows: int) -> np.ndarray:
    return np.stack([sf2ad(h[i], crop_rows)
                     for i in range(h.shape[0])]).astype(np.complex64)


def load_split(path) -> DatasetSplit:
    """Read a dataset split and recompute its truncated angular-delay form."""
    h_clean, h_noisy, sigma2, crop_rows = load_dataset_split(path)
    return DatasetSplit(h_clean=h_clean, h_noisy=h_noisy, sigma2=sigma2,
                        hbar_clean=_batch_sf2ad(h_clean, crop_rows),
                        hbar_noisy=_batch_sf2ad(h_noisy, crop_rows))


def resolve_denoiser(name: str):
    """Map a config string to a factory truth -> denoise callable.

    Only the oracle uses the truth argument (the current sample's clean
    angular-delay image); the other denoisers ignore it.
    """
    if name == "identity":
        return lambda truth: (lambda hb, s2: hb)
    if name == "shrink":
        return lambda truth: shrink_denoise
    if name == "oracle":
        return lambda truth: (lambda hb, s2, _t=truth: np.array(_t))
    if name.startswith("cnn:"):
        den = CnnDenoiser.load(name[4:])
        return lambda truth: den.denoise
    raise ValueError(f"unknown denoiser {name!r}")


def _build_pattern(spec: str, n_s: int, n_t: int) -> PilotPattern:
    if spec.startswith("file:"):
        return PilotPattern.from_file(spec[5:], n_s, n_t)
    return PilotPattern.preset(spec, n_s, n_t)


def _sample_rng(cfg: ExperimentConfig, point_index: int, sample: int):
    return np.random.default_rng(np.random.SeedSequence(
        (cfg.seed, _TASK_TAGS[cfg.task], point_index, sample)))


def _aggregate(cfg, method, snr_db, cr, bits, estimates, refs, seconds,
               iters) -> ResultRow:
    est = np.array(estimates)
    ref = np.array(refs)
    cos, skipped = cos_similarity(est, ref, return_skipped=True)
    return ResultRow(task=cfg.task, method=method, snr_db=snr_db, cr=cr,
                     bits=bits, nmse_db=nmse_db(est, ref), cos=cos,
                     runtime_ms=seconds * 1e3, iters=iters,
                     cos_skipped_rows=skipped)


def _trace_path(cfg: ExperimentConfig, label: str, sample: int) -> str:
    return os.path.join(cfg.trace_dir,
                        f"{cfg.task}_{label}_s{sample:04d}.csv")


def _run_ce(cfg: ExperimentConfig, test: DatasetSplit) -> list:
    n_s, n_t = test.h_clean.shape[1:]
    crop = test.crop_rows
    pattern = _build_pattern(cfg.pattern, n_s, n_t)
    den_for = resolve_denoiser(cfg.denoiser)
    train_clean = load_dataset_split(f"{cfg.dataset}.train.pnpd")[0]
    n = len(test.h_clean) if cfg.n_samples is None else min(
        cfg.n_samples, len(test.h_clean))
    rows = []
    for si, snr_db in enumerate(cfg.snr_list):
        sigma2 = 10.0 ** (-snr_db / 10.0)
        filters = fit_lmmse_all(train_clean.astype(complex), pattern, sigma2)
        estimates = {"ls": [], "lmmse": [], "pnp": []}
        seconds = dict.fromkeys(estimates, 0.0)
        refs = []
        for i in range(n):
            try:
                truth = test.h_clean[i].astype(complex)
                refs.append(truth)
                obs = observe_pilots(truth, pattern, snr_db,
                                     _sample_rng(cfg, si, i))
                t0 = time.perf_counter()
                estimates["ls"].append(ls_init(obs, pattern))
                t1 = time.perf_counter()
                estimates["lmmse"].append(lmmse_estimate(obs, pattern,
                                                         filters))
                t2 = time.perf_counter()
                den = den_for(sf2ad(truth, crop))
                h_hat, trace = pppce(obs, pattern, den, cfg.solver, crop,
                                     ground_truth=truth)
                t3 = time.perf_counter()
                estimates["pnp"].append(h_hat)
                seconds["ls"] += t1 - t0
                seconds["lmmse"] += t2 - t1
                seconds["pnp"] += t3 - t2
                if cfg.trace_dir is not None:
                    trace.write_csv(_trace_path(cfg, f"snr{snr_db:g}", i))
            except Exception as exc:
                raise RuntimeError(f"task ce, snr {snr_db:g} dB, sample "
                                   f"{i}: {exc}") from exc
        for method in ("ls", "lmmse", "pnp"):
            iters = cfg.solver.n_iters if method == "pnp" else 0
            rows.append(_aggregate(cfg, method, snr_db, 1.0, 0,
                                   estimates[method], refs, seconds[method],
                                   iters))
    return rows


def _run_ae(cfg: ExperimentConfig, test: DatasetSplit) -> list:
    n_s, n_t = test.h_clean.shape[1:]
    crop = test.crop_rows
    sel = AntennaSelection.preset(cfg.selection, n_t)
    den_for = resolve_denoiser(cfg.denoiser)
    n = len(test.h_clean) if cfg.n_samples is None else min(
        cfg.n_samples, len(test.h_clean))
    rows = []
    for si, snr_db in enumerate(cfg.snr_list):
        estimates = {"spline": [], "pnp": []}
        seconds = dict.fromkeys(estimates, 0.0)
        refs = []
        for i in range(n):
            try:
                truth = test.h_clean[i].astype(complex)
                refs.append(truth)
                rng = _sample_rng(cfg, si, i)
                noisy, _ = add_awgn(truth, snr_db, rng)
                h_sel = observe_antennas(noisy, sel)
                t0 = time.perf_counter()
                estimates["spline"].append(spline_init(h_sel, sel, n_t))
                t1 = time.perf_counter()
                den = den_for(sf2ad(truth, crop))
                h_hat, trace = pppae(h_sel, sel, den, cfg.solver, crop,
                                     ground_truth=truth)
                t2 = time.perf_counter()
                estimates["pnp"].append(h_hat)
                seconds["spline"] += t1 - t0
                seconds["pnp"] += t2 - t1
                if cfg.trace_dir is not None:
                    trace.write_csv(_trace_path(cfg, f"snr{snr_db:g}", i))
            except Exception as exc:
                raise RuntimeError(f"task ae, snr {snr_db:g} dB, sample "
                                   f"{i}: {exc}") from exc
        for method in ("spline", "pnp"):
            iters = cfg.solver.n_iters if method == "pnp" else 0
            rows.append(_aggregate(cfg, method, snr_db, 1.0, 0,
                                   estimates[method], refs, seconds[method],
                                   iters))
    return rows


def _run_cf(cfg: ExperimentConfig, test: DatasetSplit) -> list:
    crop = test.crop_rows
    n_t = test.h_clean.shape[2]
    dim = 2 * crop * n_t
    den_for = resolve_denoiser(cfg.denoiser)
    n = len(test.h_clean) if cfg.n_samples is None else min(
        cfg.n_samples, len(test.h_clean))
    bits = cfg.bits if cfg.bits > 0 else None
    rows = []
    for ci, cr in enumerate(cfg.cr_list):
        m = int(round(cr * dim))
        if not 1 <= m <= dim:
            raise ValueError(f"compression ratio {cr:g} gives {m} "
                             "measurements")
        # one projection per ratio, shared by every sample
        a = make_projection(m, dim, np.random.default_rng(
            np.random.SeedSequence((cfg.seed, _TASK_TAGS["cf"], ci, 0xA))))
        cache = make_svd_cache(a)
        estimates, refs = [], []
        seconds = 0.0
        for i in range(n):
            try:
                truth = test.hbar_clean[i].astype(complex)
                refs.append(truth)
                code = compress(pack_csi(truth), a, bits=bits)
                t0 = time.perf_counter()
                den = den_for(truth)
                hbar_hat, trace = pppcf(code, cache, den, cfg.solver, crop,
                                        n_t, ground_truth=truth)
                seconds += time.perf_counter() - t0
                estimates.append(hbar_hat)
                if cfg.trace_dir is not None:
                    trace.write_csv(_trace_path(
                        cfg, f"cr{cr:g}_b{cfg.bits}", i))
            except Exception as exc:
                raise RuntimeError(f"task cf, cr {cr:g}, sample {i}: "
                                   f"{exc}") from exc
        rows.append(_aggregate(cfg, "pnp", np.inf, cr, cfg.bits, estimates,
                               refs, seconds, cfg.solver.n_iters))
    return rows


def write_rows_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow(row.as_csv())


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> list:
    """Run one task's sweep and return its ResultRows.

    With write=True (the default) the rows also land in cfg.out as CSV; the
    caller can disable that to combine several tasks into one file.
    """
    cfg.validate()
    if cfg.trace_dir is not None:
        os.makedirs(cfg.trace_dir, exist_ok=True)
    test = load_split(f"{cfg.dataset}.test.pnpd")
    runner = {"ce": _run_ce, "ae": _run_ae, "cf": _run_cf}[cfg.task]
    rows = runner(cfg, test)
    if write:
        write_rows_csv(cfg.out, rows)
    return rows
