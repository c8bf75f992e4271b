"""Objective signal metrics and real-time-factor measurement.

These stand in for standardized perceptual metrics at desk scale:
spectral metrics for quality, an SNR proxy for intelligibility, and mel
consistency for the quantity the corrected sampler is designed to
minimize.
"""

from __future__ import annotations

import statistics
import threading
import time
from dataclasses import dataclass

import numpy as np

from .dsp import MelFilterbank, StftConfig, apply_mel, stft

LOG_FLOOR = 1e-5


@dataclass(frozen=True)
class MetricReport:
    spectral_convergence: float
    log_spectral_distance_db: float
    snr_db: float
    mel_consistency: float


def spectral_convergence(ref_mag: np.ndarray, est_mag: np.ndarray) -> float:
    """Relative Frobenius distance ||ref - est||_F / ||ref||_F."""
    ref_mag = np.asarray(ref_mag, dtype=np.float64)
    est_mag = np.asarray(est_mag, dtype=np.float64)
    if ref_mag.shape != est_mag.shape:
        raise ValueError(f"shape mismatch: {ref_mag.shape} vs {est_mag.shape}")
    denom = np.linalg.norm(ref_mag)
    if denom == 0.0:
        raise ValueError("reference magnitude has zero norm")
    return float(np.linalg.norm(ref_mag - est_mag) / denom)


def log_spectral_distance(
    ref_mag: np.ndarray, est_mag: np.ndarray, floor: float = LOG_FLOOR
) -> float:
    """RMS over frames of the per-frame RMS log-amplitude gap, in dB."""
    ref_mag = np.asarray(ref_mag, dtype=np.float64)
    est_mag = np.asarray(est_mag, dtype=np.float64)
    if ref_mag.shape != est_mag.shape:
        raise ValueError(f"shape mismatch: {ref_mag.shape} vs {est_mag.shape}")
    diff_db = 20.0 * (
        np.log10(np.maximum(ref_mag, floor)) - np.log10(np.maximum(est_mag, floor))
    )
    per_frame = np.sqrt(np.mean(diff_db**2, axis=1))
    return float(np.sqrt(np.mean(per_frame**2)))


def snr_db(ref: np.ndarray, est: np.ndarray) -> float:
    """10*log10(ref power / error power); +inf when est equals ref."""
    ref = np.asarray(ref, dtype=np.float64)
    est = np.asarray(est, dtype=np.float64)
    if ref.shape != est.shape:
        raise ValueError(f"shape mismatch: {ref.shape} vs {est.shape}")
    ref_power = float(np.sum(ref**2))
    if ref_power == 0.0:
        raise ValueError("reference has zero power")
    err_power = float(np.sum((ref - est) ** 2))
    if err_power == 0.0:
        return float("inf")
    return 10.0 * np.log10(ref_power / err_power)


def mel_consistency(
    waveform: np.ndarray,
    conditioning_mel: np.ndarray,
    fb: MelFilterbank,
    stft_config: StftConfig,
) -> float:
    """Relative Frobenius distance between the waveform's mel and the conditioning mel."""
    conditioning_mel = np.asarray(conditioning_mel, dtype=np.float64)
    denom = np.linalg.norm(conditioning_mel)
    if denom == 0.0:
        raise ValueError("conditioning mel has zero norm")
    spec = stft(np.asarray(waveform, dtype=np.float64), stft_config)
    if spec.shape[0] != conditioning_mel.shape[0]:
        raise ValueError(
            f"waveform yields {spec.shape[0]} frames, mel has {conditioning_mel.shape[0]}"
        )
    projected = apply_mel(np.abs(spec), fb)
    return float(np.linalg.norm(projected - conditioning_mel) / denom)


def report(
    ref: np.ndarray,
    est: np.ndarray,
    conditioning_mel: np.ndarray,
    fb: MelFilterbank,
    stft_config: StftConfig,
) -> MetricReport:
    """All four metrics for an estimate against a reference waveform."""
    ref_mag = np.abs(stft(ref, stft_config))
    est_mag = np.abs(stft(est, stft_config))
    return MetricReport(
        spectral_convergence=spectral_convergence(ref_mag, est_mag),
        log_spectral_distance_db=log_spectral_distance(ref_mag, est_mag),
        snr_db=snr_db(ref, est),
        mel_consistency=mel_consistency(est, conditioning_mel, fb, stft_config),
    )


@dataclass(frozen=True)
class RtfResult:
    """Real-time factor: audio seconds generated per wall-clock second."""

    rtf: float
    audio_seconds: float
    seconds_median: float
    seconds_all: tuple[float, ...]


_bench_lock = threading.Lock()


def measure_rtf(task, audio_seconds: float, repetitions: int = 1) -> RtfResult:
    """Time ``task()`` ``repetitions`` times and report the median-based RTF.

    The median is used instead of the mean for robustness to scheduler
    outliers. Only one benchmark may run in-process at a time.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    if audio_seconds <= 0.0:
        raise ValueError("audio_seconds must be positive")
    if not _bench_lock.acquire(blocking=False):
        raise RuntimeError("another benchmark is already running in this process")
    try:
        times = []
        for _ in range(repetitions):
            start = time.perf_counter()
            task()
            times.append(time.perf_counter() - start)
    finally:
        _bench_lock.release()
    median = statistics.median(times)
    return RtfResult(
        rtf=audio_seconds / median,
        audio_seconds=float(audio_seconds),
        seconds_median=median,
        seconds_all=tuple(times),
    )
