"""Noise schedules and reverse-process sampling.

Index convention: step ``t`` runs 1..T with ``alpha_bars[0] = 1`` (the
empty product), which forces ``sigmas_ddpm[1] = 0`` and makes the final
reverse step deterministic. The three reverse rules:

* plain          — the decomposed update (predicted clean signal, direction
                   to the iterate, noise); equals the classic stochastic
                   update when sigma is the DDPM choice.
* corrected      — the same update with the predicted clean signal replaced
                   by a waveform reconstructed once from the conditioning
                   mel, applied while t > stage1_end.
* per-step baseline — the prior approach: rebuild the whole iterate each
                   stage-1 step by re-running phase retrieval seeded with
                   the current iterate's phase, then re-noising to t-1.
"""

from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import rng as _rng
from .dsp import MelFilterbank, StftConfig, build_mel_filterbank, estimate_magnitude, stft
from .phase_retrieval import GlaConfig, griffin_lim, reconstruct_from_mel

VARIANTS = ("plain", "per_step_gla_baseline", "corrected")
SIGMA_MODES = ("ddpm", "ddim_zero")


@dataclass(frozen=True)
class NoiseSchedule:
    """Derived sequences for a T-step schedule.

    ``betas``/``alphas`` have length T (index t-1 holds step t);
    ``alpha_bars`` and ``sigmas_ddpm`` have length T+1 and are indexed by t
    directly, with ``alpha_bars[0] = 1`` and ``sigmas_ddpm[0]`` unused.
    """

    betas: np.ndarray
    alphas: np.ndarray
    alpha_bars: np.ndarray
    sigmas_ddpm: np.ndarray

    @property
    def T(self) -> int:
        return self.betas.shape[0]

    def check_step(self, t: int, allow_zero: bool = False) -> None:
        low = 0 if allow_zero else 1
        if not low <= t <= self.T:
            raise ValueError(f"step {t} outside [{low}, {self.T}]")


def schedule_from_betas(betas) -> NoiseSchedule:
    """Derive alphas, cumulative products and DDPM sigmas from beta values."""
    betas = np.asarray(betas, dtype=np.float64)
    if betas.ndim != 1 or betas.size < 1:
        raise ValueError("betas must be a non-empty 1-D sequence")
    if ((betas <= 0.0) | (betas >= 1.0)).any():
        raise ValueError("every beta must lie in (0, 1)")
    alphas = 1.0 - betas
    alpha_bars = np.concatenate([[1.0], np.cumprod(alphas)])
    sigmas = np.zeros(betas.size + 1)
    sigmas[1:] = np.sqrt(
        (1.0 - alpha_bars[:-1]) / (1.0 - alpha_bars[1:]) * betas
    )
    return NoiseSchedule(
        betas=betas, alphas=alphas, alpha_bars=alpha_bars, sigmas_ddpm=sigmas
    )


def _check_same_shape(*arrays) -> None:
    shapes = {a.shape for a in arrays}
    if len(shapes) > 1:
        raise ValueError(f"operand shapes differ: {sorted(shapes)}")


def forward_diffuse(y0: np.ndarray, t: int, eps: np.ndarray, schedule: NoiseSchedule) -> np.ndarray:
    """y_t = sqrt(abar_t) * y0 + sqrt(1 - abar_t) * eps; t = 0 returns y0."""
    schedule.check_step(t, allow_zero=True)
    y0 = np.asarray(y0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    _check_same_shape(y0, eps)
    abar = schedule.alpha_bars[t]
    return np.sqrt(abar) * y0 + np.sqrt(1.0 - abar) * eps


def predict_y0(y_t: np.ndarray, eps_hat: np.ndarray, t: int, schedule: NoiseSchedule) -> np.ndarray:
    """Invert the forward closed form for the clean-signal estimate."""
    schedule.check_step(t)
    y_t = np.asarray(y_t, dtype=np.float64)
    eps_hat = np.asarray(eps_hat, dtype=np.float64)
    _check_same_shape(y_t, eps_hat)
    abar = schedule.alpha_bars[t]
    return (y_t - np.sqrt(1.0 - abar) * eps_hat) / np.sqrt(abar)


def ddpm_step(
    y_t: np.ndarray, eps_hat: np.ndarray, t: int, schedule: NoiseSchedule, z: np.ndarray
) -> np.ndarray:
    """Classic stochastic reverse step with the schedule's own sigma."""
    schedule.check_step(t)
    y_t = np.asarray(y_t, dtype=np.float64)
    eps_hat = np.asarray(eps_hat, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    _check_same_shape(y_t, eps_hat, z)
    alpha = schedule.alphas[t - 1]
    abar = schedule.alpha_bars[t]
    mean = (y_t - (1.0 - alpha) / np.sqrt(1.0 - abar) * eps_hat) / np.sqrt(alpha)
    return mean + schedule.sigmas_ddpm[t] * z


def ddim_step(
    y_t: np.ndarray,
    eps_hat: np.ndarray,
    t: int,
    schedule: NoiseSchedule,
    sigma_t: float,
    z: np.ndarray,
) -> np.ndarray:
    """Decomposed reverse step: scaled predicted-y0 + direction + noise."""
    schedule.check_step(t)
    abar_prev = schedule.alpha_bars[t - 1]
    radicand = 1.0 - abar_prev - sigma_t**2
    if sigma_t < 0.0 or radicand < 0.0:
        raise ValueError(
            f"sigma {sigma_t} outside [0, sqrt(1 - abar_{t - 1})] at step {t}"
        )
    z = np.asarray(z, dtype=np.float64)
    predicted = predict_y0(y_t, eps_hat, t, schedule)
    _check_same_shape(predicted, z)
    return (
        np.sqrt(abar_prev) * predicted
        + np.sqrt(radicand) * np.asarray(eps_hat, dtype=np.float64)
        + sigma_t * z
    )


def corrected_step(
    y_t: np.ndarray,
    eps_hat: np.ndarray,
    t: int,
    schedule: NoiseSchedule,
    sigma_t: float,
    z: np.ndarray,
    x_tilde: np.ndarray,
) -> np.ndarray:
    """Decomposed step with the predicted clean signal replaced by ``x_tilde``."""
    schedule.check_step(t)
    y_t = np.asarray(y_t, dtype=np.float64)
    eps_hat = np.asarray(eps_hat, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    x_tilde = np.asarray(x_tilde, dtype=np.float64)
    _check_same_shape(y_t, eps_hat, z, x_tilde)
    abar_prev = schedule.alpha_bars[t - 1]
    radicand = 1.0 - abar_prev - sigma_t**2
    if sigma_t < 0.0 or radicand < 0.0:
        raise ValueError(
            f"sigma {sigma_t} outside [0, sqrt(1 - abar_{t - 1})] at step {t}"
        )
    return np.sqrt(abar_prev) * x_tilde + np.sqrt(radicand) * eps_hat + sigma_t * z


def per_step_gla_baseline_step(
    y_t: np.ndarray,
    eps_hat: np.ndarray,
    t: int,
    schedule: NoiseSchedule,
    mel: np.ndarray,
    fb: MelFilterbank,
    stft_config: StftConfig,
    gla_config: GlaConfig,
    z: np.ndarray,
) -> np.ndarray:
    """Prior method's stage-1 update, reimplemented for timing/quality comparison.

    Runs phase retrieval on the mel-derived magnitude, seeding the phase
    from the current predicted clean signal, and re-noises the result to
    step t-1. The step's own z is reused for the re-noising.
    """
    y_t = np.asarray(y_t, dtype=np.float64)
    predicted = predict_y0(y_t, eps_hat, t, schedule)
    config = replace(
        gla_config, phase_init="provided", provided_phase=stft(predicted, stft_config)
    )
    magnitude = estimate_magnitude(mel, fb)
    rebuilt = griffin_lim(magnitude, stft_config, config, length=y_t.shape[0])
    return forward_diffuse(rebuilt, t - 1, z, schedule)


@dataclass(frozen=True)
class SamplerConfig:
    """Generation settings: variant, sigma rule, stage-1 endpoint and seeds."""

    variant: str = "corrected"
    sigma_mode: str = "ddpm"
    stage1_end: int = 3
    seed: int = 0
    gla: GlaConfig = field(default_factory=GlaConfig)
    stft: StftConfig = field(default_factory=StftConfig)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.sigma_mode not in SIGMA_MODES:
            raise ValueError(f"sigma_mode must be one of {SIGMA_MODES}")
        if self.stage1_end < 0:
            raise ValueError("stage1_end must be >= 0")


@dataclass
class StepRecord:
    t: int
    wall_time_ns: int
    y_sha256: str
    y: np.ndarray | None = None


@dataclass
class GenerationTrace:
    steps: list[StepRecord]
    waveform: np.ndarray


def _digest(y: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(y).tobytes()).hexdigest()


def generate(
    mel: np.ndarray,
    predictor,
    schedule: NoiseSchedule,
    config: SamplerConfig,
    length: int,
    fb: MelFilterbank | None = None,
    x_tilde: np.ndarray | None = None,
    keep_snapshots: bool = False,
) -> tuple[np.ndarray, GenerationTrace]:
    """Run the reverse process conditioned on ``mel`` and return (waveform, trace).

    The noise stream is a single Philox generator keyed by the config seed,
    consumed in a fixed order: y_T first, then one z per step from t = T
    down to 1 (z is drawn even where sigma is zero, to keep the stream
    alignment independent of the sigma mode). For the corrected variant the
    correction waveform is reconstructed once, before the loop, unless a
    precomputed ``x_tilde`` is supplied (oracle experiments).
    """
    from .predictor import PredictorRequest  # local import to avoid a cycle

    mel = np.asarray(mel, dtype=np.float64)
    T = schedule.T
    stage1_end = config.stage1_end
    if config.variant != "plain" and stage1_end > T:
        raise ValueError(f"stage1_end {stage1_end} exceeds schedule length {T}")
    if config.stft.frame_count(length) != mel.shape[0]:
        raise ValueError(
            f"length {length} yields {config.stft.frame_count(length)} frames, "
            f"mel has {mel.shape[0]}"
        )
    if fb is None:
        fb = build_mel_filterbank(mel.shape[1], config.stft)

    needs_correction = config.variant == "corrected" and stage1_end < T
    if needs_correction and x_tilde is None:
        x_tilde = reconstruct_from_mel(
            mel, fb, config.stft, config.gla, config.seed, length=length
        )
    if x_tilde is not None and x_tilde.shape != (length,):
        raise ValueError(f"x_tilde length {x_tilde.shape} does not match {length}")

    stream = _rng.philox(config.seed)
    y = _rng.standard_normal(stream, length)
    steps: list[StepRecord] = []
    for t in range(T, 0, -1):
        z = _rng.standard_normal(stream, length)
        noise_level = float(np.sqrt(schedule.alpha_bars[t]))
        eps_hat = predictor.predict(PredictorRequest(y_t=y, mel=mel, noise_level=noise_level))
        eps_hat = np.asarray(eps_hat, dtype=np.float64)
        if eps_hat.shape != y.shape:
            raise ValueError(
                f"predictor returned shape {eps_hat.shape}, expected {y.shape}"
            )
        sigma = float(schedule.sigmas_ddpm[t]) if config.sigma_mode == "ddpm" else 0.0
        in_stage1 = config.variant != "plain" and t > stage1_end
        if in_stage1 and config.variant == "corrected":
            y = corrected_step(y, eps_hat, t, schedule, sigma, z, x_tilde)
        elif in_stage1:
            y = per_step_gla_baseline_step(
                y, eps_hat, t, schedule, mel, fb, config.stft, config.gla, z
            )
        else:
            y = ddim_step(y, eps_hat, t, schedule, sigma, z)
        steps.append(
            StepRecord(
                t=t,
                wall_time_ns=time.perf_counter_ns(),
                y_sha256=_digest(y),
                y=y.copy() if keep_snapshots else None,
            )
        )
    return y, GenerationTrace(steps=steps, waveform=y)
