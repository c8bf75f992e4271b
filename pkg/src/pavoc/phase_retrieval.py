"""Griffin-Lim phase retrieval built from two projection operators.

The classic algorithm alternates projection onto the magnitude constraint
(replace magnitudes, keep phases) with projection onto the set of
consistent spectrograms (those in the image of the STFT operator). The
fast variant adds momentum extrapolation over the consistency-projected
iterates. Both are deterministic given the seed of the random phase
initialization.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import rng as _rng
from .dsp import MelFilterbank, StftConfig, estimate_magnitude, istft, stft

VARIANTS = ("classic", "fast")
PHASE_INITS = ("random", "zero", "provided")

DEFAULT_ITERATIONS = 32
DEFAULT_MOMENTUM = 0.99


@dataclass(frozen=True)
class GlaConfig:
    """Griffin-Lim settings. Momentum only applies to the fast variant."""

    iterations: int = DEFAULT_ITERATIONS
    variant: str = "fast"
    momentum: float = DEFAULT_MOMENTUM
    phase_init: str = "random"
    seed: int = 0
    provided_phase: np.ndarray | None = None

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.phase_init not in PHASE_INITS:
            raise ValueError(f"phase_init must be one of {PHASE_INITS}")
        if self.phase_init == "provided" and self.provided_phase is None:
            raise ValueError("phase_init 'provided' requires provided_phase")


def project_magnitude(spec: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Replace each entry's magnitude with the target, keeping its phase.

    Zero entries have no phase; they are assigned angle 0 so the output is
    target + 0j there instead of NaN.
    """
    spec = np.asarray(spec)
    target = np.asarray(target, dtype=np.float64)
    if spec.shape != target.shape:
        raise ValueError(f"shape mismatch: spec {spec.shape} vs target {target.shape}")
    mag = np.abs(spec)
    zero = mag == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        unit = spec / mag
    unit[zero] = 1.0
    return target * unit


def project_consistency(
    spec: np.ndarray, config: StftConfig, length: int | None = None
) -> np.ndarray:
    """Project onto the image of the STFT operator: stft(istft(spec)).

    ``length`` is the time-domain length of the round trip; by default the
    canonical length for the spectrogram's frame count.
    """
    spec = np.asarray(spec)
    if length is None:
        length = config.default_length(spec.shape[0])
    return stft(istft(spec, config, length), config)


def _initial_spectrogram(target: np.ndarray, config: GlaConfig) -> np.ndarray:
    if config.phase_init == "provided":
        provided = np.asarray(config.provided_phase)
        if provided.shape != target.shape:
            raise ValueError(
                f"provided phase shape {provided.shape} does not match target {target.shape}"
            )
        return provided.astype(np.complex128)
    if config.phase_init == "zero":
        return target.astype(np.complex128)
    angles = _rng.philox(config.seed).uniform(0.0, 2.0 * np.pi, target.shape)
    return target * np.exp(1j * angles)


def griffin_lim(
    target: np.ndarray,
    stft_config: StftConfig,
    gla_config: GlaConfig,
    length: int | None = None,
    callback=None,
) -> np.ndarray:
    """Reconstruct a time-domain signal whose STFT magnitude approximates ``target``.

    ``callback(iteration, consistent_spec, signal)`` is invoked after each
    consistency projection, which is the natural place to monitor the
    spectral-convergence error. The returned signal is the inverse STFT of
    a final magnitude projection of the last iterate.
    """
    target = np.asarray(target, dtype=np.float64)
    if target.ndim != 2 or target.shape[1] != stft_config.bins:
        raise ValueError(
            f"target shape {target.shape} does not match config bins {stft_config.bins}"
        )
    if not np.isfinite(target).all() or (target < 0.0).any():
        raise ValueError("target magnitude must be finite and non-negative")
    if length is None:
        length = stft_config.default_length(target.shape[0])

    current = _initial_spectrogram(target, gla_config)
    momentum = gla_config.momentum if gla_config.variant == "fast" else 0.0
    previous = None
    for k in range(gla_config.iterations):
        projected = project_magnitude(current, target)
        signal = istft(projected, stft_config, length)
        consistent = stft(signal, stft_config)
        if callback is not None:
            callback(k, consistent, signal)
        if previous is None:
            current = consistent
        else:
            current = consistent + momentum * (consistent - previous)
        previous = consistent
    return istft(project_magnitude(current, target), stft_config, length)


def reconstruct_from_mel(
    mel: np.ndarray,
    fb: MelFilterbank,
    stft_config: StftConfig,
    gla_config: GlaConfig,
    seed: int,
    length: int | None = None,
) -> np.ndarray:
    """Mel -> waveform via pseudo-inverse magnitude and seeded random-init GLA.

    This is the one-shot reconstruction used to correct the diffusion
    sampler; it never depends on a diffusion iterate, so it is computed
    once per generation.
    """
    config = replace(gla_config, phase_init="random", seed=seed, provided_phase=None)
    magnitude = estimate_magnitude(mel, fb)
    return griffin_lim(magnitude, stft_config, config, length=length)
