"""Windowed STFT analysis/synthesis and mel filterbank construction.

Conventions (fixed for bit-reproducibility):

* Spectrograms are ``(frames, bins)`` arrays with ``bins = n_fft // 2 + 1``;
  complex spectrograms are complex128, magnitudes/mels are non-negative
  float64 linear amplitudes.
* The forward DFT is unnormalized and the inverse carries ``1/n_fft``
  (numpy's ``rfft``/``irfft`` defaults).  Per frame this gives the Parseval
  identity ``sum(weight_k * |X_k|^2) / n_fft == sum((w * x)^2)`` with
  ``weight_k = 2`` except 1 at DC and Nyquist.
* Centered analysis reflect-pads the signal by ``n_fft // 2`` on both ends,
  which makes the frame count ``1 + len(signal) // hop_length``.
* The analysis window is the periodic Hann of ``win_length`` samples,
  zero-padded symmetrically to ``n_fft``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

# Relative deviation allowed in the squared-window overlap-add before
# synthesis is refused.
COLA_TOLERANCE = 1e-10

# Denominator floor for the overlap-add normalization; positions whose
# window-square sum falls below it are left at zero.
_OLA_TINY = 1e-12


@dataclass(frozen=True)
class StftConfig:
    """STFT geometry. Defaults are the 22.05 kHz vocoder setup (2048/1200/300)."""

    n_fft: int = 2048
    win_length: int = 1200
    hop_length: int = 300
    sample_rate: int = 22050
    centered: bool = True

    def __post_init__(self):
        if self.n_fft < 1 or self.win_length < 1 or self.hop_length < 1:
            raise ValueError("n_fft, win_length and hop_length must be positive")
        if self.win_length > self.n_fft:
            raise ValueError(f"win_length {self.win_length} exceeds n_fft {self.n_fft}")
        if self.hop_length > self.win_length:
            raise ValueError(f"hop_length {self.hop_length} exceeds win_length {self.win_length}")
        if self.sample_rate < 1:
            raise ValueError("sample_rate must be positive")

    @property
    def bins(self) -> int:
        return self.n_fft // 2 + 1

    def frame_count(self, n_samples: int) -> int:
        """Number of analysis frames for a signal of ``n_samples``."""
        if n_samples < 1:
            raise ValueError("signal must be non-empty")
        if self.centered:
            return 1 + n_samples // self.hop_length
        if n_samples < self.n_fft:
            raise ValueError("uncentered analysis needs at least n_fft samples")
        return 1 + (n_samples - self.n_fft) // self.hop_length

    def default_length(self, frames: int) -> int:
        """Canonical signal length for a centered spectrogram of ``frames``."""
        return (frames - 1) * self.hop_length


def make_hann_window(length: int) -> np.ndarray:
    """Periodic Hann window: w[k] = 0.5 * (1 - cos(2*pi*k/length))."""
    if length < 1:
        raise ValueError("window length must be >= 1")
    k = np.arange(length)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * k / length))


def padded_window(config: StftConfig) -> np.ndarray:
    """Analysis window zero-padded symmetrically to n_fft."""
    win = make_hann_window(config.win_length)
    out = np.zeros(config.n_fft)
    offset = (config.n_fft - config.win_length) // 2
    out[offset : offset + config.win_length] = win
    return out


def cola_deviation(config: StftConfig) -> float:
    """Relative peak deviation of the squared-window overlap-add.

    Measured over the steady-state interior of a long enough tiling; 0 for
    hops that satisfy constant-overlap-add of the squared window.
    """
    w2 = padded_window(config) ** 2
    n_fft, hop = config.n_fft, config.hop_length
    total = 4 * n_fft
    ola = np.zeros(total)
    last_start = ((total - n_fft) // hop) * hop
    for start in range(0, last_start + 1, hop):
        ola[start : start + n_fft] += w2
    region = ola[n_fft : last_start + 1]
    mean = region.mean()
    if mean <= 0.0:
        return np.inf
    return float((region.max() - region.min()) / mean)


def check_cola(config: StftConfig) -> None:
    """Raise ConfigurationError when the window/hop pair is unfit for synthesis."""
    dev = cola_deviation(config)
    if not dev <= COLA_TOLERANCE:
        raise ConfigurationError(
            f"window/hop ({config.win_length}/{config.hop_length}) violates "
            f"constant overlap-add: relative deviation {dev:.3e} > {COLA_TOLERANCE:.0e}"
        )


def stft(signal: np.ndarray, config: StftConfig) -> np.ndarray:
    """Forward STFT of a real 1-D signal, returning (frames, bins) complex128."""
    signal = np.asarray(signal, dtype=np.float64)
    if signal.ndim != 1 or signal.size < 1:
        raise ValueError("signal must be a non-empty 1-D array")
    n_fft, hop = config.n_fft, config.hop_length
    if config.centered:
        pad = n_fft // 2
        signal = np.pad(signal, pad, mode="reflect")
    elif signal.size < n_fft:
        raise ValueError("uncentered analysis needs at least n_fft samples")
    window = padded_window(config)
    frames = np.lib.stride_tricks.sliding_window_view(signal, n_fft)[::hop]
    return np.fft.rfft(frames * window, axis=1)


def istft(spec: np.ndarray, config: StftConfig, target_length: int) -> np.ndarray:
    """Inverse STFT by windowed overlap-add with squared-window normalization.

    Exact (to rounding) inverse of :func:`stft` on unmodified spectrograms;
    on modified ones it returns the least-squares signal for the analysis
    window. The result is cut to ``target_length`` samples.
    """
    spec = np.asarray(spec)
    if spec.ndim != 2 or spec.shape[1] != config.bins:
        raise ValueError(
            f"spectrogram shape {spec.shape} does not match config bins {config.bins}"
        )
    if target_length < 0:
        raise ValueError("target_length must be >= 0")
    check_cola(config)
    n_fft, hop = config.n_fft, config.hop_length
    n_frames = spec.shape[0]
    window = padded_window(config)
    frames = np.fft.irfft(spec, n=n_fft, axis=1) * window
    total = n_fft + hop * (n_frames - 1)
    out = np.zeros(total)
    norm = np.zeros(total)
    w2 = window**2
    for i in range(n_frames):
        start = i * hop
        out[start : start + n_fft] += frames[i]
        norm[start : start + n_fft] += w2
    covered = norm > _OLA_TINY
    out[covered] /= norm[covered]
    start = n_fft // 2 if config.centered else 0
    out = out[start : start + target_length]
    if out.size < target_length:
        out = np.pad(out, (0, target_length - out.size))
    return out


def hz_to_mel(freq_hz):
    """HTK mel scale: mel(f) = 2595 * log10(1 + f/700)."""
    return 2595.0 * np.log10(1.0 + np.asarray(freq_hz, dtype=np.float64) / 700.0)


def mel_to_hz(mel):
    """Inverse of :func:`hz_to_mel`."""
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


@dataclass(frozen=True)
class MelFilterbank:
    """Triangular mel filterbank with its precomputed right pseudo-inverse.

    ``weights`` is the (bands, bins) non-negative projection matrix and
    ``pseudo_inverse`` its (bins, bands) Moore-Penrose inverse, so that
    ``weights @ pseudo_inverse`` is the identity up to 1e-4 max-abs.
    """

    weights: np.ndarray
    pseudo_inverse: np.ndarray
    f_min: float
    f_max: float
    sample_rate: int

    @property
    def bands(self) -> int:
        return self.weights.shape[0]

    @property
    def bins(self) -> int:
        return self.weights.shape[1]


def pseudo_inverse_mel(weights: np.ndarray, ridge: float = 0.0) -> np.ndarray:
    """Right pseudo-inverse B+ = B^T (B B^T + ridge*I)^-1 of a filterbank matrix.

    At ridge 0 this is the Moore-Penrose inverse of a full-row-rank matrix;
    rank deficiency is detected up front so the failure mode is a clear
    error instead of a garbage solve.
    """
    weights = np.asarray(weights, dtype=np.float64)
    if weights.ndim != 2:
        raise ValueError("filterbank weights must be a 2-D matrix")
    if ridge < 0.0:
        raise ValueError("ridge must be >= 0")
    singular = np.linalg.svd(weights, compute_uv=False)
    if ridge == 0.0 and (singular[0] == 0.0 or singular[-1] <= 1e-8 * singular[0]):
        raise ValueError(
            "filterbank matrix is rank deficient; pass a positive ridge to regularize"
        )
    gram = weights @ weights.T
    gram[np.diag_indices_from(gram)] += ridge
    return np.linalg.solve(gram, weights).T


def build_mel_filterbank(
    bands: int,
    config: StftConfig,
    f_min: float = 0.0,
    f_max: float | None = None,
) -> MelFilterbank:
    """Build ``bands`` triangular HTK-mel filters with Slaney area normalization.

    Band edges default to 0 Hz and Nyquist. The pseudo-inverse is computed
    eagerly and the B @ B+ identity is verified at construction.
    """
    nyquist = config.sample_rate / 2.0
    if f_max is None:
        f_max = nyquist
    if bands < 1:
        raise ValueError("bands must be >= 1")
    if bands >= config.bins:
        raise ValueError(
            f"{bands} bands with {config.bins} bins cannot have full row rank"
        )
    if not (0.0 <= f_min < f_max <= nyquist):
        raise ValueError(f"need 0 <= f_min < f_max <= {nyquist}, got [{f_min}, {f_max}]")

    edges = mel_to_hz(np.linspace(hz_to_mel(f_min), hz_to_mel(f_max), bands + 2))
    fft_freqs = np.arange(config.bins) * (config.sample_rate / config.n_fft)
    lower = edges[:-2, None]
    center = edges[1:-1, None]
    upper = edges[2:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        rising = (fft_freqs[None, :] - lower) / (center - lower)
        falling = (upper - fft_freqs[None, :]) / (upper - center)
    weights = np.maximum(0.0, np.minimum(rising, falling))
    weights[~np.isfinite(weights)] = 0.0
    # Slaney-style normalization: each triangle integrates to ~2/bandwidth.
    weights *= 2.0 / (upper - lower)

    dead = np.flatnonzero(weights.max(axis=1) == 0.0)
    if dead.size:
        raise ValueError(
            f"mel band(s) {dead.tolist()} have empty support; "
            "reduce bands or widen the frequency range"
        )

    pinv = pseudo_inverse_mel(weights)
    identity_err = np.max(np.abs(weights @ pinv - np.eye(bands)))
    if identity_err > 1e-4:
        raise ValueError(
            f"filterbank pseudo-inverse check failed: |B B+ - I| = {identity_err:.3e}"
        )
    return MelFilterbank(
        weights=weights,
        pseudo_inverse=pinv,
        f_min=float(f_min),
        f_max=float(f_max),
        sample_rate=config.sample_rate,
    )


def apply_mel(mag: np.ndarray, fb: MelFilterbank) -> np.ndarray:
    """Project a (frames, bins) magnitude onto mel bands: one B @ x per frame."""
    mag = np.asarray(mag, dtype=np.float64)
    if mag.ndim != 2 or mag.shape[1] != fb.bins:
        raise ValueError(f"magnitude shape {mag.shape} does not match {fb.bins} bins")
    if not np.isfinite(mag).all() or (mag < 0.0).any():
        raise ValueError("magnitude spectrogram must be finite and non-negative")
    return mag @ fb.weights.T


def estimate_magnitude(mel: np.ndarray, fb: MelFilterbank) -> np.ndarray:
    """Pseudo-inverse magnitude estimate B+ @ mel per frame, clamped at zero.

    The clamp is required because the pseudo-inverse can produce small
    negative excursions and downstream phase retrieval needs magnitudes.
    """
    mel = np.asarray(mel, dtype=np.float64)
    if mel.ndim != 2 or mel.shape[1] != fb.bands:
        raise ValueError(f"mel shape {mel.shape} does not match {fb.bands} bands")
    if not np.isfinite(mel).all():
        raise ValueError("mel spectrogram must be finite")
    return np.maximum(0.0, mel @ fb.pseudo_inverse.T)
