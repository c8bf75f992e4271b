"""Shared test utilities: synthetic utterances and domain-shifted renderings."""

import numpy as np

from pavoc.rng import philox


def synth_utterance(seed: int, n_samples: int = 22050, sample_rate: int = 22050) -> np.ndarray:
    """Speech-like test signal: voiced harmonic runs, unvoiced noise, envelopes.

    Deterministic given the seed; RMS-normalized to 0.15.
    """
    rng = philox(seed, 0xA11D10)
    t = np.arange(n_samples) / sample_rate
    out = np.zeros(n_samples)
    n_segments = int(rng.integers(3, 6))
    bounds = np.sort(rng.uniform(0.1, 0.9, n_segments - 1))
    edges = np.concatenate([[0.0], bounds, [1.0]])
    for i in range(n_segments):
        a, b = int(edges[i] * n_samples), int(edges[i + 1] * n_samples)
        if b - a < 200:
            continue
        seg_t = t[a:b]
        n = b - a
        env = np.sin(np.linspace(0, np.pi, n)) ** 0.5
        if rng.random() < 0.7:  # voiced run
            f0 = rng.uniform(90, 250)
            vibrato = 1.0 + 0.02 * np.sin(2 * np.pi * rng.uniform(3, 7) * seg_t)
            phase = np.cumsum(f0 * vibrato) / sample_rate
            formants = rng.uniform(300, 3500, 3)
            widths = rng.uniform(150, 500, 3)
            seg = np.zeros(n)
            h = 1
            while h * f0 < 0.45 * sample_rate:
                freq = h * f0
                gain = sum(np.exp(-(((freq - fc) / w) ** 2)) for fc, w in zip(formants, widths))
                gain = (gain + 0.05) / h**0.5
                seg += gain * np.sin(2 * np.pi * h * phase + rng.uniform(0, 2 * np.pi))
                h += 1
            out[a:b] += env * seg * rng.uniform(0.5, 1.0)
        else:  # unvoiced run
            noise = rng.normal(size=n)
            noise = np.diff(noise, prepend=noise[0])
            out[a:b] += 0.35 * env * noise * rng.uniform(0.5, 1.0)
    out += 0.002 * rng.normal(size=n_samples)
    rms = np.sqrt(np.mean(out**2))
    return 0.15 * out / max(rms, 1e-12)


def domain_shift(
    signal: np.ndarray,
    sample_rate: int = 22050,
    cutoff_hz: float = 2000.0,
    tilt: float = 0.6,
) -> np.ndarray:
    """Out-of-domain rendering of a signal: brickwall lowpass plus spectral tilt.

    Stands in for what a vocoder trained on a mismatched domain would
    produce: same content, visibly wrong spectrum envelope.
    """
    spec = np.fft.rfft(signal)
    freqs = np.fft.rfftfreq(signal.size, 1.0 / sample_rate)
    shape = np.where(freqs <= cutoff_hz, 1.0, 0.0)
    shape = shape * (1.0 / (1.0 + (freqs / (cutoff_hz * tilt)) ** 2)) ** 0.5
    return np.fft.irfft(spec * shape, n=signal.size)
