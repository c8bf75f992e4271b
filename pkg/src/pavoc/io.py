"""WAV and MELB file I/O.

MELB is the package's mel spectrogram container:

    magic "MELB" | u32 version=1 | u32 frames | u32 bands |
    f32 sample_rate | u32 hop_length | frames*bands f32 (frame-major)

All integers and floats are little-endian. Mel values are linear
amplitude. WAV input may be mono PCM16 or IEEE float32 at 22050 or
24000 Hz; output is always float32.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .errors import InputFormatError

MELB_MAGIC = b"MELB"
MELB_VERSION = 1

SUPPORTED_RATES = (22050, 24000)


def read_wav(path) -> tuple[np.ndarray, int]:
    """Read a mono WAV as float64 in [-1, 1]; returns (signal, sample_rate)."""
    try:
        rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise InputFormatError(f"{path}: not a readable WAV file ({exc})") from exc
    if data.ndim != 1:
        raise InputFormatError(f"{path}: expected mono audio, got {data.ndim} channels")
    if rate not in SUPPORTED_RATES:
        raise InputFormatError(
            f"{path}: sample rate {rate} unsupported (expected one of {SUPPORTED_RATES})"
        )
    if data.dtype == np.int16:
        signal = data.astype(np.float64) / 32768.0
    elif data.dtype in (np.float32, np.float64):
        signal = data.astype(np.float64)
    else:
        raise InputFormatError(f"{path}: unsupported sample format {data.dtype}")
    if signal.size == 0:
        raise InputFormatError(f"{path}: empty audio stream")
    return signal, int(rate)


def write_wav(path, signal: np.ndarray, sample_rate: int) -> None:
    """Write a waveform as mono float32 WAV."""
    signal = np.asarray(signal, dtype=np.float32)
    if signal.ndim != 1:
        raise ValueError("waveform must be 1-D")
    wavfile.write(path, int(sample_rate), signal)


def write_melb(path, mel: np.ndarray, sample_rate: float, hop_length: int) -> None:
    """Write a (frames, bands) linear-amplitude mel spectrogram."""
    mel = np.asarray(mel, dtype=np.float32)
    if mel.ndim != 2:
        raise ValueError("mel spectrogram must be 2-D (frames, bands)")
    frames, bands = mel.shape
    header = MELB_MAGIC + struct.pack(
        "<IIIfI", MELB_VERSION, frames, bands, float(sample_rate), int(hop_length)
    )
    Path(path).write_bytes(header + mel.tobytes(order="C"))


def read_melb(path) -> tuple[np.ndarray, float, int]:
    """Read a MELB file; returns (mel float64, sample_rate, hop_length)."""
    blob = Path(path).read_bytes()
    header_size = 4 + struct.calcsize("<IIIfI")
    if len(blob) < header_size:
        raise InputFormatError(f"{path}: truncated MELB header")
    if blob[:4] != MELB_MAGIC:
        raise InputFormatError(f"{path}: bad magic {blob[:4]!r}, expected {MELB_MAGIC!r}")
    version, frames, bands, sample_rate, hop_length = struct.unpack(
        "<IIIfI", blob[4:header_size]
    )
    if version != MELB_VERSION:
        raise InputFormatError(f"{path}: unsupported MELB version {version}")
    expected = header_size + 4 * frames * bands
    if len(blob) != expected:
        raise InputFormatError(
            f"{path}: payload size {len(blob)} does not match header ({expected} expected)"
        )
    mel = np.frombuffer(blob, dtype="<f4", offset=header_size).astype(np.float64)
    return mel.reshape(frames, bands), float(sample_rate), int(hop_length)
