"""Binary frame codec for the external predictor protocol.

All traffic runs over the child process's stdin/stdout. Integers are u32
little-endian, floats f32 little-endian.

    handshake  client -> "EPRD" u32 version      server -> "EPOK" u32 version
    request    "ERQ1" f32 noise_level u32 n_samples n_samples*f32 y_t
               u32 frames u32 bands u32 log_flag frames*bands*f32 mel
    response   "ERS1" u32 n_samples n_samples*f32 eps_hat

The mel payload is log10(max(mel, 1e-5)) when log_flag is 1, linear
amplitude otherwise.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import WireProtocolError

HANDSHAKE_MAGIC = b"EPRD"
HANDSHAKE_REPLY = b"EPOK"
REQUEST_MAGIC = b"ERQ1"
RESPONSE_MAGIC = b"ERS1"
PROTOCOL_VERSION = 1

LOG_MEL_FLOOR = 1e-5


def pack_handshake() -> bytes:
    return HANDSHAKE_MAGIC + struct.pack("<I", PROTOCOL_VERSION)


def pack_handshake_reply() -> bytes:
    return HANDSHAKE_REPLY + struct.pack("<I", PROTOCOL_VERSION)


def pack_request(y_t: np.ndarray, mel: np.ndarray, noise_level: float, log_mel: bool) -> bytes:
    """Serialize a prediction request; the mel is log-compressed iff ``log_mel``."""
    y32 = np.asarray(y_t, dtype="<f4")
    mel = np.asarray(mel, dtype=np.float64)
    payload = np.log10(np.maximum(mel, LOG_MEL_FLOOR)) if log_mel else mel
    mel32 = np.ascontiguousarray(payload, dtype="<f4")
    frames, bands = mel32.shape
    head = REQUEST_MAGIC + struct.pack("<fI", float(noise_level), y32.size)
    tail = struct.pack("<III", frames, bands, 1 if log_mel else 0)
    return head + y32.tobytes() + tail + mel32.tobytes()


def pack_response(eps_hat: np.ndarray) -> bytes:
    eps32 = np.asarray(eps_hat, dtype="<f4")
    return RESPONSE_MAGIC + struct.pack("<I", eps32.size) + eps32.tobytes()


def parse_handshake_reply(blob: bytes) -> int:
    """Validate the 8-byte server hello; returns the server's version."""
    if len(blob) != 8 or blob[:4] != HANDSHAKE_REPLY:
        raise WireProtocolError(f"bad handshake reply {blob!r}")
    return struct.unpack("<I", blob[4:])[0]


class FrameReader:
    """Incremental reader over a read(n) callable with exact-length semantics."""

    def __init__(self, read_exact):
        self._read = read_exact

    def u32(self) -> int:
        return struct.unpack("<I", self._read(4))[0]

    def f32(self) -> float:
        return struct.unpack("<f", self._read(4))[0]

    def magic(self, expected: bytes) -> None:
        got = self._read(4)
        if got != expected:
            raise WireProtocolError(f"expected magic {expected!r}, got {got!r}")

    def f32_array(self, count: int) -> np.ndarray:
        return np.frombuffer(self._read(4 * count), dtype="<f4").astype(np.float64)


def read_request(reader: FrameReader) -> dict:
    """Parse one request frame (magic included) into its fields."""
    reader.magic(REQUEST_MAGIC)
    noise_level = reader.f32()
    n_samples = reader.u32()
    y_t = reader.f32_array(n_samples)
    frames = reader.u32()
    bands = reader.u32()
    log_mel = reader.u32()
    if log_mel not in (0, 1):
        raise WireProtocolError(f"log-mel flag must be 0 or 1, got {log_mel}")
    mel = reader.f32_array(frames * bands).reshape(frames, bands)
    return {
        "noise_level": noise_level,
        "y_t": y_t,
        "mel": mel,
        "log_mel": bool(log_mel),
    }


def read_response(reader: FrameReader, expected_samples: int) -> np.ndarray:
    """Parse one response frame and enforce the length contract."""
    from .errors import PredictorContractError

    reader.magic(RESPONSE_MAGIC)
    n_samples = reader.u32()
    if n_samples != expected_samples:
        raise PredictorContractError(
            f"response carries {n_samples} samples, request had {expected_samples}"
        )
    return reader.f32_array(n_samples)
