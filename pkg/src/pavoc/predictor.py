"""Noise predictors: analytic oracles and the external-process client.

The oracles exist for exact verification and controlled-degradation
experiments; no network is trained or loaded here. The external client
speaks the stdio frame protocol in :mod:`pavoc.wire` and treats float32
transport as the only permitted deviation from an in-process predictor.
"""

from __future__ import annotations

import math
import os
import select
import subprocess
from dataclasses import dataclass

import numpy as np

from . import rng as _rng
from . import wire
from .diffusion import NoiseSchedule
from .errors import PredictorUnavailableError, WireProtocolError

NOISE_LEVEL_TOLERANCE = 1e-9


@dataclass(frozen=True)
class PredictorRequest:
    """One prediction call: the current iterate, conditioning mel and noise level."""

    y_t: np.ndarray
    mel: np.ndarray
    noise_level: float

    def __post_init__(self):
        if not 0.0 < self.noise_level <= 1.0:
            raise ValueError(f"noise_level {self.noise_level} outside (0, 1]")
        if not np.isfinite(self.y_t).all():
            raise ValueError("y_t must be finite")


class NoisePredictor:
    """Interface: map a request to a noise estimate of equal length."""

    def predict(self, request: PredictorRequest) -> np.ndarray:
        raise NotImplementedError


def resolve_step(noise_level: float, schedule: NoiseSchedule) -> int:
    """Map a continuous noise level back to its discrete step index.

    Nearest match against sqrt(abar_t) for t = 1..T within 1e-9; t = 0
    (noise level exactly 1) is not a valid prediction step.
    """
    levels = np.sqrt(schedule.alpha_bars[1:])
    t = int(np.argmin(np.abs(levels - noise_level))) + 1
    if abs(levels[t - 1] - noise_level) > NOISE_LEVEL_TOLERANCE:
        raise ValueError(
            f"noise level {noise_level!r} matches no schedule step within "
            f"{NOISE_LEVEL_TOLERANCE:g}"
        )
    return t


def oracle_predict(
    request: PredictorRequest, y0_ref: np.ndarray, schedule: NoiseSchedule
) -> np.ndarray:
    """Exact noise estimate (y_t - sqrt(abar)*y0) / sqrt(1 - abar)."""
    y0_ref = np.asarray(y0_ref, dtype=np.float64)
    y_t = np.asarray(request.y_t, dtype=np.float64)
    if y0_ref.shape != y_t.shape:
        raise ValueError(f"reference shape {y0_ref.shape} does not match {y_t.shape}")
    t = resolve_step(request.noise_level, schedule)
    abar = schedule.alpha_bars[t]
    return (y_t - np.sqrt(abar) * y0_ref) / np.sqrt(1.0 - abar)


def degraded_oracle_predict(
    request: PredictorRequest,
    y0_ref: np.ndarray,
    schedule: NoiseSchedule,
    snr_db: float,
    seed: int,
    denoising_deficit: float = 0.0,
) -> np.ndarray:
    """Oracle estimate degraded to a target signal-to-error ratio.

    A seeded white Gaussian perturbation is added with power equal to the
    oracle output's power times 10^(-snr_db/10). ``denoising_deficit``
    additionally scales the oracle term by (1 - deficit), simulating a
    network that systematically under-predicts the noise; unlike the white
    term, this error component survives the reverse process's final step
    and is what makes out-of-domain behaviour observable end to end
    (default 0: the pure additive model). snr_db = +inf disables the
    perturbation entirely.
    """
    if math.isnan(snr_db):
        raise ValueError("snr_db must be finite or +inf")
    if not 0.0 <= denoising_deficit < 1.0:
        raise ValueError("denoising_deficit must lie in [0, 1)")
    base = oracle_predict(request, y0_ref, schedule)
    if math.isinf(snr_db) and denoising_deficit == 0.0:
        return base
    out = (1.0 - denoising_deficit) * base
    if math.isinf(snr_db):
        return out
    power = float(np.mean(base**2))
    if power == 0.0:
        return out
    scale = math.sqrt(power * 10.0 ** (-snr_db / 10.0))
    stream = _rng.philox(seed, _rng.float_key(request.noise_level))
    return out + scale * _rng.standard_normal(stream, base.size)


class ZeroPredictor(NoisePredictor):
    """Always predicts zero noise; useful for timing and protocol tests."""

    def predict(self, request: PredictorRequest) -> np.ndarray:
        return np.zeros_like(np.asarray(request.y_t, dtype=np.float64))


class OraclePredictor(NoisePredictor):
    def __init__(self, y0_ref: np.ndarray, schedule: NoiseSchedule):
        self.y0_ref = np.asarray(y0_ref, dtype=np.float64)
        self.schedule = schedule

    def predict(self, request: PredictorRequest) -> np.ndarray:
        return oracle_predict(request, self.y0_ref, self.schedule)


class DegradedOraclePredictor(NoisePredictor):
    def __init__(
        self,
        y0_ref: np.ndarray,
        schedule: NoiseSchedule,
        snr_db: float,
        seed: int,
        denoising_deficit: float = 0.0,
    ):
        self.y0_ref = np.asarray(y0_ref, dtype=np.float64)
        self.schedule = schedule
        self.snr_db = float(snr_db)
        self.seed = int(seed)
        self.denoising_deficit = float(denoising_deficit)

    def predict(self, request: PredictorRequest) -> np.ndarray:
        return degraded_oracle_predict(
            request,
            self.y0_ref,
            self.schedule,
            self.snr_db,
            self.seed,
            self.denoising_deficit,
        )


class ExternalPredictor(NoisePredictor):
    """Client for a predictor subprocess speaking the stdio frame protocol.

    The handle is exclusive per process: one in-flight request at a time.
    Callers wanting parallelism spawn one process per worker.
    """

    def __init__(self, command: list[str], log_mel: bool = False, timeout: float = 30.0):
        self.command = list(command)
        self.log_mel = bool(log_mel)
        self.timeout = float(timeout)
        try:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
            )
        except OSError as exc:
            raise PredictorUnavailableError(f"cannot start {self.command}: {exc}") from exc
        self._reader = wire.FrameReader(self._read_exact)
        self._handshake()

    def _handshake(self) -> None:
        self._write(wire.pack_handshake())
        reply = self._read_exact(8)
        version = wire.parse_handshake_reply(reply)
        if version != wire.PROTOCOL_VERSION:
            raise WireProtocolError(f"server speaks protocol v{version}, expected v1")

    def _write(self, blob: bytes) -> None:
        try:
            self._proc.stdin.write(blob)
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise PredictorUnavailableError(
                f"predictor process closed its pipe ({exc})"
            ) from exc

    def _read_exact(self, n: int) -> bytes:
        fd = self._proc.stdout.fileno()
        chunks = []
        remaining = n
        while remaining > 0:
            ready, _, _ = select.select([fd], [], [], self.timeout)
            if not ready:
                self._proc.kill()
                raise PredictorUnavailableError(
                    f"predictor timed out after {self.timeout:g}s"
                )
            chunk = os.read(fd, remaining)
            if not chunk:
                raise PredictorUnavailableError(
                    "predictor process exited mid-frame"
                    + (
                        f" (exit code {self._proc.poll()})"
                        if self._proc.poll() is not None
                        else ""
                    )
                )
            chunks.append(chunk)
            remaining -= len(chunk)
        return b"".join(chunks)

    def predict(self, request: PredictorRequest) -> np.ndarray:
        frame = wire.pack_request(
            request.y_t, request.mel, request.noise_level, self.log_mel
        )
        self._write(frame)
        return wire.read_response(self._reader, len(request.y_t))

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=5.0)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()


def external_predict(request: PredictorRequest, endpoint: ExternalPredictor) -> np.ndarray:
    """Run one request against an already-handshaken external predictor."""
    return endpoint.predict(request)
