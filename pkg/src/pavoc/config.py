"""Run configuration files.

Flat key/value text, one ``dotted.key = value`` pair per line, ``#``
comments. Recognized keys:

    schedule.betas     = [f64, ...]      noise schedule, T entries in (0,1)
    sampler.variant    = plain | baseline | corrected
    sampler.sigma_mode = ddpm | ddim0
    sampler.stage1_end = int
    sampler.seed       = u64
    gla.iterations     = int
    gla.momentum       = f64 in [0,1)
    stft.n_fft         = int             (optional, default 2048)
    stft.win_length    = int             (optional, default 1200)

The shipped default schedule (configs/wg6.cfg) is a 6-step geometric
ladder from 1e-4 to 0.5; the schedule actually tuned for the 6-step
vocoder regime was never published, so this default is a stand-in and is
labeled as such.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError

# Log-uniform 6-step ladder; placeholder for the unpublished tuned schedule.
DEFAULT_BETAS = tuple(float(b) for b in np.geomspace(1e-4, 0.5, 6))

VARIANT_ALIASES = {
    "plain": "plain",
    "baseline": "per_step_gla_baseline",
    "per_step_gla_baseline": "per_step_gla_baseline",
    "corrected": "corrected",
}
SIGMA_ALIASES = {"ddpm": "ddpm", "ddim0": "ddim_zero", "ddim_zero": "ddim_zero"}


@dataclass
class RunConfig:
    betas: tuple = DEFAULT_BETAS
    variant: str = "corrected"
    sigma_mode: str = "ddpm"
    stage1_end: int = 3
    seed: int = 0
    gla_iterations: int = 32
    gla_momentum: float = 0.99
    n_fft: int = 2048
    win_length: int = 1200

    def as_dict(self) -> dict:
        return {
            "schedule.betas": list(self.betas),
            "sampler.variant": self.variant,
            "sampler.sigma_mode": self.sigma_mode,
            "sampler.stage1_end": self.stage1_end,
            "sampler.seed": self.seed,
            "gla.iterations": self.gla_iterations,
            "gla.momentum": self.gla_momentum,
            "stft.n_fft": self.n_fft,
            "stft.win_length": self.win_length,
        }


def _parse_scalar(raw: str, key: str):
    raw = raw.strip()
    if raw.startswith("["):
        if not raw.endswith("]"):
            raise ConfigurationError(f"{key}: unterminated array {raw!r}")
        inner = raw[1:-1].strip()
        if not inner:
            return []
        return [_parse_scalar(item, key) for item in inner.split(",")]
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    return raw


def parse_config_text(text: str) -> dict:
    """Parse the key/value format into a flat dict of raw values."""
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if key in values:
            raise ConfigurationError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _parse_scalar(raw, key)
    return values


def load_run_config(path=None) -> RunConfig:
    """Load a RunConfig from a file, falling back to defaults for absent keys."""
    config = RunConfig()
    if path is None:
        return config
    try:
        values = parse_config_text(Path(path).read_text())
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc

    known = set(config.as_dict())
    unknown = set(values) - known
    if unknown:
        raise ConfigurationError(f"unknown config key(s): {sorted(unknown)}")

    if "schedule.betas" in values:
        betas = values["schedule.betas"]
        if not isinstance(betas, list) or not betas:
            raise ConfigurationError("schedule.betas must be a non-empty array")
        if not all(isinstance(b, (int, float)) and 0.0 < b < 1.0 for b in betas):
            raise ConfigurationError("every beta must be a number in (0, 1)")
        config.betas = tuple(float(b) for b in betas)
    if "sampler.variant" in values:
        name = str(values["sampler.variant"])
        if name not in VARIANT_ALIASES:
            raise ConfigurationError(f"unknown sampler.variant {name!r}")
        config.variant = VARIANT_ALIASES[name]
    if "sampler.sigma_mode" in values:
        name = str(values["sampler.sigma_mode"])
        if name not in SIGMA_ALIASES:
            raise ConfigurationError(f"unknown sampler.sigma_mode {name!r}")
        config.sigma_mode = SIGMA_ALIASES[name]
    for key, attr, kind in (
        ("sampler.stage1_end", "stage1_end", int),
        ("sampler.seed", "seed", int),
        ("gla.iterations", "gla_iterations", int),
        ("stft.n_fft", "n_fft", int),
        ("stft.win_length", "win_length", int),
    ):
        if key in values:
            value = values[key]
            if not isinstance(value, int) or value < 0:
                raise ConfigurationError(f"{key} must be a non-negative integer")
            setattr(config, attr, kind(value))
    if "gla.momentum" in values:
        value = values["gla.momentum"]
        if not isinstance(value, (int, float)) or not 0.0 <= float(value) < 1.0:
            raise ConfigurationError("gla.momentum must lie in [0, 1)")
        config.gla_momentum = float(value)
    return config


def dump_run_config(config: RunConfig) -> str:
    """Render a RunConfig back to the key/value text format."""
    lines = []
    for key, value in config.as_dict().items():
        if isinstance(value, list):
            rendered = "[" + ", ".join(repr(v) for v in value) + "]"
        else:
            rendered = str(value)
        lines.append(f"{key} = {rendered}")
    return "\n".join(lines) + "\n"
