"""pavoc: phase-aware diffusion vocoder engine.

Reconstructs a waveform estimate from a conditioning mel spectrogram via
mel pseudo-inversion and Fast Griffin-Lim, then uses it to replace the
predicted clean signal during the early steps of the reverse diffusion
process.
"""

__version__ = "0.1.0"

from .config import RunConfig, load_run_config
from .diffusion import (
    GenerationTrace,
    NoiseSchedule,
    SamplerConfig,
    corrected_step,
    ddim_step,
    ddpm_step,
    forward_diffuse,
    generate,
    per_step_gla_baseline_step,
    predict_y0,
    schedule_from_betas,
)
from .dsp import (
    MelFilterbank,
    StftConfig,
    apply_mel,
    build_mel_filterbank,
    estimate_magnitude,
    istft,
    make_hann_window,
    pseudo_inverse_mel,
    stft,
)
from .metrics import (
    MetricReport,
    RtfResult,
    log_spectral_distance,
    measure_rtf,
    mel_consistency,
    snr_db,
    spectral_convergence,
)
from .phase_retrieval import (
    GlaConfig,
    griffin_lim,
    project_consistency,
    project_magnitude,
    reconstruct_from_mel,
)
from .predictor import (
    DegradedOraclePredictor,
    ExternalPredictor,
    NoisePredictor,
    OraclePredictor,
    PredictorRequest,
    ZeroPredictor,
    degraded_oracle_predict,
    external_predict,
    oracle_predict,
)
