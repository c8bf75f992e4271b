"""Command-line surface: analyze, reconstruct, generate, oracle-eval, sweep, bench.

Every run writes a manifest (JSON) into the output directory recording the
resolved configuration, inputs, seed and timestamps; re-running the same
command line reproduces all outputs bit-exactly. Exit codes: 0 success,
2 input/parse error, 3 predictor/protocol error, 4 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import os
import shlex
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, figures
from . import io as pio
from . import metrics as pmetrics
from . import rng as _rng
from .config import RunConfig, load_run_config
from .diffusion import SamplerConfig, generate, schedule_from_betas
from .dsp import StftConfig, apply_mel, build_mel_filterbank, estimate_magnitude, istft, stft
from .errors import (
    ConfigurationError,
    InputFormatError,
    PavocError,
    PredictorContractError,
    PredictorUnavailableError,
    WireProtocolError,
)
from .phase_retrieval import GlaConfig, griffin_lim, reconstruct_from_mel
from .predictor import (
    DegradedOraclePredictor,
    ExternalPredictor,
    OraclePredictor,
    ZeroPredictor,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_PREDICTOR = 3
EXIT_CONFIG = 4

DEFAULT_BANDS = 128

METRIC_COLUMNS = [
    "path",
    "variant",
    "stage1_end",
    "spectral_convergence",
    "lsd_db",
    "snr_db",
    "mel_consistency",
    "rtf",
]

# Lower is better for all metrics except SNR.
HIGHER_IS_BETTER = {"snr_db"}


def _utc_now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _thread_count(n_items: int) -> int:
    raw = os.environ.get("PAVOC_THREADS", "1")
    try:
        workers = max(1, int(raw))
    except ValueError:
        raise ConfigurationError(f"PAVOC_THREADS must be an integer, got {raw!r}")
    return min(workers, max(1, n_items))


def _map_files(fn, items):
    """Apply fn over items, in parallel when PAVOC_THREADS allows, keeping order."""
    workers = _thread_count(len(items))
    if workers == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def write_manifest(out_dir: Path, payload: dict) -> Path:
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def _manifest_base(command: str, args_list, run_config: RunConfig, seed: int) -> dict:
    return {
        "command": command,
        "tool_version": __version__,
        "argv": args_list,
        "seed": seed,
        "config": run_config.as_dict(),
        "started_at": _utc_now(),
    }


def _resolve_run_config(args) -> RunConfig:
    config = load_run_config(getattr(args, "config", None))
    if getattr(args, "variant", None):
        config.variant = {"plain": "plain", "baseline": "per_step_gla_baseline", "corrected": "corrected"}[args.variant]
    if getattr(args, "stage1_end", None) is not None:
        config.stage1_end = args.stage1_end
    if getattr(args, "sigma", None):
        config.sigma_mode = {"ddpm": "ddpm", "ddim0": "ddim_zero"}[args.sigma]
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    if getattr(args, "gla_iters", None) is not None:
        config.gla_iterations = args.gla_iters
    if getattr(args, "gla_momentum", None) is not None:
        config.gla_momentum = args.gla_momentum
    return config


def _stft_config(run: RunConfig, sample_rate: int, hop_length: int) -> StftConfig:
    return StftConfig(
        n_fft=run.n_fft,
        win_length=run.win_length,
        hop_length=hop_length,
        sample_rate=sample_rate,
    )


def _gla_config(run: RunConfig, seed: int) -> GlaConfig:
    return GlaConfig(
        iterations=run.gla_iterations,
        variant="fast",
        momentum=run.gla_momentum,
        phase_init="random",
        seed=seed,
    )


def _sampler_config(run: RunConfig, stft_config: StftConfig, seed: int) -> SamplerConfig:
    return SamplerConfig(
        variant=run.variant,
        sigma_mode=run.sigma_mode,
        stage1_end=run.stage1_end,
        seed=seed,
        gla=_gla_config(run, seed),
        stft=stft_config,
    )




class _PredictorSpec:
    """Parsed --predictor option; builds a predictor bound to a reference."""

    def __init__(self, spec: str):
        self.raw = spec
        kind, _, rest = spec.partition(":")
        self.kind = kind
        self.rest = rest
        if kind == "zero":
            pass
        elif kind == "oracle":
            self.ref_path = rest or None
        elif kind == "degraded":
            parts = rest.split(":") if rest else []
            # Leading path is optional; without it the paired reference is used.
            if parts and not _is_number(parts[0]):
                self.ref_path = parts[0]
                parts = parts[1:]
            else:
                self.ref_path = None
            if not parts or not _is_number(parts[0]):
                raise InputFormatError(f"degraded predictor needs an SNR: {spec!r}")
            self.snr_db = float(parts[0])
            self.deficit = float(parts[1]) if len(parts) > 1 else 0.0
        elif kind == "external":
            if not rest:
                raise InputFormatError("external predictor needs a command line")
            self.command = shlex.split(rest)
        else:
            raise InputFormatError(f"unknown predictor spec {spec!r}")

    def needs_reference(self) -> bool:
        return self.kind in ("oracle", "degraded") and getattr(self, "ref_path", None) is None

    def reference_path(self):
        return getattr(self, "ref_path", None)

    def build(self, schedule, seed: int, reference: np.ndarray | None):
        if self.kind == "zero":
            return ZeroPredictor()
        if self.kind == "external":
            return ExternalPredictor(self.command)
        if reference is None:
            raise InputFormatError(
                f"predictor {self.raw!r} needs a reference waveform"
            )
        if self.kind == "oracle":
            return OraclePredictor(reference, schedule)
        return DegradedOraclePredictor(
            reference, schedule, self.snr_db, seed, self.deficit
        )


def _is_number(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


def _load_reference_for(spec: _PredictorSpec, paired_ref: np.ndarray | None):
    if spec.kind in ("zero", "external"):
        return None
    if spec.reference_path() is not None:
        signal, _ = pio.read_wav(spec.reference_path())
        return signal
    if paired_ref is None:
        raise InputFormatError(
            f"predictor {spec.raw!r} has no reference path and no paired reference"
        )
    return paired_ref


def _fit_reference(reference: np.ndarray, length: int, frames: int, stft_config: StftConfig):
    """Cut or pad a reference to the canonical generation length.

    The reference must describe the same spectrogram grid: it has to produce
    the same frame count as the conditioning mel.
    """
    if stft_config.frame_count(reference.shape[0]) != frames:
        raise InputFormatError(
            f"reference length {reference.shape[0]} is inconsistent with {frames} mel frames"
        )
    if reference.shape[0] == length:
        return reference
    if reference.shape[0] > length:
        return reference[:length]
    return np.pad(reference, (0, length - reference.shape[0]))


def _metric_row(path, variant, stage1_end, report, rtf) -> dict:
    row = {
        "path": str(path),
        "variant": variant,
        "stage1_end": stage1_end,
        "spectral_convergence": "",
        "lsd_db": "",
        "snr_db": "",
        "mel_consistency": "",
        "rtf": "" if rtf is None else f"{rtf:.6g}",
    }
    if report is not None:
        row.update(
            spectral_convergence=f"{report.spectral_convergence:.8g}",
            lsd_db=f"{report.log_spectral_distance_db:.8g}",
            snr_db=f"{report.snr_db:.8g}",
            mel_consistency=f"{report.mel_consistency:.8g}",
        )
    return row


def _write_metric_csv(path: Path, rows: list[dict]) -> None:
    with path.open("w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=METRIC_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------


def cmd_analyze(args) -> int:
    run = _resolve_run_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = _manifest_base("analyze", args.effective_argv, run, run.seed)
    manifest["inputs"] = [str(p) for p in args.wavs]

    def analyze_one(wav_path: str):
        try:
            signal, rate = pio.read_wav(wav_path)
            stft_config = _stft_config(run, rate, args.hop)
            fb = build_mel_filterbank(args.bands, stft_config, args.f_min, args.f_max)
            mel = apply_mel(np.abs(stft(signal, stft_config)), fb)
            target = out_dir / (Path(wav_path).stem + ".melb")
            pio.write_melb(target, mel, rate, args.hop)
            return {"input": str(wav_path), "output": str(target), "status": "ok"}
        except (InputFormatError, ValueError, FileNotFoundError) as exc:
            return {"input": str(wav_path), "status": "error", "error": str(exc)}

    results = _map_files(analyze_one, list(args.wavs))
    manifest["files"] = results
    manifest["finished_at"] = _utc_now()
    write_manifest(out_dir, manifest)
    failures = [r for r in results if r["status"] != "ok"]
    for failure in failures:
        print(f"error: {failure['input']}: {failure['error']}", file=sys.stderr)
    succeeded = len(results) - len(failures)
    print(f"analyzed {succeeded}/{len(results)} file(s) -> {out_dir}")
    return EXIT_OK if succeeded else EXIT_INPUT


# ---------------------------------------------------------------------------
# reconstruct
# ---------------------------------------------------------------------------


def cmd_reconstruct(args) -> int:
    run = _resolve_run_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    mel, sample_rate, hop = pio.read_melb(args.melb)
    stft_config = _stft_config(run, int(sample_rate), hop)
    fb = build_mel_filterbank(mel.shape[1], stft_config)
    waveform = reconstruct_from_mel(
        mel, fb, stft_config, _gla_config(run, run.seed), run.seed
    )
    target = out_dir / (Path(args.melb).stem + ".wav")
    pio.write_wav(target, waveform, int(sample_rate))

    manifest = _manifest_base("reconstruct", args.effective_argv, run, run.seed)
    manifest["inputs"] = [str(args.melb)]
    manifest["outputs"] = [str(target)]
    manifest["finished_at"] = _utc_now()
    write_manifest(out_dir, manifest)
    print(f"reconstructed {args.melb} -> {target}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------


def cmd_generate(args) -> int:
    run = _resolve_run_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    mel, sample_rate, hop = pio.read_melb(args.melb)
    stft_config = _stft_config(run, int(sample_rate), hop)
    schedule = schedule_from_betas(run.betas)
    fb = build_mel_filterbank(mel.shape[1], stft_config)

    reference = None
    if args.reference:
        reference, _ = pio.read_wav(args.reference)

    spec = _PredictorSpec(args.predictor)
    predictor_ref = _load_reference_for(spec, reference)
    length = stft_config.default_length(mel.shape[0])
    if predictor_ref is not None:
        predictor_ref = _fit_reference(predictor_ref, length, mel.shape[0], stft_config)
    if reference is not None:
        reference = _fit_reference(reference, length, mel.shape[0], stft_config)

    predictor = spec.build(schedule, run.seed, predictor_ref)
    sampler = _sampler_config(run, stft_config, run.seed)
    start = time.perf_counter()
    try:
        waveform, _trace = generate(mel, predictor, schedule, sampler, length, fb=fb)
    finally:
        if isinstance(predictor, ExternalPredictor):
            predictor.close()
    elapsed = time.perf_counter() - start

    target = out_dir / (Path(args.melb).stem + ".wav")
    pio.write_wav(target, waveform, int(sample_rate))

    rtf = (length / stft_config.sample_rate) / elapsed if elapsed > 0 else None
    report = None
    if reference is not None:
        report = pmetrics.report(reference, waveform, mel, fb, stft_config)
    row = _metric_row(args.melb, run.variant, run.stage1_end, report, rtf)
    _write_metric_csv(out_dir / "metrics.csv", [row])

    manifest = _manifest_base("generate", args.effective_argv, run, run.seed)
    manifest["inputs"] = [str(args.melb)] + ([str(args.reference)] if args.reference else [])
    manifest["predictor"] = args.predictor
    manifest["outputs"] = [str(target), str(out_dir / "metrics.csv")]
    manifest["finished_at"] = _utc_now()
    write_manifest(out_dir, manifest)
    if report is not None:
        print(
            f"generated {target} | sc={report.spectral_convergence:.4f} "
            f"lsd={report.log_spectral_distance_db:.2f}dB snr={report.snr_db:.1f}dB "
            f"mc={report.mel_consistency:.4f}"
        )
    else:
        print(f"generated {target}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# oracle-eval
# ---------------------------------------------------------------------------


def oracle_x_tilde(reference, mode, stft_config, fb, gla_config):
    """Correction waveform for the ground-truth experiments.

    oracle_spec runs phase retrieval on the true magnitude (no mel round
    trip); oracle_phase combines the true phase with the mel-derived
    magnitude in a single inverse STFT.
    """
    ref_spec = stft(reference, stft_config)
    true_mag = np.abs(ref_spec)
    mel = apply_mel(true_mag, fb)
    length = reference.shape[0]
    if mode == "oracle_spec":
        x_tilde = griffin_lim(true_mag, stft_config, gla_config, length=length)
    elif mode == "oracle_phase":
        estimated = estimate_magnitude(mel, fb)
        zero = true_mag == 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            phase = ref_spec / true_mag
        phase[zero] = 1.0
        x_tilde = istft(estimated * phase, stft_config, length)
    else:
        raise ValueError(f"unknown oracle mode {mode!r}")
    return x_tilde, mel


def cmd_oracle_eval(args) -> int:
    run = _resolve_run_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    reference, rate = pio.read_wav(args.reference)
    stft_config = _stft_config(run, rate, args.hop)
    schedule = schedule_from_betas(run.betas)
    fb = build_mel_filterbank(args.bands, stft_config)

    x_tilde, mel = oracle_x_tilde(
        reference, args.mode, stft_config, fb, _gla_config(run, run.seed)
    )
    length = reference.shape[0]

    spec = _PredictorSpec(args.predictor) if args.predictor else _PredictorSpec("oracle")
    predictor_ref = _load_reference_for(spec, reference)
    if predictor_ref is not None:
        predictor_ref = _fit_reference(predictor_ref, length, mel.shape[0], stft_config)
    predictor = spec.build(schedule, run.seed, predictor_ref)

    sampler = _sampler_config(run, stft_config, run.seed)
    if sampler.variant != "corrected":
        raise ConfigurationError("oracle-eval requires the corrected variant")
    try:
        waveform, _trace = generate(
            mel, predictor, schedule, sampler, length, fb=fb, x_tilde=x_tilde
        )
    finally:
        if isinstance(predictor, ExternalPredictor):
            predictor.close()

    report = pmetrics.report(reference, waveform, mel, fb, stft_config)
    target = out_dir / (Path(args.reference).stem + f".{args.mode}.wav")
    pio.write_wav(target, waveform, rate)
    row = _metric_row(args.reference, f"corrected[{args.mode}]", run.stage1_end, report, None)
    _write_metric_csv(out_dir / "metrics.csv", [row])

    manifest = _manifest_base("oracle-eval", args.effective_argv, run, run.seed)
    manifest["inputs"] = [str(args.reference)]
    manifest["mode"] = args.mode
    manifest["outputs"] = [str(target), str(out_dir / "metrics.csv")]
    manifest["finished_at"] = _utc_now()
    write_manifest(out_dir, manifest)
    print(
        f"{args.mode}: sc={report.spectral_convergence:.4f} "
        f"lsd={report.log_spectral_distance_db:.2f}dB snr={report.snr_db:.1f}dB "
        f"mc={report.mel_consistency:.4f}"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def cmd_sweep(args) -> int:
    run = _resolve_run_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if len(args.pairs) < 2 or len(args.pairs) % 2 != 0:
        raise InputFormatError("sweep expects MELB/REF path pairs")
    pairs = [(args.pairs[i], args.pairs[i + 1]) for i in range(0, len(args.pairs), 2)]
    schedule = schedule_from_betas(run.betas)
    endpoints = list(range(schedule.T + 1))
    spec = _PredictorSpec(args.predictor)

    failures: list[dict] = []

    def sweep_one(pair):
        melb_path, ref_path = pair
        rows = []
        try:
            mel, sample_rate, hop = pio.read_melb(melb_path)
            stft_config = _stft_config(run, int(sample_rate), hop)
            fb = build_mel_filterbank(mel.shape[1], stft_config)
            reference, _ = pio.read_wav(ref_path)
            length = stft_config.default_length(mel.shape[0])
            reference = _fit_reference(reference, length, mel.shape[0], stft_config)
            file_seed = _rng.seed_for_path(run.seed, str(melb_path))
            predictor_ref = _load_reference_for(spec, reference)
            if predictor_ref is not None:
                predictor_ref = _fit_reference(predictor_ref, length, mel.shape[0], stft_config)
            predictor = spec.build(schedule, file_seed, predictor_ref)
            audio_seconds = length / stft_config.sample_rate
        except (PavocError, ValueError, FileNotFoundError) as exc:
            return [], [
                {"path": str(melb_path), "stage1_end": n, "error": str(exc)}
                for n in endpoints
            ]

        errors = []
        for n in endpoints:
            sampler = SamplerConfig(
                variant="corrected",
                sigma_mode=run.sigma_mode,
                stage1_end=n,
                seed=file_seed,
                gla=_gla_config(run, file_seed),
                stft=stft_config,
            )
            try:
                start = time.perf_counter()
                waveform, _tr = generate(mel, predictor, schedule, sampler, length, fb=fb)
                elapsed = time.perf_counter() - start
                report = pmetrics.report(reference, waveform, mel, fb, stft_config)
                rtf = audio_seconds / elapsed if elapsed > 0 else None
                rows.append(_metric_row(melb_path, "corrected", n, report, rtf))
            except (PavocError, ValueError) as exc:
                errors.append({"path": str(melb_path), "stage1_end": n, "error": str(exc)})
        return rows, errors

    results = _map_files(sweep_one, pairs)
    all_rows: list[dict] = []
    for rows, errors in results:
        all_rows.extend(rows)
        failures.extend(errors)

    _write_metric_csv(out_dir / "sweep.csv", all_rows)
    histogram, tie_notes = _endpoint_histograms(all_rows)
    _write_histogram_report(out_dir / "histogram.txt", histogram, tie_notes, endpoints)
    figures.save_endpoint_histograms(histogram, schedule.T, out_dir / "histogram.png")

    manifest = _manifest_base("sweep", args.effective_argv, run, run.seed)
    manifest["inputs"] = [str(p) for pair in pairs for p in pair]
    manifest["predictor"] = args.predictor
    manifest["failures"] = failures
    manifest["outputs"] = [
        str(out_dir / "sweep.csv"),
        str(out_dir / "histogram.txt"),
        str(out_dir / "histogram.png"),
    ]
    manifest["finished_at"] = _utc_now()
    write_manifest(out_dir, manifest)
    print(
        f"sweep: {len(all_rows)} rows over {len(pairs)} file(s), "
        f"{len(failures)} failure(s) -> {out_dir}"
    )
    return EXIT_OK if all_rows else EXIT_INPUT


def _endpoint_histograms(rows: list[dict]):
    """Per-metric histogram of the optimal endpoint per file; ties -> smaller n."""
    metric_names = ["spectral_convergence", "lsd_db", "snr_db", "mel_consistency"]
    by_file: dict = {}
    for row in rows:
        by_file.setdefault(row["path"], []).append(row)
    histogram = {name: {} for name in metric_names}
    tie_notes = []
    for path, file_rows in by_file.items():
        for name in metric_names:
            valued = [
                (int(r["stage1_end"]), float(r[name])) for r in file_rows if r[name] != ""
            ]
            if not valued:
                continue
            best = (
                max(v for _, v in valued)
                if name in HIGHER_IS_BETTER
                else min(v for _, v in valued)
            )
            winners = sorted(n for n, v in valued if v == best)
            pick = winners[0]
            if len(winners) > 1:
                tie_notes.append(
                    f"{path}: {name} tie between endpoints {winners}, kept {pick}"
                )
            histogram[name][pick] = histogram[name].get(pick, 0) + 1
    return histogram, tie_notes


def _write_histogram_report(path: Path, histogram, tie_notes, endpoints) -> None:
    lines = ["optimal stage-1 endpoint per file", ""]
    for name, counts in histogram.items():
        lines.append(f"[{name}]")
        for n in endpoints:
            lines.append(f"  endpoint {n}: {counts.get(n, 0)}")
        lines.append("")
    if tie_notes:
        lines.append("ties (broken toward the smaller endpoint):")
        lines.extend(f"  {note}" for note in tie_notes)
        lines.append("")
    Path(path).write_text("\n".join(lines))


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------


def cmd_bench(args) -> int:
    run = _resolve_run_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if not args.melbs:
        raise InputFormatError("bench needs at least one MELB file")
    schedule = schedule_from_betas(run.betas)
    variant_names = [v.strip() for v in args.variants.split(",") if v.strip()]
    alias = {"plain": "plain", "baseline": "per_step_gla_baseline", "corrected": "corrected"}
    for name in variant_names:
        if name not in alias:
            raise ConfigurationError(f"unknown bench variant {name!r}")
    spec = _PredictorSpec(args.predictor)

    batch = []
    total_seconds = 0.0
    for melb_path in args.melbs:
        mel, sample_rate, hop = pio.read_melb(melb_path)
        stft_config = _stft_config(run, int(sample_rate), hop)
        fb = build_mel_filterbank(mel.shape[1], stft_config)
        length = stft_config.default_length(mel.shape[0])
        file_seed = _rng.seed_for_path(run.seed, str(melb_path))
        predictor_ref = _load_reference_for(spec, None)
        if predictor_ref is not None:
            predictor_ref = _fit_reference(predictor_ref, length, mel.shape[0], stft_config)
        predictor = spec.build(schedule, file_seed, predictor_ref)
        batch.append((mel, stft_config, fb, length, file_seed, predictor))
        total_seconds += length / stft_config.sample_rate

    results = {}
    for name in variant_names:
        variant = alias[name]

        def run_batch():
            for mel, stft_config, fb, length, file_seed, predictor in batch:
                sampler = SamplerConfig(
                    variant=variant,
                    sigma_mode=run.sigma_mode,
                    stage1_end=run.stage1_end,
                    seed=file_seed,
                    gla=_gla_config(run, file_seed),
                    stft=stft_config,
                )
                generate(mel, predictor, schedule, sampler, length, fb=fb)

        results[name] = pmetrics.measure_rtf(run_batch, total_seconds, args.repetitions)

    rows = [
        {
            "variant": name,
            "rtf": f"{res.rtf:.6g}",
            "seconds_median": f"{res.seconds_median:.6g}",
            "repetitions": args.repetitions,
            "audio_seconds": f"{res.audio_seconds:.6g}",
        }
        for name, res in results.items()
    ]
    with (out_dir / "bench.csv").open("w", newline="") as handle:
        writer = csv.DictWriter(
            handle,
            fieldnames=["variant", "rtf", "seconds_median", "repetitions", "audio_seconds"],
        )
        writer.writeheader()
        writer.writerows(rows)
    figures.save_rtf_bars({n: r.rtf for n, r in results.items()}, out_dir / "rtf.png")

    manifest = _manifest_base("bench", args.effective_argv, run, run.seed)
    manifest["inputs"] = [str(p) for p in args.melbs]
    manifest["predictor"] = args.predictor
    manifest["variants"] = variant_names
    manifest["outputs"] = [str(out_dir / "bench.csv"), str(out_dir / "rtf.png")]
    manifest["finished_at"] = _utc_now()
    write_manifest(out_dir, manifest)

    print(f"{'variant':<12} {'rtf':>10} {'median_s':>10}")
    for name, res in results.items():
        print(f"{name:<12} {res.rtf:>10.2f} {res.seconds_median:>10.3f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="run configuration file")
    parser.add_argument("--seed", type=int, help="base RNG seed")
    parser.add_argument("--out", default=".", help="output directory")


def _add_sampler_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--variant", choices=["plain", "baseline", "corrected"])
    parser.add_argument("--stage1-end", dest="stage1_end", type=int)
    parser.add_argument("--sigma", choices=["ddpm", "ddim0"])
    parser.add_argument("--gla-iters", dest="gla_iters", type=int)
    parser.add_argument("--gla-momentum", dest="gla_momentum", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pavoc",
        description="Phase-aware diffusion vocoder engine",
    )
    parser.add_argument("--version", action="version", version=f"pavoc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="WAV -> MELB mel spectrograms")
    p.add_argument("wavs", nargs="+", metavar="WAV")
    p.add_argument("--hop", type=int, default=300)
    p.add_argument("--bands", type=int, default=DEFAULT_BANDS)
    p.add_argument("--f-min", dest="f_min", type=float, default=0.0)
    p.add_argument("--f-max", dest="f_max", type=float, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("reconstruct", help="MELB -> WAV via pseudo-inverse + fast GLA")
    p.add_argument("melb", metavar="MELB")
    p.add_argument("--gla-iters", dest="gla_iters", type=int)
    p.add_argument("--gla-momentum", dest="gla_momentum", type=float)
    _add_common(p)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("generate", help="MELB -> WAV via the diffusion sampler")
    p.add_argument("melb", metavar="MELB")
    p.add_argument(
        "--predictor",
        default="zero",
        help="zero | oracle:<ref.wav> | degraded:<ref.wav>:<snr_db>[:<deficit>] | external:<command>",
    )
    p.add_argument("--reference", help="reference WAV for metrics")
    _add_sampler_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("oracle-eval", help="ground-truth magnitude/phase experiments")
    p.add_argument("reference", metavar="REF_WAV")
    p.add_argument("--mode", choices=["oracle_spec", "oracle_phase"], required=True)
    p.add_argument("--predictor", default=None, help="defaults to oracle:<reference>")
    p.add_argument("--hop", type=int, default=300)
    p.add_argument("--bands", type=int, default=DEFAULT_BANDS)
    _add_sampler_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_oracle_eval)

    p = sub.add_parser("sweep", help="endpoint sweep with per-file optimum histogram")
    p.add_argument("pairs", nargs="+", metavar="MELB REF")
    p.add_argument(
        "--predictor",
        default="oracle",
        help="oracle | degraded:<snr_db>[:<deficit>] | zero | external:<cmd>; "
        "path-less oracle/degraded bind to each file's paired reference",
    )
    _add_sampler_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bench", help="RTF benchmark across sampler variants")
    p.add_argument("melbs", nargs="+", metavar="MELB")
    p.add_argument("--variants", default="plain,corrected,baseline")
    p.add_argument("--repetitions", type=int, default=3)
    p.add_argument("--predictor", default="zero")
    _add_sampler_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.effective_argv = list(argv) if argv is not None else sys.argv[1:]
    try:
        return args.func(args)
    except (InputFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (WireProtocolError, PredictorUnavailableError, PredictorContractError) as exc:
        print(f"predictor error: {exc}", file=sys.stderr)
        return EXIT_PREDICTOR
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
