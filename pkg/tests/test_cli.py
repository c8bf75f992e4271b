"""End-to-end tests for the command-line surface."""

import csv
import json
import sys
from pathlib import Path

import numpy as np
import pytest

from helpers import domain_shift, synth_utterance
from pavoc.cli import main
from pavoc.dsp import StftConfig, apply_mel, build_mel_filterbank, stft
from pavoc.io import read_melb, read_wav, write_melb, write_wav
from pavoc.metrics import mel_consistency, snr_db
from pavoc.rng import seed_for_path

SERVER = Path(__file__).parent / "loopback_server.py"


@pytest.fixture()
def workspace(tmp_path):
    wav_dir = tmp_path / "wavs"
    wav_dir.mkdir()
    paths = []
    for seed in (101, 102):
        x = synth_utterance(seed)
        path = wav_dir / f"utt{seed}.wav"
        write_wav(path, x, 22050)
        paths.append(path)
    return tmp_path, paths


def run_cli(*args):
    return main([str(a) for a in args])


def read_rows(path):
    with open(path, newline="") as handle:
        return list(csv.DictReader(handle))


class TestAnalyze:
    def test_produces_melb(self, workspace):
        tmp, wavs = workspace
        out = tmp / "mels"
        assert run_cli("analyze", *wavs, "--out", out) == 0
        for wav in wavs:
            mel, rate, hop = read_melb(out / (wav.stem + ".melb"))
            assert rate == 22050.0
            assert hop == 300
            assert mel.shape == (74, 128)
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "analyze"
        assert all(f["status"] == "ok" for f in manifest["files"])

    def test_silence(self, tmp_path):
        silent = tmp_path / "silence.wav"
        write_wav(silent, np.zeros(22050), 22050)
        out = tmp_path / "out"
        assert run_cli("analyze", silent, "--out", out) == 0
        mel, _, _ = read_melb(out / "silence.melb")
        assert mel.shape == (74, 128)  # 1 + floor(22050/300)
        assert np.all(mel == 0)

    def test_bad_file_batch_continues(self, workspace, tmp_path):
        tmp, wavs = workspace
        bad = tmp / "bad.wav"
        bad.write_bytes(b"junk")
        out = tmp / "out"
        assert run_cli("analyze", wavs[0], bad, "--out", out) == 0
        assert (out / (wavs[0].stem + ".melb")).exists()
        manifest = json.loads((out / "manifest.json").read_text())
        statuses = {f["input"]: f["status"] for f in manifest["files"]}
        assert statuses[str(bad)] == "error"

    def test_all_bad_exits_2(self, tmp_path):
        bad = tmp_path / "bad.wav"
        bad.write_bytes(b"junk")
        assert run_cli("analyze", bad, "--out", tmp_path / "o") == 2

    def test_matches_library_values(self, workspace):
        tmp, wavs = workspace
        out = tmp / "mels"
        run_cli("analyze", wavs[0], "--out", out)
        x, _ = read_wav(wavs[0])
        config = StftConfig()
        fb = build_mel_filterbank(128, config)
        expected = apply_mel(np.abs(stft(x, config)), fb)
        mel, _, _ = read_melb(out / (wavs[0].stem + ".melb"))
        np.testing.assert_allclose(mel, expected.astype(np.float32), atol=0)

    def test_thread_env(self, workspace, monkeypatch):
        tmp, wavs = workspace
        monkeypatch.setenv("PAVOC_THREADS", "2")
        out1 = tmp / "par"
        assert run_cli("analyze", *wavs, "--out", out1) == 0
        monkeypatch.setenv("PAVOC_THREADS", "1")
        out2 = tmp / "ser"
        assert run_cli("analyze", *wavs, "--out", out2) == 0
        for wav in wavs:
            a = (out1 / (wav.stem + ".melb")).read_bytes()
            b = (out2 / (wav.stem + ".melb")).read_bytes()
            assert a == b


@pytest.fixture()
def analyzed(workspace):
    tmp, wavs = workspace
    mel_dir = tmp / "mels"
    run_cli("analyze", *wavs, "--out", mel_dir)
    melbs = [mel_dir / (w.stem + ".melb") for w in wavs]
    return tmp, wavs, melbs


class TestReconstruct:
    def test_writes_wav_deterministically(self, analyzed):
        tmp, wavs, melbs = analyzed
        out1, out2 = tmp / "r1", tmp / "r2"
        assert run_cli("reconstruct", melbs[0], "--seed", 5, "--out", out1) == 0
        assert run_cli("reconstruct", melbs[0], "--seed", 5, "--out", out2) == 0
        a = (out1 / (melbs[0].stem + ".wav")).read_bytes()
        b = (out2 / (melbs[0].stem + ".wav")).read_bytes()
        assert a == b

    def test_zero_mel_zero_wav(self, tmp_path):
        melb = tmp_path / "zero.melb"
        write_melb(melb, np.zeros((10, 128)), 22050.0, 300)
        out = tmp_path / "out"
        assert run_cli("reconstruct", melb, "--out", out) == 0
        y, _ = read_wav(out / "zero.wav")
        assert np.all(y == 0)

    def test_bad_melb_exits_2(self, tmp_path):
        bad = tmp_path / "bad.melb"
        bad.write_bytes(b"nope")
        assert run_cli("reconstruct", bad, "--out", tmp_path / "o") == 2


class TestGenerate:
    def test_stage1_end_zero_matches_reconstruct(self, analyzed):
        tmp, wavs, melbs = analyzed
        gen_out, rec_out = tmp / "g0", tmp / "rec"
        assert (
            run_cli(
                "generate", melbs[0],
                "--variant", "corrected", "--stage1-end", 0, "--seed", 21,
                "--predictor", f"oracle:{wavs[0]}", "--out", gen_out,
            )
            == 0
        )
        assert run_cli("reconstruct", melbs[0], "--seed", 21, "--out", rec_out) == 0
        a = (gen_out / (melbs[0].stem + ".wav")).read_bytes()
        b = (rec_out / (melbs[0].stem + ".wav")).read_bytes()
        assert a == b

    def test_stage1_end_T_matches_plain(self, analyzed):
        tmp, wavs, melbs = analyzed
        out_c, out_p = tmp / "gc", tmp / "gp"
        common = ["--seed", 22, "--predictor", f"oracle:{wavs[0]}"]
        assert run_cli(
            "generate", melbs[0], "--variant", "corrected", "--stage1-end", 6, *common, "--out", out_c
        ) == 0
        assert run_cli(
            "generate", melbs[0], "--variant", "plain", *common, "--out", out_p
        ) == 0
        a = (out_c / (melbs[0].stem + ".wav")).read_bytes()
        b = (out_p / (melbs[0].stem + ".wav")).read_bytes()
        assert a == b

    def test_oracle_ddim0_recovers_reference(self, analyzed):
        tmp, wavs, melbs = analyzed
        out = tmp / "oracle"
        assert (
            run_cli(
                "generate", melbs[0],
                "--variant", "plain", "--sigma", "ddim0", "--seed", 3,
                "--predictor", f"oracle:{wavs[0]}", "--reference", wavs[0],
                "--out", out,
            )
            == 0
        )
        y, _ = read_wav(out / (melbs[0].stem + ".wav"))
        x, _ = read_wav(wavs[0])
        # outputs use the canonical length for the frame count; float32 WAV
        # quantization bounds the measurable SNR, so compare in float32
        assert snr_db(x[: y.size].astype(np.float32), y) >= 120.0
        rows = read_rows(out / "metrics.csv")
        assert float(rows[0]["snr_db"]) >= 120.0

    def test_reference_free_metrics_absent(self, analyzed):
        tmp, wavs, melbs = analyzed
        out = tmp / "nofref"
        assert run_cli("generate", melbs[0], "--variant", "plain", "--out", out) == 0
        rows = read_rows(out / "metrics.csv")
        assert rows[0]["spectral_convergence"] == ""
        assert rows[0]["snr_db"] == ""
        assert rows[0]["rtf"] != ""

    def test_external_predictor_zero_server(self, analyzed):
        tmp, wavs, melbs = analyzed
        out = tmp / "ext"
        command = f"external:{sys.executable} {SERVER} zero"
        assert run_cli(
            "generate", melbs[0], "--variant", "plain", "--predictor", command, "--out", out
        ) == 0

    def test_handshake_failure_exit_3(self, analyzed):
        tmp, wavs, melbs = analyzed
        command = f"external:{sys.executable} {SERVER} zero --no-handshake"
        code = run_cli(
            "generate", melbs[0], "--variant", "plain", "--predictor", command,
            "--out", tmp / "hs",
        )
        assert code == 3

    def test_server_death_mid_generation_exit_3(self, analyzed):
        tmp, wavs, melbs = analyzed
        command = f"external:{sys.executable} {SERVER} zero --fail-after 2"
        code = run_cli(
            "generate", melbs[0], "--variant", "plain", "--predictor", command,
            "--out", tmp / "dead",
        )
        assert code == 3

    def test_bad_melb_exit_2(self, tmp_path):
        bad = tmp_path / "bad.melb"
        bad.write_bytes(b"MELBxxxx")
        assert run_cli("generate", bad, "--out", tmp_path / "o") == 2

    def test_bad_config_exit_4(self, analyzed, tmp_path):
        tmp, wavs, melbs = analyzed
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("schedule.betas = [2.0]\n")
        assert run_cli("generate", melbs[0], "--config", cfg, "--out", tmp_path / "o") == 4


class TestOracleEval:
    def test_both_modes_report_metrics(self, workspace):
        tmp, wavs = workspace
        for mode in ("oracle_spec", "oracle_phase"):
            out = tmp / f"oe_{mode}"
            assert (
                run_cli(
                    "oracle-eval", wavs[0], "--mode", mode, "--seed", 4, "--out", out
                )
                == 0
            )
            rows = read_rows(out / "metrics.csv")
            assert rows[0]["variant"] == f"corrected[{mode}]"
            assert float(rows[0]["mel_consistency"]) >= 0.0
            assert (out / (wavs[0].stem + f".{mode}.wav")).exists()

    def test_oracle_phase_with_true_magnitude_reconstructs(self, stft_config, fb128):
        # when the magnitude is also ground truth, true phase + inverse STFT
        # is the identity; covered here via the oracle_spec fixed point of the
        # combine path in dsp tests and the library identity below
        from pavoc.cli import oracle_x_tilde
        from pavoc.phase_retrieval import GlaConfig as GC

        x = synth_utterance(301)
        x_tilde, _mel = oracle_x_tilde(x, "oracle_phase", stft_config, fb128, GC(seed=0))
        assert x_tilde.shape == x.shape  # mel-derived magnitude, true phase

    def test_phase_oracle_beats_spec_oracle_directionally(self, stft_config, fb128, wg6_schedule):
        # ground-truth phase should help at least as often as ground-truth
        # magnitude under a degraded out-of-domain predictor; threshold 80%
        # of 20 files (validated before freezing: observed 17/20)
        from pavoc.cli import oracle_x_tilde
        from pavoc.diffusion import SamplerConfig, generate
        from pavoc.phase_retrieval import GlaConfig as GC
        from pavoc.predictor import DegradedOraclePredictor

        wins = 0
        for seed in range(7000, 7020):
            x = synth_utterance(seed)
            predictor = DegradedOraclePredictor(
                domain_shift(x), wg6_schedule, 10.0, seed, denoising_deficit=0.6
            )
            values = {}
            for mode in ("oracle_phase", "oracle_spec"):
                x_tilde, mel = oracle_x_tilde(x, mode, stft_config, fb128, GC(seed=seed))
                sampler = SamplerConfig(
                    variant="corrected", sigma_mode="ddpm", stage1_end=3,
                    seed=seed, stft=stft_config,
                )
                y, _ = generate(
                    mel, predictor, wg6_schedule, sampler, x.size, fb=fb128, x_tilde=x_tilde
                )
                values[mode] = mel_consistency(y, mel, fb128, stft_config)
            wins += values["oracle_phase"] <= values["oracle_spec"]
        assert wins >= 16  # 80% of 20


class TestSweep:
    @pytest.fixture()
    def short_config(self, tmp_path):
        cfg = tmp_path / "short.cfg"
        cfg.write_text("schedule.betas = [0.01, 0.1, 0.5]\ngla.iterations = 4\n")
        return cfg

    def test_row_count_and_endpoints(self, analyzed, short_config):
        tmp, wavs, melbs = analyzed
        out = tmp / "sweep"
        pairs = [melbs[0], wavs[0], melbs[1], wavs[1]]
        assert run_cli("sweep", *pairs, "--config", short_config, "--seed", 9, "--out", out) == 0
        rows = read_rows(out / "sweep.csv")
        assert len(rows) == 2 * 4  # files x (T+1)
        per_file = {}
        for row in rows:
            per_file.setdefault(row["path"], []).append(int(row["stage1_end"]))
        for endpoints in per_file.values():
            assert endpoints == [0, 1, 2, 3]
        assert (out / "histogram.txt").exists()
        assert (out / "histogram.png").exists()

    def test_endpoint_zero_matches_reconstruct_metrics(self, analyzed, short_config):
        tmp, wavs, melbs = analyzed
        out = tmp / "sweep0"
        assert run_cli(
            "sweep", melbs[0], wavs[0], "--config", short_config, "--seed", 9, "--out", out
        ) == 0
        rows = read_rows(out / "sweep.csv")
        row0 = next(r for r in rows if r["stage1_end"] == "0")

        # reconstruct with the sweep's derived per-file seed gives the same signal
        file_seed = seed_for_path(9, str(melbs[0]))
        rec_out = tmp / "sweep0_rec"
        assert run_cli(
            "reconstruct", melbs[0], "--config", short_config, "--seed", file_seed,
            "--out", rec_out,
        ) == 0
        recon, _ = read_wav(rec_out / (melbs[0].stem + ".wav"))
        mel, _, _ = read_melb(melbs[0])
        config = StftConfig()
        fb = build_mel_filterbank(128, config)
        x, _ = read_wav(wavs[0])
        expected_mc = mel_consistency(recon.astype(np.float64), mel, fb, config)
        # sweep computes metrics on the float64 signal before WAV quantization
        assert float(row0["mel_consistency"]) == pytest.approx(expected_mc, rel=1e-4)

    def test_odd_pair_count_rejected(self, analyzed):
        tmp, wavs, melbs = analyzed
        assert run_cli("sweep", melbs[0], "--out", tmp / "odd") == 2

    def test_failures_recorded_and_skipped(self, analyzed, short_config, tmp_path):
        tmp, wavs, melbs = analyzed
        bad = tmp_path / "missing.melb"
        out = tmp / "sweepfail"
        assert run_cli(
            "sweep", melbs[0], wavs[0], bad, wavs[1],
            "--config", short_config, "--out", out,
        ) == 0
        rows = read_rows(out / "sweep.csv")
        assert len(rows) == 4  # only the healthy file contributes
        manifest = json.loads((out / "manifest.json").read_text())
        assert len(manifest["failures"]) == 4


class TestBench:
    def test_table_and_figure(self, analyzed, tmp_path):
        tmp, wavs, melbs = analyzed
        cfg = tmp_path / "short.cfg"
        cfg.write_text("schedule.betas = [0.01, 0.1, 0.5]\ngla.iterations = 4\nsampler.stage1_end = 2\n")
        out = tmp / "bench"
        assert (
            run_cli(
                "bench", *melbs, "--config", cfg, "--variants", "plain,corrected",
                "--repetitions", 1, "--out", out,
            )
            == 0
        )
        rows = read_rows(out / "bench.csv")
        assert [r["variant"] for r in rows] == ["plain", "corrected"]
        rtf = {r["variant"]: float(r["rtf"]) for r in rows}
        assert rtf["plain"] > rtf["corrected"]
        assert (out / "rtf.png").exists()

    def test_unknown_variant_exit_4(self, analyzed):
        tmp, wavs, melbs = analyzed
        assert run_cli("bench", melbs[0], "--variants", "warp", "--out", tmp / "b") == 4


class TestManifest:
    def test_generate_manifest_contents(self, analyzed):
        tmp, wavs, melbs = analyzed
        out = tmp / "mano"
        run_cli(
            "generate", melbs[0], "--variant", "plain", "--seed", 77, "--out", out
        )
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "generate"
        assert manifest["seed"] == 77
        assert manifest["config"]["sampler.variant"] == "plain"
        assert str(melbs[0]) in manifest["inputs"]
        assert manifest["started_at"] <= manifest["finished_at"]

    def test_rerun_reproduces_outputs(self, analyzed):
        tmp, wavs, melbs = analyzed
        out1, out2 = tmp / "rep1", tmp / "rep2"
        args = [
            "generate", melbs[0], "--variant", "corrected", "--stage1-end", 2,
            "--seed", 5, "--predictor", f"degraded:{wavs[0]}:10:0.6",
        ]
        run_cli(*args, "--out", out1)
        run_cli(*args, "--out", out2)
        a = (out1 / (melbs[0].stem + ".wav")).read_bytes()
        b = (out2 / (melbs[0].stem + ".wav")).read_bytes()
        assert a == b


class TestAnalyzeSynthesizeFixedPoint:
    def test_reported_consistency_matches_reanalysis(self, analyzed):
        # analyzing the GLA reconstruction yields a mel whose distance to the
        # conditioning mel is exactly the reconstruction's mel-consistency
        tmp, wavs, melbs = analyzed
        rec_out = tmp / "fp"
        run_cli("reconstruct", melbs[0], "--seed", 2, "--out", rec_out)
        recon_wav = rec_out / (melbs[0].stem + ".wav")
        re_out = tmp / "fp_mel"
        run_cli("analyze", recon_wav, "--out", re_out)

        mel, _, _ = read_melb(melbs[0])
        mel2, _, _ = read_melb(re_out / (recon_wav.stem + ".melb"))
        recon, _ = read_wav(recon_wav)
        config = StftConfig()
        fb = build_mel_filterbank(128, config)
        reported = mel_consistency(recon, mel, fb, config)
        recomputed = np.linalg.norm(mel2 - mel) / np.linalg.norm(mel)
        assert recomputed == pytest.approx(reported, rel=1e-5)
