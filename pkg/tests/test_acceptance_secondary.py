"""Acceptance criterion 12: protocol conformance of the external stub.

These tests need the TypeScript stub built (``cd stub && npm install &&
npm run build``) and are skipped otherwise; criteria 1-11 run without it.
"""

import shutil
import struct
import subprocess
from pathlib import Path

import numpy as np
import pytest

from helpers import synth_utterance
from pavoc.cli import main as cli_main
from pavoc.config import DEFAULT_BETAS, RunConfig, dump_run_config
from pavoc.diffusion import forward_diffuse, schedule_from_betas
from pavoc.dsp import StftConfig, apply_mel, build_mel_filterbank, stft
from pavoc.errors import PredictorUnavailableError
from pavoc.io import read_wav, write_melb, write_wav
from pavoc.predictor import ExternalPredictor, PredictorRequest, oracle_predict
from pavoc.rng import philox

REPO = Path(__file__).parent.parent
STUB_MAIN = REPO / "stub" / "dist" / "main.js"
FIXTURES = Path(__file__).parent / "fixtures"

pytestmark = pytest.mark.skipif(
    not STUB_MAIN.exists() or shutil.which("node") is None,
    reason="stub not built (cd stub && npm install && npm run build)",
)


def _report(ok: bool, detail: str) -> None:
    print(f"criterion 12: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, detail


@pytest.fixture(scope="module")
def schedule_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "run.cfg"
    path.write_text(dump_run_config(RunConfig()))
    return path


def test_oracle_stub_matches_in_process_over_100_requests(tmp_path, schedule_file, wg6_schedule):
    x = synth_utterance(880)
    ref = tmp_path / "ref.wav"
    write_wav(ref, x, 22050)
    # both sides must see the same float32-quantized reference
    y0, _ = read_wav(ref)

    command = [
        "node", str(STUB_MAIN), "oracle",
        "--ref-wav", str(ref), "--schedule", str(schedule_file),
    ]
    rng = philox(881)
    worst = 0.0
    with ExternalPredictor(command, timeout=30.0) as predictor:
        for i in range(100):
            t = (i % wg6_schedule.T) + 1
            y_t = forward_diffuse(y0, t, rng.normal(size=y0.size), wg6_schedule)
            request = PredictorRequest(
                y_t=y_t,
                mel=np.zeros((1, 1)),
                noise_level=float(np.sqrt(wg6_schedule.alpha_bars[t])),
            )
            remote = predictor.predict(request)
            local = oracle_predict(request, y0, wg6_schedule)
            scale = max(1.0, float(np.max(np.abs(local))))
            worst = max(worst, float(np.max(np.abs(remote - local))) / scale)
    _report(worst <= 1e-6, f"100 requests, worst scaled deviation {worst:.3e}")


def test_golden_frames_over_the_pipe():
    # raw byte conversation against the checked-in fixtures
    hello = (FIXTURES / "handshake.bin").read_bytes()
    request = (FIXTURES / "request.bin").read_bytes()
    proc = subprocess.run(
        ["node", str(STUB_MAIN), "zero"],
        input=hello + request,
        stdout=subprocess.PIPE,
        timeout=60,
    )
    expected_reply = (FIXTURES / "handshake_reply.bin").read_bytes()
    expected_response = b"ERS1" + struct.pack("<I", 3) + bytes(12)
    ok = (
        proc.returncode == 0
        and proc.stdout[:8] == expected_reply
        and proc.stdout[8:] == expected_response
    )
    _report(ok, "handshake + zero response bytes match the golden frames")


def test_killing_stub_mid_request_gives_exit_3(tmp_path, stft_config):
    x = synth_utterance(882)
    fb = build_mel_filterbank(128, stft_config)
    mel = apply_mel(np.abs(stft(x, stft_config)), fb)
    melb = tmp_path / "x.melb"
    write_melb(melb, mel, 22050.0, 300)

    command = f"external:node {STUB_MAIN} zero --fail-after 2"
    code = cli_main(
        [
            "generate", str(melb), "--variant", "plain",
            "--predictor", command, "--out", str(tmp_path / "out"),
        ]
    )
    _report(code == 3, f"client exit code {code} after the stub died mid-generation")


def test_stub_oracle_through_the_cli(tmp_path, schedule_file):
    # full pipeline over the wire: deterministic sigma + oracle stub recovers
    # the reference up to float32 transport error
    x = synth_utterance(883)
    ref = tmp_path / "ref.wav"
    write_wav(ref, x, 22050)
    config = StftConfig()
    fb = build_mel_filterbank(128, config)
    mel = apply_mel(np.abs(stft(x, config)), fb)
    melb = tmp_path / "x.melb"
    write_melb(melb, mel, 22050.0, 300)

    command = f"external:node {STUB_MAIN} oracle --ref-wav {ref} --schedule {schedule_file}"
    out = tmp_path / "out"
    code = cli_main(
        [
            "generate", str(melb), "--variant", "plain", "--sigma", "ddim0",
            "--predictor", command, "--reference", str(ref), "--out", str(out),
        ]
    )
    assert code == 0
    generated, _ = read_wav(out / "x.wav")
    reference, _ = read_wav(ref)
    reference = reference[: generated.size]
    err = np.linalg.norm(generated - reference) / np.linalg.norm(reference)
    assert err <= 1e-4  # float32 transport on every hop
