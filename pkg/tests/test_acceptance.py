"""Acceptance criteria, one test each. Every test records a PASS/FAIL line
that is printed in the terminal summary (and to stdout under ``-s``)."""
import json
import time
from dataclasses import replace

import numpy as np
import pytest

from conftest import ACCEPTANCE_RESULTS, make_record
from oracles import central_difference, conv2d_direct, maxpool_direct, rel_error
from songpop import cli
from songpop.audio_io import AudioClip
from songpop.dataset import split_by_artist
from songpop.evaluation import f1_score, threshold_metrics
from songpop.nn import NetConfig, conv2d_forward, init_parameters, maxpool2_forward, mse_loss
from songpop.spectrogram import SpectrogramConfig, hz_to_mel, stft
from songpop.synthetic import write_corpus
from songpop.training import EarlyStopper
from test_spectrogram import naive_stft


def record(name, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
    ACCEPTANCE_RESULTS.append(line)
    print(line)
    assert ok, line


# -- 1. metric arithmetic --------------------------------------------------------

def confusion_vectors(tp, fp, tn, fn, T=70):
    hi, lo = T + 10.0, T - 10.0
    preds = [hi] * tp + [hi] * fp + [lo] * tn + [lo] * fn
    targets = [hi] * tp + [lo] * fp + [lo] * tn + [hi] * fn
    return preds, targets


def test_metric_arithmetic():
    m = threshold_metrics(*confusion_vectors(tp=929, fp=40, tn=1, fn=2), threshold=70)
    direct = f1_score(0.9587, 0.9979)
    ok = (round(m.precision, 4) == 0.9587 and round(m.recall, 4) == 0.9979
          and abs(m.f1 - 0.9779) <= 5e-5 and abs(direct - 0.9779) <= 5e-5)
    record("metric arithmetic", ok,
           f"P={m.precision:.4f} R={m.recall:.4f} F1={m.f1:.6f} (from P,R: {direct:.6f}); target 0.9779 +/- 5e-5")


# -- 2. gradient correctness -----------------------------------------------------

def test_gradient_correctness():
    toy = NetConfig(meta_dim=3, input_mels=16, input_frames=16, conv_filters=(2, 2, 2, 2),
                    meta_hidden=(4,), head_hidden=(4,))
    rng = np.random.default_rng(0)
    specs, meta = rng.uniform(0, 1, (2, 16, 16)), rng.standard_normal((2, 3))
    targets = rng.uniform(0.2, 0.9, 2)
    net = init_parameters(toy, seed=1)

    def loss():
        value, _ = mse_loss(net.forward(specs, meta), targets)
        net._cache = None
        return value

    t0 = time.perf_counter()
    _, dpred = mse_loss(net.forward(specs, meta), targets)
    grads = net.backward(dpred)
    worst = max(rel_error(grads[k], central_difference(loss, p, eps=1e-4)).max() for k, p in net.params.items())
    elapsed = time.perf_counter() - t0
    record("gradient correctness", worst < 1e-3 and elapsed < 60,
           f"max relative error {worst:.2e} over {len(net.params)} tensors (< 1e-3), {elapsed:.1f} s (< 60 s)")


# -- 3. DSP oracles --------------------------------------------------------------

def test_dsp_oracles():
    rng = np.random.default_rng(1)
    x = rng.uniform(-1, 1, 4096)
    cfg = SpectrogramConfig(n_fft=512, hop=256, n_mels=8)
    stft_err = float(np.max(np.abs(stft(AudioClip(x, 16000), cfg) - naive_stft(x, 512, 256))))

    img = rng.standard_normal((3, 8, 10))
    w, b = rng.standard_normal((4, 3, 3, 3)), rng.standard_normal(4)
    conv_err = float(np.max(np.abs(conv2d_forward(img, w, b)[0] - conv2d_direct(img, w, b))))
    pool_err = float(np.max(np.abs(maxpool2_forward(img)[0] - maxpool_direct(img))))
    mel_err = abs(float(hz_to_mel(1000.0)) - 1000.0)

    ok = stft_err < 1e-6 and conv_err < 1e-6 and pool_err == 0.0 and mel_err < 0.05
    record("DSP oracles", ok,
           f"stft {stft_err:.1e} (< 1e-6), conv2d {conv_err:.1e} (< 1e-6), maxpool {pool_err:.1e} (exact), "
           f"|mel(1000) - 1000| = {mel_err:.4f} (< 0.05)")


# -- 4. early stopping -----------------------------------------------------------

def stop_epoch(losses):
    s = EarlyStopper(patience=7, min_delta=0.0)
    for epoch, v in enumerate(losses, start=1):
        if s.observe(v):
            return epoch
    return None


def test_early_stopping():
    got = (stop_epoch(np.linspace(1.0, 0.1, 25)), stop_epoch([1.0] + [1.1] * 7),
           stop_epoch([1.0, 1.1, 1.1, 0.9] + [1.0] * 7))
    record("early stopping", got == (None, 8, 11), f"stop epochs {got}, expected (None, 8, 11)")


# -- 5. leakage guard ------------------------------------------------------------

def test_leakage_guard():
    base = make_record(0)
    leaks, worst, checked = 0, 0.0, 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        n_artists = int(rng.integers(2, 60))
        sizes = rng.integers(1, 21, n_artists)
        recs = [replace(base, track_id=f"{a}-{k}", artist_id=f"ar{a}")
                for a in range(n_artists) for k in range(sizes[a])]
        s = split_by_artist(recs, 0.8, seed)
        leaks += bool({r.artist_id for r in s.train} & {r.artist_id for r in s.test})
        if n_artists >= 10:
            checked += 1
            worst = max(worst, abs(s.train_fraction - 0.8))
    record("leakage guard", leaks == 0 and worst <= 0.1,
           f"{leaks} shared artists over 100 catalogs; worst |fraction - 0.8| = {worst:.4f} "
           f"over {checked} catalogs with >= 10 artists (<= 0.1)")


# -- 6-8. synthetic end-to-end run -----------------------------------------------

RUN_CONFIG = """\
catalog_path = corpus/catalog.json
audio_dir = corpus/audio
output_dir = out
n_mels = 32
input_frames = 32
batch_size = 8
seed = 0
"""
REPORTS = ("epoch_log.csv", "best.ckpt", "split.csv", "comparison.csv", "error_histogram.csv", "summary.json")


def run_pipeline(cfg_path):
    assert cli.main(["--config", str(cfg_path), "train"]) == 0
    assert cli.main(["--config", str(cfg_path), "evaluate"]) == 0
    out = cfg_path.parent / "out"
    return {name: (out / name).read_bytes() for name in REPORTS}


@pytest.fixture(scope="module")
def synthetic_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("e2e")
    write_corpus(root / "corpus", seed=0)  # 32 artists x 2 tracks
    cfg_path = root / "run.cfg"
    cfg_path.write_text(RUN_CONFIG)
    t0 = time.perf_counter()
    outputs = run_pipeline(cfg_path)
    return cfg_path, outputs, time.perf_counter() - t0


def epoch_log(outputs):
    lines = outputs["epoch_log.csv"].decode().splitlines()[1:]
    return [tuple(float(v) for v in line.split(",")) for line in lines]


def test_end_to_end_learnability(synthetic_run):
    _, outputs, seconds = synthetic_run
    summary = json.loads(outputs["summary.json"])
    epochs = len(epoch_log(outputs))
    r = summary["pearson"]
    ok = r is not None and r > 0.8 and epochs <= 25 and seconds < 600
    record("end-to-end learnability", ok,
           f"held-out Pearson {r if r is None else round(r, 4)} (> 0.8) on {summary['n_tracks']} tracks after {epochs} epochs (<= 25), "
           f"{seconds:.1f} s")


def test_determinism(synthetic_run):
    cfg_path, first, _ = synthetic_run
    second = run_pipeline(cfg_path)
    differing = [n for n in REPORTS if first[n] != second[n]]
    record("determinism", not differing,
           f"{len(REPORTS) - len(differing)}/{len(REPORTS)} artifacts bitwise identical across two seeded runs"
           + (f"; differing: {differing}" if differing else ""))


def test_training_curve_shape(synthetic_run):
    log = epoch_log(synthetic_run[1])
    if len(log) < 10:
        record("training-curve shape", False, f"run stopped after {len(log)} epochs, before epoch 10")
    mae1, mae10 = log[0][3], log[9][3]
    record("training-curve shape", mae10 < mae1, f"val MAE epoch 10 = {mae10:.3f} < epoch 1 = {mae1:.3f}")
