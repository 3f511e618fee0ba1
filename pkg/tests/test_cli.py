import csv

import numpy as np
import pytest

from conftest import catalog_doc, make_record
from songpop import cli
from songpop.audio_io import write_wav
from songpop.config import RunConfig, dump_config, load_config
from songpop.dataset import fit_scaler, write_tracks_csv
from songpop.nn import checkpoint, zero_network
from songpop.synthetic import write_corpus

TINY = """\
catalog_path = corpus/catalog.json
audio_dir = corpus/audio
output_dir = out
sample_rate = 8000
n_fft = 256
hop = 128
n_mels = 16
input_frames = 16
conv_filters = 2,2,2,2
meta_hidden = 8
head_hidden = 8
batch_size = 4
max_epochs = 3
seed = 5
"""


@pytest.fixture
def tiny_run(tmp_path):
    write_corpus(tmp_path / "corpus", n_artists=6, tracks_per_artist=2, seed=1, sample_rate=8000)
    cfg_path = tmp_path / "run.cfg"
    cfg_path.write_text(TINY)
    return cfg_path


def read(path):
    return path.read_bytes()


# -- ingest ----------------------------------------------------------------------

def test_ingest_counts_and_rerun(write_catalog, tmp_path, capsys):
    catalog = write_catalog(catalog_doc(2, 20))
    assert cli.main(["ingest", str(catalog), "--csv", str(tmp_path / "a.csv")]) == 0
    assert "artists=2 tracks=40 dropped_incomplete=0" in capsys.readouterr().out
    with open(tmp_path / "a.csv") as fh:
        assert len(list(csv.reader(fh))) == 41
    cli.main(["ingest", str(catalog), "--csv", str(tmp_path / "b.csv")])
    assert read(tmp_path / "a.csv") == read(tmp_path / "b.csv")


def test_ingest_schema_error_exit(write_catalog, tmp_path, capsys):
    doc = catalog_doc(1, 2)
    del doc["artists"][0]["tracks"][1]["energy"]
    rc = cli.main(["ingest", str(write_catalog(doc)), "--csv", str(tmp_path / "x.csv")])
    assert rc == 1
    assert "tracks[1]" in capsys.readouterr().err


def test_ingest_does_not_touch_input(write_catalog, tmp_path):
    catalog = write_catalog(catalog_doc(2, 3))
    before = read(catalog)
    cli.main(["ingest", str(catalog), "--csv", str(tmp_path / "x.csv")])
    assert read(catalog) == before


# -- config ----------------------------------------------------------------------

def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("seed = 1\nlearning_rat = 0.1\n")
    assert cli.main(["--config", str(cfg), "train"]) == 2
    assert "learning_rat" in capsys.readouterr().err


def test_config_echo_roundtrip(tmp_path):
    cfg = RunConfig(catalog_path=str(tmp_path / "c.json"), output_dir=str(tmp_path / "o"),
                    conv_filters=(4, 8), f_max=4000.0, use_artist_features=False, seed=9)
    (tmp_path / "echo.cfg").write_text(dump_config(cfg))
    assert load_config(tmp_path / "echo.cfg") == cfg


def test_missing_input_is_config_error(tmp_path):
    cfg = tmp_path / "r.cfg"
    cfg.write_text("catalog_path = nowhere.json\n")
    assert cli.main(["--config", str(cfg), "train"]) == 2


# -- predict ---------------------------------------------------------------------

def test_predict_zero_checkpoint(tmp_path, capsys):
    cfg = RunConfig(sample_rate=8000, n_fft=256, hop=128, n_mels=16, input_frames=16,
                    conv_filters=(2, 2, 2, 2), meta_hidden=(4,), head_hidden=(4,))
    recs = [make_record(i) for i in range(10)]
    scaler = fit_scaler(recs, cfg.feature_names())
    checkpoint.save(tmp_path / "zero.ckpt", zero_network(cfg.net_config()), 0, 0,
                    cli._checkpoint_extras(cfg, scaler))
    write_wav(tmp_path / "x.wav", np.sin(np.arange(8000) * 0.3) * 0.5, 8000)
    meta = ",".join(f"{n}={getattr(recs[0], n)}" for n in cfg.feature_names())
    rc = cli.main(["predict", "--checkpoint", str(tmp_path / "zero.ckpt"),
                   "--audio", str(tmp_path / "x.wav"), "--meta", meta])
    assert rc == 0
    assert capsys.readouterr().out.strip() == "0.0"


def test_predict_missing_meta(tmp_path, capsys):
    cfg = RunConfig(n_mels=16, input_frames=16, conv_filters=(2, 2, 2, 2))
    scaler = fit_scaler([make_record(i) for i in range(5)], cfg.feature_names())
    checkpoint.save(tmp_path / "z.ckpt", zero_network(cfg.net_config()), 0, 0,
                    cli._checkpoint_extras(cfg, scaler))
    write_wav(tmp_path / "x.wav", np.zeros(44100), 44100)
    rc = cli.main(["predict", "--checkpoint", str(tmp_path / "z.ckpt"),
                   "--audio", str(tmp_path / "x.wav"), "--meta", "tempo=120"])
    assert rc == 1 and "missing" in capsys.readouterr().err


# -- train / evaluate / analyze --------------------------------------------------

def test_train_evaluate_outputs(tiny_run, capsys):
    out = tiny_run.parent / "out"
    assert cli.main(["--config", str(tiny_run), "train"]) == 0
    assert cli.main(["--config", str(tiny_run), "evaluate", "--threshold", "60"]) == 0
    for name in ("config_echo.txt", "split.csv", "best.ckpt", "epoch_log.csv", "epoch_times.csv",
                 "comparison.csv", "error_histogram.csv", "summary.json"):
        assert (out / name).exists(), name
    assert "(T=60)" in capsys.readouterr().out
    assert sorted(p.name for p in tiny_run.parent.iterdir()) == ["corpus", "out", "run.cfg"]
    assert sum(1 for _ in open(out / "epoch_log.csv")) == 4


def test_train_is_deterministic(tiny_run):
    out = tiny_run.parent / "out"
    cli.main(["--config", str(tiny_run), "train"])
    first = {n: read(out / n) for n in ("epoch_log.csv", "best.ckpt", "split.csv")}
    cli.main(["--config", str(tiny_run), "train"])
    for n, data in first.items():
        assert read(out / n) == data, n


def test_rerun_from_echo(tiny_run):
    out = tiny_run.parent / "out"
    cli.main(["--config", str(tiny_run), "train"])
    log, ckpt = read(out / "epoch_log.csv"), read(out / "best.ckpt")
    echo = tiny_run.parent / "echo.cfg"
    echo.write_text((out / "config_echo.txt").read_text())
    assert cli.main(["--config", str(echo), "train"]) == 0
    assert read(out / "epoch_log.csv") == log and read(out / "best.ckpt") == ckpt


def test_seed_flag_overrides(tiny_run):
    out = tiny_run.parent / "out"
    cli.main(["--config", str(tiny_run), "train"])
    a = read(out / "epoch_log.csv")
    cli.main(["--config", str(tiny_run), "--seed", "6", "train"])
    assert "seed = 6" in (out / "config_echo.txt").read_text()
    assert read(out / "epoch_log.csv") != a


def test_analyze_perfect_correlate(tmp_path):
    recs = [make_record(i, artist=f"a{i % 4}") for i in range(40)]
    recs = [make_record(i, artist=r.artist_id, popularity=r.artist_popularity) for i, r in enumerate(recs)]
    write_tracks_csv(tmp_path / "tracks.csv", recs)
    (tmp_path / "a.cfg").write_text("tracks_csv = tracks.csv\noutput_dir = out\n")
    assert cli.main(["--config", str(tmp_path / "a.cfg"), "analyze"]) == 0
    with open(tmp_path / "out" / "correlation.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["feature", "pearson_r"]
    assert rows[-1][0] == "artist_popularity" and float(rows[-1][1]) == pytest.approx(1.0, abs=1e-12)
    assert (tmp_path / "out" / "heatmap.csv").read_text().startswith("year,month,mean,count")


def test_evaluate_without_checkpoint(tiny_run):
    assert cli.main(["--config", str(tiny_run), "evaluate"]) == 2
