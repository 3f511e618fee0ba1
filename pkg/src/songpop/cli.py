"""Command-line entry point: ingest, train, evaluate, analyze, predict."""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import evaluation as ev
from .config import RunConfig, dump_config, load_config
from .dataset import (
    FeatureScaler,
    TrackRecord,
    clean_records,
    fit_scaler,
    load_catalog_json,
    load_tracks_csv,
    split_by_artist,
    to_track_records,
    write_tracks_csv,
)
from .errors import ConfigError, InvalidInputError, SongPopError
from .features import SpectrogramExtractor, build_feature_set
from .nn import checkpoint, init_parameters
from .spectrogram import SpectrogramConfig
from .synthetic import DEFAULT_ARTISTS, DEFAULT_TRACKS_PER_ARTIST, write_corpus
from .training import TARGET_SCALE, predict, train, write_epoch_log

log = logging.getLogger("songpop")

CHECKPOINT_NAME = "best.ckpt"


def ingest_catalog(catalog_path):
    raw = load_catalog_json(catalog_path)
    return to_track_records(clean_records(raw))


def cmd_ingest(catalog_path, out_csv) -> dict:
    records, dropped = ingest_catalog(catalog_path)
    Path(out_csv).parent.mkdir(parents=True, exist_ok=True)
    write_tracks_csv(out_csv, records)
    summary = {"artists": len({r.artist_id for r in records}), "tracks": len(records),
               "dropped_incomplete": dropped}
    print(f"artists={summary['artists']} tracks={summary['tracks']} "
          f"dropped_incomplete={summary['dropped_incomplete']} -> {out_csv}")
    return summary


def load_records(cfg: RunConfig) -> list:
    if cfg.tracks_csv:
        return load_tracks_csv(cfg.tracks_csv)
    if cfg.catalog_path:
        records, dropped = ingest_catalog(cfg.catalog_path)
        if dropped:
            log.info("dropped %d incomplete track(s) from the catalog", dropped)
        return records
    raise ConfigError("config needs 'tracks_csv' or 'catalog_path'")


def _input_keys(cfg: RunConfig) -> tuple:
    keys = ("tracks_csv",) if cfg.tracks_csv else ("catalog_path",)
    return keys + (("audio_dir",) if cfg.audio_dir else ())


def _splits(cfg: RunConfig, records):
    split = split_by_artist(records, cfg.train_fraction, cfg.seed)
    train_recs, val_recs = split.train, split.test
    if cfg.val_fraction > 0:
        inner = split_by_artist(split.train, 1.0 - cfg.val_fraction, cfg.seed + 1)
        train_recs, val_recs = inner.train, inner.test
    return split, train_recs, val_recs


def _extractor(cfg: RunConfig) -> SpectrogramExtractor:
    return SpectrogramExtractor(cfg.spectrogram_config(), cfg.sample_rate, cfg.input_frames,
                                cfg.audio_dir, cfg.cache_dir)


def _write_echo(cfg: RunConfig, out: Path) -> None:
    (out / "config_echo.txt").write_text(dump_config(cfg))


def _checkpoint_extras(cfg: RunConfig, scaler: FeatureScaler) -> dict:
    return {
        "scaler": scaler.to_dict(),
        "spectrogram": vars(cfg.spectrogram_config()).copy(),
        "sample_rate": cfg.sample_rate,
        "input_frames": cfg.input_frames,
    }


def cmd_train(cfg: RunConfig) -> dict:
    cfg.validate(need=_input_keys(cfg))
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_echo(cfg, out)

    records = load_records(cfg)
    split, train_recs, val_recs = _splits(cfg, records)
    log.info("split: %d train / %d test tracks (train fraction %.3f)",
             len(split.train), len(split.test), split.train_fraction)
    with open(out / "split.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("track_id", "artist_id", "side"))
        for side, recs in (("train", split.train), ("test", split.test)):
            for r in recs:
                w.writerow((r.track_id, r.artist_id, side))

    scaler = fit_scaler(train_recs, cfg.feature_names())
    extractor = _extractor(cfg)
    train_set = build_feature_set(train_recs, scaler, extractor, cfg.workers)
    val_set = build_feature_set(val_recs, scaler, extractor, cfg.workers)

    net = init_parameters(cfg.net_config(), cfg.seed)
    extras = _checkpoint_extras(cfg, scaler)
    ckpt_path = out / CHECKPOINT_NAME

    def save_best(best_net, epoch):
        checkpoint.save(ckpt_path, best_net, cfg.seed, epoch, extras)

    result = train(net, train_set, val_set, cfg.training_config(), on_improve=save_best)
    write_epoch_log(out / "epoch_log.csv", result.logs, timing_path=out / "epoch_times.csv")
    print(f"trained {len(result.logs)} epoch(s); best epoch {result.best_epoch} "
          f"val_loss {result.best_loss:.6f}; checkpoint {ckpt_path}")
    return {"best_epoch": result.best_epoch, "best_loss": result.best_loss,
            "epochs": len(result.logs), "stopped_early": result.stopped_early}


def _load_checkpoint(path, cfg: RunConfig | None = None):
    net, header = checkpoint.load(path, cfg.net_config() if cfg is not None else None)
    scaler = FeatureScaler.from_dict(header["extras"]["scaler"])
    if cfg is not None and tuple(scaler.names) != cfg.feature_names():
        raise ConfigError("checkpoint feature list does not match use_artist_features")
    return net, header, scaler


def cmd_evaluate(cfg: RunConfig, checkpoint_path=None) -> ev.EvaluationReport:
    cfg.validate(need=_input_keys(cfg))
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    ckpt = Path(checkpoint_path) if checkpoint_path else out / CHECKPOINT_NAME
    if not ckpt.exists():
        raise ConfigError(f"checkpoint not found: {ckpt}")
    net, header, scaler = _load_checkpoint(ckpt, cfg)

    records = load_records(cfg)
    split = split_by_artist(records, cfg.train_fraction, cfg.seed)
    test_set = build_feature_set(split.test, scaler, _extractor(cfg), cfg.workers)
    preds = predict(net, test_set)
    report = ev.evaluate_predictions(split.test, preds, cfg.threshold, cfg.histogram_bins)

    ev.write_comparison_csv(out / "comparison.csv", report.rows)
    ev.write_histogram_csv(out / "error_histogram.csv", report.histogram)
    summary = report.summary()
    summary["checkpoint_epoch"] = header["epoch"]
    summary["train_fraction_achieved"] = split.train_fraction
    summary["config"] = dump_config(cfg).splitlines()
    ev.write_summary_json(out / "summary.json", summary)
    _write_echo(cfg, out)
    m = report.metrics
    fmt = lambda v: "n/a" if v is None else f"{v:.4f}"
    print(f"MAE {report.mae:.4f}  pearson {fmt(report.pearson)}  accuracy {m.accuracy:.4f}  "
          f"precision {fmt(m.precision)}  recall {fmt(m.recall)}  f1 {fmt(m.f1)}  (T={m.threshold:g})")
    return report


def cmd_analyze(cfg: RunConfig) -> tuple:
    cfg.validate(need=("tracks_csv",) if cfg.tracks_csv else ("catalog_path",))
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = load_records(cfg)
    table = ev.correlation_report(records, cfg.feature_names())
    grid = ev.monthly_popularity_heatmap(records)
    ev.write_correlation_csv(out / "correlation.csv", table)
    ev.write_heatmap_csv(out / "heatmap.csv", grid)
    if table.warnings:
        (out / "correlation_warnings.txt").write_text("\n".join(table.warnings) + "\n")
    _write_echo(cfg, out)
    for name, r in table.rows:
        print(f"{name:>18s} {r:+.5f}")
    return table, grid


def parse_meta(text: str, names) -> np.ndarray:
    values = {}
    for item in text.split(","):
        if not item.strip():
            continue
        if "=" not in item:
            raise InvalidInputError(f"metadata item {item!r} is not key=value")
        k, v = (s.strip() for s in item.split("=", 1))
        values[k] = float(v)
    missing = [n for n in names if n not in values]
    if missing:
        raise InvalidInputError(f"metadata is missing {missing}")
    return np.array([values[n] for n in names])


def cmd_predict(checkpoint_path, audio_path, meta_row: str) -> float:
    net, header, scaler = _load_checkpoint(checkpoint_path)
    extras = header["extras"]
    spec_cfg = SpectrogramConfig(**extras["spectrogram"])
    extractor = SpectrogramExtractor(spec_cfg, extras["sample_rate"], extras["input_frames"])
    spec = extractor.from_file(audio_path)
    meta = scaler.transform(parse_meta(meta_row, scaler.names))
    raw = net.predict(spec, meta) * TARGET_SCALE
    value = min(100.0, max(0.0, raw))
    print(round(value, 4))
    return value


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="songpop", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value run config")
    common.add_argument("--seed", type=int, help="overrides the config seed")
    common.add_argument("--out", help="overrides the config output_dir")
    common.add_argument("-v", "--verbose", action="store_true")
    for a in common._actions:
        a.default = argparse.SUPPRESS
    parser.add_argument("--config")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="catalog JSON -> tracks CSV")
    p.add_argument("catalog", nargs="?", help="catalog fixture (default: config catalog_path)")
    p.add_argument("--csv", dest="out_csv", help="output CSV (default: <out>/tracks.csv)")

    sub.add_parser("train", parents=[common], help="train and checkpoint the best epoch")

    p = sub.add_parser("evaluate", parents=[common], help="score the held-out artists")
    p.add_argument("--checkpoint", help=f"default: <out>/{CHECKPOINT_NAME}")
    p.add_argument("--threshold", type=float, help="popularity cut for the classification metrics")

    sub.add_parser("analyze", parents=[common], help="feature correlations and release heatmap")

    p = sub.add_parser("predict", parents=[common], help="predict one track's popularity")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--audio", required=True)
    p.add_argument("--meta", required=True, help="comma separated feature=value pairs")

    p = sub.add_parser("synth", parents=[common], help="write a synthetic demo corpus")
    p.add_argument("dest")
    p.add_argument("--artists", type=int, default=DEFAULT_ARTISTS)
    p.add_argument("--tracks-per-artist", type=int, default=DEFAULT_TRACKS_PER_ARTIST)
    return parser


def _run_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    if args.out is not None:
        cfg = cfg.replace(output_dir=str(Path(args.out).resolve()))
    return cfg


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "predict":
            cmd_predict(args.checkpoint, args.audio, args.meta)
            return 0
        if args.command == "synth":
            path = write_corpus(args.dest, args.artists, args.tracks_per_artist,
                                seed=args.seed or 0)
            print(path)
            return 0
        cfg = _run_config(args)
        if args.command == "ingest":
            catalog = args.catalog or cfg.catalog_path
            if catalog is None:
                raise ConfigError("ingest needs a catalog path (argument or config catalog_path)")
            cmd_ingest(catalog, args.out_csv or Path(cfg.output_dir) / "tracks.csv")
        elif args.command == "train":
            cmd_train(cfg)
        elif args.command == "evaluate":
            if args.threshold is not None:
                cfg = cfg.replace(threshold=args.threshold)
            cmd_evaluate(cfg, args.checkpoint)
        elif args.command == "analyze":
            cmd_analyze(cfg)
    except ConfigError as e:
        print(f"songpop {args.command}: configuration error: {e}", file=sys.stderr)
        return 2
    except (SongPopError, OSError) as e:
        print(f"songpop {args.command}: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
