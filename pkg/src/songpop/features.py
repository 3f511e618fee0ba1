"""Turn track records into network inputs, caching spectrograms on disk."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Sequence

import numpy as np

from .audio_io import load_clip
from .dataset import FeatureScaler, TrackRecord, apply_scaler
from .spectrogram import SpectrogramConfig, load_features, mel_filterbank, mel_spectrogram, save_features
from .training import FeatureSet

log = logging.getLogger(__name__)


def network_input(db: np.ndarray, floor_db: float) -> np.ndarray:
    """Map a max-normalized dB grid from [floor_db, 0] onto [0, 1].

    The floor lands on 0 so the convolutions' zero padding reads as silence.
    """
    return 1.0 - db / floor_db


class SpectrogramExtractor:
    """Computes (or reads back) the fixed-size network input for a track.

    Grids are cached as float32 dB and always handed out float32-rounded, so
    a cache hit and a fresh computation give the network identical input.
    """

    def __init__(self, spec_cfg: SpectrogramConfig, sample_rate: int, n_frames: int,
                 audio_dir=None, cache_dir=None):
        self.spec_cfg = spec_cfg
        self.sample_rate = sample_rate
        self.n_frames = n_frames
        self.n_samples = spec_cfg.samples_for_frames(n_frames)
        self.audio_dir = Path(audio_dir) if audio_dir else None
        self.cache_dir = Path(cache_dir) if cache_dir else None
        self.filterbank = mel_filterbank(spec_cfg, sample_rate)
        self.digest = spec_cfg.digest(sample_rate) + f"-{n_frames}"

    def audio_file(self, audio_path: str) -> Path:
        p = Path(audio_path)
        if not p.is_absolute() and self.audio_dir is not None:
            p = self.audio_dir / p
        return p

    def _cache_file(self, track_id: str):
        if self.cache_dir is None:
            return None
        safe = "".join(c if c.isalnum() or c in "-_." else "_" for c in track_id)
        return self.cache_dir / self.digest / f"{safe}.mel"

    def from_file(self, path, source_id: str = "") -> np.ndarray:
        clip = load_clip(path, self.sample_rate, self.n_samples)
        mel = mel_spectrogram(clip, self.spec_cfg, self.filterbank)
        return self._prepare(mel.values)

    def _prepare(self, db):
        return network_input(db.astype(np.float32).astype(np.float64), self.spec_cfg.floor_db)

    def __call__(self, record: TrackRecord) -> np.ndarray:
        cached = self._cache_file(record.track_id)
        if cached is not None and cached.exists():
            return self._prepare(load_features(cached).values)
        clip = load_clip(self.audio_file(record.audio_path), self.sample_rate, self.n_samples)
        mel = mel_spectrogram(clip, self.spec_cfg, self.filterbank)
        mel.source_id = record.track_id
        if cached is not None:
            cached.parent.mkdir(parents=True, exist_ok=True)
            save_features(cached, mel)
        return self._prepare(mel.values)


def build_feature_set(records: Sequence[TrackRecord], scaler: FeatureScaler,
                      extractor: SpectrogramExtractor, workers: int = 1) -> FeatureSet:
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            specs = list(pool.map(extractor, records))
    else:
        specs = [extractor(r) for r in records]
    n_mels = extractor.spec_cfg.n_mels
    spec_arr = np.stack(specs) if specs else np.zeros((0, n_mels, extractor.n_frames))
    meta = (np.stack([apply_scaler(scaler, r) for r in records]) if records
            else np.zeros((0, len(scaler.names))))
    pop = np.array([r.popularity for r in records], dtype=np.float64)
    return FeatureSet([r.track_id for r in records], spec_arr, meta, pop)
