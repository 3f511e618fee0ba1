"""Catalog ingestion, cleaning, artist-disjoint splitting, scaling and batching."""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import (
    DegenerateFeatureError,
    DuplicateTrackError,
    InvalidInputError,
    ParseError,
    SchemaError,
    SplitError,
)

log = logging.getLogger(__name__)

# Model inputs in canonical order: the catalog summary features minus the target.
MODEL_FEATURES = (
    "duration_ms",
    "acousticness",
    "danceability",
    "energy",
    "instrumentalness",
    "liveness",
    "loudness",
    "speechiness",
    "tempo",
    "time_signature",
    "valence",
    "artist_popularity",
    "artist_followers",
    "release_year",
)
ARTIST_FEATURES = ("artist_popularity", "artist_followers")
IDENTIFIERS = ("track_id", "artist_id", "audio_path")

CSV_COLUMNS = (
    "track_id",
    "artist_id",
    "popularity",
    "duration_ms",
    "acousticness",
    "danceability",
    "energy",
    "instrumentalness",
    "liveness",
    "loudness",
    "speechiness",
    "tempo",
    "time_signature",
    "valence",
    "artist_popularity",
    "artist_followers",
    "release_year",
    "release_month",
    "audio_path",
)
_TEXT_COLUMNS = frozenset(IDENTIFIERS)
_INT_COLUMNS = frozenset({"time_signature", "release_year", "release_month"})
_UNIT_COLUMNS = ("acousticness", "danceability", "energy", "instrumentalness",
                 "liveness", "speechiness", "valence")

# Columns removed during cleaning; anything that looks like a Spotify link
# or identifier is removed as well.
DROPPED_ATTRIBUTES = frozenset({"key", "mode", "id", "uri", "href", "analysis_url",
                                "track_href", "external_urls", "preview_url", "type"})
_DROP_SUFFIXES = ("_uri", "_url", "_href", "_urls")


@dataclass(frozen=True)
class TrackRecord:
    track_id: str
    artist_id: str
    popularity: float
    duration_ms: float
    acousticness: float
    danceability: float
    energy: float
    instrumentalness: float
    liveness: float
    loudness: float
    speechiness: float
    tempo: float
    time_signature: int
    valence: float
    artist_popularity: float
    artist_followers: float
    release_year: int
    release_month: int
    audio_path: str = ""

    def __post_init__(self):
        if not self.artist_id:
            raise SchemaError(f"track {self.track_id!r}: artist_id is empty")
        for name in ("popularity", "artist_popularity"):
            v = getattr(self, name)
            if not 0 <= v <= 100:
                raise SchemaError(f"track {self.track_id!r}: {name}={v} outside [0, 100]")
        for name in _UNIT_COLUMNS:
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise SchemaError(f"track {self.track_id!r}: {name}={v} outside [0, 1]")
        if not 1 <= self.release_month <= 12:
            raise SchemaError(f"track {self.track_id!r}: release_month={self.release_month}")

    def features(self, names: Sequence[str] = MODEL_FEATURES) -> np.ndarray:
        return np.array([float(getattr(self, n)) for n in names])

    @classmethod
    def from_mapping(cls, row: Mapping) -> "TrackRecord":
        kwargs = {}
        for f in fields(cls):
            if f.name not in row:
                if f.name == "audio_path":
                    continue
                raise SchemaError(f"missing field {f.name!r}")
            v = row[f.name]
            if f.name in _TEXT_COLUMNS:
                kwargs[f.name] = str(v)
            elif f.name in _INT_COLUMNS:
                kwargs[f.name] = int(v)
            else:
                kwargs[f.name] = float(v)
        return cls(**kwargs)


def _parse_release(track: Mapping, where: str):
    if "release_year" in track and "release_month" in track:
        return track["release_year"], track["release_month"]
    if "release_date" not in track:
        raise SchemaError(f"{where}: missing field 'release_date' (or release_year/release_month)")
    date = track["release_date"]
    if date is None:
        return None, None
    parts = str(date).split("-")
    try:
        year = int(parts[0])
        # year-precision dates carry no month; January is Spotify's convention
        month = int(parts[1]) if len(parts) > 1 else 1
    except ValueError as e:
        raise SchemaError(f"{where}.release_date: cannot parse {date!r}") from e
    return year, month


_CATALOG_TRACK_FIELDS = tuple(
    c for c in CSV_COLUMNS
    if c not in ("artist_id", "artist_popularity", "artist_followers", "release_year", "release_month")
)


def load_catalog_json(path) -> list[dict]:
    """Flatten an artists -> tracks fixture into one raw dict per track.

    Artist-level fields are copied onto each track. Missing keys raise
    :class:`SchemaError` naming the JSON path; null values are kept so
    incomplete tracks can be counted and dropped downstream.
    """
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, dict) or "artists" not in doc:
        raise SchemaError(f"{path}: top-level object must have an 'artists' list")
    records = []
    seen = set()
    for ai, artist in enumerate(doc["artists"]):
        where_a = f"artists[{ai}]"
        for key in ("artist_id", "artist_popularity", "artist_followers", "tracks"):
            if key not in artist:
                raise SchemaError(f"{where_a}: missing field {key!r}")
        for ti, track in enumerate(artist["tracks"]):
            where = f"{where_a}.tracks[{ti}]"
            for key in _CATALOG_TRACK_FIELDS:
                if key not in track and key != "audio_path":
                    raise SchemaError(f"{where}: missing field {key!r}")
            tid = track["track_id"]
            if tid in seen:
                raise DuplicateTrackError(f"{where}: duplicate track_id {tid!r}")
            seen.add(tid)
            year, month = _parse_release(track, where)
            rec = dict(track)
            rec.pop("release_date", None)
            rec.update(
                artist_id=artist["artist_id"],
                artist_popularity=artist["artist_popularity"],
                artist_followers=artist["artist_followers"],
                release_year=year,
                release_month=month,
            )
            rec.setdefault("audio_path", f"{tid}.wav")
            records.append(rec)
    return records


def _is_dropped(name: str) -> bool:
    return name in DROPPED_ATTRIBUTES or name.endswith(_DROP_SUFFIXES)


def clean_records(records: Iterable) -> list:
    """Remove key, mode and Spotify identifier/link attributes.

    Typed :class:`TrackRecord` values are already clean and pass through.
    """
    out = []
    for r in records:
        if isinstance(r, TrackRecord):
            out.append(r)
        else:
            out.append({k: v for k, v in r.items() if not _is_dropped(k)})
    return out


def _is_missing(v) -> bool:
    if v is None:
        return True
    if isinstance(v, str):
        return v.strip() == ""
    return isinstance(v, float) and math.isnan(v)


def to_track_records(raw: Iterable[Mapping]) -> tuple[list[TrackRecord], int]:
    """Convert cleaned raw dicts; incomplete tracks are dropped and counted."""
    kept, dropped = [], 0
    for r in raw:
        if any(_is_missing(r.get(c)) for c in CSV_COLUMNS if c != "audio_path"):
            dropped += 1
            continue
        kept.append(TrackRecord.from_mapping(r))
    return kept, dropped


def _format_cell(v) -> str:
    if isinstance(v, float) and v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v) if isinstance(v, float) else str(v)


def write_tracks_csv(path, records: Sequence[TrackRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow([_format_cell(getattr(r, c)) for c in CSV_COLUMNS])


def load_tracks_csv(path, return_dropped: bool = False):
    """Read the canonical tracks CSV.

    Rows with an empty feature cell are dropped; the count is logged and
    optionally returned as ``(records, dropped)``.
    """
    records, dropped = [], 0
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaError(f"{path}: missing header row")
        unknown = [c for c in header if c not in CSV_COLUMNS]
        if unknown:
            raise SchemaError(f"{path}: unknown column {unknown[0]!r}")
        missing = [c for c in CSV_COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing column {missing[0]!r}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            cells = dict(zip(header, row))
            if any(cells.get(c, "").strip() == "" for c in CSV_COLUMNS if c != "audio_path"):
                dropped += 1
                continue
            parsed = {}
            for c in CSV_COLUMNS:
                v = cells.get(c, "")
                if c in _TEXT_COLUMNS:
                    parsed[c] = v
                    continue
                try:
                    parsed[c] = int(float(v)) if c in _INT_COLUMNS else float(v)
                except ValueError:
                    raise ParseError(f"{path}: row {lineno}, column {c!r}: not a number: {v!r}") from None
            records.append(TrackRecord(**parsed))
    if dropped:
        log.info("%s: dropped %d incomplete row(s)", path, dropped)
    return (records, dropped) if return_dropped else records


@dataclass
class DatasetSplit:
    train: list
    test: list
    seed: int

    @property
    def train_fraction(self) -> float:
        return len(self.train) / (len(self.train) + len(self.test))


def split_by_artist(records: Sequence[TrackRecord], train_fraction: float = 0.8,
                    seed: int = 0) -> DatasetSplit:
    """Artist-disjoint train/test split.

    Artists are shuffled by ``seed`` and visited in that order; each one
    joins the train side if doing so brings the train track count closer to
    ``train_fraction`` of the total. A short local search then moves or
    swaps single artists while that still helps. Neither side is ever empty.
    """
    if not 0 < train_fraction < 1:
        raise SplitError(f"train_fraction must be in (0, 1), got {train_fraction}")
    by_artist: dict[str, list] = {}
    for r in records:
        by_artist.setdefault(r.artist_id, []).append(r)
    artists = sorted(by_artist)
    if len(artists) < 2:
        raise SplitError(f"need at least 2 distinct artists to split, got {len(artists)}")
    order = [artists[i] for i in np.random.default_rng(seed).permutation(len(artists))]
    size = {a: len(by_artist[a]) for a in artists}
    target = train_fraction * len(records)

    train_side, test_side = [order[0]], [order[-1]]
    count = size[order[0]]
    for a in order[1:-1]:
        if abs(count + size[a] - target) < abs(target - count):
            train_side.append(a)
            count += size[a]
        else:
            test_side.append(a)

    improved = True
    while improved:
        improved = False
        gap = abs(count - target)
        # (train artist or None, test artist or None); None means a one-way move
        candidates = [(a, None) for a in train_side if len(train_side) > 1]
        candidates += [(None, b) for b in test_side if len(test_side) > 1]
        candidates += [(a, b) for a in train_side for b in test_side]
        for a, b in candidates:
            delta = (size[b] if b else 0) - (size[a] if a else 0)
            if abs(count + delta - target) < gap:
                if a:
                    train_side.remove(a)
                    test_side.append(a)
                if b:
                    test_side.remove(b)
                    train_side.append(b)
                count += delta
                improved = True
                break

    train_artists = set(train_side)
    train = [r for r in records if r.artist_id in train_artists]
    test = [r for r in records if r.artist_id not in train_artists]
    return DatasetSplit(train, test, seed)


@dataclass
class FeatureScaler:
    names: tuple
    mean: np.ndarray
    std: np.ndarray

    def transform(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std

    def inverse(self, z) -> np.ndarray:
        return np.asarray(z, dtype=np.float64) * self.std + self.mean

    def to_dict(self) -> dict:
        return {"names": list(self.names), "mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d) -> "FeatureScaler":
        return cls(tuple(d["names"]), np.array(d["mean"], dtype=np.float64),
                   np.array(d["std"], dtype=np.float64))


def feature_names(use_artist_features: bool = True) -> tuple:
    if use_artist_features:
        return MODEL_FEATURES
    return tuple(n for n in MODEL_FEATURES if n not in ARTIST_FEATURES)


def fit_scaler(train: Sequence[TrackRecord], names: Sequence[str] = MODEL_FEATURES) -> FeatureScaler:
    """Per-feature z-score statistics (population std) from training rows."""
    if not train:
        raise InvalidInputError("cannot fit a scaler on zero records")
    x = np.stack([r.features(names) for r in train])
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    flat = [n for n, s in zip(names, std) if not s > 0]
    if flat:
        raise DegenerateFeatureError(f"feature {flat[0]!r} is constant on the training rows")
    return FeatureScaler(tuple(names), mean, std)


def apply_scaler(scaler: FeatureScaler, record: TrackRecord) -> np.ndarray:
    return scaler.transform(record.features(scaler.names))


def batch_iter(items: Sequence, batch_size: int = 32, seed: int = 0, shuffle: bool = True,
               epoch: int = 0) -> Iterator[list]:
    """Yield consecutive batches; the final partial batch is kept.

    With ``shuffle`` the order is a permutation drawn from ``(seed, epoch)``.
    """
    if batch_size < 1:
        raise InvalidInputError(f"batch_size must be >= 1, got {batch_size}")
    n = len(items)
    order = np.random.default_rng([seed, epoch]).permutation(n) if shuffle else np.arange(n)
    for start in range(0, n, batch_size):
        yield [items[i] for i in order[start : start + batch_size]]


def records_to_dicts(records: Sequence[TrackRecord]) -> list[dict]:
    return [asdict(r) for r in records]
