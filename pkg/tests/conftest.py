import json

import numpy as np
import pytest

from songpop.dataset import TrackRecord

# "Castle" by Halsey, the worked example of per-track audio features.
CASTLE = {
    "acousticness": 0.25,
    "danceability": 0.626,
    "duration_ms": 277623,
    "energy": 0.571,
    "instrumentalness": 0.0,
    "key": 7,
    "liveness": 0.0946,
    "loudness": -7.461,
    "mode": 0,
    "speechiness": 0.0327,
    "tempo": 129.959,
    "time_signature": 4,
    "valence": 0.164,
}


def make_record(i=0, artist="a0", **overrides) -> TrackRecord:
    rng = np.random.default_rng(i)
    fields = dict(
        track_id=f"t{i}",
        artist_id=artist,
        popularity=float(rng.integers(20, 100)),
        duration_ms=float(rng.integers(100_000, 300_000)),
        acousticness=float(rng.uniform()),
        danceability=float(rng.uniform()),
        energy=float(rng.uniform()),
        instrumentalness=float(rng.uniform(0, 0.1)),
        liveness=float(rng.uniform()),
        loudness=float(rng.uniform(-20, -1)),
        speechiness=float(rng.uniform(0, 0.5)),
        tempo=float(rng.uniform(60, 200)),
        time_signature=int(rng.choice([3, 4, 5])),
        valence=float(rng.uniform()),
        artist_popularity=float(rng.integers(60, 100)),
        artist_followers=float(rng.integers(10_000, 10_000_000)),
        release_year=int(rng.integers(1990, 2024)),
        release_month=int(rng.integers(1, 13)),
        audio_path=f"t{i}.wav",
    )
    fields.update(overrides)
    return TrackRecord(**fields)


def catalog_track(tid, rng, **overrides):
    t = {
        "track_id": tid,
        "name": f"song {tid}",
        "popularity": int(rng.integers(20, 100)),
        **{k: v for k, v in CASTLE.items()},
        "danceability": round(float(rng.uniform()), 3),
        "uri": f"spotify:track:{tid}",
        "analysis_url": f"https://api.example/audio-analysis/{tid}",
        "release_date": f"{int(rng.integers(1990, 2024))}-{int(rng.integers(1, 13)):02d}-01",
    }
    t.update(overrides)
    return t


def catalog_doc(n_artists, tracks_per_artist, seed=0):
    rng = np.random.default_rng(seed)
    return {
        "artists": [
            {
                "artist_id": f"ar{a}",
                "name": f"Artist {a}",
                "artist_popularity": int(rng.integers(69, 100)),
                "artist_followers": int(rng.integers(500_000, 100_000_000)),
                "tracks": [catalog_track(f"ar{a}-{k}", rng) for k in range(tracks_per_artist)],
            }
            for a in range(n_artists)
        ]
    }


@pytest.fixture
def write_catalog(tmp_path):
    def _write(doc, name="catalog.json"):
        path = tmp_path / name
        path.write_text(json.dumps(doc))
        return path

    return _write


# One line per acceptance criterion, printed after the run.
ACCEPTANCE_RESULTS: list = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(line)
