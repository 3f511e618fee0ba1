"""Seeded synthetic catalog + WAV corpus for smoke runs and tests.

Popularity is an affine function of danceability and artist popularity
plus small Gaussian noise. Each track's audio is a short harmonic sine
mixture whose pitch follows danceability and whose tremolo follows tempo.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .audio_io import write_wav

# 64 tracks; two per artist leaves enough artists for a meaningful held-out side
DEFAULT_ARTISTS = 32
DEFAULT_TRACKS_PER_ARTIST = 2


def synthetic_popularity(danceability, artist_popularity, noise=0.0):
    return np.clip(5.0 + 40.0 * danceability + 0.55 * artist_popularity + noise, 0.0, 100.0)


def sine_mixture(f0: float, tempo: float, seconds: float, sample_rate: int, rng) -> np.ndarray:
    t = np.arange(int(round(seconds * sample_rate))) / sample_rate
    x = np.zeros_like(t)
    for k, amp in enumerate((0.5, 0.25, 0.12), start=1):
        x += amp * np.sin(2 * np.pi * k * f0 * t + rng.uniform(0, 2 * np.pi))
    tremolo = 0.6 + 0.4 * np.sin(2 * np.pi * (tempo / 60.0) * t)
    x *= tremolo
    x += 0.01 * rng.standard_normal(t.size)
    return np.clip(x, -1.0, 1.0)


def make_catalog(n_artists: int = DEFAULT_ARTISTS,
                 tracks_per_artist: int = DEFAULT_TRACKS_PER_ARTIST, seed: int = 0,
                 noise_std: float = 1.5) -> dict:
    rng = np.random.default_rng(seed)
    artists = []
    for a in range(n_artists):
        artist_pop = int(rng.integers(40, 96))
        tracks = []
        for k in range(tracks_per_artist):
            dance = round(float(rng.uniform(0.2, 0.95)), 3)
            pop = synthetic_popularity(dance, artist_pop, rng.normal(0.0, noise_std))
            tracks.append({
                "track_id": f"a{a:03d}t{k:02d}",
                "name": f"Track {k} by Artist {a}",
                "popularity": int(round(float(pop))),
                "duration_ms": int(rng.integers(120_000, 300_000)),
                "acousticness": round(float(rng.uniform(0, 1)), 4),
                "danceability": dance,
                "energy": round(float(rng.uniform(0.1, 1)), 3),
                "instrumentalness": round(float(rng.uniform(0, 0.2)), 5),
                "liveness": round(float(rng.uniform(0.02, 0.6)), 4),
                "loudness": round(float(rng.uniform(-14, -2)), 3),
                "speechiness": round(float(rng.uniform(0.02, 0.3)), 4),
                "tempo": round(float(rng.uniform(70, 180)), 3),
                "time_signature": int(rng.choice([3, 4, 4, 4, 5])),
                "valence": round(float(rng.uniform(0, 1)), 3),
                "key": int(rng.integers(0, 12)),
                "mode": int(rng.integers(0, 2)),
                "uri": f"spotify:track:a{a:03d}t{k:02d}",
                "release_date": f"{int(rng.integers(2000, 2024))}-{int(rng.integers(1, 13)):02d}-15",
                "audio_path": f"a{a:03d}t{k:02d}.wav",
            })
        artists.append({
            "artist_id": f"artist{a:03d}",
            "name": f"Artist {a}",
            "artist_popularity": artist_pop,
            "artist_followers": int(rng.integers(100_000, 50_000_000)),
            "tracks": tracks,
        })
    return {"artists": artists}


def write_corpus(out_dir, n_artists: int = DEFAULT_ARTISTS,
                 tracks_per_artist: int = DEFAULT_TRACKS_PER_ARTIST, seed: int = 0,
                 sample_rate: int = 44100, seconds: float = 0.5) -> Path:
    """Write ``catalog.json`` and ``audio/*.wav`` under ``out_dir``; returns the catalog path."""
    out = Path(out_dir)
    audio = out / "audio"
    audio.mkdir(parents=True, exist_ok=True)
    catalog = make_catalog(n_artists, tracks_per_artist, seed)
    rng = np.random.default_rng([seed, 1])
    for artist in catalog["artists"]:
        for tr in artist["tracks"]:
            f0 = 110.0 * 2.0 ** (3.0 * tr["danceability"])
            write_wav(audio / tr["audio_path"], sine_mixture(f0, tr["tempo"], seconds, sample_rate, rng),
                      sample_rate)
    path = out / "catalog.json"
    path.write_text(json.dumps(catalog, indent=1))
    return path
