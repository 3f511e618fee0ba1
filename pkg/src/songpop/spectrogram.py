"""Log-power mel spectrogram front end (Hann-windowed STFT, HTK mel bands)."""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .audio_io import AudioClip
from .errors import DegenerateFilterbankError, InvalidInputError, TooShortError

POWER_FLOOR = 1e-10


@dataclass(frozen=True)
class SpectrogramConfig:
    n_fft: int = 2048
    hop: int = 512
    n_mels: int = 128
    f_min: float = 0.0
    f_max: Optional[float] = None  # None means Nyquist
    floor_db: float = -80.0

    def __post_init__(self):
        if self.n_fft < 2:
            raise InvalidInputError(f"n_fft must be >= 2, got {self.n_fft}")
        if not 0 < self.hop <= self.n_fft:
            raise InvalidInputError(f"hop must be in (0, n_fft], got {self.hop}")
        if self.n_mels < 2:
            raise InvalidInputError(f"n_mels must be >= 2, got {self.n_mels}")
        if self.f_min < 0 or (self.f_max is not None and self.f_max <= self.f_min):
            raise InvalidInputError(f"need 0 <= f_min < f_max, got {self.f_min}, {self.f_max}")

    def upper_hz(self, sample_rate: int) -> float:
        f_max = sample_rate / 2 if self.f_max is None else self.f_max
        if f_max > sample_rate / 2:
            raise InvalidInputError(f"f_max {f_max} exceeds Nyquist {sample_rate / 2}")
        if f_max <= self.f_min:
            raise InvalidInputError(f"f_min {self.f_min} must be below f_max {f_max}")
        return float(f_max)

    def n_frames(self, n_samples: int) -> int:
        return 1 + (n_samples - self.n_fft) // self.hop

    def samples_for_frames(self, n_frames: int) -> int:
        return self.n_fft + (n_frames - 1) * self.hop

    def digest(self, sample_rate: int) -> str:
        payload = json.dumps({**asdict(self), "sample_rate": sample_rate}, sort_keys=True)
        return hashlib.sha1(payload.encode()).hexdigest()[:16]


@dataclass
class MelSpectrogram:
    values: np.ndarray  # (n_mels, n_frames), dB relative to the clip maximum
    config: SpectrogramConfig
    source_id: str = ""

    @property
    def shape(self):
        return self.values.shape


def hann_window(n: int, periodic: bool = False) -> np.ndarray:
    """Hann window of length ``n``.

    The default is the symmetric form, zero at both endpoints. The periodic
    form drops the last point of an ``n + 1`` window; it is the one used for
    STFT frames because a constant signal then leaks nothing outside bin 0.
    """
    if n < 2:
        raise InvalidInputError(f"window length must be >= 2, got {n}")
    if periodic:
        return hann_window(n + 1)[:n]
    i = np.arange(n)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * i / (n - 1)))


def frame_signal(x: np.ndarray, n_fft: int, hop: int) -> np.ndarray:
    if len(x) < n_fft:
        raise TooShortError(f"clip has {len(x)} samples, fewer than n_fft={n_fft}")
    n_frames = 1 + (len(x) - n_fft) // hop
    windows = np.lib.stride_tricks.sliding_window_view(x, n_fft)
    return windows[: (n_frames - 1) * hop + 1 : hop]


def stft(clip: AudioClip, cfg: SpectrogramConfig) -> np.ndarray:
    """Complex STFT of shape ``(n_fft // 2 + 1, n_frames)``, no centering pad.

    Frames are multiplied by a periodic Hann window before the real FFT.
    """
    x = np.asarray(clip.samples, dtype=np.float64)
    frames = frame_signal(x, cfg.n_fft, cfg.hop) * hann_window(cfg.n_fft, periodic=True)
    return np.fft.rfft(frames, axis=1).T


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_breakpoints(cfg: SpectrogramConfig, sample_rate: int) -> np.ndarray:
    """The ``n_mels + 2`` band edges in Hz; band ``m`` peaks at entry ``m + 1``."""
    f_max = cfg.upper_hz(sample_rate)
    edges = mel_to_hz(np.linspace(hz_to_mel(cfg.f_min), hz_to_mel(f_max), cfg.n_mels + 2))
    # pin the ends so the outer filters vanish exactly at f_min / f_max
    edges[0], edges[-1] = cfg.f_min, f_max
    return edges


def mel_filterbank(cfg: SpectrogramConfig, sample_rate: int) -> np.ndarray:
    """Triangular filters, shape ``(n_mels, n_fft // 2 + 1)``."""
    edges = mel_breakpoints(cfg, sample_rate)
    freqs = np.arange(cfg.n_fft // 2 + 1) * sample_rate / cfg.n_fft
    lo, center, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs - lo) / (center - lo)
    falling = (hi - freqs) / (hi - center)
    fb = np.maximum(0.0, np.minimum(rising, falling))
    empty = np.flatnonzero(fb.max(axis=1) <= 0.0)
    if len(empty):
        raise DegenerateFilterbankError(
            f"{len(empty)} of {cfg.n_mels} mel bands cover no FFT bin "
            f"(first empty band {empty[0]}); lower n_mels or raise n_fft"
        )
    return fb


def mel_power(clip: AudioClip, cfg: SpectrogramConfig, filterbank=None) -> np.ndarray:
    spec = stft(clip, cfg)
    power = spec.real**2 + spec.imag**2
    fb = mel_filterbank(cfg, clip.sample_rate) if filterbank is None else filterbank
    return fb @ power


def power_to_db(power: np.ndarray) -> np.ndarray:
    return 10.0 * np.log10(np.maximum(power, POWER_FLOOR))


def mel_spectrogram(clip: AudioClip, cfg: SpectrogramConfig, filterbank=None) -> MelSpectrogram:
    """Max-normalized log-mel grid in dB, clamped below at ``floor_db``.

    Cells with no energy above the power floor are pinned to ``floor_db`` so
    digital silence does not normalize to 0 dB.
    """
    power = mel_power(clip, cfg, filterbank)
    db = power_to_db(power)
    db = np.maximum(db - db.max(), cfg.floor_db)
    db[power <= POWER_FLOOR] = cfg.floor_db
    return MelSpectrogram(db, cfg, clip.source_id)


_DUMP_MAGIC = b"SPMEL\x00\x01\x00"


def save_features(path, mel: MelSpectrogram) -> None:
    """Cache format: magic, (n_mels, n_frames, header_len) as uint32, JSON
    config echo, then row-major little-endian float32 cells."""
    n_mels, n_frames = mel.values.shape
    header = json.dumps({"config": asdict(mel.config), "source_id": mel.source_id},
                        sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_DUMP_MAGIC)
        fh.write(struct.pack("<III", n_mels, n_frames, len(header)))
        fh.write(header)
        fh.write(np.ascontiguousarray(mel.values, dtype="<f4").tobytes())


def load_features(path) -> MelSpectrogram:
    data = Path(path).read_bytes()
    if data[:8] != _DUMP_MAGIC:
        raise InvalidInputError(f"{path}: not a feature dump")
    n_mels, n_frames, hlen = struct.unpack_from("<III", data, 8)
    off = 8 + 12
    header = json.loads(data[off : off + hlen])
    off += hlen
    cells = np.frombuffer(data, dtype="<f4", count=n_mels * n_frames, offset=off)
    values = cells.reshape(n_mels, n_frames).astype(np.float64)
    return MelSpectrogram(values, SpectrogramConfig(**header["config"]), header["source_id"])
