"""WAV decoding and fixed-length mono clip preparation.

Only uncompressed little-endian integer PCM (16 or 24 bit, mono or stereo)
is accepted. Samples come back as float64 in [-1, 1].
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyAudioError, UnsupportedEncodingError, WavFormatError

DEFAULT_SAMPLE_RATE = 44100

_FORMAT_PCM = 0x0001
_FORMAT_EXTENSIBLE = 0xFFFE
_SUPPORTED_BITS = (16, 24)


@dataclass(frozen=True)
class AudioClip:
    samples: np.ndarray
    sample_rate: int
    source_id: str = ""

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


def _iter_chunks(data: bytes):
    pos = 12
    while pos + 8 <= len(data):
        chunk_id, size = struct.unpack_from("<4sI", data, pos)
        body = data[pos + 8 : pos + 8 + size]
        yield chunk_id, body
        # chunks are word aligned
        pos += 8 + size + (size & 1)


def decode_wav(data: bytes, source_id: str = "") -> AudioClip:
    """Decode a RIFF/WAVE byte string into a mono :class:`AudioClip`.

    Integer samples are divided by the type's maximum magnitude (2**15 or
    2**23) and stereo frames are averaged into one channel.
    """
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise WavFormatError("not a RIFF/WAVE container")

    fmt = None
    pcm = None
    for chunk_id, body in _iter_chunks(data):
        if chunk_id == b"fmt ":
            fmt = body
        elif chunk_id == b"data":
            pcm = body
            break
    if fmt is None or len(fmt) < 16:
        raise WavFormatError("missing or truncated 'fmt ' chunk")
    if pcm is None:
        raise WavFormatError("missing 'data' chunk")

    tag, channels, rate, _byte_rate, block_align, bits = struct.unpack_from("<HHIIHH", fmt)
    if tag == _FORMAT_EXTENSIBLE:
        if len(fmt) < 40:
            raise WavFormatError("truncated WAVE_FORMAT_EXTENSIBLE header")
        tag = struct.unpack_from("<H", fmt, 24)[0]
    if tag != _FORMAT_PCM:
        raise UnsupportedEncodingError(f"format tag {tag:#06x} is not integer PCM")
    if bits not in _SUPPORTED_BITS:
        raise UnsupportedEncodingError(f"{bits}-bit PCM is not supported")
    if channels not in (1, 2):
        raise UnsupportedEncodingError(f"{channels} channels; only mono or stereo")
    if rate == 0:
        raise WavFormatError("sample rate is zero")
    width = bits // 8
    if block_align != width * channels:
        raise WavFormatError(f"block_align {block_align} inconsistent with {channels}x{bits}-bit")

    n_frames = len(pcm) // block_align
    if n_frames == 0:
        raise EmptyAudioError("data chunk holds no frames")
    pcm = pcm[: n_frames * block_align]

    if bits == 16:
        ints = np.frombuffer(pcm, dtype="<i2").astype(np.float64)
        scale = 32768.0
    else:
        raw = np.frombuffer(pcm, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        ints = raw[:, 0] | (raw[:, 1] << 8) | (raw[:, 2] << 16)
        ints = np.where(ints >= 1 << 23, ints - (1 << 24), ints).astype(np.float64)
        scale = float(1 << 23)

    samples = ints.reshape(n_frames, channels) / scale
    mono = samples.mean(axis=1) if channels == 2 else samples[:, 0]
    return AudioClip(np.ascontiguousarray(mono), int(rate), source_id)


def encode_wav(samples, sample_rate: int, bits: int = 16) -> bytes:
    """Encode float samples in [-1, 1] as integer PCM WAV.

    ``samples`` may be 1-D (mono) or shaped (frames, 2) for stereo.
    """
    if bits not in _SUPPORTED_BITS:
        raise UnsupportedEncodingError(f"{bits}-bit PCM is not supported")
    x = np.asarray(samples, dtype=np.float64)
    channels = 1 if x.ndim == 1 else x.shape[1]
    scale = float(1 << (bits - 1))
    ints = np.clip(np.round(x * scale), -scale, scale - 1).astype(np.int32).reshape(-1)
    if bits == 16:
        pcm = ints.astype("<i2").tobytes()
    else:
        u = ints & 0xFFFFFF
        pcm = np.stack([u & 0xFF, (u >> 8) & 0xFF, (u >> 16) & 0xFF], axis=1).astype(np.uint8).tobytes()
    width = bits // 8
    fmt = struct.pack("<HHIIHH", _FORMAT_PCM, channels, sample_rate,
                      sample_rate * channels * width, channels * width, bits)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(pcm)) + pcm
    if len(pcm) & 1:
        body += b"\x00"
    return b"RIFF" + struct.pack("<I", len(body)) + body


def read_wav(path) -> AudioClip:
    path = Path(path)
    return decode_wav(path.read_bytes(), source_id=path.stem)


def write_wav(path, samples, sample_rate: int, bits: int = 16) -> None:
    Path(path).write_bytes(encode_wav(samples, sample_rate, bits))


def resample(clip: AudioClip, target_rate: int) -> AudioClip:
    """Linear-interpolation resampling.

    Output length is ``round(n * target_rate / rate)``; output sample ``j``
    sits at input position ``j * rate / target_rate``.
    """
    if target_rate <= 0:
        raise ValueError(f"target_rate must be positive, got {target_rate}")
    if target_rate == clip.sample_rate:
        return clip
    n = len(clip.samples)
    n_out = max(1, int(np.floor(n * target_rate / clip.sample_rate + 0.5)))
    positions = np.arange(n_out) * (clip.sample_rate / target_rate)
    out = np.interp(positions, np.arange(n), clip.samples)
    return AudioClip(out, int(target_rate), clip.source_id)


def fit_length(clip: AudioClip, target_samples: int) -> AudioClip:
    """Center-crop or zero-pad to exactly ``target_samples``.

    Padding is split evenly with the odd sample going to the right.
    """
    if target_samples <= 0:
        raise ValueError(f"target_samples must be positive, got {target_samples}")
    x = clip.samples
    n = len(x)
    if n == target_samples:
        return clip
    if n > target_samples:
        start = (n - target_samples) // 2
        out = x[start : start + target_samples].copy()
    else:
        left = (target_samples - n) // 2
        out = np.zeros(target_samples, dtype=np.float64)
        out[left : left + n] = x
    return AudioClip(out, clip.sample_rate, clip.source_id)


def load_clip(path, sample_rate: int, target_samples: int) -> AudioClip:
    """Read a WAV, bring it to ``sample_rate`` and trim or pad it to length."""
    clip = read_wav(path)
    return fit_length(resample(clip, sample_rate), target_samples)
