import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from songpop.audio_io import AudioClip, decode_wav, encode_wav, fit_length, resample
from songpop.errors import EmptyAudioError, UnsupportedEncodingError, WavFormatError


def pcm16_wav(frames, channels=1, rate=8000):
    """Hand-built WAV from raw int16 values, independent of encode_wav."""
    pcm = struct.pack(f"<{len(frames)}h", *frames)
    fmt = struct.pack("<HHIIHH", 1, channels, rate, rate * 2 * channels, 2 * channels, 16)
    body = b"WAVE" + b"fmt " + struct.pack("<I", 16) + fmt + b"data" + struct.pack("<I", len(pcm)) + pcm
    return b"RIFF" + struct.pack("<I", len(body)) + body


def test_decode_16bit_scaling():
    clip = decode_wav(pcm16_wav([0, 16384, -16384, 32767]))
    np.testing.assert_array_equal(clip.samples[:3], [0.0, 0.5, -0.5])
    assert clip.samples[3] == pytest.approx(32767 / 32768)
    assert clip.sample_rate == 8000


def test_stereo_downmix_is_mean():
    clip = decode_wav(pcm16_wav([16384, -16384, 8192, 0], channels=2))
    np.testing.assert_array_equal(clip.samples, [0.0, 0.125])


def test_sine_roundtrip_within_one_quantization_step():
    rate = 44100
    t = np.arange(rate) / rate
    x = np.sin(2 * np.pi * 440 * t)
    clip = decode_wav(encode_wav(x, rate))
    assert len(clip) == rate
    assert np.max(np.abs(clip.samples - x)) < 1 / 32768


def test_24bit_roundtrip():
    rng = np.random.default_rng(0)
    x = rng.uniform(-1, 1, 1001)
    clip = decode_wav(encode_wav(x, 22050, bits=24))
    assert np.max(np.abs(clip.samples - x)) <= 0.5 / 2**23 + 1e-15


def test_decode_encode_decode_idempotent():
    rng = np.random.default_rng(1)
    first = decode_wav(encode_wav(rng.uniform(-1, 1, 500), 16000))
    second = decode_wav(encode_wav(first.samples, 16000))
    np.testing.assert_array_equal(first.samples, second.samples)


def test_skips_unknown_chunks():
    wav = pcm16_wav([100, 200])
    extra = b"LIST" + struct.pack("<I", 3) + b"abc\x00"
    patched = wav[:12] + extra + wav[12:]
    patched = patched[:4] + struct.pack("<I", len(patched) - 8) + patched[8:]
    np.testing.assert_array_equal(decode_wav(patched).samples, [100 / 32768, 200 / 32768])


def test_decode_errors():
    with pytest.raises(WavFormatError):
        decode_wav(b"not a wav file at all")
    float_wav = bytearray(pcm16_wav([0, 1]))
    float_wav[20:22] = struct.pack("<H", 3)
    with pytest.raises(UnsupportedEncodingError):
        decode_wav(bytes(float_wav))
    with pytest.raises(EmptyAudioError):
        decode_wav(pcm16_wav([]))


def test_resample_identity_is_bitwise():
    clip = AudioClip(np.random.default_rng(2).uniform(-1, 1, 300), 44100)
    out = resample(clip, 44100)
    assert out.samples.tobytes() == clip.samples.tobytes()


def test_resample_downsample_by_hand():
    out = resample(AudioClip(np.array([0.0, 1.0, 2.0, 3.0]), 4), 2)
    np.testing.assert_array_equal(out.samples, [0.0, 2.0])
    assert out.sample_rate == 2


@given(st.integers(1, 400), st.sampled_from([8000, 11025, 16000, 22050, 44100, 48000]),
       st.sampled_from([8000, 16000, 44100, 48000]))
@settings(max_examples=50, deadline=None)
def test_resample_constant_roundtrip(n, rate, target):
    clip = AudioClip(np.full(n, 0.7), rate)
    there = resample(clip, target)
    assert np.all(there.samples == 0.7)
    back = resample(there, rate)
    assert np.all(back.samples == 0.7)
    assert len(there) == max(1, int(np.floor(n * target / rate + 0.5)))


def test_fit_length_examples():
    c = AudioClip(np.arange(10, dtype=float), 10)
    assert fit_length(c, 10) is c
    np.testing.assert_array_equal(fit_length(AudioClip(np.array([1.0, 2, 3, 4]), 1), 2).samples, [2, 3])
    np.testing.assert_array_equal(fit_length(AudioClip(np.array([1.0, 2]), 1), 5).samples, [0, 1, 2, 0, 0])


@given(st.integers(1, 300), st.integers(1, 300))
def test_fit_length_property(n, target):
    out = fit_length(AudioClip(np.ones(n), 100), target)
    assert len(out) == target
    assert out.samples.sum() == min(n, target)
