"""Binary checkpoint format.

Layout: 8-byte magic, uint32 format version, uint32 header length, a UTF-8
JSON header (net config, seed, epoch, parameter names and shapes, extras),
then each parameter as little-endian float64 in declaration order.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import CheckpointVersionError
from .model import NetConfig, PopularityNet

MAGIC = b"SONGPOP\x00"
FORMAT_VERSION = 1


def dumps(net: PopularityNet, seed: int, epoch: int, extras: dict | None = None) -> bytes:
    header = {
        "format_version": FORMAT_VERSION,
        "net_config": net.config.to_dict(),
        "seed": int(seed),
        "epoch": int(epoch),
        "params": [[name, list(arr.shape)] for name, arr in net.params.items()],
        "extras": extras or {},
    }
    hbytes = json.dumps(header, sort_keys=True).encode()
    blocks = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in net.params.values())
    return MAGIC + struct.pack("<II", FORMAT_VERSION, len(hbytes)) + hbytes + blocks


def loads(data: bytes, expect_config: NetConfig | None = None):
    """Inverse of :func:`dumps`; returns ``(net, header)``."""
    if data[:8] != MAGIC:
        raise CheckpointVersionError("not a songpop checkpoint")
    version, hlen = struct.unpack_from("<II", data, 8)
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(f"checkpoint format {version}, expected {FORMAT_VERSION}")
    header = json.loads(data[16 : 16 + hlen])
    cfg = NetConfig.from_dict(header["net_config"])
    if expect_config is not None and cfg != expect_config:
        raise CheckpointVersionError(f"checkpoint was built for {cfg}, config asks for {expect_config}")
    off = 16 + hlen
    params = {}
    for name, shape in header["params"]:
        count = int(np.prod(shape))
        params[name] = np.frombuffer(data, dtype="<f8", count=count, offset=off).reshape(shape).copy()
        off += 8 * count
    if off != len(data):
        raise CheckpointVersionError(f"checkpoint has {len(data) - off} trailing bytes")
    return PopularityNet(cfg, params), header


def save(path, net, seed, epoch, extras=None) -> None:
    Path(path).write_bytes(dumps(net, seed, epoch, extras))


def load(path, expect_config=None):
    return loads(Path(path).read_bytes(), expect_config)
