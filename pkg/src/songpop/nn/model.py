"""Spectrogram CNN fused with a metadata MLP, regressing one popularity value."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import InvalidInputError, ShapeError, StateError
from . import layers

DEFAULT_CONV_FILTERS = (16, 32, 64, 128)


@dataclass(frozen=True)
class NetConfig:
    meta_dim: int = 14
    input_mels: int = 128
    input_frames: int = 256
    conv_filters: tuple = DEFAULT_CONV_FILTERS
    meta_hidden: tuple = (32, 32)
    head_hidden: tuple = (128, 64)

    def __post_init__(self):
        object.__setattr__(self, "conv_filters", tuple(int(f) for f in self.conv_filters))
        object.__setattr__(self, "meta_hidden", tuple(int(f) for f in self.meta_hidden))
        object.__setattr__(self, "head_hidden", tuple(int(f) for f in self.head_hidden))
        n_pools = len(self.conv_filters)
        if n_pools == 0:
            raise InvalidInputError("at least one conv block is required")
        div = 2**n_pools
        if self.input_mels % div or self.input_frames % div:
            raise InvalidInputError(
                f"input dims {self.input_mels}x{self.input_frames} must be divisible by {div}"
            )
        if self.meta_dim < 1 or not self.meta_hidden:
            raise InvalidInputError("metadata branch needs meta_dim >= 1 and one hidden layer")
        if min(self.conv_filters + self.meta_hidden + self.head_hidden, default=1) < 1:
            raise InvalidInputError("layer widths must be positive")

    @property
    def flatten_width(self) -> int:
        div = 2 ** len(self.conv_filters)
        return self.conv_filters[-1] * (self.input_mels // div) * (self.input_frames // div)

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "NetConfig":
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})


def _param_shapes(cfg: NetConfig):
    shapes = []
    c_in = 1
    for i, f in enumerate(cfg.conv_filters):
        shapes += [(f"conv{i}.w", (f, c_in, 3, 3)), (f"conv{i}.b", (f,))]
        c_in = f
    d_in = cfg.meta_dim
    for i, h in enumerate(cfg.meta_hidden):
        shapes += [(f"meta{i}.w", (h, d_in)), (f"meta{i}.b", (h,))]
        d_in = h
    d_in = cfg.flatten_width + cfg.meta_hidden[-1]
    for i, h in enumerate(cfg.head_hidden + (1,)):
        shapes += [(f"head{i}.w", (h, d_in)), (f"head{i}.b", (h,))]
        d_in = h
    return shapes


@dataclass
class PopularityNet:
    config: NetConfig
    params: dict  # name -> array, in declaration order
    grads: dict = field(default_factory=dict)
    _cache: object = field(default=None, repr=False)

    def copy(self) -> "PopularityNet":
        return PopularityNet(self.config, {k: v.copy() for k, v in self.params.items()})

    def forward(self, specs, meta) -> np.ndarray:
        """Batched forward pass.

        ``specs`` is (N, H, W) or (N, 1, H, W) in dB; ``meta`` is (N, meta_dim).
        Returns N predictions in normalized target units (popularity / 100).
        The layer caches are kept for :meth:`backward`.
        """
        cfg, p = self.config, self.params
        x = np.asarray(specs, dtype=np.float64)
        if x.ndim == 3:
            x = x[:, None]
        meta = np.asarray(meta, dtype=np.float64)
        if meta.ndim == 1:
            meta = meta[None]
        if x.ndim != 4 or x.shape[1:] != (1, cfg.input_mels, cfg.input_frames):
            raise ShapeError(
                f"spectrogram batch shape {x.shape} does not match "
                f"(N, 1, {cfg.input_mels}, {cfg.input_frames})"
            )
        if meta.shape != (x.shape[0], cfg.meta_dim):
            raise ShapeError(f"metadata shape {meta.shape} != ({x.shape[0]}, {cfg.meta_dim})")

        conv_caches = []
        for i in range(len(cfg.conv_filters)):
            x, cc = layers.conv2d_forward(x, p[f"conv{i}.w"], p[f"conv{i}.b"])
            x, rc = layers.relu_forward(x)
            x, pc = layers.maxpool2_forward(x)
            conv_caches.append((cc, rc, pc))
        conv_shape = x.shape
        audio = x.reshape(x.shape[0], -1)

        m = meta
        meta_caches = []
        for i in range(len(cfg.meta_hidden)):
            m, dc = layers.dense_forward(m, p[f"meta{i}.w"], p[f"meta{i}.b"])
            m, rc = layers.relu_forward(m)
            meta_caches.append((dc, rc))

        h = layers.concat_features(audio, m)
        head_caches = []
        n_head = len(cfg.head_hidden) + 1
        for i in range(n_head):
            h, dc = layers.dense_forward(h, p[f"head{i}.w"], p[f"head{i}.b"])
            rc = None
            if i < n_head - 1:
                h, rc = layers.relu_forward(h)
            head_caches.append((dc, rc))

        self._cache = (conv_caches, conv_shape, audio.shape[1], meta_caches, head_caches)
        return h[:, 0]

    def predict(self, spec, meta) -> float:
        """Single-example prediction in normalized units."""
        spec = np.asarray(spec, dtype=np.float64)
        if spec.ndim == 3:
            spec = spec[0]
        out = self.forward(spec[None], np.asarray(meta, dtype=np.float64)[None])
        self._cache = None
        return float(out[0])

    def backward(self, dpreds) -> dict:
        """Backpropagate d(loss)/d(predictions) through the last forward pass.

        Fills and returns ``self.grads``, keyed like ``self.params``.
        """
        if self._cache is None:
            raise StateError("backward called without a preceding forward pass")
        conv_caches, conv_shape, audio_width, meta_caches, head_caches = self._cache
        self._cache = None
        cfg = self.config
        grads = {}

        dh = np.asarray(dpreds, dtype=np.float64).reshape(-1, 1)
        for i in reversed(range(len(head_caches))):
            dc, rc = head_caches[i]
            if rc is not None:
                dh = layers.relu_backward(dh, rc)
            dh, grads[f"head{i}.w"], grads[f"head{i}.b"] = layers.dense_backward(dh, dc)

        daudio, dm = layers.concat_backward(dh, audio_width)
        for i in reversed(range(len(meta_caches))):
            dc, rc = meta_caches[i]
            dm = layers.relu_backward(dm, rc)
            dm, grads[f"meta{i}.w"], grads[f"meta{i}.b"] = layers.dense_backward(dm, dc)

        dx = daudio.reshape(conv_shape)
        for i in reversed(range(len(cfg.conv_filters))):
            cc, rc, pc = conv_caches[i]
            dx = layers.maxpool2_backward(dx, pc)
            dx = layers.relu_backward(dx, rc)
            dx, grads[f"conv{i}.w"], grads[f"conv{i}.b"] = layers.conv2d_backward(dx, cc)

        self.grads = {k: grads[k] for k in self.params}
        return self.grads


def init_parameters(cfg: NetConfig, seed: int) -> PopularityNet:
    """He-uniform weights (limit sqrt(6 / fan_in)), zero biases."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in _param_shapes(cfg):
        if name.endswith(".b"):
            params[name] = np.zeros(shape)
        else:
            fan_in = int(np.prod(shape[1:]))
            limit = np.sqrt(6.0 / fan_in)
            params[name] = rng.uniform(-limit, limit, size=shape)
    return PopularityNet(cfg, params)


def zero_network(cfg: NetConfig) -> PopularityNet:
    return PopularityNet(cfg, {name: np.zeros(shape) for name, shape in _param_shapes(cfg)})
