"""Layer primitives with explicit forward/backward passes.

Tensors are float64 numpy arrays. Spatial layers take batches shaped
(N, C, H, W); a single (C, H, W) input is accepted and handled as N=1.
Convolution uses cross-correlation orientation (kernels are not flipped).
"""
import numpy as np

from ..errors import InvalidInputError, ShapeError


def _as_batch(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 3:
        return x[None], True
    if x.ndim != 4:
        raise ShapeError(f"expected (C,H,W) or (N,C,H,W), got shape {x.shape}")
    return x, False


def _im2col(xp, h, w):
    # xp: padded (N, C, H+2, W+2) -> (N*H*W, C*9)
    n, c = xp.shape[:2]
    win = np.lib.stride_tricks.sliding_window_view(xp, (3, 3), axis=(2, 3))
    return win.transpose(0, 2, 3, 1, 4, 5).reshape(n * h * w, c * 9)


def conv2d_forward(x, w, b):
    """3x3 same convolution, stride 1, zero padding 1.

    Inputs:
    - x: (N, C, H, W) or (C, H, W)
    - w: (F, C, 3, 3)
    - b: (F,)

    Returns (out, cache) with out shaped (N, F, H, W), or (F, H, W) for a
    single unbatched input.
    """
    x, single = _as_batch(x)
    n, c, h, wd = x.shape
    if w.ndim != 4 or w.shape[2:] != (3, 3):
        raise ShapeError(f"expected (F, C, 3, 3) kernels, got {w.shape}")
    if w.shape[1] != c:
        raise ShapeError(f"input has {c} channels, kernels expect {w.shape[1]}")
    if b.shape != (w.shape[0],):
        raise ShapeError(f"bias shape {b.shape} does not match {w.shape[0]} filters")
    f = w.shape[0]
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    cols = _im2col(xp, h, wd)
    out = cols @ w.reshape(f, -1).T + b
    out = out.reshape(n, h, wd, f).transpose(0, 3, 1, 2)
    cache = (x.shape, cols, w, single)
    return (out[0] if single else out), cache


def conv2d_backward(dout, cache):
    """Returns (dx, dw, db) for :func:`conv2d_forward`."""
    x_shape, cols, w, single = cache
    n, c, h, wd = x_shape
    f = w.shape[0]
    dout = np.asarray(dout).reshape(n, f, h, wd)
    dflat = dout.transpose(0, 2, 3, 1).reshape(-1, f)
    dw = (dflat.T @ cols).reshape(w.shape)
    db = dflat.sum(axis=0)
    dcols = (dflat @ w.reshape(f, -1)).reshape(n, h, wd, c, 3, 3)
    dxp = np.zeros((n, c, h + 2, wd + 2))
    for i in range(3):
        for j in range(3):
            dxp[:, :, i : i + h, j : j + wd] += dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    dx = dxp[:, :, 1:-1, 1:-1]
    return (dx[0] if single else dx), dw, db


def relu_forward(x):
    x = np.asarray(x, dtype=np.float64)
    return np.maximum(x, 0.0), x


def relu_backward(dout, cache):
    return dout * (cache > 0)


def relu(x):
    return relu_forward(x)[0]


def maxpool2_forward(x):
    """Non-overlapping 2x2 max pool, stride 2; a trailing odd row/column is dropped.

    The cache records the winning position of each window (first in
    row-major order on ties) so the backward pass routes gradient there.
    """
    x, single = _as_batch(x)
    n, c, h, w = x.shape
    if h < 2 or w < 2:
        raise ShapeError(f"maxpool needs H, W >= 2, got {h}x{w}")
    ho, wo = h // 2, w // 2
    blocks = x[:, :, : ho * 2, : wo * 2].reshape(n, c, ho, 2, wo, 2)
    blocks = blocks.transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ho, wo, 4)
    arg = blocks.argmax(axis=-1)
    out = np.take_along_axis(blocks, arg[..., None], axis=-1)[..., 0]
    cache = (x.shape, arg, single)
    return (out[0] if single else out), cache


def maxpool2_backward(dout, cache):
    x_shape, arg, single = cache
    n, c, h, w = x_shape
    ho, wo = h // 2, w // 2
    dout = np.asarray(dout).reshape(n, c, ho, wo)
    dblocks = np.zeros((n, c, ho, wo, 4))
    np.put_along_axis(dblocks, arg[..., None], dout[..., None], axis=-1)
    dblocks = dblocks.reshape(n, c, ho, wo, 2, 2).transpose(0, 1, 2, 4, 3, 5)
    dx = np.zeros(x_shape)
    dx[:, :, : ho * 2, : wo * 2] = dblocks.reshape(n, c, ho * 2, wo * 2)
    return dx[0] if single else dx


def dense_forward(x, w, b):
    """y = W x + b. ``x`` is (D,) or a batch (N, D); ``w`` is (M, D)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != w.shape[1]:
        raise ShapeError(f"input width {x.shape[-1]} does not match weights {w.shape}")
    if b.shape != (w.shape[0],):
        raise ShapeError(f"bias shape {b.shape} does not match weights {w.shape}")
    return x @ w.T + b, (x, w)


def dense_backward(dout, cache):
    x, w = cache
    dout = np.asarray(dout, dtype=np.float64)
    if x.ndim == 1:
        return w.T @ dout, np.outer(dout, x), dout.copy()
    return dout @ w, dout.T @ x, dout.sum(axis=0)


def concat_features(audio_vec, meta_vec):
    """Audio features first, metadata second, along the last axis."""
    a = np.asarray(audio_vec, dtype=np.float64)
    m = np.asarray(meta_vec, dtype=np.float64)
    if a.shape[-1] == 0 or m.shape[-1] == 0:
        raise InvalidInputError("cannot concatenate an empty feature vector")
    return np.concatenate([a, m], axis=-1)


def concat_backward(dout, audio_width):
    return dout[..., :audio_width], dout[..., audio_width:]


def mse_loss(preds, targets):
    """Mean squared error and its gradient with respect to ``preds``."""
    p = np.atleast_1d(np.asarray(preds, dtype=np.float64))
    t = np.atleast_1d(np.asarray(targets, dtype=np.float64))
    if p.shape != t.shape:
        raise ShapeError(f"prediction shape {p.shape} != target shape {t.shape}")
    diff = p - t
    return float(np.mean(diff**2)), 2.0 * diff / diff.size
