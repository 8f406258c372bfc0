"""Minimal reverse-mode autodiff on numpy arrays.

Every value is a `Tensor` wrapping a row-major float array. Ops build a
fresh tape (DAG of parent links + backward closures) per forward pass;
`Tensor.backward()` walks it once in reverse topological order. Tensors
whose inputs all have ``requires_grad=False`` record nothing, so
inference-only forwards carry no tape overhead.

float32 is the working precision; pass float64 arrays to run the same
graph at 64-bit (used by the gradient-check tests).
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Tensor",
    "add", "sub", "mul", "div", "matmul",
    "lrelu", "tanh", "sigmoid", "log", "clamp_min",
    "reshape", "slice_axis", "concat", "tensor_sum", "tensor_mean",
    "conv2d", "conv2d_transpose", "batchnorm",
]

DEFAULT_DTYPE = np.float32


def _as_array(value, dtype=None):
    arr = np.asarray(value)
    if arr.dtype.kind != "f":
        arr = arr.astype(dtype or DEFAULT_DTYPE)
    elif dtype is not None and arr.dtype != dtype:
        arr = arr.astype(dtype)
    return arr


class Tensor:
    """N-d float array with optional participation in the gradient tape."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward_fn",
                 "_backward_done")

    def __init__(self, data, requires_grad=False, dtype=None):
        self.data = _as_array(data, dtype)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._backward_fn = None
        self._backward_done = False

    # -- introspection ----------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    # -- tape -------------------------------------------------------------
    def backward(self):
        """Reverse-sweep from a scalar loss, populating .grad on the tape.

        One sweep per tape: a second call on the same root raises. Grad
        accumulates on tensors reused within one graph (fan-out), so
        long-lived parameters must have .grad cleared between tapes.
        """
        if self.data.shape != ():
            raise ValueError(
                f"backward() needs a scalar loss, got shape {self.data.shape}")
        if self._backward_done:
            raise RuntimeError("backward() already ran on this tape; build a "
                               "fresh graph for another sweep")
        self._backward_done = True

        topo = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))

        self.grad = np.ones((), dtype=self.data.dtype)
        for node in reversed(topo):
            if node._backward_fn is not None and node.grad is not None:
                node._backward_fn(node.grad)

    # -- operator sugar ---------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self):
        return tensor_sum(self)

    def mean(self):
        return tensor_mean(self)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) != 1 else shape[0])


def _ensure_tensor(value, like=None):
    if isinstance(value, Tensor):
        return value
    dtype = like.dtype if like is not None else None
    return Tensor(value, dtype=dtype)


def _make(data, parents, backward_fn):
    out = Tensor(data)
    out.requires_grad = any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._parents = tuple(parents)
        out._backward_fn = backward_fn
    return out


def _accumulate(parent, grad):
    if grad.dtype != parent.data.dtype:
        grad = grad.astype(parent.data.dtype)
    if parent.grad is None:
        parent.grad = grad.copy() if grad.base is not None else grad
    else:
        parent.grad = parent.grad + grad


def _unbroadcast(grad, shape):
    """Sum `grad` down to `shape` (reverse of numpy broadcasting)."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# -- elementwise arithmetic (numpy broadcasting allowed) -------------------

def add(a, b):
    a = _ensure_tensor(a, like=b if isinstance(b, Tensor) else None)
    b = _ensure_tensor(b, like=a)
    data = a.data + b.data

    def backward_fn(g):
        if a.requires_grad:
            _accumulate(a, _unbroadcast(g, a.data.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(g, b.data.shape))

    return _make(data, (a, b), backward_fn)


def sub(a, b):
    a = _ensure_tensor(a, like=b if isinstance(b, Tensor) else None)
    b = _ensure_tensor(b, like=a)
    data = a.data - b.data

    def backward_fn(g):
        if a.requires_grad:
            _accumulate(a, _unbroadcast(g, a.data.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(-g, b.data.shape))

    return _make(data, (a, b), backward_fn)


def mul(a, b):
    a = _ensure_tensor(a, like=b if isinstance(b, Tensor) else None)
    b = _ensure_tensor(b, like=a)
    data = a.data * b.data

    def backward_fn(g):
        if a.requires_grad:
            _accumulate(a, _unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(g * a.data, b.data.shape))

    return _make(data, (a, b), backward_fn)


def div(a, b):
    a = _ensure_tensor(a, like=b if isinstance(b, Tensor) else None)
    b = _ensure_tensor(b, like=a)
    data = a.data / b.data

    def backward_fn(g):
        if a.requires_grad:
            _accumulate(a, _unbroadcast(g / b.data, a.data.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))

    return _make(data, (a, b), backward_fn)


def matmul(a, b):
    """2-d matrix product [N,K] @ [K,M]."""
    a, b = _ensure_tensor(a), _ensure_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError(f"matmul expects 2-d operands, got {a.data.shape} and {b.data.shape}")
    if a.data.shape[1] != b.data.shape[0]:
        raise ValueError(f"matmul inner dims differ: {a.data.shape} @ {b.data.shape}")
    data = a.data @ b.data

    def backward_fn(g):
        if a.requires_grad:
            _accumulate(a, g @ b.data.T)
        if b.requires_grad:
            _accumulate(b, a.data.T @ g)

    return _make(data, (a, b), backward_fn)


# -- nonlinearities ---------------------------------------------------------

def lrelu(x, slope=0.2):
    x = _ensure_tensor(x)
    positive = x.data >= 0
    data = np.where(positive, x.data, x.data * x.data.dtype.type(slope))

    def backward_fn(g):
        if x.requires_grad:
            _accumulate(x, np.where(positive, g, g * g.dtype.type(slope)))

    return _make(data, (x,), backward_fn)


def tanh(x):
    x = _ensure_tensor(x)
    data = np.tanh(x.data)

    def backward_fn(g):
        if x.requires_grad:
            _accumulate(x, g * (1.0 - data * data))

    return _make(data, (x,), backward_fn)


def sigmoid(x):
    x = _ensure_tensor(x)
    # split form avoids exp overflow for large |x|
    data = np.where(x.data >= 0,
                    1.0 / (1.0 + np.exp(-np.abs(x.data))),
                    np.exp(-np.abs(x.data)) / (1.0 + np.exp(-np.abs(x.data))))
    data = data.astype(x.data.dtype)

    def backward_fn(g):
        if x.requires_grad:
            _accumulate(x, g * data * (1.0 - data))

    return _make(data, (x,), backward_fn)


def log(x):
    """Natural log; raises on non-positive input (clamp first if unsure)."""
    x = _ensure_tensor(x)
    if np.any(x.data <= 0):
        raise ValueError("log() of non-positive input; use clamp_min for the "
                         "epsilon-clamped variant")
    data = np.log(x.data)

    def backward_fn(g):
        if x.requires_grad:
            _accumulate(x, g / x.data)

    return _make(data, (x,), backward_fn)


def clamp_min(x, floor):
    """max(x, floor); gradient is zero where clamping is active."""
    x = _ensure_tensor(x)
    keep = x.data > floor
    data = np.maximum(x.data, x.data.dtype.type(floor))

    def backward_fn(g):
        if x.requires_grad:
            _accumulate(x, np.where(keep, g, g.dtype.type(0.0)))

    return _make(data, (x,), backward_fn)


# -- shape ops --------------------------------------------------------------

def reshape(x, shape):
    x = _ensure_tensor(x)
    data = x.data.reshape(shape)
    old_shape = x.data.shape

    def backward_fn(g):
        if x.requires_grad:
            _accumulate(x, g.reshape(old_shape))

    return _make(data, (x,), backward_fn)


def slice_axis(x, axis, start, stop):
    """Contiguous slice [start:stop) along one axis."""
    x = _ensure_tensor(x)
    index = tuple(slice(None) if d != axis else slice(start, stop)
                  for d in range(x.data.ndim))
    data = x.data[index]

    def backward_fn(g):
        if x.requires_grad:
            full = np.zeros_like(x.data)
            full[index] = g
            _accumulate(x, full)

    return _make(data, (x,), backward_fn)


def concat(tensors, axis):
    tensors = [_ensure_tensor(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    splits = np.cumsum([t.data.shape[axis] for t in tensors])[:-1]

    def backward_fn(g):
        pieces = np.split(g, splits, axis=axis)
        for t, piece in zip(tensors, pieces):
            if t.requires_grad:
                _accumulate(t, piece)

    return _make(data, tuple(tensors), backward_fn)


def tensor_sum(x):
    x = _ensure_tensor(x)
    data = x.data.sum()

    def backward_fn(g):
        if x.requires_grad:
            _accumulate(x, np.broadcast_to(g, x.data.shape))

    return _make(data, (x,), backward_fn)


def tensor_mean(x):
    x = _ensure_tensor(x)
    n = x.data.size
    data = x.data.sum() / x.data.dtype.type(n)

    def backward_fn(g):
        if x.requires_grad:
            _accumulate(x, np.broadcast_to(g / g.dtype.type(n), x.data.shape))

    return _make(data, (x,), backward_fn)


# -- convolution -------------------------------------------------------------

def _same_pad(size, k, stride):
    out = -(-size // stride)
    total = max((out - 1) * stride + k - size, 0)
    return total // 2, total - total // 2, out


def _conv2d_forward(x, w, stride, padding):
    """Raw NHWC correlation. x:[N,H,W,C] w:[k,k,C,F]."""
    n, h, width, c = x.shape
    k = w.shape[0]
    if w.shape[2] != c:
        raise ValueError(f"conv2d channel mismatch: input has {c}, kernel expects {w.shape[2]}")
    if padding == "same":
        pt, pb, oh = _same_pad(h, k, stride)
        pl, pr, ow = _same_pad(width, k, stride)
    elif padding == "valid":
        if h < k or width < k:
            raise ValueError(f"conv2d valid padding needs spatial dims >= {k}, got {h}x{width}")
        pt = pb = pl = pr = 0
        oh = (h - k) // stride + 1
        ow = (width - k) // stride + 1
    else:
        raise ValueError(f"unknown padding {padding!r}")

    xp = np.pad(x, ((0, 0), (pt, pb), (pl, pr), (0, 0))) if (pt or pb or pl or pr) else x
    windows = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(1, 2))
    windows = windows[:, ::stride, ::stride]            # [N,OH,OW,C,k,k]
    cols = np.ascontiguousarray(windows.transpose(0, 1, 2, 4, 5, 3))
    cols = cols.reshape(n * oh * ow, k * k * c)
    out = cols @ w.reshape(k * k * c, -1)
    return out.reshape(n, oh, ow, -1), cols, (xp.shape, pt, pl)


def _conv2d_input_grad(g, w, cols_shape_info, x_shape, stride):
    """Scatter column gradients back onto the (padded) input."""
    xp_shape, pt, pl = cols_shape_info
    n, h, width, c = x_shape
    k = w.shape[0]
    _, oh, ow, _ = g.shape
    dcols = g.reshape(n * oh * ow, -1) @ w.reshape(k * k * c, -1).T
    dcols = dcols.reshape(n, oh, ow, k, k, c)
    dxp = np.zeros(xp_shape, dtype=g.dtype)
    for ki in range(k):
        for kj in range(k):
            dxp[:, ki:ki + stride * oh:stride, kj:kj + stride * ow:stride, :] += dcols[:, :, :, ki, kj, :]
    return dxp[:, pt:pt + h, pl:pl + width, :]


def conv2d(x, w, stride=1, padding="same"):
    """2-d correlation, NHWC layout. x:[N,H,W,C], w:[k,k,C,F] -> [N,OH,OW,F].

    `same` pads to ceil(H/stride) outputs (asymmetric pad, extra on the
    bottom/right); `valid` requires spatial dims >= k.
    """
    x, w = _ensure_tensor(x), _ensure_tensor(w)
    if x.data.ndim != 4 or w.data.ndim != 4:
        raise ValueError("conv2d expects x:[N,H,W,C], w:[k,k,C,F]")
    if stride < 1 or w.data.shape[0] < 1:
        raise ValueError("conv2d needs stride >= 1 and kernel size >= 1")
    data, cols, pad_info = _conv2d_forward(x.data, w.data, stride, padding)

    def backward_fn(g):
        if w.requires_grad:
            n, oh, ow, f = g.shape
            dw = cols.T @ g.reshape(n * oh * ow, f)
            _accumulate(w, dw.reshape(w.data.shape))
        if x.requires_grad:
            _accumulate(x, _conv2d_input_grad(g, w.data, pad_info, x.data.shape, stride))

    return _make(data, (x, w), backward_fn)


def _axis_scatter_bounds(k_off, pad, stride, in_len, out_len):
    """First input index / output offset / count for one kernel offset.

    Input index i lands on output index (k_off - pad) + stride*i; clip the
    arithmetic progression to [0, out_len).
    """
    first = k_off - pad
    i0 = 0 if first >= 0 else (-first + stride - 1) // stride
    i_max = min(in_len - 1, (out_len - 1 - first) // stride)
    count = max(0, i_max - i0 + 1)
    return i0, first + stride * i0, count


def _conv2d_transpose_forward(x, w, stride):
    n, h, width, c = x.shape
    k, _, f, wc = w.shape
    if wc != c:
        raise ValueError(f"conv2d_transpose channel mismatch: input has {c}, kernel expects {wc}")
    oh, ow = h * stride, width * stride
    pad = max(k - stride, 0) // 2
    out = np.zeros((n, oh, ow, f), dtype=x.dtype)
    xf = x.reshape(n * h * width, c)
    for ki in range(k):
        i0, r0, rc = _axis_scatter_bounds(ki, pad, stride, h, oh)
        if rc == 0:
            continue
        for kj in range(k):
            j0, c0, cc = _axis_scatter_bounds(kj, pad, stride, width, ow)
            if cc == 0:
                continue
            contrib = (xf @ w[ki, kj].T).reshape(n, h, width, f)
            out[:, r0:r0 + stride * rc:stride, c0:c0 + stride * cc:stride, :] += \
                contrib[:, i0:i0 + rc, j0:j0 + cc, :]
    return out, pad


def conv2d_transpose(x, w, stride=2):
    """Transposed conv, exact stride-fold upsampling. x:[N,H,W,C], w:[k,k,F,C] -> [N,H*stride,W*stride,F].

    Adjoint of conv2d(, stride, "same") on the upsampled grid:
    <conv2d_transpose(x,w), g> == <x, conv2d(g,w,stride,"same")>.
    """
    x, w = _ensure_tensor(x), _ensure_tensor(w)
    if x.data.ndim != 4 or w.data.ndim != 4:
        raise ValueError("conv2d_transpose expects x:[N,H,W,C], w:[k,k,F,C]")
    if stride < 1:
        raise ValueError("conv2d_transpose needs stride >= 1")
    data, pad = _conv2d_transpose_forward(x.data, w.data, stride)
    k = w.data.shape[0]

    def backward_fn(g):
        n, h, width, c = x.data.shape
        if x.requires_grad:
            dx, _, _ = _conv2d_forward(g, w.data, stride, "same")
            _accumulate(x, dx)
        if w.requires_grad:
            f = w.data.shape[2]
            xf = x.data.reshape(n * h * width, c)
            dw = np.zeros_like(w.data)
            oh, ow = h * stride, width * stride
            for ki in range(k):
                i0, r0, rc = _axis_scatter_bounds(ki, pad, stride, h, oh)
                if rc == 0:
                    continue
                for kj in range(k):
                    j0, c0, cc = _axis_scatter_bounds(kj, pad, stride, width, ow)
                    if cc == 0:
                        continue
                    gs = np.zeros((n, h, width, f), dtype=g.dtype)
                    gs[:, i0:i0 + rc, j0:j0 + cc, :] = \
                        g[:, r0:r0 + stride * rc:stride, c0:c0 + stride * cc:stride, :]
                    dw[ki, kj] = gs.reshape(n * h * width, f).T @ xf
            _accumulate(w, dw)

    return _make(data, (x, w), backward_fn)


# -- batch normalization ------------------------------------------------------

def batchnorm(x, gamma, beta, running_mean, running_var, train,
              eps=1e-5, ema_decay=0.9, update_stats=None):
    """Per-channel batchnorm over NHWC batches.

    Train mode normalizes with batch statistics over (N,H,W) and, unless
    update_stats=False, folds them into the running arrays in place via
    EMA (decay on the old value); infer mode normalizes with the running
    statistics.
    """
    x, gamma, beta = _ensure_tensor(x), _ensure_tensor(gamma), _ensure_tensor(beta)
    if x.data.ndim != 4:
        raise ValueError("batchnorm expects NHWC input")
    if x.data.shape[0] == 0:
        raise ValueError("batchnorm on an empty batch")
    channels = x.data.shape[-1]
    if gamma.data.shape != (channels,) or beta.data.shape != (channels,):
        raise ValueError(f"gamma/beta must have shape ({channels},)")

    dt = x.data.dtype
    if train:
        axes = (0, 1, 2)
        mu = x.data.mean(axis=axes)
        centered = x.data - mu
        var = np.mean(centered * centered, axis=axes)
        if update_stats is None or update_stats:
            running_mean *= ema_decay
            running_mean += (1.0 - ema_decay) * mu.astype(running_mean.dtype)
            running_var *= ema_decay
            running_var += (1.0 - ema_decay) * var.astype(running_var.dtype)
    else:
        mu = running_mean.astype(dt)
        var = running_var.astype(dt)
        centered = x.data - mu

    inv_std = 1.0 / np.sqrt(var + dt.type(eps))
    xhat = centered * inv_std
    data = gamma.data * xhat + beta.data

    def backward_fn(g):
        if gamma.requires_grad:
            _accumulate(gamma, (g * xhat).sum(axis=(0, 1, 2)))
        if beta.requires_grad:
            _accumulate(beta, g.sum(axis=(0, 1, 2)))
        if x.requires_grad:
            dxhat = g * gamma.data
            if train:
                dx = inv_std * (dxhat
                                - dxhat.mean(axis=(0, 1, 2))
                                - xhat * (dxhat * xhat).mean(axis=(0, 1, 2)))
            else:
                dx = dxhat * inv_std
            _accumulate(x, dx)

    return _make(data, (x, gamma, beta), backward_fn)
