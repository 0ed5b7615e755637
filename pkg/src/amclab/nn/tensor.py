"""Reverse-mode autodiff over numpy arrays.

Each op records a fused backward closure on its output tensor; gradients flow
through a reverse topological walk from the loss.  Heavy ops (conv2d, lstm)
implement their whole backward as one node to keep the tape short and the
numpy calls batched.
"""

from __future__ import annotations

import numpy as np


class Tensor:
    """A numpy array plus an optional gradient slot on the autodiff tape."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def zero_grad(self):
        self.grad = None

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = g.copy() if isinstance(g, np.ndarray) else np.asarray(g)
        else:
            self.grad += g

    def backward(self):
        """Backpropagate from this (scalar) tensor through the recorded tape."""
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar loss")
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype})"


def _node(data, parents, backward) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad or p._parents for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data @ b.data

    def backward(g):
        a._accumulate(g @ b.data.T)
        b._accumulate(a.data.T @ g)

    return _node(out_data, (a, b), backward)


def add_bias(x: Tensor, b: Tensor) -> Tensor:
    out_data = x.data + b.data

    def backward(g):
        x._accumulate(g)
        b._accumulate(g.sum(axis=tuple(range(g.ndim - b.data.ndim))))

    return _node(out_data, (x, b), backward)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    out_data = x.data * mask

    def backward(g):
        x._accumulate(g * mask)

    return _node(out_data, (x,), backward)


def sigmoid(x: Tensor) -> Tensor:
    s = 1.0 / (1.0 + np.exp(-x.data))

    def backward(g):
        x._accumulate(g * s * (1.0 - s))

    return _node(s, (x,), backward)


def tanh(x: Tensor) -> Tensor:
    t = np.tanh(x.data)

    def backward(g):
        x._accumulate(g * (1.0 - t * t))

    return _node(t, (x,), backward)


def reshape(x: Tensor, shape) -> Tensor:
    in_shape = x.data.shape
    out_data = x.data.reshape(shape)

    def backward(g):
        x._accumulate(g.reshape(in_shape))

    return _node(out_data, (x,), backward)


def scale_shift(x: Tensor, scale: np.ndarray, shift: np.ndarray) -> Tensor:
    """Elementwise affine x*scale + shift with constant coefficients
    (used for stored feature standardization)."""
    out_data = x.data * scale + shift

    def backward(g):
        x._accumulate(g * scale)

    return _node(out_data, (x,), backward)


def dropout(x: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout; call only during training."""
    keep = 1.0 - rate
    mask = (rng.random(x.data.shape) < keep).astype(x.data.dtype) / keep
    out_data = x.data * mask

    def backward(g):
        x._accumulate(g * mask)

    return _node(out_data, (x,), backward)


def _im2col(x: np.ndarray, kh: int, kw: int) -> np.ndarray:
    """(B, C, H, W) -> (B, OH, OW, C, KH, KW) patch view (no copy)."""
    b, c, h, w = x.shape
    oh, ow = h - kh + 1, w - kw + 1
    sb, sc, sh, sw = x.strides
    return np.lib.stride_tricks.as_strided(
        x, (b, oh, ow, c, kh, kw), (sb, sh, sw, sc, sh, sw))


def conv2d(x: Tensor, filters: Tensor, bias: Tensor) -> Tensor:
    """Valid cross-correlation, stride 1.

    x: (B, C, H, W); filters: (F, C, KH, KW); bias: (F,) -> (B, F, OH, OW).
    """
    b, c, h, w = x.data.shape
    f, cf, kh, kw = filters.data.shape
    if cf != c:
        raise ValueError("filter channel mismatch")
    if kh > h or kw > w:
        raise ValueError("kernel larger than input")
    oh, ow = h - kh + 1, w - kw + 1

    cols = _im2col(x.data, kh, kw).reshape(b * oh * ow, c * kh * kw)
    wmat = filters.data.reshape(f, c * kh * kw)
    out = cols @ wmat.T + bias.data
    out_data = out.reshape(b, oh, ow, f).transpose(0, 3, 1, 2)

    def backward(g):
        gmat = g.transpose(0, 2, 3, 1).reshape(b * oh * ow, f)
        filters._accumulate((gmat.T @ cols).reshape(f, c, kh, kw))
        bias._accumulate(gmat.sum(axis=0))
        dcols = (gmat @ wmat).reshape(b, oh, ow, c, kh, kw)
        dx = np.zeros_like(x.data)
        for i in range(kh):
            for j in range(kw):
                dx[:, :, i:i + oh, j:j + ow] += dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        x._accumulate(dx)

    return _node(out_data, (x, filters, bias), backward)


def lstm(x: Tensor, wx: Tensor, wh: Tensor, b: Tensor,
         pool: str = "last") -> Tensor:
    """LSTM over a (B, T, D) sequence, reduced to one (B, H) readout.

    Gate equations (order i, f, g, o along the 4H axis):
        i, f, o = sigmoid(x@Wx + h@Wh + b); g = tanh(...)
        c <- f*c + i*g;  h <- o * tanh(c)
    ``pool`` picks the readout: "mean" averages the hidden states over all
    timesteps (keeps early-window evidence alive), "last" takes the final
    state.  Backward is a fused BPTT over the whole window.
    """
    if pool not in ("mean", "last"):
        raise ValueError(f"unknown lstm pool: {pool!r}")
    bsz, t_len, d = x.data.shape
    hid = wh.data.shape[0]
    dtype = x.data.dtype

    x_flat = x.data.reshape(bsz * t_len, d)
    x_pre = (x_flat @ wx.data).reshape(bsz, t_len, 4 * hid)

    h = np.zeros((bsz, hid), dtype=dtype)
    c = np.zeros((bsz, hid), dtype=dtype)
    gates_i = np.empty((t_len, bsz, hid), dtype=dtype)
    gates_f = np.empty_like(gates_i)
    gates_g = np.empty_like(gates_i)
    gates_o = np.empty_like(gates_i)
    cells = np.empty_like(gates_i)
    tanh_c = np.empty_like(gates_i)
    h_prev = np.empty_like(gates_i)
    h_all = np.empty_like(gates_i)

    for t in range(t_len):
        h_prev[t] = h
        pre = x_pre[:, t, :] + h @ wh.data + b.data
        ig = 1.0 / (1.0 + np.exp(-pre[:, :hid]))
        fg = 1.0 / (1.0 + np.exp(-pre[:, hid:2 * hid]))
        gg = np.tanh(pre[:, 2 * hid:3 * hid])
        og = 1.0 / (1.0 + np.exp(-pre[:, 3 * hid:]))
        c = fg * c + ig * gg
        tc = np.tanh(c)
        h = og * tc
        gates_i[t], gates_f[t], gates_g[t], gates_o[t] = ig, fg, gg, og
        cells[t] = c
        tanh_c[t] = tc
        h_all[t] = h

    out_data = h_all.mean(axis=0) if pool == "mean" else h

    def backward(g):
        dwx = np.zeros_like(wx.data)
        dwh = np.zeros_like(wh.data)
        db = np.zeros_like(b.data)
        dx = np.empty((t_len, bsz, d), dtype=dtype)
        g = g.astype(dtype, copy=False)
        if pool == "mean":
            dh_out = g / t_len
            dh = dh_out.copy()
        else:
            dh_out = None
            dh = g.copy()
        dc = np.zeros((bsz, hid), dtype=dtype)
        dpre = np.empty((bsz, 4 * hid), dtype=dtype)
        for t in range(t_len - 1, -1, -1):
            ig, fg, gg, og = gates_i[t], gates_f[t], gates_g[t], gates_o[t]
            tc = tanh_c[t]
            do = dh * tc
            dc = dc + dh * og * (1.0 - tc * tc)
            c_prev = cells[t - 1] if t > 0 else np.zeros((bsz, hid), dtype=dtype)
            di = dc * gg
            df = dc * c_prev
            dg = dc * ig
            dpre[:, :hid] = di * ig * (1.0 - ig)
            dpre[:, hid:2 * hid] = df * fg * (1.0 - fg)
            dpre[:, 2 * hid:3 * hid] = dg * (1.0 - gg * gg)
            dpre[:, 3 * hid:] = do * og * (1.0 - og)
            dwh += h_prev[t].T @ dpre
            db += dpre.sum(axis=0)
            dx[t] = dpre @ wx.data.T
            dwx += x.data[:, t, :].T @ dpre
            dh = dpre @ wh.data.T
            if pool == "mean" and t > 0:
                dh += dh_out
            dc = dc * fg
        x._accumulate(dx.transpose(1, 0, 2))
        wx._accumulate(dwx)
        wh._accumulate(dwh)
        b._accumulate(db)

    return _node(out_data, (x, wx, wh, b), backward)


def softmax(x: Tensor) -> Tensor:
    """Row-wise stable softmax over the last axis."""
    z = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        inner = (g * p).sum(axis=-1, keepdims=True)
        x._accumulate(p * (g - inner))

    return _node(p, (x,), backward)


def cross_entropy(probs: Tensor, onehot: np.ndarray,
                  reduction: str = "mean") -> Tensor:
    """Categorical cross entropy -sum_j y_j log(p_j) per sample.

    Probabilities are clamped to >= 1e-12 inside the log to avoid -inf on
    confident mistakes.  ``reduction`` is "mean" (batch loss) or "sum".
    """
    p = np.maximum(probs.data, 1e-12)
    per_sample = -(onehot * np.log(p)).sum(axis=-1, dtype=np.float64)
    n = per_sample.shape[0] if per_sample.ndim else 1
    total = per_sample.sum()
    value = total / n if reduction == "mean" else total

    def backward(g):
        scale = g / n if reduction == "mean" else g
        probs._accumulate((-onehot / p) * scale)

    return _node(np.asarray(value, dtype=probs.data.dtype), (probs,), backward)


def mse(pred: Tensor, target: np.ndarray) -> Tensor:
    """Mean squared error over all elements."""
    diff = pred.data - target
    value = np.mean(diff.astype(np.float64) ** 2)

    def backward(g):
        pred._accumulate(g * 2.0 * diff / diff.size)

    return _node(np.asarray(value, dtype=pred.data.dtype), (pred,), backward)
