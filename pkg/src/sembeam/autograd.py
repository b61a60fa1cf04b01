"""Minimal reverse-mode autodiff over float64 numpy arrays.

Covers exactly the operations the nets and losses here need: broadcast
arithmetic, matmul, strided 2-D convolution, relu/sigmoid/softmax, log,
power, clip, sum, reshape, concat, and slicing.  Gradients accumulate
into ``.grad`` on tensors created with ``requires_grad=True``; call
``backward()`` on a scalar result.  A central-difference checker for
tests lives at the bottom.
"""

import numpy as np


def _unbroadcast(grad, shape):
    # reduce a broadcast gradient back to the operand's shape
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """Array node in the autodiff graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    def item(self):
        return float(self.data)

    def backward(self, grad=None):
        if grad is None:
            if self.data.size != 1:
                raise ValueError("implicit gradient needs a scalar output")
            grad = np.ones_like(self.data)
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if id(node) in seen:
                continue
            if expanded:
                seen.add(id(node))
                order.append(node)
                continue
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        for node in order:
            node.grad = None
        self.grad = np.asarray(grad, dtype=np.float64).reshape(self.data.shape)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # operator sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(other, mul(self, -1.0))

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, exponent):
        return power(self, exponent)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) != 1 else shape[0])

    def sum(self, axis=None, keepdims=False):
        return tensor_sum(self, axis=axis, keepdims=keepdims)


def ensure_tensor(value):
    return value if isinstance(value, Tensor) else Tensor(value)


def _make(data, parents, backward_fn):
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def _accumulate(tensor, grad):
    if not tensor.requires_grad:
        return
    if tensor.grad is None:
        tensor.grad = np.zeros_like(tensor.data)
    tensor.grad += grad


def add(a, b):
    a, b = ensure_tensor(a), ensure_tensor(b)

    def backward(grad):
        _accumulate(a, _unbroadcast(grad, a.data.shape))
        _accumulate(b, _unbroadcast(grad, b.data.shape))

    return _make(a.data + b.data, (a, b), backward)


def mul(a, b):
    a, b = ensure_tensor(a), ensure_tensor(b)

    def backward(grad):
        _accumulate(a, _unbroadcast(grad * b.data, a.data.shape))
        _accumulate(b, _unbroadcast(grad * a.data, b.data.shape))

    return _make(a.data * b.data, (a, b), backward)


def matmul(a, b):
    a, b = ensure_tensor(a), ensure_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError("matmul expects 2-D operands")

    def backward(grad):
        _accumulate(a, grad @ b.data.T)
        _accumulate(b, a.data.T @ grad)

    return _make(a.data @ b.data, (a, b), backward)


def relu(a):
    a = ensure_tensor(a)
    mask = a.data > 0.0

    def backward(grad):
        _accumulate(a, grad * mask)

    return _make(a.data * mask, (a,), backward)


def sigmoid(a):
    a = ensure_tensor(a)
    x = a.data
    out = np.empty_like(x)
    pos = x >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)

    def backward(grad):
        _accumulate(a, grad * out * (1.0 - out))

    return _make(out, (a,), backward)


def log(a):
    a = ensure_tensor(a)

    def backward(grad):
        _accumulate(a, grad / a.data)

    return _make(np.log(a.data), (a,), backward)


def power(a, exponent):
    a = ensure_tensor(a)
    exponent = float(exponent)

    def backward(grad):
        _accumulate(a, grad * exponent * a.data ** (exponent - 1.0))

    return _make(a.data ** exponent, (a,), backward)


def clip(a, low, high):
    """Clamp values; gradient passes only where the input was strictly inside."""
    a = ensure_tensor(a)
    inside = (a.data > low) & (a.data < high)

    def backward(grad):
        _accumulate(a, grad * inside)

    return _make(np.clip(a.data, low, high), (a,), backward)


def tensor_sum(a, axis=None, keepdims=False):
    a = ensure_tensor(a)

    def backward(grad):
        if axis is None:
            _accumulate(a, np.broadcast_to(grad, a.data.shape).copy())
            return
        expanded = grad
        if not keepdims:
            expanded = np.expand_dims(grad, axis)
        _accumulate(a, np.broadcast_to(expanded, a.data.shape).copy())

    return _make(a.data.sum(axis=axis, keepdims=keepdims), (a,), backward)


def reshape(a, shape):
    a = ensure_tensor(a)

    def backward(grad):
        _accumulate(a, grad.reshape(a.data.shape))

    return _make(a.data.reshape(shape), (a,), backward)


def concat(tensors, axis=0):
    tensors = [ensure_tensor(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]

    def backward(grad):
        start = 0
        for tensor, size in zip(tensors, sizes):
            index = [slice(None)] * grad.ndim
            index[axis] = slice(start, start + size)
            _accumulate(tensor, grad[tuple(index)])
            start += size

    return _make(np.concatenate([t.data for t in tensors], axis=axis),
                 tensors, backward)


def narrow(a, axis, start, length):
    """Contiguous slice along one axis."""
    a = ensure_tensor(a)
    index = [slice(None)] * a.data.ndim
    index[axis] = slice(start, start + length)
    index = tuple(index)

    def backward(grad):
        full = np.zeros_like(a.data)
        full[index] = grad
        _accumulate(a, full)

    return _make(a.data[index].copy(), (a,), backward)


def softmax(a, axis=-1):
    a = ensure_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    ex = np.exp(shifted)
    out = ex / ex.sum(axis=axis, keepdims=True)

    def backward(grad):
        inner = (grad * out).sum(axis=axis, keepdims=True)
        _accumulate(a, out * (grad - inner))

    return _make(out, (a,), backward)


def conv2d(x, w, stride=1, padding=0):
    """Strided 2-D convolution, NCHW input and OCHW kernels."""
    x, w = ensure_tensor(x), ensure_tensor(w)
    if x.data.ndim != 4 or w.data.ndim != 4:
        raise ValueError("conv2d expects 4-D input and kernels")
    if x.data.shape[1] != w.data.shape[1]:
        raise ValueError("channel mismatch")
    stride = int(stride)
    padding = int(padding)
    batch, channels, height, width = x.data.shape
    out_ch, _, k_h, k_w = w.data.shape
    padded = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    windows = np.lib.stride_tricks.sliding_window_view(
        padded, (k_h, k_w), axis=(2, 3))[:, :, ::stride, ::stride]
    out_h, out_w = windows.shape[2], windows.shape[3]
    # im2col so both passes run as plain matmuls
    cols = np.ascontiguousarray(windows.transpose(0, 2, 3, 1, 4, 5)).reshape(
        batch * out_h * out_w, channels * k_h * k_w)
    w_mat = w.data.reshape(out_ch, -1)
    out = (cols @ w_mat.T).reshape(batch, out_h, out_w, out_ch)
    out = np.ascontiguousarray(out.transpose(0, 3, 1, 2))

    def backward(grad):
        grad_cols = np.ascontiguousarray(grad.transpose(0, 2, 3, 1)).reshape(
            batch * out_h * out_w, out_ch)
        if w.requires_grad:
            _accumulate(w, (grad_cols.T @ cols).reshape(w.data.shape))
        if x.requires_grad:
            gpad = np.zeros_like(padded)
            for i in range(k_h):
                for j in range(k_w):
                    piece = np.tensordot(grad, w.data[:, :, i, j],
                                         axes=([1], [0]))  # (b, h, w, c)
                    gpad[:, :, i:i + stride * out_h:stride,
                         j:j + stride * out_w:stride] += piece.transpose(0, 3, 1, 2)
            if padding:
                gpad = gpad[:, :, padding:padding + height,
                            padding:padding + width]
            _accumulate(x, gpad)

    return _make(out, (x, w), backward)


def numeric_gradient(fn, array, eps=1e-6):
    """Central-difference gradient of a scalar function of one array.

    ``fn`` is called with the (temporarily perturbed) array and must
    return a python float.
    """
    array = np.asarray(array, dtype=np.float64)
    grad = np.zeros_like(array)
    flat = array.reshape(-1)
    flat_grad = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + eps
        high = fn(array)
        flat[i] = original - eps
        low = fn(array)
        flat[i] = original
        flat_grad[i] = (high - low) / (2.0 * eps)
    return grad


def max_relative_error(analytic, numeric):
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-6)
    return float(np.max(np.abs(analytic - numeric) / scale))
