"""Dense float64 tensors with reverse-mode automatic differentiation.

The computation graph is built implicitly: every operation whose inputs
require gradients produces a tensor holding references to its parents and
a closure computing the local backward rule. ``Tensor.backward`` walks the
graph once in reverse topological order and materializes gradients on the
leaf tensors with ``requires_grad=True`` (parameters); intermediate nodes
only pass gradients through.

Scope is deliberately small: 2-D matmul, elementwise arithmetic, the
activations needed by the bundled architectures, naive conv2d/maxpool2d,
and a fused batchnorm. Broadcasting is restricted to bias-style addition
of a trailing-shape operand over the leading batch dimension.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "ShapeError",
    "Tensor",
    "concat",
    "conv2d",
    "maxpool2d",
    "batchnorm",
    "relu",
    "leaky_relu",
    "elu",
    "sigmoid",
    "softmax",
    "log_softmax",
    "take_rows",
    "take_col",
]


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible with an operation."""


def _as_array(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    return arr


class Tensor:
    """A dense n-d float64 array, optionally attached to the autodiff graph.

    ``grad`` stays ``None`` on tensors with ``requires_grad=False`` and
    accumulates across repeated ``backward`` calls otherwise.
    """

    def __init__(self, values, requires_grad: bool = False):
        self.data = _as_array(values)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None
        self._op = ""

    # -- basic introspection -------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag}, op={self._op or 'leaf'})"

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def zero_grad(self) -> None:
        self.grad = None

    # -- graph machinery -----------------------------------------------------

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = g.copy()
        else:
            self.grad = self.grad + g

    def backward(self) -> None:
        """Populate ``grad`` on every reachable requires-grad leaf.

        The loss must be scalar. Gradients accumulate across calls until
        ``zero_grad`` resets them.
        """
        if self.data.size != 1:
            raise ValueError(
                f"backward requires a scalar loss, got shape {self.shape}"
            )
        if not self.requires_grad:
            return

        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))

        flowing: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(topo):
            g = flowing.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                # leaf: materialize the gradient
                node._accumulate(g)
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in flowing:
                    flowing[key] = flowing[key] + pg
                else:
                    flowing[key] = pg


def _result(data: np.ndarray, parents: tuple[Tensor, ...], backward, op: str) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
        out._op = op
    return out


# -- elementwise arithmetic --------------------------------------------------

def _check_elementwise(a: Tensor, b: Tensor, op: str) -> bool:
    """Return True for the bias-broadcast case (b spans a's trailing dims)."""
    if a.shape == b.shape:
        return False
    if a.ndim >= 1 and b.shape == a.shape[1:]:
        return True
    raise ShapeError(
        f"{op}: shapes {a.shape} and {b.shape} are neither equal nor "
        f"batch-broadcastable"
    )


def _sum_to_bias(g: np.ndarray) -> np.ndarray:
    return g.sum(axis=0)


def _coerce_operand(other) -> tuple[Tensor | None, float | None]:
    if isinstance(other, Tensor):
        return other, None
    if isinstance(other, (int, float, np.integer, np.floating)):
        return None, float(other)
    raise TypeError(f"unsupported operand type {type(other).__name__}")


def add(a: Tensor, other) -> Tensor:
    b, const = _coerce_operand(other)
    if b is None:
        return _result(a.data + const, (a,), lambda g: (g,), "add_const")
    bias = _check_elementwise(a, b, "add")
    data = a.data + b.data

    def backward(g):
        return g, _sum_to_bias(g) if bias else g

    return _result(data, (a, b), backward, "add")


def sub(a: Tensor, other) -> Tensor:
    b, const = _coerce_operand(other)
    if b is None:
        return _result(a.data - const, (a,), lambda g: (g,), "sub_const")
    bias = _check_elementwise(a, b, "sub")
    data = a.data - b.data

    def backward(g):
        return g, -(_sum_to_bias(g) if bias else g)

    return _result(data, (a, b), backward, "sub")


def mul(a: Tensor, other) -> Tensor:
    b, const = _coerce_operand(other)
    if b is None:
        return _result(a.data * const, (a,), lambda g: (g * const,), "mul_const")
    bias = _check_elementwise(a, b, "mul")
    data = a.data * b.data
    need_a, need_b = a.requires_grad, b.requires_grad

    def backward(g):
        ga = g * b.data if need_a else None
        if not need_b:
            return ga, None
        gb = g * a.data
        return ga, _sum_to_bias(gb) if bias else gb

    return _result(data, (a, b), backward, "mul")


def neg(a: Tensor) -> Tensor:
    return _result(-a.data, (a,), lambda g: (-g,), "neg")


def exp(a: Tensor) -> Tensor:
    data = np.exp(a.data)
    return _result(data, (a,), lambda g: (g * data,), "exp")


def log(a: Tensor) -> Tensor:
    if np.any(a.data <= 0.0):
        raise ValueError("log: input must be strictly positive")
    data = np.log(a.data)
    return _result(data, (a,), lambda g: (g / a.data,), "log")


def square(a: Tensor) -> Tensor:
    return _result(a.data * a.data, (a,), lambda g: (g * (2.0 * a.data),), "square")


def tsum(a: Tensor) -> Tensor:
    data = np.asarray(a.data.sum())
    return _result(data, (a,), lambda g: (np.broadcast_to(g, a.shape).copy(),), "sum")


def tmean(a: Tensor) -> Tensor:
    n = a.data.size
    data = np.asarray(a.data.mean())

    def backward(g):
        return (np.broadcast_to(g / n, a.shape).copy(),)

    return _result(data, (a,), backward, "mean")


# -- matmul and shape ops ----------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(
            f"matmul expects 2-d operands, got shapes {a.shape} and {b.shape}"
        )
    if a.shape[1] != b.shape[0]:
        raise ShapeError(
            f"matmul: inner dimensions disagree for shapes {a.shape} and {b.shape}"
        )
    data = a.data @ b.data
    need_a, need_b = a.requires_grad, b.requires_grad

    def backward(g):
        return (g @ b.data.T if need_a else None,
                a.data.T @ g if need_b else None)

    return _result(data, (a, b), backward, "matmul")


def reshape(a: Tensor, shape) -> Tensor:
    data = a.data.reshape(shape)

    def backward(g):
        return (g.reshape(a.shape),)

    return _result(data, (a,), backward, "reshape")


def flatten(a: Tensor) -> Tensor:
    """Collapse all but the leading batch dimension."""
    return reshape(a, (a.shape[0], -1))


def concat(a: Tensor, b: Tensor, axis: int = 1) -> Tensor:
    if a.ndim != b.ndim:
        raise ShapeError(f"concat: rank mismatch between {a.shape} and {b.shape}")
    data = np.concatenate([a.data, b.data], axis=axis)
    split = a.shape[axis]

    def backward(g):
        ga, gb = np.split(g, [split], axis=axis)
        return ga, gb

    return _result(data, (a, b), backward, "concat")


def take_rows(a: Tensor, indices) -> Tensor:
    """Pick one entry per row of a 2-d tensor: out[i] = a[i, indices[i]]."""
    idx = np.asarray(indices, dtype=np.int64)
    if a.ndim != 2 or idx.shape != (a.shape[0],):
        raise ShapeError(
            f"take_rows expects (n, k) tensor and n indices, got {a.shape} "
            f"and {idx.shape}"
        )
    if idx.min(initial=0) < 0 or idx.max(initial=0) >= a.shape[1]:
        raise ValueError(f"take_rows: index out of range for {a.shape[1]} columns")
    rows = np.arange(a.shape[0])
    data = a.data[rows, idx]

    def backward(g):
        ga = np.zeros_like(a.data)
        ga[rows, idx] = g
        return (ga,)

    return _result(data, (a,), backward, "take_rows")


def take_col(a: Tensor, col: int) -> Tensor:
    """Select a single column of a 2-d tensor as a vector."""
    if a.ndim != 2:
        raise ShapeError(f"take_col expects a 2-d tensor, got {a.shape}")
    data = a.data[:, col].copy()

    def backward(g):
        ga = np.zeros_like(a.data)
        ga[:, col] = g
        return (ga,)

    return _result(data, (a,), backward, "take_col")


# -- activations ---------------------------------------------------------------

def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _result(a.data * mask, (a,), lambda g: (g * mask,), "relu")


def leaky_relu(a: Tensor, alpha: float = 0.01) -> Tensor:
    slope = alpha + (1.0 - alpha) * (a.data > 0)
    return _result(a.data * slope, (a,), lambda g: (g * slope,), "leaky_relu")


def elu(a: Tensor, alpha: float = 1.0) -> Tensor:
    # expm1(min(x, 0)) vanishes on the positive side, so the two branches
    # combine additively without a select.
    neg = alpha * np.expm1(np.minimum(a.data, 0.0))
    data = np.maximum(a.data, 0.0) + neg
    pos = a.data > 0

    def backward(g):
        return (g * (pos + (neg + alpha) * ~pos),)

    return _result(data, (a,), backward, "elu")


def sigmoid(a: Tensor) -> Tensor:
    data = 1.0 / (1.0 + np.exp(-a.data))
    return _result(data, (a,), lambda g: (g * data * (1.0 - data),), "sigmoid")


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        inner = (g * data).sum(axis=axis, keepdims=True)
        return ((g - inner) * data,)

    return _result(data, (a,), backward, "softmax")


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    data = shifted - lse
    p = np.exp(data)

    def backward(g):
        return (g - p * g.sum(axis=axis, keepdims=True),)

    return _result(data, (a,), backward, "log_softmax")


# -- convolution and pooling ---------------------------------------------------

def conv2d(x: Tensor, kernel: Tensor, bias: Tensor | None = None,
           stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation of (b, c, h, w) input with (o, c, kh, kw) kernel.

    Patches are gathered per kernel offset into a column matrix so both
    directions reduce to one matrix product (im2col); sized for
    MNIST-scale inputs only.
    """
    if x.ndim != 4 or kernel.ndim != 4:
        raise ShapeError(
            f"conv2d expects 4-d input and kernel, got {x.shape} and {kernel.shape}"
        )
    b, c, h, w = x.shape
    o, kc, kh, kw = kernel.shape
    if kc != c:
        raise ShapeError(
            f"conv2d: input channels {c} do not match kernel channels {kc}"
        )
    oh = (h + 2 * padding - kh) // stride + 1
    ow = (w + 2 * padding - kw) // stride + 1
    if oh < 1 or ow < 1:
        raise ShapeError(
            f"conv2d: kernel {kernel.shape} does not fit input {x.shape} "
            f"with stride={stride} padding={padding}"
        )

    if padding:
        xp = np.zeros((b, c, h + 2 * padding, w + 2 * padding))
        xp[:, :, padding:padding + h, padding:padding + w] = x.data
    else:
        xp = x.data

    cols = np.empty((b, oh, ow, c, kh, kw))
    for i in range(kh):
        for j in range(kw):
            patch = xp[:, :, i:i + stride * oh:stride, j:j + stride * ow:stride]
            cols[:, :, :, :, i, j] = patch.transpose(0, 2, 3, 1)
    cols_mat = cols.reshape(b * oh * ow, c * kh * kw)
    k_mat = kernel.data.reshape(o, c * kh * kw)
    out_flat = cols_mat @ k_mat.T
    if bias is not None:
        if bias.shape != (o,):
            raise ShapeError(f"conv2d: bias shape {bias.shape} != ({o},)")
        out_flat = out_flat + bias.data
    out = out_flat.reshape(b, oh, ow, o).transpose(0, 3, 1, 2)

    parents = (x, kernel) if bias is None else (x, kernel, bias)
    need_x = x.requires_grad

    def backward(g):
        g_flat = g.transpose(0, 2, 3, 1).reshape(b * oh * ow, o)
        gk = (g_flat.T @ cols_mat).reshape(o, c, kh, kw)
        gx = None
        if need_x:
            dcols = (g_flat @ k_mat).reshape(b, oh, ow, c, kh, kw)
            gxp = np.zeros((b, c, h + 2 * padding, w + 2 * padding))
            for i in range(kh):
                for j in range(kw):
                    gxp[:, :, i:i + stride * oh:stride,
                        j:j + stride * ow:stride] += (
                        dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
                    )
            gx = gxp[:, :, padding:padding + h, padding:padding + w] \
                if padding else gxp
        if bias is None:
            return gx, gk
        return gx, gk, g.sum(axis=(0, 2, 3))

    return _result(out, parents, backward, "conv2d")


def maxpool2d(x: Tensor, window: int = 2) -> Tensor:
    """Non-overlapping max pooling; gradient routes to the argmax position."""
    if x.ndim != 4:
        raise ShapeError(f"maxpool2d expects a 4-d input, got {x.shape}")
    b, c, h, w = x.shape
    if h % window or w % window:
        raise ShapeError(
            f"maxpool2d: spatial dims {h}x{w} not divisible by window {window}"
        )
    oh, ow = h // window, w // window
    view = x.data.reshape(b, c, oh, window, ow, window)
    flat = view.transpose(0, 1, 2, 4, 3, 5).reshape(b, c, oh, ow, window * window)
    arg = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]

    def backward(g):
        gflat = np.zeros_like(flat)
        np.put_along_axis(gflat, arg[..., None], g[..., None], axis=-1)
        gx = (
            gflat.reshape(b, c, oh, ow, window, window)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(b, c, h, w)
        )
        return (gx,)

    return _result(out, (x,), backward, "maxpool2d")


# -- batch normalization -------------------------------------------------------

def batchnorm(x: Tensor, gamma: Tensor, beta: Tensor,
              running_mean: np.ndarray | None = None,
              running_var: np.ndarray | None = None,
              eps: float = 1e-5, training: bool = True) -> Tensor:
    """Fused 1-d batchnorm over the batch axis of an (n, d) tensor.

    In training mode statistics come from the batch and gradients flow
    through them; the computed batch mean/var are exposed on the result as
    ``batch_stats`` for running-average updates. In eval mode the provided
    frozen statistics make this an affine map.
    """
    if x.ndim != 2:
        raise ShapeError(f"batchnorm expects an (n, d) tensor, got {x.shape}")
    d = x.shape[1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise ShapeError(
            f"batchnorm: parameter shapes {gamma.shape}/{beta.shape} != ({d},)"
        )

    if training:
        mu = x.data.mean(axis=0)
        xc = x.data - mu
        var = np.mean(xc * xc, axis=0)
    else:
        if running_mean is None or running_var is None:
            raise ValueError("batchnorm eval mode requires running statistics")
        mu, var = running_mean, running_var
        xc = x.data - mu

    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv_std
    data = xhat * gamma.data + beta.data
    n = x.shape[0]

    def backward(g):
        dgamma = (g * xhat).sum(axis=0)
        dbeta = g.sum(axis=0)
        dxhat = g * gamma.data
        if training:
            dx = (inv_std / n) * (
                n * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0)
            )
        else:
            dx = dxhat * inv_std
        return dx, dgamma, dbeta

    out = _result(data, (x, gamma, beta), backward, "batchnorm")
    if training:
        out.batch_stats = (mu, var)
    return out


# -- operator wiring -----------------------------------------------------------

Tensor.__add__ = add
Tensor.__radd__ = add
Tensor.__sub__ = sub
Tensor.__mul__ = mul
Tensor.__rmul__ = mul
Tensor.__neg__ = neg
Tensor.__matmul__ = matmul
Tensor.exp = exp
Tensor.log = log
Tensor.square = square
Tensor.sum = tsum
Tensor.mean = tmean
Tensor.reshape = reshape
Tensor.flatten = flatten
