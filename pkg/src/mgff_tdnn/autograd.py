"""Dense float64 tensors with reverse-mode automatic differentiation.

Only the primitives the embedding architecture needs are implemented:
elementwise arithmetic, matmul, 1-D/2-D (grouped, dilated, strided)
cross-correlation, reductions, concatenation, indexing, and the usual
activations.  Every operation records a backward closure on its output;
``Tensor.backward`` walks the graph in reverse topological order and
accumulates ``d(loss)/d(tensor)`` into ``.grad`` (repeated calls without
resetting keep accumulating).

Convolution is cross-correlation: no kernel flip.  ReLU's subgradient at 0
is 0.  Ties in max operations route the gradient to the first maximum.
All forward computation is deterministic numpy, double precision.
"""

from __future__ import annotations

from contextlib import contextmanager
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError

_grad_enabled = True


@contextmanager
def no_grad():
    """Disable graph construction inside the block (inference fast path)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    """N-dimensional float64 array with optional gradient tracking."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward_fn = None

    # -- basic introspection ------------------------------------------------

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
        return float(self.data.reshape(-1)[0])

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    def _accum(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    # -- autograd driver ----------------------------------------------------

    def backward(self) -> None:
        """Populate ``grad`` on every tracked tensor reachable from ``self``.

        ``self`` must hold a single value (a scalar loss).
        """
        if self.data.size != 1:
            raise DimensionError(
                f"backward requires a scalar, got shape {self.shape}"
            )
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
        self._accum(np.ones_like(self.data))
        for node in reversed(topo):
            if node._backward_fn is not None:
                node._backward_fn(node)

    # -- operator sugar -----------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __truediv__(self, other):
        return mul(self, power(_wrap(other), -1.0))

    def __rtruediv__(self, other):
        return mul(_wrap(other), power(self, -1.0))

    def __neg__(self):
        return mul(self, -1.0)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)

    # -- method forms of common ops ------------------------------------------

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 and isinstance(shape[0], (tuple, list)) else shape)

    def transpose(self):
        return transpose(self)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def max(self, axis=None, keepdims=False):
        return tmax(self, axis=axis, keepdims=keepdims)

    def relu(self):
        return relu(self)

    def sigmoid(self):
        return sigmoid(self)

    def exp(self):
        return exp(self)

    def log(self):
        return log(self)

    def sqrt(self):
        return power(self, 0.5)

    def take(self, indices, axis):
        return take(self, indices, axis)

    def clip(self, lo, hi):
        return clip(self, lo, hi)


def _wrap(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _node(data: np.ndarray, parents: tuple[Tensor, ...], backward_fn) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward_fn = backward_fn
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``g`` down to ``shape`` (inverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# -- elementwise ------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out_data = a.data + b.data

    def bw(node):
        if a.requires_grad:
            a._accum(_unbroadcast(node.grad, a.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(node.grad, b.shape))

    return _node(out_data, (a, b), bw)


def mul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out_data = a.data * b.data

    def bw(node):
        if a.requires_grad:
            a._accum(_unbroadcast(node.grad * b.data, a.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(node.grad * a.data, b.shape))

    return _node(out_data, (a, b), bw)


def power(a, exponent: float) -> Tensor:
    """``a ** exponent`` for a real exponent (a > 0 unless exponent is a
    non-negative integer)."""
    a = _wrap(a)
    exponent = float(exponent)
    out_data = a.data ** exponent

    def bw(node):
        if a.requires_grad:
            a._accum(node.grad * exponent * a.data ** (exponent - 1.0))

    return _node(out_data, (a,), bw)


def exp(a) -> Tensor:
    a = _wrap(a)
    out_data = np.exp(a.data)

    def bw(node):
        if a.requires_grad:
            a._accum(node.grad * out_data)

    return _node(out_data, (a,), bw)


def log(a) -> Tensor:
    a = _wrap(a)
    out_data = np.log(a.data)

    def bw(node):
        if a.requires_grad:
            a._accum(node.grad / a.data)

    return _node(out_data, (a,), bw)


def relu(a) -> Tensor:
    a = _wrap(a)
    out_data = np.maximum(a.data, 0.0)

    def bw(node):
        if a.requires_grad:
            a._accum(node.grad * (a.data > 0.0))

    return _node(out_data, (a,), bw)


def sigmoid(a) -> Tensor:
    a = _wrap(a)
    out_data = 1.0 / (1.0 + np.exp(-a.data))

    def bw(node):
        if a.requires_grad:
            a._accum(node.grad * out_data * (1.0 - out_data))

    return _node(out_data, (a,), bw)


def clip(a, lo: float, hi: float) -> Tensor:
    """Clamp values to [lo, hi]; gradient passes only where unclamped."""
    a = _wrap(a)
    out_data = np.clip(a.data, lo, hi)

    def bw(node):
        if a.requires_grad:
            inside = (a.data > lo) & (a.data < hi)
            a._accum(node.grad * inside)

    return _node(out_data, (a,), bw)


def maximum(a, b) -> Tensor:
    """Elementwise max; on ties the gradient goes to the first operand."""
    a, b = _wrap(a), _wrap(b)
    out_data = np.maximum(a.data, b.data)

    def bw(node):
        first = a.data >= b.data
        if a.requires_grad:
            a._accum(_unbroadcast(node.grad * first, a.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(node.grad * ~first, b.shape))

    return _node(out_data, (a, b), bw)


# -- reductions ---------------------------------------------------------------


def _norm_axes(axis, ndim: int) -> tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def _expand_reduced(g: np.ndarray, shape: tuple[int, ...], axes: tuple[int, ...],
                    keepdims: bool) -> np.ndarray:
    if not keepdims:
        for a in sorted(axes):
            g = np.expand_dims(g, a)
    return np.broadcast_to(g, shape)


def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _wrap(a)
    axes = _norm_axes(axis, a.ndim)
    out_data = a.data.sum(axis=axes, keepdims=keepdims)

    def bw(node):
        if a.requires_grad:
            a._accum(_expand_reduced(node.grad, a.shape, axes, keepdims))

    return _node(out_data, (a,), bw)


def tmean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _wrap(a)
    axes = _norm_axes(axis, a.ndim)
    count = int(np.prod([a.shape[i] for i in axes])) if axes else 1
    out_data = a.data.mean(axis=axes, keepdims=keepdims)

    def bw(node):
        if a.requires_grad:
            a._accum(_expand_reduced(node.grad, a.shape, axes, keepdims) / count)

    return _node(out_data, (a,), bw)


def tmax(a, axis=None, keepdims: bool = False) -> Tensor:
    """Max reduction; the gradient routes to the first maximum."""
    a = _wrap(a)
    if axis is None:
        out_data = a.data.max()

        def bw_all(node):
            if a.requires_grad:
                g = np.zeros_like(a.data)
                g[np.unravel_index(np.argmax(a.data), a.shape)] = node.grad
                a._accum(g)

        return _node(out_data, (a,), bw_all)

    ax = axis % a.ndim
    out_data = a.data.max(axis=ax, keepdims=keepdims)

    def bw(node):
        if a.requires_grad:
            idx = np.expand_dims(np.argmax(a.data, axis=ax), ax)
            g = node.grad if keepdims else np.expand_dims(node.grad, ax)
            local = np.zeros_like(a.data)
            np.put_along_axis(local, idx, g, ax)
            a._accum(local)

    return _node(out_data, (a,), bw)


# -- shape manipulation -------------------------------------------------------


def reshape(a, shape) -> Tensor:
    a = _wrap(a)
    out_data = a.data.reshape(shape)

    def bw(node):
        if a.requires_grad:
            a._accum(node.grad.reshape(a.shape))

    return _node(out_data, (a,), bw)


def transpose(a) -> Tensor:
    a = _wrap(a)
    if a.ndim != 2:
        raise DimensionError(f"transpose expects a 2-D tensor, got {a.shape}")
    out_data = a.data.T.copy()

    def bw(node):
        if a.requires_grad:
            a._accum(node.grad.T)

    return _node(out_data, (a,), bw)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    """Join tensors along ``axis``; all other extents must agree."""
    ts = [_wrap(t) for t in tensors]
    if not ts:
        raise DimensionError("concat of an empty list")
    ax = axis % ts[0].ndim
    base = list(ts[0].shape)
    for t in ts[1:]:
        other = list(t.shape)
        if len(other) != len(base) or any(
            o != b for i, (o, b) in enumerate(zip(other, base)) if i != ax
        ):
            raise DimensionError(
                f"concat shape mismatch along axis {ax}: {ts[0].shape} vs {t.shape}"
            )
    out_data = np.concatenate([t.data for t in ts], axis=ax)
    offsets = np.cumsum([0] + [t.shape[ax] for t in ts])

    def bw(node):
        for t, start, stop in zip(ts, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                sl = [slice(None)] * node.grad.ndim
                sl[ax] = slice(start, stop)
                t._accum(node.grad[tuple(sl)])

    return _node(out_data, tuple(ts), bw)


def getitem(a, key) -> Tensor:
    """Basic (slice/int) indexing."""
    a = _wrap(a)
    out_data = a.data[key]

    def bw(node):
        if a.requires_grad:
            g = np.zeros_like(a.data)
            g[key] += node.grad
            a._accum(g)

    return _node(np.array(out_data, copy=True), (a,), bw)


def take(a, indices, axis: int) -> Tensor:
    """Gather along one axis with an integer index array (repeats allowed)."""
    a = _wrap(a)
    idx = np.asarray(indices, dtype=np.intp)
    ax = axis % a.ndim
    out_data = np.take(a.data, idx, axis=ax)

    def bw(node):
        if a.requires_grad:
            g = np.zeros_like(a.data)
            key = [slice(None)] * a.ndim
            key[ax] = idx
            np.add.at(g, tuple(key), node.grad)
            a._accum(g)

    return _node(out_data, (a,), bw)


# -- linear maps --------------------------------------------------------------


def matmul(a, b) -> Tensor:
    """Matrix product for 1-D/2-D operands (no batching)."""
    a, b = _wrap(a), _wrap(b)
    if a.ndim > 2 or b.ndim > 2:
        raise DimensionError(
            f"matmul supports 1-D/2-D operands, got {a.shape} @ {b.shape}"
        )
    try:
        out_data = a.data @ b.data
    except ValueError as err:
        raise DimensionError(f"matmul shape mismatch: {a.shape} @ {b.shape}") from err

    def bw(node):
        g = node.grad
        ad, bd = a.data, b.data
        if a.requires_grad:
            if a.ndim == 1:
                a._accum(bd @ g if b.ndim == 2 else g * bd)
            elif b.ndim == 1:
                a._accum(np.outer(g, bd))
            else:
                a._accum(g @ bd.T)
        if b.requires_grad:
            if b.ndim == 1:
                b._accum(ad.T @ g if a.ndim == 2 else g * ad)
            elif a.ndim == 1:
                b._accum(np.outer(ad, g))
            else:
                b._accum(ad.T @ g)

    return _node(out_data, (a, b), bw)


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """``weight @ x (+ bias)`` for a 1-D input vector."""
    out = matmul(weight, x)
    return add(out, bias) if bias is not None else out


# -- convolution --------------------------------------------------------------


def _check_groups(c_in: int, c_out: int, groups: int, name: str) -> None:
    if groups < 1 or c_in % groups or c_out % groups:
        raise DimensionError(
            f"{name}: groups={groups} must divide in_channels={c_in} "
            f"and out_channels={c_out}"
        )


def conv1d(x: Tensor, weight: Tensor, bias: Tensor | None = None, *,
           stride: int = 1, dilation: int = 1, padding: int = 0,
           groups: int = 1) -> Tensor:
    """Grouped dilated 1-D cross-correlation.

    ``x`` is (C_in, T); ``weight`` is (C_out, C_in/groups, k).  Output frame
    t is ``bias[c] + sum_{i,j} w[c,i,j] * x_pad[i, t*stride + j*dilation]``.
    """
    x, weight = _wrap(x), _wrap(weight)
    if x.ndim != 2 or weight.ndim != 3:
        raise DimensionError(
            f"conv1d expects x (C,T) and weight (C_out,C_in/g,k), "
            f"got {x.shape} and {weight.shape}"
        )
    c_in, t_in = x.shape
    c_out, c_in_g, k = weight.shape
    _check_groups(c_in, c_out, groups, "conv1d")
    if c_in_g * groups != c_in:
        raise DimensionError(
            f"conv1d: input has {c_in} channels but weight expects "
            f"{c_in_g * groups}"
        )
    span = (k - 1) * dilation + 1
    t_pad = t_in + 2 * padding
    if t_pad < span:
        raise DimensionError(
            f"conv1d: padded length {t_pad} shorter than kernel span {span}"
        )
    t_out = (t_pad - span) // stride + 1

    xp = np.pad(x.data, ((0, 0), (padding, padding))) if padding else x.data
    idx = np.arange(k)[:, None] * dilation + np.arange(t_out)[None, :] * stride
    patches = xp[:, idx]                                    # (C_in, k, t_out)
    pg = patches.reshape(groups, c_in_g * k, t_out)
    wg = weight.data.reshape(groups, c_out // groups, c_in_g * k)
    out_data = np.matmul(wg, pg).reshape(c_out, t_out)
    if bias is not None:
        if bias.shape != (c_out,):
            raise DimensionError(f"conv1d: bias shape {bias.shape} != ({c_out},)")
        out_data = out_data + bias.data[:, None]

    def bw(node):
        g = node.grad.reshape(groups, c_out // groups, t_out)
        if weight.requires_grad:
            dw = np.matmul(g, pg.transpose(0, 2, 1))
            weight._accum(dw.reshape(weight.shape))
        if bias is not None and bias.requires_grad:
            bias._accum(node.grad.sum(axis=1))
        if x.requires_grad:
            dp = np.matmul(wg.transpose(0, 2, 1), g).reshape(c_in, k, t_out)
            gxp = np.zeros_like(xp)
            for j in range(k):
                off = j * dilation
                gxp[:, off:off + stride * t_out:stride] += dp[:, j, :]
            x._accum(gxp[:, padding:padding + t_in] if padding else gxp)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return _node(out_data, parents, bw)


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None, *,
           stride: tuple[int, int] = (1, 1), dilation: tuple[int, int] = (1, 1),
           padding: tuple[int, int] = (0, 0), groups: int = 1) -> Tensor:
    """Grouped 2-D cross-correlation with per-axis stride/dilation/padding.

    ``x`` is (C_in, F, T); ``weight`` is (C_out, C_in/groups, k_f, k_t).
    """
    x, weight = _wrap(x), _wrap(weight)
    if x.ndim != 3 or weight.ndim != 4:
        raise DimensionError(
            f"conv2d expects x (C,F,T) and weight (C_out,C_in/g,kf,kt), "
            f"got {x.shape} and {weight.shape}"
        )
    c_in, f_in, t_in = x.shape
    c_out, c_in_g, kf, kt = weight.shape
    _check_groups(c_in, c_out, groups, "conv2d")
    if c_in_g * groups != c_in:
        raise DimensionError(
            f"conv2d: input has {c_in} channels but weight expects "
            f"{c_in_g * groups}"
        )
    sf, st = stride
    df, dt = dilation
    pf, pt = padding
    span_f = (kf - 1) * df + 1
    span_t = (kt - 1) * dt + 1
    fp, tp = f_in + 2 * pf, t_in + 2 * pt
    if fp < span_f or tp < span_t:
        raise DimensionError(
            f"conv2d: padded extents ({fp},{tp}) shorter than kernel span "
            f"({span_f},{span_t})"
        )
    f_out = (fp - span_f) // sf + 1
    t_out = (tp - span_t) // st + 1

    xp = np.pad(x.data, ((0, 0), (pf, pf), (pt, pt))) if (pf or pt) else x.data
    fidx = np.arange(kf)[:, None] * df + np.arange(f_out)[None, :] * sf
    tidx = np.arange(kt)[:, None] * dt + np.arange(t_out)[None, :] * st
    patches = xp[:, fidx[:, None, :, None], tidx[None, :, None, :]]
    # (C_in, kf, kt, f_out, t_out)
    pg = patches.reshape(groups, c_in_g * kf * kt, f_out * t_out)
    wg = weight.data.reshape(groups, c_out // groups, c_in_g * kf * kt)
    out_data = np.matmul(wg, pg).reshape(c_out, f_out, t_out)
    if bias is not None:
        if bias.shape != (c_out,):
            raise DimensionError(f"conv2d: bias shape {bias.shape} != ({c_out},)")
        out_data = out_data + bias.data[:, None, None]

    def bw(node):
        g = node.grad.reshape(groups, c_out // groups, f_out * t_out)
        if weight.requires_grad:
            dw = np.matmul(g, pg.transpose(0, 2, 1))
            weight._accum(dw.reshape(weight.shape))
        if bias is not None and bias.requires_grad:
            bias._accum(node.grad.sum(axis=(1, 2)))
        if x.requires_grad:
            dp = np.matmul(wg.transpose(0, 2, 1), g)
            dp = dp.reshape(c_in, kf, kt, f_out, t_out)
            gxp = np.zeros_like(xp)
            for i in range(kf):
                fo = i * df
                for j in range(kt):
                    to = j * dt
                    gxp[:, fo:fo + sf * f_out:sf, to:to + st * t_out:st] += dp[:, i, j]
            if pf or pt:
                gxp = gxp[:, pf:pf + f_in, pt:pt + t_in]
            x._accum(gxp)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return _node(out_data, parents, bw)


def same_padding(kernel: int, dilation: int = 1) -> int:
    """Padding that preserves length at stride 1 (odd kernels only)."""
    if kernel % 2 == 0:
        raise DimensionError(
            f"same-length padding requires an odd kernel, got {kernel}"
        )
    return dilation * (kernel - 1) // 2


def stack_rows(tensors: Iterable[Tensor]) -> Tensor:
    """Stack equal-length vectors into a (N, D) matrix."""
    rows = [reshape(t, (1, t.size)) for t in tensors]
    return concat(rows, axis=0)


# -- gradient checking --------------------------------------------------------


def numerical_gradient(f, t: Tensor, step: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of scalar ``f()`` w.r.t. ``t``.

    ``f`` must re-run the forward pass from scratch; ``t.data`` is perturbed
    in place and restored.  Uses only forward evaluations, independent of
    the backward implementation.
    """
    grad = np.zeros_like(t.data)
    flat = t.data.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        hi = float(f())
        flat[i] = orig - step
        lo = float(f())
        flat[i] = orig
        gflat[i] = (hi - lo) / (2.0 * step)
    return grad


def gradient_gap(build_loss, tensors: Sequence[Tensor], step: float = 1e-5) -> float:
    """Worst relative error between analytic and numerical gradients.

    ``build_loss()`` constructs a fresh scalar loss.  The relative error
    per entry is |a - n| / max(|a|, |n|, 1e-4), so near-zero gradients are
    compared absolutely at the 1e-4 scale.
    """
    loss = build_loss()
    for t in tensors:
        t.grad = None
    loss.backward()
    worst = 0.0
    for t in tensors:
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        numeric = numerical_gradient(lambda: build_loss().item(), t, step)
        denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-4)
        worst = max(worst, float(np.max(np.abs(analytic - numeric) / denom)))
    return worst
