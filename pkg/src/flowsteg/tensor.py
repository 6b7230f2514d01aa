"""Deterministic NCHW tensor math: convolution, channel statistics, and a
finite-difference gradient checker.

Everything here is plain numpy. Tensors are float32 by default; float64 is
used for verification runs (gradient checks, oracle comparisons). All
functions are pure and deterministic: no global RNG, no hidden state.
"""

import numpy as np
from dataclasses import dataclass

DEFAULT_DTYPE = np.float32

# Variance floor added under every square root where a standard deviation is
# computed; keeps constant channels finite.
EPS_VAR = 1e-5


class ShapeError(ValueError):
    """Raised when tensor shapes are inconsistent with an operation."""


def as_tensor(data, dtype=None):
    """Validate and return a 4-D (N, C, H, W) array of finite values.

    External inputs (decoded images, checkpoint payloads) go through this;
    NaN/Inf are rejected here so the numerics downstream never see them.
    """
    arr = np.asarray(data, dtype=dtype if dtype is not None else DEFAULT_DTYPE)
    if arr.ndim != 4:
        raise ShapeError(f"expected 4-D (N, C, H, W) data, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("tensor contains non-finite values")
    return np.ascontiguousarray(arr)


@dataclass
class ChannelStats:
    """Per (sample, channel) mean and standard deviation, each shaped (N, C)."""

    mean: np.ndarray
    std: np.ndarray


def channel_stats(x, eps=EPS_VAR):
    """Spatial mean and population std per (sample, channel).

    std = sqrt(mean((x - mean)^2) + eps); the 1/(H*W) normalizer matches the
    instance-normalization convention, and eps floors the variance so
    constant channels give std = sqrt(eps) instead of zero.
    """
    n, c, h, w = x.shape
    flat = x.reshape(n, c, h * w)
    mean = flat.mean(axis=2, dtype=np.float64)
    var = np.square(flat - mean[:, :, None].astype(x.dtype)).mean(axis=2, dtype=np.float64)
    std = np.sqrt(var + eps)
    return ChannelStats(mean.astype(x.dtype), std.astype(x.dtype))


def conv_output_size(size, ksize, stride, padding):
    return (size + 2 * padding - ksize) // stride + 1


def _im2col(x, kh, kw, stride, padding):
    """Lay out every sliding window as a row: (N*Ho*Wo, C*kh*kw)."""
    n, c, h, w = x.shape
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    hp, wp = x.shape[2:]
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    if ho < 1 or wo < 1:
        raise ShapeError(f"kernel {kh}x{kw} does not fit input {h}x{w} (padding={padding})")
    s0, s1, s2, s3 = x.strides
    view = np.lib.stride_tricks.as_strided(
        x,
        shape=(n, c, kh, kw, ho, wo),
        strides=(s0, s1, s2, s3, s2 * stride, s3 * stride),
        writeable=False,
    )
    cols = view.transpose(0, 4, 5, 1, 2, 3).reshape(n * ho * wo, c * kh * kw)
    return cols, ho, wo


def conv2d(x, kernel, bias=None, stride=1, padding=0):
    """Cross-correlation with zero padding (no kernel flip).

    x: (N, Cin, H, W); kernel: (Cout, Cin, kh, kw); bias: (Cout,) or None.
    Output spatial dims follow the usual floor formula.
    """
    n, cin, h, w = x.shape
    cout, kin, kh, kw = kernel.shape
    if kin != cin:
        raise ShapeError(f"kernel expects {kin} input channels, tensor has {cin}")
    if stride < 1 or padding < 0:
        raise ValueError("stride must be >= 1 and padding >= 0")
    cols, ho, wo = _im2col(x, kh, kw, stride, padding)
    wmat = kernel.reshape(cout, cin * kh * kw)
    out = cols @ wmat.T
    if bias is not None:
        out += bias
    return out.reshape(n, ho, wo, cout).transpose(0, 3, 1, 2)


def conv2d_backward(x, kernel, grad_out, stride=1, padding=0):
    """Gradients of conv2d w.r.t. input, kernel, and bias.

    grad_out: (N, Cout, Ho, Wo). Returns (grad_x, grad_kernel, grad_bias).
    grad_x is computed as a full correlation of the (zero-stuffed, for
    stride > 1) output gradient with the spatially flipped kernel; this keeps
    the whole backward pass on the same gemm path as the forward.
    """
    n, cin, h, w = x.shape
    cout, _, kh, kw = kernel.shape
    _, _, ho, wo = grad_out.shape

    gmat = grad_out.transpose(0, 2, 3, 1).reshape(n * ho * wo, cout)
    cols, _, _ = _im2col(x, kh, kw, stride, padding)
    grad_kernel = (gmat.T @ cols).reshape(kernel.shape)
    grad_bias = grad_out.sum(axis=(0, 2, 3))

    # Zero-stuff the gradient so a stride-1 full correlation undoes the stride.
    if stride > 1:
        gd = np.zeros((n, cout, (ho - 1) * stride + 1, (wo - 1) * stride + 1), dtype=grad_out.dtype)
        gd[:, :, ::stride, ::stride] = grad_out
    else:
        gd = grad_out
    flipped = kernel[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)
    grad_x_full = conv2d(gd, np.ascontiguousarray(flipped), stride=1, padding=kh - 1)
    # Strip the forward padding, then pad out rows/cols no window ever touched.
    grad_x_full = grad_x_full[:, :, padding : padding + h, padding : padding + w]
    gh, gw = grad_x_full.shape[2:]
    if gh < h or gw < w:
        grad_x_full = np.pad(grad_x_full, ((0, 0), (0, 0), (0, h - gh), (0, w - gw)))
    return grad_x_full, grad_kernel, grad_bias


def leaky_relu(x, slope=0.2):
    return np.where(x >= 0, x, slope * x)


def leaky_relu_backward(x, grad_out, slope=0.2):
    return np.where(x >= 0, grad_out, slope * grad_out)


class Param:
    """A named trainable array with an accumulated gradient buffer."""

    __slots__ = ("name", "value", "grad")

    def __init__(self, name, value):
        self.name = name
        self.value = np.ascontiguousarray(value)
        self.grad = np.zeros_like(self.value)

    def zero_grad(self):
        self.grad[...] = 0

    def cast(self, dtype):
        self.value = self.value.astype(dtype)
        self.grad = self.grad.astype(dtype)


class Conv2dLayer:
    """Conv + optional leaky rectifier, with hand-written backward.

    init: "scaled" draws weights with std sqrt(2 / fan_in) (keeps activation
    variance roughly unit through the stack), "zero" fills them with zeros.
    """

    def __init__(self, name, cin, cout, ksize, stride=1, padding=0, slope=None,
                 init="scaled", rng=None, dtype=DEFAULT_DTYPE):
        if init == "zero":
            w = np.zeros((cout, cin, ksize, ksize), dtype=dtype)
        else:
            fan_in = cin * ksize * ksize
            w = (rng.standard_normal((cout, cin, ksize, ksize)) * np.sqrt(2.0 / fan_in)).astype(dtype)
        self.weight = Param(name + ".weight", w)
        self.bias = Param(name + ".bias", np.zeros(cout, dtype=dtype))
        self.stride = stride
        self.padding = padding
        self.slope = slope

    def params(self):
        return [self.weight, self.bias]

    def cast(self, dtype):
        self.weight.cast(dtype)
        self.bias.cast(dtype)

    def forward(self, x):
        pre = conv2d(x, self.weight.value, self.bias.value, self.stride, self.padding)
        return leaky_relu(pre, self.slope) if self.slope is not None else pre

    def forward_with_cache(self, x):
        pre = conv2d(x, self.weight.value, self.bias.value, self.stride, self.padding)
        y = leaky_relu(pre, self.slope) if self.slope is not None else pre
        return y, (x, pre)

    def backward(self, grad_out, cache):
        """Accumulates parameter gradients, returns gradient w.r.t. input."""
        x, pre = cache
        if self.slope is not None:
            grad_out = leaky_relu_backward(pre, grad_out, self.slope)
        gx, gw, gb = conv2d_backward(x, self.weight.value, grad_out, self.stride, self.padding)
        self.weight.grad += gw
        self.bias.grad += gb
        return gx


def grad_check(fn, args, h=1e-5):
    """Max relative disagreement between analytic and central-difference grads.

    fn(*args) -> (loss, grads) where loss is a scalar and grads holds one
    array per argument (None to skip an argument). Each coordinate of each
    checked argument is perturbed by +-h in place; the difference quotient is
    formed in float64 against the actually-realized step, so float32
    arguments are handled correctly. Returns

        max |analytic - central| / max(1, |central|)

    over all coordinates. Raises on non-finite analytic gradients.
    """
    _, grads = fn(*args)
    worst = 0.0
    for arg, grad in zip(args, grads):
        if grad is None:
            continue
        if not np.all(np.isfinite(grad)):
            raise ValueError("non-finite analytic gradient")
        flat = arg.reshape(-1)
        gflat = np.asarray(grad).reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            hi = float(flat[i])
            loss_hi = float(fn(*args)[0])
            flat[i] = orig - h
            lo = float(flat[i])
            loss_lo = float(fn(*args)[0])
            flat[i] = orig
            central = (loss_hi - loss_lo) / (hi - lo)
            err = abs(float(gflat[i]) - central) / max(1.0, abs(central))
            worst = max(worst, err)
    return worst
