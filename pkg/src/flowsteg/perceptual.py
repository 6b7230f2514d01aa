"""Fixed feature extractor and the losses that shape stage-1 training.

The extractor is a frozen stack of four conv+leaky-rectifier layers with taps
after each one (widths 16/32/64/64, stride 2 between taps). Its weights are
drawn once from a fixed seed with fan-in-scaled unit-variance init and never
change, so extraction is bit-reproducible across processes. Deep random
features of this kind carry enough statistical structure to serve as a style
oracle at desk scale.

Losses:
  * flow-space content loss ||F(stylized) - t||_2, which the lossless decoder
    drives to ~0 structurally - kept as the leak diagnostic;
  * a perceptual content surrogate on the deepest tap, used for training;
  * the style loss: per-tap channel mean/std mismatches, summed over taps.
"""

import numpy as np

from .tensor import DEFAULT_DTYPE, EPS_VAR, ShapeError, channel_stats, conv2d, conv2d_backward, leaky_relu, leaky_relu_backward

EXTRACTOR_SEED = 0xC0FFEE


def _norm(x):
    return float(np.sqrt(np.sum(np.square(x.astype(np.float64)))))


def _unit(d, n):
    if n == 0.0:
        return np.zeros_like(d)
    return (d / n).astype(d.dtype)


class FeatureExtractor:
    """Frozen conv stack with L tap depths; weights are plain arrays, not
    trainable parameters."""

    def __init__(self, seed=EXTRACTOR_SEED, in_channels=3, widths=(16, 32, 64, 64),
                 slope=0.2, dtype=DEFAULT_DTYPE):
        rng = np.random.default_rng(seed)
        self.seed = seed
        self.slope = slope
        self.weights = []
        self.biases = []
        self.strides = []
        cin = in_channels
        for i, cout in enumerate(widths):
            fan_in = cin * 9
            w = (rng.standard_normal((cout, cin, 3, 3)) * np.sqrt(2.0 / fan_in)).astype(dtype)
            self.weights.append(w)
            self.biases.append(np.zeros(cout, dtype=dtype))
            self.strides.append(1 if i == 0 else 2)
            cin = cout
        self.depth = len(widths)

    def cast(self, dtype):
        self.weights = [w.astype(dtype) for w in self.weights]
        self.biases = [b.astype(dtype) for b in self.biases]
        return self

    def _check(self, img):
        divisor = 2 ** (self.depth - 1)
        if img.shape[2] % divisor or img.shape[3] % divisor:
            raise ShapeError(f"image dims {img.shape[2]}x{img.shape[3]} not divisible by {divisor}")

    def taps(self, img):
        """Tap outputs, shallow to deep."""
        self._check(img)
        out = []
        x = img
        for w, b, s in zip(self.weights, self.biases, self.strides):
            x = leaky_relu(conv2d(x, w, b, stride=s, padding=1), self.slope)
            out.append(x)
        return out

    def taps_with_cache(self, img):
        self._check(img)
        out, caches = [], []
        x = img
        for w, b, s in zip(self.weights, self.biases, self.strides):
            pre = conv2d(x, w, b, stride=s, padding=1)
            caches.append((x, pre))
            x = leaky_relu(pre, self.slope)
            out.append(x)
        return out, caches

    def backward_image(self, tap_grads, caches):
        """Backprop tap gradients to the input image (weights are fixed, so
        only the input gradient is formed)."""
        grad = None
        for i in range(self.depth - 1, -1, -1):
            g = tap_grads[i]
            if grad is not None:
                g = grad if g is None else g + grad
            if g is None:
                continue
            x, pre = caches[i]
            g = leaky_relu_backward(pre, g, self.slope)
            grad, _, _ = conv2d_backward(x, self.weights[i], g, stride=self.strides[i], padding=1)
        return grad


def extract(img, fe):
    """Deterministic feature taps for an image, shallow to deep."""
    return fe.taps(img)


def content_loss(t, stylized, flow):
    """||F(stylized) - t||_2 with F the flow encoder.

    When `stylized` came out of the flow's own decoder this is pinned near
    zero by invertibility, independent of training state; any growth flags
    reconstruction leakage.
    """
    return _norm(flow.forward(stylized) - t)


def perceptual_content_loss(img_a, img_b, fe):
    """Euclidean distance between the deepest taps of the two images."""
    if img_a.shape != img_b.shape:
        raise ShapeError(f"image shapes differ: {img_a.shape} vs {img_b.shape}")
    return _norm(fe.taps(img_a)[-1] - fe.taps(img_b)[-1])


def style_loss(img_a, img_b, fe, eps=EPS_VAR):
    """Sum over taps of channel-mean and channel-std mismatch norms."""
    total = 0.0
    for ta, tb in zip(fe.taps(img_a), fe.taps(img_b)):
        sa, sb = channel_stats(ta, eps), channel_stats(tb, eps)
        total += _norm(sa.mean - sb.mean) + _norm(sa.std - sb.std)
    return total


def _stats_tap_grad(tap, other_stats, eps):
    """Gradient of ||mu-mu'|| + ||sd-sd'|| w.r.t. the tap, plus the two norms."""
    n, c, h, w = tap.shape
    m = h * w
    st = channel_stats(tap, eps)
    d_mu = st.mean - other_stats.mean
    d_sd = st.std - other_stats.std
    n_mu = _norm(d_mu)
    n_sd = _norm(d_sd)
    g_mu = _unit(d_mu, n_mu)[:, :, None, None]
    g_sd = _unit(d_sd, n_sd)[:, :, None, None]
    centered = tap - st.mean[:, :, None, None]
    grad = g_mu / m + g_sd * centered / (m * st.std[:, :, None, None])
    return grad.astype(tap.dtype), n_mu + n_sd


def perceptual_losses_with_grad(img_t, img_c, img_s, fe, lam_content=1.0, lam_style=10.0, eps=EPS_VAR):
    """Stage-1 objective pieces and their gradient w.r.t. the stylized image.

    Returns (content_term, style_term, grad) where grad is
    d(lam_content * content + lam_style * style)/d img_t. The extractor pass
    over img_t is shared between the two terms.
    """
    taps_t, caches = fe.taps_with_cache(img_t)
    taps_c = fe.taps(img_c)
    taps_s = fe.taps(img_s)

    d_deep = taps_t[-1] - taps_c[-1]
    loss_content = _norm(d_deep)

    tap_grads = [None] * fe.depth
    loss_style = 0.0
    for i in range(fe.depth):
        other = channel_stats(taps_s[i], eps)
        grad_i, part = _stats_tap_grad(taps_t[i], other, eps)
        loss_style += part
        tap_grads[i] = lam_style * grad_i
    tap_grads[-1] = tap_grads[-1] + lam_content * _unit(d_deep, loss_content)

    grad_img = fe.backward_image(tap_grads, caches)
    return loss_content, loss_style, grad_img
