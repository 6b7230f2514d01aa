"""Reversible feature network: actnorm, invertible 1x1 convolution, additive
coupling, and space-to-channel squeezing, composed into blocks of eight steps.

The model maps images to latents (`forward`, the encoder F) and back
(`inverse`, the decoder G) without information loss: every layer has an exact
inverse. Training never needs a likelihood term, so no log-determinants are
tracked; what the layers do provide is a hand-written backward pass through
*both* directions, because the training losses backpropagate through the
decoder as well as the encoder.
"""

import numpy as np
from dataclasses import dataclass, field

from .tensor import DEFAULT_DTYPE, EPS_VAR, Conv2dLayer, Param, ShapeError

# Guard thresholds: an actnorm scale or a 1x1-conv determinant below these is
# treated as numerically singular rather than silently inverted.
MIN_ACTNORM_SCALE = 1e-8
MIN_INVCONV_DET = 1e-6


class SingularScale(RuntimeError):
    """Actnorm scale too close to zero to invert."""


class SingularMatrix(RuntimeError):
    """1x1 convolution matrix is (numerically) rank deficient."""


def squeeze(x, factor=2):
    """Space-to-channel rearrangement: (N, C, H, W) -> (N, C*f*f, H/f, W/f).

    Output channel c*f*f + dy*f + dx holds the sub-pixel at offset (dy, dx)
    of input channel c. Pure permutation; exactly inverted by `unsqueeze`.
    """
    n, c, h, w = x.shape
    if h % factor or w % factor:
        raise ShapeError(f"spatial dims {h}x{w} not divisible by squeeze factor {factor}")
    x = x.reshape(n, c, h // factor, factor, w // factor, factor)
    x = x.transpose(0, 1, 3, 5, 2, 4)
    return np.ascontiguousarray(x.reshape(n, c * factor * factor, h // factor, w // factor))


def unsqueeze(y, factor=2):
    """Exact inverse permutation of `squeeze`."""
    n, c, h, w = y.shape
    if c % (factor * factor):
        raise ShapeError(f"channel count {c} not divisible by {factor * factor}")
    y = y.reshape(n, c // (factor * factor), factor, factor, h, w)
    y = y.transpose(0, 1, 4, 2, 5, 3)
    return np.ascontiguousarray(y.reshape(n, c // (factor * factor), h * factor, w * factor))


class ActNorm:
    """Per-channel affine transform with data-dependent initialization.

    Before `initialize` runs, scale=1 and bias=0 (identity). Initialization
    sets them so the first batch comes out zero-mean/unit-std per channel.
    """

    def __init__(self, label, channels, dtype=DEFAULT_DTYPE):
        self.label = label
        self.scale = Param(label + ".actnorm.scale", np.ones(channels, dtype=dtype))
        self.bias = Param(label + ".actnorm.bias", np.zeros(channels, dtype=dtype))
        self.initialized = False

    def params(self):
        return [self.scale, self.bias]

    def cast(self, dtype):
        self.scale.cast(dtype)
        self.bias.cast(dtype)

    def initialize(self, x):
        # Stats over batch and space together, per channel.
        mean = x.mean(axis=(0, 2, 3), dtype=np.float64)
        var = np.square(x - mean.reshape(1, -1, 1, 1).astype(x.dtype)).mean(axis=(0, 2, 3), dtype=np.float64)
        std = np.sqrt(var + EPS_VAR)
        self.scale.value[...] = (1.0 / std).astype(self.scale.value.dtype)
        self.bias.value[...] = (-mean / std).astype(self.bias.value.dtype)
        self.initialized = True

    def _w(self):
        return self.scale.value.reshape(1, -1, 1, 1)

    def _b(self):
        return self.bias.value.reshape(1, -1, 1, 1)

    def forward(self, x):
        return self._w() * x + self._b()

    def backward_forward(self, grad_y, cache):
        x = cache
        self.scale.grad += (grad_y * x).sum(axis=(0, 2, 3))
        self.bias.grad += grad_y.sum(axis=(0, 2, 3))
        return grad_y * self._w()

    def inverse(self, y):
        if np.min(np.abs(self.scale.value)) < MIN_ACTNORM_SCALE:
            raise SingularScale(f"{self.label}: actnorm scale below {MIN_ACTNORM_SCALE}")
        return (y - self._b()) / self._w()

    def backward_inverse(self, grad_x, cache):
        # x = (y - b) / w, cache holds the computed x.
        x = cache
        gw = grad_x / self._w()
        self.scale.grad += -(gw * x).sum(axis=(0, 2, 3))
        self.bias.grad += -gw.sum(axis=(0, 2, 3))
        return gw


class InvConv:
    """Learnable 1x1 convolution y = M x applied at every spatial site.

    M starts as a uniformly random orthogonal matrix (|det| = 1) and stays a
    free matrix; the inverse pass solves the linear system (LU) instead of
    keeping a stored inverse.
    """

    def __init__(self, label, channels, rng=None, dtype=DEFAULT_DTYPE):
        if rng is None:
            m = np.eye(channels, dtype=dtype)
        else:
            a = rng.standard_normal((channels, channels))
            q, r = np.linalg.qr(a)
            q = q * np.sign(np.diag(r))
            m = q.astype(dtype)
        self.label = label
        self.matrix = Param(label + ".invconv.matrix", m)

    def params(self):
        return [self.matrix]

    def cast(self, dtype):
        self.matrix.cast(dtype)

    def det(self):
        return float(np.linalg.det(self.matrix.value.astype(np.float64)))

    def _apply(self, m, x):
        n, c, h, w = x.shape
        flat = x.transpose(1, 0, 2, 3).reshape(c, -1)
        out = (m @ flat).reshape(c, n, h, w)
        return np.ascontiguousarray(out.transpose(1, 0, 2, 3))

    def forward(self, x):
        m = self.matrix.value
        if x.shape[1] != m.shape[0]:
            raise ShapeError(f"{self.label}: matrix is {m.shape[0]}x{m.shape[0]}, tensor has {x.shape[1]} channels")
        return self._apply(m, x)

    @staticmethod
    def _site_outer(g, x):
        # sum over batch and space of g x^T, one (C, C) gemm
        c = g.shape[1]
        gf = g.transpose(1, 0, 2, 3).reshape(c, -1)
        xf = x.transpose(1, 0, 2, 3).reshape(c, -1)
        return gf @ xf.T

    def backward_forward(self, grad_y, cache):
        x = cache
        self.matrix.grad += self._site_outer(grad_y, x)
        return self._apply(self.matrix.value.T, grad_y)

    def inverse(self, y):
        m = self.matrix.value
        if y.shape[1] != m.shape[0]:
            raise ShapeError(f"{self.label}: matrix is {m.shape[0]}x{m.shape[0]}, tensor has {y.shape[1]} channels")
        if abs(self.det()) < MIN_INVCONV_DET:
            raise SingularMatrix(f"{self.label}: |det M| below {MIN_INVCONV_DET}")
        n, c, h, w = y.shape
        flat = y.transpose(1, 0, 2, 3).reshape(c, -1)
        out = np.linalg.solve(m, flat).reshape(c, n, h, w)
        return np.ascontiguousarray(out.transpose(1, 0, 2, 3))

    def backward_inverse(self, grad_x, cache):
        # x = M^-1 y: dL/dy = M^-T g, dL/dM = -(M^-T g) x^T summed over sites.
        x = cache
        m = self.matrix.value
        n, c, h, w = grad_x.shape
        flat = grad_x.transpose(1, 0, 2, 3).reshape(c, -1)
        gy = np.linalg.solve(m.T, flat).reshape(c, n, h, w)
        gy = np.ascontiguousarray(gy.transpose(1, 0, 2, 3))
        self.matrix.grad += -self._site_outer(gy, x)
        return gy


class CouplingSubnet:
    """Three-conv stack NN(.) inside the additive coupling.

    3x3 -> 1x1 -> 3x3, hidden width W_h, ReLU between, final layer
    zero-initialized so the coupling starts as an exact identity.
    """

    def __init__(self, label, channels_half, hidden, rng=None, dtype=DEFAULT_DTYPE):
        mk = lambda i, cin, cout, k, init: Conv2dLayer(
            f"{label}.nn.conv{i}", cin, cout, k, padding=k // 2, slope=0.0 if i < 2 else None,
            init=init, rng=rng, dtype=dtype)
        hidden_init = "scaled" if rng is not None else "zero"
        self.convs = [
            mk(0, channels_half, hidden, 3, hidden_init),
            mk(1, hidden, hidden, 1, hidden_init),
            mk(2, hidden, channels_half, 3, "zero"),
        ]

    def params(self):
        return [p for c in self.convs for p in c.params()]

    def cast(self, dtype):
        for c in self.convs:
            c.cast(dtype)

    def forward(self, x):
        for c in self.convs:
            x = c.forward(x)
        return x

    def forward_with_cache(self, x):
        caches = []
        for c in self.convs:
            x, cache = c.forward_with_cache(x)
            caches.append(cache)
        return x, caches

    def backward(self, grad_out, caches):
        for c, cache in zip(reversed(self.convs), reversed(caches)):
            grad_out = c.backward(grad_out, cache)
        return grad_out


class AdditiveCoupling:
    """y_a = x_a, y_b = x_b + NN(x_a) over channel halves; exactly invertible."""

    def __init__(self, label, channels, hidden, rng=None, dtype=DEFAULT_DTYPE):
        if channels % 2:
            raise ShapeError(f"{label}: additive coupling needs an even channel count, got {channels}")
        self.label = label
        self.channels = channels
        self.nn = CouplingSubnet(label, channels // 2, hidden, rng=rng, dtype=dtype)

    def params(self):
        return self.nn.params()

    def cast(self, dtype):
        self.nn.cast(dtype)

    def _split(self, x):
        if x.shape[1] != self.channels:
            raise ShapeError(f"{self.label}: expected {self.channels} channels, got {x.shape[1]}")
        half = self.channels // 2
        return x[:, :half], x[:, half:]

    def forward(self, x):
        xa, xb = self._split(x)
        return np.concatenate([xa, xb + self.nn.forward(xa)], axis=1)

    def forward_with_cache(self, x):
        xa, xb = self._split(x)
        r, caches = self.nn.forward_with_cache(xa)
        return np.concatenate([xa, xb + r], axis=1), caches

    def backward_forward(self, grad_y, caches):
        ga, gb = self._split(grad_y)
        return np.concatenate([ga + self.nn.backward(gb, caches), gb], axis=1)

    def inverse(self, y):
        ya, yb = self._split(y)
        return np.concatenate([ya, yb - self.nn.forward(ya)], axis=1)

    def inverse_with_cache(self, y):
        ya, yb = self._split(y)
        r, caches = self.nn.forward_with_cache(ya)
        return np.concatenate([ya, yb - r], axis=1), caches

    def backward_inverse(self, grad_x, caches):
        # x_b = y_b - NN(y_a): the subnet sees the gradient with flipped sign.
        ga, gb = self._split(grad_x)
        return np.concatenate([ga + self.nn.backward(-gb, caches), gb], axis=1)


@dataclass
class FlowConfig:
    in_channels: int = 3
    image_size: int = 64
    n_blocks: int = 2
    steps_per_block: int = 8
    squeeze_factor: int = 2
    hidden_width: int = 64

    def __post_init__(self):
        stride = self.squeeze_factor ** self.n_blocks
        if self.image_size % stride:
            raise ShapeError(f"image size {self.image_size} not divisible by {stride}")

    def latent_shape(self):
        f2 = self.squeeze_factor ** 2
        c = self.in_channels * f2 ** self.n_blocks
        s = self.image_size // self.squeeze_factor ** self.n_blocks
        return (c, s, s)

    def block_channels(self):
        f2 = self.squeeze_factor ** 2
        return [self.in_channels * f2 ** (b + 1) for b in range(self.n_blocks)]


class FlowModel:
    """Stack of blocks, each a squeeze followed by eight (actnorm, 1x1 conv,
    additive coupling) steps. `forward` is the lossless encoder, `inverse`
    the decoder; the two are exact inverses of each other.

    Constructed with rng=None the model is a pure permutation (identity
    1x1 convs, zero couplings, identity actnorm): useful as a structural
    reference. With an rng, 1x1 convs are random orthogonal and the coupling
    hidden layers get scaled random weights (final layers stay zero, so the
    model is still spatially identity-like at init).
    """

    def __init__(self, config: FlowConfig, rng=None, dtype=DEFAULT_DTYPE):
        self.config = config
        self.dtype = dtype
        self.blocks = []
        for b, channels in enumerate(config.block_channels()):
            steps = []
            for s in range(config.steps_per_block):
                label = f"flow.block{b}.step{s}"
                steps.append((
                    ActNorm(label, channels, dtype=dtype),
                    InvConv(label, channels, rng=rng, dtype=dtype),
                    AdditiveCoupling(label, channels, config.hidden_width, rng=rng, dtype=dtype),
                ))
            self.blocks.append(steps)

    # -- parameter plumbing ---------------------------------------------

    def params(self):
        out = []
        for steps in self.blocks:
            for actnorm, invconv, coupling in steps:
                out.extend(actnorm.params())
                out.extend(invconv.params())
                out.extend(coupling.params())
        return out

    def invconvs(self):
        return [invconv for steps in self.blocks for _, invconv, _ in steps]

    def cast(self, dtype):
        self.dtype = dtype
        for steps in self.blocks:
            for layer in steps:
                for part in layer:
                    part.cast(dtype)
        return self

    def state_dict(self):
        state = {p.name: p.value for p in self.params()}
        for steps in self.blocks:
            for actnorm, _, _ in steps:
                state[actnorm.scale.name.replace(".scale", ".initialized")] = np.array(
                    [1.0 if actnorm.initialized else 0.0], dtype=np.float32)
        return state

    def load_state(self, state):
        expected = self.state_dict()
        unknown = set(state) - set(expected)
        missing = set(expected) - set(state)
        if unknown or missing:
            raise KeyError(f"state mismatch: unknown={sorted(unknown)}, missing={sorted(missing)}")
        by_name = {p.name: p for p in self.params()}
        for name, value in state.items():
            if name.endswith(".initialized"):
                continue
            param = by_name[name]
            if param.value.shape != value.shape:
                raise ShapeError(f"{name}: checkpoint shape {value.shape} != model shape {param.value.shape}")
            param.value[...] = value.astype(param.value.dtype)
        for steps in self.blocks:
            for actnorm, _, _ in steps:
                flag = state[actnorm.scale.name.replace(".scale", ".initialized")]
                actnorm.initialized = bool(float(flag.reshape(-1)[0]) != 0.0)

    # -- data-dependent init ----------------------------------------------

    def initialize_actnorm(self, batch):
        """Run a forward pass, initializing each actnorm on its incoming batch."""
        x = batch.astype(self.dtype, copy=False)
        for steps in self.blocks:
            x = squeeze(x, self.config.squeeze_factor)
            for actnorm, invconv, coupling in steps:
                if not actnorm.initialized:
                    actnorm.initialize(x)
                x = coupling.forward(invconv.forward(actnorm.forward(x)))
        return x

    # -- encode / decode ---------------------------------------------------

    def forward(self, x):
        for steps in self.blocks:
            x = squeeze(x, self.config.squeeze_factor)
            for actnorm, invconv, coupling in steps:
                x = coupling.forward(invconv.forward(actnorm.forward(x)))
        return x

    def inverse(self, z):
        for steps in reversed(self.blocks):
            for actnorm, invconv, coupling in reversed(steps):
                z = actnorm.inverse(invconv.inverse(coupling.inverse(z)))
            z = unsqueeze(z, self.config.squeeze_factor)
        return z

    # -- traced passes for training ----------------------------------------

    def forward_trace(self, x):
        trace = []
        for steps in self.blocks:
            x = squeeze(x, self.config.squeeze_factor)
            for actnorm, invconv, coupling in steps:
                a_in = x
                x = actnorm.forward(x)
                i_in = x
                x = invconv.forward(x)
                x, nn_cache = coupling.forward_with_cache(x)
                trace.append((a_in, i_in, nn_cache))
        return x, trace

    def backward_forward(self, trace, grad_z):
        it = iter(reversed(trace))
        g = grad_z
        for steps in reversed(self.blocks):
            for actnorm, invconv, coupling in reversed(steps):
                a_in, i_in, nn_cache = next(it)
                g = coupling.backward_forward(g, nn_cache)
                g = invconv.backward_forward(g, i_in)
                g = actnorm.backward_forward(g, a_in)
            g = unsqueeze(g, self.config.squeeze_factor)
        return g

    def inverse_trace(self, z):
        trace = []
        for steps in reversed(self.blocks):
            for actnorm, invconv, coupling in reversed(steps):
                z, nn_cache = coupling.inverse_with_cache(z)
                z = invconv.inverse(z)
                i_out = z
                z = actnorm.inverse(z)
                trace.append((z, i_out, nn_cache))
            z = unsqueeze(z, self.config.squeeze_factor)
        return z, trace

    def backward_inverse(self, trace, grad_x):
        it = iter(reversed(trace))
        g = grad_x
        for steps in self.blocks:
            g = squeeze(g, self.config.squeeze_factor)
            for actnorm, invconv, coupling in steps:
                a_out, i_out, nn_cache = next(it)
                g = actnorm.backward_inverse(g, a_out)
                g = invconv.backward_inverse(g, i_out)
                g = coupling.backward_inverse(g, nn_cache)
        return g

    # -- guards --------------------------------------------------------------

    def check_determinants(self, threshold=MIN_INVCONV_DET):
        for invconv in self.invconvs():
            if abs(invconv.det()) < threshold:
                raise SingularMatrix(f"{invconv.label}: |det M| below {threshold}")
