"""Hiding content latents inside stylized images, and getting them back.

The payload (a flow latent) is first re-laid-out into image geometry by the
same space-to-channel permutation the flow uses, so payload pixels stay
spatially aligned with the cover. The encoder sees cover and payload
concatenated along channels and emits a residual that is added to the cover;
its output layer starts at zero, so an untrained encoder is a perfect cover
(stego image identical to the stylized image, bit for bit). The decoder maps
a stego image back to a payload grid.
"""

import numpy as np
from dataclasses import dataclass

from .tensor import DEFAULT_DTYPE, Conv2dLayer, ShapeError
from .flow import squeeze, unsqueeze

LEAKY_SLOPE = 0.2


def payload_to_grid(z, grid_channels=3, factor=2):
    """Permute a latent into image layout (grid_channels x H x W).

    Applies `unsqueeze` until the channel count matches; pure permutation,
    bit-exactly inverted by `grid_to_payload`, norm-preserving.
    """
    c = z.shape[1]
    out = z
    while out.shape[1] > grid_channels:
        if out.shape[1] % (factor * factor):
            raise ShapeError(f"cannot unsqueeze {out.shape[1]} channels down to {grid_channels}")
        out = unsqueeze(out, factor)
    if out.shape[1] != grid_channels:
        raise ShapeError(f"latent with {c} channels cannot form a {grid_channels}-channel grid")
    return out


def grid_to_payload(grid, latent_channels, factor=2):
    """Exact inverse of `payload_to_grid`."""
    out = grid
    while out.shape[1] < latent_channels:
        out = squeeze(out, factor)
    if out.shape[1] != latent_channels:
        raise ShapeError(f"grid with {grid.shape[1]} channels cannot form a {latent_channels}-channel latent")
    return out


class _ConvStack:
    def __init__(self, layers):
        self.layers = layers

    def params(self):
        return [p for layer in self.layers for p in layer.params()]

    def cast(self, dtype):
        for layer in self.layers:
            layer.cast(dtype)
        return self

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def forward_with_cache(self, x):
        caches = []
        for layer in self.layers:
            x, cache = layer.forward_with_cache(x)
            caches.append(cache)
        return x, caches

    def backward(self, grad_out, caches):
        for layer, cache in zip(reversed(self.layers), reversed(caches)):
            grad_out = layer.backward(grad_out, cache)
        return grad_out


class StegoEncoder(_ConvStack):
    """1 input + 3 hidden + 1 output conv layers; output zero-initialized."""

    def __init__(self, rng, width=32, image_channels=3, dtype=DEFAULT_DTYPE):
        cin = image_channels * 2
        layers = [Conv2dLayer("stego.enc.in", cin, width, 3, padding=1,
                              slope=LEAKY_SLOPE, rng=rng, dtype=dtype)]
        for i in range(3):
            layers.append(Conv2dLayer(f"stego.enc.hidden{i}", width, width, 3, padding=1,
                                      slope=LEAKY_SLOPE, rng=rng, dtype=dtype))
        layers.append(Conv2dLayer("stego.enc.out", width, image_channels, 3, padding=1,
                                  init="zero", dtype=dtype))
        super().__init__(layers)
        self.width = width


class StegoDecoder(_ConvStack):
    """1 input + 6 hidden + 1 output conv layers, stego image -> payload grid."""

    def __init__(self, rng, width=32, image_channels=3, dtype=DEFAULT_DTYPE):
        layers = [Conv2dLayer("stego.dec.in", image_channels, width, 3, padding=1,
                              slope=LEAKY_SLOPE, rng=rng, dtype=dtype)]
        for i in range(6):
            layers.append(Conv2dLayer(f"stego.dec.hidden{i}", width, width, 3, padding=1,
                                      slope=LEAKY_SLOPE, rng=rng, dtype=dtype))
        layers.append(Conv2dLayer("stego.dec.out", width, image_channels, 3, padding=1,
                                  rng=rng, dtype=dtype))
        super().__init__(layers)
        self.width = width


def embed(cover, z, enc, factor=2):
    """Hide latent z in the cover image: residual encoding over the channel-
    spliced (cover, payload-grid) pair."""
    grid = payload_to_grid(z, cover.shape[1], factor)
    if grid.shape[2:] != cover.shape[2:]:
        raise ShapeError(f"payload grid {grid.shape} does not match cover {cover.shape}")
    joint = np.concatenate([cover, grid], axis=1)
    return cover + enc.forward(joint)


def extract(stego_image, dec, latent_channels, factor=2):
    """Recover the hidden latent from a stego image."""
    grid = dec.forward(stego_image)
    return grid_to_payload(grid, latent_channels, factor)


def _norm(x):
    return float(np.sqrt(np.sum(np.square(x.astype(np.float64)))))


def image_loss(stego_image, cover):
    """Cover fidelity: Euclidean distance between stego image and cover."""
    return _norm(stego_image - cover)


def message_loss(z_hat, z):
    """Payload fidelity: Euclidean distance between recovered and true latent.

    The distance is invariant under the grid<->latent permutation, so it may
    be computed in either layout.
    """
    return _norm(z_hat - z)


@dataclass
class StegoLossWeights:
    lam_img: float = 1.0
    lam_msg: float = 1.0

    def __post_init__(self):
        if self.lam_img < 0 or self.lam_msg < 0:
            raise ValueError("loss weights must be non-negative")
        if self.lam_img == 0 and self.lam_msg == 0:
            raise ValueError("at least one loss weight must be positive")


def stego_loss(image_term, message_term, weights):
    return weights.lam_img * image_term + weights.lam_msg * message_term
