"""Latent-space style transfer: bilinear content/style factorization and the
adaptive instance-norm transfer that provably keeps both factors intact.

Two variants are provided. "std_only" rescales by standard deviations only,
t = f_c / sigma(f_c) * sigma(f_s); "mean_std" (the default used for actual
stylization) additionally re-centers means. Under its own factorization each
variant is unbiased: the transferred features keep the content factor of the
content input and the style factor of the style input, up to the variance
floor. `verify_unbiased` measures exactly those residuals.
"""

import numpy as np
from dataclasses import dataclass

from .tensor import EPS_VAR, ShapeError, channel_stats

MODES = ("std_only", "mean_std")


def _check_mode(mode):
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


def _stats(f, eps):
    s = channel_stats(f, eps)
    return s.mean[:, :, None, None], s.std[:, :, None, None]


def content_factor(f, mode="mean_std", eps=EPS_VAR):
    """C(f): features normalized to unit per-channel std (and zero mean in
    mean_std mode)."""
    _check_mode(mode)
    mean, std = _stats(f, eps)
    if mode == "std_only":
        return f / std
    return (f - mean) / std


def style_factor(f, mode="mean_std", eps=EPS_VAR):
    """S(f): per-channel std, plus the mean in mean_std mode (zero otherwise)."""
    _check_mode(mode)
    stats = channel_stats(f, eps)
    if mode == "std_only":
        stats.mean = np.zeros_like(stats.mean)
    return stats


def adain(f_c, f_s, mode="mean_std", eps=EPS_VAR):
    """Transfer the style factor of f_s onto the content factor of f_c.

    Channel counts must match; spatial extents may differ (statistics of f_s
    are taken over its own grid).
    """
    out, _ = adain_with_cache(f_c, f_s, mode, eps)
    return out


def adain_with_cache(f_c, f_s, mode="mean_std", eps=EPS_VAR):
    _check_mode(mode)
    if f_c.shape[1] != f_s.shape[1]:
        raise ShapeError(f"channel mismatch: content has {f_c.shape[1]}, style has {f_s.shape[1]}")
    if f_c.shape[0] != f_s.shape[0]:
        raise ShapeError(f"batch mismatch: {f_c.shape[0]} vs {f_s.shape[0]}")
    mu_c, sd_c = _stats(f_c, eps)
    mu_s, sd_s = _stats(f_s, eps)
    if mode == "std_only":
        base = f_c / sd_c
        out = base * sd_s
    else:
        base = (f_c - mu_c) / sd_c
        out = base * sd_s + mu_s
    cache = (f_c, f_s, base, mu_c, sd_c, mu_s, sd_s, mode)
    return out, cache


def adain_backward(grad_out, cache):
    """Gradients of adain w.r.t. both inputs.

    `base` is the normalized content factor; the per-channel statistics are
    differentiated through (population variance, eps inside the sqrt).
    """
    f_c, f_s, base, mu_c, sd_c, mu_s, sd_s, mode = cache
    m_c = f_c.shape[2] * f_c.shape[3]
    m_s = f_s.shape[2] * f_s.shape[3]

    g_base = grad_out * sd_s
    if mode == "std_only":
        # base = f_c / sd_c
        s = (g_base * f_c).sum(axis=(2, 3), keepdims=True)
        grad_c = g_base / sd_c - s * (f_c - mu_c) / (m_c * sd_c ** 3)
        g_sd_s = (grad_out * base).sum(axis=(2, 3), keepdims=True)
        grad_s = g_sd_s * (f_s - mu_s) / (m_s * sd_s)
    else:
        # base = (f_c - mu_c) / sd_c: standard instance-norm backward
        mean_g = g_base.mean(axis=(2, 3), keepdims=True)
        mean_gb = (g_base * base).mean(axis=(2, 3), keepdims=True)
        grad_c = (g_base - mean_g - base * mean_gb) / sd_c
        g_sd_s = (grad_out * base).sum(axis=(2, 3), keepdims=True)
        g_mu_s = grad_out.sum(axis=(2, 3), keepdims=True)
        grad_s = g_sd_s * (f_s - mu_s) / (m_s * sd_s) + g_mu_s / m_s
    return grad_c, grad_s


@dataclass
class UnbiasednessReport:
    """Residuals of the factor-preservation identities, relative norms."""

    style_residual: float
    content_residual: float
    sigma_residual: float
    passed: bool


def _rel(delta, ref):
    num = float(np.linalg.norm(delta.astype(np.float64).ravel()))
    den = float(np.linalg.norm(ref.astype(np.float64).ravel()))
    return num / max(den, np.finfo(np.float64).tiny)


def verify_unbiased(f_c, f_s, mode="mean_std", tol=1e-3, eps=EPS_VAR, transfer_output=None):
    """Check that a transfer output keeps C(f_c) and S(f_s).

    With transfer_output=None the adain output itself is checked (this is the
    executable form of the unbiasedness theorem); passing a different tensor
    lets negative controls be scored the same way.
    """
    _check_mode(mode)
    f_cs = adain(f_c, f_s, mode, eps) if transfer_output is None else transfer_output

    sd_cs = channel_stats(f_cs, eps).std
    sd_s = channel_stats(f_s, eps).std
    sigma_residual = _rel(sd_cs - sd_s, sd_s)

    if mode == "std_only":
        style_residual = sigma_residual
    else:
        mu_cs = channel_stats(f_cs, eps).mean
        mu_s = channel_stats(f_s, eps).mean
        both_cs = np.stack([mu_cs, sd_cs])
        both_s = np.stack([mu_s, sd_s])
        style_residual = _rel(both_cs - both_s, both_s)

    c_cs = content_factor(f_cs, mode, eps)
    c_c = content_factor(f_c, mode, eps)
    content_residual = _rel(c_cs - c_c, c_c)

    passed = max(style_residual, content_residual, sigma_residual) <= tol
    return UnbiasednessReport(style_residual, content_residual, sigma_residual, passed)


def stylize(image_content, image_style, flow, mode="mean_std", eps=EPS_VAR):
    """Full transfer: encode both images, adain in latent space, decode.

    Returns (stylized_image, transferred_latent); the latent is what loss
    computations downstream need.
    """
    z_c = flow.forward(image_content)
    z_s = flow.forward(image_style)
    t = adain(z_c, z_s, mode, eps)
    return flow.inverse(t), t
