"""Metrics and the leakage experiments.

Three experiments quantify content leakage at desk scale:

  * drift: re-encode an image through its own pipeline repeatedly (self-style
    transfer at the bottleneck) and track distance to the original per round;
  * serial: chain several stylizations, comparing the final output against a
    direct stylization of the original content with the final style;
  * reverse: de-stylize and compare against the original content image.

Each runs both for the invertible-flow pipeline and for a deliberately lossy
conv autoencoder baseline (two max-pool stages, so spatial information is
destroyed by construction). Absolute numbers depend on training scale; the
assertable outcome is the ordering: the flow pipeline drifts less and scores
higher SSIM than the baseline.
"""

import numpy as np
from dataclasses import dataclass, field

from .tensor import DEFAULT_DTYPE, Conv2dLayer, ShapeError
from .transfer import adain
from .stego import embed, extract
from .pipeline import AdamState, adam_step


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def l2_metric(a, b):
    """Mean squared error, averaged per pixel over all samples/channels."""
    if a.shape != b.shape:
        raise ShapeError(f"image shapes differ: {a.shape} vs {b.shape}")
    d = a.astype(np.float64) - b.astype(np.float64)
    return float(np.mean(np.square(d)))


def linf_metric(a, b):
    return float(np.max(np.abs(a.astype(np.float64) - b.astype(np.float64))))


def gaussian_window(size=11, sigma=1.5):
    coords = np.arange(size, dtype=np.float64) - size // 2
    g = np.exp(-np.square(coords) / (2.0 * sigma * sigma))
    kernel = np.outer(g, g)
    return kernel / kernel.sum()


def _filter_valid(x, kernel):
    # channel-wise 'valid' correlation without leaving the gemm path
    from .tensor import conv2d
    n, c, h, w = x.shape
    flat = x.reshape(n * c, 1, h, w)
    k = kernel[None, None].astype(x.dtype)
    out = conv2d(flat, k)
    return out.reshape(n, c, out.shape[2], out.shape[3])


def ssim_metric(a, b, window_size=11, sigma=1.5, k1=0.01, k2=0.03, data_range=1.0):
    """Structural similarity with a Gaussian window, averaged over channels
    and valid positions."""
    if a.shape != b.shape:
        raise ShapeError(f"image shapes differ: {a.shape} vs {b.shape}")
    if a.shape[2] < window_size or a.shape[3] < window_size:
        raise ShapeError(f"image {a.shape[2]}x{a.shape[3]} smaller than the {window_size}-tap window")
    a = a.astype(np.float64)
    b = b.astype(np.float64)
    win = gaussian_window(window_size, sigma)
    mu_a = _filter_valid(a, win)
    mu_b = _filter_valid(b, win)
    var_a = _filter_valid(a * a, win) - mu_a * mu_a
    var_b = _filter_valid(b * b, win) - mu_b * mu_b
    cov = _filter_valid(a * b, win) - mu_a * mu_b
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


# ---------------------------------------------------------------------------
# lossy autoencoder baseline
# ---------------------------------------------------------------------------

def max_pool2(x):
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ShapeError(f"pooling needs even dims, got {h}x{w}")
    r = x.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h // 2, w // 2, 4)
    idx = r.argmax(axis=4)
    out = np.take_along_axis(r, idx[..., None], axis=4)[..., 0]
    return out, idx


def max_pool2_backward(grad_out, idx, input_shape):
    n, c, h, w = input_shape
    r = np.zeros((n, c, h // 2, w // 2, 4), dtype=grad_out.dtype)
    np.put_along_axis(r, idx[..., None], grad_out[..., None], axis=4)
    return r.reshape(n, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, h, w)


def upsample2(x):
    return np.repeat(np.repeat(x, 2, axis=2), 2, axis=3)


def upsample2_backward(grad_out):
    n, c, h, w = grad_out.shape
    return grad_out.reshape(n, c, h // 2, 2, w // 2, 2).sum(axis=(3, 5))


class LossyBaseline:
    """Conv autoencoder whose encoder pools twice: not invertible by design.

    The pooling throws away sub-sampling phase information, so even a well
    trained decoder cannot reconstruct exactly; iterating encode/decode
    accumulates error. Stylization happens at the bottleneck via adain.
    """

    def __init__(self, seed=0, widths=(16, 32), bottleneck=32, dtype=DEFAULT_DTYPE):
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0xBA5E]))
        w1, w2 = widths
        self.enc_layers = [
            Conv2dLayer("base.enc0", 3, w1, 3, padding=1, slope=0.2, rng=rng, dtype=dtype),
            Conv2dLayer("base.enc1", w1, w2, 3, padding=1, slope=0.2, rng=rng, dtype=dtype),
            Conv2dLayer("base.enc2", w2, bottleneck, 3, padding=1, slope=0.2, rng=rng, dtype=dtype),
        ]
        self.dec_layers = [
            Conv2dLayer("base.dec0", bottleneck, w2, 3, padding=1, slope=0.2, rng=rng, dtype=dtype),
            Conv2dLayer("base.dec1", w2, w1, 3, padding=1, slope=0.2, rng=rng, dtype=dtype),
            Conv2dLayer("base.dec2", w1, 3, 3, padding=1, rng=rng, dtype=dtype),
        ]

    def params(self):
        return [p for l in self.enc_layers + self.dec_layers for p in l.params()]

    def encode(self, x):
        h0 = self.enc_layers[0].forward(x)
        p0, _ = max_pool2(h0)
        h1 = self.enc_layers[1].forward(p0)
        p1, _ = max_pool2(h1)
        return self.enc_layers[2].forward(p1)

    def decode(self, z):
        h = self.dec_layers[0].forward(z)
        h = upsample2(h)
        h = self.dec_layers[1].forward(h)
        h = upsample2(h)
        return self.dec_layers[2].forward(h)

    def reconstruct(self, x):
        return self.decode(self.encode(x))

    def stylize(self, content, style, mode="mean_std"):
        zc = self.encode(content)
        zs = self.encode(style)
        return self.decode(adain(zc, zs, mode))

    # -- training (reconstruction MSE) -----------------------------------

    def _forward_train(self, x):
        caches = []
        h, c = self.enc_layers[0].forward_with_cache(x)
        caches.append(c)
        p0, i0 = max_pool2(h)
        shape0 = h.shape
        h, c = self.enc_layers[1].forward_with_cache(p0)
        caches.append(c)
        p1, i1 = max_pool2(h)
        shape1 = h.shape
        z, c = self.enc_layers[2].forward_with_cache(p1)
        caches.append(c)
        h, c = self.dec_layers[0].forward_with_cache(z)
        caches.append(c)
        u0 = upsample2(h)
        h, c = self.dec_layers[1].forward_with_cache(u0)
        caches.append(c)
        u1 = upsample2(h)
        y, c = self.dec_layers[2].forward_with_cache(u1)
        caches.append(c)
        pool_info = (i0, shape0, i1, shape1)
        return y, caches, pool_info

    def _backward_train(self, grad_y, caches, pool_info):
        i0, shape0, i1, shape1 = pool_info
        g = self.dec_layers[2].backward(grad_y, caches[5])
        g = upsample2_backward(g)
        g = self.dec_layers[1].backward(g, caches[4])
        g = upsample2_backward(g)
        g = self.dec_layers[0].backward(g, caches[3])
        g = self.enc_layers[2].backward(g, caches[2])
        g = max_pool2_backward(g, i1, shape1)
        g = self.enc_layers[1].backward(g, caches[1])
        g = max_pool2_backward(g, i0, shape0)
        return self.enc_layers[0].backward(g, caches[0])


def train_baseline(corpus, steps=300, lr=1e-3, batch=4, seed=0):
    """Fit the lossy baseline on reconstruction MSE over content+style images.

    Returns (model, per-step loss list). Seeded and deterministic.
    """
    model = LossyBaseline(seed=seed)
    pool = np.concatenate([corpus.content, corpus.style])
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x7A11]))
    state = AdamState()
    params = model.params()
    losses = []
    for _ in range(steps):
        x = pool[rng.integers(0, len(pool), size=batch)]
        y, caches, pool_info = model._forward_train(x)
        d = y - x
        loss = float(np.mean(np.square(d.astype(np.float64))))
        losses.append(loss)
        for p in params:
            p.zero_grad()
        model._backward_train((2.0 / d.size) * d.astype(y.dtype), caches, pool_info)
        adam_step(params, state, lr)
    return model, losses


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

@dataclass
class DriftCurve:
    """Per-round distances to the round-0 image; round 0 is (0, 1, 0)."""

    rounds: int
    l2: list = field(default_factory=list)
    ssim: list = field(default_factory=list)
    linf: list = field(default_factory=list)


def flow_reencoder(flow, mode="mean_std"):
    def step(img):
        z = flow.forward(img)
        return flow.inverse(adain(z, z, mode))
    return step


def baseline_reencoder(model, mode="mean_std"):
    def step(img):
        z = model.encode(img)
        return model.decode(adain(z, z, mode))
    return step


def drift_experiment(reencode, image, rounds=50):
    """Iterate image -> decode(self-style-adain(encode(image))) and measure
    drift from the original each round."""
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    curve = DriftCurve(rounds=rounds, l2=[0.0], ssim=[1.0], linf=[0.0])
    current = image
    for _ in range(rounds):
        current = reencode(current)
        curve.l2.append(l2_metric(current, image))
        curve.ssim.append(ssim_metric(current, image))
        curve.linf.append(linf_metric(current, image))
    return curve


@dataclass
class ExperimentResult:
    rows: list
    summary: dict


def _summarize(rows):
    summary = {}
    if rows:
        for key in rows[0]:
            summary["mean_" + key] = float(np.mean([r[key] for r in rows]))
    return summary


def serial_eval(flow, enc, dec, baseline, contents, styles, mode="mean_std", k_rounds=None):
    """Chained stylization: ours re-extracts the hidden content latent per round.

    For every content image, the chain applies the styles in order. Ours:
    extract the content latent from the current stego image, stylize it with
    the next style, re-embed. Baseline: stylize the previous output directly.
    The reference for each method is its own direct stylization of the
    original content with the final style. Also reports recovered-content
    fidelity for ours (decode of the extracted latent after the full chain).
    """
    if k_rounds is None:
        k_rounds = len(styles)
    chain = [styles[i % len(styles)] for i in range(k_rounds)]
    latent_channels = flow.config.latent_shape()[0]
    factor = flow.config.squeeze_factor
    rows = []
    for content in contents:
        img_c = content[None] if content.ndim == 3 else content
        # ours
        z = flow.forward(img_c)
        stego_img = None
        for j, style in enumerate(chain):
            style_img = style[None] if style.ndim == 3 else style
            if j > 0:
                z = extract(stego_img, dec, latent_channels, factor)
            stylized = flow.inverse(adain(z, flow.forward(style_img), mode))
            stego_img = embed(stylized, z, enc, factor)
        final_style = chain[-1][None] if chain[-1].ndim == 3 else chain[-1]
        z_true = flow.forward(img_c)
        reference = embed(flow.inverse(adain(z_true, flow.forward(final_style), mode)), z_true, enc, factor)
        recovered = flow.inverse(extract(stego_img, dec, latent_channels, factor))
        # baseline
        current = img_c
        for style in chain:
            style_img = style[None] if style.ndim == 3 else style
            current = baseline.stylize(current, style_img, mode)
        base_reference = baseline.stylize(img_c, final_style, mode)
        rows.append({
            "ours_l2": l2_metric(stego_img, reference),
            "ours_ssim": ssim_metric(stego_img, reference),
            "baseline_l2": l2_metric(current, base_reference),
            "baseline_ssim": ssim_metric(current, base_reference),
            "recovered_l2": l2_metric(recovered, img_c),
            "recovered_ssim": ssim_metric(recovered, img_c),
        })
    return ExperimentResult(rows=rows, summary=_summarize(rows))


def reverse_eval(flow, enc, dec, baseline, contents, styles, mode="mean_std", oracle_payload=False):
    """De-stylization: recover the content image from a stego stylized image.

    Ours: extract the hidden latent and decode it with the flow
    (oracle_payload=True bypasses the stego decoder and feeds the true latent,
    isolating flow fidelity). Baseline: the lossy autoencoder's reconstruction
    of its own stylized image.
    """
    latent_channels = flow.config.latent_shape()[0]
    factor = flow.config.squeeze_factor
    rows = []
    for i, content in enumerate(contents):
        img_c = content[None] if content.ndim == 3 else content
        style = styles[i % len(styles)]
        style_img = style[None] if style.ndim == 3 else style

        z_c = flow.forward(img_c)
        stylized = flow.inverse(adain(z_c, flow.forward(style_img), mode))
        stego_img = embed(stylized, z_c, enc, factor)
        z_hat = z_c if oracle_payload else extract(stego_img, dec, latent_channels, factor)
        recovered = flow.inverse(z_hat)

        base_stylized = baseline.stylize(img_c, style_img, mode)
        base_recovered = baseline.reconstruct(base_stylized)

        rows.append({
            "ours_l2": l2_metric(recovered, img_c),
            "ours_ssim": ssim_metric(recovered, img_c),
            "baseline_l2": l2_metric(base_recovered, img_c),
            "baseline_ssim": ssim_metric(base_recovered, img_c),
        })
    return ExperimentResult(rows=rows, summary=_summarize(rows))


# ---------------------------------------------------------------------------
# run-directory output
# ---------------------------------------------------------------------------

def write_rows_csv(path, rows):
    if not rows:
        return
    keys = list(rows[0].keys())
    with open(path, "w") as f:
        f.write(",".join(keys) + "\n")
        for row in rows:
            f.write(",".join(repr(row[k]) if isinstance(row[k], float) else str(row[k]) for k in keys) + "\n")


def write_summary(path, entries):
    with open(path, "w") as f:
        for key in sorted(entries):
            f.write(f"{key}={entries[key]}\n")


def drift_rows(curve):
    return [{"round": k, "l2": curve.l2[k], "ssim": curve.ssim[k], "linf": curve.linf[k]}
            for k in range(curve.rounds + 1)]
