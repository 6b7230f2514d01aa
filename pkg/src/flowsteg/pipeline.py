"""Dataset ingestion, two-stage training, optimization, and checkpoints.

Stage 1 trains the flow on stylization batches with the perceptual content
surrogate plus the style-statistics loss, while logging the flow-space
content diagnostic (which invertibility pins near zero) at every step.
Stage 2 freezes the flow and trains the stego encoder/decoder pair on cover
fidelity + payload recovery; "joint" additionally backpropagates into the
flow with a style-anchor term so stylization quality does not collapse.

Everything is seeded and single-threaded: two runs with the same config
produce bit-identical checkpoints and logs. Optimizer moments are not part
of checkpoints (documented limitation); only named parameter tensors and a
plain-text config sidecar are persisted.
"""

import io
import os
import struct
import time
import warnings
from dataclasses import dataclass, field, fields, replace

import numpy as np
from PIL import Image

from .tensor import DEFAULT_DTYPE
from .flow import FlowConfig, FlowModel
from .transfer import adain_with_cache, adain_backward, MODES
from .perceptual import FeatureExtractor, content_loss, perceptual_losses_with_grad
from .stego import (StegoEncoder, StegoDecoder, StegoLossWeights, embed, extract,
                    payload_to_grid, grid_to_payload, image_loss, message_loss, stego_loss)

CHECKPOINT_MAGIC = b"STSG"
CHECKPOINT_VERSION = 1

# Divergence monitor: consecutive 50-step windows of the total loss must not
# grow by more than this factor.
DIVERGENCE_WINDOW = 50
DIVERGENCE_SLACK = 0.05


class ConfigError(ValueError):
    """Bad or inconsistent run configuration."""


class FormatError(ValueError):
    """Malformed checkpoint file."""


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""


STAGES = ("1", "2", "joint")


@dataclass
class TrainConfig:
    stage: str = "1"
    image_size: int = 64
    batch: int = 4
    steps: int = 200
    lr: float = 1e-4
    lam_content: float = 1.0
    lam_style: float = 10.0
    lam_img: float = 1.0
    lam_msg: float = 1.0
    lam_anchor: float = 1.0
    mode: str = "mean_std"
    seed: int = 0
    style_k: int = 10
    stego_width: int = 32
    flow: FlowConfig = None

    def __post_init__(self):
        self.stage = str(self.stage)
        if self.stage not in STAGES:
            raise ConfigError(f"stage must be one of {STAGES}, got {self.stage!r}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.flow is None:
            self.flow = FlowConfig(image_size=self.image_size)
        if self.flow.image_size != self.image_size:
            raise ConfigError("flow.image_size must equal image_size")
        if self.image_size % 8:
            raise ConfigError("image_size must be divisible by the extractor stride product (8)")


_FLOW_FIELDS = ("in_channels", "image_size", "n_blocks", "steps_per_block",
                "squeeze_factor", "hidden_width")


def config_to_dict(cfg):
    """Flatten a TrainConfig into string key=value pairs."""
    out = {}
    for f in fields(TrainConfig):
        if f.name == "flow":
            continue
        out[f.name] = str(getattr(cfg, f.name))
    for name in _FLOW_FIELDS:
        out["flow." + name] = str(getattr(cfg.flow, name))
    return out


def config_from_dict(items):
    """Rebuild a TrainConfig from flat string pairs (unknown keys rejected)."""
    kwargs = {}
    flow_kwargs = {}
    casts = {f.name: f.type for f in fields(TrainConfig)}
    for key, raw in items.items():
        if key.startswith("flow."):
            name = key[5:]
            if name not in _FLOW_FIELDS:
                raise ConfigError(f"unknown config key {key!r}")
            flow_kwargs[name] = int(raw)
        elif key in ("stage", "mode"):
            kwargs[key] = raw
        elif key in ("lr", "lam_content", "lam_style", "lam_img", "lam_msg", "lam_anchor"):
            kwargs[key] = float(raw)
        elif key in casts:
            kwargs[key] = int(raw)
        else:
            raise ConfigError(f"unknown config key {key!r}")
    flow = FlowConfig(**flow_kwargs) if flow_kwargs else None
    return TrainConfig(flow=flow, **kwargs)


# ---------------------------------------------------------------------------
# corpora
# ---------------------------------------------------------------------------

@dataclass
class Corpus:
    content: np.ndarray   # (N, 3, S, S), float32 in [0, 1]
    style: np.ndarray
    pairing_seed: int = 0


def to_uint8(img):
    """[0,1] float image -> 8-bit, round half up; clamping happens only here."""
    return np.floor(np.clip(img, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def save_image(path, img):
    """Write one (3, H, W) or (1, 3, H, W) image as PNG."""
    arr = np.asarray(img)
    if arr.ndim == 4:
        arr = arr[0]
    Image.fromarray(to_uint8(arr).transpose(1, 2, 0)).save(path, format="PNG")


def load_image(path, dtype=DEFAULT_DTYPE):
    """Read a PNG/JPEG into a (1, 3, H, W) float array in [0, 1]."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=dtype) / 255.0
    return arr.transpose(2, 0, 1)[None]


def _prepare_image(im, image_size, rng, dtype):
    w, h = im.size
    short = 2 * image_size
    if w <= h:
        new = (short, max(short, round(h * short / w)))
    else:
        new = (max(short, round(w * short / h)), short)
    im = im.convert("RGB").resize(new, resample=Image.BILINEAR)
    arr = np.asarray(im, dtype=dtype) / 255.0
    top = int(rng.integers(0, arr.shape[0] - image_size + 1))
    left = int(rng.integers(0, arr.shape[1] - image_size + 1))
    crop = arr[top:top + image_size, left:left + image_size]
    return crop.transpose(2, 0, 1)


def _load_dir(directory, image_size, rng, dtype):
    names = sorted(os.listdir(directory))
    if not names:
        raise ConfigError(f"no files in {directory}")
    images = []
    for name in names:
        path = os.path.join(directory, name)
        if not os.path.isfile(path):
            continue
        try:
            with Image.open(path) as im:
                images.append(_prepare_image(im, image_size, rng, dtype))
        except Exception as exc:  # undecodable file
            warnings.warn(f"skipping {path}: {exc}")
    if not images:
        raise ConfigError(f"no decodable images in {directory}")
    return np.stack(images)


def load_corpus(content_dir, style_dir, image_size=64, seed=0, dtype=DEFAULT_DTYPE):
    """Load and crop two image directories into a Corpus.

    Each image: shorter side resized to 2*image_size (bilinear, aspect kept),
    then a seeded random crop of image_size x image_size, values in [0, 1].
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xDA7A]))
    content = _load_dir(content_dir, image_size, rng, dtype)
    style = _load_dir(style_dir, image_size, rng, dtype)
    return Corpus(content=content, style=style, pairing_seed=seed)


def _synth_image(kind, rng, size, dtype):
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64) / max(size - 1, 1)
    img = np.empty((3, size, size), dtype=np.float64)
    if kind == 0:
        # directional gradients, one orientation per channel
        for c in range(3):
            ang = rng.uniform(0, 2 * np.pi)
            ramp = np.cos(ang) * xx + np.sin(ang) * yy
            img[c] = ramp + 0.15 * np.sin(2 * np.pi * rng.uniform(1, 3) * ramp)
    elif kind == 1:
        cell = int(rng.choice([4, 8, 16]))
        board = ((np.arange(size)[:, None] // cell + np.arange(size)[None, :] // cell) % 2)
        lo = rng.uniform(0.0, 0.45, size=3)
        hi = rng.uniform(0.55, 1.0, size=3)
        for c in range(3):
            img[c] = np.where(board, hi[c], lo[c])
    else:
        # band-limited noise: low-res field upsampled with a little smoothing
        k = int(rng.choice([4, 8]))
        low = rng.random((3, k, k))
        rep = size // k
        up = np.repeat(np.repeat(low, rep, axis=1), rep, axis=2)
        for _ in range(3):
            up = (up + np.roll(up, 1, axis=1) + np.roll(up, 1, axis=2) +
                  np.roll(np.roll(up, 1, axis=1), 1, axis=2)) / 4.0
        img = up
    lo, hi = img.min(), img.max()
    img = (img - lo) / (hi - lo) if hi > lo else np.full_like(img, 0.5)
    return img.astype(dtype)


def synth_corpus(seed=0, n=16, image_size=64, dtype=DEFAULT_DTYPE):
    """Deterministic procedural corpus; first half content, second half style."""
    rng = np.random.default_rng(seed)
    images = [_synth_image(i % 3, rng, image_size, dtype) for i in range(n)]
    half = n // 2
    return Corpus(content=np.stack(images[:half]), style=np.stack(images[half:]),
                  pairing_seed=seed)


def pair_styles(corpus, k=10, seed=0):
    """Assign each content image one of k styles sampled once per run.

    Returns (content_index, style_index) pairs, seeded and reproducible.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5741]))
    n_style = len(corpus.style)
    chosen = rng.choice(n_style, size=min(k, n_style), replace=False)
    return [(i, int(chosen[rng.integers(0, len(chosen))])) for i in range(len(corpus.content))]


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------

class AdamState:
    def __init__(self, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {}
        self.v = {}


def adam_step(params, state, lr, guard=None):
    """One adaptive-moment update over `params` (reads .grad in place).

    `guard` is called after the update; if it raises, parameters and moments
    are rolled back so the step never happened, and the error propagates.
    """
    saved = None
    if guard is not None:
        saved = ([p.value.copy() for p in params],
                 {k: v.copy() for k, v in state.m.items()},
                 {k: v.copy() for k, v in state.v.items()}, state.t)
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    for p in params:
        g = p.grad
        m = state.m.get(p.name)
        if m is None:
            m = np.zeros_like(p.value)
            v = np.zeros_like(p.value)
        else:
            v = state.v[p.name]
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * np.square(g)
        state.m[p.name] = m
        state.v[p.name] = v
        p.value -= (lr / bc1) * m / (np.sqrt(v / bc2) + state.eps)
    if guard is not None:
        try:
            guard()
        except Exception:
            values, ms, vs, t = saved
            for p, old in zip(params, values):
                p.value[...] = old
            state.m = ms
            state.v = vs
            state.t = t
            raise


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

@dataclass
class Checkpoint:
    tensors: dict
    config: dict = field(default_factory=dict)
    version: int = CHECKPOINT_VERSION


def save_checkpoint(ckpt, path):
    """Binary named-tensor container + plain-text config sidecar.

    Layout: magic "STSG", version u32, then per tensor (sorted by name):
    name-length u32, name bytes, rank u8, dims u32 x rank, float32 payload.
    Everything little-endian; the byte stream is a pure function of content.
    """
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    buf.write(struct.pack("<I", ckpt.version))
    for name in sorted(ckpt.tensors):
        data = np.ascontiguousarray(ckpt.tensors[name], dtype="<f4")
        encoded = name.encode("utf-8")
        buf.write(struct.pack("<I", len(encoded)))
        buf.write(encoded)
        buf.write(struct.pack("<B", data.ndim))
        buf.write(struct.pack(f"<{data.ndim}I", *data.shape))
        buf.write(data.tobytes())
    with open(path, "wb") as f:
        f.write(buf.getvalue())
    with open(str(path) + ".cfg", "w") as f:
        for key in sorted(ckpt.config):
            f.write(f"{key}={ckpt.config[key]}\n")


def _read_exact(f, n, what):
    data = f.read(n)
    if len(data) != n:
        raise FormatError(f"truncated checkpoint: wanted {n} bytes for {what} at offset {f.tell() - len(data)}")
    return data


def load_checkpoint(path):
    tensors = {}
    with open(path, "rb") as f:
        magic = _read_exact(f, 4, "magic")
        if magic != CHECKPOINT_MAGIC:
            raise FormatError(f"bad magic {magic!r}")
        version = struct.unpack("<I", _read_exact(f, 4, "version"))[0]
        if version != CHECKPOINT_VERSION:
            raise FormatError(f"unsupported version {version}")
        while True:
            head = f.read(4)
            if not head:
                break
            if len(head) != 4:
                raise FormatError(f"truncated checkpoint: partial record header at offset {f.tell() - len(head)}")
            (name_len,) = struct.unpack("<I", head)
            name = _read_exact(f, name_len, "name").decode("utf-8")
            (rank,) = struct.unpack("<B", _read_exact(f, 1, "rank"))
            dims = struct.unpack(f"<{rank}I", _read_exact(f, 4 * rank, "dims")) if rank else ()
            count = int(np.prod(dims, dtype=np.int64)) if rank else 1
            payload = _read_exact(f, 4 * count, f"payload of {name}")
            arr = np.frombuffer(payload, dtype="<f4").reshape(dims).copy()
            if not np.all(np.isfinite(arr)):
                raise FormatError(f"non-finite values in tensor {name}")
            tensors[name] = arr
    config = {}
    sidecar = str(path) + ".cfg"
    if os.path.exists(sidecar):
        with open(sidecar) as f:
            for line in f:
                line = line.strip()
                if line and not line.startswith("#"):
                    key, _, value = line.partition("=")
                    config[key] = value
    return Checkpoint(tensors=tensors, config=config)


def _split_prefix(tensors, prefix):
    return {k: v for k, v in tensors.items() if k.startswith(prefix)}


def restore_flow(ckpt, expected=None, dtype=DEFAULT_DTYPE):
    """Rebuild the flow model a checkpoint was trained with.

    `expected`, when given, is a FlowConfig the caller requires; a mismatch
    with the checkpoint's recorded config fails loudly.
    """
    cfg = config_from_dict(ckpt.config) if ckpt.config else None
    flow_cfg = cfg.flow if cfg else expected
    if flow_cfg is None:
        raise ConfigError("checkpoint carries no flow config and none was supplied")
    if expected is not None and cfg is not None and expected != cfg.flow:
        raise ConfigError(f"flow config mismatch: checkpoint has {cfg.flow}, caller expects {expected}")
    model = FlowModel(flow_cfg, rng=None, dtype=dtype)
    model.load_state(_split_prefix(ckpt.tensors, "flow."))
    return model


def _load_net(net, tensors):
    by_name = {p.name: p for p in net.params()}
    unknown = set(tensors) - set(by_name)
    missing = set(by_name) - set(tensors)
    if unknown or missing:
        raise KeyError(f"state mismatch: unknown={sorted(unknown)}, missing={sorted(missing)}")
    for name, value in tensors.items():
        p = by_name[name]
        if p.value.shape != value.shape:
            raise FormatError(f"{name}: shape {value.shape} != expected {p.value.shape}")
        p.value[...] = value.astype(p.value.dtype)
    return net


def has_stego(ckpt):
    return any(k.startswith("stego.") for k in ckpt.tensors)


def restore_stego(ckpt, dtype=DEFAULT_DTYPE):
    cfg = config_from_dict(ckpt.config) if ckpt.config else TrainConfig()
    rng = np.random.default_rng(0)
    enc = StegoEncoder(rng, width=cfg.stego_width, dtype=dtype)
    dec = StegoDecoder(rng, width=cfg.stego_width, dtype=dtype)
    _load_net(enc, _split_prefix(ckpt.tensors, "stego.enc."))
    _load_net(dec, _split_prefix(ckpt.tensors, "stego.dec."))
    return enc, dec


def fresh_stego(config, dtype=DEFAULT_DTYPE):
    """Untrained encoder/decoder pair (encoder is a perfect identity cover)."""
    ss = np.random.SeedSequence([config.seed, 0x57E6])
    rng_e, rng_d = [np.random.default_rng(s) for s in ss.spawn(2)]
    enc = StegoEncoder(rng_e, width=config.stego_width, dtype=dtype)
    dec = StegoDecoder(rng_d, width=config.stego_width, dtype=dtype)
    return enc, dec


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

@dataclass
class TrainResult:
    checkpoint: Checkpoint
    log: list
    diverged: bool = False


def _check_finite(value, step):
    if not np.isfinite(value):
        raise DivergenceError(f"non-finite loss at step {step}")


def _batch(corpus, pairs, rng, size):
    idx = rng.integers(0, len(pairs), size=size)
    content = np.stack([corpus.content[pairs[i][0]] for i in idx])
    style = np.stack([corpus.style[pairs[i][1]] for i in idx])
    return content, style


def _window_divergence(totals, window=DIVERGENCE_WINDOW, slack=DIVERGENCE_SLACK):
    """True when a consecutive `window`-step mean of the loss grows."""
    means = [float(np.mean(totals[i:i + window]))
             for i in range(0, len(totals) - window + 1, window)]
    return any(b > a * (1.0 + slack) for a, b in zip(means, means[1:]))


def train_stage1(config, corpus):
    """Optimize flow parameters on stylization batches.

    Logs per step: content term, style term, weighted total, and the
    flow-space diagnostic ||F(I_t) - t||_2 which must stay pinned near zero.
    """
    if config.stage != "1":
        raise ConfigError(f"train_stage1 called with stage={config.stage!r}")
    ss = np.random.SeedSequence([config.seed, 1])
    ss_flow, ss_batch = ss.spawn(2)
    flow = FlowModel(config.flow, rng=np.random.default_rng(ss_flow))
    fe = FeatureExtractor(in_channels=config.flow.in_channels)
    pairs = pair_styles(corpus, k=config.style_k, seed=config.seed)
    rng_batch = np.random.default_rng(ss_batch)

    first_c, first_s = _batch(corpus, pairs, rng_batch, config.batch)
    flow.initialize_actnorm(np.concatenate([first_c, first_s]))

    state = AdamState()
    params = flow.params()
    log = []
    for step in range(1, config.steps + 1):
        img_c, img_s = _batch(corpus, pairs, rng_batch, config.batch)
        z_c, trace_c = flow.forward_trace(img_c)
        z_s, trace_s = flow.forward_trace(img_s)
        t, a_cache = adain_with_cache(z_c, z_s, config.mode)
        img_t, trace_g = flow.inverse_trace(t)

        loss_c, loss_s, grad_t = perceptual_losses_with_grad(
            img_t, img_c, img_s, fe, config.lam_content, config.lam_style)
        total = config.lam_content * loss_c + config.lam_style * loss_s
        diagnostic = content_loss(t, img_t, flow)
        _check_finite(total, step)

        for p in params:
            p.zero_grad()
        g_latent = flow.backward_inverse(trace_g, grad_t)
        g_zc, g_zs = adain_backward(g_latent, a_cache)
        flow.backward_forward(trace_c, g_zc)
        flow.backward_forward(trace_s, g_zs)
        adam_step(params, state, config.lr, guard=flow.check_determinants)

        log.append({"step": step, "loss_content": loss_c, "loss_style": loss_s,
                    "loss_total": total, "flow_diagnostic": diagnostic})

    ckpt = Checkpoint(tensors=flow.state_dict(), config=config_to_dict(config))
    return TrainResult(checkpoint=ckpt, log=log, diverged=False)


def train_stage2(config, corpus, stage1_ckpt):
    """Train the stego pair over freshly stylized covers.

    stage="2" keeps flow parameters bit-identical to the input checkpoint;
    stage="joint" also updates the flow, with a style-anchor term weighted by
    lam_anchor guarding stylization quality.
    """
    if config.stage not in ("2", "joint"):
        raise ConfigError(f"train_stage2 called with stage={config.stage!r}")
    if stage1_ckpt is None:
        raise ConfigError("stage 2 needs a stage-1 checkpoint")
    joint = config.stage == "joint"

    flow = restore_flow(stage1_ckpt, expected=config.flow)
    fe = FeatureExtractor(in_channels=config.flow.in_channels)
    enc, dec = fresh_stego(config)
    weights = StegoLossWeights(config.lam_img, config.lam_msg)
    pairs = pair_styles(corpus, k=config.style_k, seed=config.seed)
    rng_batch = np.random.default_rng(np.random.SeedSequence([config.seed, 2]))

    latent_channels = config.flow.latent_shape()[0]
    state = AdamState()
    params = enc.params() + dec.params() + (flow.params() if joint else [])
    guard = flow.check_determinants if joint else None
    log = []

    for step in range(1, config.steps + 1):
        img_c, img_s = _batch(corpus, pairs, rng_batch, config.batch)
        if joint:
            z_c, trace_c = flow.forward_trace(img_c)
            z_s, trace_s = flow.forward_trace(img_s)
            t, a_cache = adain_with_cache(z_c, z_s, config.mode)
            img_t, trace_g = flow.inverse_trace(t)
        else:
            z_c = flow.forward(img_c)
            z_s = flow.forward(img_s)
            t, _ = adain_with_cache(z_c, z_s, config.mode)
            img_t = flow.inverse(t)

        grid = payload_to_grid(z_c, img_t.shape[1], config.flow.squeeze_factor)
        joint_in = np.concatenate([img_t, grid], axis=1)
        residual, enc_caches = enc.forward_with_cache(joint_in)
        img_e = img_t + residual
        grid_hat, dec_caches = dec.forward_with_cache(img_e)
        z_hat = grid_to_payload(grid_hat, latent_channels, config.flow.squeeze_factor)

        loss_img = image_loss(img_e, img_t)
        loss_msg = message_loss(z_hat, z_c)
        total = stego_loss(loss_img, loss_msg, weights)
        record = {"step": step, "loss_image": loss_img, "loss_message": loss_msg,
                  "loss_total": total}

        for p in params:
            p.zero_grad()

        # unit-gradient directions of the two Euclidean norms
        d_img = img_e - img_t
        u = d_img / loss_img if loss_img > 0 else np.zeros_like(d_img)
        d_msg = z_hat - z_c
        v = d_msg / loss_msg if loss_msg > 0 else np.zeros_like(d_msg)

        g_grid_hat = payload_to_grid(config.lam_msg * v, img_t.shape[1], config.flow.squeeze_factor)
        g_img_e = config.lam_img * u + dec.backward(g_grid_hat, dec_caches)
        g_joint = enc.backward(g_img_e, enc_caches)
        c_img = img_t.shape[1]

        if joint:
            loss_c, loss_s, g_anchor = perceptual_losses_with_grad(
                img_t, img_c, img_s, fe, config.lam_content, config.lam_style)
            anchor = config.lam_anchor * (config.lam_content * loss_c + config.lam_style * loss_s)
            total = total + anchor
            record["loss_anchor"] = anchor
            record["loss_total"] = total
            g_img_t = (g_img_e - config.lam_img * u + g_joint[:, :c_img]
                       + config.lam_anchor * g_anchor)
            g_zc = grid_to_payload(g_joint[:, c_img:], latent_channels,
                                   config.flow.squeeze_factor) - config.lam_msg * v
            g_latent = flow.backward_inverse(trace_g, g_img_t)
            g_zc_adain, g_zs = adain_backward(g_latent, a_cache)
            flow.backward_forward(trace_c, g_zc + g_zc_adain)
            flow.backward_forward(trace_s, g_zs)

        _check_finite(total, step)
        adam_step(params, state, config.lr, guard=guard)
        log.append(record)

    diverged = _window_divergence([r["loss_total"] for r in log])
    tensors = dict(flow.state_dict())
    tensors.update({p.name: p.value for p in enc.params()})
    tensors.update({p.name: p.value for p in dec.params()})
    ckpt = Checkpoint(tensors=tensors, config=config_to_dict(config))
    return TrainResult(checkpoint=ckpt, log=log, diverged=diverged)


def write_train_log(path, log):
    """Deterministic CSV of the per-step records (no timing columns; wall
    time goes to a separate sidecar so reruns stay byte-identical)."""
    if not log:
        return
    keys = list(log[0].keys())
    with open(path, "w") as f:
        f.write(",".join(keys) + "\n")
        for row in log:
            f.write(",".join(_fmt(row[k]) for k in keys) + "\n")


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)
