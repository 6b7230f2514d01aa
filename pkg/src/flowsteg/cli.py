"""Command-line surface: training, single-image operations, experiments, and
self-verification.

Exit codes: 0 success, 1 self-check/assertion failure, 2 usage or config
error, 3 numerical divergence. Every run writes a resolved-config snapshot
into its output directory; CSV and PNG outputs are byte-reproducible given
the same seed (wall-clock timing goes to a separate sidecar, never into the
CSVs).
"""

import argparse
import os
import sys
import time

import numpy as np

from .tensor import grad_check, conv2d, Conv2dLayer
from .flow import FlowConfig, FlowModel, SingularMatrix, SingularScale, squeeze, unsqueeze
from .transfer import adain, adain_with_cache, adain_backward, stylize, verify_unbiased
from .perceptual import FeatureExtractor, content_loss, perceptual_losses_with_grad
from .stego import embed, extract, payload_to_grid, grid_to_payload
from . import pipeline as pl
from . import evaluation as ev


def _mkdir(path):
    os.makedirs(path, exist_ok=True)
    return path


def _write_snapshot(out_dir, config):
    with open(os.path.join(out_dir, "config.snapshot"), "w") as f:
        for key, value in sorted(pl.config_to_dict(config).items()):
            f.write(f"{key}={value}\n")


def _read_config_file(path):
    items = {}
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line and not line.startswith("#"):
                key, sep, value = line.partition("=")
                if not sep:
                    raise pl.ConfigError(f"malformed config line: {line!r}")
                items[key.strip()] = value.strip()
    return items


def _build_config(args, stage=None):
    """Config file first, then flags override."""
    items = {}
    if getattr(args, "config", None):
        items = _read_config_file(args.config)
    overrides = {}
    for key in ("image_size", "batch", "steps", "seed", "style_k", "stego_width"):
        value = getattr(args, key.replace(".", "_"), None)
        if value is not None:
            overrides[key] = str(value)
    for key in ("lr", "lam_content", "lam_style", "lam_img", "lam_msg", "lam_anchor"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = repr(value)
    if getattr(args, "mode", None):
        overrides["mode"] = args.mode
    if stage is not None:
        overrides["stage"] = stage
    items.update(overrides)
    return pl.config_from_dict(items)


def _load_corpus_args(args, config):
    if args.synthetic:
        return pl.synth_corpus(seed=config.seed, n=args.synthetic, image_size=config.image_size)
    if not args.content_dir or not args.style_dir:
        raise pl.ConfigError("need --content-dir and --style-dir (or --synthetic N)")
    return pl.load_corpus(args.content_dir, args.style_dir, config.image_size, config.seed)


def cmd_train(args):
    config = _build_config(args, stage=args.stage)
    out_dir = _mkdir(args.out)
    _write_snapshot(out_dir, config)
    corpus = _load_corpus_args(args, config)
    started = time.perf_counter()
    if config.stage == "1":
        result = pl.train_stage1(config, corpus)
    else:
        if not args.init_from:
            raise pl.ConfigError("stage 2/joint needs --init-from <stage-1 checkpoint>")
        stage1 = pl.load_checkpoint(args.init_from)
        result = pl.train_stage2(config, corpus, stage1)
    elapsed = time.perf_counter() - started
    pl.save_checkpoint(result.checkpoint, os.path.join(out_dir, "model.ckpt"))
    pl.write_train_log(os.path.join(out_dir, "train_log.csv"), result.log)
    with open(os.path.join(out_dir, "timing.txt"), "w") as f:
        f.write(f"wall_time_seconds={elapsed:.3f}\n")
    if result.diverged:
        print("training diverged (loss window check failed)")
        return 3
    print(f"checkpoint written to {os.path.join(out_dir, 'model.ckpt')}")
    return 0


def _restore_all(ckpt_path, config_hint=None):
    ckpt = pl.load_checkpoint(ckpt_path)
    flow = pl.restore_flow(ckpt)
    if pl.has_stego(ckpt):
        enc, dec = pl.restore_stego(ckpt)
    else:
        cfg = pl.config_from_dict(ckpt.config) if ckpt.config else pl.TrainConfig()
        enc, dec = pl.fresh_stego(cfg)
    mode = (pl.config_from_dict(ckpt.config).mode if ckpt.config else "mean_std")
    return ckpt, flow, enc, dec, mode


def cmd_stylize(args):
    ckpt, flow, enc, dec, mode = _restore_all(args.ckpt)
    out_dir = _mkdir(args.out)
    cfg = pl.config_from_dict(ckpt.config) if ckpt.config else pl.TrainConfig()
    _write_snapshot(out_dir, cfg)
    img_c = pl.load_image(args.content)
    img_s = pl.load_image(args.style)
    stylized, latent = stylize(img_c, img_s, flow, mode)
    pl.save_image(os.path.join(out_dir, "stylized.png"), stylized)
    if args.embed:
        z_c = flow.forward(img_c)
        stego_img = embed(stylized, z_c, enc, flow.config.squeeze_factor)
        pl.save_image(os.path.join(out_dir, "stego.png"), stego_img)
    print(f"wrote {out_dir}/stylized.png" + (" and stego.png" if args.embed else ""))
    return 0


def cmd_destylize(args):
    ckpt, flow, enc, dec, mode = _restore_all(args.ckpt)
    out_dir = _mkdir(args.out)
    cfg = pl.config_from_dict(ckpt.config) if ckpt.config else pl.TrainConfig()
    _write_snapshot(out_dir, cfg)
    img = pl.load_image(args.image)
    expected = flow.config.image_size
    if img.shape[2] != expected or img.shape[3] != expected:
        raise pl.ConfigError(f"image is {img.shape[2]}x{img.shape[3]}, checkpoint expects {expected}x{expected}")
    z_hat = extract(img, dec, flow.config.latent_shape()[0], flow.config.squeeze_factor)
    recovered = flow.inverse(z_hat)
    pl.save_image(os.path.join(out_dir, "recovered.png"), recovered)
    sidecar = {}
    if args.reference:
        ref = pl.load_image(args.reference)
        sidecar["ssim_vs_reference"] = ev.ssim_metric(recovered, ref)
        sidecar["l2_vs_reference"] = ev.l2_metric(recovered, ref)
    ev.write_summary(os.path.join(out_dir, "summary.txt"), sidecar)
    print(f"wrote {out_dir}/recovered.png")
    return 0


def cmd_serial(args):
    ckpt, flow, enc, dec, mode = _restore_all(args.ckpt)
    out_dir = _mkdir(args.out)
    cfg = pl.config_from_dict(ckpt.config) if ckpt.config else pl.TrainConfig()
    _write_snapshot(out_dir, cfg)
    frames_dir = _mkdir(os.path.join(out_dir, "frames"))
    img = pl.load_image(args.image)
    style_paths = [p for p in args.styles.split(",") if p]
    if not style_paths:
        raise pl.ConfigError("--styles needs at least one path")
    latent_channels = flow.config.latent_shape()[0]
    factor = flow.config.squeeze_factor
    z = flow.forward(img)
    stego_img = None
    rows = []
    for j, path in enumerate(style_paths):
        style_img = pl.load_image(path)
        if j > 0:
            z = extract(stego_img, dec, latent_channels, factor)
        stylized = flow.inverse(adain(z, flow.forward(style_img), mode))
        stego_img = embed(stylized, z, enc, factor)
        pl.save_image(os.path.join(frames_dir, f"round_{j:03d}.png"), stego_img)
        rows.append({"round": j, "style": os.path.basename(path)})
    recovered = flow.inverse(extract(stego_img, dec, latent_channels, factor))
    pl.save_image(os.path.join(out_dir, "recovered.png"), recovered)
    ev.write_rows_csv(os.path.join(out_dir, "metrics.csv"), rows)
    ev.write_summary(os.path.join(out_dir, "summary.txt"),
                     {"rounds": len(style_paths),
                      "recovered_ssim_vs_input": ev.ssim_metric(recovered, img)})
    print(f"wrote {len(style_paths)} frames to {frames_dir}")
    return 0


def cmd_eval(args):
    out_dir = _mkdir(args.out)
    frames_dir = _mkdir(os.path.join(out_dir, "frames"))
    ckpt, flow, enc, dec, mode = _restore_all(args.ckpt)
    cfg = pl.config_from_dict(ckpt.config) if ckpt.config else pl.TrainConfig()
    _write_snapshot(out_dir, cfg)
    corpus = pl.synth_corpus(seed=args.seed, n=args.synthetic, image_size=flow.config.image_size)
    baseline, _ = ev.train_baseline(corpus, steps=args.baseline_steps, seed=args.seed)
    summary = {}

    if args.experiment == "drift":
        image = corpus.content[:1]
        flow_curve = ev.drift_experiment(ev.flow_reencoder(flow, mode), image, rounds=args.rounds)
        base_curve = ev.drift_experiment(ev.baseline_reencoder(baseline, mode), image, rounds=args.rounds)
        rows = []
        for k in range(args.rounds + 1):
            rows.append({"round": k,
                         "flow_l2": flow_curve.l2[k], "flow_ssim": flow_curve.ssim[k],
                         "flow_linf": flow_curve.linf[k],
                         "baseline_l2": base_curve.l2[k], "baseline_ssim": base_curve.ssim[k],
                         "baseline_linf": base_curve.linf[k]})
        ev.write_rows_csv(os.path.join(out_dir, "metrics.csv"), rows)
        summary["flow_max_linf"] = max(flow_curve.linf)
        summary["flow_final_ssim"] = flow_curve.ssim[-1]
        summary["baseline_final_ssim"] = base_curve.ssim[-1]
        summary["ordering_flow_beats_baseline"] = flow_curve.ssim[-1] > base_curve.ssim[-1]
    else:
        contents = corpus.content[:args.n_contents]
        styles = [corpus.style[i] for i in range(args.n_styles)]
        if args.experiment == "serial":
            result = ev.serial_eval(flow, enc, dec, baseline, contents, styles, mode)
            summary["ordering_ours_beats_baseline"] = (
                result.summary["mean_ours_ssim"] > result.summary["mean_baseline_ssim"])
        else:
            result = ev.reverse_eval(flow, enc, dec, baseline, contents, styles, mode)
            summary["ordering_ours_beats_baseline"] = (
                result.summary["mean_ours_ssim"] > result.summary["mean_baseline_ssim"])
        ev.write_rows_csv(os.path.join(out_dir, "metrics.csv"), result.rows)
        summary.update(result.summary)

    ev.write_summary(os.path.join(out_dir, "summary.txt"), summary)
    print(f"experiment {args.experiment} done; summary in {out_dir}/summary.txt")
    return 0


# ---------------------------------------------------------------------------
# self-check
# ---------------------------------------------------------------------------

SELFCHECK_TOLERANCES = {
    "bijectivity_linf": 1e-3,
    "latent_roundtrip_l2": 1e-3,
    "unbiasedness": 1e-3,
    "adain_self_identity": 1e-4,
    "grad_check": 1e-3,
}


def run_selfcheck(n_inputs=8, verbose=True):
    """Fast invariant suite; returns list of (name, passed, detail)."""
    results = []
    tol = SELFCHECK_TOLERANCES
    rng = np.random.default_rng(0xF10)
    cfg = FlowConfig(image_size=64)
    flow = FlowModel(cfg, rng=rng)
    flow.initialize_actnorm(rng.random((4, 3, 64, 64), dtype=np.float32))

    worst = 0.0
    for _ in range(n_inputs):
        x = rng.random((1, 3, 64, 64), dtype=np.float32)
        worst = max(worst, float(np.max(np.abs(flow.inverse(flow.forward(x)) - x))))
    results.append(("flow bijectivity (Linf)", worst <= tol["bijectivity_linf"], f"{worst:.3e}"))

    worst = 0.0
    for _ in range(n_inputs):
        t = rng.standard_normal((1,) + cfg.latent_shape()).astype(np.float32)
        worst = max(worst, float(np.linalg.norm((flow.forward(flow.inverse(t)) - t).ravel())))
    results.append(("latent roundtrip (L2)", worst <= tol["latent_roundtrip_l2"], f"{worst:.3e}"))

    ok = True
    worst = 0.0
    for mode in ("std_only", "mean_std"):
        for _ in range(n_inputs):
            f_c = rng.standard_normal((1, 8, 8, 8)).astype(np.float32)
            f_s = (rng.standard_normal((1, 8, 8, 8)) * 2 + 1).astype(np.float32)
            rep = verify_unbiased(f_c, f_s, mode, tol["unbiasedness"])
            ok = ok and rep.passed
            worst = max(worst, rep.style_residual, rep.content_residual)
    results.append(("unbiased transfer residuals", ok, f"{worst:.3e}"))

    f = rng.standard_normal((1, 8, 8, 8)).astype(np.float32)
    err = float(np.max(np.abs(adain(f, f, "mean_std") - f)))
    results.append(("adain self-identity", err <= tol["adain_self_identity"], f"{err:.3e}"))

    # squeeze / payload / coupling exactness
    x = rng.standard_normal((2, 3, 16, 16)).astype(np.float32)
    exact = np.array_equal(unsqueeze(squeeze(x, 2), 2), x)
    z = rng.standard_normal((1, 48, 8, 8)).astype(np.float32)
    exact = exact and np.array_equal(grid_to_payload(payload_to_grid(z, 3), 48), z)
    results.append(("permutation roundtrips bit-exact", exact, ""))

    cp = flow.blocks[0][0][2]
    y = cp.forward(rng.standard_normal((1, 12, 8, 8)).astype(np.float32))
    exact = np.array_equal(cp.inverse(cp.forward(cp.inverse(y))), cp.inverse(y))
    results.append(("additive coupling bit-exact", exact, ""))

    # gradient spot-check (float64, conv layer)
    layer = Conv2dLayer("chk", 2, 3, 3, padding=1, slope=0.2, rng=rng, dtype=np.float64)
    x0 = rng.standard_normal((1, 2, 5, 5))
    cot = rng.standard_normal((1, 3, 5, 5))

    def fn(x, w, b):
        layer.weight.value[...] = w
        layer.bias.value[...] = b
        layer.weight.grad[...] = 0
        layer.bias.grad[...] = 0
        out, cache = layer.forward_with_cache(x)
        gx = layer.backward(cot, cache)
        return float((cot * out).sum()), [gx, layer.weight.grad.copy(), layer.bias.grad.copy()]

    err = grad_check(fn, [x0, layer.weight.value.copy(), layer.bias.value.copy()], h=1e-6)
    results.append(("conv gradient check", err <= tol["grad_check"], f"{err:.3e}"))

    # checkpoint roundtrip
    import tempfile
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "t.ckpt")
        ck = pl.Checkpoint(tensors=flow.state_dict(), config={})
        pl.save_checkpoint(ck, path)
        back = pl.load_checkpoint(path)
        same = set(back.tensors) == set(ck.tensors) and all(
            np.array_equal(back.tensors[k], np.asarray(ck.tensors[k], dtype=np.float32))
            for k in ck.tensors)
    results.append(("checkpoint roundtrip bit-exact", same, ""))

    if verbose:
        for name, passed, detail in results:
            print(f"{'PASS' if passed else 'FAIL'}  {name}" + (f"  ({detail})" if detail else ""))
    return results


def cmd_selfcheck(args):
    results = run_selfcheck()
    return 0 if all(passed for _, passed, _ in results) else 1


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="flowsteg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run stage 1, stage 2, or joint training")
    p.add_argument("--stage", choices=["1", "2", "joint"], required=True)
    p.add_argument("--config", help="key=value config file (flags override)")
    p.add_argument("--content-dir")
    p.add_argument("--style-dir")
    p.add_argument("--synthetic", type=int, default=0, help="use a procedural corpus of N images")
    p.add_argument("--init-from", help="stage-1 checkpoint (required for stage 2/joint)")
    p.add_argument("--out", required=True)
    p.add_argument("--steps", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--image-size", dest="image_size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=["std_only", "mean_std"])
    p.add_argument("--style-k", dest="style_k", type=int)
    p.add_argument("--stego-width", dest="stego_width", type=int)
    p.add_argument("--lam-content", dest="lam_content", type=float)
    p.add_argument("--lam-style", dest="lam_style", type=float)
    p.add_argument("--lam-img", dest="lam_img", type=float)
    p.add_argument("--lam-msg", dest="lam_msg", type=float)
    p.add_argument("--lam-anchor", dest="lam_anchor", type=float)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("stylize", help="stylize one image, optionally embedding its content latent")
    p.add_argument("--content", required=True)
    p.add_argument("--style", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--embed", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_stylize)

    p = sub.add_parser("destylize", help="recover the content image from a stego stylized image")
    p.add_argument("--image", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--reference", help="original content image for sidecar metrics")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_destylize)

    p = sub.add_parser("serial", help="chain stylizations, re-extracting the content latent each round")
    p.add_argument("--image", required=True)
    p.add_argument("--styles", required=True, help="comma-separated style image paths")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_serial)

    p = sub.add_parser("eval", help="run the drift / serial / reverse experiments")
    p.add_argument("--experiment", choices=["drift", "serial", "reverse"], required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--rounds", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--synthetic", type=int, default=16)
    p.add_argument("--n-contents", dest="n_contents", type=int, default=8)
    p.add_argument("--n-styles", dest="n_styles", type=int, default=3)
    p.add_argument("--baseline-steps", dest="baseline_steps", type=int, default=300)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("selfcheck", help="run the fast invariant suite")
    p.set_defaults(func=cmd_selfcheck)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (pl.ConfigError, pl.FormatError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (pl.DivergenceError, SingularMatrix, SingularScale) as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
