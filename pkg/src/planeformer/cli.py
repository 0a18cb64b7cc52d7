"""``planeformer`` command line: gen-data | train | eval | infer | plot."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .geometry import CameraIntrinsics
from .scene_synth import DatasetManifest, load_scene, write_dataset


def _size(text):
    try:
        w, h = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}") from None
    return w, h


def _train_config(args, model_flags=True):
    from .harness.config import TrainConfig, load_config

    cfg = load_config(args.config) if args.config else TrainConfig()
    over = {}
    if getattr(args, "seed", None) is not None:
        over["seed"] = args.seed
    if model_flags and getattr(args, "no_lines", False):
        over["use_lines"] = False
    if getattr(args, "no_center", False):
        over["use_center"] = False
    q = getattr(args, "queries", None)
    if isinstance(q, list) and len(q) == 1:
        over["num_queries"] = q[0]
    elif isinstance(q, int):
        over["num_queries"] = q
    if getattr(args, "epochs", None) is not None:
        over["epochs"] = args.epochs
    return cfg.replace(**over)


def cmd_gen_data(args):
    w, h = args.size
    man = DatasetManifest(root=str(args.out), split=args.split, count=args.count, width=w, height=h,
                          seed=args.seed if args.seed is not None else 0,
                          config={"layout": args.layout, "line_noise": args.line_noise})
    path = write_dataset(man)
    print(f"wrote {args.count} scenes to {path}")


def cmd_train(args):
    from .harness.train import train

    cfg = _train_config(args)
    res = train(cfg, args.data, args.out, split=args.split, resume=args.resume)
    last = res.log.of_type("epoch")[-1]
    print(f"checkpoint {res.checkpoint} (epoch {last['epoch']}, total loss {last['total']:.4f})")


def cmd_eval(args):
    from .harness.evaluate import evaluate_checkpoint, query_sweep, write_report

    # --no-lines at evaluation feeds empty line sequences; it does not change the model
    expect = _train_config(args, model_flags=False) if args.config else None
    out = Path(args.out)
    if args.queries and len(args.queries) > 1:
        out.mkdir(parents=True, exist_ok=True)
        reports = query_sweep(args.checkpoint, args.queries, args.data, args.split, use_lines=not args.no_lines)
        for K, rep in reports.items():
            write_report(rep, out / f"report_k{K}.jsonl")
            print(json.dumps({"queries": K, **rep.summary()}, sort_keys=True))
        return
    ckpt = Path(args.checkpoint)
    if ckpt.is_dir():
        ckpt = ckpt / "checkpoint.npz"
    rep = evaluate_checkpoint(ckpt, args.data, args.split, expect=expect, use_lines=not args.no_lines)
    if out.suffix != ".jsonl":
        out.mkdir(parents=True, exist_ok=True)
        out = out / "report.jsonl"
    write_report(rep, out)
    print(json.dumps(rep.summary(), sort_keys=True))


def _read_image(path):
    path = Path(path)
    if path.suffix == ".npy":
        img = np.load(path)
    else:
        import matplotlib.image as mpimg

        img = mpimg.imread(path)
        if img.dtype == np.uint8:
            img = img / 255.0
    img = np.asarray(img, dtype=np.float32)
    if img.ndim == 3 and img.shape[2] == 4:
        img = img[..., :3]
    return img


def cmd_infer(args):
    from .harness.infer import infer_checkpoint, read_line_file, save_inference

    if args.scene:
        scene = load_scene(args.scene)
        image, K, lines = scene.image, scene.K_cam, scene.line_array()
    else:
        if not args.image:
            raise SystemExit("infer needs --scene or --image")
        image = _read_image(args.image)
        H, W = image.shape[:2]
        K = CameraIntrinsics(*args.intrinsics, width=W, height=H) if args.intrinsics else CameraIntrinsics.default(W, H)
        lines = read_line_file(args.lines, W, H) if args.lines else np.zeros((0, 4))
    if args.no_lines:
        lines = np.zeros((0, 4))
    ckpt = Path(args.checkpoint)
    if ckpt.is_dir():
        ckpt = ckpt / "checkpoint.npz"
    res = infer_checkpoint(ckpt, image, lines, K, with_attention=True)
    out = save_inference(res, args.out, lines)
    np.save(out / "image.npy", image)
    print(f"{len(res.segmentation.kept)} planes kept; outputs in {out}")


def cmd_plot(args):
    from .harness import plot
    from .harness.evaluate import read_report
    from .harness.train import read_log

    out = Path(args.out)
    written = []
    if args.report:
        reports = {Path(p).stem: read_report(p) for p in args.report}
        written.append(plot.plot_recall(reports, out / "recall.png"))
    if args.log:
        written.append(plot.plot_losses(read_log(args.log), out / "losses.png"))
    if args.dump:
        d = Path(args.dump)
        with np.load(d / "inference.npz") as z:
            dump = {k: z[k] for k in z.files}
        image = np.load(d / "image.npy")
        written.append(plot.plot_mask_overlay(image, dump["mask"], out / "mask.png", dump.get("lines")))
        written.append(plot.plot_attention(image, dump, out / "attention.png"))
    if not written:
        raise SystemExit("plot needs at least one of --report, --log, --dump")
    for p in written:
        print(p)


def build_parser():
    p = argparse.ArgumentParser(prog="planeformer")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="write a synthetic scene split")
    g.add_argument("--out", required=True, type=Path)
    g.add_argument("--split", default="train")
    g.add_argument("--count", type=int, default=100)
    g.add_argument("--seed", type=int)
    g.add_argument("--size", type=_size, default=(256, 192))
    g.add_argument("--layout", choices=("room", "frontal"), default="room")
    g.add_argument("--line-noise", type=float, default=0.0)
    g.set_defaults(func=cmd_gen_data)

    def model_flags(sp, sweep=False):
        sp.add_argument("--config", type=Path)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--no-lines", action="store_true")
        sp.add_argument("--no-center", action="store_true")
        if sweep:
            sp.add_argument("--queries", type=int, nargs="+")
        else:
            sp.add_argument("--queries", type=int)

    t = sub.add_parser("train", help="train a model")
    t.add_argument("--data", required=True, type=Path)
    t.add_argument("--split", default="train")
    t.add_argument("--out", required=True, type=Path)
    t.add_argument("--epochs", type=int)
    t.add_argument("--resume", action="store_true")
    model_flags(t)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint on a split")
    e.add_argument("--checkpoint", required=True, type=Path)
    e.add_argument("--data", required=True, type=Path)
    e.add_argument("--split", default="test")
    e.add_argument("--out", required=True, type=Path)
    model_flags(e, sweep=True)
    e.set_defaults(func=cmd_eval)

    i = sub.add_parser("infer", help="segment one image")
    i.add_argument("--checkpoint", required=True, type=Path)
    i.add_argument("--scene", type=Path, help="scene directory (image, lines and intrinsics)")
    i.add_argument("--image", type=Path, help=".npy or image file")
    i.add_argument("--lines", type=Path, help="text file of 'x1 y1 x2 y2' records")
    i.add_argument("--intrinsics", type=float, nargs=4, metavar=("FX", "FY", "CX", "CY"))
    i.add_argument("--no-lines", action="store_true")
    i.add_argument("--out", required=True, type=Path)
    i.set_defaults(func=cmd_infer)

    pl = sub.add_parser("plot", help="render figures")
    pl.add_argument("--report", nargs="+")
    pl.add_argument("--log")
    pl.add_argument("--dump", help="directory written by 'infer'")
    pl.add_argument("--out", required=True, type=Path)
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        args.func(args)
    except (ValueError, KeyError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
