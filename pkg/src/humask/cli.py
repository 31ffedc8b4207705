"""Command-line interface.

Subcommands::

    humask phantom   -o OUT [--spec spec.json] [--seed N]
    humask mask      IN.nii.gz -o OUT [--window -175,250] [--sub 16,16,16]
                     [--lambda 0.1] [--ratio 0.6] [--strategy foreground] [--seed 0] [--pad]
    humask analyze   VOL [VOL ...] --out regions.csv [--labels LAB ...]
    humask calibrate --volumes VOL ... --labels LAB ... -o OUT
    humask pretrain  VOL [VOL ...] -o OUT [--config train.json]
    humask sweep     VOL [VOL ...] -o OUT [--strategies ...] [--ratios ...]
    humask verify    PLAN.json VOL

Exit codes: 0 success, 1 verification failure, 2 usage or parse error,
3 no foreground, 4 non-divisible shape, 5 no threshold separation.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, pretext, roi
from .errors import (
    DivisibilityError,
    HumaskError,
    NoForegroundError,
    NoSeparation,
)
from .intensity import DEFAULT_WINDOW, WindowSpec, denormalize, normalize
from .manifest import RunManifest
from .masking import (
    DEFAULT_LAMBDA,
    DEFAULT_RATIO,
    DEFAULT_SUB,
    MaskPlan,
    Strategy,
    apply_mask,
    build_mask_plan,
    masked_indices,
    verify_plan,
)
from .nifti import read_labels, read_nifti, write_labels, write_nifti
from .partition import pad_to_divisible
from .phantom import generate_phantom, load_spec, standard_phantom_spec
from .svg import bar_chart
from .volume import Unit, Volume3D

log = logging.getLogger("humask")

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_USAGE = 2
EXIT_NO_FOREGROUND = 3
EXIT_DIVISIBILITY = 4
EXIT_NO_SEPARATION = 5

SWEEP_RATIOS = (0.5, 0.6, 0.7, 0.8)
SWEEP_STRATEGIES = ("ForegroundHU", "Random", "LocalBlock")


class UsageError(Exception):
    pass


def _triple(text: str) -> tuple[int, int, int]:
    try:
        parts = tuple(int(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected three comma-separated integers, got {text!r}")
    if len(parts) == 1:
        parts = parts * 3
    if len(parts) != 3 or min(parts) < 1:
        raise argparse.ArgumentTypeError(f"expected three positive integers, got {text!r}")
    return parts


def _window(text: str) -> WindowSpec:
    try:
        lo, hi = (float(p) for p in text.split(","))
        return WindowSpec(lo, hi)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad window {text!r}: {exc}")


def _floats(text: str) -> list[float]:
    try:
        return [float(p) for p in text.split(",") if p]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _strategies(text: str) -> list[str]:
    try:
        return [Strategy.parse(p).value for p in text.split(",") if p]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def load_normalized(path, window: WindowSpec, prenormalized: bool = False) -> Volume3D:
    """Read a NIfTI volume and bring it onto the normalized scale."""
    raw = read_nifti(path)
    if prenormalized:
        data = raw.data
        if data.min() < 0.0 or data.max() > 1.0:
            raise UsageError(f"{path}: --prenormalized given but voxels fall outside [0, 1]")
        return raw.with_data(data, unit=Unit.NORMALIZED)
    return normalize(raw, window)


def _window_params(args) -> list[float] | None:
    return None if args.prenormalized else args.window.as_list()


def _map(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------- phantom


def cmd_phantom(args) -> int:
    spec = load_spec(args.spec) if args.spec else standard_phantom_spec(
        seed=args.seed if args.seed is not None else 0, shape=args.shape)
    if args.spec and args.seed is not None:
        spec = replace(spec, seed=args.seed)
    out = _out_dir(args.out)
    manifest = RunManifest("phantom", {
        "spec": spec.to_dict(), "window": args.window.as_list(), "stored_unit": "RawHU",
    }, __version__)
    if args.spec:
        manifest.add_input(args.spec)

    vol, labels = generate_phantom(spec)
    raw = denormalize(vol, args.window)
    vol_path, lab_path = out / "phantom.nii.gz", out / "labels.nii.gz"
    write_nifti(raw, vol_path)
    write_labels(labels, lab_path, like=raw)
    spec_path = out / "phantom_spec.json"
    spec_path.write_text(json.dumps(spec.to_dict(), indent=2) + "\n")
    for p in (vol_path, lab_path, spec_path):
        manifest.add_output(p, out)
    manifest.write(out)
    log.info("wrote phantom %s to %s", spec.shape, out)
    return EXIT_OK


# ---------------------------------------------------------------- mask


def cmd_mask(args) -> int:
    out = _out_dir(args.out)
    vol = load_normalized(args.input, args.window, args.prenormalized)
    if args.pad:
        vol = pad_to_divisible(vol, args.sub, fill=0.0)
    plan = build_mask_plan(vol, args.sub, args.lam, args.ratio, args.strategy, args.seed,
                           window=_window_params(args))
    masked = apply_mask(vol, plan, args.fill, target=args.target)

    params = {
        "window": _window_params(args),
        "prenormalized": args.prenormalized,
        "sub": list(args.sub),
        "lambda": args.lam,
        "ratio": args.ratio,
        "strategy": Strategy.parse(args.strategy).value,
        "seed": args.seed,
        "fill": args.fill,
        "pad": args.pad,
        "target": args.target,
        "shape": list(vol.shape),
        "grid_counts": list(plan.grid.counts),
        "P": plan.grid.P,
        "foreground": len(plan.foreground),
        "masked": len(masked_indices(plan)),
    }
    manifest = RunManifest("mask", params, __version__)
    manifest.add_input(args.input)
    plan_path, vol_path = out / "plan.json", out / "masked.nii.gz"
    plan_path.write_text(plan.to_json())
    write_nifti(masked, vol_path)
    if args.pad:
        padded_path = out / "padded.nii.gz"
        write_nifti(vol, padded_path)
        manifest.add_output(padded_path, out)
    manifest.add_output(plan_path, out)
    manifest.add_output(vol_path, out)
    manifest.write(out)
    print(f"P={plan.grid.P} foreground={len(plan.foreground)} masked={len(masked_indices(plan))}")
    return EXIT_OK


# ---------------------------------------------------------------- analyze


def _fmt(x: float) -> str:
    return "" if math.isnan(x) else repr(float(x))


def cmd_analyze(args) -> int:
    labels = args.labels or []
    if labels and len(labels) != len(args.volumes):
        raise UsageError("--labels must list one label file per volume")
    split = "labels" if labels else "threshold"

    def run(i):
        vol = load_normalized(args.volumes[i], args.window, args.prenormalized)
        lab = read_labels(labels[i]) if labels else None
        return roi.analyze_regions(vol, lab, None if labels else args.lam)

    reports = _map(run, list(range(len(args.volumes))), args.jobs)
    out_csv = Path(args.out)
    out = _out_dir(out_csv.parent if str(out_csv.parent) else ".")
    with open(out_csv, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["volume", "region", "voxels", "entropy_bits", "complexity", "mi_bits"])
        for name, pair in zip(args.volumes, reports):
            for r in pair:
                writer.writerow([Path(name).name, r.region.value, r.voxel_count,
                                 _fmt(r.entropy), _fmt(r.complexity), _fmt(r.mutual_information)])

    if args.compare_reference:
        ref = roi.FLARE22_REFERENCE
        print(f"{'volume':<24}{'region':<12}{'metric':<14}{'measured':>12}{'flare22':>10}")
        for name, pair in zip(args.volumes, reports):
            for r in pair:
                for metric, value in (("entropy_bits", r.entropy), ("complexity", r.complexity),
                                      ("mi_bits", r.mutual_information)):
                    print(f"{Path(name).name:<24}{r.region.value:<12}{metric:<14}{value:>12.4f}"
                          f"{ref[r.region.value][metric]:>10.2f}")

    manifest = RunManifest("analyze", {
        "window": _window_params(args), "prenormalized": args.prenormalized, "split": split,
        "lambda": None if labels else args.lam, "entropy_bins": roi.ENTROPY_BINS,
        "mi_bins": roi.MI_BINS, "mi_offset": list(roi.MI_OFFSET),
    }, __version__)
    for p in list(args.volumes) + list(labels):
        manifest.add_input(p)
    manifest.add_output(out_csv, out)
    manifest.write(out)
    return EXIT_OK


# ---------------------------------------------------------------- calibrate


def cmd_calibrate(args) -> int:
    if len(args.labels) != len(args.volumes):
        raise UsageError("--labels must list one label file per volume")

    def run(i):
        vol = load_normalized(args.volumes[i], args.window, args.prenormalized)
        return roi.region_histograms(vol, read_labels(args.labels[i]), args.bins)

    pairs = _map(run, list(range(len(args.volumes))), args.jobs)
    fg_hist, bg_hist = pairs[0]
    for f, b in pairs[1:]:
        fg_hist, bg_hist = fg_hist + f, bg_hist + b

    out = _out_dir(args.out)
    fg_path, bg_path = out / "fg_hist.csv", out / "bg_hist.csv"
    fg_hist.to_csv(fg_path)
    bg_hist.to_csv(bg_path)
    manifest = RunManifest("calibrate", {
        "window": _window_params(args), "prenormalized": args.prenormalized, "bins": args.bins,
        "eps_bg": args.eps_bg, "eps_fg": args.eps_fg, "volumes": len(args.volumes),
    }, __version__)
    for p in list(args.volumes) + list(args.labels):
        manifest.add_input(p)
    outputs = [fg_path, bg_path]
    if args.svg:
        for name, h in (("fg_hist.svg", fg_hist), ("bg_hist.svg", bg_hist)):
            path = out / name
            path.write_text(bar_chart([f"{c:.2f}" for c in h.centers], h.counts, name[:-4]))
            outputs.append(path)

    try:
        est = roi.calibrate_threshold(fg_hist, bg_hist, args.eps_bg, args.eps_fg)
    except NoSeparation:
        for p in outputs:
            manifest.add_output(p, out)
        manifest.write(out)
        raise
    report = est.to_dict()
    report["histograms"] = {"foreground": fg_path.name, "background": bg_path.name}
    report["volumes"] = len(args.volumes)
    est_path = out / "calibration.json"
    est_path.write_text(json.dumps(report, indent=2) + "\n")
    outputs.append(est_path)
    for p in outputs:
        manifest.add_output(p, out)
    manifest.write(out)
    print(f"lambda_hat={est.lambda_hat:g}")
    return EXIT_OK


# ---------------------------------------------------------------- pretrain / sweep


def _train_config(args) -> pretext.TrainConfig:
    doc = {}
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"{args.config}: invalid JSON ({exc})")
        if not isinstance(doc, dict):
            raise UsageError(f"{args.config}: config must be a JSON object")
    for key in ("epochs", "seed", "lr"):
        value = getattr(args, key, None)
        if value is not None:
            doc[key] = value
    try:
        return pretext.TrainConfig.from_dict(doc)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad training config: {exc}")


def _load_training_volumes(args, config):
    vols = [load_normalized(p, args.window, args.prenormalized) for p in args.volumes]
    if args.pad:
        vols = [pad_to_divisible(v, config.sub) for v in vols]
    return vols


def cmd_pretrain(args) -> int:
    config = _train_config(args)
    vols = _load_training_volumes(args, config)
    model = pretext.train(None, vols, config)
    out = _out_dir(args.out)
    ckpt, hist = out / "model.fmpt", out / "loss_history.csv"
    pretext.save_checkpoint(model, ckpt)
    pretext.write_history_csv(model.history, hist)
    manifest = RunManifest("pretrain", {
        "window": _window_params(args), "prenormalized": args.prenormalized, "pad": args.pad,
        "config": config.to_dict(),
        "initial_loss": model.history[0], "final_loss": model.history[-1],
    }, __version__)
    for p in args.volumes:
        manifest.add_input(p)
    manifest.add_output(ckpt, out)
    manifest.add_output(hist, out)
    manifest.write(out)
    print(f"loss {model.history[0]:.4f} -> {model.history[-1]:.4f} over {config.epochs} epochs")
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = _train_config(args)
    vols = _load_training_volumes(args, config)
    rows = pretext.strategy_sweep(vols, args.strategies, args.ratios, config)
    out = _out_dir(args.out)
    path = out / "sweep.csv"
    pretext.write_sweep_csv(rows, path)
    manifest = RunManifest("sweep", {
        "window": _window_params(args), "prenormalized": args.prenormalized, "pad": args.pad,
        "config": config.to_dict(), "strategies": args.strategies, "ratios": args.ratios,
    }, __version__)
    for p in args.volumes:
        manifest.add_input(p)
    manifest.add_output(path, out)
    if args.svg:
        svg_path = out / "sweep.svg"
        svg_path.write_text(bar_chart([f"{r['strategy']}@{r['ratio']:g}" for r in rows],
                                      [r["final_loss"] for r in rows], "held-out masked L1"))
        manifest.add_output(svg_path, out)
    manifest.write(out)
    for r in rows:
        print(f"{r['strategy']:<13}{r['ratio']:<6g}{r['final_loss']:.5f}")
    return EXIT_OK


# ---------------------------------------------------------------- verify


def cmd_verify(args) -> int:
    try:
        plan = MaskPlan.from_json(Path(args.plan).read_text())
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"{args.plan}: malformed plan ({exc})")
    prenormalized = args.prenormalized or plan.window is None
    window = DEFAULT_WINDOW if plan.window is None else WindowSpec(*plan.window)
    vol = load_normalized(args.volume, window, prenormalized)
    problems = verify_plan(plan, vol, args.tol)
    if problems:
        for p in problems:
            print(f"VIOLATION: {p}")
        return EXIT_VERIFY
    print(f"OK: {plan.grid.P} entries, {len(masked_indices(plan))} masked, all invariants hold")
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="humask", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"humask {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_window(p):
        p.add_argument("--window", type=_window, default=DEFAULT_WINDOW,
                       help="HU window lo,hi mapped onto [0, 1] (default -175,250)")
        p.add_argument("--prenormalized", action="store_true",
                       help="input voxels are already in [0, 1]; skip windowing")

    p = sub.add_parser("phantom", help="generate a synthetic CT phantom")
    p.add_argument("--spec", help="phantom spec JSON (default: standard phantom)")
    p.add_argument("--seed", type=int)
    p.add_argument("--shape", type=_triple, default=(32, 32, 32))
    p.add_argument("--window", type=_window, default=DEFAULT_WINDOW,
                   help="window used to store the phantom in HU")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("mask", help="partition a volume and build a mask plan")
    p.add_argument("input")
    add_window(p)
    p.add_argument("--sub", type=_triple, default=DEFAULT_SUB)
    p.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA)
    p.add_argument("--ratio", type=float, default=DEFAULT_RATIO)
    p.add_argument("--strategy", type=lambda s: _strategies(s)[0], default=Strategy.FOREGROUND_HU.value)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fill", type=float, default=0.0)
    p.add_argument("--pad", action="store_true", help="zero-pad to a multiple of --sub")
    p.add_argument("--target", choices=("masked", "background"), default="masked",
                   help="blank the masked blocks (default) or every background block")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_mask)

    p = sub.add_parser("analyze", help="entropy / complexity / MI per region")
    p.add_argument("volumes", nargs="+")
    p.add_argument("--labels", nargs="+")
    add_window(p)
    p.add_argument("--lambda", dest="lam", type=float, default=DEFAULT_LAMBDA,
                   help="threshold split when no labels are given")
    p.add_argument("--out", required=True, help="CSV report path")
    p.add_argument("--compare-reference", action="store_true",
                   help="print measured values next to published Flare22 region statistics")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("calibrate", help="estimate the foreground threshold from labelled volumes")
    p.add_argument("--volumes", nargs="+", required=True)
    p.add_argument("--labels", nargs="+", required=True)
    add_window(p)
    p.add_argument("--bins", type=int, default=roi.CALIBRATION_BINS)
    p.add_argument("--eps-bg", type=float, default=0.05)
    p.add_argument("--eps-fg", type=float, default=0.10)
    p.add_argument("--svg", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_calibrate)

    for name, func, helptext in (("pretrain", cmd_pretrain, "train the toy reconstruction model"),
                                 ("sweep", cmd_sweep, "strategy x ratio ablation sweep")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("volumes", nargs="+")
        add_window(p)
        p.add_argument("--config", help="training config JSON")
        p.add_argument("--epochs", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--lr", type=float)
        p.add_argument("--pad", action="store_true")
        p.add_argument("-o", "--out", required=True)
        if name == "sweep":
            p.add_argument("--strategies", type=_strategies, default=list(SWEEP_STRATEGIES))
            p.add_argument("--ratios", type=_floats, default=list(SWEEP_RATIOS))
            p.add_argument("--svg", action="store_true")
        p.set_defaults(func=func)

    p = sub.add_parser("verify", help="re-check a mask plan against its volume")
    p.add_argument("plan")
    p.add_argument("volume")
    p.add_argument("--prenormalized", action="store_true")
    p.add_argument("--tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NoForegroundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_FOREGROUND
    except DivisibilityError as exc:
        print(f"error: {exc} (pass --pad to zero-pad)", file=sys.stderr)
        return EXIT_DIVISIBILITY
    except NoSeparation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_SEPARATION
    except (UsageError, HumaskError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
