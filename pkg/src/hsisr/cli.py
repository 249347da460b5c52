"""Command-line entry point: synth, degrade, train, sr, refine, eval."""

from __future__ import annotations

import argparse
import logging
import os
import sys
import zlib
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import backprojection, metrics
from .cube import read_cube, write_cube
from .estimators import CoarSR, DualSR
from .resample import KERNELS, degrade_pair
from .synth import SceneSpec, generate

logger = logging.getLogger("hsisr")

THREADS_ENV = "HSISR_THREADS"
TRAIN_DEFAULTS = {
    "scale": 4,
    "channels": 64,
    "intra_stages": 1,
    "global_residual": True,
    "epochs": 30,
    "batch": 64,
    "learning_rate": 1e-4,
    "lr_step": 30,
    "seed": 0,
}


class CliError(Exception):
    pass


def named_seed(seed, name, *index):
    """Derive an independent integer seed for a named random stream."""
    ss = np.random.SeedSequence([int(seed), zlib.crc32(name.encode()), *map(int, index)])
    return int(ss.generate_state(1)[0])


def _cube_files(path):
    p = Path(path)
    if p.is_dir():
        files = sorted(p.glob("*.hsr"))
        if not files:
            raise CliError(f"no .hsr cubes in {p}")
        return files
    if p.suffix != ".hsr":
        p = p.with_name(p.name + ".hsr")
    if not p.exists():
        raise CliError(f"cube {p} not found")
    return [p]


def _out_dir(path):
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def read_config(path):
    """Parse a ``key = value`` training config file."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or key not in TRAIN_DEFAULTS:
            raise CliError(f"{path}:{lineno}: unknown or malformed entry {line!r}")
        default = TRAIN_DEFAULTS[key]
        value = value.strip()
        if isinstance(default, bool):
            if value.lower() not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
                raise CliError(f"{path}:{lineno}: {key} expects a boolean")
            out[key] = value.lower() in ("1", "true", "yes", "on")
        else:
            out[key] = type(default)(value)
    return out


def cmd_synth(args):
    out = _out_dir(args.out)
    for k in range(args.count):
        spec = SceneSpec(
            bands=args.bands,
            height=args.size,
            width=args.size,
            materials=args.materials,
            smoothness=args.smoothness,
            sharpness=args.sharpness,
            seed=named_seed(args.seed, "synth", k),
        )
        write_cube(generate(spec), out / f"{args.prefix}_{k:03d}.hsr")
    logger.info("wrote %d cubes to %s", args.count, out)
    return 0


def cmd_degrade(args):
    out = _out_dir(args.out)
    for f in _cube_files(args.input):
        lr, _ = degrade_pair(read_cube(f), args.scale, args.kernel)
        write_cube(np.clip(lr, 0.0, 1.0), out / f.name)
    return 0


def _train_settings(args):
    settings = dict(TRAIN_DEFAULTS)
    if args.config:
        settings.update(read_config(args.config))
    for key in TRAIN_DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    return settings


def _load_pairs(hr_dir, lr_dirs):
    hr_files = _cube_files(hr_dir)
    X, y = [], []
    for lr_dir in lr_dirs:
        for f in hr_files:
            lr_path = Path(lr_dir) / f.name
            if not lr_path.exists():
                raise CliError(f"no LR cube {lr_path} for HR cube {f}")
            X.append(read_cube(lr_path).data)
            y.append(read_cube(f).data)
    return X, y


def cmd_train(args):
    s = _train_settings(args)
    X, y = _load_pairs(args.hr, args.lr)
    est = CoarSR(
        scale=s["scale"],
        channels=s["channels"],
        intra_stages=s["intra_stages"],
        global_residual=s["global_residual"],
        epochs=s["epochs"],
        batch_size=s["batch"],
        learning_rate=s["learning_rate"],
        lr_step=s["lr_step"],
        seed=s["seed"],
    )
    est.fit(X, y)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    est.save(args.out)
    if args.loss_log:
        lines = ["epoch,mean_l1"] + [f"{e + 1},{v!r}" for e, v in enumerate(est.loss_history_)]
        Path(args.loss_log).write_text("\n".join(lines) + "\n")
    if est.loss_history_:
        logger.info("final epoch mean L1 %.6f", est.loss_history_[-1])
    return 0


def cmd_sr(args):
    est = CoarSR.load(args.model)
    scale = args.scale or est.scale
    if scale != est.scale:
        raise CliError(f"model was trained for x{est.scale}, not x{scale}")
    out = _out_dir(args.out)
    dual = DualSR.from_coarse(est, sam_mode=args.sam_mode) if args.fine else None
    for f in _cube_files(args.input):
        lr = read_cube(f).data
        sr = dual.predict(lr) if dual is not None else est.predict(lr)
        write_cube(np.clip(sr, 0.0, 1.0), out / f.name)
    return 0


def cmd_refine(args):
    if args.u or args.v:
        if not (args.u and args.v) or args.lr or args.model:
            raise CliError("use either --u/--v or --lr/--model/--scale")
        U, V = read_cube(args.u).data, read_cube(args.v).data
        result, trace = backprojection.refine_from_cubes(U, V, sam_mode=args.sam_mode, return_trace=True)
    else:
        if not (args.lr and args.model):
            raise CliError("refine needs --lr and --model (or --u and --v)")
        est = CoarSR.load(args.model)
        scale = args.scale or est.scale
        result, trace = backprojection.refine(est.upscale, read_cube(args.lr).data, scale, sam_mode=args.sam_mode)
    write_cube(result, args.out)
    if args.trace:
        tdir = _out_dir(args.trace)
        for name, arr in trace.items():
            # residual intermediates are signed; store them raw with a neutral header
            np.save(tdir / f"{name}.npy", arr)
        (tdir / "lambda_sam.txt").write_text(f"{trace.lambda_sam!r}\n")
    logger.info("lambda_sam = %.6f rad", trace.lambda_sam)
    return 0


def cmd_eval(args):
    refs = {f.name: f for f in _cube_files(args.ref)}
    tests = _cube_files(args.test)
    if len(refs) == 1 and len(tests) == 1:
        pairs = [(next(iter(refs.values())), tests[0])]
    else:
        pairs = []
        for t in tests:
            if t.name not in refs:
                raise CliError(f"no reference cube for {t.name}")
            pairs.append((refs[t.name], t))
    rows = []
    for ref_path, test_path in pairs:
        report = metrics.evaluate(read_cube(ref_path).data, read_cube(test_path).data)
        rows.append((test_path.stem, args.method, report))
        print(f"{test_path.stem}: psnr={report.psnr:.4f} ssim={report.ssim:.6f} sam={report.sam:.4f}")
    if args.csv:
        metrics.write_csv(args.csv, rows, per_band=args.per_band)
    return 0


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=_positive_int, default=None,
                        help=f"BLAS threads (default ${THREADS_ENV} or 1; 1 is bitwise reproducible)")
    common.add_argument("-v", "--verbose", action="count", default=0, help="more logging")

    parser = argparse.ArgumentParser(prog="hsisr", description="Hyperspectral super-resolution toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate synthetic scenes")
    p.add_argument("--bands", type=_positive_int, default=16)
    p.add_argument("--size", type=_positive_int, default=64)
    p.add_argument("--count", type=_positive_int, default=32)
    p.add_argument("--materials", type=_positive_int, default=4)
    p.add_argument("--smoothness", type=float, default=8.0)
    p.add_argument("--sharpness", type=float, default=4.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--prefix", default="scene")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("degrade", parents=[common], help="downscale HR cubes into LR cubes")
    p.add_argument("--scale", type=_positive_int, required=True)
    p.add_argument("--kernel", choices=sorted(KERNELS), default="cubic")
    p.add_argument("--in", dest="input", required=True, help="HR cube or directory")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_degrade)

    p = sub.add_parser("train", parents=[common], help="train the coarse network")
    p.add_argument("--hr", required=True, help="directory of HR cubes")
    p.add_argument("--lr", required=True, action="append", help="directory of LR cubes (repeatable)")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--config", help="key = value training config")
    p.add_argument("--scale", type=_positive_int)
    p.add_argument("--channels", type=_positive_int)
    p.add_argument("--intra-stages", dest="intra_stages", type=int)
    p.add_argument("--global-residual", dest="global_residual", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=_positive_int)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--lr-step", dest="lr_step", type=_positive_int)
    p.add_argument("--seed", type=int)
    p.add_argument("--loss-log", help="CSV of per-epoch mean loss")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sr", parents=[common], help="super-resolve LR cubes")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="input", required=True, help="LR cube or directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--scale", type=_positive_int)
    p.add_argument("--fine", action="store_true", help="apply back-projection refinement")
    p.add_argument("--sam-mode", choices=backprojection.SAM_MODES, default="pixel")
    p.set_defaults(func=cmd_sr)

    p = sub.add_parser("refine", parents=[common], help="back-projection refinement")
    p.add_argument("--lr", help="LR cube")
    p.add_argument("--model", help="coarse checkpoint")
    p.add_argument("--scale", type=_positive_int)
    p.add_argument("--u", help="SR cube at scale s")
    p.add_argument("--v", help="SR cube at scale s/2")
    p.add_argument("--out", required=True, help="output cube path")
    p.add_argument("--trace", help="directory for intermediate arrays")
    p.add_argument("--sam-mode", choices=backprojection.SAM_MODES, default="pixel")
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("eval", parents=[common], help="PSNR / SSIM / SAM report")
    p.add_argument("--ref", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--csv")
    p.add_argument("--method", default="test")
    p.add_argument("--per-band", action="store_true")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    threads = args.threads or int(os.environ.get(THREADS_ENV, "1"))
    try:
        with threadpool_limits(threads):
            return args.func(args)
    except (CliError, ValueError, OSError, IndexError, FloatingPointError) as exc:
        print(f"hsisr {args.command}: error: {exc}", file=sys.stderr)
        return 1


def main_exit():
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
