"""Command-line interface: ``contourvae <subcommand> [flags]``.

Every subcommand writes its outputs into ``--out`` (a directory) together
with ``<subcommand>.manifest.json``, which echoes the fully resolved flags.
Outputs are staged in memory and committed with atomic renames, so a failed
run leaves no partial files behind.

Exit codes: 0 success, 2 usage, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .errors import CheckpointError, DataError, FormatError, InvalidContourError, NumericalError
from .ingest import ensemble_to_json, load_ensemble, synth_ensemble, to_features
from .latent_stats import DEFAULT_LEVELS, confidence_spec, sample_ball, sample_prior
from .metrics import compare_generators, mmd_cd
from .pca_baseline import pca_fit
from .render import (
    RasterSpec,
    accumulate_density,
    colorize,
    composite_bands,
    default_window,
    encode_pnm,
    grayscale,
)
from .vae import TrainConfig, config_dict, decode_polylines, load_model, model_to_json, train

logger = logging.getLogger("contourvae")

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


# --- argument types ---------------------------------------------------------------


def _int_at_least(lo):
    def parse(text):
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
        if v < lo:
            raise argparse.ArgumentTypeError(f"must be >= {lo}, got {v}")
        return v
    parse.__name__ = f"int>={lo}"
    return parse


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {v}")
    return v


def _nonneg_float(text):
    v = float(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {v}")
    return v


def _levels(text):
    try:
        vals = [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad level list {text!r}") from None
    if not vals or any(not 0 < v < 1 for v in vals):
        raise argparse.ArgumentTypeError("levels must lie in (0, 1)")
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise argparse.ArgumentTypeError("levels must be strictly increasing")
    return tuple(vals)


def _int_list(text):
    try:
        vals = [int(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("need at least one value")
    return tuple(vals)


def _window(text):
    try:
        vals = tuple(float(t) for t in str(text).split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad window {text!r}") from None
    if len(vals) != 4 or not (vals[2] > vals[0] and vals[3] > vals[1]):
        raise argparse.ArgumentTypeError("window must be xmin,ymin,xmax,ymax with a positive extent")
    return vals


def _param(text):
    key, sep, value = str(text).partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        return key.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"family parameter {key!r} must be numeric") from None


# --- output staging ---------------------------------------------------------------


class Outputs:
    """Collects output files in memory, then commits them with atomic renames."""

    def __init__(self, outdir):
        self.outdir = Path(outdir)
        self.files = {}

    def add(self, name, data):
        if isinstance(data, str):
            data = data.encode("utf-8")
        self.files[name] = data

    def add_json(self, name, obj):
        self.add(name, json.dumps(obj, sort_keys=True, indent=1) + "\n")

    def commit(self):
        self.outdir.mkdir(parents=True, exist_ok=True)
        for name, data in self.files.items():
            fd, tmp = tempfile.mkstemp(dir=self.outdir, prefix=f".{name}.", suffix=".tmp")
            try:
                with os.fdopen(fd, "wb") as fh:
                    fh.write(data)
                os.replace(tmp, self.outdir / name)
            except BaseException:
                if os.path.exists(tmp):
                    os.unlink(tmp)
                raise

    def digests(self):
        return {name: hashlib.sha256(data).hexdigest() for name, data in sorted(self.files.items())}


def _jsonable(value):
    if isinstance(value, (tuple, list)):
        return [_jsonable(v) for v in value]
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    return value


def _finish(args, out: Outputs, extra=None):
    resolved = {k: _jsonable(v) for k, v in sorted(vars(args).items())
                if k not in ("func", "config", "verbose")}
    manifest = {
        "command": args.command,
        "tool": "contourvae",
        "tool_version": __version__,
        "config": resolved,
        "outputs": out.digests(),
    }
    if extra:
        manifest.update(extra)
    out.add_json(f"{args.command}.manifest.json", manifest)
    out.commit()
    for name in sorted(out.files):
        logger.info("wrote %s", out.outdir / name)


def _spec(args, bounds):
    window = args.window if getattr(args, "window", None) else default_window(bounds)
    return RasterSpec(args.width, args.height, window, args.stroke)


# --- subcommands ------------------------------------------------------------------


def cmd_synth(args):
    params = dict(args.param or [])
    for key in ("n_points",):
        if key in params:
            params[key] = int(params[key])
    try:
        ens = synth_ensemble(args.family, args.n, args.seed, **params)
    except TypeError as exc:
        raise ValueError(f"bad family parameter: {exc}") from None
    out = Outputs(args.out)
    out.add("ensemble.json", ensemble_to_json(ens))
    _finish(args, out, {"members": len(ens)})


def _load_input_ensemble(args):
    return load_ensemble(args.input, args.format, args.iso)


def cmd_train(args):
    ens = _load_input_ensemble(args)
    cfg = TrainConfig(epochs=args.epochs, lr=args.lr, beta=args.beta, seed=args.seed,
                      k=args.k, s=args.s, warmup=args.warmup)
    feats, norm = to_features(ens, cfg.s, align=args.align)
    try:
        model, history = train(feats, cfg, norm=norm, closed=feats[0].closed)
    except NumericalError as exc:
        tail = [h.total for h in exc.history[-5:]]
        raise NumericalError(f"{exc}; last finite losses: {tail}", exc.epoch, exc.history) from exc
    out = Outputs(args.out)
    out.add("model.json", model_to_json(model))
    out.add_json("loss.json", {
        "config": config_dict(cfg),
        "history": [
            {"epoch": i, "reconstruction": h.reconstruction, "kl": h.kl, "total": h.total, "beta": h.beta}
            for i, h in enumerate(history)
        ],
    })
    _finish(args, out, {"members": len(ens), "final_loss": history[-1].total})


def cmd_bands(args):
    model = load_model(args.input)
    conf = confidence_spec(model.k, args.levels)
    base = sample_ball(model.k, conf.levels[-1], args.samples, args.seed, mode=args.mode)
    level_sets = []
    for level, radius in zip(conf.levels, conf.radii):
        pts = base.rescaled(radius, level).points
        level_sets.append((level, decode_polylines(model, pts)))
    spec = _spec(args, model.norm.window)
    bands = composite_bands(level_sets, spec, nested=True)
    for i in range(len(conf.levels) - 1):
        if np.any(bands.coverage(i) & ~bands.coverage(i + 1)):
            raise NumericalError("band nesting check failed")
    out = Outputs(args.out)
    out.add("bands.ppm", encode_pnm(colorize(bands), "ppm"))
    out.add_json("bands.json", {
        "levels": list(conf.levels),
        "radii": list(conf.radii),
        "k": conf.k,
        "mode": args.mode,
        "seed": args.seed,
        "samples_per_level": args.samples,
        "raster": {"width": spec.width, "height": spec.height, "window": list(spec.window),
                   "stroke_radius": spec.stroke_radius},
        "covered_pixels": [int(bands.coverage(i).sum()) for i in range(len(conf.levels))],
    })
    _finish(args, out)


def cmd_density(args):
    model = load_model(args.input)
    z = sample_prior(model.k, args.samples, args.seed).points
    spec = _spec(args, model.norm.window)
    dens = accumulate_density(decode_polylines(model, z), spec)
    out = Outputs(args.out)
    out.add("density.pgm", encode_pnm(grayscale(dens), "pgm"))
    out.add("density.ppm", encode_pnm(colorize(dens, "white-to-blue"), "ppm"))
    out.add_json("density.json", {
        "samples": args.samples,
        "seed": args.seed,
        "sampling": "prior",
        "max_count": int(dens.counts.max()),
        "raster": {"width": spec.width, "height": spec.height, "window": list(spec.window),
                   "stroke_radius": spec.stroke_radius},
    })
    _finish(args, out)


def cmd_eval(args):
    ens = _load_input_ensemble(args)
    model = load_model(args.model)
    feats, _ = to_features(ens, model.s, align=args.align)
    pca = pca_fit(feats, args.pca_k or model.k, covariance=args.pca_cov)
    count = args.count or len(ens)
    rows = []
    for seed in args.seeds:
        vae_rep, pca_rep = compare_generators(model, pca, ens, count, seed, args.points, args.squared)
        row = {"seed": seed, "vae": vae_rep.mmd_cd, "pca": pca_rep.mmd_cd,
               "ratio": vae_rep.mmd_cd / pca_rep.mmd_cd if pca_rep.mmd_cd > 0 else None,
               "reports": [vae_rep.to_dict(), pca_rep.to_dict()]}
        rows.append(row)
    ratios = [r["ratio"] for r in rows if r["ratio"] is not None]
    report = {
        "count": count,
        "points_per_contour": args.points,
        "squared": args.squared,
        "pca_covariance": args.pca_cov,
        "per_seed": rows,
        "mean_vae": float(np.mean([r["vae"] for r in rows])),
        "mean_pca": float(np.mean([r["pca"] for r in rows])),
        "mean_ratio": float(np.mean(ratios)) if ratios else None,
        "vae_wins": sum(r["vae"] <= r["pca"] for r in rows),
    }
    if args.smoke:
        ref = mmd_cd(ens.members, ens.members, args.points, args.squared, "reference")
        report["smoke"] = ref.to_dict()
    out = Outputs(args.out)
    out.add_json("report.json", report)
    _finish(args, out)


def cmd_spaghetti(args):
    ens = _load_input_ensemble(args)
    spec = _spec(args, ens.domain_bounds)
    dens = accumulate_density(ens.members, spec)
    out = Outputs(args.out)
    out.add("spaghetti.ppm", encode_pnm(colorize(dens, "uniform"), "ppm"))
    _finish(args, out, {"members": len(ens)})


# --- parser -----------------------------------------------------------------------


def _add_raster(p, width=256, height=256):
    p.add_argument("--width", type=_int_at_least(1), default=width)
    p.add_argument("--height", type=_int_at_least(1), default=height)
    p.add_argument("--stroke", type=_nonneg_float, default=1.0, help="stroke radius in pixels")
    p.add_argument("--window", type=_window, default=None, help="xmin,ymin,xmax,ymax")


def _add_ensemble_input(p):
    p.add_argument("--input", required=True, help="ensemble file (or grid directory)")
    p.add_argument("--format", choices=("polyline-json", "grid-set"), default="polyline-json")
    p.add_argument("--iso", type=float, default=None, help="isovalue for grid-set input")
    p.add_argument("--align", action="store_true", help="align closed contours to a common start angle")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("--config", help="flat key=value file; flags override it")
    common.add_argument("--verbose", "-v", action="store_true")

    parser = argparse.ArgumentParser(prog="contourvae", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"contourvae {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic ensemble")
    p.add_argument("--family", choices=("perturbed-circle", "phase-sine-band"), default="perturbed-circle")
    p.add_argument("--n", type=_int_at_least(2), default=95)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--param", type=_param, action="append", help="family parameter key=value")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", parents=[common], help="train a VAE on an ensemble")
    _add_ensemble_input(p)
    p.add_argument("--k", type=_int_at_least(1), default=8)
    p.add_argument("--s", type=_int_at_least(2), default=100)
    p.add_argument("--epochs", type=_int_at_least(1), default=4000)
    p.add_argument("--lr", type=_positive_float, default=1e-3)
    p.add_argument("--beta", type=_nonneg_float, default=1.0)
    p.add_argument("--warmup", type=_nonneg_float, default=0.1, help="fraction of epochs for KL warm-up")
    p.add_argument("--seed", type=int, default=42)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("bands", parents=[common], help="render confidence-interval bands")
    p.add_argument("--input", required=True, help="VAE checkpoint")
    p.add_argument("--levels", type=_levels, default=DEFAULT_LEVELS)
    p.add_argument("--samples", type=_int_at_least(1), default=1000, help="samples per level")
    p.add_argument("--mode", choices=("ball", "surface"), default="ball")
    p.add_argument("--seed", type=int, default=0)
    _add_raster(p)
    p.set_defaults(func=cmd_bands)

    p = sub.add_parser("density", parents=[common], help="render a probability density plot")
    p.add_argument("--input", required=True, help="VAE checkpoint")
    p.add_argument("--samples", type=_int_at_least(1), default=1000)
    p.add_argument("--seed", type=int, default=0)
    _add_raster(p)
    p.set_defaults(func=cmd_density)

    p = sub.add_parser("eval", parents=[common], help="MMD-CD of VAE vs PCA generators")
    _add_ensemble_input(p)
    p.add_argument("--model", required=True, help="VAE checkpoint trained on --input")
    p.add_argument("--count", type=_int_at_least(1), default=None, help="generated contours (default: ensemble size)")
    p.add_argument("--seeds", type=_int_list, default=(0, 1, 2, 3, 4))
    p.add_argument("--points", type=_int_at_least(2), default=100, help="points per contour")
    p.add_argument("--squared", action="store_true", help="squared Chamfer distances")
    p.add_argument("--pca-cov", choices=("full", "diag"), default="full")
    p.add_argument("--pca-k", type=_int_at_least(1), default=None)
    p.add_argument("--smoke", action="store_true", help="also score the references against themselves")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("spaghetti", parents=[common], help="overlay all member contours")
    _add_ensemble_input(p)
    _add_raster(p)
    p.set_defaults(func=cmd_spaghetti)
    return parser


def _read_config(path):
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise FormatError(f"{path}: expected key=value", index=lineno)
        values[key.strip().lstrip("-").replace("-", "_")] = value.strip()
    return values


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        try:
            cfg = _read_config(known.config)
        except (OSError, FormatError) as exc:
            parser.error(f"cannot read config: {exc}")
        subparsers = parser._subparsers._group_actions[0].choices
        command = next((a for a in argv if a in subparsers), None)
        if command is not None:
            sub = subparsers[command]
            unknown = sorted(set(cfg) - {a.dest for a in sub._actions})
            if unknown:
                parser.error(f"unknown config keys: {', '.join(unknown)}")
            for action in sub._actions:
                if action.dest not in cfg:
                    continue
                action.required = False
                if isinstance(action, argparse._StoreTrueAction):
                    flag = cfg[action.dest].lower()
                    if flag not in ("true", "false", "1", "0", "yes", "no"):
                        parser.error(f"config key {action.dest!r} expects true or false")
                    cfg[action.dest] = flag in ("true", "1", "yes")
            sub.set_defaults(**cfg)
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except NumericalError as exc:
        print(f"contourvae {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DataError, FormatError, CheckpointError, InvalidContourError, FileNotFoundError) as exc:
        print(f"contourvae {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"contourvae {args.command}: invalid arguments: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return 0


if __name__ == "__main__":
    sys.exit(main())
