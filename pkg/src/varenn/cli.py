"""Command-line pipeline driver.

Verbs: synth, encode, dataset, train, eval, suite, ablate, render, report.
Any option may also come from an INI config file (``--config``, one section
per verb); explicit flags win over the file. Every run writes a ``.params``
provenance file listing the resolved parameters next to its primary output.

Exit codes: 0 success; 2 format, 3 validation, 4 domain/configuration,
5 dataset, 6 statistics, 7 model, 8 I/O, 9 other pipeline error, 1 unexpected.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys

import numpy as np

from . import dataset as ds
from . import encode as enc
from .cube import global_minmax, load_cube, save_cube, variable
from .errors import (ConfigurationError, ConsistencyError, DomainError,
                     EmptyDatasetError, FormatError, MissingDataError,
                     ShapeError, SplitError, StatisticsError, ValidationError,
                     VarennError)
from .experiments import (ExperimentSpec, enumerate_combinations, run_ablations,
                          run_suite, save_suite_json, suite_from_json,
                          write_ablation_report, write_suite_report)
from .lenet import (LeNetConfig, TrainConfig, load_checkpoint, predict,
                    save_checkpoint, train, write_training_log)
from .render import MapRecord, render_map
from .stats import ConfusionMatrix, UndefinedKappaError, accuracy, weighted_kappa
from .synth import parse_synth_config, synth_generate
from .windows import WindowSpec

_EXIT_CODES = (
    ((FormatError,), 2, "format"),
    ((ValidationError,), 3, "validation"),
    ((DomainError, ConfigurationError), 4, "domain"),
    ((SplitError, EmptyDatasetError, MissingDataError), 5, "dataset"),
    ((UndefinedKappaError, StatisticsError), 6, "statistics"),
    ((ShapeError, ConsistencyError), 7, "model"),
    ((OSError,), 8, "io"),
    ((VarennError,), 9, "pipeline"),
)


def _classify(exc: BaseException) -> tuple[int, str]:
    for types, code, category in _EXIT_CODES:
        if isinstance(exc, types):
            return code, category
    return 1, "unexpected"


def _write_params(path: str, verb: str, resolved: dict) -> None:
    with open(path, "w") as fh:
        fh.write(f"# varenn {verb}: resolved parameters\n")
        for key in sorted(resolved):
            fh.write(f"{key} = {resolved[key]}\n")


def _resolved(args: argparse.Namespace) -> dict:
    skip = {"func", "config"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _add_train_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--gamma", type=float, default=0.95, help="per-epoch lr decay multiplier")
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--train-seed", type=int, default=0)
    p.add_argument("--precision", choices=["real32", "real64"], default="real32")
    p.add_argument("--momentum", type=float, default=0.0)
    p.add_argument("--no-quantize", action="store_true",
                   help="feed raw [0,1] floats instead of 8-bit quantized values")


def _train_cfg(args: argparse.Namespace) -> TrainConfig:
    return TrainConfig(epochs=args.epochs, base_lr=args.lr, decay_gamma=args.gamma,
                       batch_size=args.batch_size, seed=args.train_seed,
                       precision=args.precision, momentum=args.momentum,
                       quantize_inputs=not args.no_quantize)


def _add_net_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--conv1-filters", type=int, default=20)
    p.add_argument("--conv2-filters", type=int, default=50)
    p.add_argument("--fc-units", type=int, default=500)


def _net_cfg(args: argparse.Namespace) -> LeNetConfig:
    return LeNetConfig(conv1_filters=args.conv1_filters, conv2_filters=args.conv2_filters,
                       fc_units=args.fc_units)


def _parse_inputs(text: str) -> tuple[str, ...]:
    codes = tuple(tok.strip() for tok in text.split(",") if tok.strip())
    order = sorted(codes, key=lambda c: variable(c).canonical_index)
    if list(codes) != order:
        raise ValidationError(f"inputs must be in canonical order: {','.join(order)}")
    return codes


def _spec_from_args(args: argparse.Namespace) -> ExperimentSpec:
    return ExperimentSpec(id=getattr(args, "id", 0), target=args.target,
                          inputs=_parse_inputs(args.inputs),
                          knockout=enc.Knockout.from_string(args.knockout),
                          training_years=args.training_years,
                          c_t=args.ct, seed=args.seed)


def cmd_synth(args: argparse.Namespace) -> None:
    spec = parse_synth_config(args.spec)
    if args.seed is not None:
        from dataclasses import replace
        spec = replace(spec, seed=args.seed)
    cube = synth_generate(spec)
    save_cube(cube, args.out)
    _write_params(args.out + ".params", "synth", _resolved(args))
    print(f"wrote {args.out}: {cube.n_cells} cells x {cube.n_years} years x "
          f"{len(cube.variables)} variables")


def cmd_encode(args: argparse.Namespace) -> None:
    cube = load_cube(args.cube)
    codes = _parse_inputs(args.inputs)
    window = WindowSpec(12 * (args.start_year - cube.start_year), args.training_years)
    stats = global_minmax(cube)
    knockout = enc.Knockout.from_string(args.knockout)
    channels = ds._window_channels(cube, codes, args.cell, window, stats, args.scaling, knockout)
    if channels is None:
        raise MissingDataError(f"cell {args.cell} window {args.start_year} touches missing data")
    img = enc.compose_rgb(channels, tuple(variable(c) for c in codes), knockout, args.training_years)
    enc.export_png(img, args.out)
    _write_params(args.out + ".params", "encode", _resolved(args))
    print(f"wrote {args.out}")


def cmd_dataset(args: argparse.Namespace) -> None:
    cube = load_cube(args.cube)
    spec = _spec_from_args(args)
    manifest = ds.build_dataset(cube, spec, scaling=args.scaling)
    ds.save_manifest(manifest, args.out_manifest)
    enc.write_image_cache(manifest.images, args.out_cache)
    _write_params(args.out_manifest + ".params", "dataset", _resolved(args))
    hist = manifest.class_histogram()
    print(f"wrote {args.out_manifest} ({len(manifest.records)} records, "
          f"{manifest.n_excluded} excluded) and {args.out_cache}")
    for split in ds.Split:
        print(f"  {split.value}: {hist[split].tolist()}")


def cmd_train(args: argparse.Namespace) -> None:
    manifest = ds.load_manifest(args.manifest)
    images = enc.read_image_cache(args.cache)
    cfg = _train_cfg(args)
    tensors = ds.split_tensors(manifest, images, quantize_inputs=cfg.quantize_inputs)
    train_x, train_y = tensors[ds.Split.TRAIN]
    val_x, val_y = tensors[ds.Split.VALIDATION]
    params, log = train(train_x, train_y, val_x, val_y, cfg, net_cfg=_net_cfg(args))
    save_checkpoint(params, args.out_checkpoint)
    if args.out_log:
        write_training_log(log, args.out_log)
    _write_params(args.out_checkpoint + ".params", "train", _resolved(args))
    last = log[-1]
    print(f"wrote {args.out_checkpoint}; final epoch {last.epoch}: "
          f"train_loss={last.train_loss:.4f} val_acc={last.val_accuracy:.4f}")


def _evaluate(manifest, images, params, split: ds.Split, quantize_inputs: bool):
    tensors = ds.split_tensors(manifest, images, quantize_inputs=quantize_inputs)
    x, y = tensors[split]
    if len(x) == 0:
        raise EmptyDatasetError(f"split {split.value} has no samples")
    predicted, _ = predict(params, x)
    cm = ConfusionMatrix.from_predictions(y, predicted)
    return cm, predicted, y


def cmd_eval(args: argparse.Namespace) -> None:
    manifest = ds.load_manifest(args.manifest)
    images = enc.read_image_cache(args.cache)
    params = load_checkpoint(args.checkpoint)
    cm, _, _ = _evaluate(manifest, images, params, ds.Split.from_string(args.split),
                         not args.no_quantize)
    acc = accuracy(cm)
    try:
        kappa = weighted_kappa(cm)
        kappa_text = f"{kappa:.6f}"
    except UndefinedKappaError:
        kappa_text = "nan"
    lines = [f"split = {args.split}", f"n = {cm.n}", f"accuracy = {acc:.6f}",
             f"weighted_kappa = {kappa_text}", "confusion (rows true, cols predicted):"]
    for row in cm.counts:
        lines.append("  " + " ".join(f"{int(v):6d}" for v in row))
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        _write_params(args.out + ".params", "eval", _resolved(args))
    print(text, end="")


def cmd_suite(args: argparse.Namespace) -> None:
    cube = load_cube(args.cube)
    specs = None
    if args.ids:
        wanted = {int(tok) for tok in args.ids.split(",")}
        specs = [s for s in enumerate_combinations(args.target, c_t=args.ct, seed=args.seed)
                 if s.id in wanted]
    os.makedirs(args.out_dir, exist_ok=True)
    suite = run_suite(cube, args.target, c_t=args.ct, seed=args.seed, specs=specs,
                      train_cfg=_train_cfg(args), net_cfg=_net_cfg(args),
                      scaling=args.scaling, workers=args.workers,
                      out_dir=args.out_dir if args.artifacts else None)
    save_suite_json(suite, os.path.join(args.out_dir, "suite.json"))
    write_suite_report(suite, os.path.join(args.out_dir, "report.txt"))
    _write_params(os.path.join(args.out_dir, "params.txt"), "suite", _resolved(args))
    print(f"suite complete: {len(suite.rows)} experiments, {len(suite.failures)} failures; "
          f"reports in {args.out_dir}")


def cmd_ablate(args: argparse.Namespace) -> None:
    cube = load_cube(args.cube)
    spec = _spec_from_args(args)
    report = run_ablations(cube, spec, net_cfg=_net_cfg(args), train_cfg=_train_cfg(args),
                           scaling=args.scaling)
    write_ablation_report(report, args.out)
    _write_params(args.out + ".params", "ablate", _resolved(args))
    for row in report.rows:
        print(f"{row.label:<30} accuracy={row.accuracy:.4f}")


def cmd_render(args: argparse.Namespace) -> None:
    manifest = ds.load_manifest(args.manifest)
    images = enc.read_image_cache(args.cache)
    params = load_checkpoint(args.checkpoint)
    start_years = sorted({manifest.start_year + rec.window.start_year for rec in manifest.records})
    chosen = args.start_year if args.start_year is not None else start_years[-1]
    if chosen not in start_years:
        raise DomainError(f"no windows start in {chosen}; available: {start_years}")
    picked = [(i, rec) for i, rec in enumerate(manifest.records)
              if manifest.start_year + rec.window.start_year == chosen]
    refs = np.array([rec.image_ref for _, rec in picked], dtype=np.int64)
    batch = images[refs]
    if not args.no_quantize:
        batch = enc.quantize(batch).astype(np.float32) / 255.0
    predicted, _ = predict(params, batch)
    records = [MapRecord(rec.lat, rec.lon, rec.label_ordinal, int(p) + 1)
               for (_, rec), p in zip(picked, predicted)]
    class_path = args.out_prefix + "_classes.png"
    error_path = args.out_prefix + "_errors.png"
    render_map(records, class_path, kind="classes", width=args.width, height=args.height)
    render_map(records, error_path, kind="errors", width=args.width, height=args.height)
    _write_params(args.out_prefix + ".params", "render", _resolved(args))
    n_wrong = sum(1 for r in records if r.true_ordinal != r.predicted_ordinal)
    print(f"wrote {class_path} and {error_path} ({len(records)} cells, {n_wrong} errors)")


def cmd_report(args: argparse.Namespace) -> None:
    with open(args.suite_json) as fh:
        suite = suite_from_json(fh.read())
    write_suite_report(suite, args.out)
    _write_params(args.out + ".params", "report", _resolved(args))
    print(f"wrote {args.out}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="varenn",
                                     description="Climate trend classification pipeline")
    parser.add_argument("--config", default=None,
                        help="INI file with one section per verb supplying option defaults")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("synth", help="generate a synthetic climate cube")
    p.add_argument("--spec", required=True, help="synthetic spec config file")
    p.add_argument("--seed", type=int, default=None, help="override the spec's seed")
    p.add_argument("--out", required=True, help="output cube path (VCUBE1)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("encode", help="export one window as a PNG image")
    p.add_argument("--cube", required=True)
    p.add_argument("--inputs", required=True, help="1..3 comma-separated variable codes")
    p.add_argument("--cell", type=int, required=True)
    p.add_argument("--start-year", type=int, required=True)
    p.add_argument("--training-years", type=int, default=30, choices=[10, 30])
    p.add_argument("--knockout", default="none",
                   choices=[k.value for k in enc.Knockout])
    p.add_argument("--scaling", default="global", choices=["global", "per_image"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("dataset", help="materialize a labeled dataset")
    p.add_argument("--cube", required=True)
    p.add_argument("--target", required=True, choices=["TMP", "PRE"])
    p.add_argument("--inputs", required=True)
    p.add_argument("--id", type=int, default=0, help="experiment id recorded in the manifest")
    p.add_argument("--ct", type=float, default=0.0, help="grid selection threshold")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--knockout", default="none", choices=[k.value for k in enc.Knockout])
    p.add_argument("--training-years", type=int, default=30, choices=[10, 30])
    p.add_argument("--scaling", default="global", choices=["global", "per_image"])
    p.add_argument("--out-manifest", required=True)
    p.add_argument("--out-cache", required=True)
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser("train", help="train the classifier on a dataset")
    p.add_argument("--manifest", required=True)
    p.add_argument("--cache", required=True)
    _add_train_args(p)
    _add_net_args(p)
    p.add_argument("--out-checkpoint", required=True)
    p.add_argument("--out-log", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on one split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--cache", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", default="test", choices=[s.value for s in ds.Split])
    p.add_argument("--no-quantize", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("suite", help="run a combinatorial experiment suite")
    p.add_argument("--cube", required=True)
    p.add_argument("--target", required=True, choices=["TMP", "PRE"])
    p.add_argument("--ct", type=float, default=0.98)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ids", default=None, help="comma-separated experiment ids (default: all 92)")
    p.add_argument("--scaling", default="global", choices=["global", "per_image"])
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--artifacts", action="store_true",
                   help="also write per-experiment manifests, checkpoints, and logs")
    _add_train_args(p)
    _add_net_args(p)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_suite)

    p = sub.add_parser("ablate", help="knockout and shortened-training comparison")
    p.add_argument("--cube", required=True)
    p.add_argument("--target", required=True, choices=["TMP", "PRE"])
    p.add_argument("--inputs", required=True)
    p.add_argument("--id", type=int, default=0)
    p.add_argument("--ct", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--knockout", default="none", choices=[k.value for k in enc.Knockout])
    p.add_argument("--training-years", type=int, default=30)
    p.add_argument("--scaling", default="global", choices=["global", "per_image"])
    _add_train_args(p)
    _add_net_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("render", help="render classification and error maps")
    p.add_argument("--manifest", required=True)
    p.add_argument("--cache", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--start-year", type=int, default=None,
                   help="window start year to map (default: latest)")
    p.add_argument("--no-quantize", action="store_true")
    p.add_argument("--width", type=int, default=720)
    p.add_argument("--height", type=int, default=360)
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("report", help="re-render a report from suite.json")
    p.add_argument("--suite-json", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    """Inject config-file values as option defaults for the requested verb."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    path = argv[idx + 1]
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if not cp.read(path):
        raise ConfigurationError(f"cannot read config file {path}")
    verbs = [tok for tok in argv if not tok.startswith("-") and tok != path]
    if not verbs:
        return argv
    verb = verbs[0]
    if verb not in cp:
        return argv
    injected: list[str] = []
    for key, value in cp[verb].items():
        flag = "--" + key.replace("_", "-")
        if flag in argv:
            continue
        if value.strip().lower() in ("true", "yes", "on"):
            injected.append(flag)
        else:
            injected.extend([flag, value])
    # config-derived options go right after the verb so explicit flags stay authoritative
    pos = argv.index(verb) + 1
    return argv[:pos] + injected + argv[pos:]


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config(parser, argv)
        args = parser.parse_args(argv)
        args.func(args)
        return 0
    except VarennError as exc:
        code, category = _classify(exc)
        print(f"ERROR {category}: {exc}", file=sys.stderr)
        return code
    except OSError as exc:
        print(f"ERROR io: {exc}", file=sys.stderr)
        return 8


if __name__ == "__main__":
    sys.exit(main())
