"""Command line entry point: ``gaitscreen <subcommand> ...``.

Exit status is 0 on success, 1 for data errors and 2 for usage errors.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig
from .dsp import segment_signal
from .evaluation import FeatureTable, rows_to_csv, run_multiclass, run_protocol1, run_protocol2
from .exceptions import DataError, GaitScreenError
from .ingest import CHANNEL_NAMES, build_manifest, dataset_stats, read_sample_file
from .svm import PolynomialSVC
from . import synth

log = logging.getLogger("gaitscreen")


def write_atomic(path: Path, data: str | bytes) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data.encode() if isinstance(data, str) else data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _config_epilog() -> str:
    lines = ["configuration keys (set in --config FILE or as --<key> flags):"]
    for key, default, text in RunConfig.describe():
        lines.append(f"  {key:<18} default {default:<10} {text}")
    lines.append("environment: GAITSCREEN_JOBS is used when --jobs is not given")
    return "\n".join(lines)


def _config_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("configuration")
    g.add_argument("--config", type=Path, help="key = value file; flags override it")
    for key, default, text in RunConfig.describe():
        g.add_argument(f"--{key.replace('_', '-')}", dest=f"cfg_{key}", metavar="V", default=None,
                       help=f"{text} (default: {default})")
    return p


def resolve_config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if getattr(args, "config", None) else RunConfig()
    overrides = {f.name: getattr(args, f"cfg_{f.name}") for f in fields(RunConfig)
                 if getattr(args, f"cfg_{f.name}", None) is not None}
    return cfg.updated(**overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gaitscreen",
        description="Lameness screening from inertial gait recordings.",
        epilog=_config_epilog(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"gaitscreen {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    cfg = _config_parent()

    p = sub.add_parser("synth", parents=[cfg], help="generate a synthetic dataset")
    p.add_argument("--out", type=Path, required=True)
    shape = p.add_mutually_exclusive_group()
    shape.add_argument("--paper-shape", action="store_true", help="19/7/6/6/5 cows per score")
    shape.add_argument("--cows", metavar="S=N,...", help="cows per score, e.g. 1=10,3=10")
    kind = p.add_mutually_exclusive_group()
    kind.add_argument("--easy", action="store_true", help="strongly separated healthy vs lame gait")
    kind.add_argument("--null", action="store_true", help="gait independent of score")
    p.add_argument("--informative", metavar="GROUPS", help="signal groups carrying the score, e.g. gyro")
    p.add_argument("--files", type=int, default=None, help="files per cow (default 5; 2 with --paper-shape)")
    p.add_argument("--noise", type=float, default=None, help="noise sigma")

    p = sub.add_parser("ingest", parents=[cfg], help="scan a directory and write manifest.csv")
    p.add_argument("data", type=Path)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("stats", parents=[cfg], help="dataset statistics")
    p.add_argument("data", type=Path)
    p.add_argument("--sensors", type=int, default=3)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("features", parents=[cfg], help="write the per-cow feature matrix")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("train", parents=[cfg], help="train on every cow and save the model")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", type=Path)
    src.add_argument("--features", type=Path, help="features.csv from the features subcommand")
    p.add_argument("--out", type=Path)

    p = sub.add_parser("evaluate", parents=[cfg], help="run a benchmark protocol")
    p.add_argument("protocol", choices=("protocol1", "protocol2", "multiclass"))
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", type=Path)
    src.add_argument("--features", type=Path, help="features.csv from the features subcommand")
    p.add_argument("--out", type=Path)

    p = sub.add_parser("dsp-trace", parents=[cfg], help="dump segmentation intermediates of one file")
    p.add_argument("file", type=Path)
    p.add_argument("--channel", choices=CHANNEL_NAMES, default="accel_x")
    p.add_argument("--out", type=Path, required=True)
    return parser


def _parse_cows(text: str) -> dict[int, int]:
    out = {}
    for part in text.split(","):
        s, n = part.split("=")
        out[int(s)] = int(n)
    return out


def cmd_synth(args, cfg: RunConfig) -> int:
    name = "easy" if args.easy else "null" if args.null else "default"
    overrides = {"seed": cfg.seed}
    if args.informative:
        overrides["informative_groups"] = tuple(g.strip() for g in args.informative.split(","))
    if args.noise is not None:
        overrides["noise_sigma"] = args.noise
    spec = synth.preset(name, **overrides)
    if args.paper_shape:
        counts, files = synth.reference_herd_counts(), 2
    elif args.cows:
        counts, files = _parse_cows(args.cows), 5
    else:
        counts, files = {1: 10, 2: 3, 3: 3, 4: 2, 5: 2}, 5
    files = args.files if args.files is not None else files
    manifest = synth.gen_dataset(counts, spec, args.out, n_files=files)
    print(f"wrote {len(manifest.entries)} files for {len(manifest.cows)} cows to {args.out}")
    return 0


def cmd_ingest(args, cfg: RunConfig) -> int:
    manifest = build_manifest(args.data, cfg.utc_offset_hours, n_jobs=cfg.resolved_jobs())
    write_atomic(args.out / "manifest.csv", manifest.to_csv())
    skipped = "path,reason\n" + "".join(f"{p},{r}\n" for p, r in manifest.skipped)
    write_atomic(args.out / "skipped.csv", skipped)
    print(f"{len(manifest.entries)} files, {len(manifest.cows)} cows, {len(manifest.skipped)} skipped")
    return 0


def cmd_stats(args, cfg: RunConfig) -> int:
    manifest = build_manifest(args.data, cfg.utc_offset_hours, n_jobs=cfg.resolved_jobs())
    stats = dataset_stats(manifest, args.sensors)
    sys.stdout.write(stats.to_text())
    if args.out:
        write_atomic(args.out / "stats.csv", stats.to_csv())
        write_atomic(args.out / "stats.txt", stats.to_text())
    return 0


def _table(args, cfg: RunConfig) -> FeatureTable:
    if getattr(args, "features", None):
        return FeatureTable.from_csv(args.features.read_text())
    manifest = build_manifest(args.data, cfg.utc_offset_hours, n_jobs=cfg.resolved_jobs())
    return FeatureTable.from_manifest(manifest, cfg)


def cmd_features(args, cfg: RunConfig) -> int:
    table = _table(args, cfg)
    write_atomic(args.out / "features.csv", table.to_csv())
    write_atomic(args.out / "config.txt", cfg.to_text())
    print(f"{table.X.shape[0]} cows x {table.X.shape[1]} features")
    return 0


def cmd_train(args, cfg: RunConfig) -> int:
    table = _table(args, cfg)
    model = PolynomialSVC(positive_label=1, **cfg.svm_params()).fit(table.X, table.binary_labels)
    print(f"trained on {len(table.cow_ids)} cows: {len(model.support_)} support vectors, "
          f"converged={model.converged_}")
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=".model.", suffix=".npz", dir=args.out)
        os.close(fd)
        try:
            model.save(tmp)
            os.replace(tmp, args.out / "model.npz")
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)
        write_atomic(args.out / "config.txt", cfg.to_text())
    return 0


def cmd_evaluate(args, cfg: RunConfig) -> int:
    table = _table(args, cfg)
    runner = {"protocol1": run_protocol1, "protocol2": run_protocol2, "multiclass": run_multiclass}[args.protocol]
    report = runner(table, cfg)
    text = f"gaitscreen {__version__}\n{cfg.to_text()}\n{report.to_text()}"
    sys.stdout.write(report.to_text())
    if args.out:
        for name, body in report.roc_files().items():
            write_atomic(args.out / name, body)
        write_atomic(args.out / "report.txt", text)
        write_atomic(args.out / "report.csv", rows_to_csv(report.rows(), cfg))
    return 0


def cmd_dsp_trace(args, cfg: RunConfig) -> int:
    sample = read_sample_file(args.file, cfg.utc_offset_hours)
    x = sample.signals[:, CHANNEL_NAMES.index(args.channel)]
    trace = segment_signal(x, sample.sample_rate_hz, cfg.filter_spec)
    cols = {"time": sample.time, "raw": x, **trace.to_columns()}
    header = ",".join(cols)
    body = np.column_stack(list(cols.values()))
    lines = [header] + [",".join(repr(float(v)) for v in row) for row in body]
    write_atomic(args.out / f"trace_{args.channel}.csv", "\n".join(lines) + "\n")
    print(f"{trace.mask.n_motion}/{len(x)} motion samples in {len(trace.mask.runs)} runs")
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "stats": cmd_stats,
    "features": cmd_features,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "dsp-trace": cmd_dsp_trace,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = resolve_config(args)
    except (KeyError, ValueError) as exc:
        print(f"gaitscreen: config error: {exc}", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](args, cfg)
    except (DataError, OSError) as exc:
        print(f"gaitscreen: {exc}", file=sys.stderr)
        return 1
    except GaitScreenError as exc:
        print(f"gaitscreen: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
