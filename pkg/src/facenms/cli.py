"""Command-line entry point: ``facenms <subcommand> ...``.

Exit codes: 0 success, 1 validation error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .errors import ValidationError
from .evaluation import compare, write_table_csv, write_table_json
from .metrics import DEFAULT_PAIR_BUDGET, count_stats, intra_similarity_histogram, sparsity_report
from .samplers import ORDERS, STRATEGIES, SamplerConfig, calibrate_threshold, run_sampler
from .store import (
    apply_manifest,
    format_fingerprint,
    read_dataset,
    read_manifest,
    write_dataset,
    write_manifest,
)
from .synth import SynthConfig, generate

log = logging.getLogger("facenms")

LOG_ENV = "FACENMS_LOG_LEVEL"
RANDOM_STRATEGIES = {"sim_threshold", "global_random", "identity_random"}


class UsageError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _dump_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _out_format(args, path) -> str:
    if args.format:
        return args.format
    return "jsonl" if str(path).endswith(".jsonl") else "binary"


def _load(args, path):
    return read_dataset(path, normalize=args.normalize)


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"bad number list {text!r}") from exc


# ------------------------------------------------------------ subcommands


def cmd_generate(args) -> None:
    cfg = SynthConfig.from_json(Path(args.config).read_text(encoding="utf-8"))
    train, holdout = generate(cfg)
    if holdout is not None and not args.out_holdout:
        raise UsageError("config has holdout_per_identity > 0; pass --out-holdout")
    write_dataset(train, args.out_train, _out_format(args, args.out_train))
    sidecar = {
        "tool_version": __version__,
        "synth_config": cfg.to_dict(),
        "train_fingerprint": format_fingerprint(train.fingerprint),
    }
    if holdout is not None:
        write_dataset(holdout, args.out_holdout, _out_format(args, args.out_holdout))
        sidecar["holdout_fingerprint"] = format_fingerprint(holdout.fingerprint)
    _dump_json(sidecar, str(args.out_train) + ".synth.json")
    print(f"train: {len(train)} identities, {train.face_count} faces, fingerprint {format_fingerprint(train.fingerprint)}")
    if holdout is not None:
        print(f"holdout: {holdout.face_count} faces, fingerprint {format_fingerprint(holdout.fingerprint)}")


def cmd_sample(args) -> None:
    if args.strategy in RANDOM_STRATEGIES and args.seed is None:
        raise UsageError(f"strategy {args.strategy} is randomized; pass --seed")
    cfg = SamplerConfig(
        strategy=args.strategy,
        n_t=args.nt,
        ratio=args.ratio,
        seed=args.seed if args.strategy in RANDOM_STRATEGIES else None,
        score_path=args.scores,
        order=args.order,
        max_group_size=args.max_group_size,
    )
    ds = _load(args, args.input)
    m = run_sampler(ds, cfg, threads=args.threads)
    write_manifest(m, args.out)
    print(f"{cfg.strategy}: retained {m.retained_count}/{m.original_count} faces (ratio {m.ratio:.6f})")


def cmd_calibrate(args) -> None:
    ds = _load(args, args.input)
    cal = calibrate_threshold(ds, args.target_ratio, args.tol, args.max_iters)
    doc = cal.to_dict()
    doc["tool_version"] = __version__
    doc["dataset_fingerprint"] = format_fingerprint(ds.fingerprint)
    _dump_json(doc, args.out)
    print(f"n_t={cal.n_t!r} achieved_ratio={cal.achieved_ratio:.6f} converged={cal.converged}")


def cmd_apply(args) -> None:
    ds = _load(args, args.input)
    out = apply_manifest(ds, read_manifest(args.manifest))
    write_dataset(out, args.out, _out_format(args, args.out))
    print(f"wrote {out.face_count} faces, fingerprint {format_fingerprint(out.fingerprint)}")


def cmd_metrics(args) -> None:
    ds = _load(args, args.input)
    if args.manifest:
        ds = apply_manifest(ds, read_manifest(args.manifest))
    hist = intra_similarity_histogram(ds, args.bins, pair_budget=args.pair_budget, seed=args.seed)
    counts = count_stats(ds)
    report = {
        "tool_version": __version__,
        "dataset_fingerprint": format_fingerprint(ds.fingerprint),
        "identities": len(ds),
        "faces": ds.face_count,
        "sparsity": sparsity_report(ds).to_dict(),
        "count_stats": counts.to_dict(),
        "similarity_histogram": hist.to_dict(),
        "notes": {
            "sparsity": "minus mean cosine over all ordered pairs, self-pairs included",
            "similarity_histogram": "unordered within-identity pairs i<j; single-face identities contribute nothing",
        },
    }
    _dump_json(report, args.out)
    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bin_left", "bin_right", "frequency"])
            for lo, hi, fr in hist.rows():
                w.writerow([repr(lo), repr(hi), repr(fr)])
    mean = "undefined" if hist.mean is None else f"{hist.mean:.6f}"
    print(f"faces per identity {counts}; mean pair similarity {mean}")


def cmd_eval(args) -> None:
    if args.seed is None:
        raise UsageError("eval samples verification pairs; pass --seed")
    far = _floats(args.far)
    if not far:
        raise UsageError("--far needs at least one level")
    full = _load(args, args.train)
    holdout = _load(args, args.holdout)
    paths = [p for p in args.manifests.split(",") if p.strip()] if args.manifests else []
    manifests = [read_manifest(p) for p in paths]
    reports = compare(full, manifests, holdout, far, pair_budget=args.pair_budget, seed=args.seed)
    write_table_csv(reports, far, args.out)
    if args.json:
        write_table_json(reports, full, holdout, args.json)
    for r in reports:
        print(f"{r.strategy:>16s} ratio={r.ratio:.4f} rank1={r.rank1_accuracy:.4f}")


def cmd_convert(args) -> None:
    ds = _load(args, args.input)
    write_dataset(ds, args.out, _out_format(args, args.out))
    print(f"fingerprint {format_fingerprint(ds.fingerprint)}")


# ----------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (required by randomized steps)")
    common.add_argument("--threads", type=int, default=1, help="worker threads, 0 = one per CPU")
    common.add_argument("--format", choices=["binary", "jsonl"], default=None, help="output dataset format")
    common.add_argument("--normalize", action="store_true", help="rescale input features to unit norm")

    parser = _Parser(prog="facenms", description="Core-set selection for face embedding datasets.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", parents=[common], help="write a synthetic train/holdout pair")
    p.add_argument("--config", required=True)
    p.add_argument("--out-train", required=True)
    p.add_argument("--out-holdout")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("sample", parents=[common], help="run a selection strategy")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--strategy", required=True, choices=STRATEGIES)
    p.add_argument("--nt", type=float)
    p.add_argument("--ratio", type=float)
    p.add_argument("--scores")
    p.add_argument("--order", choices=ORDERS)
    p.add_argument("--max-group-size", type=int, default=4096)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("calibrate", parents=[common], help="find the Face-NMS threshold for a target ratio")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--target-ratio", type=float, required=True)
    p.add_argument("--tol", type=float, default=0.005)
    p.add_argument("--max-iters", type=int, default=60)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("apply", parents=[common], help="materialize a manifest as a dataset")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_apply)

    p = sub.add_parser("metrics", parents=[common], help="sparsity, counts and similarity histogram")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--manifest")
    p.add_argument("--bins", type=int, default=40)
    p.add_argument("--pair-budget", type=int, default=DEFAULT_PAIR_BUDGET)
    p.add_argument("--out", required=True)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("eval", parents=[common], help="compare core sets against the full set")
    p.add_argument("--train", required=True)
    p.add_argument("--holdout", required=True)
    p.add_argument("--manifests", default="")
    p.add_argument("--far", default="1e-2,1e-3")
    p.add_argument("--pair-budget", type=int, default=1_000_000)
    p.add_argument("--out", required=True)
    p.add_argument("--json")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("convert", parents=[common], help="transcode between binary and JSONL")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_convert)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get(LOG_ENV, "WARNING").upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        if args.threads < 0:
            raise UsageError("--threads must be >= 0")
        args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
