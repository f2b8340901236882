"""Command-line interface: generate, train, eval, cam, verify.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import checkpoint as ckpt
from . import data as datamod
from .cam import colorize_heatmap, compute_cam
from .config import RunConfig, load_synthetic_spec
from .errors import DataError, GcmlError, NumericError, UsageError
from .groups import group_spec, rotate_feature_map
from .netpbm import load_pgm_ppm, save_ppm
from .retrieval import format_recall_table, rotated_protocol
from .train import metrics_to_tsv, train_classification, train_retrieval


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="gcml", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="write a synthetic dataset")
    p_gen.add_argument("--spec", help="synthetic spec file (key = value)")
    p_gen.add_argument("--out", required=True, help="output directory")

    p_train = sub.add_parser("train", help="train one phase")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--phase", required=True, choices=["classify", "retrieve"])
    p_train.add_argument("--init", help="checkpoint to start from")
    p_train.add_argument("--out", required=True, help="checkpoint to write")
    p_train.add_argument("--metrics", help="metrics TSV (default: <out>.metrics.tsv)")
    p_train.add_argument("--allow-cold-start", action="store_true",
                         help="permit retrieval training without a phase-1 checkpoint")
    p_train.add_argument("--print-config", action="store_true")

    p_eval = sub.add_parser("eval", help="compute Recall@n tables")
    p_eval.add_argument("--config", required=True)
    p_eval.add_argument("--ckpt", required=True)
    mode = p_eval.add_mutually_exclusive_group(required=True)
    mode.add_argument("--rotated", action="store_true",
                      help="rotated-query protocol (paired with unrotated)")
    mode.add_argument("--plain", action="store_true", help="unrotated queries only")
    p_eval.add_argument("--out", required=True, help="recall table TSV")
    p_eval.add_argument("--print-config", action="store_true")

    p_cam = sub.add_parser("cam", help="write activation heatmaps")
    p_cam.add_argument("--config", required=True)
    p_cam.add_argument("--ckpt", required=True)
    p_cam.add_argument("--image", required=True, help="query image (PGM)")
    p_cam.add_argument("--mode", required=True, choices=["class", "retrieval"])
    p_cam.add_argument("--class-id", type=int,
                       help="class for --mode class (default: predicted class)")
    p_cam.add_argument("--db-image", help="database image whose embedding is "
                                          "back-projected (--mode retrieval)")
    p_cam.add_argument("--out", required=True, help="output PPM")
    p_cam.add_argument("--sweep-rotations", action="store_true",
                       help="write four maps, one per 90-degree rotation")
    p_cam.add_argument("--print-config", action="store_true")

    p_verify = sub.add_parser("verify", help="run property suites")
    p_verify.add_argument("--suite", default="all",
                          choices=["group", "equivariance", "gradient", "all"])
    return parser


def cmd_generate(args) -> int:
    spec = load_synthetic_spec(args.spec)
    ds = datamod.generate_synthetic(spec)
    datamod.write_dataset(ds, args.out)
    print(f"wrote {len(ds)} images under {args.out} "
          f"({spec.num_classes} classes x {spec.instances_per_class} instances "
          f"x {spec.views_per_instance} views)")
    return 0


def _load_train_dataset(cfg: RunConfig) -> datamod.Dataset:
    ds = datamod.load_dataset(cfg["data.root"])
    views = cfg["data.train_views"]
    if views:
        ds = datamod.split_by_view(ds, list(views))
    if len(ds) == 0:
        raise DataError("no training samples after view filtering")
    return ds


def cmd_train(args) -> int:
    cfg = RunConfig.from_file(args.config)
    if args.print_config:
        print(cfg.render(), end="")
    model_cfg = cfg.model_config()
    train_cfg = cfg.train_config(args.phase, args.allow_cold_start)
    if args.phase == "retrieve" and not args.init and not args.allow_cold_start:
        raise UsageError("retrieval fine-tuning is the second step of two-step "
                         "training: pass --init <phase-1 checkpoint> "
                         "(or --allow-cold-start to override)")
    if args.init:
        model = ckpt.load_checkpoint(args.init, model_cfg)
    else:
        model = ckpt.build_model(model_cfg)
    dataset = _load_train_dataset(cfg)
    if args.phase == "classify":
        metrics = train_classification(model, dataset, train_cfg)
    else:
        metrics = train_retrieval(model, dataset, train_cfg)
    ckpt.save_checkpoint(model, args.out)
    metrics_path = args.metrics or (args.out + ".metrics.tsv")
    with open(metrics_path, "w", encoding="utf-8") as fh:
        fh.write(metrics_to_tsv(metrics, cfg["train.log_timing"]))
    last = metrics[-1]
    print(f"{args.phase}: {len(metrics)} epochs, final loss {last.loss:.4f}, "
          f"score {last.score:.4f}; checkpoint -> {args.out}")
    return 0


def _method_name(cfg: RunConfig) -> str:
    name = cfg["model.variant"]
    if cfg["model.attention"]:
        name += "+attn"
    return name


def cmd_eval(args) -> int:
    cfg = RunConfig.from_file(args.config)
    if args.print_config:
        print(cfg.render(), end="")
    model = ckpt.load_checkpoint(args.ckpt, cfg.model_config())
    ds = datamod.load_dataset(cfg["data.root"])
    database = datamod.split_by_view(ds, list(cfg["eval.database_views"]))
    queries = datamod.split_by_view(ds, list(cfg["eval.query_views"]))
    if len(queries) == 0:
        raise DataError("empty query set")
    if len(database) == 0:
        raise DataError("empty database set")
    n_values = list(cfg["eval.n_values"])
    tables = rotated_protocol(model, database, queries, cfg["eval.seed"],
                              n_values, cfg["eval.batch"])
    method = _method_name(cfg)
    with open(args.out, "w", encoding="utf-8") as fh:
        if args.rotated:
            fh.write(format_recall_table(f"{method}.rotated", tables["rotated"]))
            fh.write(format_recall_table(f"{method}.unrotated", tables["unrotated"]))
        else:
            fh.write(format_recall_table(f"{method}.unrotated", tables["unrotated"]))
    shown = tables["rotated"] if args.rotated else tables["unrotated"]
    summary = "  ".join(f"R@{n}={shown[n]:.1f}%" for n in n_values)
    print(f"{method}: {summary} -> {args.out}")
    return 0


def cmd_cam(args) -> int:
    cfg = RunConfig.from_file(args.config)
    if args.print_config:
        print(cfg.render(), end="")
    model = ckpt.load_checkpoint(args.ckpt, cfg.model_config())
    image = load_pgm_ppm(args.image).data
    if args.mode == "class":
        if args.class_id is not None:
            target = ("class", args.class_id)
        else:
            from .tensor import no_grad

            with no_grad():
                logits = model.forward_classify(image[None], training=False)
            target = ("class", int(logits.data[0].argmax()))
    else:
        if not args.db_image:
            raise UsageError("--mode retrieval requires --db-image")
        from .retrieval import embed_dataset

        db = load_pgm_ppm(args.db_image).data
        target = ("retrieval", embed_dataset(model, db[None])[0])
    if args.sweep_rotations:
        spec = group_spec("p4")
        stem, ext = os.path.splitext(args.out)
        for g, deg in enumerate((0, 90, 180, 270)):
            rotated = rotate_feature_map(image, spec, g)
            heat = compute_cam(model, rotated, target)
            save_ppm(f"{stem}_rot{deg}{ext or '.ppm'}", colorize_heatmap(heat))
        print(f"wrote 4 rotation maps at {stem}_rot*{ext or '.ppm'}")
    else:
        heat = compute_cam(model, image, target)
        save_ppm(args.out, colorize_heatmap(heat))
        print(f"wrote {args.out}")
    return 0


def cmd_verify(args) -> int:
    from .verify import run_suites

    names = ["group", "equivariance", "gradient"] if args.suite == "all" else [args.suite]
    rows, all_ok = run_suites(names)
    for name, ok, detail in rows:
        print(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
    if not all_ok:
        raise NumericError("verification suite failed")
    print(f"all {len(rows)} properties passed")
    return 0


_COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "eval": cmd_eval,
    "cam": cmd_cam,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except GcmlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
