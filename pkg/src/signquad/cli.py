"""``signquad`` command line.

Exit codes: 0 success, 1 domain failure (bad labels, evaluation mismatch,
diverged training), 2 I/O or usage error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from ._io import write_atomic, write_text_atomic
from .boxdqn import (SyntheticTaskFactory, TrainConfig, TrainingDiverged, curve_csv,
                     dumps_checkpoint, evaluate_policy, evaluate_random_policy,
                     loads_checkpoint, train)
from .evaluate import EvaluationError, MatchConfig, NameNormalization, evaluate_dataset
from .labels import LabelError, LabelFormat, load_label_file
from .pipeline import ComposeOptions, compose, load_inputs, write_predictions
from .rectify import DirectionRule, RectifyError, encode_pnm, read_pnm, rectify_region

EXIT_OK, EXIT_DOMAIN, EXIT_IO = 0, 1, 2
DEFAULT_SEED = 7

log = logging.getLogger("signquad")


class DomainFailure(Exception):
    pass


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("SIGNQUAD_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise argparse.ArgumentTypeError(f"SIGNQUAD_SEED is not an integer: {env!r}")
    return DEFAULT_SEED


def _emit(args, text: str) -> None:
    if args.output:
        write_text_atomic(args.output, text)
    else:
        sys.stdout.write(text)


def _dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, indent=2) + "\n"


def cmd_validate(args) -> int:
    failed = False
    for path in args.paths:
        try:
            _, diags = load_label_file(path, args.label_format)
        except LabelError as exc:
            print(f"{path}: {exc.reason}", file=sys.stderr)
            failed = True
            continue
        for d in diags:
            print(d.format(path), file=sys.stderr)
        failed |= bool(diags)
    return EXIT_DOMAIN if failed and args.strict else EXIT_OK


def cmd_rectify(args) -> int:
    image = read_pnm(args.image)
    records, diags = load_label_file(args.labels, args.label_format, strict=args.strict)
    for d in diags:
        print(d.format(args.labels), file=sys.stderr)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ext = "pgm" if image.channels == 1 else "ppm"
    for i, rec in enumerate(records):
        patch = rectify_region(image, rec.quad)
        write_atomic(out / f"{i:04d}.{ext}", encode_pnm(patch))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = MatchConfig(iou_threshold=args.iou,
                      name_normalization=NameNormalization(args.name_normalization))
    report = evaluate_dataset(args.pred_dir, args.gt_dir, cfg)
    _emit(args, report.to_json() if args.format == "json" else report.format_table())
    return EXIT_OK


def cmd_compose(args) -> int:
    inputs, diags = load_inputs(args.detect_dir, args.ocr_dir, strict=args.strict)
    options = ComposeOptions(refit_quads=args.refit_quads,
                             enforce_name_rules=args.enforce_name_rules,
                             direction_rule=DirectionRule(args.direction_threshold),
                             line_overlap=args.line_overlap)
    predictions, more = compose(inputs, options)
    for d in diags + more:
        print(d, file=sys.stderr)
    write_predictions(args.out_dir, predictions)
    return EXIT_OK


def _factory(args) -> SyntheticTaskFactory:
    return SyntheticTaskFactory(probe_features=not args.no_probes)


def cmd_dqn_train(args) -> int:
    cfg = TrainConfig(episodes=args.episodes, gamma=args.gamma, learning_rate=args.lr,
                      batch_size=args.batch_size, target_sync=args.target_sync,
                      seed=_seed(args))
    result = train(cfg, _factory(args))
    write_atomic(args.checkpoint, dumps_checkpoint(result.net))
    if args.curve:
        write_text_atomic(args.curve, curve_csv(result.curve))
    last = result.curve[-1].mean_final_score if result.curve else float("nan")
    summary = {"checkpoint": str(args.checkpoint), "episodes": cfg.episodes,
               "seed": cfg.seed, "final_mean_score": last}
    _emit(args, _dump_json(summary) if args.format == "json"
          else f"trained {cfg.episodes} episodes (seed {cfg.seed}); "
               f"trailing mean final score {last:.4f}\n")
    return EXIT_OK


def cmd_dqn_eval(args) -> int:
    net = loads_checkpoint(Path(args.checkpoint).read_bytes())
    factory = _factory(args)
    seed = _seed(args)
    trained = evaluate_policy(net, args.episodes, seed, factory)
    random = evaluate_random_policy(args.episodes, seed, factory)
    if args.format == "json":
        _emit(args, _dump_json({"seed": seed, "trained": trained.to_dict(),
                                "random": random.to_dict()}))
    else:
        rows = [("policy", "final score", "final IoU", "initial IoU", "steps")]
        for name, r in (("trained", trained), ("random", random)):
            rows.append((name, f"{r.mean_final_score:.4f}", f"{r.mean_final_iou:.4f}",
                         f"{r.mean_initial_iou:.4f}", f"{r.mean_steps:.2f}"))
        widths = [max(len(r[i]) for r in rows) for i in range(5)]
        _emit(args, "".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() + "\n"
                            for r in rows))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    _fmt = argparse.ArgumentDefaultsHelpFormatter
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help=f"RNG seed; falls back to $SIGNQUAD_SEED, then {DEFAULT_SEED}")
    common.add_argument("--strict", action="store_true",
                        help="treat any malformed label line as a failure")
    common.add_argument("--output", "-o", default=None,
                        help="write the report here instead of stdout")
    common.add_argument("--format", choices=("table", "json"), default="table",
                        help="report format")

    parser = argparse.ArgumentParser(prog="signquad",
                                     description="Signboard label tooling, scoring and box refinement.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    fmt_choices = [f.value for f in LabelFormat]

    p = sub.add_parser("validate", parents=[common], formatter_class=_fmt, help="check label files")
    p.add_argument("paths", nargs="+")
    p.add_argument("--label-format", "-l", choices=fmt_choices, default="sign")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("rectify", parents=[common], formatter_class=_fmt, help="cut perspective-corrected patches")
    p.add_argument("image", help="PGM/PPM image")
    p.add_argument("labels", help="label file whose quads are rectified")
    p.add_argument("out_dir")
    p.add_argument("--label-format", "-l", choices=fmt_choices, default="sign")
    p.set_defaults(func=cmd_rectify)

    p = sub.add_parser("evaluate", parents=[common], formatter_class=_fmt, help="score predictions against ground truth")
    p.add_argument("pred_dir")
    p.add_argument("gt_dir")
    p.add_argument("--iou", type=float, default=0.5, help="IoU threshold")
    p.add_argument("--name-normalization", choices=[n.value for n in NameNormalization],
                   default=NameNormalization.STRIP_WHITESPACE.value)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compose", parents=[common], formatter_class=_fmt, help="boards + text lines -> predictions")
    p.add_argument("detect_dir")
    p.add_argument("ocr_dir")
    p.add_argument("out_dir")
    p.add_argument("--enforce-name-rules", action="store_true",
                   help="drop boards whose merged name fails the store-name rule")
    p.add_argument("--refit-quads", action="store_true",
                   help="replace each board by the minimum enclosing quad of its vertices")
    p.add_argument("--direction-threshold", type=float, default=1.0,
                   help="width/height ratio at or above which text is horizontal")
    p.add_argument("--line-overlap", type=float, default=0.5)
    p.set_defaults(func=cmd_compose)

    p = sub.add_parser("dqn-train", parents=[common], formatter_class=_fmt, help="train the box-refinement agent")
    p.add_argument("--checkpoint", required=True, help="where to write the Q-network")
    p.add_argument("--curve", default=None, help="learning-curve CSV path")
    p.add_argument("--episodes", type=int, default=TrainConfig.episodes)
    p.add_argument("--gamma", type=float, default=TrainConfig.gamma)
    p.add_argument("--lr", type=float, default=TrainConfig.learning_rate)
    p.add_argument("--batch-size", type=int, default=TrainConfig.batch_size)
    p.add_argument("--target-sync", type=int, default=TrainConfig.target_sync)
    p.add_argument("--no-probes", action="store_true",
                   help="observe only geometry (no look-ahead score features)")
    p.set_defaults(func=cmd_dqn_train)

    p = sub.add_parser("dqn-eval", parents=[common], formatter_class=_fmt, help="greedy vs random policy rollouts")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--episodes", type=int, default=200)
    p.add_argument("--no-probes", action="store_true")
    p.set_defaults(func=cmd_dqn_eval)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, RectifyError) as exc:
        print(f"signquad: {exc}", file=sys.stderr)
        return EXIT_IO
    except argparse.ArgumentTypeError as exc:
        print(f"signquad: {exc}", file=sys.stderr)
        return EXIT_IO
    except (LabelError, EvaluationError, TrainingDiverged, DomainFailure, ValueError) as exc:
        print(f"signquad: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
