"""Command-line entry point: python -m disk_features <command> ..."""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from .detection.base import DETECTION_MODES, make_detector
from .detection.detectors import DEFAULT_NMS_RADIUS
from .detection.grid import DEFAULT_CELL_SIZE
from .errors import DiskError
from .geometry.rewards import SUPERVISION_MODES
from .geometry.scenes import SCENE_KINDS, generate_toy_scene
from .gradient.config import RewardConfig
from .gradient.gradcheck import DEFAULT_STEP, DEFAULT_THETA_M, run_gradcheck
from .io.artifacts import (
    load_features, load_field, load_scene, save_features, save_field, save_matches, save_scene,
    write_json, write_training_csv,
)
from .logging.training_logger import TrainingLogger
from .matching.distribution import MatchDistribution, distance_matrix
from .matching.inference import DEFAULT_RATIO_THRESHOLD, MatchSet, match_inference
from .trainer.config import EvalConfig, ScheduleConfig, TrainConfig
from .trainer.evaluation import evaluate_matches
from .trainer.trainer import train_toy

logger = logging.getLogger("disk_features")

DEFAULT_MIN_PROB = 1e-4

_TRAIN = TrainConfig()
_REWARDS = RewardConfig()
_SCHEDULE = ScheduleConfig()
_EVAL = EvalConfig()


# Commands

def cmd_detect(args: argparse.Namespace) -> int:
    feature_field = load_field(args.field)
    detector = make_detector(args.mode, cell_size=args.h, nms_radius=args.nms_radius, budget=args.budget)
    features = detector.execute(feature_field)
    save_features(features, args.out)
    print(len(features))
    return 0


def cmd_match(args: argparse.Namespace) -> int:
    features_a = load_features(args.features_a)
    features_b = load_features(args.features_b)
    dist = distance_matrix(features_a, features_b)
    distribution = MatchDistribution(dist, args.theta_m) if dist.d.size else None

    if args.probabilistic:
        if distribution is None:
            matches = MatchSet(pairs=())
        else:
            rows, cols = np.nonzero(distribution.probabilities >= args.min_prob)
            matches = MatchSet(
                pairs=tuple(zip(rows.tolist(), cols.tolist())),
                probabilities=distribution.probabilities[rows, cols],
            )
        save_matches(matches, args.out, args.theta_m, None)
    else:
        matches = match_inference(dist, args.ratio)
        if distribution is not None and len(matches):
            rows = [i for i, _ in matches.pairs]
            cols = [j for _, j in matches.pairs]
            matches = MatchSet(matches.pairs, distribution.probabilities[rows, cols])
        save_matches(matches, args.out, args.theta_m, args.ratio)

    print(len(matches))
    return 0


def cmd_gradcheck(args: argparse.Namespace) -> int:
    cfg = RewardConfig(lambda_kp=0.0, epsilon=args.epsilon, supervision=args.supervision)
    report = run_gradcheck(
        size=args.size, n=args.n, features=args.features, seed=args.seed,
        step=args.step, cell_size=args.h, theta_m=args.theta_m, cfg=cfg,
    )
    TrainingLogger().log_gradcheck(report)
    if args.out:
        write_json(args.out, report.to_dict())
    return 0 if report.passed else 1


def _train_config(args: argparse.Namespace) -> TrainConfig:
    return TrainConfig(
        steps=args.steps,
        lr=args.lr,
        adam_beta1=args.beta1,
        adam_beta2=args.beta2,
        adam_eps=args.adam_eps,
        h=args.h,
        n=args.n,
        rewards=RewardConfig(
            lambda_tp=args.lambda_tp,
            lambda_fp=args.lambda_fp,
            lambda_kp=args.lambda_kp,
            epsilon=args.epsilon,
            supervision=args.supervision,
        ),
        anneal_steps=args.anneal_steps,
        schedule=ScheduleConfig(args.theta_start, args.theta_end, args.theta_ramp),
        seed=args.seed,
        eval_interval=args.eval_interval,
        batch_size=args.batch_size,
        shared_field=args.shared_field,
        evaluation=EvalConfig(
            mode=args.eval_mode,
            ratio_threshold=args.ratio,
            epsilon=args.epsilon,
            nms_radius=args.nms_radius,
            cell_size=args.h,
            budget=args.budget,
        ),
        out_dir=str(args.out_dir),
    )


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _train_config(args)
    scene = generate_toy_scene(
        args.scene_kind, args.height, args.width, args.baseline, args.mask_fraction, args.seed, args.views
    )
    out_dir = Path(args.out_dir)
    (out_dir / "best").mkdir(parents=True, exist_ok=True)

    result = train_toy(scene, cfg, TrainingLogger())

    save_scene(scene, out_dir / "scene.json")
    for view, feature_field in enumerate(result.fields):
        save_field(feature_field, out_dir / f"view{view}.field.json")
    for view, feature_field in enumerate(result.best_fields):
        save_field(feature_field, out_dir / "best" / f"view{view}.field.json")
    write_training_csv(out_dir / "training.csv", result.csv_rows())
    write_json(out_dir / "summary.json", {"config": cfg.resolved().to_dict(), **result.summary()})

    if args.plot and result.history:
        from .ui.plots import plot_training_curves
        reports = ([result.baseline] if result.baseline else []) + list(result.history)
        plot_training_curves(reports, out_dir / "training.png")
    logger.info("Outputs written to %s", out_dir)
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    fields = [load_field(path) for path in args.fields]
    scene = load_scene(args.scene)
    config = EvalConfig(
        mode=args.mode,
        ratio_threshold=args.ratio,
        epsilon=args.epsilon,
        nms_radius=args.nms_radius,
        cell_size=args.h,
        budget=args.budget,
        supervision=args.supervision,
    )
    report = evaluate_matches(fields, scene, config)
    TrainingLogger().log_evaluation(report)
    document = report.to_dict()
    print(json.dumps(document, indent=2))
    if args.out:
        write_json(args.out, document)

    if args.plot:
        from .ui.plots import plot_matches
        detector = make_detector(args.mode, cell_size=args.h, nms_radius=args.nms_radius)
        field_a = fields[0]
        field_b = fields[1] if len(fields) > 1 else fields[0]
        features_a, features_b = detector.execute(field_a), detector.execute(field_b)
        matches = MatchSet(pairs=())
        if len(features_a) and len(features_b):
            matches = match_inference(distance_matrix(features_a, features_b), args.ratio)
        plot_matches(field_a, field_b, features_a, features_b, matches, args.plot,
                     views=scene.views[:2], epsilon=args.epsilon)
    return 0


def cmd_scene(args: argparse.Namespace) -> int:
    scene = generate_toy_scene(
        args.scene_kind, args.height, args.width, args.baseline, args.mask_fraction, args.seed, args.views
    )
    save_scene(scene, args.out)
    print(f"{len(scene)} views, {scene.height}x{scene.width}")
    return 0


# Parser

def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="random seed (default: %(default)s)")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")


def _add_scene_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--scene-kind", choices=SCENE_KINDS, default="fronto_planar", help="toy scene geometry")
    parser.add_argument("--height", type=int, default=64, help="image height (default: %(default)s)")
    parser.add_argument("--width", type=int, default=64, help="image width (default: %(default)s)")
    parser.add_argument("--baseline", type=float, default=0.1, help="camera baseline (default: %(default)s)")
    parser.add_argument("--mask-fraction", type=float, default=0.0,
                        help="fraction of depth pixels set to the no-depth sentinel, at most 0.9 (default: %(default)s)")
    parser.add_argument("--views", type=int, choices=(2, 3), default=2, help="number of views (default: %(default)s)")


def _add_eval_flags(parser: argparse.ArgumentParser, mode_flag: str, mode_dest: str) -> None:
    parser.add_argument(mode_flag, dest=mode_dest,
                        choices=DETECTION_MODES, default=_EVAL.mode, help="inference detection mode")
    parser.add_argument("--ratio", type=float, default=DEFAULT_RATIO_THRESHOLD,
                        help="ratio-test threshold in [0, 1] (default: %(default)s)")
    parser.add_argument("--nms-radius", type=int, default=DEFAULT_NMS_RADIUS,
                        help="NMS window radius (default: %(default)s)")
    parser.add_argument("--budget", type=int, default=None,
                        help="keypoints kept per view (default: one per training cell)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="disk_features",
        description="Probabilistic local-feature detection, matching and policy-gradient training on toy scenes.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    detect = commands.add_parser("detect", help="detect keypoints on a field")
    detect.add_argument("field", help="field manifest (JSON)")
    detect.add_argument("--mode", choices=DETECTION_MODES, default="grid", help="detection mode (default: %(default)s)")
    detect.add_argument("--h", type=int, default=DEFAULT_CELL_SIZE, help="grid cell size (default: %(default)s)")
    detect.add_argument("--nms-radius", type=int, default=DEFAULT_NMS_RADIUS, help="NMS window radius (default: %(default)s)")
    detect.add_argument("--budget", type=int, default=None, help="keep at most this many top-scoring keypoints")
    detect.add_argument("--out", required=True, help="output feature file (JSON)")
    _add_common(detect)
    detect.set_defaults(func=cmd_detect)

    match = commands.add_parser("match", help="match two feature files")
    match.add_argument("features_a", help="feature file of view A")
    match.add_argument("features_b", help="feature file of view B")
    match.add_argument("--theta-m", type=float, default=_SCHEDULE.theta_end,
                       help="match inverse temperature (default: %(default)s)")
    match.add_argument("--ratio", type=float, default=DEFAULT_RATIO_THRESHOLD,
                       help="ratio-test threshold in [0, 1] (default: %(default)s)")
    kind = match.add_mutually_exclusive_group()
    kind.add_argument("--inference", dest="probabilistic", action="store_false",
                      help="mutual nearest neighbours with ratio test (default)")
    kind.add_argument("--probabilistic", dest="probabilistic", action="store_true",
                      help="write every pair with P(i<->j) >= --min-prob")
    match.add_argument("--min-prob", type=float, default=DEFAULT_MIN_PROB,
                       help="probability floor for --probabilistic (default: %(default)s)")
    match.add_argument("--out", required=True, help="output match file (JSON)")
    _add_common(match)
    match.set_defaults(func=cmd_match, probabilistic=False)

    gradcheck = commands.add_parser("gradcheck", help="check exact gradients against finite differences")
    gradcheck.add_argument("--size", type=int, default=16, help="field side length (default: %(default)s)")
    gradcheck.add_argument("--n", type=int, default=8, help="descriptor dimension (default: %(default)s)")
    gradcheck.add_argument("--features", type=int, default=4, help="sampled features per view (default: %(default)s)")
    gradcheck.add_argument("--h", type=int, default=4, help="grid cell size (default: %(default)s)")
    gradcheck.add_argument("--step", type=float, default=DEFAULT_STEP, help="finite-difference step (default: %(default)s)")
    gradcheck.add_argument("--theta-m", type=float, default=DEFAULT_THETA_M,
                           help="match inverse temperature (default: %(default)s)")
    gradcheck.add_argument("--epsilon", type=float, default=_REWARDS.epsilon, help="reward threshold in pixels")
    gradcheck.add_argument("--supervision", choices=SUPERVISION_MODES, default=_REWARDS.supervision,
                           help="reward supervision (default: %(default)s)")
    gradcheck.add_argument("--out", default=None, help="report file (JSON)")
    _add_common(gradcheck)
    gradcheck.set_defaults(func=cmd_gradcheck)

    train = commands.add_parser("train", help="train fields on a generated toy scene")
    _add_scene_flags(train)
    train.add_argument("--n", type=int, default=_TRAIN.n, help="descriptor dimension (default: %(default)s)")
    train.add_argument("--h", type=int, default=_TRAIN.h, help="grid cell size (default: %(default)s)")
    train.add_argument("--steps", type=int, default=_TRAIN.steps, help="optimizer steps (default: %(default)s)")
    train.add_argument("--lr", type=float, default=_TRAIN.lr, help="learning rate (default: %(default)s)")
    train.add_argument("--beta1", type=float, default=_TRAIN.adam_beta1, help="ADAM beta1 (default: %(default)s)")
    train.add_argument("--beta2", type=float, default=_TRAIN.adam_beta2, help="ADAM beta2 (default: %(default)s)")
    train.add_argument("--adam-eps", type=float, default=_TRAIN.adam_eps, help="ADAM eps (default: %(default)s)")
    train.add_argument("--lambda-tp", type=float, default=_REWARDS.lambda_tp, help="correct-match reward")
    train.add_argument("--lambda-fp", type=float, default=_REWARDS.lambda_fp, help="incorrect-match reward (<= 0)")
    train.add_argument("--lambda-kp", type=float, default=_REWARDS.lambda_kp, help="per-keypoint reward (<= 0)")
    train.add_argument("--epsilon", type=float, default=_REWARDS.epsilon, help="correctness threshold in pixels")
    train.add_argument("--anneal-steps", type=int, default=None, help="penalty ramp length (default: steps // 6)")
    train.add_argument("--theta-start", type=float, default=_SCHEDULE.theta_start, help="initial theta_m")
    train.add_argument("--theta-end", type=float, default=_SCHEDULE.theta_end, help="final theta_m")
    train.add_argument("--theta-ramp", type=int, default=None, help="theta_m ramp length (default: steps // 2)")
    train.add_argument("--eval-interval", type=int, default=_TRAIN.eval_interval,
                       help="steps between checkpoints (default: %(default)s)")
    train.add_argument("--batch-size", type=int, default=_TRAIN.batch_size,
                       help="sampled scene instances per step (default: %(default)s)")
    train.add_argument("--shared-field", action="store_true", help="one field for all views")
    train.add_argument("--supervision", choices=SUPERVISION_MODES, default=_REWARDS.supervision,
                       help="reward supervision (default: %(default)s)")
    _add_eval_flags(train, "--eval-mode", "eval_mode")
    train.add_argument("--plot", action="store_true", help="also write training.png")
    train.add_argument("--out-dir", default="disk_run", help="output directory (default: %(default)s)")
    _add_common(train)
    train.set_defaults(func=cmd_train)

    evaluate = commands.add_parser("eval", help="evaluate fields on a scene")
    evaluate.add_argument("fields", nargs="+", help="one shared field manifest or one per view")
    evaluate.add_argument("--scene", required=True, help="scene manifest (JSON)")
    _add_eval_flags(evaluate, "--mode", "mode")
    evaluate.add_argument("--h", type=int, default=_EVAL.cell_size, help="grid cell size (default: %(default)s)")
    evaluate.add_argument("--epsilon", type=float, default=_EVAL.epsilon, help="correctness threshold in pixels")
    evaluate.add_argument("--supervision", choices=SUPERVISION_MODES, default=_EVAL.supervision,
                          help="label supervision (default: %(default)s)")
    evaluate.add_argument("--plot", default=None, help="write a keypoint/match overlay PNG here")
    evaluate.add_argument("--out", default=None, help="report file (JSON)")
    _add_common(evaluate)
    evaluate.set_defaults(func=cmd_eval)

    scene = commands.add_parser("scene", help="write a generated toy scene")
    _add_scene_flags(scene)
    scene.add_argument("--out", required=True, help="scene manifest path (JSON)")
    _add_common(scene)
    scene.set_defaults(func=cmd_scene)

    return parser


def _configure_logging(args: argparse.Namespace) -> None:
    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(message)s", stream=sys.stderr)


def main(argv: Optional[List[str]] = None) -> int:
    """Run a command; 0 on success, 1 on runtime failure (argparse exits with 2 on usage errors)."""
    args = build_parser().parse_args(argv)
    _configure_logging(args)
    try:
        return args.func(args)
    except (DiskError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
