import logging
import tempfile
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..detection.detectors import duplicate_fraction
from ..detection.grid import partition_grid
from ..detection.sampler import SampledDetections, sample_features
from ..errors import InvalidArgumentError, NonFiniteGradientError
from ..gradient.config import RewardConfig
from ..gradient.estimator import FieldGradient, GradientAccumulator, LabelCounts, resolve_threads, scene_gradient
from ..io.artifacts import save_field, write_json
from ..logging.training_logger import TrainingLogger
from ..models.camera import Scene
from ..models.field import FeatureField, init_field
from .config import TrainConfig
from .evaluation import EvalReport, evaluate_matches
from .optimizer import AdamState, adam_update
from .schedule import anneal

logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class TrainingState:
    """Snapshot after one optimizer step; `report` is set on checkpoint steps."""

    step: int
    expected_reward: float
    theta_m: float
    lambda_fp_eff: float
    lambda_kp_eff: float
    sampled_keypoints: int
    counts: LabelCounts
    d_theta_m: float
    duplicate_fraction: float
    report: Optional[EvalReport] = None


@dataclass(frozen=True)
class TrainingResult:
    fields: Tuple[FeatureField, ...]
    best_fields: Tuple[FeatureField, ...]
    best_step: int
    history: Tuple[EvalReport, ...]
    baseline: Optional[EvalReport]
    states: Tuple[TrainingState, ...] = ()
    steps: int = 0

    @property
    def field(self) -> FeatureField:
        return self.fields[0]

    @property
    def final_report(self) -> Optional[EvalReport]:
        return self.history[-1] if self.history else None

    def csv_rows(self) -> List[dict]:
        reports = ([self.baseline] if self.baseline is not None else []) + list(self.history)
        return [report.csv_row() for report in reports]

    def summary(self) -> dict:
        final = self.final_report
        return {
            "steps": self.steps,
            "best_step": self.best_step,
            "baseline": None if self.baseline is None else self.baseline.to_dict(),
            "final": None if final is None else final.to_dict(),
            "expected_reward_improved": (
                None if final is None or self.baseline is None
                else final.expected_reward > self.baseline.expected_reward
            ),
        }


class _FieldParameters:
    """float64 master copy of one field with its two ADAM states."""

    def __init__(self, feature_field: FeatureField):
        self.heatmap = feature_field.heatmap.astype(np.float64)
        self.descriptors = feature_field.descriptors.astype(np.float64)
        self.heatmap_state = AdamState.zeros_like(self.heatmap)
        self.descriptor_state = AdamState.zeros_like(self.descriptors)
        self.field = feature_field

    def propose(self, gradient: FieldGradient, cfg: TrainConfig) -> Optional[tuple]:
        """ADAM ascent step without committing it; None if the result is not finite."""
        betas = (cfg.adam_beta1, cfg.adam_beta2)
        heatmap, heatmap_state = adam_update(
            self.heatmap, gradient.d_heatmap, self.heatmap_state, cfg.lr, betas, cfg.adam_eps
        )
        descriptors, descriptor_state = adam_update(
            self.descriptors, gradient.d_descriptors, self.descriptor_state, cfg.lr, betas, cfg.adam_eps
        )
        if not (np.all(np.isfinite(heatmap)) and np.all(np.isfinite(descriptors))):
            return None
        return heatmap, heatmap_state, descriptors, descriptor_state

    def commit(self, proposal: tuple) -> None:
        self.heatmap, self.heatmap_state, self.descriptors, self.descriptor_state = proposal
        self.field = FeatureField(heatmap=self.heatmap, descriptors=self.descriptors)


class DiskTrainer:
    """
    Owns the parameter fields, ADAM states and random streams of a toy training run.

    Each `step()` samples features on every view (batch_size times), sums the
    scene gradients and applies one ADAM ascent step per field. Checkpoint
    steps add an inference-mode evaluation and a held-out expected reward
    computed on its own random stream with the full (non-annealed) rewards.
    """

    def __init__(
        self,
        scene: Scene,
        cfg: Optional[TrainConfig] = None,
        training_logger: Optional[TrainingLogger] = None,
        initial_fields: Optional[Sequence[FeatureField]] = None,
    ):
        self.scene = scene
        self.cfg = (cfg or TrainConfig()).resolved()
        self.training_logger = training_logger
        self.grid = partition_grid(scene.height, scene.width, self.cfg.h)

        sample_seed, eval_seed, init_seed = np.random.SeedSequence(self.cfg.seed).spawn(3)
        self._rng = np.random.default_rng(sample_seed)
        self._eval_seed = eval_seed
        self._threads = resolve_threads()

        slots = 1 if self.cfg.shared_field else len(scene)
        if initial_fields is None:
            seeds = init_seed.generate_state(slots)
            initial_fields = [
                init_field(scene.height, scene.width, self.cfg.n, seed=int(seed)) for seed in seeds
            ]
        if len(initial_fields) != slots:
            raise InvalidArgumentError(f"Expected {slots} initial fields, got {len(initial_fields)}")
        for feature_field in initial_fields:
            if feature_field.shape != (scene.height, scene.width):
                raise InvalidArgumentError("Initial fields must match the scene dimensions")

        self._parameters = [_FieldParameters(feature_field) for feature_field in initial_fields]
        self.step_count = 0
        self.history: List[TrainingState] = []
        self.reports: List[EvalReport] = []
        self._best_score = -np.inf
        self.best_step = 0
        self.best_fields = self.fields

    @property
    def fields(self) -> Tuple[FeatureField, ...]:
        """One field per view (the same object repeated in shared-field mode)."""
        if self.cfg.shared_field:
            return (self._parameters[0].field,) * len(self.scene)
        return tuple(parameters.field for parameters in self._parameters)

    def is_finished(self) -> bool:
        return self.step_count >= self.cfg.steps

    def _sample(self, fields: Sequence[FeatureField], rng: np.random.Generator) -> List[SampledDetections]:
        return [sample_features(feature_field, self.grid, rng) for feature_field in fields]

    @property
    def held_out_theta_m(self) -> float:
        return self.cfg.schedule.theta_end

    def held_out_expected_reward(self) -> float:
        """
        Mean expected reward over eval_samples draws from a fixed evaluation stream.

        Always scored at the final theta_m with the full rewards, so every
        checkpoint, the baseline included, sees the same match distribution.
        """
        theta_m = self.held_out_theta_m
        rng = np.random.default_rng(self._eval_seed)
        fields = self.fields
        total = 0.0
        for _ in range(self.cfg.eval_samples):
            sampled = self._sample(fields, rng)
            total += scene_gradient(fields, sampled, self.scene, theta_m, self.cfg.rewards, self._threads).expected_reward
        return total / self.cfg.eval_samples

    def evaluate(
        self,
        step: int,
        theta_m: float,
        lambda_fp: float,
        lambda_kp: float,
        sampled_keypoints: Optional[int] = None,
        duplicates: Optional[float] = None,
    ) -> EvalReport:
        """Checkpoint evaluation; also tracks the best fields by held-out expected reward."""
        report = evaluate_matches(self.fields, self.scene, self.cfg.evaluation)
        held_out = self.held_out_expected_reward()
        report = report.at_checkpoint(
            step=step,
            expected_reward=held_out,
            sampled_keypoints=sampled_keypoints,
            theta_m=theta_m,
            lambda_fp_eff=lambda_fp,
            lambda_kp_eff=lambda_kp,
            duplicate_fraction=duplicates,
        )
        if held_out > self._best_score:
            self._best_score = held_out
            self.best_step = step
            self.best_fields = self.fields
        return report

    def evaluate_baseline(self) -> EvalReport:
        lambda_fp, lambda_kp, theta_m = anneal(self.cfg, 0)
        report = self.evaluate(0, theta_m, lambda_fp, lambda_kp)
        if self.training_logger:
            self.training_logger.log_evaluation(report, "BASELINE (step 0)")
        return report

    def step(self) -> TrainingState:
        """
        Run one optimizer step.

        Raises:
            InvalidArgumentError: If training already finished
            NonFiniteGradientError: If the gradient or the updated parameters are not finite
        """
        if self.is_finished():
            raise InvalidArgumentError(f"Training already finished after {self.cfg.steps} steps")

        index = self.step_count
        lambda_fp, lambda_kp, theta_m = anneal(self.cfg, index)
        rewards = self.cfg.rewards.annealed(lambda_fp, lambda_kp)
        fields = self.fields

        total = GradientAccumulator()
        sampled_keypoints = 0
        sampled: List[SampledDetections] = []
        for _ in range(self.cfg.batch_size):
            sampled = self._sample(fields, self._rng)
            total.merge(scene_gradient(fields, sampled, self.scene, theta_m, rewards, self._threads))
            sampled_keypoints += sum(len(detections) for detections in sampled)

        if not total.is_finite():
            self._abort(index + 1, sampled, theta_m, rewards, "non-finite gradient")
        self._apply(total, index + 1, sampled, theta_m, rewards)
        self.step_count += 1

        duplicates = float(np.mean([duplicate_fraction(detections.features) for detections in sampled]))
        state = TrainingState(
            step=self.step_count,
            expected_reward=total.expected_reward / self.cfg.batch_size,
            theta_m=theta_m,
            lambda_fp_eff=lambda_fp,
            lambda_kp_eff=lambda_kp,
            sampled_keypoints=sampled_keypoints,
            counts=total.counts(),
            d_theta_m=total.d_theta_m,
            duplicate_fraction=duplicates,
        )

        if self.step_count % self.cfg.eval_interval == 0 or self.is_finished():
            report = self.evaluate(self.step_count, theta_m, lambda_fp, lambda_kp, sampled_keypoints, duplicates)
            self.reports.append(report)
            state = replace(state, report=report)

        self.history.append(state)
        if self.training_logger:
            self.training_logger.log_step(state)
        return state

    def _apply(
        self,
        total: GradientAccumulator,
        step: int,
        sampled: Sequence[SampledDetections],
        theta_m: float,
        rewards: RewardConfig,
    ) -> None:
        if self.cfg.shared_field:
            gradients = [total.total()]
        else:
            gradients = [total.for_view(view) for view in range(len(self.scene))]

        proposals = [parameters.propose(gradient, self.cfg) for parameters, gradient in zip(self._parameters, gradients)]
        if any(proposal is None for proposal in proposals):
            self._abort(step, sampled, theta_m, rewards, "update produced non-finite parameters")
        for parameters, proposal in zip(self._parameters, proposals):
            parameters.commit(proposal)

    def _abort(
        self,
        step: int,
        sampled: Sequence[SampledDetections],
        theta_m: float,
        rewards: RewardConfig,
        detail: str,
    ) -> None:
        """Write fields and sampled keypoints of the offending step, then raise."""
        root = Path(self.cfg.out_dir) if self.cfg.out_dir else Path(tempfile.mkdtemp(prefix="disk_features_"))
        dump = root / "diagnostics" / f"step_{step:06d}"
        dump.mkdir(parents=True, exist_ok=True)

        for view, feature_field in enumerate(self.fields):
            save_field(feature_field, dump / f"view{view}.field.json")
        write_json(dump / "sampled.json", {
            "step": step,
            "theta_m": theta_m,
            "rewards": rewards.to_dict(),
            "config": self.cfg.to_dict(),
            "views": [
                {
                    "keypoints": [
                        {"x": kp.x, "y": kp.y, "score": kp.score, "log_prob": float(log_prob)}
                        for kp, log_prob in zip(detections.features.keypoints, detections.features.log_probs)
                    ]
                }
                for detections in sampled
            ],
        })

        logger.error("Training aborted at step %d (%s); diagnostics in %s", step, detail, dump)
        if self.training_logger:
            self.training_logger.log_abort(step, f"{detail}; diagnostics written to {dump}")
        raise NonFiniteGradientError(step, str(dump), detail)

    def result(self, baseline: Optional[EvalReport] = None) -> TrainingResult:
        return TrainingResult(
            fields=self.fields,
            best_fields=self.best_fields,
            best_step=self.best_step,
            history=tuple(self.reports),
            baseline=baseline,
            states=tuple(self.history),
            steps=self.step_count,
        )


class TrainingController:
    """
    Step-by-step driver over a DiskTrainer.

    Keeps the produced states so callers can move back and forth through the
    history; moving forward past the last computed state runs a new step.
    """

    def __init__(self, scene: Scene, cfg: Optional[TrainConfig] = None, training_logger: Optional[TrainingLogger] = None):
        self.scene = scene
        self.cfg = cfg or TrainConfig()
        self.training_logger = training_logger
        self.trainer = DiskTrainer(scene, self.cfg, training_logger)
        self.states: List[TrainingState] = []
        self.current_step: int = -1

    def is_started(self) -> bool:
        return self.current_step >= 0

    def is_finished(self) -> bool:
        return self.trainer.is_finished() and self.current_step == len(self.states) - 1

    def can_go_next(self) -> bool:
        return self.current_step < len(self.states) - 1 or not self.trainer.is_finished()

    def can_go_prev(self) -> bool:
        return self.current_step >= 0

    def get_current_state(self) -> Optional[TrainingState]:
        if 0 <= self.current_step < len(self.states):
            return self.states[self.current_step]
        return None

    def get_step_count(self) -> int:
        return len(self.states)

    def next_step(self) -> None:
        if not self.can_go_next():
            return None
        if self.current_step >= len(self.states) - 1:
            self.states.append(self.trainer.step())
            self.current_step = len(self.states) - 1
        else:
            self.current_step += 1
            if self.training_logger:
                self.training_logger.replay_step_log(self.states[self.current_step].step)

    def prev_step(self) -> None:
        if not self.can_go_prev():
            return None
        self.current_step -= 1

    def run_all(self) -> None:
        while self.can_go_next():
            self.next_step()

    def reset(self) -> None:
        self.states.clear()
        self.current_step = -1
        self.trainer = DiskTrainer(self.scene, self.cfg, self.training_logger)
        if self.training_logger:
            self.training_logger.log_reset()


def train_toy(
    scene: Scene,
    cfg: Optional[TrainConfig] = None,
    training_logger: Optional[TrainingLogger] = None,
) -> TrainingResult:
    """
    Train fields on a posed scene and return them with the checkpoint history.

    With steps = 0 the initial fields come back with an empty history.
    """
    if len(scene) < 2:
        raise InvalidArgumentError("Training needs at least two views")
    trainer = DiskTrainer(scene, cfg, training_logger)
    if training_logger:
        training_logger.log_training_start(scene, trainer.cfg)

    baseline = trainer.evaluate_baseline() if trainer.cfg.steps > 0 else None
    while not trainer.is_finished():
        trainer.step()

    result = trainer.result(baseline)
    if training_logger:
        training_logger.log_training_complete(result)
    return result
