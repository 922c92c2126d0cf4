import logging
from typing import TYPE_CHECKING, Callable, Dict, List, Optional

if TYPE_CHECKING:
    from ..gradient.gradcheck import GradcheckReport
    from ..models.camera import Scene
    from ..trainer.config import TrainConfig
    from ..trainer.evaluation import EvalReport
    from ..trainer.trainer import TrainingResult, TrainingState

RULE_WIDTH = 70

logger = logging.getLogger("disk_features")


def _format_optional(value: Optional[float], spec: str = ".4f") -> str:
    return "n/a" if value is None else format(value, spec)


class TrainingLogger:
    """Formats training, evaluation and gradient-check blocks for the log and an optional callback."""

    def __init__(self, output_callback: Optional[Callable[[str], None]] = None, log: Optional[logging.Logger] = None):
        self.output_callback = output_callback
        self._log = log or logger
        self._current_step_buffer: List[str] = []
        self._step_history: Dict[int, str] = {}

    def _print(self, text: str = "") -> None:
        """Emit a line and keep it in the current block."""
        self._log.info(text)
        self._current_step_buffer.append(text)

    def _header(self, title: str) -> None:
        self._print("=" * RULE_WIDTH)
        self._print(title)
        self._print("=" * RULE_WIDTH)

    def _flush_step_buffer(self, step_number: Optional[int] = None) -> None:
        """Send the finished block to the callback and optionally save it to history."""
        if self._current_step_buffer:
            full_step_text = "\n".join(self._current_step_buffer)
            if step_number is not None:
                self._step_history[step_number] = full_step_text
            if self.output_callback:
                self.output_callback(full_step_text)
        self._current_step_buffer.clear()

    def log_message(self, message: str) -> None:
        self._current_step_buffer.clear()
        self._print(message)
        self._flush_step_buffer()

    def log_training_start(self, scene: "Scene", cfg: "TrainConfig") -> None:
        self._current_step_buffer.clear()
        self._header("TOY TRAINING")
        self._print(f"Scene: {len(scene)} views, {scene.height}x{scene.width}")
        self._print(
            f"Steps: {cfg.steps}, lr={cfg.lr:g}, batch={cfg.batch_size}, h={cfg.h}, N={cfg.n}, "
            f"{'shared field' if cfg.shared_field else 'per-view fields'}"
        )
        rewards = cfg.rewards
        self._print(
            f"Rewards: tp={rewards.lambda_tp:g}, fp={rewards.lambda_fp:g}, kp={rewards.lambda_kp:g}, "
            f"eps={rewards.epsilon:g}px, supervision={rewards.supervision}"
        )
        self._print(
            f"Schedules: anneal over {cfg.anneal_steps} steps, theta_m "
            f"{cfg.schedule.theta_start:g} -> {cfg.schedule.theta_end:g} over {cfg.schedule.ramp_steps} steps"
        )
        self._flush_step_buffer()

    def log_step(self, state: "TrainingState") -> None:
        """Checkpoint steps get a full block; other steps a single debug line."""
        if state.report is None:
            self._log.debug(
                "step %d: E[R]=%.5f theta_m=%.2f kp=%d", state.step, state.expected_reward,
                state.theta_m, state.sampled_keypoints,
            )
            return

        self._current_step_buffer.clear()
        self._header(f"CHECKPOINT {state.step}")
        self._print(f"Training E[R]:      {state.expected_reward:+.5f}")
        self._print(
            f"theta_m={state.theta_m:.2f}  lambda_fp={state.lambda_fp_eff:+.4f}  lambda_kp={state.lambda_kp_eff:+.5f}"
        )
        counts = state.counts
        self._print(
            f"Sampled pairs:      {counts.correct} correct / {counts.plausible} plausible / "
            f"{counts.incorrect} incorrect, {state.sampled_keypoints} keypoints"
        )
        self._print(f"Duplicates (2px):   {state.duplicate_fraction:.3f}")
        self._print(f"d_theta_m:          {state.d_theta_m:+.3e} (reported, not applied)")
        self._log_report_lines(state.report)
        self._print("-" * RULE_WIDTH)
        self._flush_step_buffer(state.step)

    def _log_report_lines(self, report: "EvalReport") -> None:
        if report.expected_reward is not None:
            self._print(f"Held-out E[R]:      {report.expected_reward:+.5f}")
        self._print(f"Detection ({report.mode}):   {report.n_keypoints_a} / {report.n_keypoints_b} keypoints")
        flag = "  [no scored matches]" if report.zero_match else ""
        self._print(
            f"Matches:            {report.n_matches} "
            f"(precision {report.precision:.3f}, recall {report.recall:.3f}){flag}"
        )
        self._print(
            f"Reprojection:       mean {_format_optional(report.mean_reproj_err, '.3f')} px, "
            f"MMA@1..5 AUC {report.mma_auc5:.3f}"
        )

    def log_evaluation(self, report: "EvalReport", title: str = "EVALUATION") -> None:
        self._current_step_buffer.clear()
        self._header(title)
        self._log_report_lines(report)
        self._print("-" * RULE_WIDTH)
        self._flush_step_buffer()

    def log_training_complete(self, result: "TrainingResult") -> None:
        self._current_step_buffer.clear()
        self._header(f"TRAINING COMPLETE ({result.steps} steps)")
        if result.final_report is not None:
            self._log_report_lines(result.final_report)
        self._print(f"Best checkpoint: step {result.best_step}")
        self._flush_step_buffer()

    def log_abort(self, step: int, reason: str) -> None:
        self._current_step_buffer.clear()
        self._header(f"ABORTED AT STEP {step}")
        self._print(reason)
        self._flush_step_buffer(step)

    def log_gradcheck(self, report: "GradcheckReport") -> None:
        self._current_step_buffer.clear()
        self._header("GRADIENT CHECK")
        self._print(f"Instance: {report.instance}")
        self._print(f"Step: {report.step:g}")
        for block in report.blocks:
            self._print(
                f"   {block.name:<18} max rel {block.max_rel_error:.2e}  "
                f"mean rel {block.mean_rel_error:.2e}  ({block.size} entries)"
            )
        verdict = "PASSED" if report.passed else "FAILED"
        self._print(f"{verdict}: max relative error {report.max_rel_error:.2e} (threshold {report.threshold:g})")
        self._flush_step_buffer()

    def log_reset(self) -> None:
        self._current_step_buffer.clear()
        self._header("RESET - Restarting from initial fields")
        self._flush_step_buffer()
        self._step_history.clear()

    def get_step_log(self, step_number: int) -> Optional[str]:
        return self._step_history.get(step_number)

    def replay_step_log(self, step_number: int) -> None:
        """Resend a logged checkpoint block to the callback."""
        log_text = self._step_history.get(step_number)
        if log_text and self.output_callback:
            self.output_callback(log_text)
