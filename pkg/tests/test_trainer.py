import json
import time

import numpy as np
import pytest
from numpy.testing import assert_allclose

import disk_features.trainer.trainer as trainer_module
from disk_features.errors import InvalidArgumentError, NonFiniteGradientError
from disk_features.geometry.scenes import generate_toy_scene, plant_oracle_fields
from disk_features.gradient.config import RewardConfig
from disk_features.logging.training_logger import TrainingLogger
from disk_features.models.camera import Scene
from disk_features.models.field import init_field
from disk_features.trainer import (
    AdamState,
    DiskTrainer,
    EvalConfig,
    ScheduleConfig,
    TrainConfig,
    TrainingController,
    adam_update,
    anneal,
    evaluate_matches,
    train_toy,
)

from conftest import constant_view, field_from


@pytest.fixture(autouse=True)
def serial_pairs(monkeypatch):
    monkeypatch.setenv("DISK_THREADS", "1")


def _quick_config(**overrides):
    values = {"steps": 4, "lr": 1e-2, "h": 8, "n": 4, "eval_interval": 2, "eval_samples": 2, "seed": 3}
    values.update(overrides)
    return TrainConfig(**values)


class TestAdam:
    def test_first_step_moves_by_lr_along_sign(self):
        params = np.array([0.5, -1.0, 2.0, 0.0])
        grads = np.array([3.0, -0.02, 1e-3, 0.0])
        updated, state = adam_update(params, grads, AdamState.zeros_like(params), lr=0.01)
        assert_allclose(updated, params + 0.01 * np.sign(grads), atol=1e-6)
        assert state.t == 1

    def test_moments_accumulate(self):
        params = np.zeros(3)
        state = AdamState.zeros_like(params)
        for _ in range(5):
            params, state = adam_update(params, np.ones(3), state, lr=0.1)
        assert state.t == 5
        assert_allclose(params, 0.5, atol=1e-6)

    def test_explicit_step(self):
        _, state = adam_update(np.zeros(2), np.ones(2), AdamState.zeros_like(np.zeros(2)), lr=0.1, step=7)
        assert state.t == 7

    def test_shape_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            adam_update(np.zeros(3), np.zeros(4), AdamState.zeros_like(np.zeros(3)), lr=0.1)
        with pytest.raises(InvalidArgumentError):
            adam_update(np.zeros(3), np.zeros(3), AdamState.zeros_like(np.zeros(2)), lr=0.1)

    def test_step_must_be_positive(self):
        with pytest.raises(InvalidArgumentError):
            adam_update(np.zeros(2), np.zeros(2), AdamState.zeros_like(np.zeros(2)), lr=0.1, step=0)


class TestAnneal:
    def test_theta_midpoint(self):
        cfg = TrainConfig(steps=600)
        _, _, theta_m = anneal(cfg, 150)
        assert theta_m == pytest.approx(32.5)

    def test_penalty_ramp(self):
        cfg = TrainConfig(steps=600)
        lambda_fp, lambda_kp, _ = anneal(cfg, 50)
        assert lambda_fp == pytest.approx(-0.125)
        assert lambda_kp == pytest.approx(-0.0005)
        assert anneal(cfg, 0)[:2] == (0.0, 0.0)

    def test_constant_after_ramps(self):
        cfg = TrainConfig(steps=600)
        assert anneal(cfg, 300) == anneal(cfg, 599)
        assert anneal(cfg, 599) == pytest.approx((-0.25, -0.001, 50.0))

    def test_zero_length_ramps_apply_full_values(self):
        cfg = TrainConfig(steps=10, anneal_steps=0, schedule=ScheduleConfig(ramp_steps=0))
        assert anneal(cfg, 0) == pytest.approx((-0.25, -0.001, 50.0))

    def test_negative_step(self):
        with pytest.raises(InvalidArgumentError):
            anneal(TrainConfig(steps=10), -1)


class TestTrainConfig:
    def test_resolved_defaults(self):
        cfg = TrainConfig(steps=600).resolved()
        assert cfg.anneal_steps == 100
        assert cfg.schedule.ramp_steps == 300

    @pytest.mark.parametrize("kwargs", [
        {"steps": -1},
        {"lr": 0.0},
        {"adam_beta1": 1.0},
        {"h": 0},
        {"steps": 10, "anneal_steps": 11},
        {"steps": 10, "schedule": ScheduleConfig(ramp_steps=20)},
        {"batch_size": 0},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(InvalidArgumentError):
            TrainConfig(**kwargs)

    @pytest.mark.parametrize("kwargs", [{"mode": "sift"}, {"ratio_threshold": 1.5}, {"nms_radius": 0}])
    def test_invalid_evaluation(self, kwargs):
        with pytest.raises(InvalidArgumentError):
            EvalConfig(**kwargs)

    def test_keypoint_budget_defaults_to_cell_count(self):
        assert EvalConfig().keypoint_budget(64, 64) == 64
        assert EvalConfig(cell_size=4).keypoint_budget(10, 10) == 9
        assert EvalConfig(budget=5).keypoint_budget(64, 64) == 5
        assert EvalConfig(cell_budget=False).keypoint_budget(64, 64) is None
        with pytest.raises(InvalidArgumentError):
            EvalConfig(budget=-1)


class TestEvaluateMatches:
    def test_self_match_is_perfect(self):
        view = constant_view(32, 32)
        scene = Scene((view, view))
        report = evaluate_matches(init_field(32, 32, 8, seed=4), scene)
        assert report.n_matches > 0
        assert report.n_correct == report.n_matches
        assert report.precision == 1.0
        assert not report.zero_match

    def test_nms_budget_caps_keypoints(self):
        view = constant_view(32, 32)
        scene = Scene((view, view))
        feature_field = init_field(32, 32, 8, seed=4)
        capped = evaluate_matches(feature_field, scene, EvalConfig(budget=3))
        uncapped = evaluate_matches(feature_field, scene, EvalConfig(cell_budget=False))
        assert capped.n_keypoints_a == 3
        assert uncapped.n_keypoints_a > 3
        assert capped.precision == 1.0

    def test_planted_oracle(self, toy_scene):
        fields = plant_oracle_fields(toy_scene, 6, n=8, separation=8, seed=1)
        report = evaluate_matches(fields, toy_scene)
        assert report.n_matches > 0
        assert report.n_keypoints_a == report.n_matches
        assert report.precision == 1.0
        assert report.recall == 1.0
        assert report.mma[1] == 1.0

    def test_no_keypoints(self, toy_scene):
        report = evaluate_matches(field_from(np.full((32, 32), -1.0)), toy_scene)
        assert report.n_keypoints == 0
        assert report.zero_match
        assert report.precision == 1.0
        assert report.recall == 0.0
        assert report.mean_reproj_err is None

    def test_field_shape_checked(self, toy_scene):
        with pytest.raises(InvalidArgumentError):
            evaluate_matches(init_field(16, 16, 4), toy_scene)


class TestTrainToy:
    def test_zero_steps_returns_initial_fields(self, toy_scene):
        cfg = _quick_config(steps=0)
        result = train_toy(toy_scene, cfg)
        assert result.steps == 0
        assert result.history == ()
        assert result.baseline is None
        assert result.fields == DiskTrainer(toy_scene, cfg).fields

    def test_same_seed_is_deterministic(self, toy_scene):
        first = train_toy(toy_scene, _quick_config())
        second = train_toy(toy_scene, _quick_config())
        assert first.fields == second.fields
        assert [r.expected_reward for r in first.history] == [r.expected_reward for r in second.history]

    def test_different_seed_differs(self, toy_scene):
        first = train_toy(toy_scene, _quick_config(seed=1))
        second = train_toy(toy_scene, _quick_config(seed=2))
        assert first.fields != second.fields

    def test_checkpoints_and_summary(self, toy_scene):
        result = train_toy(toy_scene, _quick_config(steps=5, eval_interval=2))
        assert [report.step for report in result.history] == [2, 4, 5]
        assert result.baseline.step == 0
        assert len(result.states) == 5
        assert len(result.csv_rows()) == 4
        summary = result.summary()
        assert summary["steps"] == 5
        assert summary["best_step"] in (0, 2, 4, 5)
        json.dumps(summary)

    def test_shared_field(self, toy_scene):
        result = train_toy(toy_scene, _quick_config(shared_field=True))
        assert result.fields[0] is result.fields[1]

    def test_single_view_rejected(self, toy_scene):
        with pytest.raises(InvalidArgumentError):
            train_toy(Scene(toy_scene.views[:1]), _quick_config())

    def test_step_after_finish(self, toy_scene):
        trainer = DiskTrainer(toy_scene, _quick_config(steps=1))
        trainer.step()
        with pytest.raises(InvalidArgumentError):
            trainer.step()

    def test_initial_field_count(self, toy_scene):
        with pytest.raises(InvalidArgumentError):
            DiskTrainer(toy_scene, _quick_config(), initial_fields=[init_field(32, 32, 4)])

    def test_non_finite_gradient_dumps_diagnostics(self, toy_scene, tmp_path, monkeypatch):
        real_scene_gradient = trainer_module.scene_gradient

        def corrupted(*args, **kwargs):
            result = real_scene_gradient(*args, **kwargs)
            result.d_theta_m = float("nan")
            return result

        monkeypatch.setattr(trainer_module, "scene_gradient", corrupted)
        trainer = DiskTrainer(toy_scene, _quick_config(out_dir=str(tmp_path)))
        with pytest.raises(NonFiniteGradientError) as excinfo:
            trainer.step()

        assert excinfo.value.step == 1
        dump = tmp_path / "diagnostics" / "step_000001"
        assert excinfo.value.dump_path == str(dump)
        assert (dump / "view0.field.json").exists()
        assert (dump / "view1.field.json").exists()
        document = json.loads((dump / "sampled.json").read_text())
        assert document["step"] == 1
        assert len(document["views"]) == 2
        assert trainer.step_count == 0

    def test_held_out_reward_uses_one_theta_and_full_rewards(self, toy_scene, monkeypatch):
        calls = []
        real_scene_gradient = trainer_module.scene_gradient

        def recording(fields, sampled, scene, theta_m, rewards, threads=None):
            calls.append((theta_m, rewards))
            return real_scene_gradient(fields, sampled, scene, theta_m, rewards, threads)

        monkeypatch.setattr(trainer_module, "scene_gradient", recording)
        cfg = _quick_config(steps=4, eval_interval=2, anneal_steps=4, schedule=ScheduleConfig(15.0, 50.0, 4))
        result = train_toy(toy_scene, cfg)

        # training steps walk 15 -> 41.25 with annealed rewards; only held-out draws sit at 50
        assert sorted({theta for theta, _ in calls}) == [15.0, 23.75, 32.5, 41.25, 50.0]
        held_out = [rewards for theta, rewards in calls if theta == 50.0]
        assert len(held_out) == cfg.eval_samples * (1 + len(result.history))
        assert all(rewards == cfg.rewards for rewards in held_out)
        assert result.baseline.theta_m == 15.0
        assert DiskTrainer(toy_scene, cfg).held_out_theta_m == 50.0

    def test_self_match_after_training(self):
        view = constant_view(32, 32)
        scene = Scene((view, view))
        result = train_toy(scene, _quick_config(steps=200, n=8, eval_interval=100))
        for feature_field in result.fields:
            report = evaluate_matches(feature_field, scene)
            assert report.n_matches > 0
            assert report.precision >= 0.99


class TestTrainingController:
    def test_navigation(self, toy_scene):
        controller = TrainingController(toy_scene, _quick_config(steps=3))
        assert not controller.is_started()
        assert controller.get_current_state() is None

        controller.next_step()
        controller.next_step()
        assert controller.get_step_count() == 2
        assert controller.get_current_state().step == 2

        controller.prev_step()
        assert controller.get_current_state().step == 1
        controller.next_step()
        assert controller.get_step_count() == 2
        assert controller.trainer.step_count == 2

        controller.run_all()
        assert controller.is_finished()
        assert not controller.can_go_next()
        assert controller.get_current_state().report is not None

    def test_reset(self, toy_scene):
        controller = TrainingController(toy_scene, _quick_config(steps=2))
        controller.run_all()
        first = controller.trainer.fields
        controller.reset()
        assert controller.get_step_count() == 0
        assert not controller.is_started()
        controller.run_all()
        assert controller.trainer.fields == first

    def test_prev_before_start_is_noop(self, toy_scene):
        controller = TrainingController(toy_scene, _quick_config(steps=1))
        controller.prev_step()
        controller.prev_step()
        assert controller.current_step == -1


class TestTrainingLogger:
    def test_checkpoint_blocks_are_kept_and_replayed(self, toy_scene):
        output = []
        training_logger = TrainingLogger(output.append)
        controller = TrainingController(toy_scene, _quick_config(steps=2, eval_interval=2), training_logger)
        controller.run_all()

        block = training_logger.get_step_log(2)
        assert block is not None
        assert block.splitlines()[0] == "=" * 70
        assert "CHECKPOINT 2" in block
        assert training_logger.get_step_log(1) is None

        output.clear()
        controller.prev_step()
        controller.next_step()
        assert output == [block]

    def test_reset_clears_history(self, toy_scene):
        output = []
        training_logger = TrainingLogger(output.append)
        controller = TrainingController(toy_scene, _quick_config(steps=2, eval_interval=2), training_logger)
        controller.run_all()
        controller.reset()
        assert training_logger.get_step_log(2) is None
        assert "RESET" in output[-1]

    def test_training_run_blocks(self, toy_scene):
        output = []
        train_toy(toy_scene, _quick_config(steps=2), TrainingLogger(output.append))
        assert "TOY TRAINING" in output[0]
        assert "BASELINE (step 0)" in output[1]
        assert "TRAINING COMPLETE (2 steps)" in output[-1]

    def test_abort_block(self):
        output = []
        training_logger = TrainingLogger(output.append)
        training_logger.log_abort(7, "non-finite gradient")
        assert "ABORTED AT STEP 7" in output[0]
        assert training_logger.get_step_log(7) == output[0]

    def test_message(self):
        output = []
        TrainingLogger(output.append).log_message("hello")
        assert output == ["hello"]

    def test_rewards_show_in_header(self, toy_scene):
        output = []
        cfg = _quick_config(steps=0, rewards=RewardConfig(lambda_fp=-0.5))
        train_toy(toy_scene, cfg, TrainingLogger(output.append))
        assert "fp=-0.5" in output[0]


@pytest.fixture(scope="module")
def acceptance_scene():
    return generate_toy_scene("fronto_planar", 64, 64, baseline=0.1, seed=0)


def _timed_run(scene, cfg):
    start = time.perf_counter()
    result = train_toy(scene, cfg)
    return result, time.perf_counter() - start


def _trailing_mean(states, end, attribute, window=200):
    return float(np.mean([getattr(state, attribute) for state in states[end - window:end]]))


@pytest.fixture(scope="module")
def acceptance_run(acceptance_scene):
    return _timed_run(acceptance_scene, TrainConfig(steps=2000, h=8, n=8, seed=0))


@pytest.mark.slow
class TestToyAcceptance:
    def test_precision_and_reward(self, acceptance_run):
        result, elapsed = acceptance_run
        final = result.final_report
        assert final.step == 2000
        assert not final.zero_match
        assert final.precision >= 0.9
        assert final.expected_reward > result.baseline.expected_reward
        assert elapsed < 300.0

    def test_nms_keeps_grid_precision(self, acceptance_run, acceptance_scene):
        result, _ = acceptance_run
        nms = evaluate_matches(result.fields, acceptance_scene)
        grid = evaluate_matches(result.fields, acceptance_scene, EvalConfig(mode="grid"))
        assert nms.n_keypoints_a >= grid.n_keypoints_a
        assert nms.n_keypoints_b >= grid.n_keypoints_b
        assert abs(nms.precision - grid.precision) <= 0.05

    def test_reward_window_grows_across_halves(self, acceptance_run):
        states = acceptance_run[0].states
        assert _trailing_mean(states, 2000, "expected_reward") >= _trailing_mean(states, 1000, "expected_reward")

    def test_free_keypoints_do_not_shrink(self, acceptance_run, acceptance_scene):
        penalised = acceptance_run[0].states
        cfg = TrainConfig(steps=2000, h=8, n=8, seed=0, rewards=RewardConfig(lambda_kp=0.0))
        free = train_toy(acceptance_scene, cfg).states
        assert _trailing_mean(free, 2000, "sampled_keypoints") >= _trailing_mean(free, 200, "sampled_keypoints")
        assert _trailing_mean(free, 2000, "sampled_keypoints") >= _trailing_mean(penalised, 2000, "sampled_keypoints") - 2.0
