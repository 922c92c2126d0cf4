import logging

from disk_features import Scene, TrainConfig, TrainingController, TrainingLogger, generate_toy_scene
from disk_features.trainer.trainer import TrainingState


def create_toy_scene() -> Scene:
    return generate_toy_scene(
        "tilted_plane",
        height=48,
        width=48,
        baseline=0.15,
        depth_mask_fraction=0.1,
        seed=3,
    )


def print_scene_info(scene: Scene) -> None:
    print("Views:")
    for index, view in enumerate(scene.views):
        depth = view.depth[view.depth_valid]
        print(f"  view{index}: t={view.translation.round(3).tolist()}, depth {depth.min():.2f}..{depth.max():.2f}, "
              f"{(~view.depth_valid).mean():.0%} without depth")
    print()


def print_state(state: TrainingState) -> None:
    counts = state.counts
    print(f"  step {state.step:4d}: E[R]={state.expected_reward:+.4f}  theta_m={state.theta_m:5.1f}  "
          f"keypoints={state.sampled_keypoints:3d}  pairs {counts.correct}/{counts.plausible}/{counts.incorrect}")


def main() -> None:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    scene = create_toy_scene()
    print_scene_info(scene)

    cfg = TrainConfig(steps=300, lr=1e-2, h=8, n=8, eval_interval=50, seed=3)
    controller = TrainingController(scene, cfg, TrainingLogger())

    while controller.can_go_next():
        controller.next_step()
        state = controller.get_current_state()
        if state is not None and state.step % 25 == 0:
            print_state(state)

    # walk back to the last checkpoint and replay its log block
    while controller.can_go_prev() and controller.get_current_state().report is None:
        controller.prev_step()
    controller.prev_step()
    controller.next_step()


if __name__ == "__main__":
    main()
