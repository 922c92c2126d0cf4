import logging

from disk_features import RewardConfig, TrainingLogger, run_gradcheck


def main() -> None:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    training_logger = TrainingLogger()

    instances = [
        (8, 4, 2),
        (16, 8, 4),
        (16, 16, 6),
    ]

    worst = 0.0
    for seed, (size, n, features) in enumerate(instances):
        for supervision in ("depth", "epipolar"):
            cfg = RewardConfig(lambda_kp=0.0, supervision=supervision)
            report = run_gradcheck(size=size, n=n, features=features, seed=seed, cfg=cfg)
            training_logger.log_gradcheck(report)
            worst = max(worst, report.max_rel_error)

    print(f"\nWorst relative error over {2 * len(instances)} instances: {worst:.2e}")


if __name__ == "__main__":
    main()
