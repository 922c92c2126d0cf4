from .distribution import (
    DistanceMatrix, MatchDistribution,
    distance_matrix, match_prob_pair, expected_reward, sample_matches,
)
from .inference import MatchSet, match_inference, mutual_nearest_neighbors, DEFAULT_RATIO_THRESHOLD

__all__ = [
    "DistanceMatrix", "MatchDistribution",
    "distance_matrix", "match_prob_pair", "expected_reward", "sample_matches",
    "MatchSet", "match_inference", "mutual_nearest_neighbors", "DEFAULT_RATIO_THRESHOLD",
]
