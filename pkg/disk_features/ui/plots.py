"""Static PNG figures; rendered off-screen with the Agg canvas."""

from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from ..geometry.rewards import MatchLabel, classify_pairs
from ..matching.inference import MatchSet
from ..models.camera import CameraView
from ..models.features import FeatureSet
from ..models.field import FeatureField
from ..trainer.evaluation import EvalReport
from .styles import VisualStyle

PathLike = Union[str, Path]


def _new_figure(style: VisualStyle, rows: int = 1, cols: int = 1):
    fig = Figure(
        figsize=(style.layout.figure_width, style.layout.figure_height),
        dpi=style.layout.dpi,
        facecolor=style.layout.background_color,
    )
    FigureCanvasAgg(fig)
    axes = fig.subplots(rows, cols, squeeze=False)
    return fig, axes


def plot_training_curves(
    reports: Sequence[EvalReport],
    path: PathLike,
    style: Optional[VisualStyle] = None,
) -> Path:
    """Held-out expected reward, precision/recall and sampled keypoints over checkpoints."""
    style = style or VisualStyle()
    curve = style.curve
    fig, axes = _new_figure(style, rows=3)

    steps = [report.step or 0 for report in reports]
    line = {"linewidth": curve.line_width, "marker": curve.marker, "markersize": curve.marker_size}

    ax_reward, ax_quality, ax_keypoints = axes[:, 0]
    ax_reward.plot(steps, [report.expected_reward for report in reports], color=curve.reward_color, **line)
    ax_reward.set_ylabel("held-out E[R]")

    ax_quality.plot(steps, [report.precision for report in reports], color=curve.precision_color,
                    label="precision", **line)
    ax_quality.plot(steps, [report.recall for report in reports], color=curve.recall_color,
                    label="recall", **line)
    ax_quality.set_ylim(-0.02, 1.02)
    ax_quality.set_ylabel("inference matches")
    ax_quality.legend(loc="lower right")

    keypoints = [np.nan if report.sampled_keypoints is None else report.sampled_keypoints for report in reports]
    ax_keypoints.plot(steps, keypoints, color=curve.keypoint_color, **line)
    ax_keypoints.set_ylabel("sampled keypoints")
    ax_keypoints.set_xlabel("step")

    for ax in axes[:, 0]:
        ax.grid(alpha=curve.grid_alpha)

    path = Path(path)
    fig.tight_layout()
    fig.savefig(path)
    return path


def plot_matches(
    field_a: FeatureField,
    field_b: FeatureField,
    features_a: FeatureSet,
    features_b: FeatureSet,
    matches: MatchSet,
    path: PathLike,
    views: Optional[Sequence[CameraView]] = None,
    epsilon: float = 2.0,
    style: Optional[VisualStyle] = None,
) -> Path:
    """
    Both heatmaps side by side with keypoints and match lines.

    With `views` given, lines are colored by their Correct / Plausible /
    Incorrect label; otherwise all lines use the Correct color.
    """
    style = style or VisualStyle()
    overlay = style.overlay
    fig, axes = _new_figure(style)
    ax = axes[0, 0]

    gap = np.full((field_a.height, overlay.view_gap), np.nan)
    canvas = np.hstack([field_a.heatmap, gap, field_b.heatmap])
    ax.imshow(canvas, cmap=overlay.heatmap_cmap, interpolation="nearest")
    offset = field_a.width + overlay.view_gap

    ax.scatter(features_a.xs, features_a.ys, s=overlay.keypoint_size, c=overlay.keypoint_color)
    ax.scatter(features_b.xs + offset, features_b.ys, s=overlay.keypoint_size, c=overlay.keypoint_color)

    labels = None
    if views is not None and len(matches):
        labels = classify_pairs(views[0], views[1], features_a.points, features_b.points, epsilon)

    for i, j in matches.pairs:
        label = MatchLabel(int(labels[i, j])) if labels is not None else MatchLabel.CORRECT
        ka, kb = features_a.keypoints[i], features_b.keypoints[j]
        ax.plot([ka.x, kb.x + offset], [ka.y, kb.y], color=style.get_label_color(label),
                linewidth=overlay.match_line_width)

    ax.set_title(f"{len(features_a)} / {len(features_b)} keypoints, {len(matches)} matches")
    ax.set_axis_off()

    path = Path(path)
    fig.tight_layout()
    fig.savefig(path)
    return path
