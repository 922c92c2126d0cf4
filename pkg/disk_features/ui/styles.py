from dataclasses import dataclass, field
from typing import Dict

from ..geometry.rewards import MatchLabel


@dataclass
class CurveStyle:
    """Training-curve line properties."""
    line_width: float = 1.8
    marker: str = 'o'
    marker_size: float = 3.0
    reward_color: str = 'tab:blue'
    precision_color: str = 'tab:green'
    recall_color: str = 'tab:orange'
    keypoint_color: str = 'tab:purple'
    grid_alpha: float = 0.3


@dataclass
class OverlayStyle:
    """Keypoint and match overlay properties."""
    heatmap_cmap: str = 'magma'
    keypoint_color: str = 'cyan'
    keypoint_size: float = 12.0
    match_line_width: float = 0.8
    view_gap: int = 4


@dataclass
class LayoutStyle:
    figure_width: float = 11
    figure_height: float = 7
    dpi: int = 120
    background_color: str = 'white'


@dataclass
class VisualStyle:
    """Complete figure style configuration."""
    curve: CurveStyle = field(default_factory=CurveStyle)
    overlay: OverlayStyle = field(default_factory=OverlayStyle)
    layout: LayoutStyle = field(default_factory=LayoutStyle)
    label_colors: Dict[MatchLabel, str] = field(default_factory=lambda: {
        MatchLabel.CORRECT: 'lime',
        MatchLabel.PLAUSIBLE: 'gold',
        MatchLabel.INCORRECT: 'red',
    })

    def get_label_color(self, label: MatchLabel) -> str:
        return self.label_colors.get(label, 'lightgray')
