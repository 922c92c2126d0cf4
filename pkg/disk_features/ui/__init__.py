from .styles import VisualStyle, CurveStyle, OverlayStyle, LayoutStyle
from .plots import plot_training_curves, plot_matches

__all__ = ["VisualStyle", "CurveStyle", "OverlayStyle", "LayoutStyle", "plot_training_curves", "plot_matches"]
