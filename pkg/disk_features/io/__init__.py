from .dskf import DskfHeader, read_tensor, write_tensor
from .artifacts import (
    save_field, load_field,
    save_features, load_features,
    save_matches, load_matches,
    save_scene, load_scene,
    write_json, write_training_csv,
    TRAINING_CSV_COLUMNS,
)

__all__ = [
    "DskfHeader", "read_tensor", "write_tensor",
    "save_field", "load_field",
    "save_features", "load_features",
    "save_matches", "load_matches",
    "save_scene", "load_scene",
    "write_json", "write_training_csv",
    "TRAINING_CSV_COLUMNS",
]
