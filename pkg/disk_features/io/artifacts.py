"""
JSON manifests and reports built around the DSKF tensor files.

    field manifest   {"heatmap": path, "descriptors": path, "n": N}
    feature file     {"width", "height", "n", "features": [{"x", "y", "score", "desc"[, "log_prob"]}]}
    match file       {"pairs": [{"i", "j", "p"}], "theta_m", "ratio_threshold"}
    scene manifest   {"views": [{"k", "r", "t", "depth": path}], "height", "width"}

Tensor paths inside manifests are stored relative to the manifest directory.
"""

import csv
import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from ..errors import FieldFormatError
from ..matching.inference import MatchSet
from ..models.camera import CameraView, Scene
from ..models.features import FeatureSet, Keypoint
from ..models.field import FeatureField
from .dskf import read_tensor, write_tensor

PathLike = Union[str, Path]

TRAINING_CSV_COLUMNS = [
    "step", "expected_reward", "theta_m", "lambda_fp_eff", "lambda_kp_eff",
    "n_keypoints", "precision", "recall", "mean_reproj_err",
]


def _read_json(path: PathLike) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            document = json.load(handle)
    except json.JSONDecodeError as exc:
        raise FieldFormatError(f"Invalid JSON: {exc.msg}", offset=exc.pos, path=str(path)) from exc
    if not isinstance(document, dict):
        raise FieldFormatError("Top-level JSON value must be an object", path=str(path))
    return document


def _require(document: Dict[str, Any], key: str, path: PathLike) -> Any:
    if key not in document:
        raise FieldFormatError(f"Missing key '{key}'", path=str(path))
    return document[key]


def write_json(path: PathLike, document: Dict[str, Any]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(document, handle, indent=2)
        handle.write("\n")


# Feature fields

def save_field(field: FeatureField, path: PathLike) -> None:
    """Write `field` as a JSON manifest plus one DSKF file per tensor."""
    manifest = Path(path)
    stem = manifest.name[:-len(".json")] if manifest.name.endswith(".json") else manifest.name
    heatmap_name = f"{stem}.heatmap.dskf"
    descriptors_name = f"{stem}.descriptors.dskf"

    write_tensor(manifest.parent / heatmap_name, field.heatmap)
    write_tensor(manifest.parent / descriptors_name, field.descriptors)
    write_json(manifest, {
        "heatmap": heatmap_name,
        "descriptors": descriptors_name,
        "n": field.descriptor_dim,
    })


def load_field(path: PathLike) -> FeatureField:
    """
    Load a field from its JSON manifest.

    Raises:
        FieldFormatError: Malformed manifest, tensor file, or mismatched dimensions
    """
    manifest = Path(path)
    document = _read_json(manifest)
    heatmap_path = manifest.parent / str(_require(document, "heatmap", manifest))
    descriptors_path = manifest.parent / str(_require(document, "descriptors", manifest))
    n = int(_require(document, "n", manifest))

    heatmap = read_tensor(heatmap_path)
    descriptors = read_tensor(descriptors_path)
    if heatmap.shape[2] != 1:
        raise FieldFormatError(f"Heatmap file has {heatmap.shape[2]} channels, expected 1",
                               offset=16, path=str(heatmap_path))
    if descriptors.shape[2] != n:
        raise FieldFormatError(f"Descriptor file has {descriptors.shape[2]} channels, manifest says {n}",
                               offset=16, path=str(descriptors_path))
    if descriptors.shape[:2] != heatmap.shape[:2]:
        raise FieldFormatError(
            f"Descriptor grid {descriptors.shape[:2]} does not match heatmap {heatmap.shape[:2]}",
            offset=8, path=str(descriptors_path),
        )
    return FeatureField(heatmap=heatmap[:, :, 0], descriptors=descriptors)


# Feature sets

def save_features(features: FeatureSet, path: PathLike) -> None:
    records: List[Dict[str, Any]] = []
    for index, keypoint in enumerate(features.keypoints):
        record: Dict[str, Any] = {
            "x": keypoint.x,
            "y": keypoint.y,
            "score": keypoint.score,
            "desc": features.descriptors[index].tolist(),
        }
        if features.log_probs is not None:
            record["log_prob"] = float(features.log_probs[index])
        records.append(record)

    write_json(path, {
        "width": features.width,
        "height": features.height,
        "n": features.descriptor_dim,
        "features": records,
    })


def load_features(path: PathLike) -> FeatureSet:
    document = _read_json(path)
    width = int(_require(document, "width", path))
    height = int(_require(document, "height", path))
    n = int(_require(document, "n", path))
    records = _require(document, "features", path)

    keypoints = tuple(Keypoint(int(r["x"]), int(r["y"]), float(r["score"])) for r in records)
    descriptors = np.array([r["desc"] for r in records], dtype=np.float64).reshape(len(records), n)
    log_probs: Optional[np.ndarray] = None
    if records and all("log_prob" in r for r in records):
        log_probs = np.array([r["log_prob"] for r in records], dtype=np.float64)

    try:
        return FeatureSet(width, height, keypoints, descriptors, log_probs)
    except ValueError as exc:
        raise FieldFormatError(str(exc), path=str(path)) from exc


# Matches

def save_matches(matches: MatchSet, path: PathLike, theta_m: Optional[float], ratio_threshold: Optional[float]) -> None:
    pairs: List[Dict[str, Any]] = []
    for index, (i, j) in enumerate(matches.pairs):
        entry: Dict[str, Any] = {"i": int(i), "j": int(j)}
        if matches.probabilities is not None:
            entry["p"] = float(matches.probabilities[index])
        pairs.append(entry)
    write_json(path, {"pairs": pairs, "theta_m": theta_m, "ratio_threshold": ratio_threshold})


def load_matches(path: PathLike) -> MatchSet:
    document = _read_json(path)
    entries = _require(document, "pairs", path)
    pairs = tuple((int(e["i"]), int(e["j"])) for e in entries)
    probabilities = None
    if entries and all("p" in e for e in entries):
        probabilities = np.array([e["p"] for e in entries], dtype=np.float64)
    return MatchSet(pairs=pairs, probabilities=probabilities)


# Scenes

def save_scene(scene: Scene, path: PathLike) -> None:
    manifest = Path(path)
    stem = manifest.name[:-len(".json")] if manifest.name.endswith(".json") else manifest.name
    views: List[Dict[str, Any]] = []
    for index, view in enumerate(scene.views):
        depth_name = f"{stem}.view{index}.depth.dskf"
        write_tensor(manifest.parent / depth_name, view.depth)
        views.append({
            "k": view.intrinsics.ravel().tolist(),
            "r": view.rotation.ravel().tolist(),
            "t": view.translation.tolist(),
            "depth": depth_name,
        })
    write_json(manifest, {"views": views, "height": scene.height, "width": scene.width})


def load_scene(path: PathLike) -> Scene:
    manifest = Path(path)
    document = _read_json(manifest)
    height = int(_require(document, "height", manifest))
    width = int(_require(document, "width", manifest))

    views: List[CameraView] = []
    for entry in _require(document, "views", manifest):
        depth = read_tensor(manifest.parent / str(entry["depth"]))
        if depth.shape != (height, width, 1):
            raise FieldFormatError(
                f"Depth map {depth.shape[:2]} does not match scene {height}x{width}",
                offset=8, path=str(manifest.parent / str(entry["depth"])),
            )
        try:
            views.append(CameraView(
                intrinsics=np.array(entry["k"], dtype=np.float64).reshape(3, 3),
                rotation=np.array(entry["r"], dtype=np.float64).reshape(3, 3),
                translation=np.array(entry["t"], dtype=np.float64),
                depth=depth[:, :, 0].astype(np.float64),
            ))
        except ValueError as exc:
            raise FieldFormatError(str(exc), path=str(manifest)) from exc
    try:
        return Scene(tuple(views))
    except ValueError as exc:
        raise FieldFormatError(str(exc), path=str(manifest)) from exc


# Reports

def write_training_csv(path: PathLike, rows: Sequence[Dict[str, Any]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=TRAINING_CSV_COLUMNS, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({key: ("" if row.get(key) is None else row.get(key)) for key in TRAINING_CSV_COLUMNS})
