"""Reference math for the detector's training losses on dense grids.

Four components over a K*K grid with M anchors per cell: a binary
cross-entropy over radical categories, a squared-error coordinate loss
weighted by (2 - w*h), a squared-error objectness loss with a down-weight
for empty anchors, and a cross-entropy over structural relations.  All are
pure functions of (target, prediction); there is no training loop here.

Sign convention: the two cross-entropy components carry a leading minus so
every loss is non-negative and zero exactly at a perfect prediction.
Predicted probabilities are clamped to [EPS, 1 - EPS] before any log.

Analytic gradients with respect to the prediction are provided for each
component so finite-difference checks have something to check against.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import ParseError, SchemaError, ShapeMismatchError

EPS = 1e-7
BOX_FIELDS = 5  # x, y, w, h + detection confidence


@dataclass(frozen=True)
class GridShape:
    side: int = 13  # grid is side * side cells
    anchors: int = 3
    n_classes: int = 1

    def __post_init__(self):
        if self.side < 1 or self.anchors < 1 or self.n_classes < 1:
            raise SchemaError(f"invalid grid shape {self}")

    @property
    def cells(self) -> int:
        return self.side * self.side


@dataclass(frozen=True, eq=False)
class GridTarget:
    is_radical: np.ndarray  # (cells, anchors) in {0, 1}
    coords: np.ndarray  # (cells, anchors, 4) as (x, y, w, h)
    confidence: np.ndarray  # (cells, anchors)
    class_probs: np.ndarray  # (cells, anchors, n_classes)
    structure: np.ndarray  # (n_structures,)


@dataclass(frozen=True, eq=False)
class GridPrediction:
    coords: np.ndarray
    confidence: np.ndarray
    class_probs: np.ndarray
    structure: np.ndarray


@dataclass(frozen=True)
class LossBreakdown:
    radical_class: float
    coordinates: float
    confidence: float
    structure: float
    total: float

    def to_json_dict(self) -> dict:
        return {
            "radical_class": self.radical_class,
            "coordinates": self.coordinates,
            "confidence": self.confidence,
            "structure": self.structure,
            "total": self.total,
        }


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ShapeMismatchError(message)


def _check_shapes(target: GridTarget, pred: GridPrediction, shape: GridShape) -> None:
    ca = (shape.cells, shape.anchors)
    _require(target.is_radical.shape == ca, f"target.is_radical must be {ca}")
    _require(target.coords.shape == ca + (4,), f"target.coords must be {ca + (4,)}")
    _require(target.confidence.shape == ca, f"target.confidence must be {ca}")
    _require(
        target.class_probs.shape == ca + (shape.n_classes,),
        f"target.class_probs must be {ca + (shape.n_classes,)}",
    )
    _require(pred.coords.shape == target.coords.shape, "prediction coords shape mismatch")
    _require(
        pred.confidence.shape == target.confidence.shape,
        "prediction confidence shape mismatch",
    )
    _require(
        pred.class_probs.shape == target.class_probs.shape,
        "prediction class_probs shape mismatch",
    )
    _require(
        pred.structure.shape == target.structure.shape,
        "prediction structure shape mismatch",
    )


def _clamped(p: np.ndarray) -> np.ndarray:
    return np.clip(p, EPS, 1.0 - EPS)


def loss_radical_class(target: GridTarget, pred: GridPrediction, shape: GridShape) -> float:
    """Binary cross-entropy over categories, on radical-bearing anchors only."""
    _check_shapes(target, pred, shape)
    gate = target.is_radical[..., None]
    p = target.class_probs
    q = _clamped(pred.class_probs)
    terms = p * np.log(q) + (1.0 - p) * np.log(1.0 - q)
    return float(-(gate * terms).sum())


def loss_radical_class_grad(
    target: GridTarget, pred: GridPrediction, shape: GridShape
) -> np.ndarray:
    """d loss_radical_class / d pred.class_probs (zero where clamping is active)."""
    _check_shapes(target, pred, shape)
    gate = target.is_radical[..., None]
    p = target.class_probs
    q = _clamped(pred.class_probs)
    grad = -gate * (p / q - (1.0 - p) / (1.0 - q))
    inside = (pred.class_probs > EPS) & (pred.class_probs < 1.0 - EPS)
    return grad * inside


def loss_coordinates(target: GridTarget, pred: GridPrediction, shape: GridShape) -> float:
    """Squared-error box loss; both terms weighted by (2 - w*h) of the target."""
    _check_shapes(target, pred, shape)
    t, p = target.coords, pred.coords
    weight = 2.0 - t[..., 2] * t[..., 3]
    pos = (t[..., 0] - p[..., 0]) ** 2 + (t[..., 1] - p[..., 1]) ** 2
    size = (t[..., 2] - p[..., 2]) ** 2 + (t[..., 3] - p[..., 3]) ** 2
    gate = target.is_radical
    return float((gate * weight * pos).sum() + (gate * weight * size).sum())


def loss_coordinates_grad(
    target: GridTarget, pred: GridPrediction, shape: GridShape
) -> np.ndarray:
    """d loss_coordinates / d pred.coords."""
    _check_shapes(target, pred, shape)
    t, p = target.coords, pred.coords
    weight = (2.0 - t[..., 2] * t[..., 3]) * target.is_radical
    return -2.0 * weight[..., None] * (t - p)


def loss_confidence(
    target: GridTarget, pred: GridPrediction, shape: GridShape, no_object_weight: float = 0.05
) -> float:
    """Squared-error objectness loss; empty anchors scaled by no_object_weight."""
    if no_object_weight < 0:
        raise SchemaError("no_object_weight must be >= 0")
    _check_shapes(target, pred, shape)
    gate = target.is_radical
    diff = (target.confidence - pred.confidence) ** 2
    return float((gate * diff).sum() + no_object_weight * ((1.0 - gate) * diff).sum())


def loss_confidence_grad(
    target: GridTarget, pred: GridPrediction, shape: GridShape, no_object_weight: float = 0.05
) -> np.ndarray:
    """d loss_confidence / d pred.confidence."""
    _check_shapes(target, pred, shape)
    gate = target.is_radical
    scale = gate + no_object_weight * (1.0 - gate)
    return -2.0 * scale * (target.confidence - pred.confidence)


def loss_structure(q: np.ndarray, q_hat: np.ndarray, structure_scale: float = 1.0) -> float:
    """Cross-entropy over structural relation categories, scaled by scale/N."""
    q = np.asarray(q, dtype=float)
    q_hat = np.asarray(q_hat, dtype=float)
    if q.shape != q_hat.shape or q.ndim != 1 or q.size == 0:
        raise ShapeMismatchError(
            f"structure distributions must be equal-length vectors, got {q.shape} vs {q_hat.shape}"
        )
    n = q.size
    return float(-(structure_scale / n) * (q * np.log(_clamped(q_hat))).sum())


def loss_structure_grad(
    q: np.ndarray, q_hat: np.ndarray, structure_scale: float = 1.0
) -> np.ndarray:
    """d loss_structure / d q_hat (zero where clamping is active)."""
    q = np.asarray(q, dtype=float)
    q_hat = np.asarray(q_hat, dtype=float)
    if q.shape != q_hat.shape or q.ndim != 1 or q.size == 0:
        raise ShapeMismatchError("structure distributions must be equal-length vectors")
    n = q.size
    grad = -(structure_scale / n) * q / _clamped(q_hat)
    inside = (q_hat > EPS) & (q_hat < 1.0 - EPS)
    return grad * inside


def loss_total(
    target: GridTarget,
    pred: GridPrediction,
    shape: GridShape,
    no_object_weight: float = 0.05,
    structure_scale: float = 1.0,
) -> LossBreakdown:
    """All four components plus their sum."""
    l_class = loss_radical_class(target, pred, shape)
    l_coords = loss_coordinates(target, pred, shape)
    l_conf = loss_confidence(target, pred, shape, no_object_weight)
    l_struct = loss_structure(target.structure, pred.structure, structure_scale)
    return LossBreakdown(
        radical_class=l_class,
        coordinates=l_coords,
        confidence=l_conf,
        structure=l_struct,
        total=l_class + l_coords + l_conf + l_struct,
    )


def _grid_arrays(doc: Mapping, shape: GridShape, where: str) -> dict[str, np.ndarray]:
    out = {}
    for name in ("coords", "confidence", "class_probs", "structure"):
        if name not in doc:
            raise SchemaError(f"{where}: missing array {name!r}")
        out[name] = np.asarray(doc[name], dtype=float)
    return out


def shape_from_document(doc: Mapping) -> GridShape:
    raw = doc.get("shape")
    if not isinstance(raw, Mapping):
        raise SchemaError("grid document needs a 'shape' object")
    try:
        return GridShape(
            side=int(raw["side"]),
            anchors=int(raw["anchors"]),
            n_classes=int(raw["n_classes"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad grid shape: {exc}") from exc


def target_from_document(doc: Mapping) -> tuple[GridTarget, GridShape]:
    shape = shape_from_document(doc)
    arrays = _grid_arrays(doc, shape, "target")
    if "is_radical" not in doc:
        raise SchemaError("target grid document needs 'is_radical'")
    return (
        GridTarget(
            is_radical=np.asarray(doc["is_radical"], dtype=float),
            **arrays,
        ),
        shape,
    )


def prediction_from_document(doc: Mapping) -> GridPrediction:
    shape = shape_from_document(doc)
    arrays = _grid_arrays(doc, shape, "prediction")
    return GridPrediction(**arrays)


def read_grid_document(path: str | Path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read grid file {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON in {path}: {exc}") from exc
