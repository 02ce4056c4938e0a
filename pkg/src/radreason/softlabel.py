"""Soft-label prediction types and candidate mapping enumeration.

The extractor's output is kept as full probability distributions rather
than collapsed to argmaxes: a list of radical detections (each with a
category distribution and a box) plus one structural relation
distribution.  A "mapping" picks exactly one radical per detection; its
confidence is the arithmetic mean of the chosen per-detection
probabilities.  Mappings are enumerated best-first from the per-detection
top-k category lists under a global cap.
"""
from __future__ import annotations

import heapq
import itertools
import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .errors import ParseError, SchemaError

_CLAMP_SLACK = 1e-6  # probabilities beyond [0 - slack, 1 + slack] are rejected, not clamped


@dataclass(frozen=True)
class BoundingBox:
    """Box in unit-square fractions of the image side."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (0.0 <= self.x <= 1.0 and 0.0 <= self.y <= 1.0):
            raise SchemaError(f"bbox origin out of range: {self}")
        if not (0.0 < self.w <= 1.0 and 0.0 < self.h <= 1.0):
            raise SchemaError(f"bbox size out of range: {self}")


@dataclass(frozen=True)
class RadicalDetection:
    """One detected radical: box, objectness, category distribution.

    `categories` is sorted by (probability desc, radical id asc) and may be
    a truncation of the full distribution.
    """

    bbox: BoundingBox
    objectness: float
    categories: tuple[tuple[str, float], ...]


@dataclass(frozen=True)
class StructurePrediction:
    """Distribution over structural relations, sorted like categories."""

    entries: tuple[tuple[str, float], ...]


@dataclass(frozen=True)
class PredictionSet:
    detections: tuple[RadicalDetection, ...]
    structure: StructurePrediction


@dataclass(frozen=True)
class RadicalMapping:
    """One radical chosen per detection.

    choices: (detection index, radical id, probability) per detection.
    conf: arithmetic mean of the chosen probabilities.
    """

    choices: tuple[tuple[int, str, float], ...]
    conf: float


def mapping_confidence(mapping: RadicalMapping) -> float:
    """Mean of the per-detection chosen probabilities."""
    return _mean_conf([p for _, _, p in mapping.choices])


def _mean_conf(probs: Sequence[float]) -> float:
    if not probs:
        raise SchemaError("mapping must choose at least one radical")
    return sum(probs) / len(probs)


def make_mapping(choices: Sequence[tuple[int, str, float]]) -> RadicalMapping:
    """Construct a mapping with its confidence filled in."""
    choices = tuple(choices)
    return RadicalMapping(choices=choices, conf=_mean_conf([p for _, _, p in choices]))


def _clamp_prob(p: object, where: str) -> float:
    if not isinstance(p, (int, float)) or isinstance(p, bool) or math.isnan(p):
        raise SchemaError(f"{where}: probability must be a number, got {p!r}")
    p = float(p)
    if p < -_CLAMP_SLACK or p > 1.0 + _CLAMP_SLACK:
        raise SchemaError(f"{where}: probability {p} far outside [0, 1]")
    if p < 0.0 or p > 1.0:
        warnings.warn(f"{where}: probability {p} clamped into [0, 1]", stacklevel=3)
        p = min(1.0, max(0.0, p))
    return p


def _sorted_dist(pairs: list[tuple[str, float]]) -> tuple[tuple[str, float], ...]:
    # canonical order: probability descending, id ascending on ties
    return tuple(sorted(pairs, key=lambda kv: (-kv[1], kv[0])))


def normalize_predictions(raw: Mapping) -> PredictionSet:
    """Validate and canonicalize a parsed prediction document."""
    if not isinstance(raw, Mapping):
        raise SchemaError("prediction document must be a JSON object")
    rows = raw.get("detections")
    if not isinstance(rows, list):
        raise SchemaError("prediction document needs a 'detections' list")
    if not rows:
        raise SchemaError("prediction document has zero detections")

    detections = []
    for i, row in enumerate(rows):
        where = f"detections[{i}]"
        if not isinstance(row, Mapping):
            raise SchemaError(f"{where}: must be an object")
        bbox_raw = row.get("bbox")
        if not isinstance(bbox_raw, (list, tuple)) or len(bbox_raw) != 4:
            raise SchemaError(f"{where}: bbox must be [x, y, w, h]")
        bbox = BoundingBox(*(float(v) for v in bbox_raw))
        objectness = _clamp_prob(row.get("objectness", 1.0), f"{where}.objectness")
        cats_raw = row.get("categories")
        if not isinstance(cats_raw, list) or not cats_raw:
            raise SchemaError(f"{where}: categories must be a non-empty list")
        pairs: list[tuple[str, float]] = []
        seen: set[str] = set()
        total = 0.0
        for j, cat in enumerate(cats_raw):
            if not isinstance(cat, Mapping) or not isinstance(cat.get("radical"), str):
                raise SchemaError(f"{where}.categories[{j}]: needs a 'radical' id")
            rid = cat["radical"]
            if rid in seen:
                raise SchemaError(f"{where}: duplicate category id {rid!r}")
            seen.add(rid)
            p = _clamp_prob(cat.get("p"), f"{where}.categories[{j}].p")
            total += p
            pairs.append((rid, p))
        if total > 1.0 + 1e-6:
            warnings.warn(
                f"{where}: category probabilities sum to {total:.6f} > 1", stacklevel=2
            )
        detections.append(
            RadicalDetection(bbox=bbox, objectness=objectness, categories=_sorted_dist(pairs))
        )

    struct_raw = raw.get("structure")
    if not isinstance(struct_raw, list) or not struct_raw:
        raise SchemaError("prediction document needs a non-empty 'structure' list")
    spairs: list[tuple[str, float]] = []
    sseen: set[str] = set()
    for j, row in enumerate(struct_raw):
        if not isinstance(row, Mapping) or not isinstance(row.get("structure"), str):
            raise SchemaError(f"structure[{j}]: needs a 'structure' id")
        sid = row["structure"]
        if sid in sseen:
            raise SchemaError(f"structure: duplicate id {sid!r}")
        sseen.add(sid)
        spairs.append((sid, _clamp_prob(row.get("p"), f"structure[{j}].p")))

    return PredictionSet(
        detections=tuple(detections),
        structure=StructurePrediction(entries=_sorted_dist(spairs)),
    )


def load_predictions(path: str | Path) -> PredictionSet:
    """Read and normalize a prediction JSON file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read prediction file {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON in {path}: {exc}") from exc
    return normalize_predictions(raw)


def product_size(detections: Sequence[RadicalDetection], top_k: int) -> int:
    """Size of the full top-k Cartesian product."""
    n = 1
    for det in detections:
        n *= min(top_k, len(det.categories))
    return n


def enumerate_mappings(
    detections: Sequence[RadicalDetection], top_k: int, cap: int
) -> list[RadicalMapping]:
    """Top mappings from the per-detection top-k category lists.

    Output is the `cap` best elements of the Cartesian product, totally
    ordered by (conf desc, index tuple asc); the index tuple holds each
    detection's category rank, so the all-argmax mapping sorts first.
    When the cap bites, a best-first walk expands the product lazily
    instead of materializing it: per-detection lists are sorted by
    probability descending, so every successor of an index tuple has
    equal-or-lower confidence and a heap pops tuples in exactly the global
    sort order.
    """
    if top_k < 1 or cap < 1:
        raise SchemaError(f"top_k and cap must be >= 1, got {top_k}, {cap}")
    if not detections:
        raise SchemaError("cannot enumerate mappings over zero detections")
    lists = [det.categories[: min(top_k, len(det.categories))] for det in detections]
    num = len(lists)
    total = product_size(detections, top_k)

    def build(index_tuple: tuple[int, ...]) -> RadicalMapping:
        choices = tuple(
            (d, lists[d][k][0], lists[d][k][1]) for d, k in enumerate(index_tuple)
        )
        return make_mapping(choices)

    if total <= cap:
        ranked = sorted(
            itertools.product(*(range(len(lst)) for lst in lists)),
            key=lambda t: (-_mean_conf([lists[d][k][1] for d, k in enumerate(t)]), t),
        )
        return [build(t) for t in ranked]

    # confidences are recomputed per tuple (never via incremental updates)
    # so the heap and materialized paths agree bit-for-bit
    def conf_of(index_tuple: tuple[int, ...]) -> float:
        return sum(lists[d][k][1] for d, k in enumerate(index_tuple)) / num

    start = (0,) * num
    heap: list[tuple[float, tuple[int, ...]]] = [(-conf_of(start), start)]
    seen: set[tuple[int, ...]] = {start}
    out: list[RadicalMapping] = []
    while heap and len(out) < cap:
        _, current = heapq.heappop(heap)
        out.append(build(current))
        for d in range(num):
            k = current[d]
            if k + 1 >= len(lists[d]):
                continue
            succ = current[:d] + (k + 1,) + current[d + 1 :]
            if succ in seen:
                continue
            seen.add(succ)
            heapq.heappush(heap, (-conf_of(succ), succ))
    return out
