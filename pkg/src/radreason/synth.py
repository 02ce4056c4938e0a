"""Synthetic graphs and glyph-splicing rasters.

Fourteen canonical layout templates (documented slot rectangles inside the
unit square) define where a structure places its radicals.  The graph
generator draws unique (radical multiset, structure) compositions at a
requested scale; the raster compositor scales per-radical glyph bitmaps
into their slots and merges by per-pixel darkness.

Arities the canonical templates do not cover are served by generated
``row-<k>`` templates: k equal vertical strips.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb
from typing import Mapping, Sequence

import numpy as np

from .ckg import (
    CharacterEntry,
    CharacterKnowledgeGraph,
    RadicalDef,
    StructureDef,
    build_indexes,
)
from .errors import InfeasibleParamsError, InvalidParamsError, SchemaError, UnknownIdError
from .streams import Stream

Rect = tuple[float, float, float, float]  # x, y, w, h in unit-square fractions

DEFAULT_MAX_OVERLAP = 0.15
DEFAULT_JITTER = 0.05


def _overlap_area(a: Rect, b: Rect) -> float:
    w = min(a[0] + a[2], b[0] + b[2]) - max(a[0], b[0])
    h = min(a[1] + a[3], b[1] + b[3]) - max(a[1], b[1])
    return max(0.0, w) * max(0.0, h)


@dataclass(frozen=True)
class LayoutTemplate:
    """Slot rectangles for one structure; slot count is the arity."""

    structure: str
    slots: tuple[Rect, ...]
    max_overlap: float = DEFAULT_MAX_OVERLAP  # fraction of the smaller slot

    def __post_init__(self):
        if not self.slots:
            raise SchemaError(f"template {self.structure!r} needs at least one slot")
        for rect in self.slots:
            x, y, w, h = rect
            if not (0 <= x <= 1 and 0 <= y <= 1 and 0 < w and 0 < h):
                raise SchemaError(f"template {self.structure!r}: bad slot {rect}")
            if x + w > 1 + 1e-9 or y + h > 1 + 1e-9:
                raise SchemaError(
                    f"template {self.structure!r}: slot {rect} leaves the unit square"
                )
        for i, a in enumerate(self.slots):
            for b in self.slots[i + 1 :]:
                smaller = min(a[2] * a[3], b[2] * b[3])
                if _overlap_area(a, b) > self.max_overlap * smaller + 1e-9:
                    raise SchemaError(
                        f"template {self.structure!r}: slots {a} and {b} overlap "
                        f"more than {self.max_overlap} of the smaller slot"
                    )

    @property
    def arity(self) -> int:
        return len(self.slots)


@dataclass(frozen=True)
class GlyphBox:
    radical: str
    rect: Rect


def _thirds_horizontal() -> tuple[Rect, ...]:
    return ((0, 0, 1 / 3, 1), (1 / 3, 0, 1 / 3, 1), (2 / 3, 0, 1 / 3, 1))


def _thirds_vertical() -> tuple[Rect, ...]:
    return ((0, 0, 1, 1 / 3), (0, 1 / 3, 1, 1 / 3), (0, 2 / 3, 1, 1 / 3))


# Nesting templates (enclosures, surrounds, overlay) inherently exceed the
# default overlap cap, so they declare their own bound; the default cap
# applies to user-supplied templates.
CANONICAL_TEMPLATES: dict[str, LayoutTemplate] = {
    t.structure: t
    for t in (
        LayoutTemplate("single", ((0, 0, 1, 1),)),
        LayoutTemplate("left-right", ((0, 0, 0.5, 1), (0.5, 0, 0.5, 1))),
        LayoutTemplate("top-bottom", ((0, 0, 1, 0.5), (0, 0.5, 1, 0.5))),
        LayoutTemplate("left-middle-right", _thirds_horizontal()),
        LayoutTemplate("top-middle-bottom", _thirds_vertical()),
        LayoutTemplate(
            "enclosure-full", ((0, 0, 1, 1), (0.25, 0.25, 0.5, 0.5)), max_overlap=1.0
        ),
        LayoutTemplate(
            "enclosure-open-top", ((0, 0, 1, 1), (0.25, 0.05, 0.5, 0.5)), max_overlap=1.0
        ),
        LayoutTemplate(
            "enclosure-open-bottom", ((0, 0, 1, 1), (0.25, 0.45, 0.5, 0.5)), max_overlap=1.0
        ),
        LayoutTemplate(
            "enclosure-open-left", ((0, 0, 1, 1), (0.05, 0.25, 0.5, 0.5)), max_overlap=1.0
        ),
        LayoutTemplate(
            "enclosure-open-right", ((0, 0, 1, 1), (0.45, 0.25, 0.5, 0.5)), max_overlap=1.0
        ),
        LayoutTemplate(
            "surround-upper-left", ((0, 0, 1, 1), (0.35, 0.35, 0.6, 0.6)), max_overlap=1.0
        ),
        LayoutTemplate(
            "surround-upper-right", ((0, 0, 1, 1), (0.05, 0.35, 0.6, 0.6)), max_overlap=1.0
        ),
        LayoutTemplate(
            "overlay", ((0, 0, 0.75, 0.75), (0.25, 0.25, 0.75, 0.75)), max_overlap=0.5
        ),
        LayoutTemplate(
            "grid-2x2",
            ((0, 0, 0.5, 0.5), (0.5, 0, 0.5, 0.5), (0, 0.5, 0.5, 0.5), (0.5, 0.5, 0.5, 0.5)),
        ),
    )
}

CANONICAL_ORDER: tuple[str, ...] = tuple(CANONICAL_TEMPLATES)

_ROW_PATTERN = re.compile(r"^row-(\d+)(?:-\d+)?$")


def row_template(structure: str, arity: int) -> LayoutTemplate:
    """k equal vertical strips."""
    if arity < 1:
        raise InvalidParamsError(f"row template arity must be >= 1, got {arity}")
    slots = tuple((d / arity, 0.0, 1.0 / arity, 1.0) for d in range(arity))
    return LayoutTemplate(structure, slots)


def template_for(structure: str) -> LayoutTemplate | None:
    """Canonical or generated template for a structure id, else None."""
    found = CANONICAL_TEMPLATES.get(structure)
    if found is not None:
        return found
    m = _ROW_PATTERN.match(structure)
    if m:
        return row_template(structure, int(m.group(1)))
    return None


def _jittered(rect: Rect, jitter: float, rng: np.random.Generator) -> Rect:
    # fixed draw width: always 4 uniforms per slot
    fx, fy, fw, fh = rng.uniform(-jitter, jitter, size=4)
    x, y, w, h = rect
    w = min(1.0, max(1e-6, w * (1.0 + fw)))
    h = min(1.0, max(1e-6, h * (1.0 + fh)))
    x = min(max(0.0, x * (1.0 + fx)), 1.0 - w)
    y = min(max(0.0, y * (1.0 + fy)), 1.0 - h)
    return (x, y, w, h)


def layout_for_structure(
    structure: str,
    arity: int,
    jitter: float = DEFAULT_JITTER,
    rng: np.random.Generator | None = None,
) -> list[Rect]:
    """Template slots with bounded multiplicative jitter applied."""
    template = template_for(structure)
    if template is None:
        raise UnknownIdError(f"no layout template for structure {structure!r}")
    if template.arity != arity:
        raise InvalidParamsError(
            f"structure {structure!r} has arity {template.arity}, requested {arity}"
        )
    if jitter < 0:
        raise InvalidParamsError("jitter must be >= 0")
    if jitter == 0:
        return list(template.slots)
    if rng is None:
        raise InvalidParamsError("jitter > 0 requires an rng")
    return [_jittered(rect, jitter, rng) for rect in template.slots]


def layout_with_fallback(
    structure: str,
    arity: int,
    jitter: float = DEFAULT_JITTER,
    rng: np.random.Generator | None = None,
) -> list[Rect]:
    """Like layout_for_structure, but unknown or arity-mismatched
    structures fall back to a row layout of the requested arity."""
    template = template_for(structure)
    if template is None or template.arity != arity:
        template = row_template(f"row-{arity}", arity)
    if jitter == 0 or rng is None:
        return list(template.slots)
    return [_jittered(rect, jitter, rng) for rect in template.slots]


def _default_counts() -> dict[int, float]:
    return {1: 1.0, 2: 1.0, 3: 1.0, 4: 1.0}


@dataclass(frozen=True)
class SynthParams:
    n_characters: int
    n_radicals: int
    n_structures: int
    radical_counts: Mapping[int, float] = field(default_factory=_default_counts)
    seed: int = 0

    def __post_init__(self):
        if min(self.n_characters, self.n_radicals, self.n_structures) < 1:
            raise InvalidParamsError("all entity counts must be >= 1")
        counts = dict(self.radical_counts)
        if not counts:
            raise InvalidParamsError("radical_counts must be non-empty")
        for c, w in counts.items():
            if not isinstance(c, int) or c < 1 or w < 0:
                raise InvalidParamsError(f"bad radical count entry {c}: {w}")
        if sum(counts.values()) <= 0:
            raise InvalidParamsError("radical_counts weights must not all be zero")


def structure_pool(params: SynthParams) -> list[StructureDef]:
    """Deterministic structure pool for a generation run.

    Order: canonical templates whose arity the count distribution can use,
    then row templates for uncovered arities, then the remaining canonical
    templates, then extra row variants.  The pool is truncated or extended
    to exactly n_structures entries.
    """
    support = sorted(c for c, w in params.radical_counts.items() if w > 0)
    named_in = [s for s in CANONICAL_ORDER if CANONICAL_TEMPLATES[s].arity in support]
    named_arities = {CANONICAL_TEMPLATES[s].arity for s in CANONICAL_ORDER}
    rows = [f"row-{c}" for c in support if c not in named_arities]
    named_out = [s for s in CANONICAL_ORDER if s not in named_in]
    ordered = named_in + rows + named_out
    variant = 2
    while len(ordered) < params.n_structures:
        ordered.extend(f"row-{c}-{variant}" for c in support)
        variant += 1
    chosen = ordered[: params.n_structures]
    defs = []
    for sid in chosen:
        template = template_for(sid)
        assert template is not None
        defs.append(StructureDef(id=sid, arity=template.arity))
    return defs


def generate_synthetic_ckg(params: SynthParams) -> CharacterKnowledgeGraph:
    """Graph with unique (multiset, structure) compositions, seeded."""
    radical_width = max(3, len(str(params.n_radicals)))
    radicals = {
        f"r{i + 1:0{radical_width}d}": RadicalDef(id=f"r{i + 1:0{radical_width}d}")
        for i in range(params.n_radicals)
    }
    radical_ids = sorted(radicals)
    structures = {sd.id: sd for sd in structure_pool(params)}

    by_arity: dict[int, list[str]] = {}
    for sd in structures.values():
        by_arity.setdefault(sd.arity, []).append(sd.id)

    weights = {
        c: w
        for c, w in params.radical_counts.items()
        if w > 0 and by_arity.get(c)
    }
    if not weights:
        raise InfeasibleParamsError(
            "no structure in the pool matches any requested radical count"
        )

    def capacity(count: int) -> int:
        return comb(params.n_radicals + count - 1, count) * len(by_arity[count])

    total_capacity = sum(capacity(c) for c in weights)
    if total_capacity < params.n_characters:
        raise InfeasibleParamsError(
            f"requested {params.n_characters} characters but only {total_capacity} "
            "distinct (multiset, structure) compositions exist"
        )

    rng = Stream(params.seed, (0,)).generator()
    used: set[tuple[tuple[str, ...], str]] = set()
    used_per_count: dict[int, int] = {c: 0 for c in weights}
    char_width = max(4, len(str(params.n_characters)))
    characters: dict[str, CharacterEntry] = {}

    # a count leaves `active` the moment its composition space fills up, so
    # any count drawn below still has at least one unused composition
    active = dict(weights)
    for i in range(params.n_characters):
        counts = sorted(active)
        probs = np.array([active[c] for c in counts], dtype=float)
        probs /= probs.sum()
        count = int(counts[rng.choice(len(counts), p=probs)])
        pool = by_arity[count]
        composition = None
        for _ in range(200):
            sid = pool[int(rng.integers(len(pool)))]
            picks = sorted(rng.integers(params.n_radicals, size=count).tolist())
            key = tuple(radical_ids[j] for j in picks)
            if (key, sid) not in used:
                composition = (key, sid)
                break
        if composition is None:
            composition = _first_unused(radical_ids, pool, count, used)
            assert composition is not None, "capacity accounting broke"
        key, sid = composition
        used.add(composition)
        used_per_count[count] += 1
        if used_per_count[count] >= capacity(count):
            active.pop(count, None)
        cid = f"c{i + 1:0{char_width}d}"
        characters[cid] = CharacterEntry(
            id=cid, radicals=key, structure=sid, source="synthetic"
        )

    by_key, by_structure = build_indexes(characters)
    return CharacterKnowledgeGraph(
        radicals=radicals,
        structures=structures,
        characters=characters,
        index_by_radical_multiset=by_key,
        index_by_structure=by_structure,
    )


def _first_unused(
    radical_ids: list[str],
    pool: list[str],
    count: int,
    used: set[tuple[tuple[str, ...], str]],
) -> tuple[tuple[str, ...], str] | None:
    from itertools import combinations_with_replacement

    for sid in pool:
        for combo in combinations_with_replacement(radical_ids, count):
            if (combo, sid) not in used:
                return (combo, sid)
    return None


def splice_raster(
    glyphs: Mapping[str, np.ndarray],
    layout: Sequence[GlyphBox],
    canvas: int,
) -> np.ndarray:
    """Composite glyph bitmaps into one grayscale canvas.

    Each glyph is nearest-neighbor scaled into its slot; overlapping pixels
    keep the darker source (minimum value, with 255 = white background), so
    composition order never matters.
    """
    if canvas < 16:
        raise InvalidParamsError(f"canvas must be >= 16 pixels, got {canvas}")
    out = np.full((canvas, canvas), 255, dtype=np.uint8)
    for box in layout:
        glyph = glyphs.get(box.radical)
        if glyph is None:
            raise UnknownIdError(f"missing glyph bitmap for radical {box.radical!r}")
        glyph = np.asarray(glyph, dtype=np.uint8)
        if glyph.ndim != 2 or glyph.size == 0:
            raise SchemaError(f"glyph for {box.radical!r} must be a non-empty 2-D bitmap")
        x, y, w, h = box.rect
        x0 = int(round(x * canvas))
        y0 = int(round(y * canvas))
        x1 = min(canvas, max(x0 + 1, int(round((x + w) * canvas))))
        y1 = min(canvas, max(y0 + 1, int(round((y + h) * canvas))))
        out_w, out_h = x1 - x0, y1 - y0
        src_h, src_w = glyph.shape
        cols = (np.arange(out_w) * src_w) // out_w
        rows = (np.arange(out_h) * src_h) // out_h
        scaled = glyph[np.ix_(rows, cols)]
        region = out[y0:y1, x0:x1]
        out[y0:y1, x0:x1] = np.minimum(region, scaled)
    return out
