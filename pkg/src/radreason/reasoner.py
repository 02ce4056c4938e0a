"""Weight-fusion reasoning: rank character candidates against the graph.

For every candidate radical mapping and every admitted structure
candidate, the characters matching both are scored by a convex fusion of
the two confidences:

    p = theta * mapping_conf + (1 - theta) * structure_conf

Duplicates keep their maximum score (so enlarging the beam never lowers a
candidate), and the final list is sorted by (score desc, character id
asc).  `brute_force_reason` re-derives the same ranking by exhaustive
enumeration with direct entry scans; it exists as an independent oracle
for tests and the CLI's --oracle mode.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from itertools import product

from .ckg import CharacterKnowledgeGraph, multiset_key, search_rad
from .errors import InstanceTooLargeError, InvalidParamsError, UnknownIdError
from .softlabel import (
    PredictionSet,
    enumerate_mappings,
    make_mapping,
    product_size,
)

BRUTE_FORCE_LIMIT = 10**6


@dataclass(frozen=True)
class ReasonerParams:
    theta: float = 0.7
    top_k: int = 5
    cap: int = 1000
    match_mode: str = "exact"  # "exact" | "subset"
    max_structures: int | None = None  # None = admit all
    min_conf: float | None = None  # prune fused scores below this floor
    objectness_floor: float = 0.0  # drop detections below; 0 = off

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise InvalidParamsError(f"theta must be in [0, 1], got {self.theta}")
        if self.top_k < 1 or self.cap < 1:
            raise InvalidParamsError("top_k and cap must be >= 1")
        if self.max_structures is not None and self.max_structures < 1:
            raise InvalidParamsError("max_structures must be >= 1")
        if self.match_mode not in ("exact", "subset"):
            raise InvalidParamsError(f"unknown match_mode {self.match_mode!r}")
        if not 0.0 <= self.objectness_floor <= 1.0:
            raise InvalidParamsError("objectness_floor must be in [0, 1]")


@dataclass(frozen=True)
class CharacterCandidate:
    id: str
    p: float
    provenance: tuple[int, int]  # (mapping index, structure rank) of the best pair


@dataclass(frozen=True)
class RankedPredictions:
    candidates: tuple[CharacterCandidate, ...]
    metadata: dict

    def to_json_dict(self) -> dict:
        return {
            "candidates": [
                {"char": c.id, "p": c.p, "provenance": list(c.provenance)}
                for c in self.candidates
            ],
            "metadata": dict(self.metadata),
        }


def fuse_confidence(m_conf: float, sp_conf: float, theta: float) -> float:
    """Convex fusion of mapping and structure confidence."""
    return theta * m_conf + (1.0 - theta) * sp_conf


def _check_ids(ckg: CharacterKnowledgeGraph, preds: PredictionSet) -> None:
    for det in preds.detections:
        for rid, _ in det.categories:
            if rid not in ckg.radicals:
                raise UnknownIdError(f"prediction references unknown radical {rid!r}")
    for sid, _ in preds.structure.entries:
        if sid not in ckg.structures:
            raise UnknownIdError(f"prediction references unknown structure {sid!r}")


def _admitted_structures(
    preds: PredictionSet, max_structures: int | None
) -> list[tuple[int, str, float]]:
    # entries are already max-sorted; zero-probability candidates are
    # skipped (they can only produce scores another pair dominates)
    limit = len(preds.structure.entries) if max_structures is None else max_structures
    return [
        (rank, sid, p)
        for rank, (sid, p) in enumerate(preds.structure.entries[:limit])
        if p > 0.0
    ]


def _finalize(
    best: dict[str, tuple[float, tuple[int, int]]],
    ckg: CharacterKnowledgeGraph,
    metadata: dict,
) -> RankedPredictions:
    ranked = sorted(best.items(), key=lambda kv: (-kv[1][0], kv[0]))
    candidates = tuple(
        CharacterCandidate(id=cid, p=p, provenance=prov) for cid, (p, prov) in ranked
    )
    # indistinguishable composition groups among the survivors
    groups: dict[tuple, list[str]] = {}
    for cid, _ in ranked:
        entry = ckg.characters[cid]
        groups.setdefault((entry.key(), entry.structure), []).append(cid)
    metadata["ambiguity_groups"] = sorted(
        sorted(ids) for ids in groups.values() if len(ids) > 1
    )
    return RankedPredictions(candidates=candidates, metadata=metadata)


def reason(
    ckg: CharacterKnowledgeGraph,
    preds: PredictionSet,
    params: ReasonerParams = ReasonerParams(),
) -> RankedPredictions:
    """Rank character candidates for one prediction set.

    Candidate mappings come from the beam (`top_k` per detection, `cap`
    overall, best first); structure candidates from the max-sorted
    structure distribution.  An empty result is legal: nothing matched.
    """
    _check_ids(ckg, preds)
    detections = preds.detections
    if params.objectness_floor > 0.0:
        detections = tuple(
            d for d in detections if d.objectness >= params.objectness_floor
        )
        if not detections:
            raise InvalidParamsError(
                "objectness floor removed every detection; nothing to reason over"
            )

    mappings = enumerate_mappings(detections, params.top_k, params.cap)
    total = product_size(detections, params.top_k)
    admitted = _admitted_structures(preds, params.max_structures)
    sp_by_id = {sid: (rank, p) for rank, sid, p in admitted}
    max_sp = max((p for _, _, p in admitted), default=0.0)

    best: dict[str, tuple[float, tuple[int, int]]] = {}
    considered = 0
    for mi, mapping in enumerate(mappings):
        if (
            params.min_conf is not None
            and fuse_confidence(mapping.conf, max_sp, params.theta) < params.min_conf
        ):
            break  # mappings are sorted by conf, so no later pair can reach the floor
        considered += 1
        chosen = [rid for _, rid, _ in mapping.choices]
        matches = search_rad(chosen, ckg, mode=params.match_mode)
        if not matches:
            continue
        for cid in matches:
            hit = sp_by_id.get(ckg.characters[cid].structure)
            if hit is None:
                continue
            rank, sp_p = hit
            p = fuse_confidence(mapping.conf, sp_p, params.theta)
            prev = best.get(cid)
            if prev is None or p > prev[0]:
                best[cid] = (p, (mi, rank))

    if params.min_conf is not None:
        best = {cid: v for cid, v in best.items() if v[0] >= params.min_conf}

    metadata = {
        "mappings_considered": considered,
        "pairs_evaluated": considered * len(admitted),
        "truncated": params.cap < total,
    }
    return _finalize(best, ckg, metadata)


# spec operation name; `reason` is the house style alias
char_reason = reason


def brute_force_reason(
    ckg: CharacterKnowledgeGraph,
    preds: PredictionSet,
    theta: float = 0.7,
    match_mode: str = "exact",
) -> RankedPredictions:
    """Exhaustive re-derivation of `reason` for oracle checks.

    Enumerates the full Cartesian product of every detection's category
    list (no beam, no top-k) and scans character entries directly instead
    of using the graph indexes.  Refuses instances whose product exceeds
    BRUTE_FORCE_LIMIT.
    """
    _check_ids(ckg, preds)
    if match_mode not in ("exact", "subset"):
        raise InvalidParamsError(f"unknown match_mode {match_mode!r}")
    lists = [det.categories for det in preds.detections]
    total = 1
    for lst in lists:
        total *= len(lst)
    if total > BRUTE_FORCE_LIMIT:
        raise InstanceTooLargeError(
            f"full product has {total} mappings (> {BRUTE_FORCE_LIMIT})"
        )

    all_tuples = sorted(
        product(*(range(len(lst)) for lst in lists)),
        key=lambda t: (
            -(sum(lists[d][k][1] for d, k in enumerate(t)) / len(lists)),
            t,
        ),
    )
    mappings = [
        make_mapping([(d, lists[d][k][0], lists[d][k][1]) for d, k in enumerate(t)])
        for t in all_tuples
    ]
    admitted = _admitted_structures(preds, max_structures=None)

    best: dict[str, tuple[float, tuple[int, int]]] = {}
    for mi, mapping in enumerate(mappings):
        need = Counter(rid for _, rid, _ in mapping.choices)
        for rank, sid, sp_p in admitted:
            for cid, entry in ckg.characters.items():
                if entry.structure != sid:
                    continue
                have = Counter(entry.radicals)
                if match_mode == "exact":
                    if have != need:
                        continue
                elif any(have[rid] < n for rid, n in need.items()):
                    continue
                p = fuse_confidence(mapping.conf, sp_p, theta)
                prev = best.get(cid)
                if prev is None or p > prev[0]:
                    best[cid] = (p, (mi, rank))

    metadata = {
        "mappings_considered": len(mappings),
        "pairs_evaluated": len(mappings) * len(admitted),
        "truncated": False,
    }
    return _finalize(best, ckg, metadata)
