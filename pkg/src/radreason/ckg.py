"""Character knowledge graph: characters, radicals, structural relations.

A character entry lists its radicals (reading order) and one structural
relation.  Two inverted indexes answer the reasoner's queries: one keyed by
the canonical radical multiset, one keyed by the structure id.  Graphs are
immutable after construction; `add_character` returns an updated copy.
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .errors import (
    DanglingReferenceError,
    DuplicateIdError,
    ParseError,
    SchemaError,
    UnknownIdError,
)

MAX_ID_BYTES = 64

MultisetKey = tuple[str, ...]


def multiset_key(radicals: Iterable[str]) -> MultisetKey:
    """Canonical multiset key: radical ids sorted, with multiplicity."""
    return tuple(sorted(radicals))


@dataclass(frozen=True)
class RadicalDef:
    id: str
    name: str | None = None


@dataclass(frozen=True)
class StructureDef:
    id: str
    name: str | None = None
    arity: int | None = None


@dataclass(frozen=True)
class CharacterEntry:
    id: str
    radicals: tuple[str, ...]
    structure: str
    source: str | None = None

    def key(self) -> MultisetKey:
        return multiset_key(self.radicals)


@dataclass(frozen=True)
class Issue:
    severity: str  # "error" | "warning"
    entity: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    issues: tuple[Issue, ...]

    def errors(self) -> list[Issue]:
        return [i for i in self.issues if i.severity == "error"]

    def to_json_dict(self) -> dict:
        return {
            "ok": self.ok,
            "issues": [
                {"severity": i.severity, "entity": i.entity, "message": i.message}
                for i in self.issues
            ],
        }


@dataclass(frozen=True)
class CharacterKnowledgeGraph:
    """Immutable graph with derived inverted indexes."""

    radicals: dict[str, RadicalDef]
    structures: dict[str, StructureDef]
    characters: dict[str, CharacterEntry]
    index_by_radical_multiset: dict[MultisetKey, frozenset[str]]
    index_by_structure: dict[str, frozenset[str]]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CharacterKnowledgeGraph):
            return NotImplemented
        # dict equality is order-insensitive, so semantically equal graphs
        # compare equal regardless of entry order in the source document
        return (
            self.radicals == other.radicals
            and self.structures == other.structures
            and self.characters == other.characters
        )

    def __len__(self) -> int:
        return len(self.characters)


def _check_id(value: object, kind: str) -> str:
    if not isinstance(value, str) or not value:
        raise SchemaError(f"{kind} id must be a non-empty string, got {value!r}")
    if len(value.encode("utf-8")) > MAX_ID_BYTES:
        raise SchemaError(f"{kind} id exceeds {MAX_ID_BYTES} bytes: {value!r}")
    if any(ord(c) < 0x20 or ord(c) == 0x7F for c in value):
        raise SchemaError(f"{kind} id contains control characters: {value!r}")
    return value


def build_indexes(
    characters: Mapping[str, CharacterEntry],
) -> tuple[dict[MultisetKey, frozenset[str]], dict[str, frozenset[str]]]:
    """Invert the entry map into both search indexes."""
    by_key: dict[MultisetKey, set[str]] = {}
    by_structure: dict[str, set[str]] = {}
    for cid, entry in characters.items():
        by_key.setdefault(entry.key(), set()).add(cid)
        by_structure.setdefault(entry.structure, set()).add(cid)
    return (
        {k: frozenset(v) for k, v in by_key.items()},
        {k: frozenset(v) for k, v in by_structure.items()},
    )


def _graph_from_parts(
    radicals: dict[str, RadicalDef],
    structures: dict[str, StructureDef],
    characters: dict[str, CharacterEntry],
) -> CharacterKnowledgeGraph:
    by_key, by_structure = build_indexes(characters)
    return CharacterKnowledgeGraph(
        radicals=radicals,
        structures=structures,
        characters=characters,
        index_by_radical_multiset=by_key,
        index_by_structure=by_structure,
    )


def load_ckg(document: Mapping) -> CharacterKnowledgeGraph:
    """Build a graph from a parsed CKG JSON document.

    Raises SchemaError / DuplicateIdError / DanglingReferenceError on
    malformed input.  Entry order in the document does not affect query
    results; it is preserved only for canonical re-serialization.
    """
    if not isinstance(document, Mapping):
        raise SchemaError("CKG document must be a JSON object")
    for section in ("radicals", "structures", "characters"):
        if not isinstance(document.get(section), list):
            raise SchemaError(f"CKG document missing list section {section!r}")

    radicals: dict[str, RadicalDef] = {}
    for row in document["radicals"]:
        if not isinstance(row, Mapping):
            raise SchemaError(f"radical row must be an object, got {row!r}")
        rid = _check_id(row.get("id"), "radical")
        if rid in radicals:
            raise DuplicateIdError(f"duplicate radical id {rid!r}")
        radicals[rid] = RadicalDef(id=rid, name=row.get("name"))

    structures: dict[str, StructureDef] = {}
    for row in document["structures"]:
        if not isinstance(row, Mapping):
            raise SchemaError(f"structure row must be an object, got {row!r}")
        sid = _check_id(row.get("id"), "structure")
        if sid in structures:
            raise DuplicateIdError(f"duplicate structure id {sid!r}")
        arity = row.get("arity")
        if arity is not None and (not isinstance(arity, int) or arity < 1):
            raise SchemaError(f"structure {sid!r} arity must be a positive int")
        structures[sid] = StructureDef(id=sid, name=row.get("name"), arity=arity)

    characters: dict[str, CharacterEntry] = {}
    for row in document["characters"]:
        if not isinstance(row, Mapping):
            raise SchemaError(f"character row must be an object, got {row!r}")
        cid = _check_id(row.get("id"), "character")
        if cid in characters:
            raise DuplicateIdError(f"duplicate character id {cid!r}")
        rads = row.get("radicals")
        if not isinstance(rads, list) or not rads:
            raise SchemaError(f"character {cid!r} needs a non-empty radicals list")
        for rid in rads:
            _check_id(rid, "radical")
            if rid not in radicals:
                raise DanglingReferenceError(
                    f"character {cid!r} references unknown radical {rid!r}"
                )
        sid = _check_id(row.get("structure"), "structure")
        if sid not in structures:
            raise DanglingReferenceError(
                f"character {cid!r} references unknown structure {sid!r}"
            )
        characters[cid] = CharacterEntry(
            id=cid, radicals=tuple(rads), structure=sid, source=row.get("source")
        )

    return _graph_from_parts(radicals, structures, characters)


def save_ckg(graph: CharacterKnowledgeGraph) -> dict:
    """Serialize a graph back into the CKG document form."""
    radicals = []
    for rd in graph.radicals.values():
        row: dict = {"id": rd.id}
        if rd.name is not None:
            row["name"] = rd.name
        radicals.append(row)
    structures = []
    for sd in graph.structures.values():
        row = {"id": sd.id}
        if sd.name is not None:
            row["name"] = sd.name
        if sd.arity is not None:
            row["arity"] = sd.arity
        structures.append(row)
    characters = []
    for entry in graph.characters.values():
        row = {
            "id": entry.id,
            "radicals": list(entry.radicals),
            "structure": entry.structure,
        }
        if entry.source is not None:
            row["source"] = entry.source
        characters.append(row)
    return {"radicals": radicals, "structures": structures, "characters": characters}


def canonical_json(document: object) -> str:
    """Canonical serialization: sorted keys, 2-space indent, LF, trailing LF."""
    return json.dumps(document, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def read_ckg(path: str | Path) -> CharacterKnowledgeGraph:
    """Load a CKG from a JSON file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read CKG file {path}: {exc}") from exc
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON in {path}: {exc}") from exc
    return load_ckg(document)


def write_ckg(graph: CharacterKnowledgeGraph, path: str | Path) -> None:
    """Write a CKG file in canonical form."""
    Path(path).write_text(canonical_json(save_ckg(graph)), encoding="utf-8", newline="\n")


def search_rad(
    query: Iterable[str],
    graph: CharacterKnowledgeGraph,
    mode: str = "exact",
) -> set[str]:
    """Characters matching a radical multiset.

    exact: the character's radical multiset equals the query multiset.
    subset: the character's multiset contains the query multiset.
    Query order never matters.
    """
    query = list(query)
    for rid in query:
        if rid not in graph.radicals:
            raise UnknownIdError(f"unknown radical {rid!r}")
    if mode == "exact":
        return set(graph.index_by_radical_multiset.get(multiset_key(query), frozenset()))
    if mode != "subset":
        raise UnknownIdError(f"unknown search mode {mode!r}")
    if not query:
        return set(graph.characters)
    need = Counter(query)
    out: set[str] = set()
    # one pass over distinct multiset keys, not over characters
    for key, ids in graph.index_by_radical_multiset.items():
        if len(key) < len(query):
            continue
        have = Counter(key)
        if all(have[rid] >= n for rid, n in need.items()):
            out.update(ids)
    return out


def search_str(structure: str, graph: CharacterKnowledgeGraph) -> set[str]:
    """Characters whose structural relation equals the query."""
    if structure not in graph.structures:
        raise UnknownIdError(f"unknown structure {structure!r}")
    return set(graph.index_by_structure.get(structure, frozenset()))


def add_character(
    graph: CharacterKnowledgeGraph, entry: CharacterEntry
) -> CharacterKnowledgeGraph:
    """Return a new graph with one more character; the input is untouched."""
    if entry.id in graph.characters:
        raise DuplicateIdError(f"duplicate character id {entry.id!r}")
    if not entry.radicals:
        raise SchemaError(f"character {entry.id!r} needs a non-empty radicals list")
    for rid in entry.radicals:
        if rid not in graph.radicals:
            raise DanglingReferenceError(
                f"character {entry.id!r} references unknown radical {rid!r}"
            )
    if entry.structure not in graph.structures:
        raise DanglingReferenceError(
            f"character {entry.id!r} references unknown structure {entry.structure!r}"
        )
    characters = dict(graph.characters)
    characters[entry.id] = entry
    by_key = dict(graph.index_by_radical_multiset)
    key = entry.key()
    by_key[key] = by_key.get(key, frozenset()) | {entry.id}
    by_structure = dict(graph.index_by_structure)
    by_structure[entry.structure] = by_structure.get(entry.structure, frozenset()) | {
        entry.id
    }
    return CharacterKnowledgeGraph(
        radicals=graph.radicals,
        structures=graph.structures,
        characters=characters,
        index_by_radical_multiset=by_key,
        index_by_structure=by_structure,
    )


def validate_ckg(source: CharacterKnowledgeGraph | Mapping) -> ValidationReport:
    """Integrity report for a graph or a raw CKG document.

    Document form catches problems a loaded graph cannot represent
    (duplicate ids, dangling references, empty radical lists); graph form
    checks index consistency.  Unused radicals/structures are warnings in
    both: real knowledge graphs are supersets of any one dataset.
    """
    issues: list[Issue] = []
    if isinstance(source, CharacterKnowledgeGraph):
        _validate_graph(source, issues)
    else:
        _validate_document(source, issues)
    ok = not any(i.severity == "error" for i in issues)
    return ValidationReport(ok=ok, issues=tuple(issues))


def _validate_graph(graph: CharacterKnowledgeGraph, issues: list[Issue]) -> None:
    used_radicals: set[str] = set()
    used_structures: set[str] = set()
    for cid, entry in graph.characters.items():
        if not entry.radicals:
            issues.append(Issue("error", cid, "empty radicals list"))
        for rid in entry.radicals:
            if rid not in graph.radicals:
                issues.append(Issue("error", cid, f"unknown radical {rid!r}"))
            used_radicals.add(rid)
        if entry.structure not in graph.structures:
            issues.append(Issue("error", cid, f"unknown structure {entry.structure!r}"))
        used_structures.add(entry.structure)
        arity = graph.structures.get(entry.structure, StructureDef(entry.structure)).arity
        if arity is not None and arity != len(entry.radicals):
            issues.append(
                Issue(
                    "warning",
                    cid,
                    f"radical count {len(entry.radicals)} != structure arity {arity}",
                )
            )
    by_key, by_structure = build_indexes(graph.characters)
    if by_key != graph.index_by_radical_multiset:
        issues.append(Issue("error", "<index>", "radical-multiset index out of sync"))
    if by_structure != graph.index_by_structure:
        issues.append(Issue("error", "<index>", "structure index out of sync"))
    for rid in graph.radicals:
        if rid not in used_radicals:
            issues.append(Issue("warning", rid, "radical used by no character"))
    for sid in graph.structures:
        if sid not in used_structures:
            issues.append(Issue("warning", sid, "structure used by no character"))


def _validate_document(document: Mapping, issues: list[Issue]) -> None:
    if not isinstance(document, Mapping):
        issues.append(Issue("error", "<document>", "not a JSON object"))
        return
    for section in ("radicals", "structures", "characters"):
        if not isinstance(document.get(section), list):
            issues.append(Issue("error", "<document>", f"missing list section {section!r}"))
            return
    radical_ids: set[str] = set()
    for row in document["radicals"]:
        rid = row.get("id") if isinstance(row, Mapping) else None
        if not isinstance(rid, str) or not rid:
            issues.append(Issue("error", "<radicals>", f"bad radical row {row!r}"))
            continue
        if rid in radical_ids:
            issues.append(Issue("error", rid, "duplicate radical id"))
        radical_ids.add(rid)
    structure_ids: set[str] = set()
    for row in document["structures"]:
        sid = row.get("id") if isinstance(row, Mapping) else None
        if not isinstance(sid, str) or not sid:
            issues.append(Issue("error", "<structures>", f"bad structure row {row!r}"))
            continue
        if sid in structure_ids:
            issues.append(Issue("error", sid, "duplicate structure id"))
        structure_ids.add(sid)
    used_radicals: set[str] = set()
    used_structures: set[str] = set()
    char_ids: set[str] = set()
    for row in document["characters"]:
        if not isinstance(row, Mapping):
            issues.append(Issue("error", "<characters>", f"bad character row {row!r}"))
            continue
        cid = row.get("id")
        if not isinstance(cid, str) or not cid:
            issues.append(Issue("error", "<characters>", f"bad character id in {row!r}"))
            continue
        if cid in char_ids:
            issues.append(Issue("error", cid, "duplicate character id"))
        char_ids.add(cid)
        rads = row.get("radicals")
        if not isinstance(rads, list) or not rads:
            issues.append(Issue("error", cid, "empty radicals list"))
            rads = []
        for rid in rads:
            if rid not in radical_ids:
                issues.append(Issue("error", cid, f"unknown radical {rid!r}"))
            else:
                used_radicals.add(rid)
        sid = row.get("structure")
        if sid not in structure_ids:
            issues.append(Issue("error", cid, f"unknown structure {sid!r}"))
        else:
            used_structures.add(sid)
    for rid in sorted(radical_ids - used_radicals):
        issues.append(Issue("warning", rid, "radical used by no character"))
    for sid in sorted(structure_ids - used_structures):
        issues.append(Issue("warning", sid, "structure used by no character"))


def ckg_stats(graph: CharacterKnowledgeGraph) -> dict:
    """Summary counts: entities, usage histogram, radicals-per-character."""
    usage: Counter[str] = Counter()
    per_count: Counter[int] = Counter()
    used_structures: set[str] = set()
    for entry in graph.characters.values():
        usage.update(entry.radicals)
        per_count[len(entry.radicals)] += 1
        used_structures.add(entry.structure)
    return {
        "n_characters": len(graph.characters),
        "n_radicals": len(graph.radicals),
        "n_structures": len(graph.structures),
        "n_radicals_used": len(usage),
        "n_structures_used": len(used_structures),
        "radical_usage": dict(sorted(usage.items())),
        "radicals_per_character": dict(sorted(per_count.items())),
    }
