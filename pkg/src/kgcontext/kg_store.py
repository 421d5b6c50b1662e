"""Knowledge-graph loading, indexing, and hop-limited context extraction.

A graph is a set of directed (head, relation, tail) triples over id-mapped
entity and relation vocabularies. Context extraction grows hop rings around
a center entity following edges in both directions, then keeps every triple
whose endpoints both fall inside the ring union.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

INCOMING = "incoming"
OUTGOING = "outgoing"


class KgFormatError(ValueError):
    """Triple file line is malformed; message carries the line number."""


class UnknownEntityError(KeyError):
    """Entity name or id is not present in the graph."""


@dataclass
class LoadReport:
    triples: int = 0
    entities: int = 0
    relations: int = 0
    duplicates: int = 0
    skipped_lines: int = 0

    def to_dict(self) -> dict:
        return {
            "triples": self.triples,
            "entities": self.entities,
            "relations": self.relations,
            "duplicates": self.duplicates,
            "skipped_lines": self.skipped_lines,
        }


class KnowledgeGraph:
    """Immutable triple store with per-entity incidence indexes."""

    def __init__(self):
        self.entity_names: list[str] = []
        self.entity_ids: dict[str, int] = {}
        self.relation_names: list[str] = []
        self.relation_ids: dict[str, int] = {}
        self.triples: list[tuple[int, int, int]] = []
        self._triple_set: set[tuple[int, int, int]] = set()
        # entity id -> triple ids where the entity is head (out) / tail (in)
        self.out_index: dict[int, list[int]] = {}
        self.in_index: dict[int, list[int]] = {}

    # -- construction -------------------------------------------------------

    def _entity_id(self, name: str) -> int:
        eid = self.entity_ids.get(name)
        if eid is None:
            eid = len(self.entity_names)
            self.entity_ids[name] = eid
            self.entity_names.append(name)
            self.out_index[eid] = []
            self.in_index[eid] = []
        return eid

    def _relation_id(self, name: str) -> int:
        rid = self.relation_ids.get(name)
        if rid is None:
            rid = len(self.relation_names)
            self.relation_ids[name] = rid
            self.relation_names.append(name)
        return rid

    def add_triple(self, head: str, relation: str, tail: str) -> bool:
        """Add one triple; returns False when it is an exact duplicate."""
        h, r, t = self._entity_id(head), self._relation_id(relation), self._entity_id(tail)
        key = (h, r, t)
        if key in self._triple_set:
            return False
        tid = len(self.triples)
        self.triples.append(key)
        self._triple_set.add(key)
        self.out_index[h].append(tid)
        self.in_index[t].append(tid)
        return True

    # -- queries --------------------------------------------------------------

    @property
    def num_entities(self) -> int:
        return len(self.entity_names)

    @property
    def num_relations(self) -> int:
        return len(self.relation_names)

    def require_entity(self, name_or_id: str | int) -> int:
        if isinstance(name_or_id, str):
            if name_or_id not in self.entity_ids:
                raise UnknownEntityError(f"unknown entity {name_or_id!r}")
            return self.entity_ids[name_or_id]
        if not 0 <= name_or_id < self.num_entities:
            raise UnknownEntityError(f"unknown entity id {name_or_id}")
        return int(name_or_id)

    def undirected_neighbors(self, eid: int) -> set[int]:
        out = {self.triples[t][2] for t in self.out_index[eid]}
        inc = {self.triples[t][0] for t in self.in_index[eid]}
        return out | inc


def load_triples(path: str | Path) -> tuple[KnowledgeGraph, LoadReport]:
    """Parse a UTF-8 TSV of head<TAB>relation<TAB>tail lines.

    Blank lines and lines starting with '#' are skipped. Vocabularies are
    assigned ids in first-seen order; exact duplicate triples are dropped and
    counted in the report.
    """
    kg = KnowledgeGraph()
    report = LoadReport()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip() or line.lstrip().startswith("#"):
                report.skipped_lines += 1
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise KgFormatError(
                    f"line {lineno}: expected 3 tab-separated fields, got {len(parts)}"
                )
            head, relation, tail = (p.strip() for p in parts)
            if not head or not relation or not tail:
                raise KgFormatError(f"line {lineno}: empty entity or relation string")
            if not kg.add_triple(head, relation, tail):
                report.duplicates += 1
    report.triples = len(kg.triples)
    report.entities = kg.num_entities
    report.relations = kg.num_relations
    return kg, report


@dataclass
class RawContext:
    """Hop-limited sub-graph around one center entity.

    hop_sets[0] is {center}; hop_sets[i] holds entities first reached after
    exactly i undirected steps. context_triples holds ids of every graph
    triple with both endpoints inside the hop union, and neighbor_lists maps
    each member entity to its incident (neighbor, relation, direction,
    triple_id) records derived from exactly those triples.
    """

    center: int
    hop_sets: list[set[int]]
    context_triples: set[int]
    neighbor_lists: dict[int, list[tuple[int, int, str, int]]] = field(default_factory=dict)
    truncated: bool = False

    @property
    def entities(self) -> set[int]:
        result: set[int] = set()
        for s in self.hop_sets:
            result |= s
        return result


def hop_sets(
    kg: KnowledgeGraph,
    center: str | int,
    k: int,
    max_neighbors_per_hop: int | None = None,
    rng: np.random.Generator | None = None,
) -> list[set[int]]:
    """Entities grouped by first-reach distance (both edge directions).

    Ring i is exactly the entities one undirected edge away from ring i-1 and
    absent from all earlier rings. With max_neighbors_per_hop set, each
    expanding entity contributes at most that many fresh neighbors (seeded
    uniform downsample); this hub guard is off by default and disabled in
    oracle tests.
    """
    m = kg.require_entity(center)
    if k < 0:
        raise ValueError(f"hop count must be >= 0, got {k}")
    rings: list[set[int]] = [{m}]
    seen = {m}
    for _ in range(k):
        nxt: set[int] = set()
        for eid in sorted(rings[-1]):
            fresh = sorted(n for n in kg.undirected_neighbors(eid) if n not in seen)
            if (
                max_neighbors_per_hop is not None
                and len(fresh) > max_neighbors_per_hop
            ):
                if rng is None:
                    rng = np.random.default_rng(0)
                idx = rng.choice(len(fresh), size=max_neighbors_per_hop, replace=False)
                fresh = [fresh[i] for i in sorted(idx)]
            nxt.update(fresh)
        nxt -= seen
        seen |= nxt
        rings.append(nxt)
    return rings


def raw_context(
    kg: KnowledgeGraph,
    center: str | int,
    k: int,
    max_neighbors_per_hop: int | None = None,
    rng: np.random.Generator | None = None,
) -> RawContext:
    """Hop rings plus every triple with both endpoints inside their union.

    The filter deliberately keeps ring-internal edges (two entities in the
    same or non-adjacent rings), and self-loops appear in neighbor lists as
    both incoming and outgoing.
    """
    rings = hop_sets(kg, center, k, max_neighbors_per_hop, rng)
    members: set[int] = set()
    for ring in rings:
        members |= ring
    context: set[int] = set()
    neighbor_lists: dict[int, list[tuple[int, int, str, int]]] = {e: [] for e in members}
    for tid, (h, r, t) in enumerate(kg.triples):
        if h in members and t in members:
            context.add(tid)
            neighbor_lists[t].append((h, r, INCOMING, tid))
            neighbor_lists[h].append((t, r, OUTGOING, tid))
    truncated = max_neighbors_per_hop is not None
    return RawContext(
        center=kg.require_entity(center),
        hop_sets=rings,
        context_triples=context,
        neighbor_lists=neighbor_lists,
        truncated=truncated,
    )
