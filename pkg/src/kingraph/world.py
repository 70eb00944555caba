"""Entities, possibility-set edges, and propagation to a stable fixpoint.

A world model is a graph whose nodes are (possibly conflated) people and
whose edges carry the set of relations still possible between the two
endpoints. Facts intersect edge sets; every shrink is propagated through
all triangles of the component until nothing changes. Mutations are
transactional: when any edge set would become empty the model rolls back
to its pre-call state and the caller gets a ``Contradiction`` value.

Edges are stored once per unordered pair, canonically oriented from the
lower to the higher entity id; the opposite direction is always the
element-wise inverse and is never stored.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

from .relations import (
    Atom,
    CompositionTable,
    FULL_SET,
    TableError,
    check_axioms,
    invert_rset,
    labels_of,
    mask_from_labels,
)

SELF_BIT = Atom.SELF.bit
SPOUSE_BIT = Atom.SPOUSE.bit


class Gender(str, Enum):
    UNKNOWN = "unknown"
    MALE = "male"
    FEMALE = "female"
    PROBABLY_MALE = "probably-male"
    PROBABLY_FEMALE = "probably-female"

    @property
    def definite(self) -> bool:
        return self in (Gender.MALE, Gender.FEMALE)

    @property
    def leaning(self) -> "Gender":
        """The definite gender this value points at, if any."""
        if self in (Gender.MALE, Gender.PROBABLY_MALE):
            return Gender.MALE
        if self in (Gender.FEMALE, Gender.PROBABLY_FEMALE):
            return Gender.FEMALE
        return Gender.UNKNOWN


def _opposite(g: Gender) -> Gender:
    return Gender.FEMALE if g is Gender.MALE else Gender.MALE


@dataclass(frozen=True)
class Mention:
    utterance: int
    span: str

    def to_json(self):
        return {"utterance": self.utterance, "span": self.span}

    @classmethod
    def from_json(cls, data):
        return cls(data["utterance"], data["span"])


@dataclass
class Entity:
    eid: int
    names: set[str] = field(default_factory=set)
    gender: Gender = Gender.UNKNOWN
    is_narrator: bool = False
    mentions: list[Mention] = field(default_factory=list)

    def copy(self) -> "Entity":
        return Entity(self.eid, set(self.names), self.gender, self.is_narrator,
                      list(self.mentions))

    def display_name(self) -> str | None:
        return sorted(self.names)[0] if self.names else None


@dataclass(frozen=True)
class LogEntry:
    kind: str  # entity | name | mention | gender | assert | merge
    data: dict

    def to_json(self):
        return {"kind": self.kind, **self.data}

    @classmethod
    def from_json(cls, data):
        data = dict(data)
        kind = data.pop("kind")
        return cls(kind, data)


def _source_json(source: Mention | None):
    return source.to_json() if source is not None else None


def _source_from(data):
    raw = data.get("source")
    return Mention.from_json(raw) if raw else None


@dataclass(frozen=True)
class Contradiction:
    """A refused mutation: the edge that would have emptied, what was being
    attempted, and the accepted log entries that fed the emptied edge."""

    pair: tuple[int, int] | None
    reason: str
    trigger: dict
    support: tuple[int, ...]


@dataclass(frozen=True)
class PropagationOutcome:
    changed: tuple[tuple[int, int], ...]
    merged: tuple[tuple[int, int, tuple[str, ...]], ...] = ()


@dataclass(frozen=True)
class GraphSnapshot:
    entities: tuple[tuple, ...]   # (eid, names, gender, narrator)
    edges: tuple[tuple, ...]      # (a, b, atom labels, ambiguous)
    components: tuple[tuple[int, int], ...]
    version: int

    def to_dict(self):
        return {
            "entities": [
                {"id": e, "names": list(names), "gender": gender, "narrator": narr}
                for e, names, gender, narr in self.entities
            ],
            "edges": [
                {"a": a, "b": b, "atoms": list(atoms), "ambiguous": amb}
                for a, b, atoms, amb in self.edges
            ],
            "components": {str(e): c for e, c in self.components},
            "version": self.version,
        }


class _ContradictionError(Exception):
    def __init__(self, pair, reason, support=frozenset()):
        super().__init__(reason)
        self.pair = pair
        self.reason = reason
        self.support = support


class ReplayError(RuntimeError):
    """A log replay hit a contradiction; the history itself is broken."""


class WorldModel:
    def __init__(self, table: CompositionTable, _validate: bool = True):
        if _validate:
            report = check_axioms(table)
            if not report.ok:
                raise TableError("refusing table with axiom violations:\n" + report.summary())
        self.table = table
        self.entities: dict[int, Entity] = {}
        self.log: list[LogEntry] = []
        self.version = 0
        self._edges: dict[tuple[int, int], int] = {}
        self._prov: dict[tuple[int, int], frozenset[int]] = {}
        self._component: dict[int, int] = {}
        self._members: dict[int, set[int]] = {}
        self._next_eid = 0
        # Test hook: when set, the propagation worklist pops in random order.
        self.worklist_rng: random.Random | None = None
        self._txn = None

    # -- read access -------------------------------------------------------

    def edge(self, a: int, b: int) -> int:
        """Oriented edge set for an existing pair (same component)."""
        if a < b:
            return self._edges[(a, b)]
        return invert_rset(self._edges[(b, a)])

    def possible_relations(self, a: int, b: int):
        """The oriented edge set, or None when the entities share no
        component."""
        if a not in self.entities or b not in self.entities:
            raise KeyError(f"unknown entity in pair ({a}, {b})")
        if a == b:
            return SELF_BIT
        if self._component[a] != self._component[b]:
            return None
        return self.edge(a, b)

    def same_component(self, a: int, b: int) -> bool:
        return self._component[a] == self._component[b]

    def component_members(self, eid: int) -> set[int]:
        return set(self._members[self._component[eid]])

    def narrator_id(self) -> int | None:
        for e in self.entities.values():
            if e.is_narrator:
                return e.eid
        return None

    def snapshot(self) -> GraphSnapshot:
        entities = tuple(
            (e.eid, tuple(sorted(e.names)), e.gender.value, e.is_narrator)
            for e in sorted(self.entities.values(), key=lambda x: x.eid)
        )
        edges = tuple(
            (a, b, tuple(labels_of(mask)), bin(mask).count("1") > 1)
            for (a, b), mask in sorted(self._edges.items())
        )
        components = tuple(sorted((eid, comp) for eid, comp in self._component.items()))
        return GraphSnapshot(entities, edges, components, self.version)

    def is_stable(self) -> bool:
        """Every edge set is contained in the composition of the other two,
        in every triangle of every component."""
        compose = self.table.compose_sets
        for members in self._members.values():
            ids = sorted(members)
            n = len(ids)
            for x in range(n):
                i = ids[x]
                for y in range(x + 1, n):
                    j = ids[y]
                    for z in range(y + 1, n):
                        k = ids[z]
                        rij, rik, rjk = self.edge(i, j), self.edge(i, k), self.edge(j, k)
                        if rij & ~compose(rik, invert_rset(rjk)):
                            return False
                        if rik & ~compose(rij, rjk):
                            return False
                        if rjk & ~compose(invert_rset(rij), rik):
                            return False
        return True

    def clone(self) -> "WorldModel":
        new = WorldModel.__new__(WorldModel)
        new.table = self.table
        new.entities = {eid: e.copy() for eid, e in self.entities.items()}
        new.log = list(self.log)
        new.version = self.version
        new._edges = dict(self._edges)
        new._prov = dict(self._prov)
        new._component = dict(self._component)
        new._members = {c: set(m) for c, m in self._members.items()}
        new._next_eid = self._next_eid
        new.worklist_rng = None
        new._txn = None
        return new

    # -- entity-level mutations (cannot contradict) --------------------------

    def add_entity(self, name: str | None = None, gender: Gender = Gender.UNKNOWN,
                   narrator: bool = False, source: Mention | None = None) -> int:
        if narrator and self.narrator_id() is not None:
            raise ValueError("a narrator already exists")
        eid = self._next_eid
        self._next_eid += 1
        ent = Entity(eid, gender=gender, is_narrator=narrator)
        if name:
            ent.names.add(name)
        if source is not None:
            ent.mentions.append(source)
        self.entities[eid] = ent
        self._component[eid] = eid
        self._members[eid] = {eid}
        self.log.append(LogEntry("entity", {
            "eid": eid, "name": name, "gender": gender.value, "narrator": narrator,
            "source": _source_json(source),
        }))
        self.version += 1
        return eid

    def add_name(self, eid: int, name: str, source: Mention | None = None) -> None:
        self.entities[eid].names.add(name)
        self.log.append(LogEntry("name", {
            "eid": eid, "name": name, "source": _source_json(source)}))
        self.version += 1

    def add_mention(self, eid: int, mention: Mention) -> None:
        self.entities[eid].mentions.append(mention)
        self.log.append(LogEntry("mention", {
            "eid": eid, "source": mention.to_json()}))
        self.version += 1

    def set_probable_gender(self, eid: int, gender: Gender) -> None:
        """Soft gender from name statistics; tunes phrasing only and never
        triggers pruning, so it cannot contradict anything."""
        if gender not in (Gender.PROBABLY_MALE, Gender.PROBABLY_FEMALE):
            raise ValueError("use set_gender for definite genders")
        ent = self.entities[eid]
        if ent.gender is Gender.UNKNOWN:
            ent.gender = gender
        self.log.append(LogEntry("gender", {
            "eid": eid, "gender": gender.value, "probable": True, "source": None}))
        self.version += 1

    # -- transactional mutations --------------------------------------------

    def assert_relation(self, a: int, constraint: int, b: int,
                        source: Mention | None = None):
        """Intersect the (a, b) edge with `constraint` (joining components
        first if needed) and propagate. Returns a PropagationOutcome, or a
        Contradiction if anything would empty (model left untouched)."""
        if a == b:
            raise ValueError("cannot assert a relation from an entity to itself")
        constraint &= FULL_SET
        if constraint == 0:
            raise ValueError("empty constraint")
        if a not in self.entities or b not in self.entities:
            raise KeyError("unknown entity id")
        trigger = {"op": "assert", "a": a, "b": b, "atoms": labels_of(constraint),
                   "source": _source_json(source)}
        log_entry = LogEntry("assert", {
            "a": a, "b": b, "atoms": labels_of(constraint),
            "source": _source_json(source)})
        return self._run_txn(trigger, log_entry, self._do_assert, a, constraint, b)

    def set_gender(self, eid: int, gender: Gender, source: Mention | None = None):
        if not gender.definite:
            raise ValueError("set_gender takes a definite gender")
        if eid not in self.entities:
            raise KeyError("unknown entity id")
        trigger = {"op": "gender", "eid": eid, "gender": gender.value,
                   "source": _source_json(source)}
        log_entry = LogEntry("gender", {
            "eid": eid, "gender": gender.value, "probable": False,
            "source": _source_json(source)})
        return self._run_txn(trigger, log_entry, self._do_set_gender, eid, gender)

    def merge_entities(self, a: int, b: int, confirmed: bool = False,
                       source: Mention | None = None):
        """Collapse two entities into one. Requires their edge to be exactly
        {Self}, unless the merge was explicitly confirmed, in which case
        Self must at least still be possible."""
        if a == b or a not in self.entities or b not in self.entities:
            raise ValueError("merge needs two distinct existing entities")
        trigger = {"op": "merge", "a": a, "b": b, "source": _source_json(source)}
        log_entry = LogEntry("merge", {"a": a, "b": b, "confirmed": confirmed,
                                       "source": _source_json(source)})
        return self._run_txn(trigger, log_entry, self._do_merge, a, b, confirmed)

    def join_components(self, a: int, b: int, seed: int = FULL_SET,
                        source: Mention | None = None):
        """Connect two components, seeding the (a, b) edge and initializing
        every other cross pair to the full set before propagating."""
        if self.same_component(a, b):
            raise ValueError("entities already share a component")
        return self.assert_relation(a, seed, b, source=source)

    def update_clique(self, i: int, j: int, k: int, first: str = "ik"):
        """One triangle refresh after the (i, j) edge shrank: intersect each
        remaining edge with its composition, in either order. Returns the
        changed pairs; raises on emptiness (callers manage transactions)."""
        if len({i, j, k}) != 3:
            raise ValueError("clique needs three distinct entities")
        if not (self.same_component(i, j) and self.same_component(i, k)):
            raise ValueError("clique nodes must share a component")
        if first not in ("ik", "jk"):
            raise ValueError("first must be 'ik' or 'jk'")
        own_txn = self._txn is None
        if own_txn:
            self._txn = _Txn(len(self.log))
        try:
            before = len(self._txn.changed)
            if first == "ik":
                self._clique_pass(i, j, k)
            else:
                self._clique_pass(j, i, k)
            changed = list(self._txn.changed)[before:]
        finally:
            if own_txn:
                self._txn = None
        return changed

    def propagate(self, dirty):
        """Worklist fixpoint over freshly shrunk edges. Part of the public
        surface for harnesses; normal mutations call it internally."""
        trigger = {"op": "propagate"}
        return self._run_txn(trigger, None, self._do_propagate, list(dirty))

    def split_entity(self, eid: int, part_a, part_b) -> tuple[int, int]:
        """Rebuild the model from its log with `eid`'s history re-attributed
        by mention: entries sourced from `part_b` go to a fresh second
        entity. Returns (kept id, new id)."""
        ent = self.entities.get(eid)
        if ent is None:
            raise KeyError("unknown entity id")
        if len(ent.mentions) < 2:
            raise ValueError("split needs an entity with at least two mentions")
        set_a, set_b = set(part_a), set(part_b)
        if not set_a or not set_b or (set_a & set_b):
            raise ValueError("partition sides must be non-empty and disjoint")
        if set_a | set_b != set(ent.mentions):
            raise ValueError("partition must cover exactly the entity's mentions")

        new = WorldModel(self.table, _validate=False)
        id_map: dict[int, int] = {}
        sides: dict[str, int | None] = {"a": None, "b": None}

        def side_of(source: Mention | None) -> str:
            return "b" if source is not None and source in set_b else "a"

        def successor(side: str, entry_data=None) -> int:
            if sides[side] is None:
                data = entry_data or {}
                sides[side] = new.add_entity(
                    name=data.get("name"),
                    gender=Gender(data.get("gender", "unknown")),
                    narrator=data.get("narrator", False),
                    source=_source_from(data),
                )
            return sides[side]

        def remap(old: int, source: Mention | None) -> int:
            if old == eid:
                return successor(side_of(source))
            return id_map[old]

        for entry in self.log:
            data = entry.data
            source = _source_from(data)
            kind = entry.kind
            if kind == "entity":
                old = data["eid"]
                if old == eid:
                    successor(side_of(source), data)
                else:
                    id_map[old] = new.add_entity(
                        name=data.get("name"),
                        gender=Gender(data.get("gender", "unknown")),
                        narrator=data.get("narrator", False),
                        source=source,
                    )
            elif kind == "name":
                new.add_name(remap(data["eid"], source), data["name"], source=source)
            elif kind == "mention":
                new.add_mention(remap(data["eid"], source), source)
            elif kind == "gender":
                target = remap(data["eid"], source)
                if data.get("probable"):
                    new.set_probable_gender(target, Gender(data["gender"]))
                else:
                    result = new.set_gender(target, Gender(data["gender"]), source=source)
                    if isinstance(result, Contradiction):
                        raise ReplayError(f"split replay contradicts: {result.reason}")
            elif kind == "assert":
                na, nb = remap(data["a"], source), remap(data["b"], source)
                if na == nb:
                    continue  # both halves of the old entity; nothing to assert
                result = new.assert_relation(na, mask_from_labels(data["atoms"]), nb,
                                             source=source)
                if isinstance(result, Contradiction):
                    raise ReplayError(f"split replay contradicts: {result.reason}")
            elif kind == "merge":
                na, nb = remap(data["a"], source), remap(data["b"], source)
                if na == nb or na not in new.entities or nb not in new.entities:
                    continue
                result = new.merge_entities(na, nb, confirmed=data.get("confirmed", False),
                                            source=source)
                if isinstance(result, Contradiction):
                    raise ReplayError(f"split replay contradicts: {result.reason}")
            else:  # pragma: no cover - log kinds are closed
                raise ReplayError(f"unknown log kind {kind!r}")

        kept = successor("a")
        created = successor("b")
        bumped = max(self.version, new.version) + 1
        self.entities = new.entities
        self.log = new.log
        self._edges = new._edges
        self._prov = new._prov
        self._component = new._component
        self._members = new._members
        self._next_eid = new._next_eid
        self.version = bumped
        return kept, created

    @classmethod
    def replay(cls, table: CompositionTable, log) -> "WorldModel":
        """Rebuild a model from a serialized assertion log."""
        w = cls(table, _validate=False)
        for entry in log:
            entry = entry if isinstance(entry, LogEntry) else LogEntry.from_json(entry)
            data = entry.data
            source = _source_from(data)
            if entry.kind == "entity":
                got = w.add_entity(name=data.get("name"),
                                   gender=Gender(data.get("gender", "unknown")),
                                   narrator=data.get("narrator", False), source=source)
                if got != data["eid"]:
                    raise ReplayError(f"entity id drift: {got} != {data['eid']}")
            elif entry.kind == "name":
                w.add_name(data["eid"], data["name"], source=source)
            elif entry.kind == "mention":
                w.add_mention(data["eid"], source)
            elif entry.kind == "gender":
                if data.get("probable"):
                    w.set_probable_gender(data["eid"], Gender(data["gender"]))
                else:
                    result = w.set_gender(data["eid"], Gender(data["gender"]), source=source)
                    if isinstance(result, Contradiction):
                        raise ReplayError(f"replay contradicts: {result.reason}")
            elif entry.kind == "assert":
                result = w.assert_relation(data["a"], mask_from_labels(data["atoms"]),
                                           data["b"], source=source)
                if isinstance(result, Contradiction):
                    raise ReplayError(f"replay contradicts: {result.reason}")
            elif entry.kind == "merge":
                result = w.merge_entities(data["a"], data["b"],
                                          confirmed=data.get("confirmed", False),
                                          source=source)
                if isinstance(result, Contradiction):
                    raise ReplayError(f"replay contradicts: {result.reason}")
            else:
                raise ReplayError(f"unknown log kind {entry.kind!r}")
        return w

    # -- transaction machinery ----------------------------------------------

    def _run_txn(self, trigger, log_entry, fn, *args):
        if self._txn is not None:
            raise RuntimeError("nested mutation")
        saved = self._save_state()
        self._txn = _Txn(len(self.log))
        try:
            fn(*args)
            self._drain_worklist()
            txn = self._txn
            if log_entry is not None:
                self.log.append(log_entry)
            self.version += 1
            return PropagationOutcome(tuple(txn.changed), tuple(txn.merged))
        except _ContradictionError as err:
            self._restore_state(saved)
            support = tuple(i for i in sorted(err.support) if i < len(self.log))
            return Contradiction(err.pair, err.reason, trigger, support)
        finally:
            self._txn = None

    def _save_state(self):
        return (
            {eid: e.copy() for eid, e in self.entities.items()},
            dict(self._edges),
            dict(self._prov),
            dict(self._component),
            {c: set(m) for c, m in self._members.items()},
            self.version,
            len(self.log),
            self._next_eid,
        )

    def _restore_state(self, saved):
        (self.entities, self._edges, self._prov, self._component,
         self._members, self.version, log_len, self._next_eid) = saved
        del self.log[log_len:]

    # -- propagation core ----------------------------------------------------

    def _enqueue(self, pair):
        txn = self._txn
        if pair not in txn.in_queue:
            txn.in_queue.add(pair)
            txn.queue.append(pair)

    def _write_edge(self, a: int, b: int, mask: int, prov: frozenset[int]):
        """Store an oriented edge value; apply gender pruning, track
        provenance, queue the pair if it changed, fire the spouse-gender
        rule. Raises when the set empties."""
        pair = (a, b) if a < b else (b, a)
        stored = mask if a < b else invert_rset(mask)
        ga = self.entities[pair[0]].gender
        gb = self.entities[pair[1]].gender
        if ga.definite and gb.definite:
            stored &= ~SPOUSE_BIT if ga == gb else ~SELF_BIT
        old = self._edges.get(pair)
        if stored == old:
            return
        if stored == 0:
            raise _ContradictionError(
                pair,
                f"no relation remains possible between {self._describe(pair[0])} "
                f"and {self._describe(pair[1])}",
                self._prov.get(pair, frozenset()) | prov,
            )
        self._edges[pair] = stored
        self._prov[pair] = self._prov.get(pair, frozenset()) | prov
        self._txn.changed.append(pair)
        self._enqueue(pair)
        self._spouse_rule(pair)

    def _spouse_rule(self, pair):
        """A resolved {Spouse} edge forces the unknown endpoint's gender to
        the opposite of the known one."""
        if self._edges.get(pair) != SPOUSE_BIT:
            return
        ga = self.entities[pair[0]].gender
        gb = self.entities[pair[1]].gender
        if ga.definite and not gb.definite:
            self._set_gender_internal(pair[1], _opposite(ga))
        elif gb.definite and not ga.definite:
            self._set_gender_internal(pair[0], _opposite(gb))

    def _set_gender_internal(self, eid: int, gender: Gender):
        ent = self.entities[eid]
        if ent.gender.definite:
            if ent.gender != gender:
                raise _ContradictionError(
                    None,
                    f"{self._describe(eid)} cannot be {gender.value}: "
                    f"recorded as {ent.gender.value}",
                    frozenset(),
                )
            return
        ent.gender = gender
        txn_prov = frozenset((self._txn.log_idx,))
        for other in self.component_members(eid):
            if other == eid:
                continue
            self._write_edge(eid, other, self.edge(eid, other), txn_prov)
            self._spouse_rule(_canon(eid, other))

    def _clique_pass(self, i: int, j: int, k: int):
        """The two triangle updates after (i, j) shrank, (i,k) first."""
        compose = self.table.compose_sets
        rij = self.edge(i, j)
        prov = (self._prov.get(_canon(i, j), frozenset())
                | frozenset((self._txn.log_idx,)))
        rik = self.edge(i, k)
        new_ik = rik & compose(rij, self.edge(j, k))
        if new_ik != rik:
            self._write_edge(i, k, new_ik, prov | self._prov.get(_canon(j, k), frozenset()))
        rjk = self.edge(j, k)
        new_jk = rjk & compose(invert_rset(rij), self.edge(i, k))
        if new_jk != rjk:
            self._write_edge(j, k, new_jk, prov | self._prov.get(_canon(i, k), frozenset()))

    def _do_propagate(self, dirty):
        for pair in dirty:
            self._enqueue(_canon(*pair))
        self._drain_worklist()

    def _drain_worklist(self):
        txn = self._txn
        queue = txn.queue
        rng = self.worklist_rng
        while queue:
            if rng is None:
                pair = queue.popleft()
            else:
                idx = rng.randrange(len(queue))
                queue.rotate(-idx)
                pair = queue.popleft()
                queue.rotate(idx)
            txn.in_queue.discard(pair)
            i, j = pair
            if i not in self.entities or j not in self.entities:
                continue  # absorbed by a merge while queued
            if self._component.get(i) != self._component.get(j):
                continue
            for k in list(self._members[self._component[i]]):
                if k != i and k != j:
                    self._clique_pass(i, j, k)

    def self_resolved_pairs(self) -> list[tuple[int, int]]:
        """Pairs whose edge set has collapsed to exactly {Self}; each is a
        coreference discovery awaiting an explicit merge."""
        return [pair for pair, mask in self._edges.items() if mask == SELF_BIT]

    # -- mutation bodies -------------------------------------------------------

    def _do_assert(self, a: int, constraint: int, b: int):
        txn_prov = frozenset((self._txn.log_idx,))
        if self.same_component(a, b):
            self._write_edge(a, b, self.edge(a, b) & constraint, txn_prov)
        else:
            self._join(a, b, constraint, txn_prov)
        self._drain_worklist()

    def _join(self, a: int, b: int, seed: int, prov: frozenset[int]):
        ca, cb = self._component[a], self._component[b]
        side_a = sorted(self._members[ca])
        side_b = sorted(self._members[cb])
        label = min(ca, cb)
        merged = self._members[ca] | self._members[cb]
        for eid in merged:
            self._component[eid] = label
        self._members.pop(ca, None)
        self._members.pop(cb, None)
        self._members[label] = merged
        for x in side_a:
            for y in side_b:
                if x == a and y == b:
                    continue
                pair = _canon(x, y)
                self._edges[pair] = FULL_SET
                self._write_edge(x, y, FULL_SET, prov)
                self._enqueue(pair)
        self._edges[_canon(a, b)] = FULL_SET
        self._write_edge(a, b, seed, prov)
        self._enqueue(_canon(a, b))

    def _do_set_gender(self, eid: int, gender: Gender):
        self._set_gender_internal(eid, gender)
        self._drain_worklist()

    def _do_merge(self, a: int, b: int, confirmed: bool):
        if not self.same_component(a, b):
            if not confirmed:
                raise _ContradictionError(
                    None, "entities are unconnected; merge must be confirmed", frozenset())
            self._join(a, b, SELF_BIT, frozenset((self._txn.log_idx,)))
            self._drain_worklist()
            self._merge_internal(a, b)
            self._drain_worklist()
            return
        edge = self.edge(a, b)
        if edge != SELF_BIT and not (confirmed and edge & SELF_BIT):
            raise _ContradictionError(
                _canon(a, b),
                f"{self._describe(a)} and {self._describe(b)} cannot be the same person",
                self._prov.get(_canon(a, b), frozenset()),
            )
        self._merge_internal(a, b)
        self._drain_worklist()

    def _merge_internal(self, a: int, b: int):
        survivor, absorbed = (a, b) if a < b else (b, a)
        es, ea = self.entities[survivor], self.entities[absorbed]
        gender = _unify_gender(es.gender, ea.gender)
        if gender is None:
            raise _ContradictionError(
                _canon(a, b),
                f"{self._describe(a)} and {self._describe(b)} have conflicting genders",
                self._prov.get(_canon(a, b), frozenset()),
            )
        txn_prov = (self._prov.get(_canon(a, b), frozenset())
                    | frozenset((self._txn.log_idx,)))
        self._txn.merged.append((survivor, absorbed, tuple(sorted(ea.names))))
        es.names |= ea.names
        es.mentions.extend(ea.mentions)
        es.is_narrator = es.is_narrator or ea.is_narrator
        es.gender = gender
        comp = self._component[survivor]
        others = [k for k in self._members[comp] if k not in (survivor, absorbed)]
        absorbed_edges = {}
        for k in others:
            absorbed_edges[k] = self.edge(absorbed, k)
        # Drop the absorbed entity before rewriting edges so gender masks and
        # the spouse rule see the merged entity.
        for k in others + [survivor]:
            self._edges.pop(_canon(absorbed, k), None)
        self._prov.pop(_canon(absorbed, survivor), None)
        del self.entities[absorbed]
        self._members[comp].discard(absorbed)
        del self._component[absorbed]
        if comp == absorbed:
            new_label = min(self._members[comp])
            for eid in self._members[comp]:
                self._component[eid] = new_label
            self._members[new_label] = self._members.pop(comp)
        for k in others:
            merged_prov = (self._prov.pop(_canon(absorbed, k), frozenset()) | txn_prov)
            self._write_edge(survivor, k, self.edge(survivor, k) & absorbed_edges[k],
                             merged_prov)

    def _describe(self, eid: int) -> str:
        ent = self.entities.get(eid)
        if ent is None:
            return f"entity {eid}"
        if ent.is_narrator:
            return "you"
        name = ent.display_name()
        return name if name else f"entity {eid}"

    # Low-level test hook: place an edge value without propagation.
    def _set_edge_raw(self, a: int, b: int, mask: int):
        self._edges[_canon(a, b)] = mask if a < b else invert_rset(mask)


class _Txn:
    __slots__ = ("queue", "in_queue", "changed", "merged", "log_idx")

    def __init__(self, log_idx: int):
        self.queue = deque()
        self.in_queue: set[tuple[int, int]] = set()
        self.changed: list[tuple[int, int]] = []
        self.merged: list[tuple[int, int, tuple[str, ...]]] = []
        self.log_idx = log_idx


def _canon(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


def _unify_gender(g1: Gender, g2: Gender) -> Gender | None:
    """Definite beats probable beats unknown; definite conflict is fatal,
    probable conflict falls back to unknown."""
    if g1.definite and g2.definite:
        return g1 if g1 == g2 else None
    if g1.definite:
        return g1
    if g2.definite:
        return g2
    if g1 is Gender.UNKNOWN:
        return g2
    if g2 is Gender.UNKNOWN:
        return g1
    return g1 if g1 == g2 else Gender.UNKNOWN


def new_world(table: CompositionTable) -> WorldModel:
    """Fresh empty model over a validated composition table."""
    return WorldModel(table)
