"""Concrete family forests: the ground truth behind the composition table.

Families follow the traditional model throughout: monogamous
opposite-sex marriage, every child has exactly one father and one mother
who are spouses, full siblings only, no remarriage. Marriages only join
people from disconnected components, so each union bridges two families
that share no prior path; this keeps pair classification generic (no
coincidental double links) and is what makes the derived table match
the expected entries exactly.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace

from .relations import (
    ATOM_COUNT,
    ATOMS,
    Atom,
    CompositionTable,
    check_axioms,
    labels_of,
    rset,
)

MALE = "male"
FEMALE = "female"


class GenerationError(RuntimeError):
    """Raised when no genealogy can satisfy the requested parameters."""


class DerivationError(RuntimeError):
    """Raised when table derivation cannot reach a valid table."""


@dataclass
class Person:
    pid: int
    gender: str
    father: int | None = None
    mother: int | None = None
    spouse: int | None = None
    generation: int = 0


@dataclass(frozen=True)
class GenealogyParams:
    max_persons: int = 25
    max_generations: int = 3
    num_families: int = 2
    intermarriage_rate: float = 0.5
    seed: int = 0
    max_children: int = 3
    marriage_prob: float = 0.7

    def validate(self) -> None:
        if self.max_persons < 1 or self.max_generations < 1 or self.num_families < 1:
            raise GenerationError("all counts must be >= 1")
        if not 0.0 <= self.intermarriage_rate <= 1.0:
            raise GenerationError("intermarriage_rate must lie in [0, 1]")


class Genealogy:
    def __init__(self):
        self.persons: dict[int, Person] = {}
        self._children: dict[int, list[int]] | None = None
        self._siblings: dict[int, set[int]] | None = None

    def add(self, person: Person) -> None:
        self.persons[person.pid] = person
        self._children = None
        self._siblings = None

    def __len__(self) -> int:
        return len(self.persons)

    def pids(self) -> list[int]:
        return list(self.persons)

    def _build_index(self) -> None:
        children: dict[int, list[int]] = {pid: [] for pid in self.persons}
        by_parents: dict[tuple[int, int], list[int]] = {}
        for p in self.persons.values():
            if p.father is not None:
                children[p.father].append(p.pid)
            if p.mother is not None:
                children[p.mother].append(p.pid)
            if p.father is not None and p.mother is not None:
                by_parents.setdefault((p.father, p.mother), []).append(p.pid)
        siblings: dict[int, set[int]] = {pid: set() for pid in self.persons}
        for group in by_parents.values():
            for pid in group:
                siblings[pid] = set(group) - {pid}
        self._children = children
        self._siblings = siblings

    def children_of(self, pid: int) -> list[int]:
        if self._children is None:
            self._build_index()
        return self._children[pid]

    def siblings_of(self, pid: int) -> set[int]:
        if self._siblings is None:
            self._build_index()
        return self._siblings[pid]

    def parents_of(self, pid: int) -> tuple[int, ...]:
        p = self.persons[pid]
        return tuple(x for x in (p.father, p.mother) if x is not None)

    def validate(self) -> list[str]:
        """Return invariant violations (empty list when well-formed)."""
        problems = []
        for p in self.persons.values():
            if p.spouse is not None:
                q = self.persons.get(p.spouse)
                if q is None or q.spouse != p.pid:
                    problems.append(f"asymmetric spouse link at {p.pid}")
                elif q.gender == p.gender:
                    problems.append(f"same-gender marriage at {p.pid}")
            if (p.father is None) != (p.mother is None):
                problems.append(f"person {p.pid} has exactly one parent")
            if p.father is not None and p.mother is not None:
                f, m = self.persons[p.father], self.persons[p.mother]
                if f.spouse != m.pid:
                    problems.append(f"parents of {p.pid} are not spouses")
                if f.gender != MALE or m.gender != FEMALE:
                    problems.append(f"parent genders wrong for {p.pid}")
                if f.generation >= p.generation or m.generation >= p.generation:
                    problems.append(f"generation does not decrease above {p.pid}")
        for p in self.persons.values():
            if p.spouse is not None and p.pid < p.spouse:
                blood = _blood_atom(self, p.pid, p.spouse)
                if blood is not None:
                    problems.append(
                        f"spouses {p.pid},{p.spouse} share blood relation {blood.label}"
                    )
        return problems


class _Components:
    """Union-find over person ids; marriages may only join disjoint roots."""

    def __init__(self):
        self.parent: dict[int, int] = {}

    def add(self, pid: int) -> None:
        self.parent[pid] = pid

    def find(self, pid: int) -> int:
        root = pid
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[pid] != root:
            self.parent[pid], pid = root, self.parent[pid]
        return root

    def union(self, a: int, b: int) -> None:
        self.parent[self.find(a)] = self.find(b)


def generate_genealogy(params: GenealogyParams) -> Genealogy:
    """Deterministically grow a forest of families under the traditional
    model. People marry fresh outsiders or, at the intermarriage rate,
    same-generation members of other components."""
    params.validate()
    rng = random.Random(params.seed)
    g = Genealogy()
    comps = _Components()
    next_pid = 0

    def new_person(gender: str, generation: int, father=None, mother=None) -> int:
        nonlocal next_pid
        pid = next_pid
        next_pid += 1
        g.add(Person(pid, gender, father=father, mother=mother, generation=generation))
        comps.add(pid)
        if father is not None:
            comps.union(pid, father)
        return pid

    def marry(a: int, b: int) -> None:
        g.persons[a].spouse = b
        g.persons[b].spouse = a
        comps.union(a, b)

    # Founding couples, one per requested family, while capacity lasts.
    for _ in range(params.num_families):
        if len(g) >= params.max_persons:
            break
        husband = new_person(MALE, 0)
        if len(g) >= params.max_persons:
            break
        wife = new_person(FEMALE, 0)
        marry(husband, wife)

    if not g.persons:
        raise GenerationError("cannot place any person under these parameters")

    for generation in range(params.max_generations - 1):
        couples = [
            (p.pid, p.spouse)
            for p in list(g.persons.values())
            if p.generation == generation and p.spouse is not None and p.gender == MALE
        ]
        for father, mother in couples:
            n_children = rng.randint(0, params.max_children)
            for _ in range(n_children):
                if len(g) >= params.max_persons:
                    break
                gender = MALE if rng.random() < 0.5 else FEMALE
                new_person(gender, generation + 1, father=father, mother=mother)
        # Marriage pass over the new generation.
        cohort = [p.pid for p in g.persons.values() if p.generation == generation + 1]
        for pid in cohort:
            person = g.persons[pid]
            if person.spouse is not None or rng.random() >= params.marriage_prob:
                continue
            partner = None
            if rng.random() < params.intermarriage_rate:
                root = comps.find(pid)
                candidates = [
                    q.pid
                    for q in g.persons.values()
                    if q.spouse is None
                    and q.generation == person.generation
                    and q.gender != person.gender
                    and comps.find(q.pid) != root
                ]
                if candidates:
                    partner = rng.choice(sorted(candidates))
            if partner is None and len(g) < params.max_persons:
                partner = new_person(
                    FEMALE if person.gender == MALE else MALE, person.generation
                )
            if partner is not None:
                marry(pid, partner)
    return g


def _blood_atom(g: Genealogy, a: int, b: int) -> Atom | None:
    """Named blood relation between a and b, or None. Ignores marriage
    links entirely, so it sees through classification precedence."""
    if a == b:
        return Atom.SELF
    parents_a, parents_b = g.parents_of(a), g.parents_of(b)
    if a in parents_b:
        return Atom.PARENT
    if b in parents_a:
        return Atom.CHILD
    if parents_a and parents_a == parents_b:
        return Atom.SIBLING
    if a in {x for p in parents_b for x in g.parents_of(p)}:
        return Atom.GRANDPARENT
    if b in {x for p in parents_a for x in g.parents_of(p)}:
        return Atom.GRANDCHILD
    if any(a in g.siblings_of(p) for p in parents_b):
        return Atom.AUNT_UNCLE
    if any(b in g.siblings_of(p) for p in parents_a):
        return Atom.NIECE_NEPHEW
    for p in parents_a:
        if g.siblings_of(p) & set(parents_b):
            return Atom.COUSIN
    return None


def classify_pair(g: Genealogy, a: int, b: int) -> Atom:
    """The unique atom holding between (a, b): "a is the ... of b".

    Under the traditional-model invariants at most one named relation can
    apply; everything outside the named set (great-grandparents, second
    cousins, co-in-laws, strangers) is OutOfGraph.
    """
    if a not in g.persons or b not in g.persons:
        raise KeyError(f"unknown person id in pair ({a}, {b})")
    if a == b:
        return Atom.SELF
    pa, pb = g.persons[a], g.persons[b]
    parents_b = g.parents_of(b)
    parents_a = g.parents_of(a)
    if a in parents_b:
        return Atom.PARENT
    if b in parents_a:
        return Atom.CHILD
    if parents_a and parents_a == parents_b:
        return Atom.SIBLING
    grandparents_b = {x for p in parents_b for x in g.parents_of(p)}
    if a in grandparents_b:
        return Atom.GRANDPARENT
    grandparents_a = {x for p in parents_a for x in g.parents_of(p)}
    if b in grandparents_a:
        return Atom.GRANDCHILD
    if pa.spouse == b:
        return Atom.SPOUSE
    if pb.spouse is not None and a in g.parents_of(pb.spouse):
        return Atom.PARENT_IN_LAW
    if pa.spouse is not None and b in g.parents_of(pa.spouse):
        return Atom.CHILD_IN_LAW
    if pb.spouse is not None and a in g.siblings_of(pb.spouse):
        return Atom.SIBLING_IN_LAW
    if pa.spouse is not None and b in g.siblings_of(pa.spouse):
        return Atom.SIBLING_IN_LAW
    aunts_b = set()
    for p in parents_b:
        for s in g.siblings_of(p):
            aunts_b.add(s)
            sp = g.persons[s].spouse
            if sp is not None:
                aunts_b.add(sp)
    if a in aunts_b:
        return Atom.AUNT_UNCLE
    aunts_a = set()
    for p in parents_a:
        for s in g.siblings_of(p):
            aunts_a.add(s)
            sp = g.persons[s].spouse
            if sp is not None:
                aunts_a.add(sp)
    if b in aunts_a:
        return Atom.NIECE_NEPHEW
    for p in parents_a:
        if g.siblings_of(p) & set(parents_b):
            return Atom.COUSIN
    return Atom.OUT_OF_GRAPH


def classify_all(g: Genealogy) -> dict[tuple[int, int], Atom]:
    pids = g.pids()
    return {(a, b): classify_pair(g, a, b) for a in pids for b in pids}


# Parameter archetypes cycled during derivation. Depth five realizes the
# longest chains that still compose to something (e.g. two grandparent
# hops); multiple families and intermarriage realize the out-of-graph
# rows broadly.
DEFAULT_DERIVATION_PARAMS = (
    GenealogyParams(max_persons=26, max_generations=5, num_families=1,
                    intermarriage_rate=0.0, max_children=2, marriage_prob=0.9),
    GenealogyParams(max_persons=24, max_generations=3, num_families=1,
                    intermarriage_rate=0.0, max_children=4, marriage_prob=0.8),
    GenealogyParams(max_persons=25, max_generations=3, num_families=2,
                    intermarriage_rate=0.6, max_children=3, marriage_prob=0.8),
    GenealogyParams(max_persons=30, max_generations=4, num_families=3,
                    intermarriage_rate=0.8, max_children=3, marriage_prob=0.7),
    GenealogyParams(max_persons=28, max_generations=4, num_families=2,
                    intermarriage_rate=0.4, max_children=3, marriage_prob=0.9),
)


def _absorb(entries: list[int], g: Genealogy) -> bool:
    """Insert every observed (relation, relation) -> relation triple."""
    pids = g.pids()
    n = len(pids)
    rel = [[classify_pair(g, a, b).value for b in pids] for a in pids]
    changed = False
    for i in range(n):
        rel_i = rel[i]
        for j in range(n):
            base = rel_i[j] * ATOM_COUNT
            rel_j = rel[j]
            for k in range(n):
                idx = base + rel_j[k]
                bit = 1 << rel_i[k]
                if not entries[idx] & bit:
                    entries[idx] |= bit
                    changed = True
    return changed


def derive_table(
    budget: int,
    params_list=DEFAULT_DERIVATION_PARAMS,
    seed: int = 0,
    confirmation_rounds: int = 400,
    version: str = "1",
) -> CompositionTable:
    """Reconstruct the composition table by brute-force sampling.

    Samples genealogies (cycling the parameter archetypes), classifies all
    ordered person triples sharing a middle element, and accumulates the
    endpoint relation into the entry for the two leg relations. Stops when
    a full confirmation run adds nothing, then validates the result.
    """
    if budget < 1:
        raise DerivationError("budget must be >= 1")
    rng = random.Random(seed)
    entries = [0] * (ATOM_COUNT * ATOM_COUNT)
    unchanged = 0
    samples = 0
    while samples < budget and unchanged < confirmation_rounds:
        params = replace(params_list[samples % len(params_list)], seed=rng.getrandbits(32))
        g = generate_genealogy(params)
        if _absorb(entries, g):
            unchanged = 0
        else:
            unchanged += 1
        samples += 1
    empty = [
        f"({a.label},{b.label})"
        for a in ATOMS
        for b in ATOMS
        if entries[a.value * ATOM_COUNT + b.value] == 0
    ]
    if empty:
        raise DerivationError(
            f"no witness found for {len(empty)} entries after {samples} samples: "
            + ", ".join(empty[:5])
        )
    table = CompositionTable(entries, version=version, seed=seed, budget=budget)
    report = check_axioms(table)
    if not report.ok:
        raise DerivationError("derived table violates axioms:\n" + report.summary())
    _check_anchor(table, Atom.PARENT, Atom.SIBLING, rset(Atom.PARENT))
    _check_anchor(
        table,
        Atom.COUSIN,
        Atom.COUSIN,
        rset(Atom.COUSIN, Atom.SELF, Atom.SIBLING, Atom.OUT_OF_GRAPH),
    )
    return table


def _check_anchor(table: CompositionTable, r1: Atom, r2: Atom, expected: int) -> None:
    got = table.entry(r1, r2)
    if got != expected:
        raise DerivationError(
            f"entry ({r1.label},{r2.label}) derived as {labels_of(got)}, "
            f"expected {labels_of(expected)}"
        )


# -- facts and the differential soundness check ---------------------------


@dataclass(frozen=True)
class RelationFact:
    a: int
    atom: Atom
    b: int


@dataclass(frozen=True)
class GenderFact:
    pid: int
    gender: str


Fact = RelationFact | GenderFact


def true_relation_facts(g: Genealogy, atoms=None) -> list[RelationFact]:
    """All ordered-pair facts whose atom is a named (non-Self, in-graph)
    relation; optionally restricted to the given atoms."""
    wanted = set(atoms) if atoms is not None else None
    facts = []
    pids = g.pids()
    for a in pids:
        for b in pids:
            if a == b:
                continue
            atom = classify_pair(g, a, b)
            if atom in (Atom.SELF, Atom.OUT_OF_GRAPH):
                continue
            if wanted is None or atom in wanted:
                facts.append(RelationFact(a, atom, b))
    return facts


def parent_spouse_facts(g: Genealogy) -> list[Fact]:
    """The generating link set: parent and spouse facts plus genders."""
    facts: list[Fact] = []
    for p in g.persons.values():
        facts.append(GenderFact(p.pid, p.gender))
        if p.spouse is not None and p.pid < p.spouse:
            facts.append(RelationFact(p.pid, Atom.SPOUSE, p.spouse))
        for c in g.children_of(p.pid):
            facts.append(RelationFact(p.pid, Atom.PARENT, c))
    return facts


@dataclass(frozen=True)
class SoundnessViolation:
    pair: tuple[int, int]
    true_atom: Atom
    edge_labels: tuple[str, ...]


@dataclass(frozen=True)
class SoundnessReport:
    violations: tuple[SoundnessViolation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def soundness_check(g: Genealogy, asserted, world, entity_map) -> SoundnessReport:
    """Empty iff the true relation survives in every edge set of a world
    built from `asserted` true facts; `entity_map` maps person ids to the
    world's entity ids."""
    del asserted  # the world must already contain them; kept for the record
    violations = []
    pids = [pid for pid in g.pids() if pid in entity_map]
    for i, a in enumerate(pids):
        for b in pids[i + 1 :]:
            possible = world.possible_relations(entity_map[a], entity_map[b])
            if possible is None:
                continue
            truth = classify_pair(g, a, b)
            if not possible & truth.bit:
                violations.append(
                    SoundnessViolation((a, b), truth, tuple(labels_of(possible)))
                )
    return SoundnessReport(tuple(violations))


def make_nuclear_family() -> Genealogy:
    """Three generations, ten people, every sibling pair mixed-gender: the
    configuration whose named-relation edges all resolve to singletons
    once parent, spouse and gender facts are asserted."""
    g = Genealogy()
    g.add(Person(0, MALE, generation=0))          # grandfather
    g.add(Person(1, FEMALE, generation=0))        # grandmother
    g.persons[0].spouse = 1
    g.persons[1].spouse = 0
    g.add(Person(2, MALE, father=0, mother=1, generation=1))    # son
    g.add(Person(3, FEMALE, father=0, mother=1, generation=1))  # daughter
    g.add(Person(4, FEMALE, generation=1))        # son's wife
    g.add(Person(5, MALE, generation=1))          # daughter's husband
    g.persons[2].spouse = 4
    g.persons[4].spouse = 2
    g.persons[3].spouse = 5
    g.persons[5].spouse = 3
    g.add(Person(6, MALE, father=2, mother=4, generation=2))
    g.add(Person(7, FEMALE, father=2, mother=4, generation=2))
    g.add(Person(8, MALE, father=5, mother=3, generation=2))
    g.add(Person(9, FEMALE, father=5, mother=3, generation=2))
    return g
