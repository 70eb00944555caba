"""Relation atoms, relation sets as bitmasks, and the composition table.

A relation set is a plain ``int`` whose low 14 bits mark atom membership.
Atom ``R`` on an ordered pair ``(a, b)`` always reads "a is the R of b".
Bitmasks keep propagation cheap: intersection is ``&``, union is ``|``,
and the composition of two sets memoizes per (atom, mask) row.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass


class Atom(enum.IntEnum):
    GRANDPARENT = 0
    PARENT = 1
    PARENT_IN_LAW = 2
    SPOUSE = 3
    SIBLING = 4
    SIBLING_IN_LAW = 5
    CHILD = 6
    CHILD_IN_LAW = 7
    GRANDCHILD = 8
    AUNT_UNCLE = 9
    NIECE_NEPHEW = 10
    COUSIN = 11
    SELF = 12
    OUT_OF_GRAPH = 13

    @property
    def bit(self) -> int:
        return 1 << self.value

    @property
    def label(self) -> str:
        return _LABELS[self]

    @property
    def inverse(self) -> "Atom":
        return _INVERSE[self]


_LABELS = {
    Atom.GRANDPARENT: "Grandparent",
    Atom.PARENT: "Parent",
    Atom.PARENT_IN_LAW: "ParentInLaw",
    Atom.SPOUSE: "Spouse",
    Atom.SIBLING: "Sibling",
    Atom.SIBLING_IN_LAW: "SiblingInLaw",
    Atom.CHILD: "Child",
    Atom.CHILD_IN_LAW: "ChildInLaw",
    Atom.GRANDCHILD: "Grandchild",
    Atom.AUNT_UNCLE: "AuntUncle",
    Atom.NIECE_NEPHEW: "NieceNephew",
    Atom.COUSIN: "Cousin",
    Atom.SELF: "Self",
    Atom.OUT_OF_GRAPH: "OutOfGraph",
}
ATOM_BY_LABEL = {label: atom for atom, label in _LABELS.items()}

_INVERSE_PAIRS = (
    (Atom.GRANDPARENT, Atom.GRANDCHILD),
    (Atom.PARENT, Atom.CHILD),
    (Atom.PARENT_IN_LAW, Atom.CHILD_IN_LAW),
    (Atom.AUNT_UNCLE, Atom.NIECE_NEPHEW),
)
_INVERSE = {atom: atom for atom in Atom}
for _a, _b in _INVERSE_PAIRS:
    _INVERSE[_a] = _b
    _INVERSE[_b] = _a

ATOM_COUNT = 14
EMPTY_SET = 0
FULL_SET = (1 << ATOM_COUNT) - 1

ATOMS = tuple(Atom)
# Alphabetical label order fixes the serialized form (and its checksum).
ATOMS_ALPHABETICAL = tuple(sorted(Atom, key=lambda a: a.label))


def inverse(r: Atom) -> Atom:
    """Unique inverse of an atom; an involution."""
    return _INVERSE[r]


def rset(*atoms: Atom) -> int:
    mask = 0
    for a in atoms:
        mask |= 1 << a.value
    return mask


def atoms_of(mask: int) -> list[Atom]:
    return [a for a in ATOMS if mask & (1 << a.value)]


def labels_of(mask: int) -> list[str]:
    """Member labels in canonical (alphabetical) order."""
    return [a.label for a in ATOMS_ALPHABETICAL if mask & (1 << a.value)]


def mask_from_labels(labels) -> int:
    mask = 0
    for label in labels:
        mask |= ATOM_BY_LABEL[label].bit
    return mask


def card(mask: int) -> int:
    return bin(mask).count("1")


_SELF_INVERSE_MASK = rset(
    Atom.SPOUSE, Atom.SIBLING, Atom.SIBLING_IN_LAW, Atom.COUSIN, Atom.SELF, Atom.OUT_OF_GRAPH
)
_SWAP_PAIRS = tuple((a.value, b.value) for a, b in _INVERSE_PAIRS)


def invert_rset(mask: int) -> int:
    """Element-wise inverse of a relation set; preserves cardinality."""
    inv = mask & _SELF_INVERSE_MASK
    for i, j in _SWAP_PAIRS:
        inv |= ((mask >> i) & 1) << j
        inv |= ((mask >> j) & 1) << i
    return inv


class TableError(ValueError):
    """Raised for structurally unusable composition tables."""


@dataclass(frozen=True)
class AxiomViolation:
    axiom: str  # "A1", "A2", "A3a" or "A3b"
    r1: Atom
    r2: Atom
    r3: Atom | None = None

    def __str__(self) -> str:
        where = f"({self.r1.label},{self.r2.label}"
        where += f",{self.r3.label})" if self.r3 is not None else ")"
        return f"{self.axiom} violated at {where}"


@dataclass(frozen=True)
class AxiomReport:
    violations: tuple[AxiomViolation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def summary(self) -> str:
        if self.ok:
            return "all axioms hold"
        return "\n".join(str(v) for v in self.violations)


class CompositionTable:
    """The 14x14 map from ordered atom pairs to relation sets.

    Immutable after construction; compose_sets results are memoized
    per (left atom, right mask) row, so instances are cheap to share.
    """

    def __init__(self, entries, version: str = "", seed: int = 0, budget: int = 0):
        if len(entries) != ATOM_COUNT * ATOM_COUNT:
            raise TableError(f"need {ATOM_COUNT * ATOM_COUNT} entries, got {len(entries)}")
        self._m = tuple(int(e) & FULL_SET for e in entries)
        self.version = version
        self.seed = seed
        self.budget = budget
        self._row_cache: dict[int, int] = {}

    def entry(self, r1: Atom, r2: Atom) -> int:
        return self._m[r1.value * ATOM_COUNT + r2.value]

    def compose(self, r1: Atom, r2: Atom) -> int:
        """Relation set possible across a shared middle entity."""
        return self._m[r1.value * ATOM_COUNT + r2.value]

    def compose_sets(self, s1: int, s2: int) -> int:
        """Union of pairwise compositions over two non-empty sets."""
        cache = self._row_cache
        m = self._m
        out = 0
        rest = s1
        while rest:
            low = rest & -rest
            rest ^= low
            r1 = low.bit_length() - 1
            key = (r1 << ATOM_COUNT) | s2
            row = cache.get(key)
            if row is None:
                row = 0
                bits = s2
                base = r1 * ATOM_COUNT
                while bits:
                    b = bits & -bits
                    bits ^= b
                    row |= m[base + b.bit_length() - 1]
                cache[key] = row
            out |= row
            if out == FULL_SET:
                return out
        return out

    def with_entry(self, r1: Atom, r2: Atom, mask: int) -> "CompositionTable":
        """Copy with one entry replaced (for constructing counterexamples)."""
        entries = list(self._m)
        entries[r1.value * ATOM_COUNT + r2.value] = mask & FULL_SET
        return CompositionTable(entries, version=self.version, seed=self.seed, budget=self.budget)

    def __eq__(self, other) -> bool:
        return isinstance(other, CompositionTable) and self._m == other._m

    def __hash__(self) -> int:
        return hash(self._m)

    # -- serialization ----------------------------------------------------

    def canonical_lines(self) -> list[str]:
        lines = []
        for r1 in ATOMS_ALPHABETICAL:
            for r2 in ATOMS_ALPHABETICAL:
                members = " ".join(labels_of(self.entry(r1, r2)))
                lines.append(f"{r1.label},{r2.label} -> {members}")
        return lines

    def checksum(self) -> str:
        body = "\n".join(self.canonical_lines()) + "\n"
        return hashlib.sha256(body.encode("utf-8")).hexdigest()

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("# family-relation composition table\n")
            fh.write(f"version: {self.version}\n")
            fh.write(f"seed: {self.seed}\n")
            fh.write(f"budget: {self.budget}\n")
            fh.write(f"checksum: {self.checksum()}\n")
            for line in self.canonical_lines():
                fh.write(line + "\n")

    @classmethod
    def load(cls, path) -> "CompositionTable":
        header: dict[str, str] = {}
        entries: dict[tuple[Atom, Atom], int] = {}
        with open(path, "r", encoding="utf-8") as fh:
            for raw in fh:
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "->" in line:
                    pair, _, members = line.partition("->")
                    left, _, right = pair.strip().partition(",")
                    try:
                        r1 = ATOM_BY_LABEL[left.strip()]
                        r2 = ATOM_BY_LABEL[right.strip()]
                    except KeyError as exc:
                        raise TableError(f"unknown atom in line: {line!r}") from exc
                    if (r1, r2) in entries:
                        raise TableError(f"duplicate entry for ({r1.label},{r2.label})")
                    entries[(r1, r2)] = mask_from_labels(members.split())
                elif ":" in line:
                    key, _, value = line.partition(":")
                    header[key.strip()] = value.strip()
                else:
                    raise TableError(f"unparseable table line: {line!r}")
        missing = [
            f"({a.label},{b.label})" for a in ATOMS for b in ATOMS if (a, b) not in entries
        ]
        if missing:
            raise TableError(f"table not total; missing {missing[:3]} ...")
        flat = [entries[(a, b)] for a in ATOMS for b in ATOMS]
        table = cls(
            flat,
            version=header.get("version", ""),
            seed=int(header.get("seed", "0")),
            budget=int(header.get("budget", "0")),
        )
        declared = header.get("checksum")
        if declared and declared != table.checksum():
            raise TableError("table checksum mismatch; re-derive or re-checksum")
        return table


def check_axioms(table: CompositionTable) -> AxiomReport:
    """Exhaustively list violations of the non-emptiness, inverse-closure
    and consistency axioms. An empty report means the table is valid."""
    violations: list[AxiomViolation] = []
    for r1 in ATOMS:
        for r2 in ATOMS:
            entry = table.entry(r1, r2)
            if entry == EMPTY_SET:
                violations.append(AxiomViolation("A1", r1, r2))
                continue
            mirrored = table.entry(inverse(r2), inverse(r1))
            if mirrored != invert_rset(entry):
                violations.append(AxiomViolation("A2", r1, r2))
            for r in atoms_of(entry):
                if not table.entry(r, inverse(r2)) & r1.bit:
                    violations.append(AxiomViolation("A3a", r1, r2, r))
                if not table.entry(inverse(r1), r) & r2.bit:
                    violations.append(AxiomViolation("A3a", r1, r2, r))
            for rinv in atoms_of(invert_rset(entry)):
                if not table.entry(rinv, r1) & inverse(r2).bit:
                    violations.append(AxiomViolation("A3b", r1, r2, rinv))
                if not table.entry(r2, rinv) & inverse(r1).bit:
                    violations.append(AxiomViolation("A3b", r1, r2, rinv))
    return AxiomReport(tuple(violations))


@dataclass(frozen=True)
class CliqueContext:
    """Orientation of two adjacent edges at their shared node, plus the
    opposite edge set oriented from r1's far node to r2's far node."""

    r1_starts_at_shared: bool
    r2_starts_at_shared: bool
    third: int

    def swapped(self) -> "CliqueContext":
        return CliqueContext(
            r1_starts_at_shared=self.r2_starts_at_shared,
            r2_starts_at_shared=self.r1_starts_at_shared,
            third=invert_rset(self.third),
        )


def supports(r1: Atom, r2: Atom, clique: CliqueContext, table: CompositionTable) -> bool:
    """True iff some third-edge atom makes r1 and r2 jointly consistent.

    The four orientation cases reduce to one composition over the third
    edge set, inverted as needed to line up with the shared node.
    """
    if clique.third == EMPTY_SET:
        raise ValueError("malformed clique context: empty third edge set")
    third = clique.third
    if clique.r1_starts_at_shared:
        if clique.r2_starts_at_shared:
            # r1 on (E,X), r2 on (E,Y), witness on (X,Y)
            return bool(table.compose_sets(r1.bit, third) & r2.bit)
        # r1 on (E,X), r2 on (Y,E), witness on (Y,X)
        return bool(table.compose_sets(invert_rset(third), inverse(r1).bit) & r2.bit)
    if clique.r2_starts_at_shared:
        # r1 on (X,E), r2 on (E,Y), witness on (X,Y)
        return bool(table.compose_sets(inverse(r1).bit, third) & r2.bit)
    # r1 on (X,E), r2 on (Y,E), witness on (Y,X)
    return bool(table.compose_sets(invert_rset(third), r1.bit) & r2.bit)
