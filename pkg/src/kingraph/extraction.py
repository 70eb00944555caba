"""Controlled-English front end: relation/name lexicons, the clause
pattern parser, and grounding of mentions onto world-model entities.

The supported sentence shapes are deliberately small and documented in
the README; anything that does not match comes back as an Unparseable
fact rather than being dropped.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

from .relations import Atom, rset
from .world import Contradiction, Gender, Mention, WorldModel

# -- relation lexicon --------------------------------------------------------

# surface -> (atom, gender implied for the relation holder)
BUILTIN_RELATION_LEXICON: dict[str, tuple[Atom, Gender]] = {
    "parent": (Atom.PARENT, Gender.UNKNOWN),
    "father": (Atom.PARENT, Gender.MALE),
    "dad": (Atom.PARENT, Gender.MALE),
    "daddy": (Atom.PARENT, Gender.MALE),
    "papa": (Atom.PARENT, Gender.MALE),
    "mother": (Atom.PARENT, Gender.FEMALE),
    "mom": (Atom.PARENT, Gender.FEMALE),
    "mum": (Atom.PARENT, Gender.FEMALE),
    "mommy": (Atom.PARENT, Gender.FEMALE),
    "child": (Atom.CHILD, Gender.UNKNOWN),
    "son": (Atom.CHILD, Gender.MALE),
    "daughter": (Atom.CHILD, Gender.FEMALE),
    "sibling": (Atom.SIBLING, Gender.UNKNOWN),
    "brother": (Atom.SIBLING, Gender.MALE),
    "sister": (Atom.SIBLING, Gender.FEMALE),
    "spouse": (Atom.SPOUSE, Gender.UNKNOWN),
    "partner": (Atom.SPOUSE, Gender.UNKNOWN),
    "husband": (Atom.SPOUSE, Gender.MALE),
    "wife": (Atom.SPOUSE, Gender.FEMALE),
    "grandparent": (Atom.GRANDPARENT, Gender.UNKNOWN),
    "grandfather": (Atom.GRANDPARENT, Gender.MALE),
    "grandpa": (Atom.GRANDPARENT, Gender.MALE),
    "grandmother": (Atom.GRANDPARENT, Gender.FEMALE),
    "grandma": (Atom.GRANDPARENT, Gender.FEMALE),
    "grandchild": (Atom.GRANDCHILD, Gender.UNKNOWN),
    "grandson": (Atom.GRANDCHILD, Gender.MALE),
    "granddaughter": (Atom.GRANDCHILD, Gender.FEMALE),
    "parent-in-law": (Atom.PARENT_IN_LAW, Gender.UNKNOWN),
    "father-in-law": (Atom.PARENT_IN_LAW, Gender.MALE),
    "mother-in-law": (Atom.PARENT_IN_LAW, Gender.FEMALE),
    "child-in-law": (Atom.CHILD_IN_LAW, Gender.UNKNOWN),
    "son-in-law": (Atom.CHILD_IN_LAW, Gender.MALE),
    "daughter-in-law": (Atom.CHILD_IN_LAW, Gender.FEMALE),
    "sibling-in-law": (Atom.SIBLING_IN_LAW, Gender.UNKNOWN),
    "brother-in-law": (Atom.SIBLING_IN_LAW, Gender.MALE),
    "sister-in-law": (Atom.SIBLING_IN_LAW, Gender.FEMALE),
    "uncle": (Atom.AUNT_UNCLE, Gender.MALE),
    "aunt": (Atom.AUNT_UNCLE, Gender.FEMALE),
    "auntie": (Atom.AUNT_UNCLE, Gender.FEMALE),
    "nephew": (Atom.NIECE_NEPHEW, Gender.MALE),
    "niece": (Atom.NIECE_NEPHEW, Gender.FEMALE),
    "cousin": (Atom.COUSIN, Gender.UNKNOWN),
}

# preferred rendering surface per (atom, gender leaning)
_SURFACES = {
    Atom.PARENT: ("parent", "father", "mother"),
    Atom.CHILD: ("child", "son", "daughter"),
    Atom.SIBLING: ("sibling", "brother", "sister"),
    Atom.SPOUSE: ("spouse", "husband", "wife"),
    Atom.GRANDPARENT: ("grandparent", "grandfather", "grandmother"),
    Atom.GRANDCHILD: ("grandchild", "grandson", "granddaughter"),
    Atom.PARENT_IN_LAW: ("parent-in-law", "father-in-law", "mother-in-law"),
    Atom.CHILD_IN_LAW: ("child-in-law", "son-in-law", "daughter-in-law"),
    Atom.SIBLING_IN_LAW: ("sibling-in-law", "brother-in-law", "sister-in-law"),
    Atom.AUNT_UNCLE: ("aunt or uncle", "uncle", "aunt"),
    Atom.NIECE_NEPHEW: ("niece or nephew", "nephew", "niece"),
    Atom.COUSIN: ("cousin", "cousin", "cousin"),
    Atom.SELF: ("the same person", "the same person", "the same person"),
    Atom.OUT_OF_GRAPH: ("no close relation", "no close relation", "no close relation"),
}


def surface_for(atom: Atom, gender: Gender = Gender.UNKNOWN) -> str:
    neutral, male, female = _SURFACES[atom]
    leaning = gender.leaning
    if leaning is Gender.MALE:
        return male
    if leaning is Gender.FEMALE:
        return female
    return neutral


class LexiconError(ValueError):
    pass


class RelationLexicon:
    def __init__(self, entries: dict[str, tuple[Atom, Gender]]):
        self.entries = {k.lower(): v for k, v in entries.items()}
        for surface in self.entries:
            if not surface:
                raise LexiconError("empty surface form")
        # "brother in law" and "brother-in-law" both match
        alternatives = sorted(
            (s.replace("-", "[ -]") for s in self.entries), key=len, reverse=True)
        self.pattern = "(?:" + "|".join(alternatives) + ")"

    def lookup(self, surface: str) -> tuple[Atom, Gender] | None:
        return self.entries.get(surface.lower().replace(" ", "-"))

    @classmethod
    def builtin(cls) -> "RelationLexicon":
        return cls(BUILTIN_RELATION_LEXICON)

    @classmethod
    def load(cls, path) -> "RelationLexicon":
        """Same record shape as the name lexicon: a header line then
        comma-separated (surface, atom, gender) rows."""
        entries = {}
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline()
            if "surface" not in header.lower():
                raise LexiconError("relation lexicon needs a header line")
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                parts = [p.strip() for p in line.split(",")]
                if len(parts) != 3:
                    raise LexiconError(f"bad relation lexicon row: {line!r}")
                surface, atom_label, gender = parts
                from .relations import ATOM_BY_LABEL
                if atom_label not in ATOM_BY_LABEL:
                    raise LexiconError(f"unknown atom {atom_label!r}")
                g = {"male": Gender.MALE, "female": Gender.FEMALE,
                     "none": Gender.UNKNOWN}.get(gender.lower())
                if g is None:
                    raise LexiconError(f"bad gender {gender!r}")
                if surface.lower() in entries:
                    raise LexiconError(f"duplicate surface {surface!r}")
                entries[surface.lower()] = (ATOM_BY_LABEL[atom_label], g)
        return cls(entries)


# -- census name lexicon ----------------------------------------------------

PROBABLE_RATIO = 10.0  # "ten times more frequent", inclusive


class NameLexicon:
    def __init__(self, counts: dict[str, tuple[int, int]]):
        self.counts = {name.lower(): (int(m), int(f)) for name, (m, f) in counts.items()}
        for name, (m, f) in self.counts.items():
            if m < 0 or f < 0:
                raise LexiconError(f"negative count for {name!r}")

    def lookup_gender(self, name: str) -> Gender:
        counts = self.counts.get(name.lower())
        if counts is None:
            return Gender.UNKNOWN
        male, female = counts
        if male > 0 and female == 0:
            return Gender.MALE
        if female > 0 and male == 0:
            return Gender.FEMALE
        if female and male >= PROBABLE_RATIO * female:
            return Gender.PROBABLY_MALE
        if male and female >= PROBABLE_RATIO * male:
            return Gender.PROBABLY_FEMALE
        return Gender.UNKNOWN

    @classmethod
    def load(cls, path) -> "NameLexicon":
        counts = {}
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline()
            if "name" not in header.lower():
                raise LexiconError("name lexicon needs a header line")
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                parts = [p.strip() for p in line.split(",")]
                if len(parts) != 3:
                    raise LexiconError(f"bad name lexicon row: {line!r}")
                counts[parts[0]] = (int(parts[1]), int(parts[2]))
        return cls(counts)

    @classmethod
    def empty(cls) -> "NameLexicon":
        return cls({})


# -- mention references and extracted facts ----------------------------------


@dataclass(frozen=True)
class NarratorRef:
    span: str = "I"


@dataclass(frozen=True)
class NameRef:
    name: str
    span: str


@dataclass(frozen=True)
class ChainRef:
    """A definite description: steps walk outward from the base, each one
    "the <surface> of the previous entity"."""
    base: "Ref"
    steps: tuple[tuple[Atom, Gender], ...]
    span: str


@dataclass(frozen=True)
class FreshRef:
    """An indefinite ("I have a brother"): always a new entity."""
    atom: Atom
    gender: Gender
    anchor: "Ref"
    span: str
    clause: int


Ref = NarratorRef | NameRef | ChainRef | FreshRef


class FactKind(Enum):
    RELATION = "relation-triple"
    NAME = "name-binding"
    GENDER = "gender-binding"
    ANSWER = "answer-candidate"
    UNPARSEABLE = "unparseable"


@dataclass(frozen=True)
class ExtractedFact:
    kind: FactKind
    span: str
    holder: Ref | None = None
    anchor: Ref | None = None
    atom: Atom | None = None
    holder_gender: Gender = Gender.UNKNOWN
    name: str | None = None
    gender: Gender | None = None
    answer: str | None = None       # canonical token for ANSWER facts
    answer_kind: str | None = None  # yes|no|same|different|name|relation


# -- the clause parser ---------------------------------------------------------

_GENDER_WORDS = {"man": Gender.MALE, "male": Gender.MALE,
                 "woman": Gender.FEMALE, "female": Gender.FEMALE}
_NAME = r"(?!(?:my|is|a|an|the|named|called)\b)([A-Za-z][A-Za-z'\-]*)"


class PatternSet:
    def __init__(self, lexicon: RelationLexicon):
        self.lexicon = lexicon
        rel = f"({lexicon.pattern})"
        flags = re.IGNORECASE
        self.p5 = re.compile(
            rf"my {rel}'s {rel} is (?:(?:named|called) )?{_NAME}", flags)
        self.p4a = re.compile(
            rf"{_NAME}'s {rel} is (?:(?:named|called) )?{_NAME}", flags)
        self.p4b = re.compile(rf"{_NAME} is {_NAME}'s {rel}", flags)
        self.p2a = re.compile(rf"my {rel}'s name is {_NAME}", flags)
        self.p2b = re.compile(rf"my {rel} is (?:(?:named|called) )?{_NAME}", flags)
        self.p1 = re.compile(
            rf"i have (?:a|an) {rel}(?: (?:named|called) {_NAME})?", flags)
        self.p3 = re.compile(rf"{_NAME} is my {rel}", flags)
        self.p6 = re.compile(rf"{_NAME} is (?:a |an )?(man|woman|male|female)", flags)
        self.p7_phrases = re.compile(
            r"(yes|no|same(?: person)?|different(?: people| persons)?)[.!?]?",
            flags)

    def rel(self, surface: str) -> tuple[Atom, Gender]:
        entry = self.lexicon.lookup(surface)
        if entry is None:  # pragma: no cover - surfaces come from the pattern
            raise LexiconError(f"unknown relation word {surface!r}")
        return entry


def split_clauses(text: str) -> list[str]:
    """Sentences split on terminal punctuation, then on 'and'."""
    clauses = []
    for sentence in re.split(r"[.!?;]+", text):
        for clause in re.split(r",?\s+\band\b\s+", sentence, flags=re.IGNORECASE):
            clause = clause.strip().strip(",").strip()
            if clause:
                clauses.append(clause)
    return clauses


def parse_utterance(text: str, patterns: PatternSet) -> list[ExtractedFact]:
    """Deterministic left-to-right matching of the supported clause shapes;
    unmatched clauses come back as UNPARSEABLE facts."""
    text = text.strip()
    if not text:
        return []
    facts: list[ExtractedFact] = []
    bare = _parse_bare_answer(text, patterns)
    if bare is not None:
        return [bare]
    for idx, clause in enumerate(split_clauses(text)):
        facts.extend(_parse_clause(clause, idx, patterns))
    return facts


def _parse_bare_answer(text: str, patterns: PatternSet) -> ExtractedFact | None:
    stripped = text.strip()
    m = patterns.p7_phrases.fullmatch(stripped)
    if m:
        token = m.group(1).lower().split()[0]
        if token.startswith("same"):
            token = "same"
        if token.startswith("different"):
            token = "different"
        return ExtractedFact(FactKind.ANSWER, stripped, answer=token,
                             answer_kind=token if token in ("yes", "no") else token)
    word = stripped.rstrip(".!?")
    if re.fullmatch(r"[A-Za-z][A-Za-z'\-]*", word):
        entry = patterns.lexicon.lookup(word)
        if entry is not None:
            return ExtractedFact(FactKind.ANSWER, stripped, answer=word.lower(),
                                 answer_kind="relation")
        if word[0].isupper():
            return ExtractedFact(FactKind.ANSWER, stripped, answer=word,
                                 answer_kind="name")
    return None


def _parse_clause(clause: str, idx: int, p: PatternSet) -> list[ExtractedFact]:
    narrator = NarratorRef()

    m = p.p5.fullmatch(clause)
    if m:
        rel1, rel2, name = m.group(1), m.group(2), m.group(3)
        a1, g1 = p.rel(rel1)
        a2, g2 = p.rel(rel2)
        inner = ChainRef(narrator, ((a1, g1),), f"my {rel1}")
        holder = ChainRef(narrator, ((a1, g1), (a2, g2)), clause)
        return [
            ExtractedFact(FactKind.RELATION, clause, holder=holder, anchor=inner,
                          atom=a2, holder_gender=g2),
            ExtractedFact(FactKind.NAME, clause, holder=holder, name=name),
        ]

    m = p.p4a.fullmatch(clause)
    if m:
        anchor_name, rel, name = m.group(1), m.group(2), m.group(3)
        atom, g = p.rel(rel)
        anchor = NameRef(anchor_name, anchor_name)
        holder = ChainRef(anchor, ((atom, g),), clause)
        return [
            ExtractedFact(FactKind.RELATION, clause, holder=holder, anchor=anchor,
                          atom=atom, holder_gender=g),
            ExtractedFact(FactKind.NAME, clause, holder=holder, name=name),
        ]

    m = p.p4b.fullmatch(clause)
    if m:
        name, anchor_name, rel = m.group(1), m.group(2), m.group(3)
        atom, g = p.rel(rel)
        holder = NameRef(name, clause)
        anchor = NameRef(anchor_name, anchor_name)
        return [ExtractedFact(FactKind.RELATION, clause, holder=holder, anchor=anchor,
                              atom=atom, holder_gender=g)]

    m = p.p2a.fullmatch(clause) or p.p2b.fullmatch(clause)
    if m:
        rel, name = m.group(1), m.group(2)
        atom, g = p.rel(rel)
        holder = ChainRef(narrator, ((atom, g),), f"my {rel}")
        return [
            ExtractedFact(FactKind.RELATION, clause, holder=holder, anchor=narrator,
                          atom=atom, holder_gender=g),
            ExtractedFact(FactKind.NAME, clause, holder=holder, name=name),
        ]

    m = p.p1.fullmatch(clause)
    if m:
        rel, name = m.group(1), m.group(2)
        atom, g = p.rel(rel)
        holder = FreshRef(atom, g, narrator, clause, idx)
        facts = [ExtractedFact(FactKind.RELATION, clause, holder=holder,
                               anchor=narrator, atom=atom, holder_gender=g)]
        if name:
            facts.append(ExtractedFact(FactKind.NAME, clause, holder=holder, name=name))
        return facts

    m = p.p3.fullmatch(clause)
    if m:
        name, rel = m.group(1), m.group(2)
        atom, g = p.rel(rel)
        holder = NameRef(name, clause)
        return [ExtractedFact(FactKind.RELATION, clause, holder=holder, anchor=narrator,
                              atom=atom, holder_gender=g)]

    m = p.p6.fullmatch(clause)
    if m:
        name, word = m.group(1), m.group(2)
        return [ExtractedFact(FactKind.GENDER, clause, holder=NameRef(name, clause),
                              gender=_GENDER_WORDS[word.lower()])]

    return [ExtractedFact(FactKind.UNPARSEABLE, clause)]


# -- grounding ----------------------------------------------------------------


@dataclass
class GroundingContext:
    world: WorldModel
    utterance: int
    names: NameLexicon
    bindings: dict[Ref, int] = field(default_factory=dict)


@dataclass(frozen=True)
class Grounded:
    fact: ExtractedFact
    entities: tuple[int, ...]


@dataclass(frozen=True)
class AmbiguousMention:
    """A mention with several plausible referents: dialog must ask, the
    remaining facts of the utterance wait for the answer."""
    ref: Ref
    fact: ExtractedFact
    candidates: tuple[int, ...]
    pending: tuple[ExtractedFact, ...]


@dataclass(frozen=True)
class Refused:
    fact: ExtractedFact
    contradiction: Contradiction


GroundingEvent = Grounded | AmbiguousMention | Refused


class _Ambiguity(Exception):
    def __init__(self, ref, candidates):
        self.ref = ref
        self.candidates = candidates


class _Refusal(Exception):
    def __init__(self, contradiction):
        self.contradiction = contradiction


def resolve_mentions(facts, ctx: GroundingContext) -> list[GroundingEvent]:
    """Ground each fact in order, mutating the world as entities appear.
    Stops at the first ambiguous mention so dialog can ask about it."""
    events: list[GroundingEvent] = []
    queue = [f for f in facts if f.kind not in (FactKind.ANSWER, FactKind.UNPARSEABLE)]
    for i, fact in enumerate(queue):
        try:
            events.append(_ground_fact(fact, ctx))
        except _Ambiguity as amb:
            events.append(AmbiguousMention(amb.ref, fact, tuple(amb.candidates),
                                           tuple(queue[i:])))
            break
        except _Refusal as ref:
            events.append(Refused(fact, ref.contradiction))
    return events


def _ground_fact(fact: ExtractedFact, ctx: GroundingContext) -> Grounded:
    if fact.kind is FactKind.RELATION:
        anchor = _ground_ref(fact.anchor, ctx)
        holder = _ground_ref(fact.holder, ctx, relation_hint=(fact.atom, fact.holder_gender,
                                                              anchor))
        if holder != anchor:
            mention = Mention(ctx.utterance, fact.span)
            res = ctx.world.assert_relation(holder, rset(fact.atom), anchor,
                                            source=mention)
            if isinstance(res, Contradiction):
                raise _Refusal(res)
        _apply_holder_gender(holder, fact.holder_gender, ctx)
        return Grounded(fact, (holder, anchor))
    if fact.kind is FactKind.NAME:
        target = _ground_ref(fact.holder, ctx)
        mention = Mention(ctx.utterance, fact.span)
        world = ctx.world
        if fact.name not in world.entities[target].names:
            world.add_name(target, fact.name, source=mention)
        _apply_census_gender(target, fact.name, ctx)
        return Grounded(fact, (target,))
    if fact.kind is FactKind.GENDER:
        target = _ground_ref(fact.holder, ctx)
        res = ctx.world.set_gender(target, fact.gender,
                                   source=Mention(ctx.utterance, fact.span))
        if isinstance(res, Contradiction):
            raise _Refusal(res)
        return Grounded(fact, (target,))
    raise ValueError(f"cannot ground fact of kind {fact.kind}")


def _ground_ref(ref: Ref, ctx: GroundingContext, relation_hint=None) -> int:
    if ref in ctx.bindings:
        eid = ctx.bindings[ref]
        if eid in ctx.world.entities:
            if isinstance(ref, NameRef) and not any(
                    n.lower() == ref.name.lower() for n in ctx.world.entities[eid].names):
                ctx.world.add_name(eid, ref.name, source=Mention(ctx.utterance, ref.span))
            return eid
    eid = _ground_ref_inner(ref, ctx, relation_hint)
    ctx.bindings[ref] = eid
    return eid


def _ground_ref_inner(ref: Ref, ctx: GroundingContext, relation_hint) -> int:
    world = ctx.world
    if isinstance(ref, NarratorRef):
        narrator = world.narrator_id()
        if narrator is None:
            raise ValueError("session has no narrator entity")
        return narrator
    if isinstance(ref, NameRef):
        matches = [e.eid for e in world.entities.values()
                   if any(n.lower() == ref.name.lower() for n in e.names)]
        if len(matches) > 1:
            raise _Ambiguity(ref, sorted(matches))
        if len(matches) == 1:
            _attach_mention(matches[0], ref.span, ctx)
            return matches[0]
        eid = world.add_entity(name=ref.name, source=Mention(ctx.utterance, ref.span))
        _apply_census_gender(eid, ref.name, ctx)
        return eid
    if isinstance(ref, ChainRef):
        base = _ground_ref(ref.base, ctx)
        current = base
        for i, (atom, gender) in enumerate(ref.steps):
            last = i == len(ref.steps) - 1
            current = _ground_step(current, atom, gender, ref.span if last else None, ctx)
        return current
    if isinstance(ref, FreshRef):
        anchor = _ground_ref(ref.anchor, ctx)
        mention = Mention(ctx.utterance, ref.span)
        eid = world.add_entity(gender=ref.gender if ref.gender.definite else Gender.UNKNOWN,
                               source=mention)
        res = world.assert_relation(eid, rset(ref.atom), anchor, source=mention)
        if isinstance(res, Contradiction):  # pragma: no cover - fresh joins are safe
            raise _Refusal(res)
        return eid
    raise TypeError(f"unknown ref {ref!r}")


def _ground_step(base: int, atom: Atom, gender: Gender, span: str | None,
                 ctx: GroundingContext) -> int:
    """"the <rel> of base": the unique entity whose edge to base is exactly
    that relation and whose gender is compatible, else a fresh entity."""
    world = ctx.world
    needed = rset(atom)
    candidates = []
    for e in world.entities.values():
        if e.eid == base:
            continue
        possible = world.possible_relations(e.eid, base)
        if possible == needed and not _gender_conflict(e.gender, gender):
            candidates.append(e.eid)
    if len(candidates) > 1 and gender.definite:
        exact = [c for c in candidates if world.entities[c].gender is gender]
        if len(exact) == 1:
            candidates = exact
    if len(candidates) > 1:
        raise _Ambiguity(ChainRef(NarratorRef(), ((atom, gender),),
                                  span or surface_for(atom, gender)), sorted(candidates))
    if candidates:
        eid = candidates[0]
        if span:
            _attach_mention(eid, span, ctx)
        if gender.definite and not world.entities[eid].gender.definite:
            res = world.set_gender(eid, gender)
            if isinstance(res, Contradiction):
                raise _Refusal(res)
        return eid
    mention = Mention(ctx.utterance, span) if span else None
    eid = world.add_entity(gender=gender if gender.definite else Gender.UNKNOWN,
                           source=mention)
    res = world.assert_relation(eid, needed, base, source=mention)
    if isinstance(res, Contradiction):
        raise _Refusal(res)
    return eid


def _gender_conflict(have: Gender, want: Gender) -> bool:
    return want.definite and have.definite and have is not want


def _attach_mention(eid: int, span: str, ctx: GroundingContext) -> None:
    world = ctx.world
    ent = world.entities[eid]
    if ent.is_narrator:
        return
    mention = Mention(ctx.utterance, span)
    if mention not in ent.mentions:
        world.add_mention(eid, mention)


def _apply_holder_gender(eid: int, gender: Gender, ctx: GroundingContext) -> None:
    if gender.definite and not ctx.world.entities[eid].gender.definite:
        res = ctx.world.set_gender(eid, gender)
        if isinstance(res, Contradiction):
            raise _Refusal(res)


def _apply_census_gender(eid: int, name: str, ctx: GroundingContext) -> None:
    ent = ctx.world.entities[eid]
    if ent.gender is not Gender.UNKNOWN:
        return
    census = ctx.names.lookup_gender(name)
    if census is Gender.UNKNOWN:
        return
    if census.definite:
        res = ctx.world.set_gender(eid, census)
        if isinstance(res, Contradiction):
            raise _Refusal(res)
    else:
        ctx.world.set_probable_gender(eid, census)
