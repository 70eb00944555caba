"""Uncertainty-driven dialog: pick the question that shrinks the model
most, read answers (directly or through learned paraphrases), and turn
contradictions into repair proposals.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum

from .extraction import ExtractedFact, PatternSet, parse_utterance, surface_for
from .relations import Atom, atoms_of, rset
from .world import Contradiction, Gender, Mention, WorldModel, SELF_BIT, SPOUSE_BIT


class QuestionKind(Enum):
    CHOOSE_RELATION = "choose-relation"
    YES_NO_SELF = "yes-no-self"
    YES_NO_RELATION = "yes-no-relation"
    ASK_GENDER = "ask-gender"
    ASK_NAME = "ask-name"
    CONFIRM_SPLIT = "confirm-split"
    CHOOSE_REFERENT = "choose-referent"


@dataclass(frozen=True)
class Question:
    kind: QuestionKind
    text: str
    template_id: str
    slots: dict = field(default_factory=dict, hash=False, compare=False)
    pair: tuple[int, int] | None = None
    entity: int | None = None
    candidates: tuple[Atom, ...] = ()
    options: tuple[str, ...] = ()
    context: dict = field(default_factory=dict, hash=False, compare=False)

    def payload(self) -> dict:
        data = {"kind": self.kind.value, "text": self.text}
        if self.options:
            data["options"] = list(self.options)
        return data


@dataclass(frozen=True)
class Answer:
    value: str  # yes | no | atom | gender | name | choice | unknown
    provenance: str = "direct"  # direct | paraphrase
    token: str = ""
    atom: Atom | None = None
    gender: Gender | None = None
    name: str | None = None
    choice: int | None = None

    @property
    def known(self) -> bool:
        return self.value != "unknown"


UNKNOWN_ANSWER = Answer("unknown", token="")


@dataclass(frozen=True)
class ParaphraseEntry:
    template_id: str
    pattern: str
    answer_token: str


class ParaphraseStore:
    """Learned (question template, abstracted utterance) -> answer token.

    Backed by an append-only JSONL file when a path is given; identical
    keys take the last written value.
    """

    def __init__(self, path=None):
        self.path = path
        self.entries: dict[tuple[str, str], str] = {}
        if path is not None:
            try:
                with open(path, "r", encoding="utf-8") as fh:
                    for line in fh:
                        line = line.strip()
                        if not line:
                            continue
                        row = json.loads(line)
                        self.entries[(row["template"], row["pattern"])] = row["answer"]
            except FileNotFoundError:
                pass

    def lookup(self, template_id: str, pattern: str) -> str | None:
        return self.entries.get((template_id, pattern))

    def add(self, entry: ParaphraseEntry) -> None:
        self.entries[(entry.template_id, entry.pattern)] = entry.answer_token
        if self.path is not None:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps({"template": entry.template_id,
                                     "pattern": entry.pattern,
                                     "answer": entry.answer_token}) + "\n")


# -- rendering helpers ---------------------------------------------------------


def describe_entity(w: WorldModel, eid: int) -> str:
    """Name if known, else a relation phrase anchored at the narrator,
    else a numbered placeholder."""
    ent = w.entities[eid]
    if ent.is_narrator:
        return "you"
    name = ent.display_name()
    if name:
        return name
    narr = w.narrator_id()
    if narr is not None and narr != eid and w.same_component(eid, narr):
        mask = w.possible_relations(eid, narr)
        members = atoms_of(mask)
        if len(members) == 1:
            return f"your {surface_for(members[0], ent.gender)}"
    return f"person #{eid}"


def _norm(text: str) -> str:
    return re.sub(r"\s+", " ", text.strip().strip(".!?").strip()).lower()


def abstract_with_slots(text: str, slots: dict) -> str:
    """Replace every slot value (a name) in the text with its slot key;
    substituting values back reproduces the original, case-normalized."""
    out = _norm(text)
    for key, value in sorted(slots.items()):
        out = re.sub(rf"\b{re.escape(value.lower())}\b", "{" + key + "}", out)
    return out


def substitute_slots(pattern: str, slots: dict) -> str:
    out = pattern
    for key, value in slots.items():
        out = out.replace("{" + key + "}", value.lower())
    return out


# -- question scoring and selection ---------------------------------------------


def score_edge(w: WorldModel, pair: tuple[int, int]) -> float:
    """Expected total edge-set cardinality after the user resolves this
    pair, averaging uniformly over its atoms. A cloned model absorbs each
    hypothetical answer; an answer the model would reject scores zero."""
    a, b = pair
    mask = w.possible_relations(a, b)
    members = atoms_of(mask)
    if len(members) < 2:
        raise ValueError("score_edge needs an edge with at least two atoms")
    total = 0.0
    for atom in members:
        sim = w.clone()
        res = sim.assert_relation(a, rset(atom), b)
        if isinstance(res, Contradiction):
            continue  # a rejected answer contributes zero
        for x, y in sim.self_resolved_pairs():
            if x in sim.entities and y in sim.entities:
                sim.merge_entities(x, y)
        total += sum(bin(m).count("1") for m in sim._edges.values())
    return total / len(members)


def _narrator_distance(w: WorldModel, pair: tuple[int, int]) -> int:
    narr = w.narrator_id()
    if narr is None:
        return 2
    if narr in pair:
        return 0
    if w.same_component(pair[0], narr):
        return 1
    return 2


def next_question(w: WorldModel, session) -> Question | None:
    """Repairs first; then the multi-atom edge whose resolution shrinks
    the model most (ties: closer to the narrator, smaller edge set,
    lowest pair)."""
    pending = getattr(session, "pending_repair", None)
    if pending is not None:
        return pending

    edges = sorted(w._edges.items())
    # gender unknowns blocking the spouse/self rules
    for (a, b), mask in edges:
        if mask == SELF_BIT | SPOUSE_BIT:
            for eid in (a, b):
                if not w.entities[eid].gender.definite:
                    return make_gender_question(w, eid)

    best = None
    for (a, b), mask in edges:
        if bin(mask).count("1") < 2:
            continue
        key = (score_edge(w, (a, b)), _narrator_distance(w, (a, b)),
               bin(mask).count("1"), (a, b))
        if best is None or key < best[0]:
            best = (key, (a, b), mask)
    if best is None:
        return None
    _, pair, mask = best
    return make_relation_question(w, pair)


def _slot_names(w: WorldModel, eids) -> dict:
    slots = {}
    for eid in eids:
        name = w.entities[eid].display_name()
        if name:
            slots[f"x{len(slots) + 1}"] = name
    return slots


def _orient_pair(w: WorldModel, pair: tuple[int, int]) -> tuple[int, int]:
    """Phrase questions about the other person, relative to the narrator
    (or relative to whichever side has a name)."""
    a, b = pair
    if w.entities[a].is_narrator:
        return b, a
    if w.entities[b].is_narrator:
        return a, b
    if w.entities[b].names and not w.entities[a].names:
        return b, a
    return a, b


def make_relation_question(w: WorldModel, pair: tuple[int, int]) -> Question:
    a, b = _orient_pair(w, pair)
    pair = (a, b)
    mask = w.possible_relations(a, b)
    members = atoms_of(mask)
    if Atom.SELF in members:
        # lead with the named entity when only one side has a name
        if w.entities[b].names and not w.entities[a].names:
            first, second = b, a
        else:
            first, second = a, b
        text = (f"Is {describe_entity(w, first)} the same person as "
                f"{describe_entity(w, second)}?")
        return Question(QuestionKind.YES_NO_SELF, text, "yes-no-self",
                        slots=_slot_names(w, (first, second)), pair=pair,
                        candidates=tuple(members))
    gender = w.entities[a].gender
    if len(members) == 2:
        atom = members[0]
        surface = surface_for(atom, gender)
        anchor = describe_entity(w, b)
        owner = "your" if w.entities[b].is_narrator else f"{anchor}'s"
        text = f"Is {describe_entity(w, a)} {owner} {surface}?"
        return Question(QuestionKind.YES_NO_RELATION, text,
                        f"yes-no-relation:{surface}",
                        slots=_slot_names(w, (a, b)), pair=pair,
                        candidates=tuple(members))
    options = tuple(surface_for(atom, gender) for atom in members)
    listed = "  ".join(f"{i+1}) {opt}" for i, opt in enumerate(options))
    text = (f"How is {describe_entity(w, a)} related to {describe_entity(w, b)}? "
            f"Answer with a number or a relation word: {listed}")
    template = "choose-relation:" + ",".join(a_.label for a_ in members)
    return Question(QuestionKind.CHOOSE_RELATION, text, template,
                    slots=_slot_names(w, (a, b)), pair=pair,
                    candidates=tuple(members), options=options)


def make_gender_question(w: WorldModel, eid: int) -> Question:
    text = f"Is {describe_entity(w, eid)} a man or a woman?"
    return Question(QuestionKind.ASK_GENDER, text, "ask-gender",
                    slots=_slot_names(w, (eid,)), entity=eid)


def make_name_question(w: WorldModel, eid: int) -> Question:
    text = f"What is {describe_entity(w, eid)}'s name?"
    return Question(QuestionKind.ASK_NAME, text, "ask-name",
                    slots=_slot_names(w, (eid,)), entity=eid)


def make_split_question(w: WorldModel, eid: int, trigger_mention: Mention,
                        claim: str, fact, holder_ref) -> Question:
    ent = w.entities[eid]
    keep = tuple(m for m in ent.mentions if m != trigger_mention)
    name = ent.display_name() or f"person #{eid}"
    text = (f"I already know {name} as {describe_entity(w, eid)}. "
            f"Is the {name} who {claim} a different person?")
    return Question(QuestionKind.CONFIRM_SPLIT, text, "confirm-split",
                    slots={"x1": name} if ent.names else {}, entity=eid,
                    context={"partition": (keep, (trigger_mention,)),
                             "fact": fact, "holder_ref": holder_ref,
                             "claim": claim})


def make_referent_question(w: WorldModel, name: str, candidates, fact,
                           ref, pending) -> Question:
    options = tuple(describe_entity_with_relation(w, c) for c in candidates)
    listed = "  ".join(f"{i+1}) {opt}" for i, opt in enumerate(options))
    extra = len(options) + 1
    text = (f"Which {name} do you mean? {listed}  {extra}) someone else")
    return Question(QuestionKind.CHOOSE_REFERENT, text, "choose-referent",
                    slots={"x1": name}, candidates=(),
                    options=options + ("someone else",),
                    context={"name": name, "candidates": tuple(candidates),
                             "fact": fact, "ref": ref, "pending": tuple(pending)})


def describe_entity_with_relation(w: WorldModel, eid: int) -> str:
    ent = w.entities[eid]
    name = ent.display_name() or f"person #{eid}"
    narr = w.narrator_id()
    if narr is not None and narr != eid and w.same_component(eid, narr):
        mask = w.possible_relations(eid, narr)
        members = atoms_of(mask)
        if len(members) == 1 and members[0] is not Atom.OUT_OF_GRAPH:
            return f"{name} (your {surface_for(members[0], ent.gender)})"
    return name


# -- answer interpretation -------------------------------------------------------

_GENDER_ANSWERS = {"man": Gender.MALE, "male": Gender.MALE, "boy": Gender.MALE,
                   "woman": Gender.FEMALE, "female": Gender.FEMALE,
                   "girl": Gender.FEMALE}


def interpret_answer(q: Question, text: str, store: ParaphraseStore,
                     patterns: PatternSet) -> Answer:
    """Direct forms first (bare answers plus question-specific forms),
    then the paraphrase store keyed by the question's template."""
    direct = _interpret_direct(q, text, patterns)
    if direct.known:
        return direct
    pattern = abstract_with_slots(text, q.slots)
    token = store.lookup(q.template_id, pattern)
    if token is not None:
        learned = _interpret_direct(q, substitute_slots(token, q.slots), patterns)
        if learned.known:
            return Answer(learned.value, "paraphrase", token, learned.atom,
                          learned.gender, learned.name, learned.choice)
    return UNKNOWN_ANSWER


def _interpret_direct(q: Question, text: str, patterns: PatternSet) -> Answer:
    norm = _norm(text)
    kind = q.kind

    if kind is QuestionKind.ASK_GENDER and norm in _GENDER_ANSWERS:
        return Answer("gender", token=norm, gender=_GENDER_ANSWERS[norm])

    if norm.isdigit() and (q.options or q.candidates):
        idx = int(norm) - 1
        limit = len(q.options) if q.options else len(q.candidates)
        if 0 <= idx < limit:
            atom = q.candidates[idx] if idx < len(q.candidates) else None
            return Answer("choice", token=norm, atom=atom, choice=idx)

    facts = parse_utterance(text, patterns)
    if len(facts) != 1 or facts[0].answer is None:
        return UNKNOWN_ANSWER
    fact = facts[0]
    token, akind = fact.answer, fact.answer_kind

    if akind in ("yes", "no"):
        if kind in (QuestionKind.YES_NO_SELF, QuestionKind.YES_NO_RELATION,
                    QuestionKind.CONFIRM_SPLIT):
            return Answer(akind, token=token)
        return UNKNOWN_ANSWER
    if akind == "same":
        if kind is QuestionKind.YES_NO_SELF:
            return Answer("yes", token=token)
        if kind is QuestionKind.CONFIRM_SPLIT:
            return Answer("no", token=token)
        return UNKNOWN_ANSWER
    if akind == "different":
        if kind is QuestionKind.YES_NO_SELF:
            return Answer("no", token=token)
        if kind is QuestionKind.CONFIRM_SPLIT:
            return Answer("yes", token=token)
        return UNKNOWN_ANSWER
    if akind == "relation" and kind in (QuestionKind.CHOOSE_RELATION,
                                        QuestionKind.YES_NO_RELATION):
        entry = patterns.lexicon.lookup(token)
        if entry is not None and entry[0] in q.candidates:
            return Answer("atom", token=token, atom=entry[0], gender=entry[1])
        return UNKNOWN_ANSWER
    if akind == "name" and kind is QuestionKind.ASK_NAME:
        return Answer("name", token=token, name=token)
    return UNKNOWN_ANSWER


def learn_paraphrase(q: Question, failed_text: str, followup: Answer,
                     store: ParaphraseStore) -> ParaphraseEntry | None:
    """After a re-asked question gets a direct answer, remember that the
    earlier unparsed reply meant the same thing, names abstracted."""
    if not followup.known or followup.provenance != "direct":
        return None
    pattern = abstract_with_slots(failed_text, q.slots)
    entry = ParaphraseEntry(q.template_id, pattern, followup.token)
    store.add(entry)
    return entry


# -- contradiction repair ---------------------------------------------------------


def describe_claim(w: WorldModel, trigger: dict) -> str:
    if trigger.get("op") == "assert":
        atoms = [a for a in Atom if a.label in trigger["atoms"]]
        b = trigger["b"]
        ent_a = w.entities.get(trigger["a"])
        gender = ent_a.gender if ent_a is not None else Gender.UNKNOWN
        surface = surface_for(atoms[0], gender) if len(atoms) == 1 else "related"
        anchor = describe_entity(w, b) if b in w.entities else f"person #{b}"
        owner = "your" if anchor == "you" else f"{anchor}'s"
        return f"is {owner} {surface}"
    if trigger.get("op") == "gender":
        return "is " + ("a man" if trigger["gender"] == "male" else "a woman")
    return "was mentioned"


def explain_support(w: WorldModel, c: Contradiction) -> str:
    """Human-readable account of the accepted facts that close off the
    refused one."""
    parts = []
    for idx in c.support:
        if idx >= len(w.log):
            continue
        entry = w.log[idx]
        if entry.kind == "assert":
            a, b = entry.data["a"], entry.data["b"]
            atoms = entry.data["atoms"]
            da = describe_entity(w, a) if a in w.entities else f"person #{a}"
            db = describe_entity(w, b) if b in w.entities else f"person #{b}"
            parts.append(f"{da} is {'/'.join(atoms)} of {db}")
        elif entry.kind == "gender":
            eid = entry.data["eid"]
            de = describe_entity(w, eid) if eid in w.entities else f"person #{eid}"
            parts.append(f"{de} is {entry.data['gender']}")
    if not parts:
        return c.reason
    return c.reason + " (because " + "; ".join(parts) + ")"


def handle_contradiction(session, c: Contradiction,
                         fact: ExtractedFact | None = None,
                         holder_ref=None) -> tuple[list[str], Question | None]:
    """Either propose splitting a multi-mention entity (isolating the
    triggering assertion) or refuse with an explanation."""
    w = session.world
    trigger = c.trigger
    source = trigger.get("source")
    trigger_mention = Mention.from_json(source) if source else None
    involved = []
    if trigger.get("op") == "assert":
        involved = [trigger["a"], trigger["b"]]
    elif trigger.get("op") in ("gender", "merge"):
        involved = [trigger.get("eid", trigger.get("a"))]
    candidate = None
    if trigger_mention is not None:
        for eid in involved:
            ent = w.entities.get(eid)
            if ent is None or ent.is_narrator:
                continue
            if len(ent.mentions) >= 2 and trigger_mention in ent.mentions:
                candidate = eid
                break
    if candidate is not None and fact is not None:
        claim = describe_claim(w, trigger)
        question = make_split_question(w, candidate, trigger_mention, claim,
                                       fact, holder_ref)
        name = w.entities[candidate].display_name() or f"person #{candidate}"
        return ([f"That does not fit what I know about {name}."], question)
    return ([f"I can't accept that: {explain_support(w, c)}. "
             "I'll set it aside."], None)
