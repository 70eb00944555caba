"""One conversation: a world model, a pending question, a transcript.

The turn loop: try the user's text as an answer to the pending question;
failing that, parse it as new facts and ground them; report what was
learned, repair or refuse contradictions, and ask the next most useful
question. Unintelligible replies to a pending question trigger the
paraphrase-learning flow (say so, re-ask, learn from the retry).
"""

from __future__ import annotations

import json
import uuid
from dataclasses import dataclass, field

from . import dialog
from .dialog import (
    Answer,
    ParaphraseStore,
    Question,
    QuestionKind,
    describe_entity,
    handle_contradiction,
    interpret_answer,
    learn_paraphrase,
    next_question,
)
from .extraction import (
    AmbiguousMention,
    FactKind,
    Grounded,
    GroundingContext,
    NameLexicon,
    PatternSet,
    Refused,
    RelationLexicon,
    parse_utterance,
    resolve_mentions,
    surface_for,
)
from .relations import Atom, CompositionTable, atoms_of, labels_of, rset
from .world import Contradiction, LogEntry, WorldModel


@dataclass
class SayResult:
    replies: list[str]
    question: Question | None
    graph_version: int


@dataclass
class Session:
    table: CompositionTable
    patterns: PatternSet
    names: NameLexicon
    store: ParaphraseStore
    sid: str = field(default_factory=lambda: uuid.uuid4().hex[:12])
    world: WorldModel = None
    pending: Question | None = None
    pending_failed_text: str | None = None
    pending_repair: Question | None = None
    transcript: list[dict] = field(default_factory=list)
    utterance_counter: int = 0

    def __post_init__(self):
        if self.world is None:
            self.world = WorldModel(self.table)
            self.world.add_entity(narrator=True)

    @classmethod
    def create(cls, table, patterns=None, names=None, store=None) -> "Session":
        return cls(table,
                   patterns or PatternSet(RelationLexicon.builtin()),
                   names or NameLexicon.empty(),
                   store or ParaphraseStore())

    # -- the main turn -----------------------------------------------------

    def say(self, text: str) -> SayResult:
        self.transcript.append({"role": "user", "text": text})
        self.utterance_counter += 1
        replies: list[str] = []

        handled = False
        if self.pending is not None:
            handled = self._try_answer(text, replies)
        if not handled:
            facts = parse_utterance(text, self.patterns)
            parseable = [f for f in facts
                         if f.kind not in (FactKind.UNPARSEABLE, FactKind.ANSWER)]
            answers_only = facts and all(f.kind is FactKind.ANSWER for f in facts)
            if parseable:
                if self.pending is not None:
                    # user changed the subject; the question is re-derived later
                    self._clear_pending()
                self._apply_facts(parseable, replies)
                for f in facts:
                    if f.kind is FactKind.UNPARSEABLE:
                        replies.append(f"I could not understand \"{f.span}\".")
            elif self.pending is not None:
                # neither an answer nor new facts: ask again and remember the
                # failed reply so the next direct answer teaches a paraphrase
                self.pending_failed_text = text
                replies.append(f"I don't understand \"{text.strip()}\".")
            elif answers_only:
                replies.append("There is no open question right now.")
            elif not facts:
                replies.append("Tell me about your family, or ask with :ask.")
            else:
                for f in facts:
                    replies.append(f"I could not understand \"{f.span}\".")

        self._collapse_coreference(replies)
        question = self._choose_question()
        self.transcript.append({
            "role": "system",
            "text": " ".join(replies) + (f" [{question.text}]" if question else ""),
        })
        return SayResult(replies, question, self.world.version)

    # -- answering ----------------------------------------------------------

    def _question_still_valid(self, q: Question) -> bool:
        w = self.world
        if q.pair is not None:
            a, b = q.pair
            if a not in w.entities or b not in w.entities:
                return False
            mask = w.possible_relations(a, b)
            return mask is not None and bin(mask).count("1") >= 2
        if q.entity is not None:
            return q.entity in w.entities
        return True

    def _try_answer(self, text: str, replies: list[str]) -> bool:
        q = self.pending
        if not self._question_still_valid(q):
            self._clear_pending()
            return False
        answer = interpret_answer(q, text, self.store, self.patterns)
        if not answer.known:
            return False
        if self.pending_failed_text is not None and answer.provenance == "direct":
            entry = learn_paraphrase(q, self.pending_failed_text, answer, self.store)
            if entry is not None:
                replies.append(
                    f"Understood; I'll remember that \"{self.pending_failed_text.strip()}\" "
                    f"means \"{answer.token}\" here.")
        self._clear_pending()
        self._apply_answer(q, answer, replies)
        return True

    def _apply_answer(self, q: Question, answer: Answer, replies: list[str]) -> None:
        w = self.world
        kind = q.kind
        if kind is QuestionKind.ASK_GENDER:
            res = w.set_gender(q.entity, answer.gender)
            self._report(res, replies,
                         f"Noted: {describe_entity(w, q.entity)} is {answer.gender.value}.")
        elif kind is QuestionKind.ASK_NAME:
            w.add_name(q.entity, answer.name)
            replies.append(f"Nice to meet {answer.name}.")
        elif kind is QuestionKind.YES_NO_SELF:
            a, b = q.pair
            if answer.value == "yes":
                res = w.merge_entities(a, b, confirmed=True)
                self._report(res, replies, "Good, I've treated them as one person.")
            else:
                res = w.assert_relation(a, w.possible_relations(a, b) & ~rset(Atom.SELF), b)
                self._report(res, replies, "Understood, they are different people.")
        elif kind is QuestionKind.YES_NO_RELATION:
            a, b = q.pair
            asked = q.candidates[0]
            if answer.value == "yes":
                res = w.assert_relation(a, rset(asked), b)
            elif answer.value == "no":
                res = w.assert_relation(a, w.possible_relations(a, b) & ~rset(asked), b)
            else:  # a relation word picked one of the candidates directly
                res = w.assert_relation(a, rset(answer.atom), b)
            self._report(res, replies, self._edge_summary(q.pair))
        elif kind is QuestionKind.CHOOSE_RELATION:
            a, b = q.pair
            atom = answer.atom if answer.atom is not None else q.candidates[answer.choice]
            res = w.assert_relation(a, rset(atom), b)
            if not isinstance(res, Contradiction) and answer.gender is not None \
                    and answer.gender.definite and not w.entities[a].gender.definite:
                w.set_gender(a, answer.gender)
            self._report(res, replies, self._edge_summary(q.pair))
        elif kind is QuestionKind.CONFIRM_SPLIT:
            self._apply_split_answer(q, answer, replies)
        elif kind is QuestionKind.CHOOSE_REFERENT:
            self._apply_referent_answer(q, answer, replies)

    def _apply_split_answer(self, q: Question, answer: Answer, replies: list[str]) -> None:
        w = self.world
        ctxt = q.context
        if answer.value != "yes":
            replies.append("Okay, I've dropped that statement.")
            return
        keep, move = ctxt["partition"]
        kept, created = w.split_entity(q.entity, list(keep), list(move))
        fact = ctxt["fact"]
        holder_ref = ctxt["holder_ref"]
        bindings = {holder_ref: created} if holder_ref is not None else {}
        gctx = GroundingContext(w, self.utterance_counter, self.names, bindings)
        events = resolve_mentions([fact], gctx)
        self._narrate_events(events, replies)

    def _apply_referent_answer(self, q: Question, answer: Answer, replies: list[str]) -> None:
        ctxt = q.context
        candidates = ctxt["candidates"]
        idx = answer.choice
        bindings = {}
        if idx is not None and idx < len(candidates):
            bindings[ctxt["ref"]] = candidates[idx]
        elif idx is None:
            replies.append("I did not catch which one; dropping it.")
            return
        # "someone else" leaves no binding: grounding creates a new entity,
        # which is correct only if the name resolver is bypassed
        gctx = GroundingContext(self.world, self.utterance_counter, self.names, bindings)
        if not bindings:
            eid = self.world.add_entity(name=ctxt["name"])
            bindings[ctxt["ref"]] = eid
        events = resolve_mentions(list(ctxt["pending"]), gctx)
        self._narrate_events(events, replies)

    # -- fact application ------------------------------------------------------

    def _apply_facts(self, facts, replies: list[str]) -> None:
        gctx = GroundingContext(self.world, self.utterance_counter, self.names)
        events = resolve_mentions(facts, gctx)
        self._narrate_events(events, replies)

    def _narrate_events(self, events, replies: list[str]) -> None:
        for event in events:
            if isinstance(event, Grounded):
                fact = event.fact
                if fact.kind is FactKind.RELATION:
                    holder, anchor = event.entities
                    w = self.world
                    surface = surface_for(fact.atom, w.entities[holder].gender)
                    if w.entities[holder].names:
                        replies.append(
                            f"Okay: {describe_entity(w, holder)} is "
                            f"{owner_phrase(w, anchor)} {surface}.")
                    elif w.entities[anchor].is_narrator:
                        replies.append(f"Okay, you have a {surface}.")
                    else:
                        replies.append(
                            f"Okay, {describe_entity(w, anchor)} has a {surface}.")
                elif fact.kind is FactKind.NAME:
                    replies.append(f"Got it, the name {fact.name} is recorded.")
                elif fact.kind is FactKind.GENDER:
                    replies.append("Noted.")
            elif isinstance(event, AmbiguousMention):
                self.pending_repair = dialog.make_referent_question(
                    self.world, getattr(event.ref, "name", event.ref.span),
                    event.candidates, event.fact, event.ref, event.pending)
                replies.append("I know more than one person by that name.")
            elif isinstance(event, Refused):
                texts, question = handle_contradiction(
                    self, event.contradiction, event.fact,
                    holder_ref=event.fact.holder)
                replies.extend(texts)
                if question is not None:
                    self.pending_repair = question

    def _collapse_coreference(self, replies: list[str]) -> None:
        w = self.world
        while True:
            pairs = [p for p in w.self_resolved_pairs()
                     if p[0] in w.entities and p[1] in w.entities]
            if not pairs:
                break
            a, b = pairs[0]
            da, db = describe_entity(w, a), describe_entity(w, b)
            res = w.merge_entities(a, b)
            if isinstance(res, Contradiction):  # pragma: no cover - stable models merge
                break
            if da != db:
                replies.append(f"I see that {da} and {db} are the same person.")
            else:
                replies.append(f"I see that the two mentions of {da} are the same person.")

    def _report(self, res, replies: list[str], success_text: str) -> None:
        if isinstance(res, Contradiction):
            texts, question = handle_contradiction(self, res)
            replies.extend(texts)
            if question is not None:
                self.pending_repair = question
        else:
            replies.append(success_text)

    def _edge_summary(self, pair) -> str:
        w = self.world
        a, b = pair
        if a not in w.entities or b not in w.entities:
            return "Thanks, that settles it."
        mask = w.possible_relations(a, b)
        if mask is None:
            return "Thanks."
        members = atoms_of(mask)
        if len(members) == 1:
            surface = surface_for(members[0], w.entities[a].gender)
            return (f"So {describe_entity(w, a)} is {owner_phrase(w, b)} {surface}.")
        return f"Narrowed down to: {', '.join(labels_of(mask))}."

    # -- question management ------------------------------------------------------

    def _choose_question(self) -> Question | None:
        if self.pending_repair is not None:
            self.pending = self.pending_repair
            self.pending_repair = None
            self.pending_failed_text = None
            return self.pending
        if self.pending is not None and self.pending_failed_text is not None:
            return self.pending  # re-ask after a failed interpretation
        question = next_question(self.world, self)
        if question is not None and question != self.pending:
            self.pending_failed_text = None
        self.pending = question
        return question

    def _clear_pending(self) -> None:
        self.pending = None
        self.pending_failed_text = None

    # -- inspection and persistence -------------------------------------------

    def graph_payload(self) -> dict:
        return self.world.snapshot().to_dict()

    def relations_payload(self, a: int, b: int) -> dict:
        mask = self.world.possible_relations(a, b)
        if mask is None:
            return {"disjoint": True}
        return {"atoms": labels_of(mask), "disjoint": False}

    def to_json(self) -> dict:
        return {
            "session_id": self.sid,
            "transcript": self.transcript,
            "log": [e.to_json() for e in self.world.log],
            "utterance_counter": self.utterance_counter,
        }

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=1)

    @classmethod
    def load(cls, path, table, patterns=None, names=None, store=None) -> "Session":
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        session = cls(table,
                      patterns or PatternSet(RelationLexicon.builtin()),
                      names or NameLexicon.empty(),
                      store or ParaphraseStore(),
                      sid=data["session_id"],
                      world=WorldModel.replay(
                          table, [LogEntry.from_json(e) for e in data["log"]]))
        session.transcript = data["transcript"]
        session.utterance_counter = data.get("utterance_counter", 0)
        session._choose_question()
        return session


def owner_phrase(w: WorldModel, eid: int) -> str:
    desc = describe_entity(w, eid)
    return "your" if desc == "you" else f"{desc}'s"
