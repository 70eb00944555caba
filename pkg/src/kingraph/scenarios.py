"""Loader and driver for the scripted dialog scenarios in scenarios/."""

from __future__ import annotations

import pathlib
from dataclasses import dataclass

from .dialog import ParaphraseStore
from .extraction import NameLexicon, PatternSet, RelationLexicon
from .relations import CompositionTable
from .session import Session


@dataclass
class ScenarioRun:
    sessions: list[Session]
    turns: list[tuple[int, str, list[str], str | None]]
    # (session index, user text, replies, question text)

    @property
    def last(self) -> Session:
        return self.sessions[-1]

    def all_system_text(self) -> str:
        parts = []
        for _, _, replies, question in self.turns:
            parts.extend(replies)
            if question:
                parts.append(question)
        return "\n".join(parts)


def load_script(path) -> list[list[str]]:
    """Returns one list of user lines per session in the script."""
    sessions: list[list[str]] = [[]]
    for raw in pathlib.Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("---"):
            sessions.append([])
            continue
        if line.startswith("user:"):
            sessions[-1].append(line[len("user:"):].strip())
        else:
            raise ValueError(f"unrecognized script line: {raw!r}")
    return [s for s in sessions if s]


def run_script(path, table: CompositionTable, names: NameLexicon,
               store: ParaphraseStore | None = None) -> ScenarioRun:
    """Drive each scripted session in order; the paraphrase store is
    shared across them, like a store file shared by a deployment."""
    store = store if store is not None else ParaphraseStore()
    patterns = PatternSet(RelationLexicon.builtin())
    sessions = []
    turns = []
    for idx, lines in enumerate(load_script(path)):
        session = Session(table, patterns, names, store)
        sessions.append(session)
        for line in lines:
            result = session.say(line)
            turns.append((idx, line, result.replies,
                          result.question.text if result.question else None))
    return ScenarioRun(sessions, turns)
