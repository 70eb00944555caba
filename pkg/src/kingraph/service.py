"""HTTP session service: a thin JSON surface over Session objects.

Sessions are kept in memory and persisted to the session directory on
demand; the paraphrase store is shared by every session in the process.
"""

from __future__ import annotations

import pathlib
from dataclasses import dataclass

from fastapi import FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .dialog import ParaphraseStore
from .extraction import NameLexicon, PatternSet, RelationLexicon
from .relations import CompositionTable
from .session import Session

DATA_DIR = pathlib.Path(__file__).parent / "data"
DEFAULT_TABLE = DATA_DIR / "composition_table.txt"
DEFAULT_NAMES = DATA_DIR / "names.csv"


@dataclass
class ServiceConfig:
    table_path: pathlib.Path = DEFAULT_TABLE
    name_lexicon_path: pathlib.Path = DEFAULT_NAMES
    relation_lexicon_path: pathlib.Path | None = None
    paraphrase_path: pathlib.Path | None = None
    session_dir: pathlib.Path = pathlib.Path("sessions")
    static_dir: pathlib.Path | None = None


class Deps:
    def __init__(self, config: ServiceConfig):
        self.config = config
        self.table = CompositionTable.load(config.table_path)
        lexicon = (RelationLexicon.load(config.relation_lexicon_path)
                   if config.relation_lexicon_path else RelationLexicon.builtin())
        self.patterns = PatternSet(lexicon)
        self.names = (NameLexicon.load(config.name_lexicon_path)
                      if config.name_lexicon_path else NameLexicon.empty())
        self.store = ParaphraseStore(config.paraphrase_path)
        self.sessions: dict[str, Session] = {}

    def new_session(self) -> Session:
        session = Session(self.table, self.patterns, self.names, self.store)
        self.sessions[session.sid] = session
        return session

    def get(self, sid: str) -> Session:
        session = self.sessions.get(sid)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown session {sid}")
        return session

    def session_file(self, sid: str) -> pathlib.Path:
        self.config.session_dir.mkdir(parents=True, exist_ok=True)
        return self.config.session_dir / f"{sid}.json"


class SayBody(BaseModel):
    text: str


class SaveBody(BaseModel):
    path: str | None = None


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    deps = Deps(config or ServiceConfig())
    app = FastAPI(title="kingraph")
    app.state.deps = deps

    @app.post("/api/session")
    def create_session():
        session = deps.new_session()
        return {"session_id": session.sid}

    @app.post("/api/session/{sid}/say")
    def say(sid: str, body: SayBody):
        session = deps.get(sid)
        result = session.say(body.text)
        payload = {"replies": result.replies, "graph_version": result.graph_version}
        if result.question is not None:
            payload["question"] = result.question.payload()
        return payload

    @app.get("/api/session/{sid}/graph")
    def graph(sid: str):
        return deps.get(sid).graph_payload()

    @app.get("/api/session/{sid}/relations")
    def relations(sid: str, a: int, b: int):
        session = deps.get(sid)
        try:
            return session.relations_payload(a, b)
        except KeyError:
            raise HTTPException(status_code=400, detail="unknown entity id")

    @app.post("/api/session/{sid}/save")
    def save(sid: str, body: SaveBody | None = None):
        session = deps.get(sid)
        path = pathlib.Path(body.path) if body and body.path else deps.session_file(sid)
        session.save(path)
        return {"ok": True, "path": str(path)}

    @app.post("/api/session/{sid}/load")
    def load(sid: str, body: SaveBody | None = None):
        path = pathlib.Path(body.path) if body and body.path else deps.session_file(sid)
        if not path.exists():
            raise HTTPException(status_code=404, detail=f"no saved session at {path}")
        session = Session.load(path, deps.table, deps.patterns, deps.names, deps.store)
        session.sid = sid
        deps.sessions[sid] = session
        return {"ok": True, "graph_version": session.world.version}

    static = (config or ServiceConfig()).static_dir
    if static and static.exists():
        app.mount("/", StaticFiles(directory=static, html=True), name="ui")

    return app
