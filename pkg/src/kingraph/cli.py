"""Command-line entry points: repl, serve, derive-table, check-table.

Flags fall back to KINGRAPH_* environment variables where noted.
"""

from __future__ import annotations

import argparse
import os
import pathlib
import sys

from .dialog import ParaphraseStore
from .extraction import NameLexicon, PatternSet, RelationLexicon
from .genealogy import DerivationError, derive_table
from .relations import CompositionTable, TableError, check_axioms
from .service import DEFAULT_NAMES, DEFAULT_TABLE, ServiceConfig, create_app
from .session import Session


def _env(name: str, default):
    return os.environ.get(f"KINGRAPH_{name}", default)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kingraph",
                                     description="family-relation possibility graphs")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--table", default=_env("TABLE", str(DEFAULT_TABLE)),
                        help="composition table file")
    common.add_argument("--name-lexicon", default=_env("NAME_LEXICON", str(DEFAULT_NAMES)))
    common.add_argument("--relation-lexicon", default=_env("RELATION_LEXICON", None))
    common.add_argument("--paraphrases", default=_env("PARAPHRASES", None),
                        help="paraphrase store file (JSONL)")
    common.add_argument("--session-dir", default=_env("SESSION_DIR", "sessions"))

    repl = sub.add_parser("repl", parents=[common], help="interactive dialog loop")
    repl.add_argument("--script", default=None,
                      help="read user lines from a file instead of stdin")

    serve = sub.add_parser("serve", parents=[common], help="run the HTTP session service")
    serve.add_argument("--port", type=int, default=int(_env("PORT", "8000")))
    serve.add_argument("--host", default=_env("HOST", "127.0.0.1"))
    serve.add_argument("--static-dir", default=_env("STATIC_DIR", None),
                       help="directory of built UI assets to serve at /")

    derive = sub.add_parser("derive-table", help="rebuild the composition table")
    derive.add_argument("--budget", type=int, default=4000)
    derive.add_argument("--seed", type=int, default=11)
    derive.add_argument("--confirmation", type=int, default=600)
    derive.add_argument("--out", required=True)

    check = sub.add_parser("check-table", help="validate a composition table file")
    check.add_argument("path")
    return parser


def _config(args) -> ServiceConfig:
    return ServiceConfig(
        table_path=pathlib.Path(args.table),
        name_lexicon_path=pathlib.Path(args.name_lexicon) if args.name_lexicon else None,
        relation_lexicon_path=(pathlib.Path(args.relation_lexicon)
                               if args.relation_lexicon else None),
        paraphrase_path=pathlib.Path(args.paraphrases) if args.paraphrases else None,
        session_dir=pathlib.Path(args.session_dir),
        static_dir=pathlib.Path(args.static_dir) if getattr(args, "static_dir", None) else None,
    )


def run_repl(config: ServiceConfig, stdin=None, stdout=None) -> int:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    try:
        table = CompositionTable.load(config.table_path)
        lexicon = (RelationLexicon.load(config.relation_lexicon_path)
                   if config.relation_lexicon_path else RelationLexicon.builtin())
        names = (NameLexicon.load(config.name_lexicon_path)
                 if config.name_lexicon_path else NameLexicon.empty())
    except (OSError, TableError, ValueError) as exc:
        print(f"startup failure: {exc}", file=sys.stderr)
        return 2
    store = ParaphraseStore(config.paraphrase_path)
    patterns = PatternSet(lexicon)
    session = Session(table, patterns, names, store)

    def out(line=""):
        print(line, file=stdout)

    out("Tell me about your family. Meta: :graph  :ask A B  :save F  :load F  :quit")
    for raw in stdin:
        line = raw.strip()
        if not line:
            continue
        if line == ":quit":
            out("bye")
            return 0
        if line == ":graph":
            _print_graph(session, out)
            continue
        if line.startswith(":ask"):
            _print_ask(session, line, out)
            continue
        if line.startswith(":save"):
            path = line.split(None, 1)[1] if " " in line else f"{session.sid}.json"
            session.save(path)
            out(f"saved to {path}")
            continue
        if line.startswith(":load"):
            path = line.split(None, 1)[1] if " " in line else f"{session.sid}.json"
            session = Session.load(path, table, patterns, names, store)
            out(f"loaded {path}")
            continue
        result = session.say(line)
        for reply in result.replies:
            out(reply)
        if result.question is not None:
            out(result.question.text)
    return 0


def _print_graph(session: Session, out) -> None:
    snap = session.world.snapshot()
    out(f"version {snap.version}")
    for eid, names, gender, narrator in snap.entities:
        tag = " (you)" if narrator else ""
        label = "/".join(names) if names else f"person #{eid}"
        out(f"  [{eid}] {label}{tag} gender={gender}")
    for a, b, atoms, ambiguous in snap.edges:
        mark = " ?" if ambiguous else ""
        out(f"  {a} -> {b}: {', '.join(atoms)}{mark}")


def _print_ask(session: Session, line: str, out) -> None:
    parts = line.split()
    if len(parts) != 3:
        out("usage: :ask <entity> <entity>  (ids or names)")
        return
    w = session.world
    ids = []
    for token in parts[1:]:
        if token.isdigit() and int(token) in w.entities:
            ids.append(int(token))
            continue
        matches = [e.eid for e in w.entities.values()
                   if any(n.lower() == token.lower() for n in e.names)]
        if token.lower() in ("me", "i", "you"):
            matches = [w.narrator_id()]
        if len(matches) != 1:
            out(f"cannot resolve '{token}'")
            return
        ids.append(matches[0])
    payload = session.relations_payload(*ids)
    if payload.get("disjoint"):
        out("no known connection")
    else:
        out(", ".join(payload["atoms"]))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "repl":
        stdin = open(args.script, "r", encoding="utf-8") if args.script else None
        try:
            return run_repl(_config(args), stdin=stdin)
        finally:
            if stdin is not None:
                stdin.close()
    if args.command == "serve":
        import uvicorn
        app = create_app(_config(args))
        uvicorn.run(app, host=args.host, port=args.port)
        return 0
    if args.command == "derive-table":
        try:
            table = derive_table(args.budget, seed=args.seed,
                                 confirmation_rounds=args.confirmation)
        except DerivationError as exc:
            print(f"derivation failed: {exc}", file=sys.stderr)
            return 1
        table.save(args.out)
        print(f"wrote {args.out} (checksum {table.checksum()[:12]})")
        return 0
    if args.command == "check-table":
        try:
            table = CompositionTable.load(args.path)
        except (OSError, TableError) as exc:
            print(f"invalid table: {exc}", file=sys.stderr)
            return 1
        report = check_axioms(table)
        if report.ok:
            print(f"{args.path}: all axioms hold (checksum {table.checksum()[:12]})")
            return 0
        print(report.summary(), file=sys.stderr)
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
