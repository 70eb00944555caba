#!/usr/bin/env python3
"""Drive every scripted scenario and print the resulting graphs."""

import pathlib
import sys

ROOT = pathlib.Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from kingraph.extraction import NameLexicon  # noqa: E402
from kingraph.relations import CompositionTable  # noqa: E402
from kingraph.scenarios import run_script  # noqa: E402

DATA = ROOT / "src" / "kingraph" / "data"


def main() -> int:
    table = CompositionTable.load(DATA / "composition_table.txt")
    names = NameLexicon.load(DATA / "names.csv")
    for script in sorted((ROOT / "scenarios").glob("*.txt")):
        print(f"==== {script.name} ====")
        run = run_script(script, table, names)
        for idx, text, replies, question in run.turns:
            print(f"  [s{idx}] > {text}")
            for reply in replies:
                print(f"        {reply}")
            if question:
                print(f"        ? {question}")
        for i, session in enumerate(run.sessions):
            snap = session.world.snapshot()
            print(f"  -- session {i} graph (version {snap.version})")
            for eid, names_, gender, narrator in snap.entities:
                label = "/".join(names_) if names_ else f"person #{eid}"
                print(f"     [{eid}] {label}{' (you)' if narrator else ''} {gender}")
            for a, b, atoms, ambiguous in snap.edges:
                print(f"     {a} -> {b}: {', '.join(atoms)}{' ?' if ambiguous else ''}")
        print()
    return 0


if __name__ == "__main__":
    sys.exit(main())
