#!/usr/bin/env python3
"""Record real service payloads for the frontend tests.

Drives every scenario script through the HTTP app (in-process test
client) and writes, per user line, the /say response plus the /graph
snapshot that follows it. The frontend suite replays these fixtures
through a faked fetch, so what the UI renders in tests is byte-for-byte
what the service produces.
"""

import json
import pathlib
import sys

ROOT = pathlib.Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from fastapi.testclient import TestClient  # noqa: E402

from kingraph.scenarios import load_script  # noqa: E402
from kingraph.service import ServiceConfig, create_app  # noqa: E402

OUT = ROOT / "frontend" / "tests" / "fixtures"


def main() -> int:
    OUT.mkdir(parents=True, exist_ok=True)
    for script in sorted((ROOT / "scenarios").glob("*.txt")):
        app = create_app(ServiceConfig(session_dir=ROOT / "sessions"))
        fixture = {"name": script.stem, "sessions": []}
        with TestClient(app) as client:
            for lines in load_script(script):
                sid = client.post("/api/session").json()["session_id"]
                steps = []
                graph = client.get(f"/api/session/{sid}/graph").json()
                initial = graph
                for line in lines:
                    say = client.post(f"/api/session/{sid}/say",
                                      json={"text": line}).json()
                    graph = client.get(f"/api/session/{sid}/graph").json()
                    steps.append({"text": line, "say": say, "graph": graph})
                fixture["sessions"].append({"initial_graph": initial, "steps": steps})
        out_path = OUT / f"{script.stem}.json"
        out_path.write_text(json.dumps(fixture, indent=1))
        print(f"wrote {out_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
