"""Echo-style conformance stub for the external SUT protocol.

Answers uniform confidences for classify requests and a short centered trace
for drive requests. Run with `python -m illumine.stub_sut`. Useful both as a
wiring check and as a template for adapting a real model.
"""
from __future__ import annotations

import json
import sys


def respond(request: dict) -> dict:
    kind = request.get("type")
    if kind == "classify":
        return {"confidences": [0.1] * 10}
    if kind == "drive":
        n = 50
        return {"steering": [0.0] * n, "lateral": [0.0] * n, "dt": 0.1, "completed": True}
    return {"error": f"unknown request type {kind!r}"}


def main() -> int:
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        request = json.loads(line)
        sys.stdout.write(json.dumps(respond(request)) + "\n")
        sys.stdout.flush()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
