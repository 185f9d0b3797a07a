"""Append-only run trace: a header line, then one JSON record per stage."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path


class TraceError(ValueError):
    pass


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


@dataclass
class Trace:
    header: dict = field(default_factory=dict)
    records: list[dict] = field(default_factory=list)

    def lines(self) -> list[str]:
        return [dumps({"header": self.header})] + [dumps(r) for r in self.records]

    def text(self) -> str:
        return "".join(line + "\n" for line in self.lines())

    def digest(self) -> str:
        return hashlib.sha256(self.text().encode("utf-8")).hexdigest()

    def events(self, *types: str):
        """Yield ``(stage, event)`` for every event, optionally filtered by type."""
        for rec in self.records:
            for ev in rec["events"]:
                if not types or ev["type"] in types:
                    yield rec["stage"], ev


class TraceWriter:
    def __init__(self, header: dict):
        self.trace = Trace(dict(header))
        self.pending: list[dict] = []

    def emit(self, type: str, **data) -> None:
        data["type"] = type
        self.pending.append(data)

    def end_stage(self, stage: int, path: list[str], length: int) -> dict:
        if self.trace.records and stage <= self.trace.records[-1]["stage"]:
            raise TraceError(f"stage {stage} is not after {self.trace.records[-1]['stage']}")
        rec = {"stage": stage, "path": list(path), "length": length, "events": self.pending}
        self.pending = []
        self.trace.records.append(rec)
        return rec


def emit_trace(trace: Trace, path: str | Path) -> None:
    Path(path).write_text(trace.text(), encoding="utf-8")


def load_trace(path: str | Path) -> Trace:
    text = Path(path).read_text(encoding="utf-8")
    return parse_trace(text)


def parse_trace(text: str) -> Trace:
    trace = Trace()
    last = None
    for k, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TraceError(f"line {k}: malformed JSON ({exc.msg})") from None
        if not isinstance(obj, dict):
            raise TraceError(f"line {k}: expected an object")
        if "header" in obj:
            if k != 1:
                raise TraceError(f"line {k}: header must be the first line")
            trace.header = obj["header"]
            continue
        if not {"stage", "path", "events"} <= obj.keys():
            raise TraceError(f"line {k}: record lacks stage/path/events")
        if last is not None and obj["stage"] <= last:
            raise TraceError(f"line {k}: stage {obj['stage']} out of order")
        last = obj["stage"]
        trace.records.append(obj)
    return trace
