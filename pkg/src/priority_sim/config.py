"""Run configuration: poset, stage budget, requirement roster and flags."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .functionals import LIBRARY, ORACLE_FUNCTION, ORACLE_GRAPH, ORACLE_MAP, PLAIN_GRAPH, ScriptError, make_script
from .poset import PosetError, PosetSpec

SCRIPT_KIND = {"N": ORACLE_FUNCTION, "S": PLAIN_GRAPH, "T": ORACLE_GRAPH, "R": ORACLE_MAP}


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = errors


@dataclass(frozen=True)
class Requirement:
    kind: str
    e: int
    element: str | None
    script: str
    params: dict = field(default_factory=dict, hash=False, compare=False)

    @property
    def label(self) -> str:
        if self.kind == "S":
            return f"S({self.e})"
        return f"{self.kind}({self.e},{self.element})"

    def to_json(self) -> dict:
        out = {"req": self.kind, "e": self.e, "script": {"name": self.script, "params": dict(self.params)}}
        if self.element is not None:
            out["p"] = self.element
        return out

    @classmethod
    def from_json(cls, data: dict) -> "Requirement":
        script = data.get("script") or {"name": "never"}
        return cls(data.get("req", "?"), int(data.get("e", 0)), data.get("p"),
                   script.get("name", "never"), dict(script.get("params") or {}))


@dataclass
class RunConfig:
    poset: PosetSpec
    stages: int
    roster: list[Requirement]
    assignment: list[int] | None = None
    strict: bool = False
    disable_use_lifting: bool = False
    name: str = "custom"

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "poset": self.poset.to_json(),
            "stages": self.stages,
            "roster": [r.to_json() for r in self.roster],
            "assignment": None if self.assignment is None else list(self.assignment),
            "strict": self.strict,
            "disable_use_lifting": self.disable_use_lifting,
        }

    @classmethod
    def from_json(cls, data: dict) -> "RunConfig":
        errors = []
        try:
            poset = PosetSpec.from_json(data.get("poset") or {"elements": []})
        except (PosetError, KeyError, TypeError) as exc:
            raise ConfigError([f"poset: {exc}"]) from None
        roster = []
        for k, item in enumerate(data.get("roster") or []):
            if not isinstance(item, dict):
                errors.append(f"roster[{k}]: expected an object")
                continue
            roster.append(Requirement.from_json(item))
        stages = data.get("stages", 0)
        if not isinstance(stages, int):
            errors.append("stages must be an integer")
            stages = 0
        if errors:
            raise ConfigError(errors)
        cfg = cls(poset, stages, roster, data.get("assignment"), bool(data.get("strict", False)),
                  bool(data.get("disable_use_lifting", False)), data.get("name", "custom"))
        cfg.check()
        return cfg

    def validate(self) -> list[str]:
        errors = []
        if self.stages < 0:
            errors.append("stages must be >= 0")
        for k, r in enumerate(self.roster):
            where = f"roster[{k}] {r.label}"
            if r.kind not in SCRIPT_KIND:
                errors.append(f"{where}: unknown requirement type {r.kind!r}")
                continue
            if r.e < 0:
                errors.append(f"{where}: index must be >= 0")
            if r.kind == "S":
                if r.element is not None:
                    errors.append(f"{where}: S takes no poset element")
            elif r.element not in self.poset.elements:
                errors.append(f"{where}: unknown poset element {r.element!r}")
            elif r.kind == "T" and r.element not in self.poset.partition0:
                errors.append(f"{where}: T must bind an element of partition0")
            elif r.kind == "R" and r.element not in self.poset.partition1:
                errors.append(f"{where}: R must bind an element of partition1")
            if r.script not in LIBRARY:
                errors.append(f"{where}: unknown script {r.script!r}")
            else:
                try:
                    make_script(r.script, SCRIPT_KIND[r.kind], r.params)
                except ScriptError as exc:
                    errors.append(f"{where}: {exc}")
        if self.assignment is not None:
            for k, a in enumerate(self.assignment):
                if not isinstance(a, int) or not 0 <= a < len(self.roster):
                    errors.append(f"assignment[{k}]: {a!r} is not a roster index")
        return errors

    def check(self) -> None:
        errors = self.validate()
        if errors:
            raise ConfigError(errors)


def load_config(path: str | Path) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}: malformed JSON ({exc.msg})"]) from None
    return RunConfig.from_json(data)
