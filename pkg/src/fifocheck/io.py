"""Text formats for systems and traces."""

from __future__ import annotations

import re
from pathlib import Path
from typing import Iterable

from .model import (Action, Internal, System, ValidationError, format_action,
                    parse_action, validate_system)

ANNOTATIONS = {"@live": "live", "@stop": "stop", "@bcast": "bcast"}
_TRANS = re.compile(r"^(\S+)\s*->\s*(\S+)\s*:\s*(.+)$")


def _strip(line: str) -> str:
    return line.split("#", 1)[0].strip()


def parse_system_raw(text: str) -> dict:
    """Parse the system file format into a raw description (see validate_system)."""
    errors: list[str] = []
    raw: dict = {"name": None, "processes": []}
    annotations: dict[str, dict[str, str]] = {}
    cur = None
    for n, line in enumerate(text.splitlines(), 1):
        line = _strip(line)
        if not line:
            continue
        head, _, rest = line.partition(" ")
        rest = rest.strip()
        if head == "system":
            if raw["name"] is not None:
                errors.append(f"line {n}: second system header")
            raw["name"] = rest
        elif head == "reliable":
            names = [x for x in re.split(r"[,\s]+", rest) if x]
            raw.setdefault("reliable", []).extend(names)
        elif head == "process":
            if not rest:
                errors.append(f"line {n}: process without name")
            cur = {"name": rest, "initial": None, "transitions": []}
            raw["processes"].append(cur)
        elif cur is None:
            errors.append(f"line {n}: {line!r} outside a process block")
        elif head == "initial":
            if cur["initial"] is not None:
                errors.append(f"line {n}: second initial state for {cur['name']}")
            cur["initial"] = rest
        elif head == "states":
            cur.setdefault("states", []).extend(rest.split())
        elif head in ANNOTATIONS:
            tags = annotations.setdefault(cur["name"], {})
            for q in rest.split():
                tags[q] = ANNOTATIONS[head]
        else:
            m = _TRANS.match(line)
            if not m:
                errors.append(f"line {n}: cannot parse {line!r}")
                continue
            cur["transitions"].append((m.group(1), m.group(3).strip(), m.group(2)))
    if raw["name"] is None:
        errors.append("missing 'system NAME' header")
    if errors:
        raise ValidationError(errors)
    if annotations:
        raw["annotations"] = annotations
        for p in raw["processes"]:
            p.setdefault("states", [])
            for q in annotations.get(p["name"], {}):
                if q not in p["states"]:
                    p["states"].append(q)
    return raw


def parse_system(text: str) -> System:
    return validate_system(parse_system_raw(text))


def load_system(path: str | Path) -> System:
    return parse_system(Path(path).read_text(encoding="utf-8"))


def dump_system(s: System) -> str:
    lines = [f"system {s.name}"]
    if s.reliable:
        lines.append("reliable " + ", ".join(sorted(s.reliable)))
    for p in s.processes:
        a = s[p]
        lines += ["", f"process {p}", f"initial {a.initial}"]
        used = {a.initial} | {x for x, _, _ in a.transitions} | {y for _, _, y in a.transitions}
        isolated = sorted(a.states - used)
        if isolated:
            lines.append("states " + " ".join(isolated))
        tags = (s.annotations or {}).get(p, {})
        for key, val in ANNOTATIONS.items():
            qs = sorted(q for q, t in tags.items() if t == val)
            if qs:
                lines.append(f"{key} " + " ".join(qs))
        for x, act, y in a.transitions:
            lines.append(f"{x} -> {y} : {format_action(act)}")
    return "\n".join(lines) + "\n"


def save_system(s: System, path: str | Path) -> None:
    Path(path).write_text(dump_system(s), encoding="utf-8")


def parse_trace(text: str) -> list[Action]:
    """One action per line; internal actions are written ``tau tag@process``."""
    out = []
    for n, line in enumerate(text.splitlines(), 1):
        line = _strip(line)
        if not line:
            continue
        try:
            out.append(parse_action(line))
        except ValueError as exc:
            raise ValidationError([f"line {n}: {exc}"]) from None
    return out


def dump_trace(e: Iterable[Action]) -> str:
    return "".join(format_action(a, with_owner=isinstance(a, Internal)) + "\n" for a in e)


def load_trace(path: str | Path) -> list[Action]:
    return parse_trace(Path(path).read_text(encoding="utf-8"))
