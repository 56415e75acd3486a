"""Parameter value extraction: pattern-based span finding plus rule-based
normalization to typed values (string / integer / epoch-seconds timestamp).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

PARAM_TYPES = ("string", "integer", "timestamp")


class ExtractionError(ValueError):
    pass


@dataclass
class ParamDef:
    name: str
    type: str
    patterns: list[tuple[str, str, int]] = field(default_factory=list)
    # each pattern: (pattern name, regex source, capture group index)

    def __post_init__(self):
        if self.type not in PARAM_TYPES:
            raise ExtractionError(f"unknown param type {self.type!r}")
        if not self.patterns:
            raise ExtractionError(f"param {self.name!r} has no patterns")
        self._compiled = [
            (name, re.compile(src, re.IGNORECASE), group)
            for name, src, group in self.patterns
        ]


@dataclass
class Mention:
    param: str
    surface: str
    span: tuple[int, int]


@dataclass
class ParamValue:
    param: str
    value: object


def extract_params(text: str, defs) -> list[Mention]:
    """First matching pattern per def, leftmost match, non-overlapping."""
    mentions: list[Mention] = []
    taken: list[tuple[int, int]] = []
    for d in defs:
        for _, rx, group in d._compiled:
            found = None
            for m in rx.finditer(text):
                span = m.span(group)
                if any(span[0] < e and s < span[1] for s, e in taken):
                    continue
                found = (m.group(group), span)
                break
            if found:
                mentions.append(Mention(param=d.name, surface=found[0], span=found[1]))
                taken.append(found[1])
                break
    mentions.sort(key=lambda m: m.span)
    return mentions


_REL_TIME = re.compile(r"(\d+)\s*(minute|min|hour|hr)s?\s+ago", re.IGNORECASE)
_UNIT_SECONDS = {"minute": 60, "min": 60, "hour": 3600, "hr": 3600}


def normalize_mention(m: Mention, d: ParamDef, now: float) -> ParamValue:
    """Rewrite a mention into a standardized typed value."""
    surface = m.surface.strip()
    if d.type == "string":
        return ParamValue(param=m.param, value=surface)
    if d.type == "integer":
        if not re.fullmatch(r"[+-]?\d+", surface):
            raise ExtractionError(f"cannot parse integer from {surface!r}")
        return ParamValue(param=m.param, value=int(surface))
    rel = _REL_TIME.fullmatch(surface)
    if rel:
        amount = int(rel.group(1))
        unit = rel.group(2).lower()
        return ParamValue(param=m.param, value=int(now) - _UNIT_SECONDS[unit] * amount)
    if re.fullmatch(r"\d+", surface):  # already epoch seconds
        return ParamValue(param=m.param, value=int(surface))
    raise ExtractionError(f"cannot parse timestamp from {surface!r}")


def default_param_defs() -> list[ParamDef]:
    return [
        ParamDef(
            name="user_id",
            type="integer",
            patterns=[
                ("labelled", r"(?:user\s*id|account|id)\D{0,5}(\d{3,})", 1),
                ("bare-digits", r"\b(\d{5,})\b", 1),
            ],
        ),
        ParamDef(
            name="time",
            type="timestamp",
            patterns=[("relative", r"(\d+\s*(?:minute|min|hour|hr)s?\s+ago)", 1)],
        ),
    ]


def param_defs_from_json(raw) -> list[ParamDef]:
    return [
        ParamDef(
            name=r["name"],
            type=r["type"],
            patterns=[(p["name"], p["regex"], p.get("group", 0)) for p in r["patterns"]],
        )
        for r in raw
    ]


def param_defs_to_json(defs) -> list[dict]:
    return [
        {
            "name": d.name,
            "type": d.type,
            "patterns": [{"name": n, "regex": s, "group": g} for n, s, g in d.patterns],
        }
        for d in defs
    ]
