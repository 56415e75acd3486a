"""Dialogue corpus loading, validation and tokenization.

The on-disk format is UTF-8 line-delimited JSON, one dialogue per line:

    {"id": str, "scenario": str,
     "utterances": [{"id": str, "turn": int, "speaker": "user"|"staff", "text": str}, ...]}
"""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path

USER = "user"
STAFF = "staff"
SPEAKERS = (USER, STAFF)


class CorpusError(ValueError):
    """Raised for malformed dialogue files or invariant violations."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


@dataclass(frozen=True)
class Utterance:
    id: str
    dialogue_id: str
    turn_index: int
    speaker: str
    text: str


@dataclass
class Dialogue:
    id: str
    scenario: str
    utterances: list[Utterance] = field(default_factory=list)

    def texts(self, speaker=None):
        return [u.text for u in self.utterances if speaker is None or u.speaker == speaker]


def _is_cjk(ch: str) -> bool:
    cp = ord(ch)
    return (
        0x4E00 <= cp <= 0x9FFF
        or 0x3400 <= cp <= 0x4DBF
        or 0xF900 <= cp <= 0xFAFF
        or 0x20000 <= cp <= 0x2A6DF
    )


def tokenize(text: str) -> list[str]:
    """Deterministic, script-agnostic tokenization.

    Runs of non-CJK word characters become lowercased word tokens; runs of
    CJK characters become overlapping character bigrams (a lone CJK character
    stands as its own token). Punctuation and whitespace are dropped.
    """
    tokens: list[str] = []
    word: list[str] = []
    cjk: list[str] = []

    def flush_word():
        if word:
            tokens.append("".join(word).lower())
            word.clear()

    def flush_cjk():
        if len(cjk) == 1:
            tokens.append(cjk[0])
        elif cjk:
            tokens.extend(cjk[i] + cjk[i + 1] for i in range(len(cjk) - 1))
        cjk.clear()

    for ch in text:
        if _is_cjk(ch):
            flush_word()
            cjk.append(ch)
        elif ch.isalnum() and not unicodedata.category(ch).startswith("P"):
            flush_cjk()
            word.append(ch)
        else:
            flush_word()
            flush_cjk()
    flush_word()
    flush_cjk()
    return tokens


def _parse_dialogue(record: dict, line: int, seen_ids: set[str]) -> Dialogue:
    for key in ("id", "scenario", "utterances"):
        if key not in record:
            raise CorpusError(f"dialogue record missing field {key!r}", line)
    utts = []
    for i, raw in enumerate(record["utterances"]):
        for key in ("id", "turn", "speaker", "text"):
            if key not in raw:
                raise CorpusError(f"utterance {i} missing field {key!r}", line)
        if raw["speaker"] not in SPEAKERS:
            raise CorpusError(f"utterance {raw['id']!r} has bad speaker {raw['speaker']!r}", line)
        if not str(raw["text"]).strip():
            raise CorpusError(f"utterance {raw['id']!r} has empty text", line)
        if raw["id"] in seen_ids:
            raise CorpusError(f"duplicate utterance id {raw['id']!r}", line)
        if raw["turn"] != i:
            raise CorpusError(
                f"utterance {raw['id']!r} has turn {raw['turn']}, expected {i}", line
            )
        seen_ids.add(raw["id"])
        utts.append(
            Utterance(
                id=raw["id"],
                dialogue_id=record["id"],
                turn_index=raw["turn"],
                speaker=raw["speaker"],
                text=raw["text"],
            )
        )
    if len(utts) < 2:
        raise CorpusError(f"dialogue {record['id']!r} has fewer than 2 utterances", line)
    return Dialogue(id=record["id"], scenario=record["scenario"], utterances=utts)


def load_dialogues(path) -> list[Dialogue]:
    """Load and validate a line-delimited dialogue file."""
    path = Path(path)
    dialogues = []
    seen_ids: set[str] = set()
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"invalid JSON: {exc.msg}", line_no) from exc
            dialogues.append(_parse_dialogue(record, line_no, seen_ids))
    return dialogues


def dialogue_to_record(d: Dialogue) -> dict:
    return {
        "id": d.id,
        "scenario": d.scenario,
        "utterances": [
            {"id": u.id, "turn": u.turn_index, "speaker": u.speaker, "text": u.text}
            for u in d.utterances
        ],
    }


def save_dialogues(dialogues, path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for d in dialogues:
            fh.write(json.dumps(dialogue_to_record(d), ensure_ascii=False, sort_keys=True))
            fh.write("\n")


def utterance_lookup(dialogues) -> dict[str, Utterance]:
    """Index utterances by id across a corpus."""
    return {u.id: u for d in dialogues for u in d.utterances}
