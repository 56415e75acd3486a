"""Beam sampling of high-probability action sequences from an n-gram model.

Each step extends every partial sequence with its top-K continuations;
partials reaching [EOS] move to the completed set. Termination comes from
a beam cap, a length cap, a log-probability floor and a completed-set cap.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .ngram import NGramModel, _longest_stored_suffix, ngram_prob
from .standardize import EOS, SOS, ActionSequence


@dataclass
class ScoredSequence:
    actions: list[str]
    log_prob: float

    def to_action_sequence(self) -> ActionSequence:
        return ActionSequence(actions=list(self.actions))


@dataclass
class BeamConfig:
    top_k: int = 5
    beam_cap: int = 200
    max_len: int = 40
    min_log_prob: float = math.log(1e-4)
    max_completed: int = 500

    def __post_init__(self):
        for name in ("top_k", "beam_cap", "max_len", "max_completed"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.min_log_prob > 0:
            raise ValueError("min_log_prob must be <= 0")


def top_k_continuations(model: NGramModel, context, k: int):
    """Top-k continuations of the longest stored suffix, descending prob."""
    suffix = _longest_stored_suffix(model, context)
    if suffix is None:
        return []
    total = model.context_counts[suffix]
    items = sorted(
        model.continuations[suffix].items(), key=lambda kv: (-kv[1], kv[0])
    )
    return [(a, c / total) for a, c in items[:k]]


def sample_sequences(model: NGramModel, cfg: BeamConfig | None = None) -> list[ScoredSequence]:
    """Deterministic modified beam search over the model's transitions."""
    cfg = cfg or BeamConfig()
    beam: list[tuple[list[str], float]] = [([SOS], 0.0)]
    completed: dict[tuple[str, ...], float] = {}
    while beam and len(completed) < cfg.max_completed:
        extended: list[tuple[list[str], float]] = []
        for actions, lp in beam:
            for nxt, p in top_k_continuations(model, actions, cfg.top_k):
                lp2 = lp + math.log(p)
                cand = actions + [nxt]
                if nxt == EOS:
                    completed.setdefault(tuple(cand), lp2)
                    if len(completed) >= cfg.max_completed:
                        break
                elif lp2 >= cfg.min_log_prob and len(cand) <= cfg.max_len:
                    extended.append((cand, lp2))
            else:
                continue
            break
        extended.sort(key=lambda e: (-e[1], e[0]))
        beam = extended[: cfg.beam_cap]
    out = [ScoredSequence(actions=list(seq), log_prob=lp) for seq, lp in completed.items()]
    out.sort(key=lambda s: (-s.log_prob, s.actions))
    return out


def save_samples(samples, path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for s in samples:
            fh.write(
                json.dumps(
                    {"actions": s.actions, "log_prob": s.log_prob},
                    ensure_ascii=False,
                    sort_keys=True,
                )
            )
            fh.write("\n")


def load_samples(path) -> list[ScoredSequence]:
    out = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                out.append(ScoredSequence(actions=rec["actions"], log_prob=rec["log_prob"]))
    return out
