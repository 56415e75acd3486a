"""Order-N maximum-likelihood model over action sequences.

Counts every window up to length N; contexts truncate at [SOS] (no padding).
Probabilities are pure count ratios — no smoothing, unseen means zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .standardize import SOS, ActionSequence

DEFAULT_ORDER = 4

_KEY_SEP = "␟"  # symbol-for-unit-separator; never appears in action ids


@dataclass
class NGramModel:
    order: int
    context_counts: dict[tuple[str, ...], int] = field(default_factory=dict)
    continuations: dict[tuple[str, ...], dict[str, int]] = field(default_factory=dict)
    vocabulary: set[str] = field(default_factory=set)


def fit_ngram(sequences, order: int = DEFAULT_ORDER) -> NGramModel:
    """Count all context/continuation windows of the bracketed sequences."""
    sequences = list(sequences)
    if not sequences:
        raise ValueError("no sequences to fit")
    if order < 2:
        raise ValueError(f"order must be >= 2, got {order}")
    model = NGramModel(order=order)
    for seq in sequences:
        actions = seq.actions if isinstance(seq, ActionSequence) else list(seq)
        ActionSequence(actions=actions).validate()
        model.vocabulary.update(actions)
        n = len(actions)
        for i in range(1, n):
            nxt = actions[i]
            for length in range(1, min(order - 1, i) + 1):
                ctx = tuple(actions[i - length : i])
                model.context_counts[ctx] = model.context_counts.get(ctx, 0) + 1
                cont = model.continuations.setdefault(ctx, {})
                cont[nxt] = cont.get(nxt, 0) + 1
    return model


def _longest_stored_suffix(model: NGramModel, context) -> tuple[str, ...] | None:
    context = tuple(context)
    for length in range(min(model.order - 1, len(context)), 0, -1):
        suffix = context[-length:]
        if suffix in model.context_counts:
            return suffix
    return None


def ngram_prob(model: NGramModel, context, nxt: str) -> float:
    """C(context + next) / C(context) on the longest stored suffix, else 0."""
    suffix = _longest_stored_suffix(model, context)
    if suffix is None:
        return 0.0
    count = model.continuations[suffix].get(nxt, 0)
    if count == 0:
        return 0.0
    return count / model.context_counts[suffix]


def sequence_prob(model: NGramModel, seq) -> float:
    """Chain-rule product of conditionals, including the [EOS] factor."""
    actions = seq.actions if isinstance(seq, ActionSequence) else list(seq)
    ActionSequence(actions=actions).validate()
    prob = 1.0
    for i in range(1, len(actions)):
        p = ngram_prob(model, actions[:i], actions[i])
        if p == 0.0:
            return 0.0
        prob *= p
    return prob


def save_ngram(model: NGramModel, path) -> None:
    doc = {
        "order": model.order,
        "vocabulary": sorted(model.vocabulary),
        "counts": {
            _KEY_SEP.join(ctx): dict(sorted(cont.items()))
            for ctx, cont in sorted(model.continuations.items())
        },
    }
    Path(path).write_text(
        json.dumps(doc, ensure_ascii=False, sort_keys=True, indent=1) + "\n",
        encoding="utf-8",
    )


def load_ngram(path) -> NGramModel:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    model = NGramModel(order=doc["order"], vocabulary=set(doc["vocabulary"]))
    for key, cont in doc["counts"].items():
        ctx = tuple(key.split(_KEY_SEP))
        model.continuations[ctx] = dict(cont)
        model.context_counts[ctx] = sum(cont.values())
    return model
