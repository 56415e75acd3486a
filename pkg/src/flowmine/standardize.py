"""Map raw utterances to dialogue actions: BM25 recall then cosine rerank.

Every clustered member utterance is indexed; a query recalls the top-k
members with BM25, the candidates are reranked by cosine similarity of
TF-IDF embeddings, and the winner's owning action labels the query. Scores
below the reject threshold produce an Unknown label.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .actions import Vectorizer, embed, fit_vectorizer
from .corpus import tokenize

SOS = "[SOS]"
EOS = "[EOS]"

BM25_K1 = 1.2
BM25_B = 0.75
DEFAULT_RECALL_K = 20
DEFAULT_THRESHOLD = 0.5


class IndexError_(ValueError):
    pass


@dataclass
class RetrievalIndex:
    postings: dict[str, list[tuple[str, int]]]
    doc_lengths: dict[str, int]
    avg_doc_length: float
    doc_count: int
    owner: dict[str, str]
    texts: dict[str, str]
    vectorizer: Vectorizer


@dataclass
class ActionLabel:
    action_id: str | None  # None means Unknown
    score: float
    evidence_id: str | None = None

    @property
    def unknown(self) -> bool:
        return self.action_id is None


@dataclass
class ActionSequence:
    actions: list[str]  # bracketed by [SOS] ... [EOS]
    source_dialogue: str | None = None

    def interior(self) -> list[str]:
        return self.actions[1:-1]

    def validate(self) -> None:
        if len(self.actions) < 2 or self.actions[0] != SOS or self.actions[-1] != EOS:
            raise ValueError(f"sequence not bracketed by {SOS}/{EOS}: {self.actions}")
        if SOS in self.actions[1:] or EOS in self.actions[:-1]:
            raise ValueError(f"interior {SOS}/{EOS} in sequence: {self.actions}")


def build_bm25_index(actions, utterances_by_id, vectorizer: Vectorizer | None = None) -> RetrievalIndex:
    """Index all member utterances of all actions.

    `utterances_by_id` maps utterance id -> text (or objects with a .text).
    The vectorizer backs the rerank stage; when omitted it is fitted over the
    indexed member texts.
    """
    postings: dict[str, list[tuple[str, int]]] = {}
    doc_lengths: dict[str, int] = {}
    owner: dict[str, str] = {}
    texts: dict[str, str] = {}
    for action in actions:
        for uid in sorted(action.member_ids):
            if uid not in utterances_by_id:
                raise IndexError_(f"member utterance {uid!r} of {action.id} not in corpus")
            obj = utterances_by_id[uid]
            text = obj if isinstance(obj, str) else obj.text
            toks = tokenize(text)
            owner[uid] = action.id
            texts[uid] = text
            doc_lengths[uid] = len(toks)
            for tok, tf in sorted(Counter(toks).items()):
                postings.setdefault(tok, []).append((uid, tf))
    doc_count = len(doc_lengths)
    avg = (sum(doc_lengths.values()) / doc_count) if doc_count else 0.0
    if vectorizer is None:
        vectorizer = fit_vectorizer([texts[uid] for uid in sorted(texts)])
    return RetrievalIndex(
        postings=postings,
        doc_lengths=doc_lengths,
        avg_doc_length=avg,
        doc_count=doc_count,
        owner=owner,
        texts=texts,
        vectorizer=vectorizer,
    )


def bm25_recall(index: RetrievalIndex, query: str, k: int = DEFAULT_RECALL_K):
    """Top-k utterances by BM25 (k1=1.2, b=0.75), descending score.

    idf(t) = ln(1 + (D - df + 0.5)/(df + 0.5)); ties break on smaller id.
    """
    scores: dict[str, float] = {}
    d = index.doc_count
    for tok, qtf in Counter(tokenize(query)).items():
        plist = index.postings.get(tok)
        if not plist:
            continue
        df = len(plist)
        idf = math.log(1.0 + (d - df + 0.5) / (df + 0.5))
        for uid, tf in plist:
            dl = index.doc_lengths[uid]
            denom = tf + BM25_K1 * (1.0 - BM25_B + BM25_B * dl / index.avg_doc_length)
            scores[uid] = scores.get(uid, 0.0) + idf * tf * (BM25_K1 + 1.0) / denom
    ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked[:k]


def similarity(vectorizer: Vectorizer, x: str, y: str) -> float:
    """Cosine similarity of TF-IDF embeddings; symmetric, in [0, 1]."""
    s = float(np.dot(embed(vectorizer, x), embed(vectorizer, y)))
    return min(max(s, 0.0), 1.0)


def standardize_utterance(
    index: RetrievalIndex,
    text: str,
    recall_k: int = DEFAULT_RECALL_K,
    threshold: float = DEFAULT_THRESHOLD,
) -> ActionLabel:
    """Recall, rerank, and label; below-threshold or empty recall -> Unknown."""
    recalled = bm25_recall(index, text, recall_k)
    if not recalled:
        return ActionLabel(action_id=None, score=0.0)
    best_uid = None
    best_sim = -1.0
    for uid, _ in recalled:
        sim = similarity(index.vectorizer, text, index.texts[uid])
        if sim > best_sim or (sim == best_sim and (best_uid is None or uid < best_uid)):
            best_uid = uid
            best_sim = sim
    if best_sim < threshold:
        return ActionLabel(action_id=None, score=best_sim)
    return ActionLabel(action_id=index.owner[best_uid], score=best_sim, evidence_id=best_uid)


def standardize_dialogue(
    index: RetrievalIndex,
    dialogue,
    recall_k: int = DEFAULT_RECALL_K,
    threshold: float = DEFAULT_THRESHOLD,
) -> ActionSequence:
    """Per-utterance labels in turn order; Unknown labels are dropped."""
    ids = []
    for u in dialogue.utterances:
        label = standardize_utterance(index, u.text, recall_k, threshold)
        if not label.unknown:
            ids.append(label.action_id)
    return ActionSequence(actions=[SOS, *ids, EOS], source_dialogue=dialogue.id)


def save_sequences(sequences, path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for s in sequences:
            fh.write(
                json.dumps(
                    {"dialogue_id": s.source_dialogue, "actions": s.actions},
                    ensure_ascii=False,
                    sort_keys=True,
                )
            )
            fh.write("\n")


def load_sequences(path) -> list[ActionSequence]:
    out = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            seq = ActionSequence(actions=rec["actions"], source_dialogue=rec.get("dialogue_id"))
            seq.validate()
            out.append(seq)
    return out
