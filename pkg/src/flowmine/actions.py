"""Dialogue action construction: TF-IDF features, k-means, manifest edits.

Utterances of one speaker role are embedded with a TF-IDF vectorizer,
grouped with seeded k-means, and each cluster becomes a DialogueAction whose
canonical utterance is the cluster medoid. A JSON edit manifest captures the
light manual curation pass (rename / merge / delete / move).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import tokenize

ROLES = ("user", "staff")


class ActionError(ValueError):
    pass


@dataclass
class Vectorizer:
    vocabulary: dict[str, int]
    idf: np.ndarray

    @property
    def dimension(self) -> int:
        return len(self.vocabulary)


def fit_vectorizer(texts) -> Vectorizer:
    """Fit TF-IDF weights: idf(t) = ln((1+D)/(1+df(t))) + 1."""
    texts = list(texts)
    if not texts:
        raise ActionError("cannot fit a vectorizer on an empty text list")
    df: dict[str, int] = {}
    any_tokens = False
    for text in texts:
        toks = set(tokenize(text))
        any_tokens = any_tokens or bool(toks)
        for t in toks:
            df[t] = df.get(t, 0) + 1
    if not any_tokens:
        raise ActionError("all texts tokenize to empty")
    vocab = {t: i for i, t in enumerate(sorted(df))}
    n = len(texts)
    idf = np.zeros(len(vocab))
    for t, i in vocab.items():
        idf[i] = math.log((1 + n) / (1 + df[t])) + 1.0
    return Vectorizer(vocabulary=vocab, idf=idf)


def embed(v: Vectorizer, text: str) -> np.ndarray:
    """L2-normalized TF-IDF vector; all-zero when no token is in vocabulary."""
    vec = np.zeros(v.dimension)
    for tok in tokenize(text):
        i = v.vocabulary.get(tok)
        if i is not None:
            vec[i] += v.idf[i]
    norm = np.linalg.norm(vec)
    if norm > 0:
        vec /= norm
    return vec


def embed_all(v: Vectorizer, texts) -> np.ndarray:
    """Row-stacked embed() over many texts (same values, batch allocation)."""
    out = np.zeros((len(texts), v.dimension))
    for r, text in enumerate(texts):
        for tok in tokenize(text):
            i = v.vocabulary.get(tok)
            if i is not None:
                out[r, i] += v.idf[i]
    norms = np.linalg.norm(out, axis=1, keepdims=True)
    np.divide(out, norms, out=out, where=norms > 0)
    return out


@dataclass
class Clustering:
    k: int
    assignments: np.ndarray
    centroids: np.ndarray
    sse: float
    sse_history: list[float] = field(default_factory=list)


def _sq_dists(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    # (n, k) squared euclidean distances, computed stably enough for argmin
    d = (
        np.sum(x * x, axis=1, keepdims=True)
        - 2.0 * x @ centroids.T
        + np.sum(centroids * centroids, axis=1)
    )
    np.maximum(d, 0.0, out=d)
    return d


def _plusplus_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    first = int(rng.integers(n))
    centers[0] = x[first]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[j] = x[idx]
        d2 = np.minimum(d2, np.sum((x - centers[j]) ** 2, axis=1))
    return centers


def kmeans_cluster(vectors, k: int, seed: int, max_iter: int = 100) -> Clustering:
    """Seeded k-means++ with Lloyd iterations.

    Deterministic given (vectors, k, seed). Empty clusters are reseeded with
    the point farthest from the cluster's previous centroid. SSE is
    non-increasing across iterations (asserted).
    """
    x = np.asarray(vectors, dtype=float)
    if x.ndim != 2:
        x = np.atleast_2d(x)
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ActionError(f"k={k} out of range for {n} vectors")
    rng = np.random.default_rng(seed)
    centroids = _plusplus_init(x, k, rng)
    assignments = np.full(n, -1)
    history: list[float] = []
    for _ in range(max_iter):
        d = _sq_dists(x, centroids)
        new_assign = np.argmin(d, axis=1)
        sse = float(d[np.arange(n), new_assign].sum())
        if history:
            assert sse <= history[-1] + 1e-9, "SSE increased during Lloyd iteration"
        history.append(sse)
        if np.array_equal(new_assign, assignments):
            break
        assignments = new_assign
        for j in range(k):
            members = x[assignments == j]
            if len(members):
                centroids[j] = members.mean(axis=0)
            else:
                far = int(np.argmax(np.sum((x - centroids[j]) ** 2, axis=1)))
                centroids[j] = x[far]
    d = _sq_dists(x, centroids)
    assignments = np.argmin(d, axis=1)
    sse = float(d[np.arange(n), assignments].sum())
    return Clustering(k=k, assignments=assignments, centroids=centroids, sse=sse,
                      sse_history=history)


@dataclass
class DialogueAction:
    id: str
    role: str
    name: str
    member_ids: set[str]
    canonical_id: str


def _medoid_id(member_ids, vectors_by_id) -> str:
    """Member maximizing summed cosine similarity; ties break on smaller id."""
    ids = sorted(member_ids)
    if len(ids) == 1:
        return ids[0]
    mat = np.stack([vectors_by_id[i] for i in ids])
    sims = mat @ mat.T
    totals = sims.sum(axis=1) - np.diag(sims)
    cutoff = totals.max() - 1e-12
    for j, uid in enumerate(ids):  # ids sorted, first qualifying wins the tie
        if totals[j] >= cutoff:
            return uid
    return ids[0]


def build_actions(dialogues, role: str, k: int, seed: int,
                  vectorizer: Vectorizer | None = None):
    """Cluster one role's utterances into DialogueActions.

    Returns (actions, vectorizer). Ids are assigned "<role>_%03d" in
    descending cluster-size order; canonical_id is the cluster medoid.
    """
    if role not in ROLES:
        raise ActionError(f"unknown role {role!r}")
    utts = [u for d in dialogues for u in d.utterances if u.speaker == role]
    if len(utts) < k:
        raise ActionError(f"only {len(utts)} {role} utterances for k={k}")
    if vectorizer is None:
        vectorizer = fit_vectorizer([u.text for u in utts])
    vectors = embed_all(vectorizer, [u.text for u in utts])
    clustering = kmeans_cluster(vectors, k, seed)
    vec_by_id = {u.id: vectors[i] for i, u in enumerate(utts)}
    groups: dict[int, list[str]] = {}
    for u, c in zip(utts, clustering.assignments):
        groups.setdefault(int(c), []).append(u.id)
    ordered = sorted(groups.values(), key=lambda ids: (-len(ids), min(ids)))
    text_by_id = {u.id: u.text for u in utts}
    actions = []
    for i, member_ids in enumerate(ordered):
        canonical = _medoid_id(member_ids, vec_by_id)
        actions.append(
            DialogueAction(
                id=f"{role}_{i:03d}",
                role=role,
                name=_short_name(text_by_id[canonical]),
                member_ids=set(member_ids),
                canonical_id=canonical,
            )
        )
    return actions, vectorizer


def _short_name(text: str, limit: int = 40) -> str:
    text = " ".join(text.split())
    return text if len(text) <= limit else text[: limit - 1] + "…"


def apply_manifest(actions, manifest, texts, vectorizer):
    """Apply a curation manifest (rename/merge/delete/move) to an action set.

    `texts` maps utterance id -> text, used to recompute medoids of touched
    actions. An action emptied by moves is removed so the invariants hold.
    """
    by_id = {a.id: DialogueAction(a.id, a.role, a.name, set(a.member_ids), a.canonical_id)
             for a in actions}
    touched: set[str] = set()
    for i, cmd in enumerate(manifest):
        op = cmd.get("op")
        if op == "rename":
            a = _require(by_id, cmd.get("id"), i)
            a.name = cmd["name"]
        elif op == "merge":
            a = _require(by_id, cmd.get("into"), i)
            b = _require(by_id, cmd.get("from"), i)
            if a.role != b.role:
                raise ActionError(f"manifest command {i}: cannot merge across roles")
            if a.id == b.id:
                raise ActionError(f"manifest command {i}: merge of an action with itself")
            a.member_ids |= b.member_ids
            del by_id[b.id]
            touched.add(a.id)
        elif op == "delete":
            a = _require(by_id, cmd.get("id"), i)
            del by_id[a.id]
        elif op == "move":
            src = _require(by_id, cmd.get("from"), i)
            dst = _require(by_id, cmd.get("to"), i)
            uid = cmd.get("utterance")
            if uid not in src.member_ids:
                raise ActionError(f"manifest command {i}: utterance {uid!r} not in {src.id}")
            if src.role != dst.role:
                raise ActionError(f"manifest command {i}: cannot move across roles")
            src.member_ids.discard(uid)
            dst.member_ids.add(uid)
            touched.update((src.id, dst.id))
            if not src.member_ids:
                del by_id[src.id]
                touched.discard(src.id)
        else:
            raise ActionError(f"manifest command {i}: unknown op {op!r}")
    for aid in touched:
        a = by_id[aid]
        vec_by_id = {uid: embed(vectorizer, texts[uid]) for uid in a.member_ids}
        a.canonical_id = _medoid_id(a.member_ids, vec_by_id)
    return list(by_id.values())


def _require(by_id, aid, i) -> DialogueAction:
    if aid not in by_id:
        raise ActionError(f"manifest command {i}: unknown action id {aid!r}")
    return by_id[aid]


def save_actions(actions, path) -> None:
    records = [
        {
            "id": a.id,
            "role": a.role,
            "name": a.name,
            "canonical_id": a.canonical_id,
            "member_ids": sorted(a.member_ids),
        }
        for a in actions
    ]
    Path(path).write_text(
        json.dumps(records, ensure_ascii=False, sort_keys=True, indent=1) + "\n",
        encoding="utf-8",
    )


def load_actions(path):
    records = json.loads(Path(path).read_text(encoding="utf-8"))
    return [
        DialogueAction(
            id=r["id"],
            role=r["role"],
            name=r["name"],
            member_ids=set(r["member_ids"]),
            canonical_id=r["canonical_id"],
        )
        for r in records
    ]
