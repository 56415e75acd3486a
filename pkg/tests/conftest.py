import math
import os
import random
import sys
from fractions import Fraction

import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from flowmine.actions import DialogueAction
from flowmine.corpus import save_dialogues, utterance_lookup
from flowmine.harness import PipelineConfig, run_pipeline
from flowmine.ngram import fit_ngram
from flowmine.sampler import BeamConfig
from flowmine.standardize import EOS, SOS
from flowmine.synth import make_corpus

TOY_SEQUENCES = [
    [SOS, "A", "B", EOS],
    [SOS, "A", "B", EOS],
    [SOS, "A", "C", EOS],
]


@pytest.fixture
def toy_model():
    return fit_ngram(TOY_SEQUENCES, order=2)


# ---------------------------------------------------------------------------
# independent oracles, shared between module tests and the acceptance suite

def window_count(sequences, window) -> int:
    """Count occurrences of `window` as a contiguous subsequence."""
    window = tuple(window)
    total = 0
    for seq in sequences:
        for i in range(len(seq) - len(window) + 1):
            if tuple(seq[i : i + len(window)]) == window:
                total += 1
    return total


def oracle_ngram_prob(sequences, order, context, nxt):
    """Longest-suffix count ratio, computed by brute subsequence scanning."""
    context = tuple(context)
    for length in range(min(order - 1, len(context)), 0, -1):
        suffix = context[-length:]
        denom = window_count(sequences, suffix)
        # a suffix only counts as a context when it is followed by something,
        # which for EOS-free windows equals its plain occurrence count
        if denom and EOS not in suffix:
            return Fraction(window_count(sequences, suffix + (nxt,)), denom)
        if denom:
            # windows ending in EOS never continue
            return Fraction(0)
    return Fraction(0)


def oracle_sequence_prob(sequences, order, seq):
    prob = Fraction(1)
    for i in range(1, len(seq)):
        p = oracle_ngram_prob(sequences, order, seq[:i], seq[i])
        if p == 0:
            return Fraction(0)
        prob *= p
    return prob


def enumerate_positive_sequences(model, max_len=60):
    """Depth-first enumeration of every positive-probability sequence."""
    from flowmine.ngram import ngram_prob

    vocab = sorted(model.vocabulary)
    out = {}

    def rec(seq, log_p):
        if len(seq) > max_len:
            raise AssertionError("enumeration exceeded the length bound")
        for a in vocab:
            p = ngram_prob(model, seq, a)
            if p == 0.0:
                continue
            nxt = seq + [a]
            if a == EOS:
                out[tuple(nxt)] = log_p + math.log(p)
            else:
                rec(nxt, log_p + math.log(p))

    rec([SOS], 0.0)
    return out


def oracle_bm25(docs, query_tokens, k1=1.2, b=0.75):
    """Straight-from-formula BM25 over a {doc_id: token list} mapping."""
    n = len(docs)
    avgdl = sum(len(t) for t in docs.values()) / n
    scores = {}
    for did, toks in docs.items():
        score = 0.0
        for term in set(query_tokens):
            tf = toks.count(term)
            if tf == 0:
                continue
            df = sum(1 for t in docs.values() if term in t)
            idf = math.log(1 + (n - df + 0.5) / (df + 0.5))
            score += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len(toks) / avgdl))
        if score != 0.0:
            scores[did] = score
    return scores


# ---------------------------------------------------------------------------
# synthetic fixtures

def fake_action(action_id: str) -> DialogueAction:
    return DialogueAction(
        id=action_id,
        role="user" if action_id.startswith("user") else "staff",
        name=action_id,
        member_ids={f"{action_id}_m"},
        canonical_id=f"{action_id}_m",
    )


def fake_action_store(action_ids):
    actions = {aid: fake_action(aid) for aid in action_ids}
    texts = {f"{aid}_m": f"canonical text {aid}" for aid in action_ids}
    return actions, texts


def random_sequences(rng: random.Random, n_actions=6, n_sequences=5, max_interior=5,
                     alternating=False):
    if alternating:
        ids = [f"user_{i:03d}" for i in range(n_actions)] + [
            f"staff_{i:03d}" for i in range(n_actions)
        ]
    else:
        ids = [chr(ord("A") + i) for i in range(n_actions)]
    seqs = []
    for _ in range(n_sequences):
        length = rng.randint(1, max_interior)
        if alternating:
            interior = []
            for t in range(length):
                pool = ids[:n_actions] if t % 2 == 0 else ids[n_actions:]
                interior.append(rng.choice(pool))
        else:
            interior = [rng.choice(ids) for _ in range(length)]
        seqs.append([SOS, *interior, EOS])
    return seqs


@pytest.fixture(scope="session")
def mini_pipeline(tmp_path_factory):
    """A small end-to-end pipeline run shared by engine/harness/service tests."""
    tmp = tmp_path_factory.mktemp("mini")
    dialogues = make_corpus(5, 5, 40, seed=7)
    corpus_path = tmp / "corpus.jsonl"
    save_dialogues(dialogues, corpus_path)
    config = PipelineConfig(
        corpus_path=str(corpus_path),
        out_dir=str(tmp / "artifacts"),
        clusters_user=5,
        clusters_staff=5,
        order=3,
        beam=BeamConfig(top_k=5, beam_cap=200, max_completed=200),
        seed=7,
    )
    result = run_pipeline(config, dialogues)
    utts = utterance_lookup(dialogues)
    return {
        "dialogues": dialogues,
        "config": config,
        "result": result,
        "utts": utts,
        "texts": {uid: u.text for uid, u in utts.items()},
        "actions_by_id": {a.id: a for a in result.actions},
        "corpus_path": str(corpus_path),
    }


def build_fig5():
    """A Check_Status-style flow: user asks, API decides the staff branch."""
    from flowmine.actions import DialogueAction
    from flowmine.ngram import fit_ngram
    from flowmine.sampler import BeamConfig, sample_sequences
    from flowmine.standardize import build_bm25_index
    from flowmine.taskflow import ApiSpec, Predicate, build_taskflow, insert_api_node

    texts = {
        "u1": "please lock the bike my user id is 12345",
        "s2": "bike locked successfully fee waived",
        "s3": "cannot lock the bike please check again",
    }
    actions = [
        DialogueAction("user_000", "user", "lock request", {"u1"}, "u1"),
        DialogueAction("staff_000", "staff", "locked", {"s2"}, "s2"),
        DialogueAction("staff_001", "staff", "cannot lock", {"s3"}, "s3"),
    ]
    actions_by_id = {a.id: a for a in actions}
    index = build_bm25_index(actions, texts)
    sequences = [
        [SOS, "user_000", "staff_000", EOS],
        [SOS, "user_000", "staff_000", EOS],
        [SOS, "user_000", "staff_001", EOS],
    ]
    model = fit_ngram(sequences, order=2)
    samples = sample_sequences(model, BeamConfig())
    tf = build_taskflow(samples, model, actions_by_id, texts, scenario="lock-bike")
    user_node = next(n for n in tf.nodes.values() if n.action_id == "user_000")
    s_true = next(n for n in tf.nodes.values() if n.action_id == "staff_000")
    s_false = next(n for n in tf.nodes.values() if n.action_id == "staff_001")
    spec = ApiSpec(
        name="Check_Status",
        params=[("user_id", "integer")],
        response_fields=[("status", "boolean")],
        stub_rules=[{"when": {"user_id": 666}, "respond": {"status": False}}],
        stub_default={"status": True},
    )
    tf2 = insert_api_node(
        tf,
        user_node.id,
        spec,
        [
            (s_true.id, Predicate("api.Check_Status.status", "==", True)),
            (s_false.id, Predicate("api.Check_Status.status", "==", False)),
        ],
    )
    return {
        "taskflow": tf2,
        "base": tf,
        "index": index,
        "actions_by_id": actions_by_id,
        "texts": texts,
        "model": model,
        "samples": samples,
        "user_node": user_node.id,
        "true_node": s_true.id,
        "false_node": s_false.id,
        "spec": spec,
    }


@pytest.fixture
def fig5():
    return build_fig5()
