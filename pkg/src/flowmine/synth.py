"""Synthetic corpora and tree-driven dialogue synthesis.

Used by the evaluation harness, the demos and the test suite: template-based
chat-log generation at arbitrary scale, and dialogue synthesis that drives
the execution engine over a TaskFlow so replays are self-consistent.
"""

from __future__ import annotations

import random

from .corpus import Dialogue, Utterance
from .engine import create_session, step
from .standardize import RetrievalIndex
from .taskflow import KIND_USER, TaskFlow


def make_templates(n: int, role: str, tokens_per_template: int = 4) -> list[str]:
    """Distinct template texts with disjoint token sets."""
    return [
        " ".join(f"{role}{i:03d}w{j}" for j in range(tokens_per_template))
        for i in range(n)
    ]


def make_corpus(
    n_user_templates: int,
    n_staff_templates: int,
    n_dialogues: int,
    seed: int,
    turns_per_dialogue: tuple[int, int] = (4, 10),
    noise_rate: float = 0.0,
    scenario: str = "synthetic",
) -> list[Dialogue]:
    """Template-duplicated dialogues with alternating speakers.

    A light first-order structure links templates so the mined n-gram model
    has non-trivial transitions; `noise_rate` utterances get gibberish text.
    """
    rng = random.Random(seed)
    user_t = make_templates(n_user_templates, "user")
    staff_t = make_templates(n_staff_templates, "staff")
    # per-template successor pools, fixed once per corpus
    succ_user = {
        i: rng.sample(range(n_staff_templates), k=min(2, n_staff_templates))
        for i in range(n_user_templates)
    }
    succ_staff = {
        i: rng.sample(range(n_user_templates), k=min(2, n_user_templates))
        for i in range(n_staff_templates)
    }
    dialogues = []
    uid = 0
    for di in range(n_dialogues):
        turns = rng.randint(*turns_per_dialogue)
        utts = []
        user_idx = rng.randrange(n_user_templates)
        staff_idx = None
        for t in range(turns):
            if t % 2 == 0:
                speaker, text = "user", user_t[user_idx]
                staff_idx = rng.choice(succ_user[user_idx])
            else:
                speaker, text = "staff", staff_t[staff_idx]
                user_idx = rng.choice(succ_staff[staff_idx])
            if noise_rate and rng.random() < noise_rate:
                text = " ".join(f"noise{rng.randrange(10**6)}" for _ in range(3))
            utts.append(
                Utterance(
                    id=f"u{uid:06d}",
                    dialogue_id=f"d{di:05d}",
                    turn_index=t,
                    speaker=speaker,
                    text=text,
                )
            )
            uid += 1
        dialogues.append(Dialogue(id=f"d{di:05d}", scenario=scenario, utterances=utts))
    return dialogues


def synthesize_dialogues(
    tf: TaskFlow,
    index: RetrievalIndex,
    actions_by_id,
    texts,
    defs=(),
    limit: int = 200,
    clock=lambda: 1_700_000_000.0,
    scenario: str = "replayed",
) -> list[Dialogue]:
    """Enumerate engine-consistent conversations over a TaskFlow.

    At every await point each user-action child is tried in turn; staff and
    API traversal is delegated to the engine itself, so the produced
    dialogues replay with full conformance by construction.
    """
    dialogues: list[Dialogue] = []
    counter = [0]

    def canonical_text(action_id: str) -> str:
        action = actions_by_id[action_id]
        return texts[action.canonical_id]

    def record(turns) -> None:
        if len(turns) < 2 or len(dialogues) >= limit:
            return
        di = len(dialogues)
        utts = [
            Utterance(
                id=f"s{di:04d}t{ti:03d}",
                dialogue_id=f"synth{di:04d}",
                turn_index=ti,
                speaker=speaker,
                text=text,
            )
            for ti, (speaker, text) in enumerate(turns)
        ]
        dialogues.append(Dialogue(id=f"synth{di:04d}", scenario=scenario, utterances=utts))

    def walk(session, turns) -> None:
        if len(dialogues) >= limit:
            return
        user_children = [
            tf.nodes[e.dst]
            for e in tf.children(session.current)
            if tf.nodes[e.dst].kind == KIND_USER
        ]
        if session.closed or not user_children:
            record(turns)
            return
        for child in user_children:
            fork = session.fork()
            text = canonical_text(child.action_id)
            result = step(fork, text, index, defs, clock=clock)
            if result.fallback:
                continue
            walk(
                fork,
                turns + [("user", text)] + [("staff", t) for t in result.responses],
            )

    root_session = create_session(tf, session_id="synth", clock=clock)
    walk(root_session, [])
    return dialogues
