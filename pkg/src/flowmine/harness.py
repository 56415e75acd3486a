"""Evaluation harness and one-shot pipeline orchestration.

`replay_conformance` mechanically replays dialogues against the engine and
classifies each as completed or diverged; `run_pipeline` chains action
construction, standardization, n-gram fitting, beam sampling and tree
construction, writing deterministic artifacts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

from .actions import build_actions, save_actions
from .corpus import load_dialogues, utterance_lookup
from .engine import create_session, step
from .sampler import BeamConfig, sample_sequences, save_samples
from .standardize import (
    DEFAULT_RECALL_K,
    DEFAULT_THRESHOLD,
    build_bm25_index,
    save_sequences,
    standardize_dialogue,
    standardize_utterance,
)
from .ngram import fit_ngram, save_ngram
from .taskflow import KIND_STAFF, build_taskflow, save_taskflow


@dataclass
class ConformanceReport:
    total: int
    completed: int
    diverged: int
    fallback_rate: float
    verdicts: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return asdict(self)

    def to_table(self) -> str:
        lines = [
            f"{'dialogue':<16} {'verdict':<10} fallback",
            "-" * 36,
        ]
        for v in self.verdicts:
            lines.append(f"{v['dialogue_id']:<16} {v['verdict']:<10} {v['fallback']}")
        lines.append("-" * 36)
        lines.append(
            f"total={self.total} completed={self.completed} "
            f"diverged={self.diverged} fallback_rate={self.fallback_rate:.3f}"
        )
        return "\n".join(lines)


def replay_conformance(
    tf,
    dialogues,
    index,
    defs=(),
    recall_k: int = DEFAULT_RECALL_K,
    threshold: float = DEFAULT_THRESHOLD,
    clock=lambda: 1_700_000_000.0,
) -> ConformanceReport:
    """Feed each dialogue's user turns to a fresh session and check that the
    engine's staff responses track the dialogue's staff actions."""
    verdicts = []
    completed = 0
    fallbacks = 0
    for d in dialogues:
        session = create_session(tf, clock=clock)
        expected = [u for u in d.utterances if u.speaker == "staff"]
        ei = 0
        ok = True
        fell = False
        for u in d.utterances:
            if u.speaker != "user":
                continue
            if session.closed:
                ok = False
                break
            result = step(
                session, u.text, index, defs,
                clock=clock, recall_k=recall_k, threshold=threshold,
            )
            if result.fallback:
                fell = True
                ok = False
                break
            staff_nodes = [
                n for n in result.path_delta if tf.nodes[n].kind == KIND_STAFF
            ]
            for nid in staff_nodes:
                if ei >= len(expected):
                    ok = False
                    break
                want = standardize_utterance(index, expected[ei].text, recall_k, threshold)
                if want.action_id != tf.nodes[nid].action_id:
                    ok = False
                    break
                ei += 1
            if not ok:
                break
        done = ok and ei == len(expected)
        completed += done
        fallbacks += fell
        verdicts.append(
            {"dialogue_id": d.id, "verdict": "completed" if done else "diverged",
             "fallback": fell}
        )
    total = len(dialogues)
    return ConformanceReport(
        total=total,
        completed=completed,
        diverged=total - completed,
        fallback_rate=(fallbacks / total) if total else 0.0,
        verdicts=verdicts,
    )


class PipelineError(RuntimeError):
    def __init__(self, stage, cause):
        super().__init__(f"pipeline stage {stage!r} failed: {cause}")
        self.stage = stage


@dataclass
class PipelineConfig:
    corpus_path: str
    out_dir: str
    clusters_user: int = 100
    clusters_staff: int = 100
    order: int = 4
    beam: BeamConfig = field(default_factory=BeamConfig)
    recall_k: int = DEFAULT_RECALL_K
    threshold: float = DEFAULT_THRESHOLD
    seed: int = 0
    scenario: str = "default"

    def to_json(self) -> dict:
        doc = asdict(self)
        doc["corpus_path"] = str(self.corpus_path)
        doc["out_dir"] = str(self.out_dir)
        return doc


@dataclass
class PipelineResult:
    config: PipelineConfig
    actions: list
    index: object
    sequences: list
    model: object
    samples: list
    taskflow: object
    paths: dict[str, str]


def run_pipeline(config: PipelineConfig, dialogues=None) -> PipelineResult:
    """Run every offline stage in order and write the artifact bundle."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {name: str(out / fname) for name, fname in [
        ("actions", "actions.json"),
        ("standardized", "standardized.jsonl"),
        ("ngram", "ngram.json"),
        ("samples", "samples.jsonl"),
        ("taskflow", "taskflow.json"),
        ("metadata", "metadata.json"),
    ]}

    def stage(name, fn):
        try:
            return fn()
        except Exception as exc:
            raise PipelineError(name, exc) from exc

    if dialogues is None:
        dialogues = stage("corpus", lambda: load_dialogues(config.corpus_path))
    utts = utterance_lookup(dialogues)

    def _actions():
        user_actions, _ = build_actions(dialogues, "user", config.clusters_user, config.seed)
        staff_actions, _ = build_actions(dialogues, "staff", config.clusters_staff, config.seed)
        return user_actions + staff_actions

    actions = stage("actions", _actions)
    save_actions(actions, paths["actions"])

    index = stage("index", lambda: build_bm25_index(actions, utts))
    sequences = stage(
        "standardize",
        lambda: [
            standardize_dialogue(index, d, config.recall_k, config.threshold)
            for d in dialogues
        ],
    )
    save_sequences(sequences, paths["standardized"])

    model = stage("ngram", lambda: fit_ngram(sequences, config.order))
    save_ngram(model, paths["ngram"])

    samples = stage("sample", lambda: sample_sequences(model, config.beam))
    save_samples(samples, paths["samples"])

    actions_by_id = {a.id: a for a in actions}
    texts = {uid: u.text for uid, u in utts.items()}
    tf = stage(
        "build",
        lambda: build_taskflow(samples, model, actions_by_id, texts, config.scenario),
    )
    save_taskflow(tf, paths["taskflow"])

    metadata = {
        "config": config.to_json(),
        "counts": {
            "dialogues": len(dialogues),
            "utterances": len(utts),
            "actions": len(actions),
            "sequences": len(sequences),
            "samples": len(samples),
            "nodes": len(tf.nodes),
            "edges": len(tf.edges),
        },
    }
    Path(paths["metadata"]).write_text(
        json.dumps(metadata, ensure_ascii=False, sort_keys=True, indent=1) + "\n",
        encoding="utf-8",
    )
    return PipelineResult(
        config=config,
        actions=actions,
        index=index,
        sequences=sequences,
        model=model,
        samples=samples,
        taskflow=tf,
        paths=paths,
    )
