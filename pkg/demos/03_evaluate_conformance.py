"""Evaluate a mined tree by mechanical replay.

Mines a tree from a synthetic corpus, synthesizes dialogues by walking
that same tree, and replays them through the engine: self-replay should
complete every dialogue with no fallbacks. Then replays the original
(raw) corpus for comparison, where noise and unreached branches show up
as divergences.

    python3 demos/03_evaluate_conformance.py
"""

import tempfile
from pathlib import Path

from flowmine import (
    BeamConfig,
    PipelineConfig,
    build_bm25_index,
    make_corpus,
    replay_conformance,
    run_pipeline,
    save_dialogues,
    synthesize_dialogues,
)

CLOCK = lambda: 1_700_000_000.0  # noqa: E731


def main():
    workdir = Path(tempfile.mkdtemp(prefix="flowmine-demo-"))
    dialogues = make_corpus(4, 4, 80, seed=9, noise_rate=0.02)
    corpus = workdir / "corpus.jsonl"
    save_dialogues(dialogues, corpus)

    config = PipelineConfig(
        corpus_path=str(corpus),
        out_dir=str(workdir / "artifacts"),
        clusters_user=4,
        clusters_staff=4,
        order=3,
        beam=BeamConfig(top_k=5),
        seed=9,
    )
    result = run_pipeline(config, dialogues)
    texts = {u.id: u.text for d in dialogues for u in d.utterances}
    index = build_bm25_index(result.actions, texts)

    synthetic = synthesize_dialogues(
        result.taskflow, index, {a.id: a for a in result.actions},
        texts, [], limit=50, clock=CLOCK,
    )
    report = replay_conformance(result.taskflow, synthetic, index, clock=CLOCK)
    print("self-replay (dialogues synthesized from the tree):")
    print(f"  total={report.total} completed={report.completed} "
          f"fallback_rate={report.fallback_rate:.3f}\n")

    report = replay_conformance(result.taskflow, dialogues, index, clock=CLOCK)
    print("raw-corpus replay (2% noise injected):")
    print(f"  total={report.total} completed={report.completed} "
          f"diverged={report.diverged} fallback_rate={report.fallback_rate:.3f}")


if __name__ == "__main__":
    main()
