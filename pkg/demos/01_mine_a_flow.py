"""Mine a TaskFlow from a synthetic chat corpus, end to end.

Generates template-duplicated dialogues, runs every offline stage through
the pipeline orchestrator, and prints the resulting tree.

    python3 demos/01_mine_a_flow.py
"""

import tempfile
from pathlib import Path

from flowmine import (
    BeamConfig,
    PipelineConfig,
    make_corpus,
    run_pipeline,
    save_dialogues,
)


def print_tree(tf, node_id="root", depth=0):
    node = tf.nodes[node_id]
    label = node.action_id or node.kind
    end = " *" if node.end else ""
    print("  " * depth + f"- {label}{end}")
    for edge in tf.children(node_id):
        cond = edge.cond if isinstance(edge.cond, str) else "predicate"
        print("  " * (depth + 1) + f"[{cond}" +
              (f" p={edge.prob:.3f}]" if edge.prob is not None else "]"))
        print_tree(tf, edge.dst, depth + 1)


def main():
    workdir = Path(tempfile.mkdtemp(prefix="flowmine-demo-"))
    dialogues = make_corpus(
        n_user_templates=4, n_staff_templates=4, n_dialogues=60, seed=42
    )
    corpus = workdir / "corpus.jsonl"
    save_dialogues(dialogues, corpus)
    print(f"corpus: {len(dialogues)} dialogues at {corpus}")

    config = PipelineConfig(
        corpus_path=str(corpus),
        out_dir=str(workdir / "artifacts"),
        clusters_user=4,
        clusters_staff=4,
        order=3,
        beam=BeamConfig(top_k=5),
        seed=42,
    )
    result = run_pipeline(config, dialogues)
    print(f"{len(result.actions)} actions, {len(result.samples)} sampled sequences, "
          f"{len(result.taskflow.nodes)} tree nodes\n")
    print_tree(result.taskflow)
    print(f"\nartifacts written to {config.out_dir}")


if __name__ == "__main__":
    main()
