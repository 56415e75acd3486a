"""Operator command line: one subcommand per offline stage plus chat,
eval and serve."""

from __future__ import annotations

import json
import math
import sys
from pathlib import Path

import click

from .actions import build_actions, load_actions, save_actions
from .corpus import load_dialogues, utterance_lookup
from .engine import create_session, step
from .extract import default_param_defs
from .harness import replay_conformance
from .ngram import fit_ngram, load_ngram, save_ngram
from .sampler import BeamConfig, load_samples, sample_sequences, save_samples
from .standardize import (
    DEFAULT_RECALL_K,
    DEFAULT_THRESHOLD,
    build_bm25_index,
    load_sequences,
    save_sequences,
    standardize_dialogue,
)
from .synth import synthesize_dialogues
from .taskflow import build_taskflow, load_taskflow, validate_taskflow


@click.group()
def main():
    """Mine TaskFlows from chat logs and run them as a chatbot."""


@main.command()
@click.argument("corpus", type=click.Path(exists=True))
def ingest(corpus):
    """Validate a dialogue file and print corpus statistics."""
    dialogues = load_dialogues(corpus)
    utts = utterance_lookup(dialogues)
    users = sum(1 for u in utts.values() if u.speaker == "user")
    click.echo(
        f"{len(dialogues)} dialogues, {len(utts)} utterances "
        f"({users} user / {len(utts) - users} staff)"
    )


@main.command()
@click.argument("corpus", type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default="actions.json", show_default=True)
@click.option("--clusters-user", default=100, show_default=True)
@click.option("--clusters-staff", default=100, show_default=True)
@click.option("--seed", default=0, show_default=True)
def cluster(corpus, out, clusters_user, clusters_staff, seed):
    """Cluster utterances per role into dialogue actions."""
    dialogues = load_dialogues(corpus)
    user_actions, _ = build_actions(dialogues, "user", clusters_user, seed)
    staff_actions, _ = build_actions(dialogues, "staff", clusters_staff, seed)
    save_actions(user_actions + staff_actions, out)
    click.echo(f"wrote {len(user_actions) + len(staff_actions)} actions to {out}")


@main.command()
@click.argument("corpus", type=click.Path(exists=True))
@click.option("--actions", "actions_path", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), default="standardized.jsonl", show_default=True)
@click.option("--recall-k", default=DEFAULT_RECALL_K, show_default=True)
@click.option("--threshold", default=DEFAULT_THRESHOLD, show_default=True)
def standardize(corpus, actions_path, out, recall_k, threshold):
    """Map every dialogue to an action sequence."""
    dialogues = load_dialogues(corpus)
    actions = load_actions(actions_path)
    index = build_bm25_index(actions, utterance_lookup(dialogues))
    sequences = [standardize_dialogue(index, d, recall_k, threshold) for d in dialogues]
    save_sequences(sequences, out)
    click.echo(f"wrote {len(sequences)} sequences to {out}")


@main.command()
@click.argument("sequences", type=click.Path(exists=True))
@click.option("--order", default=4, show_default=True)
@click.option("--out", type=click.Path(), default="ngram.json", show_default=True)
def ngram(sequences, order, out):
    """Fit the action-transition model."""
    model = fit_ngram(load_sequences(sequences), order)
    save_ngram(model, out)
    click.echo(f"wrote order-{order} model ({len(model.context_counts)} contexts) to {out}")


def _beam_options(fn):
    fn = click.option("--top-k", default=5, show_default=True)(fn)
    fn = click.option("--beam-cap", default=200, show_default=True)(fn)
    fn = click.option("--max-len", default=40, show_default=True)(fn)
    fn = click.option("--min-prob", default=1e-4, show_default=True,
                      help="discard partials below this probability")(fn)
    fn = click.option("--max-completed", default=500, show_default=True)(fn)
    return fn


@main.command()
@click.argument("model", type=click.Path(exists=True))
@click.option("--out", type=click.Path(), default="samples.jsonl", show_default=True)
@_beam_options
def sample(model, out, top_k, beam_cap, max_len, min_prob, max_completed):
    """Beam-sample high-probability action sequences."""
    cfg = BeamConfig(
        top_k=top_k, beam_cap=beam_cap, max_len=max_len,
        min_log_prob=math.log(min_prob), max_completed=max_completed,
    )
    samples = sample_sequences(load_ngram(model), cfg)
    save_samples(samples, out)
    click.echo(f"wrote {len(samples)} sequences to {out}")


@main.command()
@click.argument("samples", type=click.Path(exists=True))
@click.option("--model", "model_path", type=click.Path(exists=True), required=True)
@click.option("--actions", "actions_path", type=click.Path(exists=True), required=True)
@click.option("--corpus", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), default="taskflow.json", show_default=True)
@click.option("--scenario", default="default", show_default=True)
def build(samples, model_path, actions_path, corpus, out, scenario):
    """Merge sampled sequences into a TaskFlow tree."""
    from .taskflow import save_taskflow

    actions = load_actions(actions_path)
    utts = utterance_lookup(load_dialogues(corpus))
    tf = build_taskflow(
        load_samples(samples),
        load_ngram(model_path),
        {a.id: a for a in actions},
        {uid: u.text for uid, u in utts.items()},
        scenario,
    )
    save_taskflow(tf, out)
    click.echo(f"wrote TaskFlow v{tf.version} ({len(tf.nodes)} nodes) to {out}")


@main.command()
@click.argument("taskflow", type=click.Path(exists=True))
def validate(taskflow):
    """Report TaskFlow integrity issues."""
    issues = validate_taskflow(load_taskflow(taskflow))
    for i in issues:
        kind = "ERROR" if i.blocking else "WARN"
        click.echo(f"{kind} {i.code} [{i.subject}]: {i.message}")
    if not issues:
        click.echo("no issues")
    sys.exit(1 if any(i.blocking for i in issues) else 0)


def _load_runtime(artifacts, corpus):
    dialogues = load_dialogues(corpus)
    actions = load_actions(Path(artifacts) / "actions.json")
    tf = load_taskflow(Path(artifacts) / "taskflow.json")
    index = build_bm25_index(actions, utterance_lookup(dialogues))
    return dialogues, actions, tf, index


@main.command()
@click.option("--artifacts", type=click.Path(exists=True), required=True)
@click.option("--corpus", type=click.Path(exists=True), required=True)
def chat(artifacts, corpus):
    """Terminal REPL over a local session."""
    _, _, tf, index = _load_runtime(artifacts, corpus)
    defs = default_param_defs()
    session = create_session(tf)
    click.echo("chat started; empty line or EOF quits")
    while not session.closed:
        try:
            text = click.prompt("you", prompt_suffix="> ")
        except (EOFError, click.Abort):
            break
        if not text.strip():
            break
        result = step(session, text, index, defs)
        for response in result.responses:
            click.echo(f"bot> {response}")
    if session.closed:
        click.echo("(conversation closed)")


@main.command("eval")
@click.option("--artifacts", type=click.Path(exists=True), required=True)
@click.option("--corpus", type=click.Path(exists=True), required=True)
@click.option("--synthetic", is_flag=True,
              help="replay dialogues synthesized from the tree instead of the corpus")
@click.option("--json-out", type=click.Path(), default=None)
def eval_cmd(artifacts, corpus, synthetic, json_out):
    """Replay dialogues against the engine and report conformance."""
    dialogues, actions, tf, index = _load_runtime(artifacts, corpus)
    if synthetic:
        utts = utterance_lookup(dialogues)
        dialogues = synthesize_dialogues(
            tf, index, {a.id: a for a in actions},
            {uid: u.text for uid, u in utts.items()},
        )
    report = replay_conformance(tf, dialogues, index)
    click.echo(report.to_table())
    if json_out:
        Path(json_out).write_text(
            json.dumps(report.to_json(), ensure_ascii=False, sort_keys=True, indent=1) + "\n",
            encoding="utf-8",
        )


@main.command()
@click.option("--artifacts", type=click.Path(), required=True)
@click.option("--corpus", type=click.Path(exists=True), required=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8080, show_default=True)
@click.option("--clusters-user", default=100, show_default=True)
@click.option("--clusters-staff", default=100, show_default=True)
@click.option("--order", default=4, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--run-pipeline", "run_pipeline_first", is_flag=True,
              help="run the offline pipeline before serving")
def serve(artifacts, corpus, host, port, clusters_user, clusters_staff, order, seed,
          run_pipeline_first):
    """Serve the HTTP API (and the chat/flow web UI endpoints)."""
    from .harness import run_pipeline as _run
    from .service import ServiceConfig
    from .service import serve as _serve

    config = ServiceConfig(
        artifact_dir=artifacts, corpus_path=corpus, host=host, port=port,
        clusters_user=clusters_user, clusters_staff=clusters_staff,
        order=order, seed=seed,
    )
    if run_pipeline_first:
        _run(config.pipeline_config())
    _serve(config)


if __name__ == "__main__":
    main()
