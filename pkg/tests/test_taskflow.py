import json
import random

import pytest

from conftest import fake_action_store, random_sequences
from flowmine.ngram import fit_ngram, ngram_prob
from flowmine.sampler import BeamConfig, ScoredSequence, sample_sequences
from flowmine.standardize import EOS, SOS
from flowmine.taskflow import (
    ALWAYS,
    MAXPROB,
    Predicate,
    TaskFlowError,
    TaskFlowStore,
    build_taskflow,
    insert_api_node,
    leaf_paths,
    load_taskflow,
    save_taskflow,
    set_edge_condition,
    taskflow_from_json,
    taskflow_to_json,
    validate_taskflow,
)


def build_from_sequences(seqs, order=None):
    order = order or max(len(s) for s in seqs)
    model = fit_ngram(seqs, order)
    ids = {a for s in seqs for a in s[1:-1]}
    actions, texts = fake_action_store(ids)
    samples = sample_sequences(
        model,
        BeamConfig(top_k=50, beam_cap=10_000, max_len=60, min_log_prob=-1e9,
                   max_completed=10_000),
    )
    tf = build_taskflow(samples, model, actions, texts)
    return tf, model, samples


class TestBuild:
    def test_prefix_sharing(self):
        seqs = [
            [SOS, "user_000", "staff_000", EOS],
            [SOS, "user_000", "staff_001", EOS],
        ]
        tf, _, _ = build_from_sequences(seqs)
        root_children = tf.children("root")
        assert len(root_children) == 1
        shared = tf.nodes[root_children[0].dst]
        assert shared.action_id == "user_000"
        kids = {tf.nodes[e.dst].action_id for e in tf.children(shared.id)}
        assert kids == {"staff_000", "staff_001"}

    def test_single_sample_probs_multiply(self):
        seqs = [[SOS, "user_000", "staff_000", EOS]]
        tf, model, samples = build_from_sequences(seqs)
        prob = 1.0
        for e in tf.edges.values():
            prob *= e.prob
        import math

        assert math.log(prob) == pytest.approx(samples[0].log_prob, abs=1e-9)

    def test_empty_samples_rejected(self, toy_model):
        with pytest.raises(TaskFlowError):
            build_taskflow([], toy_model, {}, {})

    def test_unresolvable_action(self, toy_model):
        sample = ScoredSequence(actions=[SOS, "A", EOS], log_prob=0.0)
        with pytest.raises(TaskFlowError, match="unresolvable"):
            build_taskflow([sample], toy_model, {}, {})

    def test_staff_nodes_cache_canonical_text(self):
        seqs = [[SOS, "user_000", "staff_000", EOS]]
        tf, _, _ = build_from_sequences(seqs)
        staff = next(n for n in tf.nodes.values() if n.kind == "staff")
        assert staff.text == "canonical text staff_000"

    def test_path_recovery_round_trip(self):
        rng = random.Random(1)
        seqs = random_sequences(rng, n_actions=3, n_sequences=6, alternating=True)
        tf, _, samples = build_from_sequences(seqs)
        assert {tuple(p) for p in leaf_paths(tf)} == {tuple(s.actions) for s in samples}

    def test_edge_probs_match_model(self):
        rng = random.Random(2)
        seqs = random_sequences(rng, n_actions=3, n_sequences=5, alternating=True)
        tf, model, _ = build_from_sequences(seqs)

        def walk(nid, path):
            for e in tf.children(nid):
                child = tf.nodes[e.dst]
                assert e.prob == pytest.approx(
                    ngram_prob(model, path, child.action_id), abs=1e-12
                )
                walk(e.dst, path + [child.action_id])

        walk("root", [SOS])


class TestApiNode:
    def test_splice_between_parent_and_children(self, fig5):
        tf = fig5["taskflow"]
        api = next(n for n in tf.nodes.values() if n.kind == "api")
        assert tf.parent_edge(api.id).src == fig5["user_node"]
        kids = {e.dst for e in tf.children(api.id)}
        assert kids == {fig5["true_node"], fig5["false_node"]}
        assert tf.parent_edge(api.id).cond == ALWAYS

    def test_version_increases(self, fig5):
        assert fig5["taskflow"].version == fig5["base"].version + 1

    def test_empty_rewires_rejected(self, fig5):
        with pytest.raises(TaskFlowError, match="at least one"):
            insert_api_node(fig5["base"], fig5["user_node"], fig5["spec"], [])

    def test_parent_must_be_user_node(self, fig5):
        with pytest.raises(TaskFlowError):
            insert_api_node(fig5["base"], fig5["true_node"], fig5["spec"], [
                (fig5["false_node"], Predicate("api.Check_Status.status", "==", True))
            ])

    def test_unknown_response_field_rejected(self, fig5):
        with pytest.raises(TaskFlowError, match="response field"):
            insert_api_node(fig5["base"], fig5["user_node"], fig5["spec"], [
                (fig5["true_node"], Predicate("api.Check_Status.nope", "==", True))
            ])

    def test_original_untouched(self, fig5):
        assert all(n.kind != "api" for n in fig5["base"].nodes.values())


class TestSetEdgeCondition:
    def test_always(self, fig5):
        tf = fig5["taskflow"]
        eid = next(e.id for e in tf.edges.values() if e.dst == fig5["true_node"])
        tf2 = set_edge_condition(tf, eid, ALWAYS)
        assert tf2.edges[eid].cond == ALWAYS
        assert tf2.version == tf.version + 1
        assert tf.edges[eid].cond != ALWAYS

    def test_idempotent_modulo_version(self, fig5):
        tf = fig5["taskflow"]
        eid = next(iter(tf.edges))
        a = set_edge_condition(tf, eid, ALWAYS)
        b = set_edge_condition(a, eid, ALWAYS)
        da, db = taskflow_to_json(a), taskflow_to_json(b)
        da.pop("version"), db.pop("version")
        assert da == db

    def test_dangling_edge(self, fig5):
        with pytest.raises(TaskFlowError, match="unknown edge"):
            set_edge_condition(fig5["taskflow"], "e999", ALWAYS)

    def test_predicate_requires_known_api(self, fig5):
        eid = next(iter(fig5["base"].edges))
        with pytest.raises(TaskFlowError, match="unknown API"):
            set_edge_condition(fig5["base"], eid, Predicate("api.Nope.x", "==", 1))

    def test_predicate_on_non_api_parent_warns(self, fig5):
        tf = fig5["taskflow"]
        eid = next(e.id for e in tf.edges.values() if e.src == "root")
        tf2 = set_edge_condition(tf, eid, Predicate("api.Check_Status.status", "==", True))
        codes = {i.code for i in validate_taskflow(tf2)}
        assert "predicate-unbound" in codes


class TestValidate:
    def test_fresh_tree_clean(self, mini_pipeline):
        assert validate_taskflow(mini_pipeline["result"].taskflow) == []

    def test_fig5_clean(self, fig5):
        assert [i for i in validate_taskflow(fig5["taskflow"]) if i.blocking] == []

    def test_sibling_predicate_overlap(self, fig5):
        tf = fig5["taskflow"]
        eid = next(e.id for e in tf.edges.values() if e.dst == fig5["false_node"])
        tf2 = set_edge_condition(tf, eid, Predicate("api.Check_Status.status", "==", True))
        codes = {i.code for i in validate_taskflow(tf2)}
        assert "predicate-overlap" in codes

    def test_second_parent_detected(self, fig5):
        tf = fig5["taskflow"].clone()
        tf.edges["e999"] = type(next(iter(tf.edges.values())))(
            id="e999", src="root", dst=fig5["true_node"], cond=MAXPROB, prob=0.5
        )
        codes = {i.code for i in validate_taskflow(tf)}
        assert "multi-parent" in codes

    def test_api_without_children(self, fig5):
        tf = fig5["taskflow"].clone()
        for e in list(tf.edges.values()):
            api = next(n for n in tf.nodes.values() if n.kind == "api")
            if e.src == api.id:
                del tf.edges[e.id]
        issues = validate_taskflow(tf)
        assert any(i.code == "api-no-children" for i in issues)


class TestPersistence:
    def test_json_round_trip(self, fig5):
        doc = taskflow_to_json(fig5["taskflow"])
        again = taskflow_to_json(taskflow_from_json(doc))
        assert doc == again

    def test_file_round_trip(self, fig5, tmp_path):
        p = tmp_path / "tf.json"
        save_taskflow(fig5["taskflow"], p)
        assert taskflow_to_json(load_taskflow(p)) == taskflow_to_json(fig5["taskflow"])

    def test_versions_are_immutable_snapshots(self, fig5, tmp_path):
        tf = fig5["base"]
        before = json.dumps(taskflow_to_json(tf), sort_keys=True)
        insert_api_node(
            tf, fig5["user_node"], fig5["spec"],
            [(fig5["true_node"], Predicate("api.Check_Status.status", "==", True))],
        )
        after = json.dumps(taskflow_to_json(tf), sort_keys=True)
        assert before == after

    def test_store_versioning(self, fig5):
        store = TaskFlowStore(fig5["base"])
        v1 = store.current_version
        v2 = store.publish(fig5["taskflow"])
        assert v2 == v1 + 1
        assert store.get(v1).version == v1
        assert store.get().version == v2
