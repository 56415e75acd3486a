"""Splice an API-call node into a mined tree and chat across both branches.

Builds a tiny bike-locking flow, attaches a Check_Status stub whose
response field decides which staff reply fires, and runs two sessions:
one that passes the check and one (the blocked account 666) that fails.

    python3 demos/02_attach_api_call.py
"""

from flowmine import (
    ApiSpec,
    BeamConfig,
    DialogueAction,
    Predicate,
    build_bm25_index,
    build_taskflow,
    create_session,
    default_param_defs,
    fit_ngram,
    insert_api_node,
    sample_sequences,
    step,
)

CLOCK = lambda: 1_700_000_000.0  # noqa: E731


def build_flow():
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
    sequences = [
        ["[SOS]", "user_000", "staff_000", "[EOS]"],
        ["[SOS]", "user_000", "staff_000", "[EOS]"],
        ["[SOS]", "user_000", "staff_001", "[EOS]"],
    ]
    model = fit_ngram(sequences, order=2)
    samples = sample_sequences(model, BeamConfig())
    tf = build_taskflow(
        samples, model, {a.id: a for a in actions}, texts, scenario="lock-bike"
    )
    index = build_bm25_index(actions, texts)
    return tf, index


def main():
    tf, index = build_flow()
    user = next(n for n in tf.nodes.values() if n.action_id == "user_000")
    ok = next(n for n in tf.nodes.values() if n.action_id == "staff_000")
    fail = next(n for n in tf.nodes.values() if n.action_id == "staff_001")

    spec = ApiSpec(
        name="Check_Status",
        params=[("user_id", "integer")],
        response_fields=[("status", "boolean")],
        stub_rules=[{"when": {"user_id": 666}, "respond": {"status": False}}],
        stub_default={"status": True},
    )
    tf = insert_api_node(
        tf,
        user.id,
        spec,
        [
            (ok.id, Predicate("api.Check_Status.status", "==", True)),
            (fail.id, Predicate("api.Check_Status.status", "==", False)),
        ],
    )
    print(f"tree v{tf.version}: API node gates the two staff replies\n")

    defs = default_param_defs()
    for uid in (12345, 666):
        session = create_session(tf, clock=CLOCK)
        text = f"please lock the bike my user id is {uid}"
        result = step(session, text, index, defs, clock=CLOCK)
        print(f"you> {text}")
        for name, params, resp in result.api_calls:
            print(f"     ({name}({params}) -> {resp})")
        for line in result.responses:
            print(f"bot> {line}")
        print()


if __name__ == "__main__":
    main()
