"""Online execution engine: classify user input, walk the TaskFlow under
edge conditions, run API stubs with extracted parameters, emit staff texts.
"""

from __future__ import annotations

import copy
import time
import uuid
from dataclasses import dataclass, field

from .extract import ExtractionError, extract_params, normalize_mention
from .standardize import (
    DEFAULT_RECALL_K,
    DEFAULT_THRESHOLD,
    RetrievalIndex,
    standardize_utterance,
)
from .taskflow import (
    ALWAYS,
    KIND_API,
    KIND_STAFF,
    KIND_USER,
    MAXPROB,
    Predicate,
    TaskFlow,
    blocking_issues,
)

DEFAULT_FALLBACK = "Sorry, I could not understand that. Let me hand you over to a colleague."

SATISFIED = "satisfied"
UNSATISFIED = "unsatisfied"
COMPETE = "compete"


class EngineError(RuntimeError):
    pass


class SessionClosedError(EngineError):
    pass


@dataclass
class Session:
    id: str
    taskflow: TaskFlow
    current: str
    bindings: dict = field(default_factory=dict)
    transcript: list[tuple[str, str, str | None]] = field(default_factory=list)
    closed: bool = False
    created_at: float = 0.0
    last_active: float = 0.0

    @property
    def taskflow_version(self) -> int:
        return self.taskflow.version

    def fork(self) -> "Session":
        return copy.deepcopy(self)


@dataclass
class TurnResult:
    responses: list[str]
    api_calls: list[tuple[str, dict, dict]]
    path_delta: list[str]
    closed: bool
    fallback: bool


def create_session(tf: TaskFlow, session_id: str | None = None,
                   clock=time.time) -> Session:
    issues = blocking_issues(tf)
    if issues:
        raise EngineError(
            "TaskFlow has blocking issues: "
            + "; ".join(f"{i.code}({i.subject})" for i in issues)
        )
    now = clock()
    return Session(
        id=session_id or uuid.uuid4().hex,
        taskflow=tf,
        current="root",
        created_at=now,
        last_active=now,
    )


def eval_condition(cond, bindings, edge_prob=None) -> str:
    """Verdict of one edge condition against the session bindings."""
    if cond == ALWAYS:
        return SATISFIED
    if cond == MAXPROB:
        return COMPETE
    if isinstance(cond, Predicate):
        return SATISFIED if cond.evaluate(bindings) else UNSATISFIED
    raise EngineError(f"unknown condition {cond!r}")


def select_edge(tf: TaskFlow, node_id: str, bindings):
    """Pick the outgoing edge to traverse, or None when nothing qualifies.

    Guarded (Predicate/Always) edges are preferred: among the satisfied ones
    the highest-probability edge wins, ties going to the smaller child id.
    Otherwise the competing MaxProb edges are compared the same way.
    """
    edges = tf.children(node_id)
    guarded = []
    competing = []
    for e in edges:
        verdict = eval_condition(e.cond, bindings, e.prob)
        if verdict == SATISFIED:
            guarded.append(e)
        elif verdict == COMPETE:
            competing.append(e)
    pool = guarded or competing
    if not pool:
        return None
    return min(pool, key=lambda e: (-(e.prob if e.prob is not None else float("-inf")), e.dst))


def _match_user_child(tf: TaskFlow, node_id: str, action_id: str):
    for e in tf.children(node_id):
        child = tf.nodes[e.dst]
        if child.kind == KIND_USER and child.action_id == action_id:
            return child
    return None


def step(
    session: Session,
    user_text: str,
    index: RetrievalIndex,
    defs=(),
    clock=time.time,
    fallback_message: str = DEFAULT_FALLBACK,
    recall_k: int = DEFAULT_RECALL_K,
    threshold: float = DEFAULT_THRESHOLD,
    recover_from_root: bool = True,
) -> TurnResult:
    """Run one user turn. Deterministic given stubs, clock and inputs."""
    if session.closed:
        raise SessionClosedError(f"session {session.id} is closed")
    session.last_active = clock()
    tf = session.taskflow

    def fallback(message: str) -> TurnResult:
        session.transcript.append(("user", user_text, None))
        session.transcript.append(("staff", message, None))
        return TurnResult(
            responses=[message], api_calls=[], path_delta=[],
            closed=False, fallback=True,
        )

    label = standardize_utterance(index, user_text, recall_k, threshold)
    if label.unknown:
        return fallback(fallback_message)
    target = _match_user_child(tf, session.current, label.action_id)
    if target is None and recover_from_root and session.current != "root":
        target = _match_user_child(tf, "root", label.action_id)
    if target is None:
        return fallback(fallback_message)

    bindings = dict(session.bindings)
    defs_by_name = {d.name: d for d in defs}
    path = [target.id]
    responses: list[tuple[str, str]] = []  # (node id, text)
    api_calls: list[tuple[str, dict, dict]] = []
    closed = False
    cur = target.id
    while True:
        if not tf.children(cur):
            closed = True
            break
        edge = select_edge(tf, cur, bindings)
        if edge is None:
            return fallback(fallback_message)
        nxt = tf.nodes[edge.dst]
        if nxt.kind == KIND_USER:
            break  # await the user's next turn
        cur = nxt.id
        path.append(cur)
        if nxt.kind == KIND_API:
            spec = tf.api_specs[nxt.api]
            for m in extract_params(user_text, defs):
                try:
                    pv = normalize_mention(m, defs_by_name[m.param], clock())
                except ExtractionError:
                    continue
                bindings[m.param] = pv.value
            args = {}
            missing = []
            for pname, _ in spec.params:
                if pname in bindings:
                    args[pname] = bindings[pname]
                else:
                    missing.append(pname)
            if missing:
                return fallback(
                    "I still need the following to continue: " + ", ".join(missing)
                )
            resp = spec.call(args)
            for fname, value in resp.items():
                bindings[f"api.{spec.name}.{fname}"] = value
            api_calls.append((spec.name, args, resp))
        elif nxt.kind == KIND_STAFF:
            responses.append((nxt.id, nxt.text or ""))

    session.bindings = bindings
    session.current = cur
    session.closed = closed
    session.transcript.append(("user", user_text, target.id))
    for nid, text in responses:
        session.transcript.append(("staff", text, nid))
    return TurnResult(
        responses=[t for _, t in responses],
        api_calls=api_calls,
        path_delta=path,
        closed=closed,
        fallback=False,
    )
