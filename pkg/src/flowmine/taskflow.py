"""Versioned TaskFlow tree: construction from sampled sequences, edits,
validation and JSON persistence.

Nodes are user actions, staff actions or API calls under a single Root.
Edges carry one condition: a transition probability that competes by
magnitude ("maxprob"), an unconditional pass ("always"), or a comparison
against a field of an API stub response. Every edit produces a new
immutable version.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

from .ngram import NGramModel, ngram_prob
from .standardize import EOS, SOS

ROOT_ID = "root"
MAXPROB = "maxprob"
ALWAYS = "always"

KIND_ROOT = "root"
KIND_USER = "user"
KIND_STAFF = "staff"
KIND_API = "api"

PREDICATE_OPS = ("==", "!=", "<", "<=", ">", ">=")


class TaskFlowError(ValueError):
    pass


@dataclass(frozen=True)
class Predicate:
    path: str  # "api.<api name>.<response field>"
    op: str
    lit: object

    def __post_init__(self):
        if self.op not in PREDICATE_OPS:
            raise TaskFlowError(f"unknown predicate operator {self.op!r}")

    def evaluate(self, bindings) -> bool:
        if self.path not in bindings:
            return False
        value = bindings[self.path]
        if isinstance(value, bool) != isinstance(self.lit, bool):
            raise TaskFlowError(
                f"type mismatch comparing {value!r} with {self.lit!r} at {self.path}"
            )
        if self.op == "==":
            return value == self.lit
        if self.op == "!=":
            return value != self.lit
        if self.op == "<":
            return value < self.lit
        if self.op == "<=":
            return value <= self.lit
        if self.op == ">":
            return value > self.lit
        return value >= self.lit


@dataclass
class ApiSpec:
    name: str
    params: list[tuple[str, str]]  # (name, "string"|"integer"|"timestamp")
    response_fields: list[tuple[str, str]]
    stub_rules: list[dict] = field(default_factory=list)  # {"when": {...}, "respond": {...}}
    stub_default: dict = field(default_factory=dict)

    def responses(self) -> list[dict]:
        """All response records the stub can produce."""
        return [r["respond"] for r in self.stub_rules] + [self.stub_default]

    def call(self, args: dict) -> dict:
        for rule in self.stub_rules:
            if all(args.get(k) == v for k, v in rule["when"].items()):
                return dict(rule["respond"])
        return dict(self.stub_default)


@dataclass
class TaskFlowNode:
    id: str
    kind: str
    action_id: str | None = None
    api: str | None = None
    text: str | None = None
    end: bool = False  # a sampled sequence terminated here


@dataclass
class TaskFlowEdge:
    id: str
    src: str
    dst: str
    cond: object = MAXPROB  # MAXPROB | ALWAYS | Predicate
    prob: float | None = None


@dataclass
class TaskFlow:
    version: int
    scenario: str
    nodes: dict[str, TaskFlowNode] = field(default_factory=dict)
    edges: dict[str, TaskFlowEdge] = field(default_factory=dict)
    api_specs: dict[str, ApiSpec] = field(default_factory=dict)

    def children(self, node_id: str) -> list[TaskFlowEdge]:
        return sorted(
            (e for e in self.edges.values() if e.src == node_id), key=lambda e: e.dst
        )

    def parent_edge(self, node_id: str) -> TaskFlowEdge | None:
        for e in self.edges.values():
            if e.dst == node_id:
                return e
        return None

    def clone(self) -> "TaskFlow":
        return copy.deepcopy(self)


def build_taskflow(samples, model: NGramModel, actions_by_id, texts,
                   scenario: str = "default") -> TaskFlow:
    """Merge sampled sequences into a tree, highest log-prob first.

    `actions_by_id` maps action id -> DialogueAction, `texts` maps utterance
    id -> text (for caching staff response texts). Shared prefixes share
    nodes; each edge records the model conditional for its unique root path.
    """
    samples = sorted(samples, key=lambda s: (-s.log_prob, s.actions))
    if not samples:
        raise TaskFlowError("no sampled sequences to insert")
    tf = TaskFlow(version=1, scenario=scenario)
    tf.nodes[ROOT_ID] = TaskFlowNode(id=ROOT_ID, kind=KIND_ROOT)
    node_seq = 0
    edge_seq = 0
    for sample in samples:
        actions = sample.actions
        if actions[0] != SOS or actions[-1] != EOS:
            raise TaskFlowError(f"sample not bracketed: {actions}")
        cur = ROOT_ID
        for depth, action_id in enumerate(actions[1:-1], start=1):
            if action_id not in actions_by_id:
                raise TaskFlowError(f"unresolvable action id {action_id!r}")
            existing = None
            for e in tf.children(cur):
                child = tf.nodes[e.dst]
                if child.action_id == action_id:
                    existing = child
                    break
            if existing is None:
                action = actions_by_id[action_id]
                node_seq += 1
                edge_seq += 1
                node = TaskFlowNode(
                    id=f"n{node_seq:03d}",
                    kind=KIND_USER if action.role == "user" else KIND_STAFF,
                    action_id=action_id,
                )
                if node.kind == KIND_STAFF:
                    node.text = texts[action.canonical_id]
                tf.nodes[node.id] = node
                tf.edges[f"e{edge_seq:03d}"] = TaskFlowEdge(
                    id=f"e{edge_seq:03d}",
                    src=cur,
                    dst=node.id,
                    cond=MAXPROB,
                    prob=ngram_prob(model, actions[:depth], action_id),
                )
                existing = node
            cur = existing.id
        tf.nodes[cur].end = True
    return tf


def insert_api_node(tf: TaskFlow, parent_id: str, spec: ApiSpec, rewires) -> TaskFlow:
    """Splice an ApiCall node between a user node and some of its children.

    `rewires` is a list of (child node id, Predicate); each rewired edge gets
    the predicate, unlisted children stay attached to the parent. Returns a
    new version; the input tree is untouched.
    """
    if parent_id not in tf.nodes:
        raise TaskFlowError(f"unknown node {parent_id!r}")
    if tf.nodes[parent_id].kind != KIND_USER:
        raise TaskFlowError(f"API nodes attach under user action nodes, not {tf.nodes[parent_id].kind}")
    if not rewires:
        raise TaskFlowError("an API node needs at least one rewired child")
    field_names = {name for name, _ in spec.response_fields}
    child_edges = {e.dst: e for e in tf.children(parent_id)}
    for child_id, pred in rewires:
        if child_id not in child_edges:
            raise TaskFlowError(f"{child_id!r} is not a child of {parent_id!r}")
        _check_predicate_path(pred, spec.name, field_names)
    new = tf.clone()
    new.version += 1
    new.api_specs[spec.name] = copy.deepcopy(spec)
    api_id = _fresh_id(new.nodes, "n")
    new.nodes[api_id] = TaskFlowNode(id=api_id, kind=KIND_API, api=spec.name)
    edge_id = _fresh_id(new.edges, "e")
    new.edges[edge_id] = TaskFlowEdge(id=edge_id, src=parent_id, dst=api_id, cond=ALWAYS)
    for child_id, pred in rewires:
        e = new.edges[child_edges[child_id].id]
        e.src = api_id
        e.cond = pred
        e.prob = None
    return new


def set_edge_condition(tf: TaskFlow, edge_id: str, cond) -> TaskFlow:
    """Return a new version with exactly one edge's condition changed."""
    if edge_id not in tf.edges:
        raise TaskFlowError(f"unknown edge {edge_id!r}")
    if isinstance(cond, Predicate):
        api_name = _predicate_api(cond)
        spec = tf.api_specs.get(api_name)
        if spec is None:
            raise TaskFlowError(f"predicate path {cond.path!r} names unknown API {api_name!r}")
        _check_predicate_path(cond, api_name, {n for n, _ in spec.response_fields})
    elif cond not in (MAXPROB, ALWAYS):
        raise TaskFlowError(f"unknown condition {cond!r}")
    new = tf.clone()
    new.version += 1
    new.edges[edge_id].cond = cond
    return new


def _predicate_api(pred: Predicate) -> str:
    parts = pred.path.split(".")
    if len(parts) != 3 or parts[0] != "api":
        raise TaskFlowError(f"predicate path must look like api.<name>.<field>: {pred.path!r}")
    return parts[1]


def _check_predicate_path(pred: Predicate, api_name: str, field_names: set[str]) -> None:
    name = _predicate_api(pred)
    if name != api_name:
        raise TaskFlowError(f"predicate path {pred.path!r} does not target API {api_name!r}")
    fld = pred.path.split(".")[2]
    if fld not in field_names:
        raise TaskFlowError(f"{fld!r} is not a response field of {api_name!r}")


def _fresh_id(existing, prefix: str) -> str:
    i = len(existing)
    while True:
        i += 1
        cand = f"{prefix}{i:03d}"
        if cand not in existing:
            return cand


@dataclass
class Issue:
    code: str
    subject: str
    message: str
    blocking: bool = False


def validate_taskflow(tf: TaskFlow) -> list[Issue]:
    """Structural and semantic checks; issues are data, never exceptions."""
    issues: list[Issue] = []
    roots = [n for n in tf.nodes.values() if n.kind == KIND_ROOT]
    if len(roots) != 1 or (roots and roots[0].id != ROOT_ID):
        issues.append(Issue("root", ROOT_ID, "tree must have exactly one root node", True))
        return issues

    incoming: dict[str, int] = {}
    for e in tf.edges.values():
        if e.src not in tf.nodes or e.dst not in tf.nodes:
            issues.append(Issue("dangling-edge", e.id, "edge endpoint is not a node", True))
            continue
        incoming[e.dst] = incoming.get(e.dst, 0) + 1
    for nid, count in incoming.items():
        if count > 1:
            issues.append(Issue("multi-parent", nid, f"node has {count} incoming edges", True))
    if incoming.get(ROOT_ID):
        issues.append(Issue("root-incoming", ROOT_ID, "root must have no incoming edge", True))

    # reachability (also catches cycles detached from the root)
    seen = set()
    frontier = [ROOT_ID]
    while frontier:
        nid = frontier.pop()
        if nid in seen:
            continue
        seen.add(nid)
        frontier.extend(e.dst for e in tf.children(nid))
    for nid in tf.nodes:
        if nid not in seen:
            issues.append(Issue("unreachable", nid, "node not reachable from root", True))

    for node in tf.nodes.values():
        edges_out = tf.children(node.id)
        if node.kind == KIND_API and not edges_out:
            issues.append(Issue("api-no-children", node.id, "API node has no children", True))
        if node.kind == KIND_API and node.api not in tf.api_specs:
            issues.append(Issue("api-unknown", node.id, f"no spec for API {node.api!r}", True))
        if node.kind == KIND_STAFF and not node.text:
            issues.append(Issue("staff-no-text", node.id, "staff node has no response text", True))
        preds = [e for e in edges_out if isinstance(e.cond, Predicate)]
        if preds and node.kind != KIND_API:
            issues.append(
                Issue("predicate-unbound", node.id,
                      "predicate edges leave a node that is not an API call", False)
            )
        if node.kind == KIND_API and node.api in tf.api_specs:
            spec = tf.api_specs[node.api]
            for i, a in enumerate(preds):
                for b in preds[i + 1 :]:
                    if _predicates_overlap(a.cond, b.cond, spec):
                        issues.append(
                            Issue("predicate-overlap", f"{a.id}/{b.id}",
                                  "sibling predicates are both satisfiable by one stub response",
                                  False)
                        )
    return issues


def blocking_issues(tf: TaskFlow) -> list[Issue]:
    return [i for i in validate_taskflow(tf) if i.blocking]


def _predicates_overlap(a: Predicate, b: Predicate, spec: ApiSpec) -> bool:
    for resp in spec.responses():
        bindings = {f"api.{spec.name}.{k}": v for k, v in resp.items()}
        try:
            if a.evaluate(bindings) and b.evaluate(bindings):
                return True
        except TaskFlowError:
            continue
    return False


def leaf_paths(tf: TaskFlow) -> list[list[str]]:
    """Action-id read-offs of every root-to-terminal path (API nodes skipped)."""
    out: list[list[str]] = []

    def walk(nid: str, acc: list[str]) -> None:
        node = tf.nodes[nid]
        if node.action_id is not None:
            acc = acc + [node.action_id]
        if node.end or not tf.children(nid):
            out.append([SOS, *acc, EOS])
        for e in tf.children(nid):
            walk(e.dst, acc)

    walk(ROOT_ID, [])
    return out


# ---------------------------------------------------------------------------
# JSON wire format (the contract shared with the web UI)

def cond_to_json(cond):
    if isinstance(cond, Predicate):
        return {"path": cond.path, "op": cond.op, "lit": cond.lit}
    return cond


def cond_from_json(raw):
    if isinstance(raw, dict):
        return Predicate(path=raw["path"], op=raw["op"], lit=raw["lit"])
    if raw in (MAXPROB, ALWAYS):
        return raw
    raise TaskFlowError(f"unknown condition {raw!r}")


def api_spec_to_json(spec: ApiSpec) -> dict:
    return {
        "name": spec.name,
        "params": [{"name": n, "type": t} for n, t in spec.params],
        "response_fields": [{"name": n, "type": t} for n, t in spec.response_fields],
        "stub": {"rules": spec.stub_rules, "default": spec.stub_default},
    }


def api_spec_from_json(raw: dict) -> ApiSpec:
    return ApiSpec(
        name=raw["name"],
        params=[(p["name"], p["type"]) for p in raw["params"]],
        response_fields=[(p["name"], p["type"]) for p in raw["response_fields"]],
        stub_rules=raw.get("stub", {}).get("rules", []),
        stub_default=raw.get("stub", {}).get("default", {}),
    )


def taskflow_to_json(tf: TaskFlow) -> dict:
    nodes = []
    for nid in sorted(tf.nodes):
        n = tf.nodes[nid]
        rec = {"id": n.id, "kind": n.kind}
        if n.action_id is not None:
            rec["action_id"] = n.action_id
        if n.api is not None:
            rec["api"] = n.api
        if n.text is not None:
            rec["text"] = n.text
        if n.end:
            rec["end"] = True
        nodes.append(rec)
    edges = []
    for eid in sorted(tf.edges):
        e = tf.edges[eid]
        rec = {"id": e.id, "from": e.src, "to": e.dst, "cond": cond_to_json(e.cond)}
        if e.prob is not None:
            rec["prob"] = e.prob
        edges.append(rec)
    return {
        "version": tf.version,
        "scenario": tf.scenario,
        "nodes": nodes,
        "edges": edges,
        "api_specs": [api_spec_to_json(tf.api_specs[k]) for k in sorted(tf.api_specs)],
    }


def taskflow_from_json(doc: dict) -> TaskFlow:
    tf = TaskFlow(version=int(doc["version"]), scenario=doc.get("scenario", "default"))
    for raw in doc["nodes"]:
        tf.nodes[raw["id"]] = TaskFlowNode(
            id=raw["id"],
            kind=raw["kind"],
            action_id=raw.get("action_id"),
            api=raw.get("api"),
            text=raw.get("text"),
            end=bool(raw.get("end", False)),
        )
    for raw in doc["edges"]:
        tf.edges[raw["id"]] = TaskFlowEdge(
            id=raw["id"],
            src=raw["from"],
            dst=raw["to"],
            cond=cond_from_json(raw["cond"]),
            prob=raw.get("prob"),
        )
    for raw in doc.get("api_specs", []):
        tf.api_specs[raw["name"]] = api_spec_from_json(raw)
    return tf


def save_taskflow(tf: TaskFlow, path) -> None:
    Path(path).write_text(
        json.dumps(taskflow_to_json(tf), ensure_ascii=False, sort_keys=True, indent=1) + "\n",
        encoding="utf-8",
    )


def load_taskflow(path) -> TaskFlow:
    return taskflow_from_json(json.loads(Path(path).read_text(encoding="utf-8")))


class TaskFlowStore:
    """Single-writer, multi-reader version store with atomic swap."""

    def __init__(self, initial: TaskFlow | None = None):
        self._versions: dict[int, TaskFlow] = {}
        self._current: int | None = None
        if initial is not None:
            self.publish(initial)

    def publish(self, tf: TaskFlow) -> int:
        version = (self._current or 0) + 1
        tf = tf.clone()
        tf.version = version
        self._versions[version] = tf
        self._current = version
        return version

    @property
    def current_version(self) -> int | None:
        return self._current

    def get(self, version: int | None = None) -> TaskFlow:
        v = self._current if version is None else version
        if v is None or v not in self._versions:
            raise TaskFlowError(f"no TaskFlow version {version!r}")
        return self._versions[v]
