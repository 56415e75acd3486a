/** Flow editor: client-side edits over a candidate tree document,
 * submitted whole via PUT with optimistic versioning.
 *
 * Layout positions are kept outside the document proper, so the
 * submission is exactly the (edited) server JSON — an unedited document
 * round-trips byte-for-byte.
 */

import { ApiClient, ApiError } from "./api";
import type {
  ApiSpecDoc,
  EdgeCond,
  FlowDocument,
  FlowEdge,
  PredicateCond,
  ValidationIssue,
} from "./types";
import { condLabel, isPredicate } from "./types";

export interface NodePosition {
  x: number;
  y: number;
}

export type Layout = Map<string, NodePosition>;

const clone = <T>(value: T): T => JSON.parse(JSON.stringify(value)) as T;

/** Simple tidy-tree layout: depth → y, leaf order → x. */
export function computeLayout(doc: FlowDocument): Layout {
  const children = new Map<string, FlowEdge[]>();
  for (const edge of doc.edges) {
    const list = children.get(edge.from) ?? [];
    list.push(edge);
    children.set(edge.from, list);
  }
  for (const list of children.values()) list.sort((a, b) => (a.to < b.to ? -1 : 1));

  const layout: Layout = new Map();
  let nextLeafX = 0;
  const place = (nodeId: string, depth: number): number => {
    const kids = children.get(nodeId) ?? [];
    let x: number;
    if (kids.length === 0) {
      x = nextLeafX++;
    } else {
      const xs = kids.map((e) => place(e.to, depth + 1));
      x = (Math.min(...xs) + Math.max(...xs)) / 2;
    }
    layout.set(nodeId, { x: x * 160 + 80, y: depth * 110 + 50 });
    return x;
  };
  if (doc.nodes.some((n) => n.id === "root")) place("root", 0);
  // orphans (should not happen on valid docs) still get a spot
  for (const node of doc.nodes) {
    if (!layout.has(node.id)) layout.set(node.id, { x: nextLeafX++ * 160 + 80, y: 50 });
  }
  return layout;
}

export interface FlowState {
  /** Last document fetched from the server (pristine). */
  base: FlowDocument | null;
  /** Editable candidate; starts as a deep clone of base. */
  candidate: FlowDocument | null;
  layout: Layout;
  selected: { type: "node" | "edge"; id: string } | null;
  issues: ValidationIssue[];
  conflict: string | null;
  publishedVersion: number | null;
}

export class FlowEditor {
  state: FlowState = {
    base: null,
    candidate: null,
    layout: new Map(),
    selected: null,
    issues: [],
    conflict: null,
    publishedVersion: null,
  };

  constructor(
    private readonly api: ApiClient,
    private readonly onChange: (state: FlowState) => void = () => {},
  ) {}

  private emit(): void {
    this.onChange(this.state);
  }

  async load(version?: number): Promise<void> {
    const doc = await this.api.getTaskflow(version);
    this.state = {
      base: doc,
      candidate: clone(doc),
      layout: computeLayout(doc),
      selected: null,
      issues: [],
      conflict: null,
      publishedVersion: null,
    };
    this.emit();
  }

  get dirty(): boolean {
    if (!this.state.base || !this.state.candidate) return false;
    return JSON.stringify(this.state.base) !== JSON.stringify(this.state.candidate);
  }

  select(type: "node" | "edge", id: string): void {
    this.state.selected = { type, id };
    this.emit();
  }

  /** The exact document that PUT will carry: candidate, no layout, no UI state. */
  submission(): FlowDocument {
    if (!this.state.candidate) throw new Error("no document loaded");
    return clone(this.state.candidate);
  }

  setEdgeCondition(edgeId: string, cond: EdgeCond): void {
    const doc = this.state.candidate;
    if (!doc) return;
    const edge = doc.edges.find((e) => e.id === edgeId);
    if (!edge) throw new Error(`no edge ${edgeId}`);
    edge.cond = cond;
    if (isPredicate(cond) || cond === "always") delete edge.prob;
    this.state.issues = [];
    this.emit();
  }

  private freshId(prefix: "n" | "e"): string {
    const doc = this.state.candidate!;
    const taken = new Set([...doc.nodes.map((n) => n.id), ...doc.edges.map((e) => e.id)]);
    let i = doc.nodes.length + doc.edges.length;
    for (;;) {
      const id = `${prefix}${String(i).padStart(3, "0")}`;
      if (!taken.has(id)) return id;
      i += 1;
    }
  }

  /** Splice an API node under a user node, rewiring chosen children
   * behind response-field predicates (mirrors the server-side edit). */
  insertApiNode(
    parentId: string,
    spec: ApiSpecDoc,
    rewires: { childId: string; cond: PredicateCond }[],
  ): string {
    const doc = this.state.candidate;
    if (!doc) throw new Error("no document loaded");
    if (rewires.length === 0) throw new Error("at least one child must be rewired");
    const apiId = this.freshId("n");
    doc.nodes.push({ id: apiId, kind: "api", api: spec.name });
    if (!doc.api_specs.some((s) => s.name === spec.name)) doc.api_specs.push(clone(spec));
    for (const { childId, cond } of rewires) {
      const edge = doc.edges.find((e) => e.from === parentId && e.to === childId);
      if (!edge) throw new Error(`no edge ${parentId} -> ${childId}`);
      edge.from = apiId;
      edge.cond = cond;
      delete edge.prob;
    }
    doc.edges.push({ id: this.freshId("e"), from: parentId, to: apiId, cond: "always" });
    this.state.layout = computeLayout(doc);
    this.state.issues = [];
    this.emit();
    return apiId;
  }

  discardEdits(): void {
    if (!this.state.base) return;
    this.state.candidate = clone(this.state.base);
    this.state.layout = computeLayout(this.state.base);
    this.state.issues = [];
    this.state.conflict = null;
    this.emit();
  }

  async submit(): Promise<number | null> {
    const doc = this.submission();
    this.state.issues = [];
    this.state.conflict = null;
    try {
      const { version } = await this.api.putTaskflow(doc);
      this.state.publishedVersion = version;
      await this.load(version);
      return version;
    } catch (err) {
      if (err instanceof ApiError && err.status === 422) {
        this.state.issues = err.issues;
      } else if (err instanceof ApiError && err.status === 409) {
        this.state.conflict = err.message;
      } else {
        this.state.conflict = err instanceof Error ? err.message : String(err);
      }
      this.emit();
      return null;
    }
  }

  issuesFor(subject: string): ValidationIssue[] {
    return this.state.issues.filter((i) => i.subject === subject);
  }
}

const NODE_W = 130;
const NODE_H = 42;
const SVG_NS = "http://www.w3.org/2000/svg";

export function renderFlow(root: HTMLElement, editor: FlowEditor): void {
  const { candidate, layout, selected } = editor.state;
  root.innerHTML = "";
  if (!candidate) {
    root.textContent = "No flow loaded.";
    return;
  }

  const header = document.createElement("div");
  header.className = "flow-header";
  header.textContent =
    `version ${candidate.version}` + (editor.dirty ? " (edited, not submitted)" : "");
  root.appendChild(header);

  if (editor.state.conflict) {
    const banner = document.createElement("div");
    banner.className = "error-banner";
    banner.textContent = editor.state.conflict;
    root.appendChild(banner);
  }

  const maxX = Math.max(...[...layout.values()].map((p) => p.x)) + NODE_W;
  const maxY = Math.max(...[...layout.values()].map((p) => p.y)) + NODE_H + 20;
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${maxX} ${maxY}`);
  svg.setAttribute("class", "flow-canvas");

  for (const edge of candidate.edges) {
    const a = layout.get(edge.from);
    const b = layout.get(edge.to);
    if (!a || !b) continue;
    const line = document.createElementNS(SVG_NS, "line");
    line.setAttribute("x1", String(a.x));
    line.setAttribute("y1", String(a.y + NODE_H / 2));
    line.setAttribute("x2", String(b.x));
    line.setAttribute("y2", String(b.y - NODE_H / 2));
    line.setAttribute("class", "edge-line");
    svg.appendChild(line);

    const label = document.createElementNS(SVG_NS, "text");
    label.setAttribute("x", String((a.x + b.x) / 2));
    label.setAttribute("y", String((a.y + b.y) / 2));
    const hasIssue = editor.issuesFor(edge.id).length > 0;
    label.setAttribute(
      "class",
      "edge-label" +
        (selected?.type === "edge" && selected.id === edge.id ? " selected" : "") +
        (hasIssue ? " has-issue" : ""),
    );
    label.dataset.edge = edge.id;
    label.textContent =
      condLabel(edge.cond) + (edge.prob !== undefined ? ` p=${edge.prob.toFixed(3)}` : "");
    label.addEventListener("click", () => editor.select("edge", edge.id));
    svg.appendChild(label);
  }

  for (const node of candidate.nodes) {
    const pos = layout.get(node.id);
    if (!pos) continue;
    const group = document.createElementNS(SVG_NS, "g");
    const hasIssue = editor.issuesFor(node.id).length > 0;
    group.setAttribute(
      "class",
      `flow-node kind-${node.kind}` +
        (selected?.type === "node" && selected.id === node.id ? " selected" : "") +
        (hasIssue ? " has-issue" : ""),
    );
    group.dataset.node = node.id;
    const rect = document.createElementNS(SVG_NS, "rect");
    rect.setAttribute("x", String(pos.x - NODE_W / 2));
    rect.setAttribute("y", String(pos.y - NODE_H / 2));
    rect.setAttribute("width", String(NODE_W));
    rect.setAttribute("height", String(NODE_H));
    rect.setAttribute("rx", "6");
    const text = document.createElementNS(SVG_NS, "text");
    text.setAttribute("x", String(pos.x));
    text.setAttribute("y", String(pos.y + 4));
    text.setAttribute("text-anchor", "middle");
    text.textContent = node.action_id ?? node.api ?? node.kind;
    group.append(rect, text);
    group.addEventListener("click", () => editor.select("node", node.id));
    svg.appendChild(group);
  }
  root.appendChild(svg);

  root.appendChild(renderInspector(candidate, editor));

  if (editor.state.issues.length > 0) {
    const list = document.createElement("ul");
    list.className = "issue-list";
    for (const issue of editor.state.issues) {
      const item = document.createElement("li");
      item.className = "issue";
      item.dataset.subject = issue.subject;
      item.textContent = `${issue.code} [${issue.subject}]: ${issue.message}`;
      list.appendChild(item);
    }
    root.appendChild(list);
  }

  const actions = document.createElement("div");
  actions.className = "flow-actions";
  const submit = document.createElement("button");
  submit.textContent = "Submit";
  submit.disabled = !editor.dirty;
  submit.addEventListener("click", () => void editor.submit());
  const discard = document.createElement("button");
  discard.textContent = "Discard edits";
  discard.disabled = !editor.dirty;
  discard.addEventListener("click", () => editor.discardEdits());
  actions.append(submit, discard);
  root.appendChild(actions);
}

function renderInspector(doc: FlowDocument, editor: FlowEditor): HTMLElement {
  const panel = document.createElement("div");
  panel.className = "inspector";
  const selected = editor.state.selected;
  if (!selected) {
    panel.textContent = "Select a node or edge to inspect it.";
    return panel;
  }
  if (selected.type === "node") {
    const node = doc.nodes.find((n) => n.id === selected.id);
    if (!node) return panel;
    const dl = document.createElement("dl");
    const rows: [string, string][] = [
      ["id", node.id],
      ["kind", node.kind],
      ["action", node.action_id ?? "—"],
      ["api", node.api ?? "—"],
      ["text", node.text ?? "—"],
      ["terminal", node.end ? "yes" : "no"],
    ];
    for (const [term, value] of rows) {
      const dt = document.createElement("dt");
      dt.textContent = term;
      const dd = document.createElement("dd");
      dd.textContent = value;
      dl.append(dt, dd);
    }
    panel.appendChild(dl);
    return panel;
  }
  const edge = doc.edges.find((e) => e.id === selected.id);
  if (!edge) return panel;
  const title = document.createElement("div");
  title.textContent = `edge ${edge.id}: ${edge.from} → ${edge.to}`;
  panel.appendChild(title);

  const form = document.createElement("form");
  form.className = "cond-form";
  const kind = document.createElement("select");
  for (const option of ["maxprob", "always", "predicate"]) {
    const el = document.createElement("option");
    el.value = option;
    el.textContent = option;
    kind.appendChild(el);
  }
  kind.value = isPredicate(edge.cond) ? "predicate" : edge.cond;
  const path = document.createElement("input");
  path.placeholder = "api.Name.field";
  const op = document.createElement("input");
  op.placeholder = "==";
  const lit = document.createElement("input");
  lit.placeholder = "literal (JSON)";
  if (isPredicate(edge.cond)) {
    path.value = edge.cond.path;
    op.value = edge.cond.op;
    lit.value = JSON.stringify(edge.cond.lit);
  }
  const apply = document.createElement("button");
  apply.type = "submit";
  apply.textContent = "Apply";
  form.append(kind, path, op, lit, apply);
  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    if (kind.value === "predicate") {
      editor.setEdgeCondition(edge.id, {
        path: path.value,
        op: op.value || "==",
        lit: lit.value ? (JSON.parse(lit.value) as unknown) : true,
      });
    } else {
      editor.setEdgeCondition(edge.id, kind.value as "maxprob" | "always");
    }
  });
  panel.appendChild(form);
  return panel;
}
