/** Wire types for the flow-mining service HTTP API. */

export interface TurnResult {
  responses: string[];
  api_calls: { name: string; params: Record<string, unknown>; response: Record<string, unknown> }[];
  path_delta: string[];
  closed: boolean;
  fallback: boolean;
}

export interface SessionOpened {
  session_id: string;
  taskflow_version: number;
}

export interface TranscriptEntry {
  speaker: "user" | "staff";
  text: string;
  node: string | null;
}

export interface SessionView {
  session_id: string;
  taskflow_version: number;
  current: string;
  closed: boolean;
  transcript: TranscriptEntry[];
}

export type NodeKind = "root" | "user" | "staff" | "api";

export interface FlowNode {
  id: string;
  kind: NodeKind;
  action_id?: string;
  api?: string;
  text?: string;
  end?: boolean;
}

export interface PredicateCond {
  path: string;
  op: string;
  lit: unknown;
}

export type EdgeCond = "maxprob" | "always" | PredicateCond;

export interface FlowEdge {
  id: string;
  from: string;
  to: string;
  cond: EdgeCond;
  prob?: number;
}

export interface ApiSpecDoc {
  name: string;
  params: { name: string; type: string }[];
  response_fields: { name: string; type: string }[];
  stub: { rules: unknown[]; default: Record<string, unknown> };
}

export interface FlowDocument {
  version: number;
  scenario: string;
  nodes: FlowNode[];
  edges: FlowEdge[];
  api_specs: ApiSpecDoc[];
}

export interface ValidationIssue {
  code: string;
  subject: string;
  message: string;
}

export interface ActionSummary {
  id: string;
  role: string;
  name: string;
  canonical_id: string;
  member_ids: string[];
}

export function isPredicate(cond: EdgeCond): cond is PredicateCond {
  return typeof cond === "object" && cond !== null;
}

export function condLabel(cond: EdgeCond): string {
  if (isPredicate(cond)) return `${cond.path} ${cond.op} ${JSON.stringify(cond.lit)}`;
  return cond;
}
