/** Typed client over the service's JSON endpoints.
 *
 * The fetch implementation is injectable so tests can run against a fake
 * transport and the app can point at any host.
 */

import type {
  ActionSummary,
  FlowDocument,
  SessionOpened,
  SessionView,
  TurnResult,
  ValidationIssue,
} from "./types";

export class ApiError extends Error {
  readonly status: number;
  readonly issues: ValidationIssue[];

  constructor(status: number, message: string, issues: ValidationIssue[] = []) {
    super(message);
    this.status = status;
    this.issues = issues;
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

async function parseError(status: number, body: unknown): Promise<never> {
  if (body && typeof body === "object" && "detail" in body) {
    const detail = (body as { detail: unknown }).detail;
    if (detail && typeof detail === "object" && "issues" in detail) {
      const issues = (detail as { issues: unknown }).issues;
      if (Array.isArray(issues)) {
        const structured = issues.filter(
          (i): i is ValidationIssue => typeof i === "object" && i !== null && "code" in i,
        );
        throw new ApiError(status, "validation failed", structured);
      }
    }
    throw new ApiError(status, String(detail));
  }
  throw new ApiError(status, `request failed with status ${status}`);
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method, headers: {} };
    if (body !== undefined) {
      init.headers = { "Content-Type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const res = await this.fetchImpl(this.baseUrl + path, init);
    const payload = await res.json().catch(() => undefined);
    if (!res.ok) await parseError(res.status, payload);
    return payload as T;
  }

  health(): Promise<{ status: string; taskflow_version: number | null }> {
    return this.request("GET", "/healthz");
  }

  openSession(): Promise<SessionOpened> {
    return this.request("POST", "/api/v1/sessions");
  }

  sendMessage(sessionId: string, text: string): Promise<TurnResult> {
    return this.request("POST", `/api/v1/sessions/${sessionId}/messages`, { text });
  }

  getSession(sessionId: string): Promise<SessionView> {
    return this.request("GET", `/api/v1/sessions/${sessionId}`);
  }

  getTaskflow(version?: number): Promise<FlowDocument> {
    const query = version === undefined ? "" : `?version=${version}`;
    return this.request("GET", `/api/v1/taskflow${query}`);
  }

  putTaskflow(doc: FlowDocument): Promise<{ version: number }> {
    return this.request("PUT", "/api/v1/taskflow", doc);
  }

  getActions(): Promise<ActionSummary[]> {
    return this.request("GET", "/api/v1/actions");
  }

  runPipeline(): Promise<Record<string, unknown>> {
    return this.request("POST", "/api/v1/pipeline/run");
  }
}
