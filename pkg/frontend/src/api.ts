/**
 * Thin typed client for the storydeck session API.
 * Every UI mutation maps to exactly one call here; the UI holds no
 * authoritative state.
 */

import type {
  ApiErrorBody,
  Deck,
  MetaRelation,
  SelectionResult,
  SessionState,
  SubmitChartResult,
} from "./types.js";

export class ApiError extends Error {
  code: string;
  status: number;

  constructor(status: number, body: ApiErrorBody) {
    super(body.message);
    this.code = body.code;
    this.status = status;
  }
}

async function asJson<T>(resp: Response): Promise<T> {
  if (!resp.ok) {
    let body: ApiErrorBody = { code: "http_error", message: resp.statusText, detail: {} };
    try {
      body = (await resp.json()) as ApiErrorBody;
    } catch {
      // non-JSON error body: keep the status text
    }
    throw new ApiError(resp.status, body);
  }
  return (await resp.json()) as T;
}

export class ApiClient {
  constructor(readonly baseUrl: string = "") {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return fetch(this.url(path), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    }).then((r) => asJson<T>(r));
  }

  createSession(body: {
    dataset_csv: string;
    dataset_name?: string;
    knowledge_docs?: { doc_id: string; title: string; body: string }[];
    intent?: string;
  }): Promise<{ session_id: string; revision: number }> {
    return this.post("/api/sessions", body);
  }

  getSession(sessionId: string): Promise<SessionState> {
    return fetch(this.url(`/api/sessions/${sessionId}`)).then((r) =>
      asJson<SessionState>(r),
    );
  }

  submitChart(sessionId: string, spec: unknown): Promise<SubmitChartResult> {
    return this.post(`/api/sessions/${sessionId}/charts`, spec);
  }

  selectFact(
    sessionId: string,
    factId: string,
    metaRelationId?: string,
  ): Promise<SelectionResult> {
    return this.post(`/api/sessions/${sessionId}/selections`, {
      fact_id: factId,
      meta_relation_id: metaRelationId ?? null,
    });
  }

  patchRelation(
    sessionId: string,
    relationId: string,
    patch: { type_description?: string; status?: "accepted" | "rejected" },
  ): Promise<{ relation: MetaRelation; revision: number }> {
    return fetch(this.url(`/api/sessions/${sessionId}/meta-relations/${relationId}`), {
      method: "PATCH",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(patch),
    }).then((r) => asJson(r));
  }

  patchDeck(
    sessionId: string,
    op: Record<string, unknown>,
  ): Promise<{ deck: Deck; revision: number }> {
    return fetch(this.url(`/api/sessions/${sessionId}/deck`), {
      method: "PATCH",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(op),
    }).then((r) => asJson(r));
  }

  putIntent(sessionId: string, intent: string): Promise<{ intent: string; revision: number }> {
    return fetch(this.url(`/api/sessions/${sessionId}/intent`), {
      method: "PUT",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ intent }),
    }).then((r) => asJson(r));
  }

  exportUrl(sessionId: string, format: string, theme: string): string {
    return this.url(
      `/api/sessions/${sessionId}/export?format=${encodeURIComponent(format)}&theme=${encodeURIComponent(theme)}`,
    );
  }

  async fetchExport(sessionId: string, format: string, theme: string): Promise<Blob> {
    const resp = await fetch(this.exportUrl(sessionId, format, theme));
    if (!resp.ok) {
      throw new ApiError(resp.status, (await resp.json()) as ApiErrorBody);
    }
    return resp.blob();
  }
}
