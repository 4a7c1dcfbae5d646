/** Typed client for the corpusforge API.  The fetch function is
 * injectable so tests run against a scripted double. */

import type {
  AnnotationPayload,
  ProjectSummary,
  RelationPayload,
  StatusPayload,
  WorkspaceView,
} from './types.js';

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private baseUrl: string,
    private token: string | null = null,
    private fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  setToken(token: string) {
    this.token = token;
  }

  private async call<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = { 'Content-Type': 'application/json' };
    if (this.token) headers['Authorization'] = `Bearer ${this.token}`;
    const resp = await this.fetchFn(`${this.baseUrl}/api/v1${path}`, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!resp.ok) {
      let message = `HTTP ${resp.status}`;
      try {
        const data = await resp.json();
        if (data && typeof data.error === 'string') message = data.error;
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(resp.status, message);
    }
    return (await resp.json()) as T;
  }

  login(userId: string, secret: string): Promise<{ token: string; user_id: string }> {
    return this.call('POST', '/sessions', { user_id: userId, secret });
  }

  listProjects(): Promise<ProjectSummary[]> {
    return this.call('GET', '/projects');
  }

  listWorkspaces(roundId: string): Promise<WorkspaceView[]> {
    return this.call('GET', `/rounds/${encodeURIComponent(roundId)}/workspaces`);
  }

  getWorkspace(workspaceId: string): Promise<WorkspaceView> {
    return this.call('GET', `/workspaces/${encodeURIComponent(workspaceId)}`);
  }

  createAnnotation(
    workspaceId: string,
    body: { start: number; length: number; entity_type: string; concept_id?: string | null },
  ): Promise<AnnotationPayload> {
    return this.call('POST', `/workspaces/${encodeURIComponent(workspaceId)}/annotations`, body);
  }

  annotateAllOccurrences(
    workspaceId: string,
    body: { surface: string; entity_type: string; concept_id?: string | null },
  ): Promise<{ created: AnnotationPayload[] }> {
    return this.call(
      'POST',
      `/workspaces/${encodeURIComponent(workspaceId)}/annotations/all-occurrences`,
      body,
    );
  }

  deleteAnnotation(workspaceId: string, annId: string): Promise<{ deleted: string }> {
    return this.call(
      'DELETE',
      `/workspaces/${encodeURIComponent(workspaceId)}/annotations/${encodeURIComponent(annId)}`,
    );
  }

  createRelation(
    workspaceId: string,
    body: { relation_type: string; nodes: { ann_id: string; role: string }[] },
  ): Promise<RelationPayload> {
    return this.call('POST', `/workspaces/${encodeURIComponent(workspaceId)}/relations`, body);
  }

  deleteRelation(workspaceId: string, relId: string): Promise<{ deleted: string }> {
    return this.call(
      'DELETE',
      `/workspaces/${encodeURIComponent(workspaceId)}/relations/${encodeURIComponent(relId)}`,
    );
  }

  updateStatus(
    workspaceId: string,
    body: { triage_label?: string | null; done?: boolean },
  ): Promise<StatusPayload> {
    return this.call('PATCH', `/workspaces/${encodeURIComponent(workspaceId)}/status`, body);
  }
}
