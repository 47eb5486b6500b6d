/** Thin fetch client for the craftlite session service.
 *
 * Every method maps to one endpoint; the event stream is read over a
 * plain fetch so the same code runs in browsers and under test runners
 * that lack EventSource.
 */

import { SseParser } from "./sse.js";
import {
  CreateSessionOptions,
  LibraryEntry,
  Recipe,
  ServerEvent,
  ServiceError,
  Snapshot,
  SubmitPayload,
  SubmitResponse,
} from "./types.js";

export interface SessionClient {
  createSession(options: CreateSessionOptions): Promise<{ session_id: string; snapshot: Snapshot }>;
  getSnapshot(sessionId: string): Promise<Snapshot>;
  submit(sessionId: string, payload: SubmitPayload): Promise<SubmitResponse>;
  cancel(sessionId: string): Promise<{ cancelled: boolean }>;
  getLibrary(sessionId: string, filter?: string): Promise<LibraryEntry[]>;
  getRecipes(sessionId: string): Promise<Recipe[]>;
  openEvents(sessionId: string, onEvent: (event: ServerEvent) => void): () => void;
}

async function unwrap<T>(response: Response): Promise<T> {
  if (response.ok) {
    return (await response.json()) as T;
  }
  let code = "HttpError";
  let message = `${response.status} ${response.statusText}`;
  try {
    const body = await response.json();
    const detail = body?.detail;
    if (detail && typeof detail === "object") {
      code = detail.error ?? code;
      message = detail.message ?? message;
    }
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ServiceError(code, message, response.status);
}

export class ApiClient implements SessionClient {
  constructor(
    private readonly base: string,
    private readonly fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {}

  private url(path: string): string {
    return this.base.replace(/\/$/, "") + path;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.fetchFn(this.url(path), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    }).then((response) => unwrap<T>(response));
  }

  private get<T>(path: string): Promise<T> {
    return this.fetchFn(this.url(path)).then((response) => unwrap<T>(response));
  }

  createSession(options: CreateSessionOptions): Promise<{ session_id: string; snapshot: Snapshot }> {
    return this.post("/sessions", options);
  }

  getSnapshot(sessionId: string): Promise<Snapshot> {
    return this.get(`/sessions/${sessionId}`);
  }

  submit(sessionId: string, payload: SubmitPayload): Promise<SubmitResponse> {
    return this.post(`/sessions/${sessionId}/submit`, payload);
  }

  cancel(sessionId: string): Promise<{ cancelled: boolean }> {
    return this.post(`/sessions/${sessionId}/cancel`, {});
  }

  async getLibrary(sessionId: string, filter = ""): Promise<LibraryEntry[]> {
    const query = filter ? `?filter=${encodeURIComponent(filter)}` : "";
    const body = await this.get<{ entries: LibraryEntry[] }>(
      `/sessions/${sessionId}/library${query}`,
    );
    return body.entries;
  }

  async getRecipes(sessionId: string): Promise<Recipe[]> {
    const body = await this.get<{ recipes: Recipe[] }>(`/sessions/${sessionId}/recipes`);
    return body.recipes;
  }

  /** Subscribe to the session event stream; returns an unsubscribe. */
  openEvents(sessionId: string, onEvent: (event: ServerEvent) => void): () => void {
    const controller = new AbortController();
    const parser = new SseParser();
    const decoder = new TextDecoder();

    const pump = async () => {
      const response = await this.fetchFn(this.url(`/sessions/${sessionId}/events`), {
        signal: controller.signal,
      });
      if (!response.ok || response.body === null) {
        throw new ServiceError("StreamError", `event stream gave ${response.status}`, response.status);
      }
      const reader = response.body.getReader();
      for (;;) {
        const { done, value } = await reader.read();
        if (done) {
          return;
        }
        for (const frame of parser.feed(decoder.decode(value, { stream: true }))) {
          onEvent({ kind: frame.event, data: JSON.parse(frame.data) });
        }
      }
    };

    pump().catch((error) => {
      if (!controller.signal.aborted) {
        onEvent({ kind: "stream_error", data: { message: String(error) } });
      }
    });
    return () => controller.abort();
  }
}
