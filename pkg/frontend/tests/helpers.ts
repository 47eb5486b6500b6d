import {
  CreateSessionOptions,
  LibraryEntry,
  Recipe,
  ServerEvent,
  ServiceError,
  Snapshot,
  SubmitPayload,
  SubmitResponse,
} from "../src/types.js";
import { SessionClient } from "../src/api.js";

/** Poll until `check` stops throwing (or returns true), else time out.
 * Async checks are awaited, so a promise of false keeps polling. */
export async function waitFor(
  check: () => unknown,
  { timeout = 15_000, interval = 10 }: { timeout?: number; interval?: number } = {},
): Promise<void> {
  const deadline = Date.now() + timeout;
  let lastError: unknown = new Error("waitFor never ran");
  while (Date.now() < deadline) {
    try {
      const result = await check();
      if (result !== false) {
        return;
      }
      lastError = new Error("condition returned false");
    } catch (error) {
      lastError = error;
    }
    await new Promise((resolve) => setTimeout(resolve, interval));
  }
  throw lastError;
}

export function baseSnapshot(overrides: Partial<Snapshot> = {}): Snapshot {
  return {
    session_id: "fake-session",
    condition: "np",
    seed: 0,
    r: 0,
    goals: [{ item: "cloth", built: 0 }],
    inventory: { wool: 200, wood: 200 },
    input_slots: [],
    derived_output: null,
    remaining_seconds: 600,
    submissions: 0,
    solver_active: false,
    library_size: 0,
    expired: false,
    ...overrides,
  };
}

export const FAKE_RECIPES: Recipe[] = [
  { item: "string", inputs: ["wool", "wool"] },
  { item: "cloth", inputs: ["string", "string"] },
  { item: "clay", inputs: ["sand", "pickaxe"] },
  { item: "clock", inputs: ["gear", "wire"] },
];

/** In-memory stand-in for the service, with scripted answers and a hand
 * on the event stream so tests can push events at will. */
export class FakeClient implements SessionClient {
  snapshot: Snapshot = baseSnapshot();
  recipes: Recipe[] = FAKE_RECIPES;
  entries: LibraryEntry[] = [];
  submitted: Array<SubmitPayload> = [];
  submitAnswers: SubmitResponse[] = [];
  submitErrors: Array<{ code: string; message: string; status: number } | null> = [];
  cancelAnswers: boolean[] = [];
  cancelled = 0;
  libraryRequests: string[] = [];
  streams = 0;
  private listener: ((event: ServerEvent) => void) | null = null;

  push(event: ServerEvent): void {
    this.listener?.(event);
  }

  async createSession(options: CreateSessionOptions): Promise<{ session_id: string; snapshot: Snapshot }> {
    this.snapshot = { ...this.snapshot, condition: options.condition as Snapshot["condition"] };
    return { session_id: this.snapshot.session_id, snapshot: this.snapshot };
  }

  async getSnapshot(): Promise<Snapshot> {
    return this.snapshot;
  }

  async submit(_sid: string, payload: SubmitPayload): Promise<SubmitResponse> {
    this.submitted.push(payload);
    const error = this.submitErrors.shift() ?? null;
    if (error !== null) {
      throw new ServiceError(error.code, error.message, error.status);
    }
    return this.submitAnswers.shift() ?? {};
  }

  async cancel(): Promise<{ cancelled: boolean }> {
    this.cancelled += 1;
    return { cancelled: this.cancelAnswers.shift() ?? true };
  }

  async getLibrary(_sid: string, filter = ""): Promise<LibraryEntry[]> {
    this.libraryRequests.push(filter);
    return this.entries.filter(
      (entry) => !filter || entry.name.includes(filter) || entry.hint.includes(filter),
    );
  }

  async getRecipes(): Promise<Recipe[]> {
    return this.recipes;
  }

  openEvents(_sid: string, onEvent: (event: ServerEvent) => void): () => void {
    this.streams += 1;
    this.listener = onEvent;
    queueMicrotask(() => this.push({ kind: "snapshot", data: this.snapshot }));
    return () => {
      if (this.listener === onEvent) {
        this.listener = null;
      }
    };
  }
}

export function click(root: HTMLElement, testId: string): void {
  const node = root.querySelector(`[data-testid="${testId}"]`);
  if (node === null) {
    throw new Error(`no element ${testId}`);
  }
  (node as HTMLElement).click();
}

export function setValue(root: HTMLElement, testId: string, value: string): void {
  const node = root.querySelector(`[data-testid="${testId}"]`) as
    | HTMLInputElement
    | HTMLSelectElement
    | HTMLTextAreaElement
    | null;
  if (node === null) {
    throw new Error(`no element ${testId}`);
  }
  node.value = value;
  node.dispatchEvent(new Event(node instanceof HTMLSelectElement ? "change" : "input", { bubbles: true }));
}

export function text(root: HTMLElement, testId: string): string {
  const node = root.querySelector(`[data-testid="${testId}"]`);
  if (node === null) {
    throw new Error(`no element ${testId}`);
  }
  return node.textContent ?? "";
}

export function hidden(root: HTMLElement, testId: string): boolean {
  const node = root.querySelector(`[data-testid="${testId}"]`) as HTMLElement | null;
  if (node === null) {
    throw new Error(`no element ${testId}`);
  }
  return node.hidden;
}
