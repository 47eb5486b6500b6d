/** Wire types for the craftlite session service. */

export interface GoalView {
  item: string;
  built: number;
}

export interface Snapshot {
  session_id: string;
  condition: "dp" | "ds" | "np";
  seed: number;
  r: number;
  goals: GoalView[];
  inventory: Record<string, number>;
  input_slots: string[];
  derived_output: string | null;
  remaining_seconds: number;
  submissions: number;
  solver_active: boolean;
  library_size: number;
  expired: boolean;
}

export interface Recipe {
  item: string;
  inputs: string[];
}

export interface LibraryStep {
  kind: "action" | "sub";
  action?: string;
  goal?: string[];
  hint?: string;
}

export interface LibraryEntry {
  kind: "program" | "decomposition";
  name: string;
  hint: string;
  goal: string[];
  body?: string[];
  steps?: LibraryStep[];
  uses?: number;
}

export interface Suggestion {
  goal: string[];
  matched_hint: string;
}

export interface CreateSessionOptions {
  condition: string;
  seed?: number;
  r?: number;
  duration_seconds?: number;
  library?: string;
}

export interface SubmitPayload {
  kind: "define" | "run" | "solve" | "clear";
  name?: string;
  body?: string[];
  hint?: string;
  goal?: string[] | null;
}

/** Union of the answers /submit can give, depending on the kind. */
export interface SubmitResponse {
  // define
  defined?: string;
  library_size?: number;
  // run
  status?: string;
  actions?: string[];
  error_count?: number;
  snapshot?: Snapshot;
  // hint-only solve
  suggestion?: Suggestion | null;
  // goal-bearing solve
  accepted?: boolean;
  budget?: number;
}

export interface SolverDone {
  status: string;
  actions: string[];
  expansions: number;
  library_size: number;
}

export interface ProgressData {
  expansions: number;
  candidates: number;
}

export type ServerEvent =
  | { kind: "snapshot"; data: Snapshot }
  | { kind: "state"; data: Snapshot }
  | { kind: "progress"; data: ProgressData }
  | { kind: "solver_done"; data: SolverDone }
  | { kind: "timer"; data: { remaining_seconds: number } }
  | { kind: "session_end"; data: { reason: string } }
  | { kind: string; data: Record<string, unknown> };

/** A non-2xx service answer, with the error code the service names. */
export class ServiceError extends Error {
  readonly code: string;
  readonly status: number;

  constructor(code: string, message: string, status: number) {
    super(message);
    this.name = "ServiceError";
    this.code = code;
    this.status = status;
  }
}
