/** Pure view model for one session snapshot.
 *
 * The snapshot lists only items whose count is nonzero; the view joins
 * it with the session's item universe so every known item renders a row,
 * zero counts included.  Submission is enabled while the timer runs and
 * the session has not expired.
 */

import { Recipe, Snapshot } from "./types.js";

export interface InventoryRow {
  item: string;
  count: number;
}

export interface GoalRow {
  item: string;
  built: number;
  done: boolean;
}

export interface SessionView {
  sessionId: string;
  condition: string;
  inventory: InventoryRow[];
  inputSlots: string[];
  derivedOutput: string | null;
  goals: GoalRow[];
  remainingSeconds: number;
  timerLabel: string;
  submissionsEnabled: boolean;
  submissions: number;
  solverActive: boolean;
  librarySize: number;
  recipes: Recipe[];
}

/** Every item the session can mention: recipe outputs plus their inputs. */
export function itemUniverse(recipes: Recipe[], snapshot?: Snapshot): string[] {
  const items = new Set<string>();
  for (const recipe of recipes) {
    items.add(recipe.item);
    for (const input of recipe.inputs) {
      items.add(input);
    }
  }
  if (snapshot !== undefined) {
    for (const item of Object.keys(snapshot.inventory)) {
      items.add(item);
    }
    for (const goal of snapshot.goals) {
      items.add(goal.item);
    }
  }
  return [...items].sort();
}

function formatTimer(seconds: number): string {
  const whole = Math.max(0, Math.floor(seconds));
  const minutes = Math.floor(whole / 60);
  const rest = whole % 60;
  return `${minutes}:${rest.toString().padStart(2, "0")}`;
}

export function renderSession(snapshot: Snapshot, recipes: Recipe[]): SessionView {
  const inventory = itemUniverse(recipes, snapshot).map((item) => ({
    item,
    count: snapshot.inventory[item] ?? 0,
  }));
  return {
    sessionId: snapshot.session_id,
    condition: snapshot.condition,
    inventory,
    inputSlots: [...snapshot.input_slots],
    derivedOutput: snapshot.derived_output,
    goals: snapshot.goals.map((goal) => ({
      item: goal.item,
      built: goal.built,
      done: goal.built > 0,
    })),
    remainingSeconds: snapshot.remaining_seconds,
    timerLabel: formatTimer(snapshot.remaining_seconds),
    submissionsEnabled: snapshot.remaining_seconds > 0 && !snapshot.expired,
    submissions: snapshot.submissions,
    solverActive: snapshot.solver_active,
    librarySize: snapshot.library_size,
    recipes,
  };
}
