/** The block workspace: a list-based editor for programs and search problems.
 *
 * Three block kinds exist.  A DP-function block names a program and holds
 * a slot list of primitives and references to already-defined names; a
 * search-problem block carries a free-text hint and an optional goal; a
 * primitive block is one raw action.  Search-problem blocks never nest,
 * and function slots accept nothing but primitives and known names — the
 * two invariants the validator enforces.
 */

import { LibraryEntry, SubmitPayload } from "./types.js";

export interface PrimitiveBlock {
  kind: "primitive";
  action: string;
}

export interface RefBlock {
  kind: "ref";
  name: string;
}

export interface DpFunctionBlock {
  kind: "dp-function";
  name: string;
  hint: string;
  slots: Array<PrimitiveBlock | RefBlock>;
}

export interface SearchProblemBlock {
  kind: "search-problem";
  hint: string;
  goal: string[] | null;
}

export type WorkspaceBlock = PrimitiveBlock | RefBlock | DpFunctionBlock | SearchProblemBlock;

export interface Workspace {
  blocks: WorkspaceBlock[];
}

export function emptyWorkspace(): Workspace {
  return { blocks: [] };
}

export function addBlock(workspace: Workspace, block: WorkspaceBlock): Workspace {
  return { blocks: [...workspace.blocks, block] };
}

export function removeBlock(workspace: Workspace, index: number): Workspace {
  return { blocks: workspace.blocks.filter((_, i) => i !== index) };
}

/** Reorder the list: take the block at `from` and drop it at `to`. */
export function moveBlock(workspace: Workspace, from: number, to: number): Workspace {
  const blocks = [...workspace.blocks];
  if (from < 0 || from >= blocks.length || to < 0 || to >= blocks.length) {
    return workspace;
  }
  const [taken] = blocks.splice(from, 1);
  blocks.splice(to, 0, taken!);
  return { blocks };
}

/** Append a slot to a DP-function block. */
export function addSlot(
  workspace: Workspace,
  index: number,
  slot: PrimitiveBlock | RefBlock,
): Workspace {
  const blocks = workspace.blocks.map((block, i) => {
    if (i !== index || block.kind !== "dp-function") {
      return block;
    }
    return { ...block, slots: [...block.slots, slot] };
  });
  return { blocks };
}

export function removeSlot(workspace: Workspace, index: number, slotIndex: number): Workspace {
  const blocks = workspace.blocks.map((block, i) => {
    if (i !== index || block.kind !== "dp-function") {
      return block;
    }
    return { ...block, slots: block.slots.filter((_, j) => j !== slotIndex) };
  });
  return { blocks };
}

/** One workspace block for a library entry: programs come back as name
 * references, decompositions as ready-to-solve search problems. */
export function blockForLibraryEntry(entry: LibraryEntry): WorkspaceBlock {
  if (entry.kind === "program") {
    return { kind: "ref", name: entry.name };
  }
  return { kind: "search-problem", hint: entry.hint, goal: [...entry.goal] };
}

export function insertLibraryEntry(workspace: Workspace, entry: LibraryEntry): Workspace {
  return addBlock(workspace, blockForLibraryEntry(entry));
}

/** Invariant errors for a single block; empty when the block is well formed. */
export function validateBlock(
  block: WorkspaceBlock,
  knownNames: ReadonlySet<string>,
  knownActions: ReadonlySet<string>,
): string[] {
  const errors: string[] = [];
  switch (block.kind) {
    case "primitive":
      if (!knownActions.has(block.action)) {
        errors.push(`unknown action '${block.action}'`);
      }
      break;
    case "ref":
      if (!knownNames.has(block.name)) {
        errors.push(`unknown name '${block.name}'`);
      }
      break;
    case "dp-function":
      if (!block.name.trim()) {
        errors.push("function block needs a name");
      }
      for (const slot of block.slots) {
        if (slot.kind === "primitive" && !knownActions.has(slot.action)) {
          errors.push(`unknown action '${slot.action}'`);
        }
        if (slot.kind === "ref" && !knownNames.has(slot.name)) {
          errors.push(`unknown name '${slot.name}'`);
        }
      }
      if (block.slots.length === 0) {
        errors.push("function block needs at least one slot");
      }
      break;
    case "search-problem":
      if (!block.hint.trim() && (block.goal === null || block.goal.length === 0)) {
        errors.push("search block needs a hint or a goal");
      }
      break;
  }
  return errors;
}

/** Serialize the single executable root into a /submit payload.
 *
 * Exactly one root block must be present; primitives are not executable
 * on their own.  DP-function roots become define calls, references run
 * the named program, and search-problem roots become solve calls — with
 * a null goal when only the hint is filled in, which asks the service
 * for a goal suggestion instead of starting a solver.
 */
export function serializeRoot(
  workspace: Workspace,
  knownNames: ReadonlySet<string>,
  knownActions: ReadonlySet<string>,
): { payload: SubmitPayload } | { error: string } {
  if (workspace.blocks.length === 0) {
    return { error: "the workspace is empty" };
  }
  if (workspace.blocks.length > 1) {
    return { error: "exactly one root block can be submitted" };
  }
  const root = workspace.blocks[0]!;
  const errors = validateBlock(root, knownNames, knownActions);
  if (errors.length > 0) {
    return { error: errors.join("; ") };
  }
  switch (root.kind) {
    case "primitive":
      return { error: "a primitive is not executable on its own; wrap it in a function" };
    case "ref":
      return { payload: { kind: "run", name: root.name } };
    case "dp-function":
      return {
        payload: {
          kind: "define",
          name: root.name,
          hint: root.hint,
          body: root.slots.map((slot) => (slot.kind === "primitive" ? slot.action : slot.name)),
        },
      };
    case "search-problem":
      return {
        payload: {
          kind: "solve",
          hint: root.hint,
          goal: root.goal === null || root.goal.length === 0 ? null : root.goal,
        },
      };
  }
}
