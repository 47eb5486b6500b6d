/** DOM shell for one live session.
 *
 * The app owns a single session view: a create form, the state panels
 * (inventory, slots, goals, timer, recipes), the block workspace, the
 * solver panel with cancel, a library modal, and the two dialogs the
 * submit flow can open (goal suggestion confirm, manual goal picker).
 *
 * World state changes only through service submissions; every edit the
 * user makes before submitting stays local to the workspace model.  The
 * view keeps exactly one event-stream subscription per open session and
 * can rebuild itself from a fresh snapshot plus replayed events.
 */

import { SessionClient } from "./api.js";
import {
  LibraryEntry,
  ProgressData,
  Recipe,
  ServiceError,
  ServerEvent,
  Snapshot,
  SolverDone,
  SubmitPayload,
  Suggestion,
} from "./types.js";
import { itemUniverse, renderSession } from "./view.js";
import {
  DpFunctionBlock,
  SearchProblemBlock,
  Workspace,
  WorkspaceBlock,
  addBlock,
  addSlot,
  emptyWorkspace,
  insertLibraryEntry,
  moveBlock,
  removeBlock,
  removeSlot,
  serializeRoot,
} from "./workspace.js";

export interface AppState {
  sessionId: string | null;
  snapshot: Snapshot | null;
  recipes: Recipe[];
  workspace: Workspace;
  knownNames: Set<string>;
  solverRunning: boolean;
  progress: ProgressData | null;
  lastSolver: SolverDone | null;
  suggestion: { suggestion: Suggestion; hint: string } | null;
  goalPicker: { hint: string } | null;
  libraryOpen: boolean;
  libraryFilter: string;
  libraryEntries: LibraryEntry[];
  error: string | null;
  notice: string | null;
}

export interface App {
  state: AppState;
  reconnect(): void;
  close(): void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  if (text) {
    node.textContent = text;
  }
  return node;
}

function option(value: string, label = value): HTMLOptionElement {
  const node = el("option", { value }, label);
  return node;
}

export function mount(root: HTMLElement, client: SessionClient): App {
  const state: AppState = {
    sessionId: null,
    snapshot: null,
    recipes: [],
    workspace: emptyWorkspace(),
    knownNames: new Set(),
    solverRunning: false,
    progress: null,
    lastSolver: null,
    suggestion: null,
    goalPicker: null,
    libraryOpen: false,
    libraryFilter: "",
    libraryEntries: [],
    error: null,
    notice: null,
  };
  let closeStream: (() => void) | null = null;

  root.innerHTML = `
    <section data-testid="create-panel">
      <h2>New session</h2>
      <label>condition
        <select data-testid="create-condition">
          <option value="np">np (planner)</option>
          <option value="ds">ds (synthesis)</option>
          <option value="dp">dp (dictation)</option>
        </select>
      </label>
      <label>seed <input data-testid="create-seed" type="number" value="0"></label>
      <label>r <input data-testid="create-r" type="number" step="0.05" value="0"></label>
      <label>library snapshot
        <textarea data-testid="create-library" rows="3" placeholder="optional serialized library"></textarea>
      </label>
      <button data-testid="create-session">Start session</button>
    </section>
    <section data-testid="session-panel" hidden>
      <header>
        <span data-testid="session-id"></span>
        <span data-testid="session-condition"></span>
        <span data-testid="timer"></span>
        <span data-testid="submissions"></span>
        <span data-testid="library-size"></span>
      </header>
      <p data-testid="expired-banner" hidden>The session timer ran out.</p>
      <div data-testid="goals"></div>
      <div data-testid="inventory"></div>
      <div data-testid="slots"></div>
      <div data-testid="recipes"></div>
      <div data-testid="workspace"></div>
      <div>
        <button data-testid="submit">Submit</button>
        <button data-testid="clear-slots">Return slots</button>
        <button data-testid="library-open">Library</button>
      </div>
      <div data-testid="solver-panel">
        <span data-testid="solver-status">idle</span>
        <span data-testid="solver-progress"></span>
        <button data-testid="cancel" hidden>Cancel solver</button>
      </div>
      <p data-testid="error" hidden></p>
      <p data-testid="notice" hidden></p>
      <div data-testid="suggestion-dialog" hidden>
        <p data-testid="suggestion-text"></p>
        <button data-testid="suggestion-confirm">Solve it</button>
        <button data-testid="suggestion-reject">Pick another goal</button>
      </div>
      <div data-testid="goal-picker" hidden>
        <select data-testid="goal-picker-select"></select>
        <button data-testid="goal-picker-confirm">Solve goal</button>
        <button data-testid="goal-picker-cancel">Close</button>
      </div>
      <div data-testid="library-modal" hidden>
        <input data-testid="library-filter" placeholder="filter">
        <ul data-testid="library-entries"></ul>
        <button data-testid="library-close">Close</button>
      </div>
    </section>
  `;

  const $ = <T extends HTMLElement>(testId: string): T => {
    const node = root.querySelector(`[data-testid="${testId}"]`);
    if (node === null) {
      throw new Error(`missing element ${testId}`);
    }
    return node as T;
  };

  function knownActions(): Set<string> {
    const actions = new Set<string>(["craft"]);
    for (const item of itemUniverse(state.recipes, state.snapshot ?? undefined)) {
      actions.add(`input_${item}`);
    }
    return actions;
  }

  function setError(message: string | null): void {
    state.error = message;
  }

  function applySnapshot(snapshot: Snapshot): void {
    state.snapshot = snapshot;
    state.solverRunning = snapshot.solver_active;
  }

  function handleEvent(event: ServerEvent): void {
    switch (event.kind) {
      case "snapshot":
      case "state":
        applySnapshot(event.data as Snapshot);
        break;
      case "progress":
        state.progress = event.data as ProgressData;
        state.solverRunning = true;
        break;
      case "solver_done": {
        const done = event.data as SolverDone;
        state.lastSolver = done;
        state.solverRunning = false;
        state.progress = null;
        if (state.snapshot !== null) {
          state.snapshot = { ...state.snapshot, library_size: done.library_size, solver_active: false };
        }
        break;
      }
      case "timer":
        if (state.snapshot !== null) {
          state.snapshot = {
            ...state.snapshot,
            remaining_seconds: (event.data as { remaining_seconds: number }).remaining_seconds,
          };
        }
        break;
      case "session_end":
        if (state.snapshot !== null) {
          state.snapshot = { ...state.snapshot, expired: true, remaining_seconds: 0 };
        }
        break;
      default:
        break;
    }
    render();
  }

  function subscribe(): void {
    if (closeStream !== null) {
      closeStream();
    }
    if (state.sessionId !== null) {
      closeStream = client.openEvents(state.sessionId, handleEvent);
    }
  }

  async function createSession(): Promise<void> {
    const condition = $<HTMLSelectElement>("create-condition").value;
    const seed = Number($<HTMLInputElement>("create-seed").value) || 0;
    const r = Number($<HTMLInputElement>("create-r").value) || 0;
    const library = $<HTMLTextAreaElement>("create-library").value;
    try {
      const created = await client.createSession({
        condition,
        seed,
        r,
        ...(library.trim() ? { library } : {}),
      });
      state.sessionId = created.session_id;
      applySnapshot(created.snapshot);
      state.recipes = await client.getRecipes(created.session_id);
      setError(null);
      state.notice = null;
      subscribe();
    } catch (error) {
      setError(describe(error));
    }
    render();
  }

  function describe(error: unknown): string {
    if (error instanceof ServiceError) {
      return `${error.code}: ${error.message}`;
    }
    return String(error);
  }

  async function send(payload: SubmitPayload): Promise<void> {
    if (state.sessionId === null) {
      return;
    }
    try {
      const response = await client.submit(state.sessionId, payload);
      setError(null);
      if (response.snapshot !== undefined) {
        applySnapshot(response.snapshot);
      }
      if (response.defined !== undefined) {
        state.knownNames.add(response.defined);
        state.notice = `defined '${response.defined}'`;
        if (state.snapshot !== null && response.library_size !== undefined) {
          state.snapshot = { ...state.snapshot, library_size: response.library_size };
        }
      }
      if (response.status === "executed") {
        state.notice = `ran ${response.actions?.length ?? 0} actions`;
      }
      if (response.status === "cleared") {
        state.notice = "slots returned to inventory";
      }
      if ("suggestion" in response) {
        const hint = payload.hint ?? "";
        if (response.suggestion) {
          state.suggestion = { suggestion: response.suggestion, hint };
        } else {
          state.goalPicker = { hint };
          state.notice = "no suggestion available; pick a goal";
        }
      }
      if (response.accepted === true) {
        state.solverRunning = true;
        state.lastSolver = null;
        state.progress = null;
      }
    } catch (error) {
      setError(describe(error));
    }
    render();
  }

  function submitWorkspace(): void {
    const result = serializeRoot(state.workspace, state.knownNames, knownActions());
    if ("error" in result) {
      setError(result.error);
      render();
      return;
    }
    void send(result.payload);
  }

  async function refreshLibrary(): Promise<void> {
    if (state.sessionId === null) {
      return;
    }
    try {
      state.libraryEntries = await client.getLibrary(state.sessionId, state.libraryFilter);
      setError(null);
    } catch (error) {
      setError(describe(error));
    }
    render();
  }

  function cancelSolver(): void {
    if (state.sessionId === null) {
      return;
    }
    void client
      .cancel(state.sessionId)
      .then((body) => {
        state.notice = body.cancelled ? "cancel requested" : "no solver to cancel";
        render();
      })
      .catch((error) => {
        setError(describe(error));
        render();
      });
  }

  // --- rendering -------------------------------------------------------

  function render(): void {
    const panel = $("session-panel");
    if (state.snapshot === null) {
      panel.hidden = true;
      return;
    }
    panel.hidden = false;
    const view = renderSession(state.snapshot, state.recipes);

    $("session-id").textContent = view.sessionId;
    $("session-condition").textContent = view.condition;
    $("timer").textContent = view.timerLabel;
    $("submissions").textContent = `submissions: ${view.submissions}`;
    $("library-size").textContent = `library: ${view.librarySize}`;
    $("expired-banner").hidden = view.submissionsEnabled;

    const goals = $("goals");
    goals.replaceChildren(
      ...view.goals.map((goal) => {
        const row = el("div", { "data-item": goal.item, class: goal.done ? "goal done" : "goal" });
        row.textContent = `${goal.item}: ${goal.built}${goal.done ? " ✓" : ""}`;
        return row;
      }),
    );

    const inventory = $("inventory");
    inventory.replaceChildren(
      ...view.inventory.map((row) => {
        const node = el("div", { "data-item": row.item, class: "inventory-row" });
        node.textContent = `${row.item}: ${row.count}`;
        return node;
      }),
    );

    const slots = $("slots");
    slots.textContent =
      `slots: [${view.inputSlots.join(", ")}]` +
      (view.derivedOutput !== null ? ` → ${view.derivedOutput}` : "");

    const recipes = $("recipes");
    recipes.replaceChildren(
      ...view.recipes.map((recipe) => {
        const node = el("div", { "data-item": recipe.item, class: "recipe-row" });
        node.textContent = `${recipe.item} ← ${recipe.inputs.join(" + ")}`;
        return node;
      }),
    );

    renderWorkspace();
    renderSolver();
    renderDialogs(view.recipes);

    const error = $("error");
    error.hidden = state.error === null;
    error.textContent = state.error ?? "";
    const notice = $("notice");
    notice.hidden = state.notice === null;
    notice.textContent = state.notice ?? "";

    $<HTMLButtonElement>("submit").disabled = !view.submissionsEnabled;
    root.dispatchEvent(new CustomEvent("app:render"));
  }

  function blockRow(block: WorkspaceBlock, index: number): HTMLElement {
    const row = el("div", { class: `block block-${block.kind}`, "data-block-index": String(index) });
    const controls = el("span", { class: "block-controls" });
    const up = el("button", { "data-testid": `block-up-${index}` }, "↑");
    up.addEventListener("click", () => {
      state.workspace = moveBlock(state.workspace, index, index - 1);
      render();
    });
    const down = el("button", { "data-testid": `block-down-${index}` }, "↓");
    down.addEventListener("click", () => {
      state.workspace = moveBlock(state.workspace, index, index + 1);
      render();
    });
    const remove = el("button", { "data-testid": `block-remove-${index}` }, "✕");
    remove.addEventListener("click", () => {
      state.workspace = removeBlock(state.workspace, index);
      render();
    });
    controls.append(up, down, remove);

    if (block.kind === "primitive") {
      row.append(el("span", {}, `primitive ${block.action}`), controls);
    } else if (block.kind === "ref") {
      row.append(el("span", {}, `program ${block.name}`), controls);
    } else if (block.kind === "search-problem") {
      row.append(el("span", {}, "search problem"), controls);
      const hint = el("input", {
        "data-testid": `block-hint-${index}`,
        placeholder: "hint, e.g. make a wooden plank",
      });
      hint.value = block.hint;
      hint.addEventListener("input", () => {
        patchBlock(index, { ...block, hint: hint.value });
      });
      const goal = el("select", { "data-testid": `block-goal-${index}` });
      goal.append(option("", "(hint only — ask for a goal)"));
      for (const recipe of state.recipes) {
        goal.append(option(recipe.item));
      }
      goal.value = block.goal?.[0] ?? "";
      goal.addEventListener("change", () => {
        patchBlock(index, { ...block, goal: goal.value === "" ? null : [goal.value] });
      });
      row.append(hint, goal);
    } else {
      row.append(el("span", {}, "function"), controls);
      const name = el("input", { "data-testid": `block-name-${index}`, placeholder: "name" });
      name.value = block.name;
      name.addEventListener("input", () => {
        patchBlock(index, { ...block, name: name.value });
      });
      const hint = el("input", { "data-testid": `block-fn-hint-${index}`, placeholder: "hint" });
      hint.value = block.hint;
      hint.addEventListener("input", () => {
        patchBlock(index, { ...block, hint: hint.value });
      });
      row.append(name, hint);
      const slotList = el("ul", { "data-testid": `block-slots-${index}` });
      block.slots.forEach((slot, slotIndex) => {
        const li = el("li", {}, slot.kind === "primitive" ? slot.action : `@${slot.name}`);
        const drop = el("button", { "data-testid": `slot-remove-${index}-${slotIndex}` }, "✕");
        drop.addEventListener("click", () => {
          state.workspace = removeSlot(state.workspace, index, slotIndex);
          render();
        });
        li.append(drop);
        slotList.append(li);
      });
      row.append(slotList);
      const actionSelect = el("select", { "data-testid": `slot-action-${index}` });
      for (const action of [...knownActions()].sort()) {
        actionSelect.append(option(action));
      }
      const addAction = el("button", { "data-testid": `slot-add-action-${index}` }, "+ action");
      addAction.addEventListener("click", () => {
        state.workspace = addSlot(state.workspace, index, {
          kind: "primitive",
          action: actionSelect.value,
        });
        render();
      });
      const refInput = el("input", { "data-testid": `slot-ref-${index}`, placeholder: "program name" });
      const addRef = el("button", { "data-testid": `slot-add-ref-${index}` }, "+ call");
      addRef.addEventListener("click", () => {
        if (refInput.value.trim()) {
          state.workspace = addSlot(state.workspace, index, {
            kind: "ref",
            name: refInput.value.trim(),
          });
          render();
        }
      });
      row.append(actionSelect, addAction, refInput, addRef);
    }
    return row;
  }

  function patchBlock(index: number, block: WorkspaceBlock): void {
    state.workspace = {
      blocks: state.workspace.blocks.map((existing, i) => (i === index ? block : existing)),
    };
    render();
  }

  function renderWorkspace(): void {
    const host = $("workspace");
    const list = el("div", { "data-testid": "block-list" });
    state.workspace.blocks.forEach((block, index) => list.append(blockRow(block, index)));
    const palette = el("div", { class: "palette" });
    const addSearch = el("button", { "data-testid": "add-search-block" }, "+ search problem");
    addSearch.addEventListener("click", () => {
      const block: SearchProblemBlock = { kind: "search-problem", hint: "", goal: null };
      state.workspace = addBlock(state.workspace, block);
      render();
    });
    const addFunction = el("button", { "data-testid": "add-function-block" }, "+ function");
    addFunction.addEventListener("click", () => {
      const block: DpFunctionBlock = { kind: "dp-function", name: "", hint: "", slots: [] };
      state.workspace = addBlock(state.workspace, block);
      render();
    });
    palette.append(addSearch, addFunction);
    host.replaceChildren(list, palette);
  }

  function renderSolver(): void {
    const status = $("solver-status");
    if (state.solverRunning) {
      status.textContent = "running";
    } else if (state.lastSolver !== null) {
      status.textContent = state.lastSolver.status;
    } else {
      status.textContent = "idle";
    }
    const progress = $("solver-progress");
    progress.textContent =
      state.progress !== null ? `expansions: ${state.progress.expansions}` : "";
    $("cancel").hidden = !state.solverRunning;
  }

  function renderDialogs(recipes: Recipe[]): void {
    const dialog = $("suggestion-dialog");
    dialog.hidden = state.suggestion === null;
    if (state.suggestion !== null) {
      $("suggestion-text").textContent =
        `Solve for ${state.suggestion.suggestion.goal.join(", ")}? ` +
        `(matched '${state.suggestion.suggestion.matched_hint}')`;
    }
    const picker = $("goal-picker");
    picker.hidden = state.goalPicker === null;
    if (state.goalPicker !== null) {
      const select = $<HTMLSelectElement>("goal-picker-select");
      if (select.options.length === 0) {
        for (const recipe of recipes) {
          select.append(option(recipe.item));
        }
      }
    }
    const modal = $("library-modal");
    modal.hidden = !state.libraryOpen;
    if (state.libraryOpen) {
      const list = $("library-entries");
      list.replaceChildren(
        ...state.libraryEntries.map((entry, index) => {
          const li = el("li", { "data-entry-name": entry.name });
          const uses = entry.uses !== undefined ? ` ×${entry.uses}` : "";
          li.textContent = `${entry.name} — ${entry.hint}${uses} `;
          const add = el("button", { "data-testid": `library-add-${index}` }, "add");
          add.addEventListener("click", () => {
            state.workspace = insertLibraryEntry(state.workspace, entry);
            if (entry.kind === "program") {
              state.knownNames.add(entry.name);
            }
            state.libraryOpen = false;
            render();
          });
          li.append(add);
          return li;
        }),
      );
    }
  }

  // --- static wiring ---------------------------------------------------

  $("create-session").addEventListener("click", () => {
    void createSession();
  });
  $("submit").addEventListener("click", submitWorkspace);
  $("clear-slots").addEventListener("click", () => {
    void send({ kind: "clear" });
  });
  $("cancel").addEventListener("click", cancelSolver);
  $("suggestion-confirm").addEventListener("click", () => {
    const pending = state.suggestion;
    state.suggestion = null;
    if (pending !== null) {
      void send({ kind: "solve", hint: pending.hint, goal: pending.suggestion.goal });
    }
  });
  $("suggestion-reject").addEventListener("click", () => {
    const pending = state.suggestion;
    state.suggestion = null;
    state.goalPicker = { hint: pending?.hint ?? "" };
    render();
  });
  $("goal-picker-confirm").addEventListener("click", () => {
    const pending = state.goalPicker;
    const select = $<HTMLSelectElement>("goal-picker-select");
    state.goalPicker = null;
    if (pending !== null && select.value) {
      void send({ kind: "solve", hint: pending.hint, goal: [select.value] });
    }
  });
  $("goal-picker-cancel").addEventListener("click", () => {
    state.goalPicker = null;
    render();
  });
  $("library-open").addEventListener("click", () => {
    state.libraryOpen = true;
    void refreshLibrary();
  });
  $("library-close").addEventListener("click", () => {
    state.libraryOpen = false;
    render();
  });
  $("library-filter").addEventListener("input", () => {
    state.libraryFilter = $<HTMLInputElement>("library-filter").value;
    void refreshLibrary();
  });

  return {
    state,
    reconnect(): void {
      state.progress = null;
      subscribe();
    },
    close(): void {
      if (closeStream !== null) {
        closeStream();
        closeStream = null;
      }
    },
  };
}
