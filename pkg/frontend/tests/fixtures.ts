/** Serialized library preload for the end-to-end session.
 *
 * Two families of entries shape the two solver runs the test scripts:
 *
 * - Four misleading wood_plank decompositions.  They all fail (they
 *   craft other things), so the planner has to search past them before
 *   finding the real plank recipe — enough expansions for progress
 *   events to stream, while still succeeding deterministically.
 * - A recursive forest under "build a house" whose sub-steps all
 *   deliver (string and cloth really get made) but whose root cannot:
 *   cloth + cloth matches no recipe.  Grounding that forest keeps the
 *   solver busy for thousands of expansions, which at the paced test
 *   rate gives a wide, reliable window to cancel mid-solve.
 *
 * The hints double as the suggestion corpus: "make a wooden plank"
 * matches the plank entries exactly.
 */

type Step = string | { goal: string[]; hint: string };

interface EntryRecord {
  goal: string[];
  hint: string;
  steps: Step[];
  occurrence_count: number;
  insertion_tick: number;
  last_used_tick: number;
}

const STRING_CRAFT: Step[] = ["input_wool", "input_wool", "craft"];
const PLANK_CRAFT: Step[] = ["input_wood", "input_wood", "craft"];

function entry(goal: string, hint: string, steps: Step[], tick: number): EntryRecord {
  return {
    goal: [goal],
    hint,
    steps,
    occurrence_count: 1,
    insertion_tick: tick,
    last_used_tick: tick,
  };
}

export function libraryFixture(): string {
  const records: EntryRecord[] = [];
  let tick = 1;

  const plankJunk: Step[][] = [
    ["input_wool", "input_wool", "craft"],
    ["input_grass", "input_grass", "craft"],
    ["input_wool", "input_grass", "craft"],
    ["input_stone", "input_wool", "craft"],
  ];
  for (const steps of plankJunk) {
    records.push(entry("wood_plank", "make a wooden plank", steps, 300 + tick));
    tick += 1;
  }

  for (let k = 0; k < 4; k += 1) {
    const steps: Step[] = [...Array(k).fill(PLANK_CRAFT).flat(), ...STRING_CRAFT];
    records.push(entry("string", "spin some string", steps, tick));
    tick += 1;
  }

  for (let k = 0; k < 4; k += 1) {
    const steps: Step[] = [
      { goal: ["string"], hint: "spin some string" },
      { goal: ["string"], hint: "spin some string" },
      ...Array(k).fill(STRING_CRAFT).flat(),
      "input_string",
      "input_string",
      "craft",
    ];
    records.push(entry("cloth", "weave some cloth", steps, tick));
    tick += 1;
  }

  for (let k = 0; k < 4; k += 1) {
    const steps: Step[] = [
      { goal: ["cloth"], hint: "weave some cloth" },
      { goal: ["cloth"], hint: "weave some cloth" },
      ...Array(k).fill(STRING_CRAFT).flat(),
      "input_cloth",
      "input_cloth",
      "craft",
    ];
    records.push(entry("house", "build a house", steps, tick));
    tick += 1;
  }

  const lines = ["craftlite-library v1", "tick_counter=400"];
  for (const record of records) {
    lines.push(JSON.stringify(record));
  }
  return lines.join("\n") + "\n";
}
