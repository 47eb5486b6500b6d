"""Deterministic two-slot crafting environment.

The world holds a multiset inventory over a fixed universe of 29 items plus
two crafting input slots.  Four items are raw materials that only ever enter
the world through the starting inventory; the remaining 25 are craftable.
Every craftable item has exactly two candidate recipes in the catalog, and a
recipe book picks one of the two per item.  Varying the book between episodes
is how dynamics change: the same catalog supports 2**25 distinct books.

Actions are ``input_<item>`` (move one copy of the item from the inventory
into a free slot) and ``craft`` (consume both slotted items if they match the
active recipe of some output, producing one copy of that output).  ``step``
raises on invalid actions; ``run`` absorbs those errors as flagged no-ops so
that speculative plans can be scored by their end state.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ITEMS: tuple[str, ...] = (
    "wood", "stone", "wool", "grass",
    "wood_plank", "bed", "wood_stick", "paper", "string", "pickaxe",
    "cloth", "pinwheel", "hut", "stone_mill", "flour", "book", "fire",
    "oven", "bread", "sand", "clay", "brick", "glass", "house", "iron",
    "gear", "wire", "light_bulb", "clock",
)
RAW_ITEMS: frozenset[str] = frozenset({"wood", "stone", "wool", "grass"})
CRAFTABLE_ITEMS: tuple[str, ...] = tuple(i for i in ITEMS if i not in RAW_ITEMS)
ITEM_INDEX: dict[str, int] = {name: idx for idx, name in enumerate(ITEMS)}

CRAFT = "craft"
INPUT_PREFIX = "input_"
ACTIONS: tuple[str, ...] = tuple(INPUT_PREFIX + item for item in ITEMS) + (CRAFT,)
ACTION_INDEX: dict[str, int] = {a: i for i, a in enumerate(ACTIONS)}
_CRAFT_IDX = len(ITEMS)


def input_action(item: str) -> str:
    if item not in ITEM_INDEX:
        raise ValueError(f"unknown item {item!r}")
    return INPUT_PREFIX + item


def action_item(action: str) -> str | None:
    """Item moved by an input action, or None for ``craft``."""
    if action == CRAFT:
        return None
    if action.startswith(INPUT_PREFIX):
        item = action[len(INPUT_PREFIX):]
        if item in ITEM_INDEX:
            return item
    raise ValueError(f"unknown action {action!r}")


class EnvError(Exception):
    """Base class for recoverable action failures."""


class ItemUnavailable(EnvError):
    pass


class SlotsFull(EnvError):
    pass


class NoRecipeMatch(EnvError):
    pass


@dataclass(frozen=True)
class RecipeRule:
    """One candidate recipe: two inputs (authored order) producing one output."""

    output: str
    inputs: tuple[str, str]

    @property
    def pair(self) -> tuple[str, str]:
        """Unordered input pair, normalized for matching."""
        a, b = self.inputs
        return (a, b) if a <= b else (b, a)


class RecipeCatalog:
    """Two candidate rules per craftable item.

    A catalog is valid when a single global topological order of items exists
    under which every rule's inputs precede its output, regardless of which
    rule a book later activates.  For craft determinism we additionally
    require that no two rules in the catalog share an unordered input pair.
    """

    def __init__(self, rules: dict[str, tuple[RecipeRule, RecipeRule]]):
        self.rules = dict(rules)
        self._validate()

    def _validate(self) -> None:
        seen_pairs: dict[tuple[str, str], str] = {}
        for item, pair_of_rules in self.rules.items():
            if item not in ITEM_INDEX or item in RAW_ITEMS:
                raise ValueError(f"{item!r} is not a craftable item")
            if len(pair_of_rules) != 2:
                raise ValueError(f"{item!r} needs exactly two rules")
            for rule in pair_of_rules:
                if rule.output != item:
                    raise ValueError(f"rule output {rule.output!r} under {item!r}")
                for inp in rule.inputs:
                    if inp not in ITEM_INDEX:
                        raise ValueError(f"unknown input {inp!r}")
                if rule.pair in seen_pairs:
                    raise ValueError(
                        f"input pair {rule.pair} used by both "
                        f"{seen_pairs[rule.pair]!r} and {item!r}"
                    )
                seen_pairs[rule.pair] = item
        if self.topological_order() is None:
            raise ValueError("catalog has no global topological order")

    @property
    def craftable_items(self) -> tuple[str, ...]:
        return tuple(sorted(self.rules, key=ITEM_INDEX.__getitem__))

    def topological_order(self) -> list[str] | None:
        """One item order valid for every book, or None if rules cycle."""
        items = set(self.rules) | {i for rs in self.rules.values() for r in rs for i in r.inputs}
        deps: dict[str, set[str]] = {i: set() for i in items}
        for item, pair_of_rules in self.rules.items():
            for rule in pair_of_rules:
                deps[item].update(rule.inputs)
        order: list[str] = []
        # Kahn's algorithm over the union dependency graph.
        remaining = {i: set(d) for i, d in deps.items()}
        while True:
            ready = sorted(i for i in remaining if not remaining[i])
            if not ready:
                break
            for i in ready:
                order.append(i)
                del remaining[i]
            for d in remaining.values():
                d.difference_update(ready)
        return order if not remaining else None

    def leaf_items(self) -> tuple[str, ...]:
        """Craftable items that no rule of this catalog consumes."""
        used: set[str] = set()
        for pair_of_rules in self.rules.values():
            for rule in pair_of_rules:
                used.update(rule.inputs)
        return tuple(sorted(i for i in self.rules if i not in used))


class RecipeBook:
    """One active rule per craftable item: a 0/1 choice into the catalog."""

    def __init__(self, catalog: RecipeCatalog, choice: dict[str, int]):
        if set(choice) != set(catalog.rules):
            raise ValueError("book must choose a rule for every craftable item")
        for item, bit in choice.items():
            if bit not in (0, 1):
                raise ValueError(f"rule choice for {item!r} must be 0 or 1")
        self.catalog = catalog
        self.choice = dict(choice)
        self._table: dict[tuple[str, str], str] | None = None

    def active_rule(self, item: str) -> RecipeRule:
        return self.catalog.rules[item][self.choice[item]]

    def craft_table(self) -> dict[tuple[str, str], str]:
        """Unordered input pair -> output, for the active rules only."""
        if self._table is None:
            self._table = {}
            for item in self.catalog.rules:
                self._table[self.active_rule(item).pair] = item
        return self._table

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, RecipeBook)
            and other.catalog is self.catalog
            and other.choice == self.choice
        )


@dataclass(frozen=True)
class WorldState:
    """Inventory multiset, up to two slotted inputs, and per-item craft log."""

    inventory: dict[str, int]
    input_slots: tuple[str, ...] = ()
    crafted_log: dict[str, int] = field(default_factory=dict)

    def count(self, item: str) -> int:
        return self.inventory.get(item, 0)

    def crafted(self, item: str) -> int:
        return self.crafted_log.get(item, 0)

    def total_material(self) -> int:
        return sum(self.inventory.values()) + len(self.input_slots)


def starting_state(raw_count: int = 200) -> WorldState:
    """Fresh world holding only raw materials."""
    return WorldState(inventory={item: raw_count for item in sorted(RAW_ITEMS)})


@dataclass(frozen=True)
class Goal:
    """Items that must each be crafted at least once over a trajectory."""

    items: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.items:
            raise ValueError("goal needs at least one item")
        for item in self.items:
            if item not in ITEM_INDEX:
                raise ValueError(f"unknown goal item {item!r}")


@dataclass(frozen=True)
class Context:
    """A playable episode: target goal, starting state, active recipe book."""

    goal: Goal
    start: WorldState
    book: RecipeBook


@dataclass
class Trajectory:
    """State sequence produced by ``run``; one error flag per action."""

    states: list[WorldState]
    error_flags: list[bool]

    @property
    def final(self) -> WorldState:
        return self.states[-1]


def step(state: WorldState, action: str, book: RecipeBook) -> WorldState:
    """Apply one action, raising EnvError subclasses on invalid moves.

    Errors leave the passed state untouched (states are immutable values).
    """
    if action == CRAFT:
        if len(state.input_slots) < 2:
            raise NoRecipeMatch("craft needs two slotted inputs")
        a, b = state.input_slots
        pair = (a, b) if a <= b else (b, a)
        output = book.craft_table().get(pair)
        if output is None:
            raise NoRecipeMatch(f"no active rule consumes {pair}")
        inventory = dict(state.inventory)
        inventory[output] = inventory.get(output, 0) + 1
        crafted = dict(state.crafted_log)
        crafted[output] = crafted.get(output, 0) + 1
        return WorldState(inventory=inventory, input_slots=(), crafted_log=crafted)

    item = action_item(action)
    if state.count(item) < 1:
        raise ItemUnavailable(f"no {item!r} in inventory")
    if len(state.input_slots) >= 2:
        raise SlotsFull("both input slots are occupied")
    inventory = dict(state.inventory)
    inventory[item] -= 1
    if inventory[item] == 0:
        del inventory[item]
    return WorldState(
        inventory=inventory,
        input_slots=state.input_slots + (item,),
        crafted_log=state.crafted_log,
    )


def clear_slots(state: WorldState) -> WorldState:
    """Return slotted items to the inventory.

    This is workspace plumbing, not one of the planner actions.
    """
    if not state.input_slots:
        return state
    inventory = dict(state.inventory)
    for item in state.input_slots:
        inventory[item] = inventory.get(item, 0) + 1
    return WorldState(inventory=inventory, input_slots=(), crafted_log=state.crafted_log)


def output_preview(state: WorldState, book: RecipeBook) -> str | None:
    """Item the craft action would currently produce, if any."""
    if len(state.input_slots) < 2:
        return None
    a, b = state.input_slots
    pair = (a, b) if a <= b else (b, a)
    return book.craft_table().get(pair)


def run(context: Context, actions: list[str]) -> Trajectory:
    """Execute an action sequence, absorbing errors as flagged no-ops."""
    states = [context.start]
    flags: list[bool] = []
    state = context.start
    for action in actions:
        try:
            state = step(state, action, context.book)
            flags.append(False)
        except EnvError:
            flags.append(True)
        states.append(state)
    return Trajectory(states=states, error_flags=flags)


def goal_satisfied(trajectory: Trajectory, goal: Goal) -> bool:
    """True when every goal item's craft log grew over the trajectory."""
    first = trajectory.states[0]
    last = trajectory.states[-1]
    return all(last.crafted(i) > first.crafted(i) for i in goal.items)


def reward(trajectory: Trajectory, goal: Goal) -> int:
    """Sum of craft-log increases across the listed goal items.

    Items listed twice are counted twice; this keeps the reward additive in
    the goal list.
    """
    first = trajectory.states[0]
    last = trajectory.states[-1]
    return sum(max(0, last.crafted(i) - first.crafted(i)) for i in goal.items)


def generate_book(catalog: RecipeCatalog, seed: int, r: float) -> RecipeBook:
    """Seeded book draw: each item independently takes its second rule with
    probability ``r``.  ``r=0`` always yields the all-first-rule book."""
    if not 0.0 <= r <= 1.0:
        raise ValueError("r must lie in [0, 1]")
    names = sorted(catalog.rules)
    draws = np.random.default_rng(seed).random(len(names))
    choice = {name: int(draws[i] < r) for i, name in enumerate(names)}
    return RecipeBook(catalog, choice)


def _rule(output: str, a: str, b: str) -> RecipeRule:
    return RecipeRule(output=output, inputs=(a, b))


def default_catalog() -> RecipeCatalog:
    """Built-in 25-item catalog.

    Authored so that a global topological order exists, no two rules share an
    input pair, seven items are leaves, and the deepest chains run past sixty
    primitive actions under unlucky books.
    """
    table = {
        "wood_plank": (_rule("wood_plank", "wood", "wood"), _rule("wood_plank", "wood", "grass")),
        "wood_stick": (_rule("wood_stick", "wood_plank", "wood_plank"), _rule("wood_stick", "wood_plank", "wood")),
        "string": (_rule("string", "wool", "wool"), _rule("string", "wool", "grass")),
        "paper": (_rule("paper", "wood_plank", "string"), _rule("paper", "wood_plank", "wood_stick")),
        "pickaxe": (_rule("pickaxe", "wood_stick", "stone"), _rule("pickaxe", "wood_stick", "wood_stick")),
        "fire": (_rule("fire", "wood", "wood_stick"), _rule("fire", "wood_stick", "grass")),
        "cloth": (_rule("cloth", "string", "string"), _rule("cloth", "string", "wool")),
        "sand": (_rule("sand", "stone", "pickaxe"), _rule("sand", "pickaxe", "fire")),
        "clay": (_rule("clay", "sand", "pickaxe"), _rule("clay", "sand", "sand")),
        "stone_mill": (_rule("stone_mill", "stone", "wood_plank"), _rule("stone_mill", "pickaxe", "pickaxe")),
        "flour": (_rule("flour", "grass", "stone_mill"), _rule("flour", "stone", "stone_mill")),
        "brick": (_rule("brick", "clay", "clay"), _rule("brick", "clay", "fire")),
        "oven": (_rule("oven", "brick", "fire"), _rule("oven", "brick", "stone")),
        "bread": (_rule("bread", "flour", "oven"), _rule("bread", "flour", "brick")),
        "glass": (_rule("glass", "sand", "fire"), _rule("glass", "sand", "oven")),
        "iron": (_rule("iron", "stone", "fire"), _rule("iron", "stone", "oven")),
        "gear": (_rule("gear", "iron", "iron"), _rule("gear", "iron", "wood_stick")),
        "wire": (_rule("wire", "iron", "string"), _rule("wire", "iron", "cloth")),
        "book": (_rule("book", "paper", "paper"), _rule("book", "paper", "cloth")),
        "bed": (_rule("bed", "cloth", "wood_plank"), _rule("bed", "cloth", "wool")),
        "pinwheel": (_rule("pinwheel", "paper", "wood_stick"), _rule("pinwheel", "paper", "string")),
        "hut": (_rule("hut", "string", "grass"), _rule("hut", "cloth", "wood")),
        "light_bulb": (_rule("light_bulb", "wire", "glass"), _rule("light_bulb", "wire", "fire")),
        "clock": (_rule("clock", "gear", "wire"), _rule("clock", "gear", "book")),
        "house": (_rule("house", "brick", "glass"), _rule("house", "brick", "brick")),
    }
    return RecipeCatalog(table)


def format_catalog(catalog: RecipeCatalog) -> str:
    """Text form, one craftable item per line, ordered by item name:
    ``item = a + b | c + d``."""
    lines = []
    for item in sorted(catalog.rules):
        first, second = catalog.rules[item]
        lines.append(
            f"{item} = {first.inputs[0]} + {first.inputs[1]}"
            f" | {second.inputs[0]} + {second.inputs[1]}"
        )
    return "\n".join(lines) + "\n"


def parse_catalog(text: str) -> RecipeCatalog:
    rules: dict[str, tuple[RecipeRule, RecipeRule]] = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            item, spec = (part.strip() for part in line.split("=", 1))
            first_text, second_text = (part.strip() for part in spec.split("|", 1))
            first = tuple(p.strip() for p in first_text.split("+", 1))
            second = tuple(p.strip() for p in second_text.split("+", 1))
            if len(first) != 2 or len(second) != 2:
                raise ValueError("each rule needs two inputs")
        except ValueError as exc:
            raise ValueError(f"line {lineno}: cannot parse catalog entry: {exc}") from exc
        rules[item] = (_rule(item, *first), _rule(item, *second))
    return RecipeCatalog(rules)


def format_book(book: RecipeBook) -> str:
    """Text form, one line per item ordered by name: ``item: A`` or ``item: B``."""
    lines = [f"{item}: {'AB'[book.choice[item]]}" for item in sorted(book.choice)]
    return "\n".join(lines) + "\n"


def parse_book(text: str, catalog: RecipeCatalog) -> RecipeBook:
    choice: dict[str, int] = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        if ":" not in line:
            raise ValueError(f"line {lineno}: expected 'item: A|B'")
        item, letter = (part.strip() for part in line.split(":", 1))
        if letter not in ("A", "B"):
            raise ValueError(f"line {lineno}: rule letter must be A or B")
        choice[item] = 0 if letter == "A" else 1
    return RecipeBook(catalog, choice)


class SimWorld:
    """Index-based mutable mirror of WorldState for search inner loops.

    ``apply`` returns an undo token, or None when the action would error; the
    no-op outcome matches how ``run`` absorbs errors, which executor tests
    cross-check against the public pure path.
    """

    __slots__ = ("counts", "slots", "crafted", "table")

    def __init__(self, counts: list[int], slots: list[int], crafted: list[int],
                 table: dict[tuple[int, int], int]):
        self.counts = counts
        self.slots = slots
        self.crafted = crafted
        self.table = table

    @classmethod
    def from_state(cls, state: WorldState, book: RecipeBook) -> "SimWorld":
        counts = [0] * len(ITEMS)
        for item, n in state.inventory.items():
            counts[ITEM_INDEX[item]] = n
        crafted = [0] * len(ITEMS)
        for item, n in state.crafted_log.items():
            crafted[ITEM_INDEX[item]] = n
        table = {}
        for (a, b), out in book.craft_table().items():
            ia, ib = ITEM_INDEX[a], ITEM_INDEX[b]
            key = (ia, ib) if ia <= ib else (ib, ia)
            table[key] = ITEM_INDEX[out]
        slots = [ITEM_INDEX[i] for i in state.input_slots]
        return cls(counts, slots, crafted, table)

    def to_state(self) -> WorldState:
        inventory = {ITEMS[i]: n for i, n in enumerate(self.counts) if n}
        crafted = {ITEMS[i]: n for i, n in enumerate(self.crafted) if n}
        return WorldState(
            inventory=inventory,
            input_slots=tuple(ITEMS[i] for i in self.slots),
            crafted_log=crafted,
        )

    def apply(self, action_idx: int):
        if action_idx == _CRAFT_IDX:
            if len(self.slots) == 2:
                a, b = self.slots
                key = (a, b) if a <= b else (b, a)
                out = self.table.get(key)
                if out is not None:
                    del self.slots[:]
                    self.counts[out] += 1
                    self.crafted[out] += 1
                    return (True, a, b, out)
            return None
        if self.counts[action_idx] > 0 and len(self.slots) < 2:
            self.counts[action_idx] -= 1
            self.slots.append(action_idx)
            return (False, action_idx, 0, 0)
        return None

    def undo(self, token) -> None:
        crafted_flag, a, b, out = token
        if crafted_flag:
            self.counts[out] -= 1
            self.crafted[out] -= 1
            self.slots.extend((a, b))
        else:
            self.slots.pop()
            self.counts[a] += 1

    def snapshot(self):
        return (list(self.counts), list(self.slots), list(self.crafted))

    def restore(self, snap) -> None:
        counts, slots, crafted = snap
        self.counts[:] = counts
        self.slots[:] = slots
        self.crafted[:] = crafted
