"""CraftLite: a crafting environment with teachable planning agents."""

from craftlite.env import (
    ACTIONS,
    CRAFTABLE_ITEMS,
    ITEMS,
    RAW_ITEMS,
    Context,
    Goal,
    RecipeBook,
    RecipeCatalog,
    RecipeRule,
    WorldState,
    default_catalog,
    generate_book,
    starting_state,
)

__all__ = [
    "ACTIONS",
    "CRAFTABLE_ITEMS",
    "ITEMS",
    "RAW_ITEMS",
    "Context",
    "Goal",
    "RecipeBook",
    "RecipeCatalog",
    "RecipeRule",
    "WorldState",
    "default_catalog",
    "generate_book",
    "starting_state",
]
