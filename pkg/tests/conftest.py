"""Shared fixtures: a three-craftable catalog small enough to hand-trace.

string: A = wool+wool,     B = wool+grass
cloth:  A = string+string, B = string+wool
hut:    A = string+grass,  B = cloth+wood
"""
import pytest

from craftlite.env import RecipeBook, RecipeCatalog, RecipeRule
from craftlite.library import Library

from helpers import decomp, sub


def _rule(output, a, b):
    return RecipeRule(output=output, inputs=(a, b))


TINY_RULES = {
    "string": (_rule("string", "wool", "wool"), _rule("string", "wool", "grass")),
    "cloth": (_rule("cloth", "string", "string"), _rule("cloth", "string", "wool")),
    "hut": (_rule("hut", "string", "grass"), _rule("hut", "cloth", "wood")),
}


@pytest.fixture(scope="session")
def tiny_catalog():
    return RecipeCatalog(TINY_RULES)


@pytest.fixture
def tiny_book(tiny_catalog):
    def make(**choices) -> RecipeBook:
        choice = {item: 0 for item in tiny_catalog.rules}
        for item, pick in choices.items():
            choice[item] = {"A": 0, "B": 1, 0: 0, 1: 1}[pick]
        return RecipeBook(tiny_catalog, choice)

    return make


@pytest.fixture
def tiny_library():
    """Decompositions for both variants of every tiny-catalog item.

    Insertion order makes the B variants the more recent ones, which pins
    which variant inner search tries first.
    """
    lib = Library()
    lib.insert(decomp("string", "craft 'string' with 'wool' and 'wool'",
                       ["input_wool", "input_wool", "craft"]))
    lib.insert(decomp("string", "craft 'string' with 'wool' and 'grass'",
                       ["input_wool", "input_grass", "craft"]))
    lib.insert(decomp("cloth", "craft 'cloth' with 'string' and 'string'",
                       [sub("string"), sub("string"),
                        "input_string", "input_string", "craft"]))
    lib.insert(decomp("cloth", "craft 'cloth' with 'string' and 'wool'",
                       [sub("string"), "input_string", "input_wool", "craft"]))
    lib.insert(decomp("hut", "craft 'hut' with 'string' and 'grass'",
                       [sub("string"), "input_grass", "input_string", "craft"]))
    lib.insert(decomp("hut", "craft 'hut' with 'cloth' and 'wood'",
                       [sub("cloth"), "input_cloth", "input_wood", "craft"]))
    return lib
