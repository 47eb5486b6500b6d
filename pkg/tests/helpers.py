"""Construction helpers shared across test modules."""
from craftlite.env import Goal
from craftlite.library import (
    Decomposition,
    Library,
    Primitive,
    SearchProblem,
    SubProblem,
    format_library,
    parse_library,
)


def sub(item, hint=""):
    return SearchProblem(goal=Goal((item,)), hint=hint)


def decomp(goal_item, hint, steps):
    parsed = []
    for step in steps:
        if isinstance(step, str):
            parsed.append(Primitive(action=step))
        else:
            parsed.append(SubProblem(problem=step))
    return Decomposition(
        head=SearchProblem(goal=Goal((goal_item,)), hint=hint),
        steps=tuple(parsed),
    )


def copy_library(lib: Library) -> Library:
    return parse_library(format_library(lib))
