"""Command line front end: batch simulation, book sampling, serving.

``sim`` runs matched generational chains and writes metrics.csv,
summary.csv, and per-generation library snapshots.  ``book`` prints a
sampled recipe book.  ``summarize`` recomputes the summary table from an
existing metrics file.  ``serve`` starts the live session service.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from craftlite.chain_harness import (
    ChainConfig,
    format_metrics,
    format_summary,
    parse_metrics,
    run_batches,
    summarize,
)
from craftlite.env import default_catalog, format_book, generate_book, parse_catalog
from craftlite.executors import ProgramStore, format_programs
from craftlite.library import format_library


def _load_catalog(path: str | None):
    if path is None:
        return default_catalog()
    return parse_catalog(Path(path).read_text())


def _parse_r_list(text: str) -> list[float]:
    parts = [part.strip() for part in text.split(",") if part.strip()]
    try:
        values = [float(part) for part in parts]
    except ValueError:
        raise SystemExit(f"--r wants comma-separated numbers, got {text!r}")
    if not values:
        raise SystemExit("--r needs at least one value")
    return values


def _snapshot_text(library) -> str:
    if isinstance(library, ProgramStore):
        return format_programs(library)
    return format_library(library)


def cmd_sim(args: argparse.Namespace) -> int:
    catalog = _load_catalog(args.catalog)
    conditions = tuple(c.strip() for c in args.conditions.split(",") if c.strip())
    template = ChainConfig(conditions=conditions, generations=args.generations,
                           batch_seed=args.seed)
    out = Path(args.out)
    snapshots = out / "libraries"
    snapshots.mkdir(parents=True, exist_ok=True)

    def factory(r: float, batch_seed: int):
        def hook(condition: str, generation: int, library) -> None:
            name = f"r{r:g}_seed{batch_seed}_{condition}_gen{generation:02d}.txt"
            (snapshots / name).write_text(_snapshot_text(library))
        return hook

    rows = run_batches(_parse_r_list(args.r), args.batches, template, catalog,
                       on_generation_factory=factory)
    (out / "metrics.csv").write_text(format_metrics(rows))
    (out / "summary.csv").write_text(format_summary(
        summarize(rows, seed=args.seed)))
    print(f"wrote {len(rows)} session rows under {out}")
    return 0


def cmd_book(args: argparse.Namespace) -> int:
    catalog = _load_catalog(args.catalog)
    sys.stdout.write(format_book(generate_book(catalog, args.seed, args.r)))
    return 0


def cmd_summarize(args: argparse.Namespace) -> int:
    rows = parse_metrics(Path(getattr(args, "in")).read_text())
    sys.stdout.write(format_summary(summarize(rows, seed=args.seed)))
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from craftlite.session_service import create_app

    app = create_app(_load_catalog(args.catalog),
                     session_seconds=args.session_seconds,
                     solver_seconds=args.solver_seconds)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="craftlite",
        description="crafting-game teaching experiments and live sessions")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("sim", help="run matched generational chains")
    sim.add_argument("--r", default="0,0.25,0.5",
                     help="comma-separated rule-flip rates")
    sim.add_argument("--batches", type=int, default=5,
                     help="independent chains per rate")
    sim.add_argument("--generations", type=int, default=20)
    sim.add_argument("--conditions", default="np,ds",
                     help="comma-separated subset of np,ds")
    sim.add_argument("--seed", type=int, default=0, help="base batch seed")
    sim.add_argument("--catalog", default=None, help="catalog file (text form)")
    sim.add_argument("--out", default="runs", help="output directory")
    sim.set_defaults(func=cmd_sim)

    book = sub.add_parser("book", help="print a sampled recipe book")
    book.add_argument("--seed", type=int, default=0)
    book.add_argument("--r", type=float, default=0.5, help="rule-flip rate")
    book.add_argument("--catalog", default=None)
    book.set_defaults(func=cmd_book)

    summ = sub.add_parser("summarize", help="summarize an existing metrics file")
    summ.add_argument("--in", required=True, help="metrics.csv path")
    summ.add_argument("--seed", type=int, default=0, help="bootstrap seed")
    summ.set_defaults(func=cmd_summarize)

    serve = sub.add_parser("serve", help="start the live session service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--catalog", default=None)
    serve.add_argument("--session-seconds", type=float, default=600.0)
    serve.add_argument("--solver-seconds", type=float, default=30.0)
    serve.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
