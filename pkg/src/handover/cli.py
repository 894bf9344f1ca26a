"""Batch and headless entry points.

Exit codes: 0 ok, 2 input error, 3 planner node budget exhausted during a
run. Data goes to stdout (or the requested output files); diagnostics go
to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from .orchestrator import metrics, run_session, write_event_log
from .scenario import ScenarioSyntaxError, ValidationError, load_scenario
from .tql import (
    ALPHABET,
    CatalogError,
    QueryCatalog,
    UnknownAtom,
    default_catalog,
    parse_catalog,
    score_trace,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_BUDGET = 3


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return EXIT_INPUT


def _load_catalog(path: str | None) -> QueryCatalog:
    if path is None:
        return default_catalog()
    return parse_catalog(Path(path).read_text("utf-8"))


def cmd_run(args: argparse.Namespace) -> int:
    try:
        scenario = load_scenario(args.scenario)
        catalog = _load_catalog(args.catalog)
    except FileNotFoundError as exc:
        return _fail(f"no such file: {exc.filename}")
    except (ScenarioSyntaxError, ValidationError, CatalogError, UnknownAtom) as exc:
        return _fail(str(exc))
    session = run_session(scenario, catalog=catalog, seed=args.seed,
                          scripted_driver=args.driver == "scripted")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            write_event_log(session.log, fh)
    else:
        write_event_log(session.log, sys.stdout)
    report = metrics(session.log)
    rendered = json.dumps(report.to_dict(), sort_keys=True, indent=2)
    if args.metrics:
        Path(args.metrics).write_text(rendered + "\n", encoding="utf-8")
    elif args.out:
        print(rendered)
    if session.budget_exhausted:
        print("warning: planner node budget exhausted at least once",
              file=sys.stderr)
        return EXIT_BUDGET
    return EXIT_OK


def _load_trace(path: str) -> list[frozenset[str]]:
    trace = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                atoms = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CatalogError(f"bad trace line: {exc.msg}", lineno) from exc
            if not isinstance(atoms, list) or not all(isinstance(a, str) for a in atoms):
                raise CatalogError("trace line must be a JSON array of atom names",
                                   lineno)
            for atom in atoms:
                if atom not in ALPHABET:
                    raise CatalogError(f"unknown atom {atom!r}", lineno)
            trace.append(frozenset(atoms))
    return trace


def cmd_check(args: argparse.Namespace) -> int:
    try:
        catalog = _load_catalog(args.catalog)
        trace = _load_trace(args.trace)
    except FileNotFoundError as exc:
        return _fail(f"no such file: {exc.filename}")
    except (CatalogError, UnknownAtom) as exc:
        return _fail(str(exc))
    if not trace:
        return _fail("empty trace")
    report = score_trace(trace, catalog)
    print("query\tmatched\tstep")
    for r in report.results:
        step = r.step if r.step is not None else "-"
        print(f"{r.name}\t{'yes' if r.matched else 'no'}\t{step}")
    print(f"score\t{report.score}\t{report.level.value}")
    return EXIT_OK


_BATCH_COLUMNS = ["name", "end_state", "ticks", "safe", "avoidable",
                  "unavoidable", "notice_lead_time", "handovers_avoided",
                  "safe_stops", "escalations", "alerts", "words", "error"]


def cmd_batch(args: argparse.Namespace) -> int:
    directory = Path(args.dir)
    if not directory.is_dir():
        return _fail(f"not a directory: {directory}")
    try:
        catalog = _load_catalog(args.catalog)
    except (FileNotFoundError, CatalogError, UnknownAtom) as exc:
        return _fail(str(exc))
    rows = []
    for path in sorted(directory.glob("*.json")):
        row = {c: "" for c in _BATCH_COLUMNS}
        row["name"] = path.stem
        try:
            scenario = load_scenario(path)
            session = run_session(scenario, catalog=catalog,
                                  scripted_driver=args.driver == "scripted")
            m = metrics(session.log)
            row.update({
                "end_state": m.end_state or "",
                "ticks": m.ticks,
                "safe": m.verdict_counts.get("SAFE", 0),
                "avoidable": m.verdict_counts.get("AVOIDABLE", 0),
                "unavoidable": m.verdict_counts.get("UNAVOIDABLE", 0),
                "notice_lead_time": "" if m.notice_lead_time is None else m.notice_lead_time,
                "handovers_avoided": m.handovers_avoided,
                "safe_stops": m.safe_stops,
                "escalations": m.escalations,
                "alerts": m.alerts,
                "words": "|".join(str(w) for w in m.message_words),
            })
        except Exception as exc:   # per-scenario failure: record, continue
            row["error"] = str(exc)
        rows.append(row)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=_BATCH_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    if args.report:
        Path(args.report).write_text(buf.getvalue(), encoding="utf-8")
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="handover",
        description="Foresight-based takeover-request stack")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario headless")
    p_run.add_argument("scenario")
    p_run.add_argument("--seed", type=int, default=None,
                       help="override the scenario seed")
    p_run.add_argument("--catalog", default=None)
    p_run.add_argument("--out", default=None, help="event log path (JSONL)")
    p_run.add_argument("--metrics", default=None, help="metrics path (JSON)")
    p_run.add_argument("--driver", choices=("scripted", "none"),
                       default="scripted")
    p_run.set_defaults(func=cmd_run)

    p_check = sub.add_parser("check", help="evaluate a catalog over a stored trace")
    p_check.add_argument("catalog")
    p_check.add_argument("trace", help="JSONL file, one atom array per line")
    p_check.set_defaults(func=cmd_check)

    p_batch = sub.add_parser("batch", help="run every scenario in a directory")
    p_batch.add_argument("dir")
    p_batch.add_argument("--report", default=None, help="CSV output path")
    p_batch.add_argument("--catalog", default=None)
    p_batch.add_argument("--driver", choices=("scripted", "none"),
                         default="scripted")
    p_batch.set_defaults(func=cmd_batch)

    p_serve = sub.add_parser("serve", help="expose live sessions over HTTP")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
