"""Command-line entry point ``rtmtest``.

Exit codes: 0 all passed / member / empty diff, 1 test failures or
violations, 2 usage or input errors.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path
from typing import Sequence

from .compare import critical_ids, diff
from . import DATA_DIR
from .errors import RTMError
from .mape import load_trace, save_trace

__all__ = ["main", "DEFAULT_OUT"]

DEFAULT_OUT = "rtmtest-out"
DATA = DATA_DIR


class _Usage(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _Usage(f"{self.prog}: error: {message}")


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rtmtest", description="Test MAPE-K feedback loops against architectural runtime models.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    oneway = sub.add_parser("oneway", help="one-way tests of analyze/plan and execute/monitor co-tests")
    oneway_sub = oneway.add_subparsers(dest="action", required=True, parser_class=_Parser)
    run = oneway_sub.add_parser("run", help="run a suite file")
    run.add_argument("suite")
    run.add_argument("--engine", default="self-healing")
    run.add_argument("--out", help="also write report.json and report.txt here")

    loop = sub.add_parser("loop", help="in-the-loop campaigns against the simulation automaton")
    loop_sub = loop.add_subparsers(dest="action", required=True, parser_class=_Parser)
    lrun = loop_sub.add_parser("run", help="run one seeded campaign")
    lrun.add_argument("--automaton", default=str(DATA / "selfhealing.automaton.json"))
    lrun.add_argument("--engine", default="self-healing")
    lrun.add_argument("--seed", type=int, default=0)
    lrun.add_argument("--iterations", type=int, default=20)
    lrun.add_argument("--props", help="property file checked on the recorded trace")
    lrun.add_argument("--out", default=DEFAULT_OUT)
    lrun.add_argument("--storage", choices=("full", "delta"), default="full")

    rep = sub.add_parser("replay", help="rerun the campaign recorded in a trace file")
    rep.add_argument("trace")
    rep.add_argument("--engine", help="engine to replay with (default: the recorded one)")
    rep.add_argument("--out", help="write the rerun trace and reports here")

    val = sub.add_parser("validate", help="check that an observed trace is covered by an automaton")
    val.add_argument("--trace", required=True)
    val.add_argument("--automaton", required=True)
    val.add_argument("--add-regression", action="store_true",
                     help="extend the automaton file so the trace becomes a member")

    props = sub.add_parser("props", help="property checks over trace files")
    props_sub = props.add_subparsers(dest="action", required=True, parser_class=_Parser)
    check = props_sub.add_parser("check")
    check.add_argument("--trace", required=True)
    check.add_argument("--props", required=True)

    d = sub.add_parser("diff", help="compare two model files")
    d.add_argument("a")
    d.add_argument("b")
    d.add_argument("--ignore", action="append", default=[],
                   help="annotations, metrics or planned-actions (repeatable, or comma separated)")
    d.add_argument("--json", action="store_true", help="print the diff as JSON")
    return p


def _write_reports(out: Path, report: dict, text: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(report, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    (out / "report.txt").write_text(text, encoding="utf-8")


def _oneway(args) -> int:
    from .engines import get_engine
    from .harness import load_suite, run_suite

    suite = Path(args.suite)
    report = run_suite(load_suite(suite), get_engine(args.engine), suite.parent)
    sys.stdout.write(report.to_text())
    if args.out:
        _write_reports(Path(args.out), report.to_dict(), report.to_text())
    return report.exit_code


def _campaign_outputs(result, out: Path, storage: str = "full") -> None:
    out.mkdir(parents=True, exist_ok=True)
    save_trace(result.trace, out / "trace.json", storage)
    _write_reports(out, result.to_dict(), result.to_text())


def _loop(args) -> int:
    from .automaton import load_automaton
    from .engines import get_engine
    from .properties import load_properties
    from .simulator import run_campaign

    automaton = load_automaton(args.automaton)
    props = load_properties(args.props) if args.props else None
    result = run_campaign(automaton, get_engine(args.engine), args.iterations, args.seed, props)
    _campaign_outputs(result, Path(args.out), args.storage)
    sys.stdout.write(result.to_text())
    return 0 if result.passed else 1


def _replay(args) -> int:
    from .engines import get_engine
    from .simulator import replay

    trace = load_trace(args.trace)
    result = replay(trace, get_engine(args.engine) if args.engine else None)
    if args.out:
        _campaign_outputs(result, Path(args.out))
    if result.divergence is None:
        print(f"replay of {trace.id} reproduces the recorded trace")
        return 0
    print(f"replay of {trace.id} diverges at snapshot {result.divergence}")
    return 1


def _validate(args) -> int:
    from .automaton import automaton_to_dict, load_automaton
    from .membership import add_regression, membership
    from .model import dumps, loads

    path = Path(args.automaton)
    automaton = load_automaton(path)
    trace = load_trace(args.trace)
    result = membership(trace, automaton)
    if result.member:
        print(f"member; witness run: {' '.join(result.witness_run)}")
        return 0
    print(f"not a member; no run explains snapshot {result.longest_matched_prefix}")
    if args.add_regression:
        ref = loads(path.read_bytes()).get("template")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            extended = add_regression(automaton, trace)
        path.write_bytes(dumps(automaton_to_dict(extended, ref if isinstance(ref, str) else None)))
        print(f"added a regression branch to {path}")
    return 1


def _critical_for(trace) -> frozenset[str] | None:
    from .automaton import automaton_from_dict

    doc = trace.meta.get("automaton")
    if doc is not None:
        return critical_ids(automaton_from_dict(doc).template)
    return None


def _props(args) -> int:
    """Black-box properties see the trace without ANALYZED snapshots, as in campaigns."""
    from .properties import evaluate_on_campaign, load_properties

    trace = load_trace(args.trace)
    failed = 0
    critical = _critical_for(trace)
    for name, prop in load_properties(args.props):
        verdict = evaluate_on_campaign(prop, trace, critical=critical)
        if verdict.holds:
            print(f"holds  {name}")
        else:
            failed += 1
            print(f"FAILS  {name}  witness {verdict.witness[0]}..{verdict.witness[1]}")
    return 1 if failed else 0


def _diff(args) -> int:
    from .model import load

    ignore = [part.strip() for item in args.ignore for part in item.split(",") if part.strip()]
    d = diff(load(args.a), load(args.b), ignore=ignore)
    if args.json:
        sys.stdout.write(json.dumps(d.to_dict(), indent=2, ensure_ascii=False) + "\n")
    else:
        print(d.summary())
    return 0 if d.empty else 1


_COMMANDS = {"oneway": _oneway, "loop": _loop, "replay": _replay, "validate": _validate,
             "props": _props, "diff": _diff}


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = _parser().parse_args(argv)
    except _Usage as exc:
        print(exc, file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (RTMError, OSError, ValueError, KeyError) as exc:
        print(f"rtmtest: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
