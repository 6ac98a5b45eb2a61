"""Command-line entry point.

Exit codes: 0 full success, 1 violations or failed cases remain, 2 usage or
input errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path
from typing import Optional, Sequence

from timing_triage import __version__
from timing_triage.analysis import analyze_source
from timing_triage.classifier import Classifier
from timing_triage.config import ConfigError, load_config
from timing_triage.frontend import ParseError, parse
from timing_triage.injector import (
    InjectError,
    InjectionSpec,
    ValidationFailure,
    build_dataset,
    inject,
    load_case,
    validate_case,
    write_case,
)
from timing_triage.kb import KbError, load_and_validate
from timing_triage.pipeline import ManifestError, RunConfig, evaluate, run_debug_case, write_artifacts
from timing_triage.stdg import BuildError
from timing_triage.timing.engine import DelayModel, MissingClockConstraint
from timing_triage.timing.report import ConstraintError, emit_report, load_constraints

OK, FAILED, ERROR = 0, 1, 2


def _run_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config)
    run = RunConfig.from_config(
        cfg,
        max_attempts=getattr(args, "max_attempts", None),
        workers=getattr(args, "workers", None),
        repetitions=getattr(args, "repetitions", None),
        run_log_path=getattr(args, "log", None),
    )
    if getattr(args, "llm", None):
        run = replace(run, llm=run.llm.with_selector(args.llm))
    return run


def cmd_analyze(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    model = DelayModel().with_overrides(cfg.get("delay_model"))
    constraints = load_constraints(args.constraints) if args.constraints else []
    default = args.period if args.period is not None else (None if args.constraints else cfg["default_period"])
    text = Path(args.design).read_text(encoding="utf-8")
    result = analyze_source(text, model, constraints, default, file=args.design)
    if args.dump_graph:
        sys.stdout.write(result.graph.dump() + "\n")
    sys.stdout.write(emit_report(result.report))
    return FAILED if result.report else OK


def cmd_inject(args: argparse.Namespace) -> int:
    seed_text = Path(args.seed).read_text(encoding="utf-8")
    seed = parse(seed_text, file=args.seed)
    spec_src = args.spec
    raw = json.loads(Path(spec_src).read_text(encoding="utf-8")) if Path(spec_src).is_file() else json.loads(spec_src)
    spec = InjectionSpec.from_dict(raw)
    case = inject(seed, spec, seed_name=Path(args.seed).name)
    try:
        validate_case(case)
    except ValidationFailure as exc:
        print(f"{case.case_id}: validation failed: {exc}", file=sys.stderr)
        return FAILED
    target = write_case(args.out, case)
    print(f"{case.case_id} -> {target}")
    return OK


def cmd_debug(args: argparse.Namespace) -> int:
    run = _run_config(args)
    case = load_case(args.case_dir)
    result = run_debug_case(case, run)
    if args.out:
        write_artifacts(args.out, [result])
    print(json.dumps(result.to_dict(), indent=2, sort_keys=True))
    return OK if result.success else FAILED


def cmd_eval(args: argparse.Namespace) -> int:
    run = _run_config(args)
    summary = evaluate(args.dataset, run, artifacts_dir=args.artifacts)
    sys.stdout.write(summary.table())
    if args.json:
        Path(args.json).write_text(summary.to_json(), encoding="utf-8")
    else:
        sys.stdout.write("\n" + summary.to_json())
    return OK if summary.c == summary.n else FAILED


def cmd_kb_validate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    model = DelayModel().with_overrides(cfg.get("delay_model"))
    try:
        kb = load_and_validate(args.dir, model=model, default_period=cfg["default_period"])
    except KbError as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return FAILED
    print(f"{len(kb)} entries valid")
    return OK


def cmd_classify(args: argparse.Namespace) -> int:
    classifier = Classifier.from_config(load_config(args.config))
    text = sys.stdin.read() if args.cause == "-" else Path(args.cause).read_text(encoding="utf-8")
    if not text.strip():
        print("error: empty cause description", file=sys.stderr)
        return ERROR
    scenario = classifier.identify(text)
    if args.params:
        params = asdict(classifier.extract_params(text))
        params["keyword_hits"] = sorted(params["keyword_hits"])
        print(json.dumps({"scenario": scenario, "params": params}, indent=2, sort_keys=True))
    else:
        print(scenario)
    return OK


def cmd_dataset_build(args: argparse.Namespace) -> int:
    cases = build_dataset(args.out)
    for case in cases:
        print(case.case_id)
    return OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="timing-triage", description="RTL timing-violation triage and repair.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="JSON config file merged over the bundled defaults")
    parser.add_argument("-v", "--verbose", action="store_true", help="log retries and progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="run static timing and CDC analysis, print the canonical report")
    p.add_argument("design")
    p.add_argument("--constraints", help="file of 'clock <name> <period_ns>' lines")
    p.add_argument("--period", type=float, help="period for clocks without an explicit constraint")
    p.add_argument("--dump-graph", action="store_true", help="print the signal graph before the report")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("inject", help="inject a violation into a seed design and write the case")
    p.add_argument("--seed", required=True)
    p.add_argument("--spec", required=True, help="injection spec as a JSON file or inline JSON")
    p.add_argument("--out", default=".", help="directory receiving <case_id>/")
    p.set_defaults(func=cmd_inject)

    llm_help = "http, mock:kb_golden, mock:echo or mock:scripted:<file>"
    p = sub.add_parser("debug", help="run the repair loop on one case directory")
    p.add_argument("case_dir")
    p.add_argument("--llm", help=llm_help)
    p.add_argument("--max-attempts", type=int)
    p.add_argument("--log", help="append LLM exchanges to this JSON-lines file")
    p.add_argument("--out", help="write repaired.v and result.json under this directory")
    p.set_defaults(func=cmd_debug)

    p = sub.add_parser("eval", help="evaluate fix rate over a dataset")
    p.add_argument("dataset")
    p.add_argument("--llm", help=llm_help)
    p.add_argument("--max-attempts", type=int)
    p.add_argument("--repetitions", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--log", help="append LLM exchanges to this JSON-lines file")
    p.add_argument("--json", help="write the summary JSON here instead of stdout")
    p.add_argument("--artifacts", help="write per-case repaired.v and result.json here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("kb", help="knowledge-base tools")
    kb_sub = p.add_subparsers(dest="kb_command", required=True)
    v = kb_sub.add_parser("validate", help="load and validate a knowledge-base directory")
    v.add_argument("dir", nargs="?", help="defaults to the bundled knowledge base")
    v.set_defaults(func=cmd_kb_validate)

    p = sub.add_parser("classify", help="identify the subscenario of a cause description")
    p.add_argument("--cause", required=True, help="text file, or - for stdin")
    p.add_argument("--params", action="store_true", help="also print the extracted parameters")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("dataset", help="dataset tools")
    ds_sub = p.add_subparsers(dest="dataset_command", required=True)
    b = ds_sub.add_parser("build", help="regenerate the bundled dataset from the seeds")
    b.add_argument("--out", default="dataset")
    b.set_defaults(func=cmd_dataset_build)
    return parser


_USER_ERRORS = (
    OSError, ValueError, ConfigError, ConstraintError, ParseError, BuildError, MissingClockConstraint,
    InjectError, ManifestError, KbError,
)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except _USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ERROR


if __name__ == "__main__":
    sys.exit(main())
