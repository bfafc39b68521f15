"""Command-line entry point: ``skillaudit audit|batch|stats|gen-corpus``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import Config
from .errors import AuditError, InputError
from .judge import make_judge
from .rubric import VERSIONS

EXIT_OK, EXIT_INPUT, EXIT_INTERNAL = 0, 2, 3


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI file layered over the bundled defaults")
    common.add_argument("--judge", choices=("rule", "remote"), default="rule")
    common.add_argument("--framework-version", choices=VERSIONS, default=None,
                        help="rubric version; defaults to the configured one (1.1.0)")
    common.add_argument("--deterministic", action="store_true", help="zero all timestamps")
    common.add_argument("--seed", type=int, default=42, help="test-input selection seed")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="skillaudit", description="Audit agent skills and run agreement studies.")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("audit", parents=[common], help="audit one skill directory")
    a.add_argument("skill", type=Path)
    a.add_argument("--category", help="1-5 or a category name; defaults to the manifest's category key")
    a.add_argument("--reference-bundle", type=Path)
    a.add_argument("--out", type=Path, help="write <skill>.json and <skill>.md here instead of stdout")
    a.add_argument("--format", choices=("json", "markdown"), default="json")

    b = sub.add_parser("batch", parents=[common], help="audit every skill under a directory")
    b.add_argument("root", type=Path)
    b.add_argument("--out", type=Path, required=True)
    b.add_argument("--category")
    b.add_argument("--reference-bundle", type=Path)
    b.add_argument("--workers", type=int)

    s = sub.add_parser("stats", parents=[common], help="agreement study from ratings and reports")
    s.add_argument("--ratings", type=Path, required=True)
    s.add_argument("--reports", type=Path, required=True)
    s.add_argument("--out", type=Path, required=True)

    g = sub.add_parser("gen-corpus", parents=[common], help="generate a synthetic fixture corpus")
    g.add_argument("--spec", type=Path, required=True)
    g.add_argument("--out", type=Path, required=True)
    g.add_argument("--overwrite", action="store_true")
    return p


def _settings(args, config: Config):
    from .pipeline import AuditSettings
    from .research_gate import load_reference_bundle

    bundle = None
    if getattr(args, "reference_bundle", None):
        bundle = load_reference_bundle(args.reference_bundle)
    return AuditSettings(
        config=config,
        judge=make_judge(args.judge, config),
        judge_name=args.judge,
        framework_version=args.framework_version,
        seed=args.seed,
        deterministic=args.deterministic,
        reference_bundle=bundle,
    )


def run(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    config = Config.load(args.config)

    if args.command == "audit":
        from .pipeline import audit_skill, write_report
        from .report import emit_json, emit_markdown

        outcome = audit_skill(args.skill, args.category, _settings(args, config))
        if args.out:
            print(write_report(outcome.report, args.out))
        elif args.format == "json":
            sys.stdout.write(emit_json(outcome.report).decode("utf-8"))
        else:
            sys.stdout.write(emit_markdown(outcome.report))
    elif args.command == "batch":
        from .pipeline import batch_audit

        outcomes = batch_audit(args.root, args.out, _settings(args, config), args.workers, args.category)
        for o in outcomes:
            print(f"{o.report.skill_id}\t{o.report.disposition}\t{o.report.final}")
    elif args.command == "stats":
        from .study import run_study

        result = run_study(args.ratings, args.reports, args.out)
        for name in result.files:
            print(args.out / name)
    elif args.command == "gen-corpus":
        from .corpus import generate_fixture_corpus, load_corpus_spec

        skills = generate_fixture_corpus(load_corpus_spec(args.spec), args.seed, args.out, args.overwrite)
        print(f"wrote {len(skills)} skills to {args.out}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    try:
        return run(argv)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (AuditError, OSError) as exc:
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
