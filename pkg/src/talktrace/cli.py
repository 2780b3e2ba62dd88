"""Operator command line: attribute, evaluate, generate, kappa, serve.

Exit codes: 0 on success, 1 on domain errors (bad files, backend failures),
2 on usage errors. Tables print floats at 3 decimals; --json emits full
precision.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .attribution import Method, attribute
from .dialogue import TargetResponse, load_dialogue
from .errors import TalktraceError
from .evaluation import (
    NOISE_CLEAN,
    NOISE_HARD,
    cohen_kappa,
    evaluate,
    format_metrics_table,
    generate_synthetic,
    load_annotations,
    load_corpus,
    save_corpus,
)
from .scoring import CachingScorer, ScorerBackendConfig, build_scorer

_METHOD_CHOICES = [m.value for m in Method]
_ALL_METHODS = [Method.HIERARCHICAL, Method.FLAT_DROP_HOLD, Method.FLAT_LOO, Method.SIMILARITY]


def _add_scorer_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--scorer", choices=["lexical", "remote"], default="lexical")
    parser.add_argument("--endpoint", default="", help="remote scorer endpoint URL")
    parser.add_argument("--model", default="", help="remote scorer model name")
    parser.add_argument(
        "--cache",
        default=None,
        help="score cache file (env ATTRIB_CACHE overrides; default: no persistence)",
    )


def _build_scorer(args: argparse.Namespace) -> CachingScorer:
    cache_path = os.environ.get("ATTRIB_CACHE", args.cache)
    config = ScorerBackendConfig(
        kind=args.scorer, endpoint_url=args.endpoint, model_name=args.model
    )
    return build_scorer(config, cache_path=cache_path)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="talktrace")
    sub = parser.add_subparsers(dest="command", required=True)

    p_attr = sub.add_parser("attribute", help="find the evidence sentence for a response")
    p_attr.add_argument("--dialogue", required=True, help="dialogue JSON file")
    p_attr.add_argument("--target", required=True, help="the recommended strategy text")
    p_attr.add_argument("--method", choices=_METHOD_CHOICES, default=Method.HIERARCHICAL.value)
    p_attr.add_argument("--json", action="store_true", help="emit machine-readable JSON")
    _add_scorer_flags(p_attr)

    p_eval = sub.add_parser("evaluate", help="score attribution methods on a corpus")
    p_eval.add_argument("--corpus", required=True, help="benchmark JSONL file")
    p_eval.add_argument("--method", choices=_METHOD_CHOICES, default=Method.HIERARCHICAL.value)
    p_eval.add_argument("--all-methods", action="store_true", help="report every method")
    p_eval.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p_eval.add_argument("--json", action="store_true")
    _add_scorer_flags(p_eval)

    p_gen = sub.add_parser("generate", help="write a synthetic planted-evidence corpus")
    p_gen.add_argument("--out", required=True)
    p_gen.add_argument("--cases", type=int, required=True)
    p_gen.add_argument("--turns", type=int, required=True)
    p_gen.add_argument("--seed", type=int, required=True)
    p_gen.add_argument("--hard", action="store_true", help="leak target tokens into noise")

    p_kappa = sub.add_parser("kappa", help="inter-annotator agreement between two label files")
    p_kappa.add_argument("--a", required=True, dest="file_a")
    p_kappa.add_argument("--b", required=True, dest="file_b")

    p_serve = sub.add_parser("serve", help="run the dialogue session service")
    p_serve.add_argument("--config", required=True, help="service config JSON file")
    p_serve.add_argument("--host", default=None, help="override the configured host")
    p_serve.add_argument("--port", type=int, default=None, help="override the configured port")
    p_serve.add_argument("--store-path", default=None, help="override the session store file")

    return parser


def _format_attribution(result_dict: dict) -> str:
    lines = [f"Method: {Method(result_dict['method']).display}"]
    if result_dict["selected_turn"] is not None:
        lines.append(f"Selected turn: {result_dict['selected_turn']}")
    if result_dict["turn_gains"]:
        gains = "  ".join(
            f"{g['turn_index']}: {g['gain']:.3f}" for g in result_dict["turn_gains"]
        )
        lines.append(f"Turn gains: {gains}")
    evidence = result_dict["evidence"]
    lines.append(
        f"Evidence (turn {evidence['turn_index']}, sentence {evidence['sentence_index']}, "
        f"chars {evidence['start_char']}-{evidence['end_char']}): {evidence['text']}"
    )
    lines.append("")
    lines.append(f"{'Rank':<5}{'Turn':<5}{'Sent':<5}{'Drop':>8}{'Hold':>8}{'Phi':>8}  Text")
    for rank, score in enumerate(result_dict["ranked"], start=1):
        lines.append(
            f"{rank:<5}{score['turn_index']:<5}{score['sentence_index']:<5}"
            f"{score['drop']:>8.3f}{score['hold']:>8.3f}{score['phi']:>8.3f}  {score['text']}"
        )
    return "\n".join(lines)


def _cmd_attribute(args: argparse.Namespace) -> int:
    dialogue = load_dialogue(args.dialogue)
    scorer = _build_scorer(args)
    result = attribute(dialogue, TargetResponse(args.target), scorer, Method(args.method))
    payload = result.to_dict()
    if args.json:
        print(json.dumps(payload, ensure_ascii=False))
    else:
        print(_format_attribution(payload))
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    cases = load_corpus(args.corpus)
    scorer = _build_scorer(args)
    methods = _ALL_METHODS if args.all_methods else [Method(args.method)]
    reports = [evaluate(cases, method, scorer, jobs=args.jobs) for method in methods]
    if args.json:
        print(json.dumps([r.to_dict() for r in reports], ensure_ascii=False))
    else:
        print(format_metrics_table(reports))
    return 0


def _cmd_generate(args: argparse.Namespace) -> int:
    noise = NOISE_HARD if args.hard else NOISE_CLEAN
    cases = generate_synthetic(
        n_cases=args.cases, n_turns=args.turns, seed=args.seed, noise=noise
    )
    save_corpus(cases, args.out)
    print(f"wrote {len(cases)} cases to {args.out}")
    return 0


def _cmd_kappa(args: argparse.Namespace) -> int:
    value = cohen_kappa(load_annotations(args.file_a), load_annotations(args.file_b))
    print(f"{value:.3f}")
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import dataclasses

    import uvicorn

    from .service import ServiceConfig, create_app

    config = ServiceConfig.from_file(args.config)
    overrides = {
        key: value
        for key, value in {
            "host": args.host,
            "port": args.port,
            "store_path": args.store_path,
        }.items()
        if value is not None
    }
    if overrides:
        config = dataclasses.replace(config, **overrides)
    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port)
    return 0


_COMMANDS = {
    "attribute": _cmd_attribute,
    "evaluate": _cmd_evaluate,
    "generate": _cmd_generate,
    "kappa": _cmd_kappa,
    "serve": _cmd_serve,
}


def run(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (TalktraceError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc.filename or ''}: {exc.strerror or exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
