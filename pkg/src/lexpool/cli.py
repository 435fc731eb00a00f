"""Command-line pipeline: run solver modules, train weights, evaluate, solve.

Subcommands: ``modules run``, ``train``, ``eval``, ``solve``, ``gen``,
``ingest-corpus``. A key-value ``--config`` file can supply any flag's
default; explicit flags override it. Exit codes: 0 success, 1 usage error,
2 data error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import fileio, lexdata, solvers
from .core import LexpoolError, answer_key, argmax_choice, validate_forecast_set
from .evaluate import (
    PenaltyPolicy,
    SyntheticSpec,
    build_report,
    generate_synthetic,
    render_report,
    train_test_split,
)
from .merge import DEFAULT_EPSILON, RULES, WeightVector, merge
from .solvers import KindMismatch
from .train import HillClimbConfig, MissingAnswer, hill_climb

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

DEFAULT_THRESHOLD = 1.0 / 3.0


class UsageError(Exception):
    """A command-line usage problem (missing or inconsistent flags)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's default 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _need(args, *names: str) -> None:
    for name in names:
        if getattr(args, name.replace("-", "_")) is None:
            raise UsageError(f"missing required --{name}")


def _climb_config(args) -> HillClimbConfig:
    return HillClimbConfig(
        restarts=args.restarts,
        initial_step=args.initial_step,
        min_step=args.min_step,
        max_evaluations=args.max_evaluations,
        seed=args.seed,
        include_deterministic_starts=not args.no_deterministic_starts,
    )


def _align_weights(weights: WeightVector, file_module_ids, fs_module_ids) -> WeightVector:
    """Reorder file weights to the forecast set's module order."""
    by_id = dict(zip(file_module_ids, weights.w))
    missing = [m for m in fs_module_ids if m not in by_id]
    extra = [m for m in file_module_ids if m not in set(fs_module_ids)]
    if missing or extra:
        raise LexpoolError(
            f"weight file modules do not match forecasts "
            f"(missing {missing or 'none'}, extra {extra or 'none'})"
        )
    return WeightVector(weights.rule, tuple(by_id[m] for m in fs_module_ids), weights.epsilon)


def _build_modules(args, kind: str) -> list[solvers.SolverModule]:
    graph = lexdata.load_graph(args.graph) if args.graph else None
    if bool(args.cooc_pairs) != bool(args.cooc_unigrams):
        raise UsageError("--cooc-pairs and --cooc-unigrams must be given together")
    if kind == "synonym":
        offending = [flag for flag, value in (
            ("--patterns", args.patterns), ("--hits", args.hits),
            ("--definitions", args.definitions),
        ) if value]
        if offending:
            raise KindMismatch(f"{', '.join(offending)} build analogy solvers, "
                               f"but the question file holds synonym questions")
        cooc = (lexdata.load_cooccurrence(args.cooc_pairs, args.cooc_unigrams)
                if args.cooc_pairs else None)
        emb = lexdata.load_embeddings(args.embeddings) if args.embeddings else None
        return solvers.synonym_modules(graph=graph, cooccurrence=cooc, embeddings=emb)

    offending = [flag for flag, value in (
        ("--embeddings", args.embeddings), ("--cooc-pairs", args.cooc_pairs),
    ) if value]
    if offending:
        raise KindMismatch(f"{', '.join(offending)} build synonym solvers, "
                           f"but the question file holds analogy questions")
    patterns = lexdata.load_pattern_table(args.patterns, args.hits) if args.hits else None
    definitions = {}
    for path in args.definitions or []:
        name = Path(path).stem
        if name in definitions:
            raise UsageError(f"duplicate definition table name {name!r}")
        definitions[name] = lexdata.load_definitions(path)
    return solvers.analogy_modules(patterns=patterns, graph=graph, definitions=definitions)


def cmd_modules_run(args) -> int:
    _need(args, "questions", "out")
    questions = fileio.read_questions(args.questions)
    modules = _build_modules(args, questions[0].kind)
    if not modules:
        raise UsageError("no module data given; pass --graph, --embeddings, "
                         "--cooc-pairs/--cooc-unigrams, --hits, or --definitions")
    fs = solvers.run_modules(modules, questions)
    check = validate_forecast_set(fs, questions)
    if not check.ok:
        raise LexpoolError(f"module outputs failed validation:\n{check}")
    fileio.write_forecasts(args.out, fs)
    print(f"wrote {fs.n_instances} x {fs.n_modules} forecasts to {args.out}")
    return EXIT_OK


def _training_ids(args, questions) -> list[str]:
    ids = [q.id for q in questions]
    if args.split_ratio is None:
        return ids
    train_ids, _ = train_test_split(ids, args.split_ratio, args.split_seed)
    if not train_ids:
        raise LexpoolError("train split is empty")
    return train_ids


def cmd_train(args) -> int:
    _need(args, "questions", "forecasts", "out")
    questions = fileio.read_questions(args.questions)
    fs = fileio.read_forecasts(args.forecasts)
    answers = answer_key(questions)
    train_ids = _training_ids(args, questions)
    fs_train = fs.restrict(train_ids)
    if fs_train.n_instances < len(train_ids):
        missing = sorted(set(train_ids) - set(fs_train.instance_ids))
        raise LexpoolError(f"no forecasts for training instance(s): {missing[:5]}")
    rules = list(RULES) if args.rule == "all" else [args.rule]
    cfg = _climb_config(args)
    for rule in rules:
        trained = hill_climb(rule, fs_train, answers, cfg, epsilon=args.epsilon)
        out = args.out if len(rules) == 1 else f"{args.out}.{rule}"
        fileio.write_weights(out, trained.weights, fs_train.module_ids,
                             trained.train_mean_likelihood, args.seed)
        print(f"{rule}: train mean likelihood {trained.train_mean_likelihood:.4f} "
              f"({trained.evaluations_used} evaluations, best start {trained.best_start}) -> {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    _need(args, "questions", "forecasts")
    questions = fileio.read_questions(args.questions)
    fs = fileio.read_forecasts(args.forecasts)
    answers = answer_key(questions)
    ids = [q.id for q in questions]
    if args.split_ratio is not None:
        train_ids, test_ids = train_test_split(ids, args.split_ratio, args.split_seed)
        if not train_ids or not test_ids:
            raise LexpoolError("split left one side empty")
    else:
        train_ids = test_ids = ids
    fs_train = fs.restrict(train_ids)
    fs_test = fs.restrict(test_ids)
    try:
        answers_test = [answers[h] for h in test_ids]
    except KeyError as exc:
        raise MissingAnswer(f"no answer for instance {exc.args[0]!r}") from None

    cfg = _climb_config(args)
    rows: dict[str, list] = {}
    for module_id in fs.module_ids:
        trained = hill_climb("product", fs_train.select_modules([module_id]), answers, cfg,
                             epsilon=args.epsilon)
        solo = fs_test.select_modules([module_id])
        rows[module_id] = [merge(trained.weights, solo, h) for h in test_ids]
    for path in args.weights or []:
        weights, module_ids, _ = fileio.read_weights(path)
        aligned = _align_weights(weights, module_ids, fs_test.module_ids)
        name = f"merged:{weights.rule}"
        if name in rows:
            name = f"{name}:{Path(path).name}"
        rows[name] = [merge(aligned, fs_test, h) for h in test_ids]

    policy = PenaltyPolicy(args.reward, args.penalty, args.threshold)
    report = build_report(rows, answers_test, policy, ci_level=args.ci_level)
    header = [
        f"split seed={args.split_seed} ratio={args.split_ratio} "
        f"train={len(train_ids)} test={len(test_ids)}",
        f"ci_level={args.ci_level} reward={args.reward} penalty={args.penalty} "
        f"threshold={args.threshold:.4f}",
        "individual modules trained alone with the product rule",
    ]
    text = render_report(report, header)
    sys.stdout.write(text)
    if args.out:
        fileio.atomic_write_text(args.out, text)
    return EXIT_OK


def cmd_solve(args) -> int:
    _need(args, "questions", "forecasts", "weights")
    questions = fileio.read_questions(args.questions)
    fs = fileio.read_forecasts(args.forecasts)
    check = validate_forecast_set(fs, questions)
    if not check.ok:
        raise LexpoolError(f"forecasts do not line up with the questions:\n{check}")
    weights, module_ids, _ = fileio.read_weights(args.weights)
    aligned = _align_weights(weights, module_ids, fs.module_ids)
    rows = []
    for q in questions:
        dist = merge(aligned, fs, q.id)
        top = argmax_choice(dist)
        prob = float(dist[top - 1])
        if args.skip and prob <= args.threshold:
            rows.append((q.id, None, prob))
        else:
            rows.append((q.id, top, prob))
    text = fileio.format_solution_rows(rows)
    if args.out:
        fileio.atomic_write_text(args.out, text)
        print(f"wrote {len(rows)} answers to {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_gen(args) -> int:
    _need(args, "accuracies", "instances", "choices", "out_dir")
    try:
        accuracies = tuple(float(a) for a in args.accuracies.split(",") if a.strip())
    except ValueError:
        raise UsageError(f"--accuracies must be comma-separated floats, got {args.accuracies!r}")
    spec = SyntheticSpec(accuracies, args.instances, args.choices, args.mass, args.seed)
    questions, fs, answers = generate_synthetic(spec)
    out_dir = Path(args.out_dir)
    fileio.write_questions(out_dir / "questions.tsv", questions)
    fileio.write_forecasts(out_dir / "forecasts.tsv", fs)
    fileio.write_answers(out_dir / "answers.tsv", answers)
    print(f"wrote questions.tsv, forecasts.tsv, answers.tsv to {out_dir}")
    return EXIT_OK


def cmd_ingest_corpus(args) -> int:
    _need(args, "input", "out_pairs", "out_unigrams")
    path = Path(args.input)
    if not path.exists():
        raise LexpoolError(f"corpus file missing: {path}")
    table = lexdata.ingest_corpus(path.read_text(encoding="utf-8"), args.window)
    lexdata.write_cooccurrence(table, args.out_pairs, args.out_unigrams)
    print(f"counted {table.total_tokens} tokens, {len(table.pair_counts)} pairs "
          f"(window {table.window})")
    return EXIT_OK


def _add_config_flag(parser) -> None:
    parser.add_argument("--config", help="key-value file supplying flag defaults")


def _add_climb_flags(parser) -> None:
    parser.add_argument("--restarts", type=int, default=10, help="random restarts (default 10)")
    parser.add_argument("--seed", type=int, default=0, help="training seed (default 0)")
    parser.add_argument("--initial-step", type=float, default=0.05)
    parser.add_argument("--min-step", type=float, default=1e-4)
    parser.add_argument("--max-evaluations", type=int, default=100_000)
    parser.add_argument("--no-deterministic-starts", action="store_true",
                        help="drop the equal-weights and single-module starts")
    parser.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON,
                        help="zero-probability floor for the logarithmic rule")


def _add_split_flags(parser) -> None:
    parser.add_argument("--split-ratio", type=float, default=None,
                        help="train fraction for a seeded random split (default: no split)")
    parser.add_argument("--split-seed", type=int, default=0)


def build_parser() -> tuple[_Parser, list[argparse.ArgumentParser]]:
    parser = _Parser(prog="lexpool", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="command")
    leaves: list[argparse.ArgumentParser] = []

    modules_p = sub.add_parser("modules", help="solver module commands")
    modules_sub = modules_p.add_subparsers(dest="modules_command", metavar="subcommand")
    run_p = modules_sub.add_parser("run", help="run solver modules over a question file")
    run_p.add_argument("--questions", help="question file")
    run_p.add_argument("--out", help="forecast file to write")
    run_p.add_argument("--graph", help="lexical graph file")
    run_p.add_argument("--embeddings", help="word-vector file (synonym questions)")
    run_p.add_argument("--cooc-pairs", help="co-occurrence pair-count file (synonym questions)")
    run_p.add_argument("--cooc-unigrams", help="co-occurrence unigram-count file")
    run_p.add_argument("--patterns", help="phrase template file (default: bundled 128)")
    run_p.add_argument("--hits", help="pattern hit-count file (analogy questions)")
    run_p.add_argument("--definitions", action="append",
                       help="definition file (repeatable; analogy questions)")
    run_p.set_defaults(func=cmd_modules_run)
    leaves.append(run_p)

    train_p = sub.add_parser("train", help="fit merging-rule weights by maximum likelihood")
    train_p.add_argument("--questions")
    train_p.add_argument("--forecasts")
    train_p.add_argument("--rule", choices=[*RULES, "all"], default="product")
    train_p.add_argument("--out", help="weight file (suffixed .<rule> when --rule all)")
    _add_split_flags(train_p)
    _add_climb_flags(train_p)
    train_p.set_defaults(func=cmd_train)
    leaves.append(train_p)

    eval_p = sub.add_parser("eval", help="score individual modules and merged rules")
    eval_p.add_argument("--questions")
    eval_p.add_argument("--forecasts")
    eval_p.add_argument("--weights", action="append", help="trained weight file (repeatable)")
    eval_p.add_argument("--out", help="also write the report here")
    eval_p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD,
                        help="guess only above this probability (default 1/3)")
    eval_p.add_argument("--reward", type=float, default=1.0)
    eval_p.add_argument("--penalty", type=float, default=-0.5)
    eval_p.add_argument("--ci-level", type=float, default=0.95)
    _add_split_flags(eval_p)
    _add_climb_flags(eval_p)
    eval_p.set_defaults(func=cmd_eval)
    leaves.append(eval_p)

    solve_p = sub.add_parser("solve", help="answer questions with trained weights")
    solve_p.add_argument("--questions")
    solve_p.add_argument("--forecasts")
    solve_p.add_argument("--weights", help="trained weight file")
    solve_p.add_argument("--out", help="answer file (default: stdout)")
    solve_p.add_argument("--skip", action="store_true",
                         help="skip instances whose top probability is at or below the threshold")
    solve_p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    solve_p.set_defaults(func=cmd_solve)
    leaves.append(solve_p)

    gen_p = sub.add_parser("gen", help="generate a synthetic benchmark")
    gen_p.add_argument("--accuracies", help="comma-separated module accuracies, e.g. 0.6,0.6,0.6")
    gen_p.add_argument("--instances", type=int)
    gen_p.add_argument("--choices", type=int)
    gen_p.add_argument("--mass", type=float, default=0.7,
                       help="probability mass on the picked choice (default 0.7)")
    gen_p.add_argument("--seed", type=int, default=0)
    gen_p.add_argument("--out-dir")
    gen_p.set_defaults(func=cmd_gen)
    leaves.append(gen_p)

    ingest_p = sub.add_parser("ingest-corpus", help="build co-occurrence files from plain text")
    ingest_p.add_argument("--input", help="plain-text corpus file")
    ingest_p.add_argument("--window", type=int, default=10)
    ingest_p.add_argument("--out-pairs")
    ingest_p.add_argument("--out-unigrams")
    ingest_p.set_defaults(func=cmd_ingest_corpus)
    leaves.append(ingest_p)

    for leaf in leaves:
        _add_config_flag(leaf)
    return parser, leaves


def _coerce_config_value(action, value: str):
    if isinstance(action, argparse._StoreTrueAction):
        return value.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(action, argparse._AppendAction):
        return [item for item in value.split(",") if item]
    if action.type is not None:
        return action.type(value)
    return value


def _apply_config(leaves, config: dict[str, str]) -> None:
    for leaf in leaves:
        defaults = {}
        for action in leaf._actions:
            if not action.option_strings:
                continue
            key = action.dest.replace("_", "-")
            if key in config:
                defaults[action.dest] = _coerce_config_value(action, config[key])
        leaf.set_defaults(**defaults)


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser, leaves = build_parser()
    try:
        pre = argparse.ArgumentParser(add_help=False)
        pre.add_argument("--config", default=None)
        known, _ = pre.parse_known_args(argv)
        if known.config:
            _apply_config(leaves, fileio.read_config(known.config))
        args = parser.parse_args(argv)
        func = getattr(args, "func", None)
        if func is None:
            parser.print_usage(sys.stderr)
            print("lexpool: error: missing subcommand", file=sys.stderr)
            return EXIT_USAGE
        result = func(args)
        return EXIT_OK if result is None else result
    except SystemExit as exc:  # argparse --help or usage error
        code = exc.code
        return EXIT_OK if code is None else int(code)
    except UsageError as exc:
        print(f"lexpool: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (LexpoolError, ValueError) as exc:
        print(f"lexpool: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"lexpool: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
