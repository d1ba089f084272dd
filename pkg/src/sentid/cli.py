"""Command-line interface.

Subcommands: convert, train, predict, decode, augment, evaluate, pipeline.
Exit codes: 0 success, 1 usage/config error, 2 data error, 3 internal error.
"""

import argparse
import glob
import json
import os
import sys
import traceback

from . import augment as augment_mod
from . import corpus as corpus_mod
from . import decode as decode_mod
from . import evaluation, model as model_mod
from . import pipeline as pipeline_mod
from .labels import LabelError, LabelSeq
from .pipeline import ConfigError

CLI_METHODS = {"eos": "eos", "eos-force": "eos_force", "bosEos": "bos_eos"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _from_flags(factory):
    """Build a config object from flag values; bad values are usage errors."""
    try:
        return factory()
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _load_rules(source: str) -> corpus_mod.RelationRuleSet:
    if source in ("", "default"):
        return corpus_mod.DEFAULT_RULES
    return corpus_mod.RelationRuleSet.from_file(source)


def cmd_convert(args) -> int:
    rules = _load_rules(args.rules)
    if os.path.isdir(args.input):
        paths = sorted(glob.glob(os.path.join(args.input, "*.conllu")))
        if not paths:
            raise FileNotFoundError(f"no .conllu files under {args.input}")
    else:
        paths = [args.input]
    sents = []
    for p in paths:
        sents.extend(corpus_mod.parse_conllu_file(p))
    corp = corpus_mod.convert_treebank(sents, rules, split=args.split)
    corp.save(args.output)
    if args.stats:
        stats = corpus_mod.compute_stats(corp)
        with open(args.stats, "w", encoding="utf-8") as f:
            json.dump(stats.to_dict(), f, sort_keys=True, indent=2)
            f.write("\n")
    print(f"converted {len(sents)} sentences -> {len(corp.units)} units ({args.output})")
    return 0


def cmd_train(args) -> int:
    aug_cfg = _from_flags(
        lambda: augment_mod.AugmentConfig(
            p_cc=args.pcc, p_da=args.pda, p_tr=args.ptr, max_tokens=args.max_tokens
        )
    )
    model_cfg = _from_flags(
        lambda: model_mod.ModelConfig(
            window_radius=args.window,
            hash_dim=args.hash_dim,
            epochs=args.epochs,
            learning_rate=args.lr,
            include_uni=args.uni,
        )
    )
    corp = corpus_mod.Corpus.load(args.corpus)
    model = model_mod.train(corp, aug_cfg, seed=args.seed, model_cfg=model_cfg)
    model_mod.save_model(model, args.out)
    print(f"trained {len(model.head_names)} heads on {len(corp.units)} units -> {args.out}")
    return 0


def cmd_predict(args) -> int:
    model = model_mod.load_model(args.model)
    with open(args.input, encoding="utf-8") as f:
        docs = [line.split() for line in f if line.strip()]
    include_uni = model.config.include_uni
    pairs = []
    for words in docs:
        m = model_mod.predict(model, words, include_uni=include_uni)
        pairs.append((words, m))
    model_mod.write_prob_documents(args.out, pairs)
    print(f"wrote probabilities for {len(pairs)} documents -> {args.out}")
    return 0


def cmd_decode(args) -> int:
    cfg = _from_flags(lambda: decode_mod.DecoderConfig(candidate_threshold=args.threshold))
    interp = _from_flags(lambda: model_mod.InterpConfig(lam=args.lam))
    if args.probs == "-":
        docs = model_mod.iter_prob_documents(sys.stdin.read())
    else:
        with open(args.probs, encoding="utf-8") as f:
            docs = model_mod.iter_prob_documents(f)
    method = CLI_METHODS[args.method]
    results = []
    for _, m in docs:
        if m.has_uni:
            m = model_mod.interpolate(m, interp)
        results.append(decode_mod.decode_document(m, method, cfg))
    if args.out:
        decode_mod.write_span_file(args.out, results)
    else:
        for r in results:
            rec = {
                "spans": [list(sp) for sp in r.su_spans],
                "labels": r.labels.labels,
                "log_prob": r.log_prob,
            }
            print(json.dumps(rec))
    return 0


def cmd_augment(args) -> int:
    cfg = _from_flags(
        lambda: augment_mod.AugmentConfig(
            p_cc=args.pcc, p_da=args.pda, p_tr=args.ptr,
            max_tokens=args.max_tokens, rng_seed=args.seed,
        )
    )
    corp = corpus_mod.Corpus.load(args.corpus)
    examples = augment_mod.generate_examples(corp, cfg, seed=args.seed, count=args.count)
    augment_mod.write_examples(args.out, examples)
    print(f"wrote {len(examples)} examples -> {args.out}")
    return 0


def _gold_for_docs(units, results):
    docs = pipeline_mod._align_docs_to_units(units, [r.n for r in results])
    out = []
    for chunk in docs:
        parts = []
        words = []
        for u in chunk:
            parts.append(("B" + "I" * (len(u.words) - 1)) if u.is_su else "O" * len(u.words))
            words.extend(u.words)
        out.append((LabelSeq("word", "".join(parts)), words))
    return out


def format_report(report: evaluation.EvalReport) -> str:
    lines = [f"{'label':<8}{'prec':>8}{'recall':>8}{'f1':>8}{'support':>9}"]
    for lab in evaluation.LABELS:
        if lab in report.per_label:
            s = report.per_label[lab]
            lines.append(
                f"{lab:<8}{100 * s.precision:>8.2f}{100 * s.recall:>8.2f}"
                f"{100 * s.f1:>8.2f}{s.support:>9d}"
            )
    lines.append(f"{'macro':<8}{'':>16}{100 * report.macro_f1:>8.2f}")
    lines.append(f"{'weighted':<8}{'':>16}{100 * report.weighted_f1:>8.2f}")
    lines.append(
        f"{'span':<8}{100 * report.span_precision:>8.2f}{100 * report.span_recall:>8.2f}"
        f"{100 * report.span_f1:>8.2f}"
    )
    if report.flags:
        lines.append(f"flags: {', '.join(report.flags)}")
    return "\n".join(lines)


def format_aggregate(agg: evaluation.AggregateReport) -> str:
    lines = [f"{'metric':<16}{'mean':>8}  {'std':>6}   (n={agg.n_runs}, {agg.granularity}-level)"]
    for name, stat in agg.metrics.items():
        lines.append(f"{name:<16}{100 * stat.mean:>8.2f} ±{100 * stat.std:>6.2f}")
    for lab, stat in agg.label_f1.items():
        lines.append(f"{lab + '-f1':<16}{100 * stat.mean:>8.2f} ±{100 * stat.std:>6.2f}")
    return "\n".join(lines)


def cmd_evaluate(args) -> int:
    if args.aggregate:
        paths = sorted(glob.glob(os.path.join(args.aggregate, "report_*.json")))
        if not paths:
            raise FileNotFoundError(f"no report_*.json files under {args.aggregate}")
        reports = []
        for p in paths:
            with open(p, encoding="utf-8") as f:
                reports.append(evaluation.EvalReport.from_dict(json.load(f)))
        agg = evaluation.aggregate(reports)
        print(format_aggregate(agg))
        if args.out:
            with open(args.out, "w", encoding="utf-8") as f:
                json.dump(agg.to_dict(), f, sort_keys=True, indent=2)
                f.write("\n")
        return 0
    corp = corpus_mod.Corpus.load(args.gold)
    results = decode_mod.read_span_file(args.pred)
    ev = evaluation.Evaluator(granularity=args.granularity)
    for (gold, words), res in zip(_gold_for_docs(corp.units, results), results):
        ev.add_labels(
            evaluation.to_granularity(gold, args.granularity, words),
            evaluation.to_granularity(res.labels, args.granularity, words),
        )
    report = ev.report()
    print(format_report(report))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            json.dump(report.to_dict(), f, sort_keys=True, indent=2)
            f.write("\n")
    return 0


def cmd_pipeline(args) -> int:
    cfg = pipeline_mod.load_config(args.config)
    if args.output_dir or args.seed is not None:
        cfg = pipeline_mod.PipelineConfig(
            seeds=(args.seed,) if args.seed is not None else cfg.seeds,
            method=cfg.method,
            granularities=cfg.granularities,
            paths=pipeline_mod.PipelinePaths(
                train_corpus=cfg.paths.train_corpus,
                eval_corpus=cfg.paths.eval_corpus,
                treebank_train=cfg.paths.treebank_train,
                treebank_eval=cfg.paths.treebank_eval,
                probs=cfg.paths.probs,
                output_dir=args.output_dir or cfg.paths.output_dir,
            ),
            rules=cfg.rules,
            augment=cfg.augment,
            model=cfg.model,
            interp=cfg.interp,
            decoder=cfg.decoder,
            eval_p_cc=cfg.eval_p_cc,
        )
    aggregates = pipeline_mod.run_pipeline(cfg, parallel_seeds=args.parallel_seeds)
    for (setting, gran), agg in aggregates.items():
        print(f"== p_cc={setting} {gran}-level ({cfg.method}) ==")
        print(format_aggregate(agg))
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="sentid", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="CoNLL-U treebank to benchmark corpus")
    p.add_argument("--input", required=True, help="conllu file or directory")
    p.add_argument("--rules", default="default", help="relation rules JSON or 'default'")
    p.add_argument("--output", required=True)
    p.add_argument("--stats", default="", help="also write corpus statistics JSON")
    p.add_argument("--split", default="train", choices=("train", "dev", "test"))
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("train", help="train the begin/end probability model")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--uni", action="store_true", help="also train unidirectional heads")
    p.add_argument("--pcc", type=float, default=0.5)
    p.add_argument("--pda", type=float, default=0.3)
    p.add_argument("--ptr", type=float, default=0.1)
    p.add_argument("--max-tokens", type=int, default=512)
    p.add_argument("--hash-dim", type=int, default=2**18)
    p.add_argument("--lr", type=float, default=0.2)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="write per-token probabilities")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True, help="one whitespace-tokenized document per line")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("decode", help="extract spans from a probability file")
    p.add_argument("--probs", required=True, help="probability file or - for stdin")
    p.add_argument("--method", required=True, choices=tuple(CLI_METHODS))
    p.add_argument("--threshold", type=float, default=0.1, help="candidate threshold c")
    p.add_argument("--lambda", dest="lam", type=float, default=0.5,
                   help="unidirectional interpolation weight")
    p.add_argument("--out", default="", help="span file (default: stdout)")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("augment", help="emit concatenated/augmented examples")
    p.add_argument("--corpus", required=True)
    p.add_argument("--pcc", type=float, default=0.5)
    p.add_argument("--pda", type=float, default=0.3)
    p.add_argument("--ptr", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--max-tokens", type=int, default=512)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("evaluate", help="score predicted spans against a gold corpus")
    p.add_argument("--gold", help="gold corpus JSONL")
    p.add_argument("--pred", help="predicted span file")
    p.add_argument("--granularity", default="word", choices=("word", "char"))
    p.add_argument("--aggregate", default="", help="aggregate report_*.json files in a directory")
    p.add_argument("--out", default="", help="also write the JSON report here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("pipeline", help="run the full multi-seed experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--output-dir", default="")
    p.add_argument("--seed", type=int, default=None, help="run a single seed instead of the configured list")
    p.add_argument("--parallel-seeds", action="store_true")
    p.set_defaults(func=cmd_pipeline)
    return parser


DATA_ERRORS = (
    corpus_mod.ConlluError,
    model_mod.ProbFileError,
    LabelError,
    evaluation.EvalError,
    pipeline_mod.PipelineError,
    FileNotFoundError,
    ValueError,
)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "evaluate" and not args.aggregate:
            if not args.gold or not args.pred:
                raise UsageError("evaluate requires --gold and --pred (or --aggregate)")
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except Exception:
        traceback.print_exc()
        return 3


if __name__ == "__main__":
    sys.exit(main())
