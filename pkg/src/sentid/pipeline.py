"""End-to-end experiment loop: train, predict, decode, evaluate, aggregate.

Each seed runs the full chain on freshly drawn evaluation inputs; reports
are aggregated across seeds per (evaluation p_cc, granularity).  Every stage
output is a pure function of its inputs, the configuration, and the seed, so
re-running a stage reproduces its artifacts byte for byte; trained models
are cached in the output directory under a fingerprint of (corpus, config,
seed) and reused when present.
"""

import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from . import decode as decode_mod
from . import evaluation, model as model_mod
from .augment import AugmentConfig, example_stream
from .corpus import Corpus, RelationRuleSet, convert_treebank, parse_conllu_file
from .decode import DecoderConfig, decode_document, write_span_file
from .labels import LabelSeq, boundaries_to_bio
from .model import InterpConfig, ModelConfig, interpolate


class ConfigError(ValueError):
    """Bad pipeline configuration (reported with the offending key path)."""


class PipelineError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


GRANULARITIES = ("word", "char")


@dataclass(frozen=True)
class PipelinePaths:
    train_corpus: str = ""
    eval_corpus: str = ""
    treebank_train: str = ""
    treebank_eval: str = ""
    probs: str = ""
    output_dir: str = "runs"


@dataclass(frozen=True)
class PipelineConfig:
    seeds: tuple
    method: str = "bos_eos"
    granularities: tuple = GRANULARITIES
    paths: PipelinePaths = PipelinePaths()
    rules: RelationRuleSet = RelationRuleSet()
    augment: AugmentConfig = AugmentConfig()
    model: ModelConfig = ModelConfig()
    interp: InterpConfig = InterpConfig()
    decoder: DecoderConfig = DecoderConfig()
    eval_p_cc: tuple = (0.5, 0.0)

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("seeds: at least one seed is required")
        if self.method not in decode_mod.METHODS:
            raise ConfigError(f"method: {self.method!r} not in {decode_mod.METHODS}")
        for g in self.granularities:
            if g not in GRANULARITIES:
                raise ConfigError(f"granularities: unknown granularity {g!r}")
        for p in self.eval_p_cc:
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"eval.p_cc_values: {p} not in [0, 1]")


_SECTION_KEYS = {
    "version": None,
    "seeds": None,
    "method": None,
    "granularities": None,
    "paths": {"train_corpus", "eval_corpus", "treebank_train", "treebank_eval", "probs", "output_dir"},
    "rules": {"core_arguments", "noncore_dependents"},
    "augment": {"p_cc", "p_da", "p_tr", "max_tokens", "punct_set", "end_punct_set", "rng_seed"},
    "model": {
        "window_radius",
        "ngram_orders",
        "hash_dim",
        "max_word_chars",
        "epochs",
        "learning_rate",
        "lr_decay",
        "include_uni",
    },
    "interp": {"lam"},
    "decoder": {"candidate_threshold", "force_last_eos", "prob_floor"},
    "eval": {"p_cc_values"},
}


def _check_keys(data: dict, allowed, path: str) -> None:
    unknown = set(data) - set(allowed)
    if unknown:
        key = path + sorted(unknown)[0]
        raise ConfigError(f"unknown key {key!r}")


def config_from_dict(data: dict) -> PipelineConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    _check_keys(data, _SECTION_KEYS, "")
    version = data.get("version", 1)
    if version != 1:
        raise ConfigError(f"version: unsupported config version {version!r}")
    for section, allowed in _SECTION_KEYS.items():
        if allowed is not None and section in data:
            if not isinstance(data[section], dict):
                raise ConfigError(f"{section}: expected an object")
            _check_keys(data[section], allowed, f"{section}.")
    if "seeds" not in data:
        raise ConfigError("seeds: required")
    try:
        seeds = tuple(int(s) for s in data["seeds"])
    except (TypeError, ValueError):
        raise ConfigError("seeds: expected a list of integers") from None

    def build(section, cls, **extra):
        try:
            return cls(**{**data.get(section, {}), **extra})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{section}: {exc}") from exc

    rules_data = data.get("rules", {})
    rules = RelationRuleSet(
        core_arguments=frozenset(rules_data.get("core_arguments", RelationRuleSet().core_arguments)),
        noncore_dependents=frozenset(
            rules_data.get("noncore_dependents", RelationRuleSet().noncore_dependents)
        ),
    )
    model_data = data.get("model", {})
    if "ngram_orders" in model_data:
        model_data = {**model_data, "ngram_orders": tuple(model_data["ngram_orders"])}
    try:
        model_cfg = ModelConfig(**model_data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"model: {exc}") from exc
    eval_data = data.get("eval", {})
    return PipelineConfig(
        seeds=seeds,
        method=data.get("method", "bos_eos"),
        granularities=tuple(data.get("granularities", GRANULARITIES)),
        paths=build("paths", PipelinePaths),
        rules=rules,
        augment=build("augment", AugmentConfig),
        model=model_cfg,
        interp=build("interp", InterpConfig),
        decoder=build("decoder", DecoderConfig),
        eval_p_cc=tuple(eval_data.get("p_cc_values", (0.5, 0.0))),
    )


def load_config(path) -> PipelineConfig:
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(data)


def _fingerprint(corpus_path: str, cfg: PipelineConfig, seed: int) -> str:
    h = hashlib.sha256()
    with open(corpus_path, "rb") as f:
        h.update(f.read())
    key = {
        "augment": [cfg.augment.p_cc, cfg.augment.p_da, cfg.augment.p_tr, cfg.augment.max_tokens,
                    cfg.augment.punct_set, cfg.augment.end_punct_set],
        "model": cfg.model.to_dict(),
        "seed": seed,
    }
    h.update(json.dumps(key, sort_keys=True).encode("utf-8"))
    return h.hexdigest()[:12]


def _pcc_tag(p_cc: float) -> str:
    return str(p_cc).replace(".", "_")


def _eval_docs(eval_corpus: Corpus, cfg: PipelineConfig, p_cc: float, seed: int):
    """Concatenation-only evaluation inputs (gold units, no augmentation)."""
    stream_cfg = AugmentConfig(
        p_cc=p_cc,
        p_da=0.0,
        p_tr=0.0,
        max_tokens=cfg.augment.max_tokens,
        punct_set=cfg.augment.punct_set,
        end_punct_set=cfg.augment.end_punct_set,
    )
    return list(example_stream(eval_corpus, stream_cfg, seed, epoch=0, augment=False))


def _ensure_corpus(corpus_path: str, treebank_path: str, rules, split: str) -> Corpus:
    if corpus_path and os.path.exists(corpus_path):
        return Corpus.load(corpus_path, split=split)
    if treebank_path:
        corp = convert_treebank(parse_conllu_file(treebank_path), rules, split=split)
        if corpus_path:
            corp.save(corpus_path)
        return corp
    raise FileNotFoundError(f"no corpus at {corpus_path!r} and no treebank to convert")


def _run_seed(cfg: PipelineConfig, seed: int) -> dict:
    """Full train/predict/decode/evaluate chain for one seed.

    Returns {(p_cc, granularity): EvalReport}.
    """
    out_dir = cfg.paths.output_dir
    os.makedirs(out_dir, exist_ok=True)

    try:
        eval_corpus = _ensure_corpus(
            cfg.paths.eval_corpus, cfg.paths.treebank_eval, cfg.rules, "test"
        )
        if cfg.paths.probs:
            train_corpus = None
        else:
            train_corpus = _ensure_corpus(
                cfg.paths.train_corpus, cfg.paths.treebank_train, cfg.rules, "train"
            )
    except (OSError, ValueError) as exc:
        raise PipelineError("load-corpus", exc) from exc

    if cfg.paths.probs:
        return _run_seed_external_probs(cfg, seed, eval_corpus)

    try:
        fp = _fingerprint(cfg.paths.train_corpus, cfg, seed) if cfg.paths.train_corpus else "mem"
        model_path = os.path.join(out_dir, f"model_seed{seed}_{fp}.bin")
        if os.path.exists(model_path):
            model = model_mod.load_model(model_path)
        else:
            model = model_mod.train(
                train_corpus, cfg.augment, seed=seed, model_cfg=cfg.model
            )
            model_mod.save_model(model, model_path)
    except (OSError, ValueError) as exc:
        raise PipelineError("train", exc) from exc

    reports = {}
    for p_cc in cfg.eval_p_cc:
        tag = f"seed{seed}_pcc{_pcc_tag(p_cc)}"
        try:
            docs = _eval_docs(eval_corpus, cfg, p_cc, seed)
            matrices = [
                model_mod.predict(model, ex.words, include_uni=cfg.model.include_uni)
                for ex in docs
            ]
            model_mod.write_prob_documents(
                os.path.join(out_dir, f"probs_{tag}.tsv"),
                [(list(ex.words), m) for ex, m in zip(docs, matrices)],
            )
        except (ValueError, OSError) as exc:
            raise PipelineError("predict", exc) from exc

        try:
            if cfg.model.include_uni:
                matrices = [interpolate(m, cfg.interp) for m in matrices]
            results = [decode_document(m, cfg.method, cfg.decoder) for m in matrices]
            write_span_file(
                os.path.join(out_dir, f"spans_{tag}_{cfg.method}.jsonl"), results
            )
        except (ValueError, OSError) as exc:
            raise PipelineError("decode", exc) from exc

        try:
            for gran in cfg.granularities:
                ev = evaluation.Evaluator(granularity=gran)
                for ex, res in zip(docs, results):
                    gold = boundaries_to_bio(ex.gold)
                    ev.add_labels(
                        evaluation.to_granularity(gold, gran, ex.words),
                        evaluation.to_granularity(res.labels, gran, ex.words),
                    )
                report = ev.report()
                reports[(p_cc, gran)] = report
                path = os.path.join(out_dir, f"report_{tag}_{gran}_{cfg.method}.json")
                with open(path, "w", encoding="utf-8") as f:
                    json.dump(report.to_dict(), f, sort_keys=True, indent=2)
                    f.write("\n")
        except (ValueError, OSError) as exc:
            raise PipelineError("evaluate", exc) from exc
    return reports


def _align_docs_to_units(units, doc_lengths):
    """Partition corpus units into documents matching the given token counts."""
    docs = []
    k = 0
    for target in doc_lengths:
        chunk = []
        total = 0
        while total < target:
            if k >= len(units):
                raise evaluation.EvalError("predictions cover more tokens than the corpus")
            chunk.append(units[k])
            total += len(units[k].words)
            k += 1
        if total != target:
            raise evaluation.EvalError(
                f"document of {target} tokens does not align with unit boundaries"
            )
        docs.append(chunk)
    if k != len(units):
        raise evaluation.EvalError("predictions cover fewer tokens than the corpus")
    return docs


def _run_seed_external_probs(cfg: PipelineConfig, seed: int, eval_corpus: Corpus) -> dict:
    out_dir = cfg.paths.output_dir
    try:
        with open(cfg.paths.probs, encoding="utf-8") as f:
            prob_docs = model_mod.iter_prob_documents(f)
    except (OSError, ValueError) as exc:
        raise PipelineError("load-probs", exc) from exc
    try:
        matrices = [m for _, m in prob_docs]
        if all(m.has_uni for m in matrices) and matrices:
            matrices = [interpolate(m, cfg.interp) for m in matrices]
        results = [decode_document(m, cfg.method, cfg.decoder) for m in matrices]
        write_span_file(
            os.path.join(out_dir, f"spans_seed{seed}_ext_{cfg.method}.jsonl"), results
        )
    except (ValueError, OSError) as exc:
        raise PipelineError("decode", exc) from exc
    try:
        unit_docs = _align_docs_to_units(eval_corpus.units, [m.n for m in matrices])
        reports = {}
        for gran in cfg.granularities:
            ev = evaluation.Evaluator(granularity=gran)
            for chunk, res in zip(unit_docs, results):
                gold_parts = []
                words = []
                for u in chunk:
                    gold_parts.append(("B" + "I" * (len(u.words) - 1)) if u.is_su else "O" * len(u.words))
                    words.extend(u.words)
                gold = LabelSeq("word", "".join(gold_parts))
                ev.add_labels(
                    evaluation.to_granularity(gold, gran, words),
                    evaluation.to_granularity(res.labels, gran, words),
                )
            report = ev.report()
            reports[("ext", gran)] = report
            path = os.path.join(out_dir, f"report_seed{seed}_ext_{gran}_{cfg.method}.json")
            with open(path, "w", encoding="utf-8") as f:
                json.dump(report.to_dict(), f, sort_keys=True, indent=2)
                f.write("\n")
        return reports
    except (ValueError, OSError) as exc:
        raise PipelineError("evaluate", exc) from exc


def run_pipeline(cfg: PipelineConfig, parallel_seeds: bool = False) -> dict:
    """Run every seed and aggregate; returns {(p_cc, gran): AggregateReport}."""
    if parallel_seeds and len(cfg.seeds) > 1:
        with ProcessPoolExecutor(max_workers=min(len(cfg.seeds), os.cpu_count() or 1)) as pool:
            per_seed = list(pool.map(_run_seed_star, [(cfg, s) for s in cfg.seeds]))
    else:
        per_seed = [_run_seed(cfg, s) for s in cfg.seeds]

    aggregates = {}
    for key in per_seed[0]:
        agg = evaluation.aggregate([r[key] for r in per_seed])
        aggregates[key] = agg
        setting, gran = key
        path = os.path.join(
            cfg.paths.output_dir, f"aggregate_pcc{_pcc_tag(setting)}_{gran}_{cfg.method}.json"
        )
        with open(path, "w", encoding="utf-8") as f:
            json.dump(agg.to_dict(), f, sort_keys=True, indent=2)
            f.write("\n")
    return aggregates


def _run_seed_star(args):
    return _run_seed(*args)
