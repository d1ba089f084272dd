"""Scoring: per-label F1, macro/weighted averages, exact span F1, seed stats.

Confusion counts and span matches are pooled over all documents of a run
(corpus-level micro aggregation), then turned into scores once.  A predicted
span is correct only when both endpoints equal a gold span's.  Multi-seed
results are summarized as mean and sample standard deviation.
"""

import math
from dataclasses import dataclass, field

from .labels import LabelSeq, coarse_to_chars

LABELS = ("B", "I", "O")


class EvalError(ValueError):
    pass


@dataclass(frozen=True)
class LabelScore:
    precision: float
    recall: float
    f1: float
    support: int
    predicted: int


@dataclass(frozen=True)
class EvalReport:
    granularity: str
    per_label: dict
    macro_f1: float
    weighted_f1: float
    span_precision: float
    span_recall: float
    span_f1: float
    flags: tuple = ()

    def to_dict(self) -> dict:
        return {
            "granularity": self.granularity,
            "labels": {
                lab: {
                    "precision": s.precision,
                    "recall": s.recall,
                    "f1": s.f1,
                    "support": s.support,
                    "predicted": s.predicted,
                }
                for lab, s in self.per_label.items()
            },
            "macro_f1": self.macro_f1,
            "weighted_f1": self.weighted_f1,
            "span_precision": self.span_precision,
            "span_recall": self.span_recall,
            "span_f1": self.span_f1,
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        per_label = {
            lab: LabelScore(
                precision=s["precision"],
                recall=s["recall"],
                f1=s["f1"],
                support=s["support"],
                predicted=s["predicted"],
            )
            for lab, s in d.get("labels", {}).items()
        }
        return cls(
            granularity=d["granularity"],
            per_label=per_label,
            macro_f1=d["macro_f1"],
            weighted_f1=d["weighted_f1"],
            span_precision=d["span_precision"],
            span_recall=d["span_recall"],
            span_f1=d["span_f1"],
            flags=tuple(d.get("flags", ())),
        )


def _prf(tp: int, pred: int, gold: int) -> tuple[float, float, float]:
    p = tp / pred if pred else 0.0
    r = tp / gold if gold else 0.0
    f = 2.0 * p * r / (p + r) if p + r else 0.0
    return p, r, f


@dataclass
class Evaluator:
    """Pools confusion and span counts over documents, then scores once."""

    granularity: str = "word"
    tp: dict = field(default_factory=lambda: {lab: 0 for lab in LABELS})
    gold_count: dict = field(default_factory=lambda: {lab: 0 for lab in LABELS})
    pred_count: dict = field(default_factory=lambda: {lab: 0 for lab in LABELS})
    span_tp: int = 0
    span_gold: int = 0
    span_pred: int = 0

    def add_labels(self, gold: LabelSeq, pred: LabelSeq) -> None:
        if len(gold) != len(pred):
            raise EvalError(f"length mismatch: gold {len(gold)} vs pred {len(pred)}")
        if gold.granularity != pred.granularity:
            raise EvalError("granularity mismatch between gold and prediction")
        for g, p in zip(gold.labels, pred.labels):
            self.gold_count[g] += 1
            self.pred_count[p] += 1
            if g == p:
                self.tp[g] += 1
        gold_spans = set(gold.spans())
        pred_spans = set(pred.spans())
        self.span_tp += len(gold_spans & pred_spans)
        self.span_gold += len(gold_spans)
        self.span_pred += len(pred_spans)

    def report(self) -> EvalReport:
        per_label = {}
        for lab in LABELS:
            gold, pred = self.gold_count[lab], self.pred_count[lab]
            if gold == 0 and pred == 0:
                continue  # label absent everywhere: excluded from averages
            p, r, f = _prf(self.tp[lab], pred, gold)
            per_label[lab] = LabelScore(p, r, f, support=gold, predicted=pred)
        flags = []
        if per_label:
            macro = sum(s.f1 for s in per_label.values()) / len(per_label)
            total_support = sum(s.support for s in per_label.values())
            weighted = (
                sum(s.f1 * s.support for s in per_label.values()) / total_support
                if total_support
                else 0.0
            )
        else:
            macro = weighted = 0.0
            flags.append("no_labels")
        if self.span_gold == 0 and self.span_pred == 0:
            sp = sr = sf = 1.0
            flags.append("empty_span_sets")
        else:
            sp, sr, sf = _prf(self.span_tp, self.span_pred, self.span_gold)
        return EvalReport(
            granularity=self.granularity,
            per_label=per_label,
            macro_f1=macro,
            weighted_f1=weighted,
            span_precision=sp,
            span_recall=sr,
            span_f1=sf,
            flags=tuple(flags),
        )


def bio_f1(gold: LabelSeq, pred: LabelSeq) -> EvalReport:
    """Per-label precision/recall/F1 with macro and weighted averages."""
    ev = Evaluator(granularity=gold.granularity)
    ev.add_labels(gold, pred)
    return ev.report()


def span_f1(gold_spans, pred_spans) -> tuple[float, float, float]:
    """Exact-match span scores; (1, 1, 1) when both sets are empty."""
    gold_spans = set(tuple(s) for s in gold_spans)
    pred_spans = set(tuple(s) for s in pred_spans)
    if not gold_spans and not pred_spans:
        return 1.0, 1.0, 1.0
    return _prf(len(gold_spans & pred_spans), len(pred_spans), len(gold_spans))


def to_granularity(labels: LabelSeq, granularity: str, words) -> LabelSeq:
    """Render word labels at the requested granularity for scoring.

    Char rendering joins words by single separator spaces (lengths from the
    word strings), matching how evaluation inputs are assembled.
    """
    if granularity == labels.granularity:
        return labels
    if labels.granularity != "word" or granularity != "char":
        raise EvalError(f"cannot convert {labels.granularity} labels to {granularity}")
    if words is None:
        raise EvalError("char-level scoring needs the document words")
    if len(words) != len(labels):
        raise EvalError(f"word count {len(words)} does not match labels {len(labels)}")
    lengths = [len(w) for w in words]
    separators = [1] * (len(words) - 1) + [0] if words else []
    return coarse_to_chars(labels, lengths, separators)


def evaluate_document(gold: LabelSeq, pred, granularity: str = "word", words=None) -> EvalReport:
    """Score one decoded document against its gold word labels."""
    ev = Evaluator(granularity=granularity)
    ev.add_labels(
        to_granularity(gold, granularity, words),
        to_granularity(pred.labels, granularity, words),
    )
    return ev.report()


def relabel_fragmented_spans(gold: LabelSeq, boundaries) -> LabelSeq:
    """Mark gold spans crossed by any segment boundary as outside.

    Upstream segmentation that cuts through a gold span leaves fragments
    that are no longer sentential; their tokens are relabeled O before
    scoring.  `boundaries` holds cut positions (a span (s, e) is fragmented
    when some boundary b satisfies s < b < e).
    """
    cuts = sorted(set(boundaries))
    labs = list(gold.labels)
    for s, e in gold.spans():
        if any(s < b < e for b in cuts):
            for i in range(s, e):
                labs[i] = "O"
    return LabelSeq(gold.granularity, "".join(labs))


@dataclass(frozen=True)
class MetricStat:
    mean: float
    std: float


@dataclass(frozen=True)
class AggregateReport:
    granularity: str
    n_runs: int
    metrics: dict
    label_f1: dict
    flags: tuple = ()

    def to_dict(self) -> dict:
        return {
            "granularity": self.granularity,
            "n_runs": self.n_runs,
            "metrics": {k: {"mean": v.mean, "std": v.std} for k, v in self.metrics.items()},
            "label_f1": {k: {"mean": v.mean, "std": v.std} for k, v in self.label_f1.items()},
            "flags": list(self.flags),
        }


def _stat(values) -> MetricStat:
    n = len(values)
    mean = sum(values) / n
    if n < 2:
        return MetricStat(mean=mean, std=0.0)
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return MetricStat(mean=mean, std=math.sqrt(var))


def aggregate(reports) -> AggregateReport:
    """Mean and sample standard deviation of every metric across runs."""
    reports = list(reports)
    if not reports:
        raise EvalError("no reports to aggregate")
    grans = {r.granularity for r in reports}
    if len(grans) > 1:
        raise EvalError(f"mixed granularities {sorted(grans)}")
    metric_names = ("macro_f1", "weighted_f1", "span_precision", "span_recall", "span_f1")
    metrics = {name: _stat([getattr(r, name) for r in reports]) for name in metric_names}
    label_f1 = {}
    for lab in LABELS:
        values = [r.per_label[lab].f1 for r in reports if lab in r.per_label]
        if values:
            label_f1[lab] = _stat(values)
    flags = ("single_run",) if len(reports) == 1 else ()
    return AggregateReport(
        granularity=reports[0].granularity,
        n_runs=len(reports),
        metrics=metrics,
        label_f1=label_f1,
        flags=flags,
    )
