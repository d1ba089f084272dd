"""Span decoding: EOS-only segmentation and the BOS&EOS identification DP.

The identification objective scores a labeling by summing, over every token,
log p_bos or log(1-p_bos) depending on whether the token opens a span, plus
the analogous end-flag term.  Begin/end flags must alternate, starting with
a begin and ending with an end; a token may open and close a span at once
(one-token span).  The DP keeps two accumulators (inside / outside an open
span), applies a begin-flag update then an end-flag update per token, and
backtracks the argmax.  Positions whose probability falls below the
candidate threshold skip their update, which equals forcing that flag's
probability to zero.

Probabilities enter the objective as log(max(p, eps)) and
log(max(1 - p, eps)), so a forced-zero flag contributes exactly 0.0 to every
labeling that omits it.
"""

import json
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .labels import LabelSeq, spans_to_labels


@dataclass(frozen=True)
class DecoderConfig:
    candidate_threshold: float = 0.1
    force_last_eos: bool = False
    prob_floor: float = 1e-12

    def __post_init__(self):
        if not 0.0 <= self.candidate_threshold < 1.0:
            raise ValueError(f"candidate_threshold {self.candidate_threshold} not in [0, 1)")
        if not 0.0 < self.prob_floor < 0.5:
            raise ValueError(f"prob_floor {self.prob_floor} not in (0, 0.5)")


@dataclass(frozen=True)
class DPState:
    """Forward accumulators (length n+1) plus the backtracked flags."""

    log_is: np.ndarray
    log_os: np.ndarray
    bos_flags: np.ndarray
    eos_flags: np.ndarray


@dataclass(frozen=True)
class SpanResult:
    su_spans: tuple
    log_prob: float
    labels: LabelSeq
    offset: int = 0  # document position of token 0, set by identify_segments

    @property
    def n(self) -> int:
        return len(self.labels)

    def validate(self) -> "SpanResult":
        rendered = spans_to_labels(
            self.n, [(s - self.offset, e - self.offset) for s, e in self.su_spans]
        )
        if rendered.labels != self.labels.labels:
            raise ValueError("labels do not render su_spans")
        return self


def clamped_logs(p: np.ndarray, eps: float) -> tuple[np.ndarray, np.ndarray]:
    """(log p, log(1-p)) with each factor floored at eps before the log."""
    p = np.asarray(p, dtype=np.float64)
    return np.log(np.maximum(p, eps)), np.log(np.maximum(1.0 - p, eps))


def _flags_to_spans(bos_flags, eos_flags) -> tuple:
    spans = []
    start = None
    for i in range(len(bos_flags)):
        if bos_flags[i]:
            start = i
        if eos_flags[i]:
            spans.append((start, i + 1))
            start = None
    return tuple(spans)


def _empty_result() -> SpanResult:
    return SpanResult(su_spans=(), log_prob=0.0, labels=LabelSeq("word", ""))


def segment_eos_only(m, cfg: DecoderConfig = DecoderConfig()) -> SpanResult:
    """Closed-form segmentation: end flags exactly where p_eos >= 0.5.

    Segments are the maximal runs ending at each end flag.  Without
    force_last_eos, tokens after the last end flag form no span (labeled O);
    with it, the final token is an end flag and every token lies in a span.
    log_prob is the segmentation objective: sum of log p_eos over chosen
    flags plus log(1-p_eos) elsewhere.
    """
    p_eos = np.asarray(m.p_eos, dtype=np.float64)
    n = p_eos.shape[0]
    if n == 0:
        return _empty_result()
    eos = p_eos >= 0.5
    if cfg.force_last_eos:
        eos[n - 1] = True
    le1, le0 = clamped_logs(p_eos, cfg.prob_floor)
    log_prob = float(np.where(eos, le1, le0).sum())
    spans = []
    start = 0
    for i in np.flatnonzero(eos):
        spans.append((start, int(i) + 1))
        start = int(i) + 1
    return SpanResult(
        su_spans=tuple(spans), log_prob=log_prob, labels=spans_to_labels(n, spans)
    )


def _dp_inputs(m, cfg: DecoderConfig):
    p_bos = np.asarray(m.p_bos, dtype=np.float64)
    p_eos = np.asarray(m.p_eos, dtype=np.float64)
    lb1, lb0 = clamped_logs(p_bos, cfg.prob_floor)
    le1, le0 = clamped_logs(p_eos, cfg.prob_floor)
    c = cfg.candidate_threshold
    bos_ok = (p_bos >= c).astype(np.uint8)
    eos_ok = (p_eos >= c).astype(np.uint8)
    return lb1, lb0, le1, le0, bos_ok, eos_ok


def identify(m, cfg: DecoderConfig = DecoderConfig()) -> SpanResult:
    """Argmax span extraction over begin/end flag assignments."""
    if m.n == 0:
        return _empty_result()
    logp, bos, eos, _, _ = _kernels.dp_decode(*_dp_inputs(m, cfg))
    spans = _flags_to_spans(bos, eos)
    return SpanResult(
        su_spans=spans, log_prob=float(logp), labels=spans_to_labels(m.n, spans)
    )


def dp_state(m, cfg: DecoderConfig = DecoderConfig()) -> DPState:
    """Expose the forward accumulators and backtracked flags (for analysis)."""
    _, bos, eos, log_is, log_os = _kernels.dp_decode(*_dp_inputs(m, cfg))
    return DPState(log_is=log_is, log_os=log_os, bos_flags=bos, eos_flags=eos)


def identify_segments(segments, cfg: DecoderConfig = DecoderConfig()) -> list[SpanResult]:
    """Identify each pre-segmented piece; spans in document coordinates."""
    out = []
    offset = 0
    for m in segments:
        r = identify(m, cfg)
        out.append(
            SpanResult(
                su_spans=tuple((s + offset, e + offset) for s, e in r.su_spans),
                log_prob=r.log_prob,
                labels=r.labels,
                offset=offset,
            )
        )
        offset += m.n
    return out


def merge_segment_results(results) -> SpanResult:
    """Concatenate per-segment results into one document-level result."""
    spans = tuple(sp for r in results for sp in r.su_spans)
    labels = LabelSeq("word", "".join(r.labels.labels for r in results))
    return SpanResult(
        su_spans=spans, log_prob=float(sum(r.log_prob for r in results)), labels=labels
    )


def nsu_log_score(m, start: int, end: int, eps: float = 1e-12, initial: float = 0.0) -> float:
    """Log-score of tokens [start, end) carrying no begin/end flag.

    Accumulates (acc + log(1-p_bos[t])) + log(1-p_eos[t]) token by token from
    `initial` -- the identical operation order the DP's outside state uses.
    Splitting a region anywhere and feeding the first part's score back in as
    `initial` therefore reproduces the unsplit score exactly, which is why
    the DP never needs boundaries between adjacent non-span regions.
    """
    _, lb0 = clamped_logs(np.asarray(m.p_bos[start:end]), eps)
    _, le0 = clamped_logs(np.asarray(m.p_eos[start:end]), eps)
    acc = initial
    for t in range(end - start):
        acc = (acc + lb0[t]) + le0[t]
    return float(acc)


METHODS = ("eos", "eos_force", "bos_eos")


def decode_document(m, method: str, cfg: DecoderConfig = DecoderConfig()) -> SpanResult:
    if method == "eos":
        return segment_eos_only(m, DecoderConfig(cfg.candidate_threshold, False, cfg.prob_floor))
    if method == "eos_force":
        return segment_eos_only(m, DecoderConfig(cfg.candidate_threshold, True, cfg.prob_floor))
    if method == "bos_eos":
        return identify(m, cfg)
    raise ValueError(f"unknown method {method!r}, expected one of {METHODS}")


def write_span_file(path, results) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for r in results:
            rec = {
                "spans": [list(sp) for sp in r.su_spans],
                "labels": r.labels.labels,
                "log_prob": r.log_prob,
            }
            f.write(json.dumps(rec) + "\n")


def read_span_file(path) -> list[SpanResult]:
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                r = SpanResult(
                    su_spans=tuple(tuple(sp) for sp in rec["spans"]),
                    log_prob=float(rec["log_prob"]),
                    labels=LabelSeq("word", rec["labels"]),
                ).validate()
            except (KeyError, ValueError, TypeError) as exc:
                raise ValueError(f"{path}: bad span record on line {lineno}: {exc}") from exc
            out.append(r)
    return out
