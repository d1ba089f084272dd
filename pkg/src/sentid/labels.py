"""BIO label sequences and their conversions.

Labels live at one of three granularities (char, word, subword) and can be
translated both between granularities and to/from begin/end boundary flags.
Conversion rules:

* char -> coarse: a token is B if it covers a B character, else I if it
  covers an I character, else O.
* coarse -> char: a B token of n chars becomes B + (n-1) I; an I token n I;
  an O token n O.  A separator after token i is I only when token i is B/I
  and token i+1 continues the same span (is I); otherwise O.
"""

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

GRANULARITIES = ("char", "word", "subword")


class LabelError(ValueError):
    """Invalid label sequence or boundary structure."""


@dataclass(frozen=True)
class LabelSeq:
    granularity: str
    labels: str

    def __post_init__(self):
        if self.granularity not in GRANULARITIES:
            raise LabelError(f"unknown granularity {self.granularity!r}")
        bad = set(self.labels) - set("BIO")
        if bad:
            raise LabelError(f"labels contain {sorted(bad)!r}, expected B/I/O")

    def __len__(self) -> int:
        return len(self.labels)

    def validate(self) -> "LabelSeq":
        """Check that every span starts with B (no I after O or at start)."""
        prev = "O"
        for i, lab in enumerate(self.labels):
            if lab == "I" and prev == "O":
                raise LabelError(f"I-label at index {i} does not continue a span")
            prev = lab
        return self

    def spans(self) -> list[tuple[int, int]]:
        """Maximal B(I)* runs as half-open (start, end) index pairs."""
        out = []
        start = None
        for i, lab in enumerate(self.labels):
            if lab == "B":
                if start is not None:
                    out.append((start, i))
                start = i
            elif lab == "I":
                continue
            else:
                if start is not None:
                    out.append((start, i))
                    start = None
        if start is not None:
            out.append((start, len(self.labels)))
        return out


@dataclass(frozen=True)
class BoundarySeq:
    """Parallel begin/end flags over one token (or char) sequence."""

    bos_flags: np.ndarray
    eos_flags: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bos_flags, dtype=bool)
        e = np.asarray(self.eos_flags, dtype=bool)
        if b.shape != e.shape or b.ndim != 1:
            raise LabelError("begin/end flag vectors must share one length")
        object.__setattr__(self, "bos_flags", b)
        object.__setattr__(self, "eos_flags", e)

    def __len__(self) -> int:
        return len(self.bos_flags)

    @property
    def bos_indices(self) -> list[int]:
        return np.flatnonzero(self.bos_flags).tolist()

    @property
    def eos_indices(self) -> list[int]:
        return np.flatnonzero(self.eos_flags).tolist()

    def validate(self) -> "BoundarySeq":
        """Check alternation: open, close, open, close ... ending closed.

        A single position may both open and close (one-token span); a close
        never precedes its open.
        """
        inside = False
        for i in range(len(self)):
            if self.bos_flags[i]:
                if inside:
                    raise LabelError(f"begin flag at {i} inside an open span")
                inside = True
            if self.eos_flags[i]:
                if not inside:
                    raise LabelError(f"end flag at {i} without an open span")
                inside = False
        if inside:
            raise LabelError("sequence ends inside an open span")
        return self

    @classmethod
    def from_indices(cls, n: int, bos: Iterable[int], eos: Iterable[int]) -> "BoundarySeq":
        b = np.zeros(n, dtype=bool)
        e = np.zeros(n, dtype=bool)
        b[list(bos)] = True
        e[list(eos)] = True
        return cls(b, e)


def bio_to_boundaries(seq: LabelSeq) -> BoundarySeq:
    """Begin flag at each B; end flag at the last position of each span."""
    seq.validate()
    n = len(seq)
    bos = np.zeros(n, dtype=bool)
    eos = np.zeros(n, dtype=bool)
    labs = seq.labels
    for i, lab in enumerate(labs):
        if lab == "B":
            bos[i] = True
        if lab != "O" and (i + 1 == n or labs[i + 1] != "I"):
            eos[i] = True
    return BoundarySeq(bos, eos)


def boundaries_to_bio(b: BoundarySeq, granularity: str = "word") -> LabelSeq:
    b.validate()
    out = []
    inside = False
    for i in range(len(b)):
        if b.bos_flags[i]:
            out.append("B")
            inside = True
        elif inside:
            out.append("I")
        else:
            out.append("O")
        if b.eos_flags[i]:
            inside = False
    return LabelSeq(granularity, "".join(out))


def spans_to_labels(n: int, spans: Sequence[tuple[int, int]], granularity: str = "word") -> LabelSeq:
    """Render sorted, non-overlapping half-open spans as BIO."""
    labs = ["O"] * n
    for start, end in spans:
        if not (0 <= start < end <= n):
            raise LabelError(f"span ({start}, {end}) out of range for length {n}")
        labs[start] = "B"
        for i in range(start + 1, end):
            labs[i] = "I"
    return LabelSeq(granularity, "".join(labs))


def chars_to_coarse(
    char_labels: LabelSeq, spans: Sequence[tuple[int, int]], granularity: str = "word"
) -> LabelSeq:
    """Collapse character labels onto coarse tokens covering `spans`."""
    if char_labels.granularity != "char":
        raise LabelError("expected char-granularity input")
    n = len(char_labels)
    out = []
    for start, end in spans:
        if not (0 <= start <= end <= n):
            raise LabelError(f"token span ({start}, {end}) outside [0, {n}]")
        covered = char_labels.labels[start:end]
        if "B" in covered:
            out.append("B")
        elif "I" in covered:
            out.append("I")
        else:
            out.append("O")
    return LabelSeq(granularity, "".join(out))


def coarse_to_chars(
    labels: LabelSeq, lengths: Sequence[int], separators: Sequence[int]
) -> LabelSeq:
    """Expand coarse labels to characters, labeling separators by context.

    lengths[i] is the character count of token i; separators[i] the number of
    separator characters following token i (the last entry may be trailing).
    """
    if labels.granularity == "char":
        raise LabelError("input already char-granularity")
    if len(lengths) != len(labels) or len(separators) != len(labels):
        raise LabelError("lengths/separators must match the label count")
    out = []
    labs = labels.labels
    for i, lab in enumerate(labs):
        n = lengths[i]
        if lab == "B":
            out.append("B" + "I" * (n - 1))
        elif lab == "I":
            out.append("I" * n)
        else:
            out.append("O" * n)
        same_span = lab in "BI" and i + 1 < len(labs) and labs[i + 1] == "I"
        out.append(("I" if same_span else "O") * separators[i])
    return LabelSeq("char", "".join(out))


def write_label_file(path, docs: Sequence[LabelSeq]) -> None:
    """One line per document, space-separated labels, granularity header."""
    if docs:
        grans = {d.granularity for d in docs}
        if len(grans) > 1:
            raise LabelError(f"mixed granularities {sorted(grans)}")
        gran = docs[0].granularity
    else:
        gran = "word"
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"#granularity={gran}\n")
        for d in docs:
            f.write(" ".join(d.labels) + "\n")


def read_label_file(path) -> list[LabelSeq]:
    with open(path, encoding="utf-8") as f:
        header = f.readline().strip()
        if not header.startswith("#granularity="):
            raise LabelError("missing #granularity= header")
        gran = header.split("=", 1)[1]
        return [LabelSeq(gran, "".join(line.split())) for line in f]
