"""Treebank conversion: CoNLL-U parsing, SU/NSU classification, statistics.

A unit is kept exactly as one treebank sentence; it counts as sentential
when at least one of its dependency relations (subtype-stripped) is a core
argument or non-core dependent, i.e. when a clausal predicate has an
argument.  Everything else (bare noun phrases, metadata, symbol runs) is a
non-sentential unit.
"""

import io
import json
from dataclasses import dataclass
from typing import Iterable, Sequence

from . import labels as labels_mod

# UD v2 relation classes; both sets are user-configurable.
CORE_ARGUMENTS = frozenset({"nsubj", "obj", "iobj", "csubj", "ccomp", "xcomp"})
NONCORE_DEPENDENTS = frozenset(
    {"obl", "vocative", "expl", "dislocated", "advcl", "advmod", "discourse", "aux", "cop", "mark"}
)


class ConlluError(ValueError):
    pass


class ConlluParseError(ConlluError):
    """Malformed line (reported with its 1-based line number)."""


class ConlluStructureError(ConlluError):
    """Well-formed lines that do not form a valid dependency structure."""


@dataclass(frozen=True)
class RelationRuleSet:
    core_arguments: frozenset = CORE_ARGUMENTS
    noncore_dependents: frozenset = NONCORE_DEPENDENTS

    @property
    def sentential_relations(self) -> frozenset:
        return self.core_arguments | self.noncore_dependents

    @classmethod
    def from_file(cls, path) -> "RelationRuleSet":
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
        unknown = set(data) - {"core_arguments", "noncore_dependents"}
        if unknown:
            raise ConlluError(f"unknown rule keys: {sorted(unknown)}")
        return cls(
            core_arguments=frozenset(data.get("core_arguments", CORE_ARGUMENTS)),
            noncore_dependents=frozenset(data.get("noncore_dependents", NONCORE_DEPENDENTS)),
        )


DEFAULT_RULES = RelationRuleSet()


@dataclass(frozen=True)
class ConlluSentence:
    """One treebank sentence: surface tokens plus their dependency relations.

    tokens holds (form, space_after) for each syntactic word; multiword-token
    ranges contribute surface text only and empty nodes are dropped entirely.
    heads are 0-based indices into tokens, None for the root.
    """

    tokens: tuple
    deprels: tuple
    raw_text: str
    char_offsets: tuple

    @property
    def forms(self) -> list[str]:
        return [form for form, _ in self.tokens]


def _misc_space_after(misc: str) -> bool:
    if misc == "_":
        return True
    return all(attr != "SpaceAfter=No" for attr in misc.split("|"))


def _finish_sentence(rows, mwts, first_line):
    if not rows:
        return None
    n = len(rows)
    covered = {}
    for start, end, form, space_after, lineno in mwts:
        if not (1 <= start <= end <= n):
            raise ConlluStructureError(
                f"line {lineno}: token range {start}-{end} outside sentence of {n} tokens"
            )
        for tid in range(start, end + 1):
            covered[tid] = (start, end, form, space_after)

    text_parts = []
    offsets = []
    space_after_flags = []
    cursor = 0
    tid = 1
    while tid <= n:
        if tid in covered and covered[tid][0] == tid:
            start, end, form, space_after = covered[tid]
            base = cursor
            limit = base + len(form)
            for j in range(start, end + 1):
                w = rows[j - 1][0]
                s = min(cursor, limit)
                e = min(cursor + len(w), limit)
                offsets.append((s, e))
                space_after_flags.append(j == end and space_after)
                cursor = e
            text_parts.append(form)
            cursor = limit
            tid = end + 1
            last_space = space_after
        else:
            form = rows[tid - 1][0]
            offsets.append((cursor, cursor + len(form)))
            text_parts.append(form)
            cursor += len(form)
            last_space = rows[tid - 1][1]
            space_after_flags.append(last_space)
            tid += 1
        if tid <= n and last_space:
            text_parts.append(" ")
            cursor += 1

    root_count = 0
    deprels = []
    for i, (form, _, head, deprel, lineno) in enumerate(rows):
        if head == 0:
            root_count += 1
            deprels.append((None, deprel))
        else:
            if not (1 <= head <= n):
                raise ConlluStructureError(
                    f"line {lineno}: head {head} dangles outside sentence of {n} tokens"
                )
            deprels.append((head - 1, deprel))
    if root_count != 1:
        raise ConlluStructureError(
            f"sentence starting at line {first_line}: expected exactly one root, found {root_count}"
        )

    tokens = tuple((row[0], sa) for row, sa in zip(rows, space_after_flags))
    return ConlluSentence(
        tokens=tokens,
        deprels=tuple(deprels),
        raw_text="".join(text_parts),
        char_offsets=tuple(offsets),
    )


def parse_conllu(data) -> list[ConlluSentence]:
    """Parse CoNLL-U text (str, bytes, or a file-like object)."""
    if hasattr(data, "read"):
        data = data.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")

    sentences = []
    rows = []  # (form, space_after, head, deprel, lineno)
    mwts = []  # (start, end, form, space_after, lineno)
    first_line = None
    for lineno, line in enumerate(io.StringIO(data), start=1):
        line = line.rstrip("\n")
        if not line.strip():
            sent = _finish_sentence(rows, mwts, first_line)
            if sent is not None:
                sentences.append(sent)
            rows, mwts, first_line = [], [], None
            continue
        if line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise ConlluParseError(f"line {lineno}: expected 10 columns, got {len(cols)}")
        if first_line is None:
            first_line = lineno
        tok_id, form, misc = cols[0], cols[1], cols[9]
        if "-" in tok_id:
            try:
                start, end = (int(x) for x in tok_id.split("-", 1))
            except ValueError:
                raise ConlluParseError(f"line {lineno}: bad token range id {tok_id!r}") from None
            mwts.append((start, end, form, _misc_space_after(misc), lineno))
            continue
        if "." in tok_id:
            continue  # empty node
        try:
            int(tok_id)
        except ValueError:
            raise ConlluParseError(f"line {lineno}: bad token id {tok_id!r}") from None
        try:
            head = int(cols[6])
        except ValueError:
            raise ConlluParseError(f"line {lineno}: bad head {cols[6]!r}") from None
        rows.append((form, _misc_space_after(misc), head, cols[7], lineno))

    sent = _finish_sentence(rows, mwts, first_line)
    if sent is not None:
        sentences.append(sent)
    return sentences


def parse_conllu_file(path) -> list[ConlluSentence]:
    with open(path, "rb") as f:
        return parse_conllu(f)


def strip_subtype(deprel: str) -> str:
    return deprel.split(":", 1)[0]


def classify_unit(sent: ConlluSentence, rules: RelationRuleSet = DEFAULT_RULES) -> bool:
    """True iff the sentence contains a clausal predicate with an argument."""
    wanted = rules.sentential_relations
    return any(strip_subtype(rel) in wanted for _, rel in sent.deprels)


@dataclass(frozen=True)
class Unit:
    text: str
    words: tuple
    is_su: bool
    char_offsets: tuple

    def __len__(self) -> int:
        return len(self.words)

    def validate(self) -> "Unit":
        if len(self.words) != len(self.char_offsets):
            raise ValueError("words and char_offsets must align")
        prev_end = 0
        for w, (s, e) in zip(self.words, self.char_offsets):
            if not (prev_end <= s <= e <= len(self.text)):
                raise ValueError(f"offset ({s}, {e}) not monotone within text")
            prev_end = e
        return self

    @classmethod
    def from_words(cls, words: Sequence[str], is_su: bool) -> "Unit":
        """Build a unit from bare words, joined by single spaces."""
        offsets = []
        cursor = 0
        for w in words:
            offsets.append((cursor, cursor + len(w)))
            cursor += len(w) + 1
        return cls(
            text=" ".join(words), words=tuple(words), is_su=is_su, char_offsets=tuple(offsets)
        )


@dataclass
class Corpus:
    units: list
    split: str = "train"

    def __len__(self) -> int:
        return len(self.units)

    def full_text(self) -> str:
        """All units joined by single separator spaces."""
        return " ".join(u.text for u in self.units)

    def word_spans(self) -> list[tuple[int, int]]:
        """Char span of every word within full_text(), unit by unit."""
        spans = []
        base = 0
        for u in self.units:
            for s, e in u.char_offsets:
                spans.append((base + s, base + e))
            base += len(u.text) + 1
        return spans

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for u in self.units:
                rec = {
                    "text": u.text,
                    "words": list(u.words),
                    "char_offsets": [list(o) for o in u.char_offsets],
                    "is_su": u.is_su,
                }
                f.write(json.dumps(rec, ensure_ascii=False) + "\n")

    @classmethod
    def load(cls, path, split: str = "train") -> "Corpus":
        units = []
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    unit = Unit(
                        text=rec["text"],
                        words=tuple(rec["words"]),
                        is_su=bool(rec["is_su"]),
                        char_offsets=tuple(tuple(o) for o in rec["char_offsets"]),
                    ).validate()
                except (KeyError, ValueError, TypeError) as exc:
                    raise ValueError(f"{path}: bad corpus record on line {lineno}: {exc}") from exc
                units.append(unit)
        return cls(units=units, split=split)


def convert_treebank(
    sents: Iterable[ConlluSentence], rules: RelationRuleSet = DEFAULT_RULES, split: str = "train"
) -> Corpus:
    """One unit per sentence, in order, with its SU/NSU classification."""
    units = [
        Unit(
            text=s.raw_text,
            words=tuple(s.forms),
            is_su=classify_unit(s, rules),
            char_offsets=s.char_offsets,
        )
        for s in sents
    ]
    return Corpus(units=units, split=split)


def gold_word_labels(corpus: Corpus) -> labels_mod.LabelSeq:
    parts = []
    for u in corpus.units:
        n = len(u.words)
        parts.append(("B" + "I" * (n - 1)) if u.is_su else "O" * n)
    return labels_mod.LabelSeq("word", "".join(parts))


def gold_char_labels(corpus: Corpus) -> labels_mod.LabelSeq:
    """Character labels over full_text(): each SU unit is one B(I)* span.

    Separator characters between units are outside every unit, hence O;
    characters inside an SU unit (including its internal spacing) are part
    of the span.
    """
    parts = []
    for i, u in enumerate(corpus.units):
        n = len(u.text)
        parts.append(("B" + "I" * (n - 1)) if u.is_su else "O" * n)
        if i + 1 < len(corpus.units):
            parts.append("O")
    return labels_mod.LabelSeq("char", "".join(parts))


@dataclass(frozen=True)
class CorpusStats:
    su_count: int = 0
    nsu_count: int = 0
    word_b: int = 0
    word_i: int = 0
    word_o: int = 0
    char_b: int = 0
    char_i: int = 0
    char_o: int = 0

    def __add__(self, other: "CorpusStats") -> "CorpusStats":
        return CorpusStats(
            *(getattr(self, f) + getattr(other, f) for f in self.__dataclass_fields__)
        )

    def to_dict(self) -> dict:
        return {
            "su_count": self.su_count,
            "nsu_count": self.nsu_count,
            "word": {"B": self.word_b, "I": self.word_i, "O": self.word_o},
            "char": {"B": self.char_b, "I": self.char_i, "O": self.char_o},
        }


def compute_stats(corpus: Corpus) -> CorpusStats:
    """Label counts per granularity; characters are counted within units.

    Inter-unit separator characters belong to no unit and are excluded, so
    stats of concatenated corpora are exactly the field-wise sums.
    """
    stats = CorpusStats()
    for u in corpus.units:
        nw, nc = len(u.words), len(u.text)
        if u.is_su:
            stats += CorpusStats(
                su_count=1, word_b=1, word_i=nw - 1, char_b=1, char_i=nc - 1
            )
        else:
            stats += CorpusStats(nsu_count=1, word_o=nw, char_o=nc)
    return stats
