"""Begin/end-of-sentence probability models.

The trainable model is a set of logistic heads over hashed character n-gram
and word-shape features gathered from a token window.  Bidirectional heads
see both sides of the focus token; the unidirectional begin head sees only
the focus and its right context, the unidirectional end head only the focus
and its left context.  Externally computed probabilities can be loaded from
tab-separated probability files instead.
"""

import json
import zlib
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from . import _kernels
from .augment import DEFAULT_END_PUNCT, DEFAULT_PUNCT, AugmentConfig, example_stream
from .corpus import Corpus

MODEL_FORMAT = "sentid-model"
MODEL_VERSION = 1

HEAD_NAMES = ("bos_bi", "eos_bi", "bos_uni", "eos_uni")

SIDE_WINDOWS = {"both": (-1, 1), "left_only": (-1, 0), "right_only": (0, 1)}
HEAD_SIDES = {"bos_bi": "both", "eos_bi": "both", "bos_uni": "right_only", "eos_uni": "left_only"}

_PAD_HASH = np.uint64(zlib.crc32(b"<pad>"))


class ProbFileError(ValueError):
    pass


@dataclass(frozen=True)
class ProbMatrix:
    p_bos: np.ndarray
    p_eos: np.ndarray
    p_bos_uni: Optional[np.ndarray] = None
    p_eos_uni: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("p_bos", "p_eos", "p_bos_uni", "p_eos_uni"):
            v = getattr(self, name)
            if v is None:
                continue
            v = np.asarray(v, dtype=np.float64)
            object.__setattr__(self, name, v)
            if v.ndim != 1 or v.shape[0] != self.p_bos.shape[0]:
                raise ValueError(f"{name} must be a vector of length {self.p_bos.shape[0]}")
            if v.size and (v.min() < 0.0 or v.max() > 1.0):
                raise ValueError(f"{name} has entries outside [0, 1]")
        if (self.p_bos_uni is None) != (self.p_eos_uni is None):
            raise ValueError("unidirectional vectors must come in pairs")

    @property
    def n(self) -> int:
        return int(self.p_bos.shape[0])

    @property
    def has_uni(self) -> bool:
        return self.p_bos_uni is not None


@dataclass(frozen=True)
class InterpConfig:
    """Mixing weight between unidirectional and bidirectional predictions."""

    lam: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda {self.lam} not in [0, 1]")


def interpolate(m: ProbMatrix, cfg: InterpConfig) -> ProbMatrix:
    """lam * unidirectional + (1 - lam) * bidirectional, per position."""
    if not m.has_uni:
        raise ValueError("probability matrix lacks unidirectional vectors")
    lam = cfg.lam
    return ProbMatrix(
        p_bos=lam * m.p_bos_uni + (1.0 - lam) * m.p_bos,
        p_eos=lam * m.p_eos_uni + (1.0 - lam) * m.p_eos,
    )


@dataclass(frozen=True)
class ModelConfig:
    window_radius: int = 5
    ngram_orders: tuple = (1, 2, 3, 4)
    hash_dim: int = 2**18
    max_word_chars: int = 16
    epochs: int = 5
    learning_rate: float = 0.2
    lr_decay: float = 0.9
    include_uni: bool = False

    def __post_init__(self):
        if self.hash_dim & (self.hash_dim - 1):
            raise ValueError("hash_dim must be a power of two")
        if self.window_radius < 0:
            raise ValueError("window_radius must be non-negative")

    def to_dict(self) -> dict:
        return {
            "window_radius": self.window_radius,
            "ngram_orders": list(self.ngram_orders),
            "hash_dim": self.hash_dim,
            "max_word_chars": self.max_word_chars,
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "lr_decay": self.lr_decay,
            "include_uni": self.include_uni,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["ngram_orders"] = tuple(d.get("ngram_orders", (1, 2, 3, 4)))
        return cls(**d)


def _hash(s: str) -> int:
    return zlib.crc32(s.encode("utf-8"))


def _word_shape(w: str, cap: int = 8) -> str:
    out = []
    for ch in w:
        if ch.isupper():
            c = "X"
        elif ch.islower():
            c = "x"
        elif ch.isdigit():
            c = "d"
        else:
            c = "p"
        if not out or out[-1] != c:
            out.append(c)
        if len(out) >= cap:
            break
    return "".join(out)


def token_base_features(w: str, cfg: ModelConfig) -> list[str]:
    """Deterministic string features of one token (position-independent)."""
    feats = [f"w={w.lower()}"]
    padded = "^" + w[: cfg.max_word_chars].lower() + "$"
    for k in cfg.ngram_orders:
        for i in range(len(padded) - k + 1):
            feats.append(f"g{k}={padded[i:i + k]}")
    feats.append(f"sh={_word_shape(w)}")
    feats.append(f"len={min(len(w), 10)}")
    if w.isupper() and len(w) > 1:
        feats.append("isupper")
    if w.istitle():
        feats.append("istitle")
    if w.islower():
        feats.append("islower")
    if any(ch.isdigit() for ch in w):
        feats.append("hasdigit")
    if w and all(not ch.isalnum() for ch in w):
        feats.append("ispunct")
    if w and w[-1] in DEFAULT_PUNCT:
        feats.append("endsP")
    if w and w[-1] in DEFAULT_END_PUNCT:
        feats.append("endsPe")
    return feats


class _TokenHasher:
    """Caches the base hash vector of each distinct token string."""

    def __init__(self, cfg: ModelConfig):
        self.cfg = cfg
        self.cache: dict[str, np.ndarray] = {}

    def __call__(self, w: str) -> np.ndarray:
        h = self.cache.get(w)
        if h is None:
            h = np.array(
                [_hash(f) for f in token_base_features(w, self.cfg)], dtype=np.uint64
            )
            self.cache[w] = h
        return h

    def csr(self, words: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
        rows = [self(w) for w in words]
        indptr = np.zeros(len(words) + 1, dtype=np.int64)
        for i, r in enumerate(rows):
            indptr[i + 1] = indptr[i] + r.shape[0]
        hashes = np.concatenate(rows) if rows else np.empty(0, dtype=np.uint64)
        return hashes, indptr


def _side_window(side: str, radius: int) -> tuple[int, int]:
    lo, hi = SIDE_WINDOWS[side]
    return lo * radius, hi * radius


def position_indices(
    words: Sequence[str], side: str, cfg: ModelConfig, hasher: Optional[_TokenHasher] = None
) -> tuple[np.ndarray, np.ndarray]:
    """CSR feature indices for every position of one document."""
    hasher = hasher or _TokenHasher(cfg)
    hashes, indptr = hasher.csr(words)
    lo, hi = _side_window(side, cfg.window_radius)
    return _kernels.window_indices(
        hashes, indptr, len(words), lo, hi, np.uint64(cfg.hash_dim - 1), _PAD_HASH
    )


def featurize(
    words: Sequence[str], position: int, side: str = "both", cfg: ModelConfig = ModelConfig()
) -> np.ndarray:
    """Hashed feature indices of one position (window restricted by side)."""
    if not 0 <= position < len(words):
        raise IndexError(f"position {position} out of range")
    indices, indptr = position_indices(words, side, cfg)
    return indices[indptr[position] : indptr[position + 1]]


@dataclass
class ClassifierModel:
    config: ModelConfig
    seed: int
    weights: dict = field(default_factory=dict)

    @property
    def head_names(self) -> tuple:
        if self.config.include_uni:
            return HEAD_NAMES
        return HEAD_NAMES[:2]

    @classmethod
    def zeros(cls, config: ModelConfig, seed: int) -> "ClassifierModel":
        model = cls(config=config, seed=seed)
        names = HEAD_NAMES if config.include_uni else HEAD_NAMES[:2]
        for name in names:
            model.weights[name] = np.zeros(config.hash_dim + 1, dtype=np.float64)
        return model


def train(
    corpus: Corpus,
    augment_cfg: AugmentConfig = AugmentConfig(),
    epochs: Optional[int] = None,
    seed: int = 0,
    model_cfg: ModelConfig = ModelConfig(),
) -> ClassifierModel:
    """SGD over per-token begin/end targets from freshly augmented inputs.

    Inputs are regenerated each epoch from a stream keyed by (seed, epoch),
    so the model sees a different concatenation and augmentation of the
    units in every pass.  Updates run row by row in a fixed head order;
    results are a pure function of (corpus, configs, seed).
    """
    if not corpus.units:
        raise ValueError("cannot train on an empty corpus")
    epochs = model_cfg.epochs if epochs is None else epochs
    model = ClassifierModel.zeros(model_cfg, seed)
    hasher = _TokenHasher(model_cfg)
    mask = np.uint64(model_cfg.hash_dim - 1)
    for epoch in range(epochs):
        lr = model_cfg.learning_rate * model_cfg.lr_decay**epoch
        for ex in example_stream(corpus, augment_cfg, seed, epoch):
            hashes, tok_ptr = hasher.csr(ex.words)
            n = len(ex.words)
            bos_t = ex.gold.bos_flags.astype(np.float64)
            eos_t = ex.gold.eos_flags.astype(np.float64)
            for name in model.head_names:
                lo, hi = _side_window(HEAD_SIDES[name], model_cfg.window_radius)
                idx, ptr = _kernels.window_indices(hashes, tok_ptr, n, lo, hi, mask, _PAD_HASH)
                targets = bos_t if name.startswith("bos") else eos_t
                _kernels.sgd_rows(model.weights[name], idx, ptr, targets, lr)
    return model


def predict(model: ClassifierModel, words: Sequence[str], include_uni: bool = False) -> ProbMatrix:
    """Per-position sigmoid score of every head."""
    if include_uni and not model.config.include_uni:
        raise ValueError("model was trained without unidirectional heads")
    n = len(words)
    if n == 0:
        empty = np.empty(0, dtype=np.float64)
        return ProbMatrix(empty, empty, *((empty, empty) if include_uni else (None, None)))
    cfg = model.config
    hasher = _TokenHasher(cfg)
    hashes, tok_ptr = hasher.csr(words)
    mask = np.uint64(cfg.hash_dim - 1)
    scores = {}
    names = HEAD_NAMES if include_uni else HEAD_NAMES[:2]
    for name in names:
        lo, hi = _side_window(HEAD_SIDES[name], cfg.window_radius)
        idx, ptr = _kernels.window_indices(hashes, tok_ptr, n, lo, hi, mask, _PAD_HASH)
        scores[name] = _kernels.score_rows(model.weights[name], idx, ptr)
    return ProbMatrix(
        p_bos=scores["bos_bi"],
        p_eos=scores["eos_bi"],
        p_bos_uni=scores.get("bos_uni"),
        p_eos_uni=scores.get("eos_uni"),
    )


def save_model(model: ClassifierModel, path) -> None:
    """Versioned binary: one JSON header line, then raw float64 weights."""
    header = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "config": model.config.to_dict(),
        "seed": model.seed,
        "heads": list(model.head_names),
    }
    with open(path, "wb") as f:
        f.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        for name in model.head_names:
            f.write(model.weights[name].astype("<f8").tobytes())


def load_model(path) -> ClassifierModel:
    with open(path, "rb") as f:
        header_line = f.readline()
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: not a model file: {exc}") from exc
        if header.get("format") != MODEL_FORMAT:
            raise ValueError(f"{path}: unexpected format {header.get('format')!r}")
        if header.get("version") != MODEL_VERSION:
            raise ValueError(f"{path}: unsupported version {header.get('version')!r}")
        cfg = ModelConfig.from_dict(header["config"])
        model = ClassifierModel(config=cfg, seed=int(header["seed"]))
        size = cfg.hash_dim + 1
        for name in header["heads"]:
            buf = f.read(size * 8)
            if len(buf) != size * 8:
                raise ValueError(f"{path}: truncated weights for head {name}")
            model.weights[name] = np.frombuffer(buf, dtype="<f8").copy()
    return model


# ---------------------------------------------------------------------------
# Probability files: one header line, one tab-separated row per token,
# documents separated by blank lines.
# ---------------------------------------------------------------------------


def write_prob_documents(path, docs: Iterable[tuple[Sequence[str], ProbMatrix]]) -> None:
    docs = list(docs)
    uni = bool(docs) and all(m.has_uni for _, m in docs)
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"#probs v1 uni={1 if uni else 0}\n")
        for d, (tokens, m) in enumerate(docs):
            if d:
                f.write("\n")
            for i in range(m.n):
                row = [str(i), tokens[i], repr(float(m.p_bos[i])), repr(float(m.p_eos[i]))]
                if uni:
                    row.append(repr(float(m.p_bos_uni[i])))
                    row.append(repr(float(m.p_eos_uni[i])))
                f.write("\t".join(row) + "\n")


def _parse_prob_value(text: str, lineno: int, col: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise ProbFileError(f"row {lineno}: {col} is not a number: {text!r}") from None
    if not 0.0 <= v <= 1.0:
        raise ProbFileError(f"row {lineno}: {col}={v} outside [0, 1]")
    return v


def iter_prob_documents(stream) -> list[tuple[list[str], ProbMatrix]]:
    """Parse a probability file into (tokens, matrix) pairs."""
    if hasattr(stream, "read"):
        data = stream.read()
    else:
        data = stream
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    lines = data.splitlines()
    if not lines or not lines[0].startswith("#probs v1"):
        raise ProbFileError("missing '#probs v1' header")
    header = lines[0].split()
    uni = False
    for part in header[2:]:
        if part.startswith("uni="):
            uni = part == "uni=1"
    ncols = 6 if uni else 4
    docs = []
    tokens: list[str] = []
    cols: list[list[float]] = [[] for _ in range(ncols - 2)]

    def flush():
        nonlocal tokens, cols
        if tokens:
            arrays = [np.array(c, dtype=np.float64) for c in cols]
            m = ProbMatrix(arrays[0], arrays[1], *(arrays[2:] if uni else [None, None]))
            docs.append((tokens, m))
        tokens = []
        cols = [[] for _ in range(ncols - 2)]

    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            flush()
            continue
        parts = line.split("\t")
        if len(parts) != ncols:
            raise ProbFileError(
                f"row {lineno}: expected {ncols} columns (uni={int(uni)}), got {len(parts)}"
            )
        try:
            idx = int(parts[0])
        except ValueError:
            raise ProbFileError(f"row {lineno}: bad index {parts[0]!r}") from None
        if idx != len(tokens):
            raise ProbFileError(f"row {lineno}: index {idx}, expected {len(tokens)}")
        tokens.append(parts[1])
        names = ("p_bos", "p_eos", "p_bos_uni", "p_eos_uni")
        for k in range(2, ncols):
            cols[k - 2].append(_parse_prob_value(parts[k], lineno, names[k - 2]))
    flush()
    return docs


def load_probs(stream) -> ProbMatrix:
    """Read a single-document probability file."""
    docs = iter_prob_documents(stream)
    if len(docs) > 1:
        raise ProbFileError(
            f"expected one document, found {len(docs)}; use iter_prob_documents"
        )
    if not docs:
        empty = np.empty(0, dtype=np.float64)
        return ProbMatrix(empty, empty)
    return docs[0][1]
