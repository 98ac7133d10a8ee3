"""Ingestion, cascade aggregation, cleaning and time-grid assignment of timestamped text."""

import json
import logging
import re
from dataclasses import dataclass, field, replace
from datetime import date, datetime, time, timedelta, timezone
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse

from chronotopics.errors import CorpusError
from chronotopics.lexicon import get_function_words, get_gazetteer

logger = logging.getLogger(__name__)

URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
MENTION_RE = re.compile(r"@\w+")
EMOJI_RE = re.compile(r"[\U0001F000-\U0001FAFF\u2600-\u27BF\uFE0F\u200D]")
WORD_RE = re.compile(r"\w[\w\-']*\w|\w")
ALPHA_WORD_RE = re.compile(r"[^\W\d_][\w'\-]*")
SENTENCE_BREAK_RE = re.compile(r"(?<=[.!?])\s+")

DEFAULT_SLICE_DAYS = 14
DEFAULT_MIN_DOC_TOKENS = 3


@dataclass(frozen=True)
class RawRecord:
    id: str
    text: str
    timestamp: datetime
    cascade_id: str | None = None
    parent_id: str | None = None


@dataclass(frozen=True)
class IngestConfig:
    window_start: datetime | None = None
    window_end: datetime | None = None
    on_error: str = "skip"


@dataclass(frozen=True)
class CleanConfig:
    stopwords: frozenset[str] = field(default_factory=get_function_words)
    gazetteer: frozenset[str] = field(default_factory=get_gazetteer)
    entity_filter: bool = True
    language_filter: bool = False
    language_ratio: float = 0.2
    min_token_chars: int = 2


@dataclass
class IngestResult:
    records: list[RawRecord]
    skipped: int = 0


@dataclass(frozen=True)
class Sentence:
    text: str
    start: int
    end: int
    timestamp: datetime
    tokens: tuple[int, ...] = ()


@dataclass(frozen=True)
class PseudoDocument:
    cascade_id: str
    day: date
    text: str
    sentences: tuple[Sentence, ...]
    tokens: tuple[str, ...] = ()
    sentence_words: tuple[tuple[str, ...], ...] = ()


@dataclass(frozen=True)
class Document:
    doc_id: int
    tokens: tuple[int, ...]
    sentences: tuple[Sentence, ...]
    timestamp: datetime
    time_category: int
    cascade_id: str = ""

    @property
    def length(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class Vocabulary:
    terms: tuple[str, ...]
    doc_frequency: tuple[int, ...]

    @cached_property
    def index(self) -> dict[str, int]:
        return {term: v for v, term in enumerate(self.terms)}

    @property
    def size(self) -> int:
        return len(self.terms)

    def id(self, term: str) -> int | None:
        return self.index.get(term)

    def term(self, v: int) -> str:
        return self.terms[v]

    @classmethod
    def build(cls, token_lists: Iterable[Sequence[str]]) -> "Vocabulary":
        df: dict[str, int] = {}
        for tokens in token_lists:
            for term in set(tokens):
                df[term] = df.get(term, 0) + 1
        terms = tuple(sorted(df))
        return cls(terms=terms, doc_frequency=tuple(df[t] for t in terms))


@dataclass(frozen=True)
class TimeGrid:
    origin: datetime
    slice_width: timedelta
    K: int

    @classmethod
    def covering(
        cls, timestamps: Iterable[datetime], slice_width: timedelta
    ) -> "TimeGrid":
        """Grid anchored at the earliest timestamp's UTC midnight, half-open slices."""
        stamps = [as_utc(t) for t in timestamps]
        if not stamps:
            raise CorpusError("Cannot build a time grid without timestamps")
        if slice_width <= timedelta(0):
            raise CorpusError(f"Slice width must be positive, got {slice_width}")
        origin = datetime.combine(min(stamps).date(), time(), tzinfo=timezone.utc)
        span = max(stamps) - origin
        return cls(origin=origin, slice_width=slice_width, K=span // slice_width + 1)

    def category(self, timestamp: datetime) -> int:
        k = (as_utc(timestamp) - self.origin) // self.slice_width
        if not 0 <= k < self.K:
            raise CorpusError(f"Timestamp {timestamp.isoformat()} lies outside the time grid")
        return k

    def bounds(self, k: int) -> tuple[datetime, datetime]:
        start = self.origin + k * self.slice_width
        return start, start + self.slice_width

    @property
    def end(self) -> datetime:
        return self.origin + self.K * self.slice_width


@dataclass(frozen=True)
class Corpus:
    documents: tuple[Document, ...]
    vocabulary: Vocabulary
    grid: TimeGrid

    @property
    def D(self) -> int:
        return len(self.documents)

    @property
    def V(self) -> int:
        return self.vocabulary.size

    @property
    def K(self) -> int:
        return self.grid.K

    @cached_property
    def num_tokens(self) -> int:
        return sum(d.length for d in self.documents)

    @cached_property
    def words(self) -> np.ndarray:
        """Flattened token ids in document then position order."""
        if not self.num_tokens:
            return np.zeros(0, dtype=np.int64)
        return np.concatenate(
            [np.asarray(d.tokens, dtype=np.int64) for d in self.documents]
        )

    @cached_property
    def doc_of(self) -> np.ndarray:
        return np.repeat(np.arange(self.D, dtype=np.int64), self.doc_lengths)

    @cached_property
    def doc_lengths(self) -> np.ndarray:
        return np.array([d.length for d in self.documents], dtype=np.int64)

    @cached_property
    def doc_categories(self) -> np.ndarray:
        return np.array([d.time_category for d in self.documents], dtype=np.int64)

    def category_histogram(self) -> np.ndarray:
        """Token counts per time category: the corpus activity curve."""
        return np.bincount(self.doc_categories, weights=self.doc_lengths, minlength=self.K)

    def doc_term_matrix(self) -> sparse.csr_matrix:
        """Binary D x V presence matrix."""
        rows = self.doc_of
        data = np.ones(rows.shape[0], dtype=np.int64)
        m = sparse.csr_matrix((data, (rows, self.words)), shape=(self.D, self.V))
        m.data[:] = 1
        return m

    def documents_in(self, k: int) -> list[int]:
        return [d.doc_id for d in self.documents if d.time_category == k]


@dataclass
class CorpusStats:
    records_read: int = 0
    records_skipped: int = 0
    pseudo_documents: int = 0
    dropped_language: int = 0
    dropped_entity: int = 0
    dropped_short: int = 0
    documents: int = 0
    vocabulary: int = 0
    time_categories: int = 0


def as_utc(ts: datetime) -> datetime:
    if ts.tzinfo is None:
        return ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def parse_timestamp(value: object) -> datetime:
    if isinstance(value, bool):
        raise ValueError("boolean is not a timestamp")
    if isinstance(value, (int, float)):
        try:
            ts = datetime.fromtimestamp(value, tz=timezone.utc)
        except (OverflowError, OSError) as e:
            raise ValueError(f"epoch {value!r} out of range") from e
    elif isinstance(value, str):
        text = value.strip()
        if text.endswith("Z"):
            text = text[:-1] + "+00:00"
        ts = as_utc(datetime.fromisoformat(text))
    else:
        raise ValueError(f"unsupported timestamp {value!r}")
    return ts.replace(microsecond=0)


def parse_record(obj: object) -> RawRecord:
    if not isinstance(obj, dict):
        raise ValueError("record is not an object")
    record_id = obj.get("id")
    text = obj.get("text")
    if not isinstance(record_id, str) or not record_id:
        raise ValueError("missing or empty 'id'")
    if not isinstance(text, str):
        raise ValueError("missing 'text'")
    if "timestamp" not in obj:
        raise ValueError("missing 'timestamp'")
    cascade_id = obj.get("cascade_id")
    parent_id = obj.get("parent_id")
    return RawRecord(
        id=record_id,
        text=text,
        timestamp=parse_timestamp(obj["timestamp"]),
        cascade_id=str(cascade_id) if cascade_id not in (None, "") else None,
        parent_id=str(parent_id) if parent_id not in (None, "") else None,
    )


def ingest(path: str | Path, config: IngestConfig | None = None) -> IngestResult:
    config = config or IngestConfig()
    try:
        with open(path, "rb") as f:
            lines = f.readlines()
    except OSError as e:
        raise CorpusError(f"Cannot read input file {path}: {e}") from e

    result = IngestResult(records=[])
    seen: set[str] = set()
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = parse_record(json.loads(line.decode("utf-8")))
            if record.id in seen:
                raise ValueError(f"duplicate id {record.id!r}")
            if config.window_start and record.timestamp < as_utc(config.window_start):
                raise ValueError("timestamp before corpus window")
            if config.window_end and record.timestamp >= as_utc(config.window_end):
                raise ValueError("timestamp after corpus window")
        except ValueError as e:
            if config.on_error == "raise":
                raise CorpusError(f"{path}:{lineno}: {e}") from e
            logger.debug("skipping %s:%d: %s", path, lineno, e)
            result.skipped += 1
            continue
        seen.add(record.id)
        result.records.append(record)

    if result.skipped:
        logger.warning("skipped %d malformed records in %s", result.skipped, path)
    logger.info("read %d records from %s", len(result.records), path)
    return result


def split_sentences(text: str) -> list[tuple[str, int, int]]:
    """Sentence pieces of one record as (text, start, end) offsets into `text`."""
    pieces = []
    start = 0
    for match in SENTENCE_BREAK_RE.finditer(text):
        if text[start : match.start()].strip():
            pieces.append((text[start : match.start()], start, match.start()))
        start = match.end()
    if text[start:].strip():
        pieces.append((text[start:], start, len(text)))
    return pieces


def aggregate_cascades(records: Iterable[RawRecord]) -> list[PseudoDocument]:
    """One pseudo-document per (cascade, UTC day), texts in timestamp order."""
    groups: dict[tuple[str, date], list[RawRecord]] = {}
    for r in records:
        key = (r.cascade_id or r.id, as_utc(r.timestamp).date())
        groups.setdefault(key, []).append(r)

    documents = []
    for cascade_id, day in sorted(groups, key=lambda key: (key[1], key[0])):
        members = sorted(groups[(cascade_id, day)], key=lambda r: (r.timestamp, r.id))
        parts: list[str] = []
        sentences: list[Sentence] = []
        offset = 0
        for r in members:
            for text, start, end in split_sentences(r.text):
                sentences.append(Sentence(text, offset + start, offset + end, r.timestamp))
            parts.append(r.text)
            offset += len(r.text) + 1
        documents.append(
            PseudoDocument(
                cascade_id=cascade_id,
                day=day,
                text=" ".join(parts),
                sentences=tuple(sentences),
            )
        )
    return documents


def is_english(words: Sequence[str], ratio: float = 0.2) -> bool:
    if not words:
        return False
    function_words = get_function_words()
    hits = sum(1 for w in words if w in function_words)
    return hits / len(words) >= ratio


def strip_noise(text: str) -> str:
    text = URL_RE.sub(" ", text)
    text = MENTION_RE.sub(" ", text)
    return EMOJI_RE.sub(" ", text)


def preprocess(text: str, config: CleanConfig | None = None) -> list[str]:
    config = config or CleanConfig()
    words = WORD_RE.findall(strip_noise(text).lower())
    if config.language_filter and not is_english(words, config.language_ratio):
        return []
    return [
        w
        for w in words
        if w not in config.stopwords and len(w) >= config.min_token_chars
    ]


def entity_filter(text: str | Sequence[str], config: CleanConfig | None = None) -> bool:
    """Keep when a capitalized non-sentence-initial word or a gazetteer entry occurs.

    `text` may be a list of sentences; each one restarts the sentence-initial rule.
    """
    config = config or CleanConfig()
    if not config.entity_filter:
        return True
    sentences = [text] if isinstance(text, str) else list(text)
    multiword = [g for g in config.gazetteer if " " in g]
    for sentence in sentences:
        for piece, _, _ in split_sentences(strip_noise(sentence)):
            words = ALPHA_WORD_RE.findall(piece)
            lowered = [w.lower() for w in words]
            if any(w in config.gazetteer for w in lowered):
                return True
            padded = " " + " ".join(lowered) + " "
            if any(f" {g} " in padded for g in multiword):
                return True
            for i, w in enumerate(words[1:], start=1):
                if len(w) > 1 and w[0].isupper() and lowered[i] not in config.stopwords:
                    return True
    return False


def tokenize_documents(
    pseudo_docs: Iterable[PseudoDocument],
    config: CleanConfig | None = None,
    stats: CorpusStats | None = None,
) -> list[PseudoDocument]:
    """Clean every pseudo-document and apply the language and entity filters."""
    config = config or CleanConfig()
    sentence_config = replace(config, language_filter=False)
    kept = []
    for doc in pseudo_docs:
        tokens = preprocess(doc.text, config)
        if config.language_filter and not tokens:
            if stats:
                stats.dropped_language += 1
            continue
        if not entity_filter([s.text for s in doc.sentences], config):
            if stats:
                stats.dropped_entity += 1
            continue
        kept.append(
            replace(
                doc,
                tokens=tuple(tokens),
                sentence_words=tuple(
                    tuple(preprocess(s.text, sentence_config)) for s in doc.sentences
                ),
            )
        )
    return kept


def build_corpus(
    pseudo_docs: Sequence[PseudoDocument],
    grid: TimeGrid,
    min_len: int = DEFAULT_MIN_DOC_TOKENS,
    stats: CorpusStats | None = None,
) -> Corpus:
    retained = [d for d in pseudo_docs if len(d.tokens) >= min_len]
    if stats:
        stats.dropped_short += len(pseudo_docs) - len(retained)
    if not retained:
        raise CorpusError("empty corpus: every document was filtered out")

    vocabulary = Vocabulary.build(d.tokens for d in retained)
    index = vocabulary.index
    documents = []
    for doc_id, doc in enumerate(retained):
        timestamp = datetime.combine(doc.day, time(), tzinfo=timezone.utc)
        sentence_words = doc.sentence_words or tuple(() for _ in doc.sentences)
        sentences = tuple(
            replace(s, tokens=tuple(index[w] for w in words if w in index))
            for s, words in zip(doc.sentences, sentence_words)
        )
        documents.append(
            Document(
                doc_id=doc_id,
                tokens=tuple(index[w] for w in doc.tokens),
                sentences=sentences,
                timestamp=timestamp,
                time_category=grid.category(timestamp),
                cascade_id=doc.cascade_id,
            )
        )
    corpus = Corpus(documents=tuple(documents), vocabulary=vocabulary, grid=grid)
    if stats:
        stats.documents = corpus.D
        stats.vocabulary = corpus.V
        stats.time_categories = corpus.K
    return corpus


def run_pipeline(
    path: str | Path,
    ingest_config: IngestConfig | None = None,
    clean_config: CleanConfig | None = None,
    slice_width_days: int = DEFAULT_SLICE_DAYS,
    min_doc_tokens: int = DEFAULT_MIN_DOC_TOKENS,
) -> tuple[Corpus, CorpusStats]:
    stats = CorpusStats()
    ingested = ingest(path, ingest_config)
    stats.records_read = len(ingested.records)
    stats.records_skipped = ingested.skipped

    pseudo_docs = aggregate_cascades(ingested.records)
    stats.pseudo_documents = len(pseudo_docs)
    tokenized = tokenize_documents(pseudo_docs, clean_config, stats)
    # the grid spans only documents that survive the length filter
    long_enough = [d for d in tokenized if len(d.tokens) >= min_doc_tokens]
    if not long_enough:
        raise CorpusError("empty corpus: every document was filtered out")

    grid = TimeGrid.covering(
        (datetime.combine(d.day, time(), tzinfo=timezone.utc) for d in long_enough),
        timedelta(days=slice_width_days),
    )
    corpus = build_corpus(tokenized, grid, min_doc_tokens, stats)
    logger.info(
        "built corpus: %d documents, V=%d, K=%d, %d tokens",
        corpus.D,
        corpus.V,
        corpus.K,
        corpus.num_tokens,
    )
    return corpus, stats


