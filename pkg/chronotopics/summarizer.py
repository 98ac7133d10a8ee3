"""Extractive, time-ordered narrative summaries per topic."""

import logging
import re
from dataclasses import dataclass
from datetime import datetime
from typing import Sequence

import numpy as np
from rapidfuzz.distance import JaroWinkler

from chronotopics.corpus import Corpus, Sentence
from chronotopics.errors import ConfigError, SummarizerError
from chronotopics.sampler import Posterior

logger = logging.getLogger(__name__)

WHITESPACE_RE = re.compile(r"\s+")
KEYWORD_COUNT = 10


@dataclass(frozen=True)
class SummaryConfig:
    docs_per_topic: int = 200
    sentences_per_topic: int = 8
    similarity_threshold: float = 0.70
    length_normalize: bool = False
    seed: int = 0

    def validate(self) -> None:
        if not 0 < self.similarity_threshold <= 1:
            raise ConfigError(
                f"Similarity threshold must lie in (0, 1], got {self.similarity_threshold}"
            )
        if self.docs_per_topic < 1 or self.sentences_per_topic < 1:
            raise ConfigError("docs_per_topic and sentences_per_topic must be at least 1")


@dataclass(frozen=True)
class Candidate:
    doc_id: int
    index: int
    sentence: Sentence
    score: float = 0.0

    @property
    def timestamp(self) -> datetime:
        return self.sentence.timestamp

    @property
    def text(self) -> str:
        return self.sentence.text

    def order_key(self) -> tuple[datetime, int, int]:
        return (self.sentence.timestamp, self.doc_id, self.index)


@dataclass(frozen=True)
class NarrativeSummary:
    topic: int
    keywords: tuple[str, ...]
    entries: tuple[Candidate, ...]
    requested: int

    @property
    def short(self) -> bool:
        return len(self.entries) < self.requested


def jaro_winkler(s1: str, s2: str) -> float:
    """Jaro similarity with the Winkler prefix boost (scale 0.1, prefix up to 4)."""
    return JaroWinkler.similarity(s1, s2, prefix_weight=0.1)


def normalize_text(text: str) -> str:
    return WHITESPACE_RE.sub(" ", text).strip().lower()


def dedup(candidates: Sequence[Candidate], threshold: float = 0.70) -> list[Candidate]:
    """Greedy near-duplicate removal over timestamp-ordered sentences.

    A sentence joins every retained representative it exceeds `threshold` with;
    only the longest member of that cluster stays.
    """
    retained: list[tuple[Candidate, str]] = []
    for cand in candidates:
        norm = normalize_text(cand.text)
        matches = [
            i for i, (_, other) in enumerate(retained) if jaro_winkler(norm, other) > threshold
        ]
        if not matches:
            retained.append((cand, norm))
            continue
        cluster = [retained[i] for i in matches] + [(cand, norm)]
        keep = max(cluster, key=lambda item: len(item[0].text))
        first = matches[0]
        for i in reversed(matches):
            del retained[i]
        retained.insert(first, keep)
    return [cand for cand, _ in retained]


def score_sentence(
    tokens: Sequence[int], phi_z: np.ndarray, length_normalize: bool = False
) -> float:
    """Sum of the topic's word probabilities over in-vocabulary tokens."""
    if not len(tokens):
        return 0.0
    score = float(phi_z[np.asarray(tokens, dtype=np.int64)].sum())
    return score / len(tokens) if length_normalize else score


def sample_documents(
    posterior: Posterior, corpus: Corpus, z: int, config: SummaryConfig
) -> list[int]:
    """Draw a time category from psi_z, then a document of that category from theta_{., z}."""
    rng = np.random.default_rng([config.seed, z])
    members = [np.array(corpus.documents_in(k), dtype=np.int64) for k in range(corpus.K)]
    psi_z = posterior.psi[z] if posterior.psi is not None else np.full(corpus.K, 1.0 / corpus.K)
    # categories without documents cannot be drawn; their mass is redistributed
    mass = np.array([psi_z[k] if len(members[k]) else 0.0 for k in range(corpus.K)])
    if mass.sum() <= 0:
        raise SummarizerError(f"Topic {z} puts no time mass on any category with documents")
    categories = rng.choice(corpus.K, size=config.docs_per_topic, p=mass / mass.sum())

    drawn = []
    for k in range(corpus.K):
        n = int((categories == k).sum())
        if not n:
            continue
        weights = posterior.theta[members[k], z]
        drawn.extend(rng.choice(members[k], size=n, p=weights / weights.sum()).tolist())
    return drawn


def topic_keywords(posterior: Posterior, corpus: Corpus, z: int) -> tuple[str, ...]:
    n = min(KEYWORD_COUNT, corpus.V)
    return tuple(corpus.vocabulary.term(int(v)) for v in posterior.top_words(z, n))


def summarize_topic(
    posterior: Posterior, corpus: Corpus, z: int, config: SummaryConfig
) -> NarrativeSummary:
    doc_ids = sorted(set(sample_documents(posterior, corpus, z, config)))
    pool = [
        Candidate(doc_id=d, index=j, sentence=s)
        for d in doc_ids
        for j, s in enumerate(corpus.documents[d].sentences)
    ]
    pool.sort(key=Candidate.order_key)
    kept = dedup(pool, config.similarity_threshold)

    phi_z = posterior.phi[z]
    scored = [
        Candidate(
            c.doc_id,
            c.index,
            c.sentence,
            score_sentence(c.sentence.tokens, phi_z, config.length_normalize),
        )
        for c in kept
    ]
    ranked = sorted(scored, key=lambda c: (-c.score, *c.order_key()))
    chosen = sorted(ranked[: config.sentences_per_topic], key=Candidate.order_key)
    if len(chosen) < config.sentences_per_topic:
        logger.warning(
            "topic %d: only %d sentences available, %d requested",
            z,
            len(chosen),
            config.sentences_per_topic,
        )
    return NarrativeSummary(
        topic=z,
        keywords=topic_keywords(posterior, corpus, z),
        entries=tuple(chosen),
        requested=config.sentences_per_topic,
    )


def summarize(
    posterior: Posterior, corpus: Corpus, config: SummaryConfig | None = None
) -> list[NarrativeSummary]:
    config = config or SummaryConfig()
    config.validate()
    return [summarize_topic(posterior, corpus, z, config) for z in range(posterior.T)]
