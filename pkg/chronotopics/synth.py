"""Forward sampling of corpora with known topics, word and time distributions.

Every document gets a single timestamp: one topic is drawn from theta_d and
the time category from that topic's psi row. Token topics and words are then
drawn as in LDA. The ground truth is returned next to the corpus so fitted
models can be scored against it.
"""

import logging
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

import numpy as np

from chronotopics.corpus import Corpus, Document, Sentence, TimeGrid, Vocabulary
from chronotopics.errors import ConfigError

logger = logging.getLogger(__name__)

CONSONANTS = "bdfgklmnprstvz"
VOWELS = "aeiou"
SYLLABLES = [c + v for c in CONSONANTS for v in VOWELS]
DEFAULT_ORIGIN = datetime(2018, 1, 1, tzinfo=timezone.utc)


@dataclass(frozen=True)
class ModeStructure:
    """Per-topic time modes over the category axis.

    Mode m of topic z covers `width` categories starting at
    (z * width + m * separation) mod K. The default separation places the
    modes of different topics next to each other without overlap.
    """

    modes: int = 1
    width: int = 1
    separation: int | None = None
    floor: float = 0.0

    def rows(self, T: int, K: int) -> np.ndarray:
        separation = self.separation if self.separation is not None else T * self.width
        psi = np.full((T, K), self.floor, dtype=np.float64)
        for z in range(T):
            for m in range(self.modes):
                start = z * self.width + m * separation
                for k in range(start, start + self.width):
                    psi[z, k % K] += 1.0
        return psi / psi.sum(axis=1, keepdims=True)


@dataclass(frozen=True)
class SynthSpec:
    T: int = 3
    V: int = 300
    D: int = 600
    tokens_per_doc: int | tuple[int, int] = 40
    alpha: float = 0.1
    beta: float = 0.1
    K: int = 6
    psi: tuple[tuple[float, ...], ...] | None = None
    mode_structure: ModeStructure = field(default_factory=ModeStructure)
    marker_fraction: float = 0.0
    marker_mass: float = 0.5
    sentence_length: int = 8
    slice_width_days: int = 14
    origin: datetime = DEFAULT_ORIGIN
    seed: int = 0

    @property
    def markers_per_topic(self) -> int:
        return int(round(self.marker_fraction * self.V))

    def length_range(self) -> tuple[int, int]:
        if isinstance(self.tokens_per_doc, int):
            return self.tokens_per_doc, self.tokens_per_doc
        low, high = self.tokens_per_doc
        return int(low), int(high)

    def validate(self) -> None:
        if self.T < 1 or self.V < 1 or self.D < 1 or self.K < 1:
            raise ConfigError("T, V, D and K must all be positive")
        if self.alpha <= 0 or self.beta <= 0:
            raise ConfigError("alpha and beta must be positive")
        low, high = self.length_range()
        if not 1 <= low <= high:
            raise ConfigError(f"Invalid tokens per document {self.tokens_per_doc}")
        if self.sentence_length < 1 or self.slice_width_days < 1:
            raise ConfigError("sentence_length and slice_width_days must be positive")
        if self.psi is not None:
            psi = np.asarray(self.psi, dtype=np.float64)
            if psi.shape != (self.T, self.K):
                raise ConfigError(f"psi must be {self.T} x {self.K}, got {psi.shape}")
            if (psi < 0).any() or not np.allclose(psi.sum(axis=1), 1.0, atol=1e-9):
                raise ConfigError("psi rows must be probability vectors")
        if self.marker_fraction:
            if self.V < self.T:
                raise ConfigError("Marker words need V >= T")
            if not 0 < self.markers_per_topic * self.T < self.V:
                raise ConfigError(
                    f"marker_fraction {self.marker_fraction} leaves no room for shared words"
                )
            if not 0 < self.marker_mass < 1:
                raise ConfigError("marker_mass must lie in (0, 1)")

    def marker_ids(self, topic: int) -> range:
        n = self.markers_per_topic
        return range(topic * n, (topic + 1) * n)

    def psi_rows(self) -> np.ndarray:
        if self.psi is not None:
            return np.asarray(self.psi, dtype=np.float64)
        return self.mode_structure.rows(self.T, self.K)


@dataclass(frozen=True, eq=False)
class GroundTruth:
    theta: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    z: np.ndarray


def term_name(v: int, width: int) -> str:
    """Pronounceable letter-only name for vocabulary id `v`."""
    parts = []
    for _ in range(width):
        v, r = divmod(v, len(SYLLABLES))
        parts.append(SYLLABLES[r])
    return "".join(reversed(parts))


def term_names(V: int) -> tuple[str, ...]:
    width = max(2, math.ceil(math.log(V, len(SYLLABLES)))) if V > 1 else 2
    return tuple(term_name(v, width) for v in range(V))


def draw_phi(spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    phi = rng.dirichlet(np.full(spec.V, spec.beta), size=spec.T)
    n = spec.markers_per_topic
    if not n:
        return phi
    shared = np.ones(spec.V, dtype=bool)
    shared[: n * spec.T] = False
    out = np.zeros_like(phi)
    for z in range(spec.T):
        own = slice(z * n, (z + 1) * n)
        base = phi[z] * shared
        if base.sum() <= 0:
            base = shared.astype(np.float64)
        out[z] = (1 - spec.marker_mass) * base / base.sum()
        markers = rng.dirichlet(np.full(n, max(spec.beta, 1.0)))
        out[z, own] = spec.marker_mass * markers
    return out


def build_sentences(
    token_ids: np.ndarray, terms: tuple[str, ...], timestamp: datetime, sentence_length: int
) -> tuple[Sentence, ...]:
    sentences = []
    offset = 0
    for j, start in enumerate(range(0, len(token_ids), sentence_length)):
        chunk = tuple(int(v) for v in token_ids[start : start + sentence_length])
        text = " ".join(terms[v] for v in chunk) + "."
        sentences.append(
            Sentence(
                text=text,
                start=offset,
                end=offset + len(text),
                timestamp=timestamp + timedelta(minutes=j),
                tokens=chunk,
            )
        )
        offset += len(text) + 1
    return tuple(sentences)


def generate(spec: SynthSpec) -> tuple[Corpus, GroundTruth]:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    phi = draw_phi(spec, rng)
    psi = spec.psi_rows()
    theta = rng.dirichlet(np.full(spec.T, spec.alpha), size=spec.D)
    grid = TimeGrid(
        origin=spec.origin, slice_width=timedelta(days=spec.slice_width_days), K=spec.K
    )
    terms = term_names(spec.V)
    low, high = spec.length_range()

    documents = []
    all_z = []
    df = np.zeros(spec.V, dtype=np.int64)
    for d in range(spec.D):
        length = int(rng.integers(low, high + 1))
        time_topic = rng.choice(spec.T, p=theta[d])
        k = int(rng.choice(spec.K, p=psi[time_topic]))
        day = int(rng.integers(0, spec.slice_width_days))
        timestamp = grid.bounds(k)[0] + timedelta(days=day)

        z = rng.choice(spec.T, size=length, p=theta[d])
        words = np.empty(length, dtype=np.int64)
        for t in np.unique(z):
            mask = z == t
            words[mask] = rng.choice(spec.V, size=int(mask.sum()), p=phi[t])
        df[np.unique(words)] += 1
        sentences = build_sentences(words, terms, timestamp, spec.sentence_length)
        documents.append(
            Document(
                doc_id=d,
                tokens=tuple(int(w) for w in words),
                sentences=sentences,
                timestamp=timestamp,
                time_category=k,
                cascade_id=f"synth-{d}",
            )
        )
        all_z.append(z)

    vocabulary = Vocabulary(terms=terms, doc_frequency=tuple(int(x) for x in df))
    corpus = Corpus(documents=tuple(documents), vocabulary=vocabulary, grid=grid)
    truth = GroundTruth(theta=theta, phi=phi, psi=psi, z=np.concatenate(all_z).astype(np.int64))
    logger.info(
        "generated corpus: D=%d V=%d K=%d T=%d tokens=%d",
        corpus.D,
        corpus.V,
        corpus.K,
        spec.T,
        corpus.num_tokens,
    )
    return corpus, truth


def cosine_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    a_norm = a / np.linalg.norm(a, axis=1, keepdims=True)
    b_norm = b / np.linalg.norm(b, axis=1, keepdims=True)
    return a_norm @ b_norm.T


def match_topics(truth_phi: np.ndarray, fitted_phi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Greedy maximum-cosine matching of fitted topics to true topics.

    Returns `perm` with `perm[i]` the fitted topic matched to true topic `i`,
    and the cosine of each matched pair.
    """
    sims = cosine_matrix(truth_phi, fitted_phi)
    T = sims.shape[0]
    perm = np.full(T, -1, dtype=np.int64)
    cosines = np.zeros(T)
    free = sims.copy()
    for _ in range(T):
        i, j = np.unravel_index(np.argmax(free), free.shape)
        perm[i] = j
        cosines[i] = sims[i, j]
        free[i, :] = -np.inf
        free[:, j] = -np.inf
    return perm, cosines
