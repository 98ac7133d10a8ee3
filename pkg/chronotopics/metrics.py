"""Topic quality scores: PMI coherence, time entropy and the significance-dispersity trade-off.

Coherence uses natural logarithms over document co-occurrence in the training
corpus. Entropy is in bits. SDT_z = H^gamma (H_max - H)^(1 - gamma) with
0^0 = 1, so gamma = 0 scores concentration and gamma = 1 scores dispersion.
"""

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import sparse
from scipy.stats import entropy as shannon_entropy

from chronotopics.corpus import Corpus
from chronotopics.errors import ConfigError, MetricsError
from chronotopics.sampler import Posterior

logger = logging.getLogger(__name__)

DEFAULT_K_WORDS = 500
DEFAULT_GAMMAS = (0.0, 0.4, 0.7, 1.0)
NORMALIZATION_TOLERANCE = 1e-9


@dataclass(frozen=True)
class MetricsConfig:
    k_words: int = DEFAULT_K_WORDS
    gammas: tuple[float, ...] = DEFAULT_GAMMAS

    def validate(self) -> None:
        if self.k_words < 2:
            raise ConfigError(f"k_words must be at least 2, got {self.k_words}")
        if not self.gammas:
            raise ConfigError("At least one gamma is required")
        bad = [g for g in self.gammas if not 0.0 <= g <= 1.0]
        if bad:
            raise ConfigError(f"gammas must lie in [0, 1], got {bad}")


@dataclass(frozen=True, eq=False)
class CoherenceReport:
    per_topic: np.ndarray
    k_words: int

    @property
    def mean(self) -> float:
        return float(np.mean(self.per_topic))


@dataclass(frozen=True, eq=False)
class SdtReport:
    entropy: np.ndarray
    h_max: float
    gammas: tuple[float, ...]
    scores: np.ndarray

    def winners(self, gamma_index: int, tolerance: float = 1e-12) -> list[int]:
        """Topics attaining the maximum SDT at one gamma; several when tied."""
        column = self.scores[:, gamma_index]
        best = column.max()
        return [int(z) for z in np.flatnonzero(column >= best - tolerance)]


def pmi_coherence(
    doc_freq: np.ndarray, co_freq: np.ndarray, n_docs: int, smoothing: float = 1.0
) -> float:
    """Mean pairwise PMI from document counts of the top words and their pairs."""
    k = len(doc_freq)
    rows, cols = np.triu_indices(k, 1)
    p_pair = (co_freq[rows, cols] + smoothing) / n_docs
    p_word = np.asarray(doc_freq, dtype=np.float64) / n_docs
    with np.errstate(divide="ignore"):
        pmi = np.log(p_pair / (p_word[rows] * p_word[cols]))
    return float(2.0 / (k * (k - 1)) * pmi.sum())


def attested_words(doc_term: sparse.spmatrix) -> np.ndarray:
    """Ids of words present in at least one document."""
    return np.flatnonzero(np.asarray(doc_term.sum(axis=0)).ravel() > 0)


def coherence(
    phi_row: np.ndarray,
    corpus: Corpus,
    k_words: int = DEFAULT_K_WORDS,
    smoothing: float = 1.0,
    doc_term: sparse.spmatrix | None = None,
) -> float:
    """Mean pairwise PMI over the topic's top words.

    Only words that occur in at least one document are ranked; an unseen
    word has zero marginal probability and would make PMI infinite.
    """
    if k_words < 2:
        raise MetricsError(f"Coherence needs at least 2 top words, got {k_words}")
    matrix = (doc_term if doc_term is not None else corpus.doc_term_matrix()).tocsc()
    attested = attested_words(matrix)
    if k_words > len(attested):
        raise MetricsError(
            f"Cannot take {k_words} top words from a vocabulary of {len(attested)} "
            f"attested words (V={corpus.V})"
        )
    weights = np.asarray(phi_row)[attested]
    top = attested[np.argsort(-weights, kind="stable")[:k_words]]
    presence = matrix[:, top]
    doc_freq = np.asarray(presence.sum(axis=0)).ravel()
    co_freq = (presence.T @ presence).toarray()
    return pmi_coherence(doc_freq, co_freq, corpus.D, smoothing)


def coherence_report(
    posterior: Posterior, corpus: Corpus, k_words: int = DEFAULT_K_WORDS
) -> CoherenceReport:
    doc_term = corpus.doc_term_matrix().tocsc()
    available = len(attested_words(doc_term))
    if k_words > available:
        logger.warning(
            "k_words=%d exceeds vocabulary size %d; using %d", k_words, available, available
        )
        k_words = available
    scores = np.array(
        [
            coherence(posterior.phi[z], corpus, k_words, doc_term=doc_term)
            for z in range(posterior.T)
        ]
    )
    return CoherenceReport(per_topic=scores, k_words=k_words)


def entropy(dist: Sequence[float] | np.ndarray) -> float:
    p = np.asarray(dist, dtype=np.float64)
    if p.ndim != 1 or not p.size:
        raise MetricsError("Entropy needs a non-empty probability vector")
    if (p < 0).any() or abs(p.sum() - 1.0) > NORMALIZATION_TOLERANCE:
        raise MetricsError(f"Not a probability vector (sum={p.sum():.12g})")
    return float(shannon_entropy(p, base=2))


def sdt(h: float, h_max: float, gamma: float) -> float:
    if not 0.0 <= gamma <= 1.0:
        raise MetricsError(f"gamma must lie in [0, 1], got {gamma}")
    if h < -NORMALIZATION_TOLERANCE or h > h_max + NORMALIZATION_TOLERANCE:
        raise MetricsError(f"Entropy {h} outside [0, {h_max}]")
    h = min(max(h, 0.0), h_max)
    return h**gamma * (h_max - h) ** (1.0 - gamma)


def sdt_peak(gamma: float, h_max: float) -> tuple[float, float]:
    """Entropy maximising SDT for an interior gamma, and the maximum value."""
    return gamma * h_max, gamma**gamma * (1.0 - gamma) ** (1.0 - gamma) * h_max


def sdt_report(psi: np.ndarray, gammas: Sequence[float] = DEFAULT_GAMMAS) -> SdtReport:
    psi = np.asarray(psi, dtype=np.float64)
    h_max = math.log2(psi.shape[1])
    entropies = np.array([entropy(row) for row in psi])
    scores = np.array([[sdt(h, h_max, g) for g in gammas] for h in entropies])
    return SdtReport(entropy=entropies, h_max=h_max, gammas=tuple(gammas), scores=scores)


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    return float(0.5 * np.abs(np.asarray(p) - np.asarray(q)).sum())


def activity_mixture(psi: np.ndarray, n_z: np.ndarray) -> np.ndarray:
    """Topic-size weighted mixture of time distributions."""
    weights = np.asarray(n_z, dtype=np.float64)
    return (weights / weights.sum()) @ psi


def activity_fit(psi: np.ndarray, n_z: np.ndarray, histogram: np.ndarray) -> float:
    """Total variation between the weighted psi mixture and the corpus activity curve."""
    histogram = np.asarray(histogram, dtype=np.float64)
    return total_variation(activity_mixture(psi, n_z), histogram / histogram.sum())
