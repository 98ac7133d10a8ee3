"""Unit tests for the metrics module."""

import math
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chronotopics.corpus import Corpus, Document, TimeGrid, Vocabulary
from chronotopics.errors import ConfigError, MetricsError
from chronotopics.metrics import (
    MetricsConfig,
    SdtReport,
    activity_fit,
    activity_mixture,
    coherence,
    coherence_report,
    entropy,
    pmi_coherence,
    sdt,
    sdt_peak,
    sdt_report,
    total_variation,
)
from chronotopics.sampler import NocConfig, Posterior, fit
from chronotopics.synth import SynthSpec, generate

ORIGIN = datetime(2018, 1, 1, tzinfo=timezone.utc)

# Published SDT grid for five narratives; rows are gamma = 0, 0.4, 0.7, 1.
PUBLISHED_SDT = {
    0.0: [1.59, 2.90, 2.39, 3.21, 2.75],
    0.4: [2.08, 2.40, 2.36, 2.36, 2.40],
    0.7: [2.54, 2.08, 2.33, 1.87, 2.16],
    1.0: [3.11, 1.80, 2.31, 1.49, 1.95],
}


def make_corpus(docs: list[list[int]], V: int) -> Corpus:
    grid = TimeGrid(ORIGIN, timedelta(days=14), 1)
    documents = tuple(
        Document(doc_id=d, tokens=tuple(tokens), sentences=(), timestamp=ORIGIN, time_category=0)
        for d, tokens in enumerate(docs)
    )
    vocab = Vocabulary(terms=tuple(f"w{v}" for v in range(V)), doc_frequency=(1,) * V)
    return Corpus(documents=documents, vocabulary=vocab, grid=grid)


@st.composite
def categorical(draw) -> np.ndarray:
    weights = draw(
        st.lists(
            st.floats(min_value=0.0, max_value=10.0, allow_subnormal=False),
            min_size=1,
            max_size=12,
        ).filter(lambda w: sum(w) > 0)
    )
    return np.array(weights) / sum(weights)


def make_posterior(phi: np.ndarray, psi: np.ndarray | None = None) -> Posterior:
    T = phi.shape[0]
    return Posterior(
        theta=np.full((1, T), 1.0 / T),
        phi=phi,
        psi=psi,
        model="noc",
    )


class TestMetricsConfig:
    def test_defaults(self):
        config = MetricsConfig()
        assert config.k_words == 500
        assert config.gammas == (0.0, 0.4, 0.7, 1.0)
        config.validate()

    def test_rejects_small_k_words(self):
        with pytest.raises(ConfigError, match="k_words"):
            MetricsConfig(k_words=1).validate()

    def test_rejects_empty_gammas(self):
        with pytest.raises(ConfigError, match="gamma"):
            MetricsConfig(gammas=()).validate()

    def test_rejects_gamma_out_of_range(self):
        with pytest.raises(ConfigError, match=r"\[0, 1\]"):
            MetricsConfig(gammas=(0.5, 1.2)).validate()


class TestCoherence:
    def test_always_together_gives_ln2(self):
        corpus = make_corpus([[0, 1], [0, 1], [2], [2]], V=3)
        phi_row = np.array([0.5, 0.4, 0.1])
        assert coherence(phi_row, corpus, k_words=2, smoothing=0.0) == pytest.approx(math.log(2))

    def test_independent_words_give_zero(self):
        corpus = make_corpus([[0, 1], [0], [1], [2]], V=3)
        phi_row = np.array([0.5, 0.4, 0.1])
        assert coherence(phi_row, corpus, k_words=2, smoothing=0.0) == pytest.approx(0.0)

    def test_smoothing_keeps_disjoint_pair_finite(self):
        corpus = make_corpus([[0], [0], [1], [1]], V=2)
        phi_row = np.array([0.6, 0.4])
        assert coherence(phi_row, corpus, k_words=2, smoothing=0.0) == -math.inf
        assert math.isfinite(coherence(phi_row, corpus, k_words=2))

    def test_repeated_tokens_count_once_per_document(self):
        once = make_corpus([[0, 1], [0, 1], [2], [2]], V=3)
        repeated = make_corpus([[0, 0, 1, 1, 1], [0, 1], [2, 2], [2]], V=3)
        phi_row = np.array([0.5, 0.4, 0.1])
        assert coherence(phi_row, repeated, 2) == pytest.approx(coherence(phi_row, once, 2))

    def test_too_few_words(self):
        corpus = make_corpus([[0, 1]], V=2)
        with pytest.raises(MetricsError, match="at least 2"):
            coherence(np.array([0.5, 0.5]), corpus, k_words=1)

    def test_more_words_than_vocabulary(self):
        corpus = make_corpus([[0, 1]], V=2)
        with pytest.raises(MetricsError, match="vocabulary"):
            coherence(np.array([0.5, 0.5]), corpus, k_words=3)

    def test_permutation_invariant_in_top_words(self):
        doc_freq = np.array([3, 2, 4])
        co_freq = np.array([[3, 1, 2], [1, 2, 2], [2, 2, 4]])
        order = [2, 0, 1]
        permuted = co_freq[np.ix_(order, order)]
        assert pmi_coherence(doc_freq, co_freq, 6) == pytest.approx(
            pmi_coherence(doc_freq[order], permuted, 6)
        )

    def test_unseen_words_not_ranked(self):
        corpus = make_corpus([[0, 1], [0, 1], [2], [2]], V=4)
        phi_row = np.array([0.3, 0.2, 0.1, 0.4])
        assert coherence(phi_row, corpus, k_words=2, smoothing=0.0) == pytest.approx(math.log(2))

    def test_too_few_seen_words(self):
        corpus = make_corpus([[0, 1]], V=3)
        with pytest.raises(MetricsError, match="attested"):
            coherence(np.full(3, 1.0 / 3), corpus, k_words=3)

    def test_decreases_with_joint_count(self):
        # Same marginals: w0 and w1 each in two of four documents.
        together = make_corpus([[0, 1], [0, 1], [2], [2]], V=3)
        apart = make_corpus([[0, 1], [0, 2], [1, 2], [2]], V=3)
        phi_row = np.array([0.5, 0.4, 0.1])
        assert coherence(phi_row, apart, 2) < coherence(phi_row, together, 2)


class TestCoherenceReport:
    def test_per_topic_and_mean(self):
        corpus = make_corpus([[0, 1], [0, 1], [2, 3], [2, 3]], V=4)
        phi = np.array([[0.5, 0.4, 0.05, 0.05], [0.05, 0.05, 0.5, 0.4]])
        report = coherence_report(make_posterior(phi), corpus, k_words=2)
        assert report.per_topic.shape == (2,)
        assert report.k_words == 2
        assert report.mean == pytest.approx(report.per_topic.mean())

    def test_clamps_k_words_to_vocabulary(self, caplog):
        corpus = make_corpus([[0, 1], [1, 2]], V=3)
        phi = np.full((2, 3), 1.0 / 3)
        with caplog.at_level("WARNING"):
            report = coherence_report(make_posterior(phi), corpus, k_words=500)
        assert report.k_words == 3
        assert "exceeds vocabulary size" in caplog.text

    def test_default_k_words_on_synthetic_corpus(self):
        corpus, _ = generate(SynthSpec(seed=0))
        assert 0 in corpus.vocabulary.doc_frequency
        posterior, _ = fit(corpus, NocConfig(T=3, sweeps=5, burn_in=1))
        report = coherence_report(posterior, corpus)
        assert report.k_words == sum(1 for df in corpus.vocabulary.doc_frequency if df > 0)
        assert np.isfinite(report.per_topic).all()


class TestEntropy:
    def test_uniform(self):
        assert entropy([0.25] * 4) == pytest.approx(2.0)

    def test_delta(self):
        assert entropy([0.0, 1.0, 0.0, 0.0]) == 0.0

    def test_half_half(self):
        assert entropy([0.5, 0.5, 0.0, 0.0]) == pytest.approx(1.0)

    def test_not_normalized(self):
        with pytest.raises(MetricsError, match="Not a probability vector"):
            entropy([0.5, 0.6])

    def test_negative_entry(self):
        with pytest.raises(MetricsError):
            entropy([1.5, -0.5])

    def test_empty(self):
        with pytest.raises(MetricsError, match="non-empty"):
            entropy([])

    def test_pure(self):
        dist = np.array([0.1, 0.2, 0.7])
        assert entropy(dist) == entropy(dist)
        assert dist.tolist() == [0.1, 0.2, 0.7]


class TestSdt:
    @pytest.mark.parametrize("column", range(5))
    @pytest.mark.parametrize("gamma", [0.4, 0.7])
    def test_reproduces_published_interior_values(self, column, gamma):
        h = PUBLISHED_SDT[1.0][column]
        spread = PUBLISHED_SDT[0.0][column]
        value = sdt(h, h + spread, gamma)
        assert value == pytest.approx(PUBLISHED_SDT[gamma][column], abs=0.01)

    def test_endpoints_reduce_to_entropy_and_gap(self):
        assert sdt(1.5, 4.0, 0.0) == pytest.approx(2.5)
        assert sdt(1.5, 4.0, 1.0) == pytest.approx(1.5)

    def test_zero_power_convention_at_boundaries(self):
        assert sdt(0.0, 3.0, 0.0) == 3.0
        assert sdt(3.0, 3.0, 1.0) == 3.0
        assert sdt(0.0, 3.0, 1.0) == 0.0
        assert sdt(3.0, 3.0, 0.0) == 0.0

    def test_boundary_entropies_score_zero_at_midpoint(self):
        assert sdt(0.0, 4.0, 0.5) == 0.0
        assert sdt(4.0, 4.0, 0.5) == 0.0

    def test_maximum_at_gamma_fraction(self):
        assert sdt(2.0, 4.0, 0.5) == pytest.approx(2.0)
        assert sdt_peak(0.5, 4.0) == pytest.approx((2.0, 2.0))

    def test_peak_location_and_value_on_grid(self):
        h_max = math.log2(12)
        h = np.linspace(0.0, h_max, 20_001)
        for gamma in np.linspace(0.05, 0.95, 19):
            values = np.array([sdt(x, h_max, gamma) for x in h])
            argmax, peak = sdt_peak(gamma, h_max)
            assert h[values.argmax()] == pytest.approx(argmax, abs=1e-3)
            assert values.max() == pytest.approx(peak, abs=1e-6)
            assert (values >= 0).all()

    def test_entropy_out_of_range(self):
        with pytest.raises(MetricsError, match="outside"):
            sdt(4.5, 4.0, 0.5)
        with pytest.raises(MetricsError, match="outside"):
            sdt(-0.1, 4.0, 0.5)

    def test_gamma_out_of_range(self):
        with pytest.raises(MetricsError, match="gamma"):
            sdt(1.0, 4.0, 1.5)


class TestSdtReport:
    def test_identical_rows_tie(self):
        psi = np.tile([0.1, 0.2, 0.3, 0.4], (3, 1))
        report = sdt_report(psi)
        for g in range(len(report.gammas)):
            assert report.winners(g) == [0, 1, 2]

    def test_delta_wins_at_gamma_zero(self):
        psi = np.array([[1.0, 0.0, 0.0, 0.0], [0.25, 0.25, 0.25, 0.25]])
        report = sdt_report(psi, gammas=(0.0, 1.0))
        assert report.h_max == pytest.approx(2.0)
        assert report.scores[:, 0].tolist() == pytest.approx([2.0, 0.0])
        assert report.winners(0) == [0]
        assert report.winners(1) == [1]

    def test_gamma_endpoints_follow_entropy_ordering(self):
        rng = np.random.default_rng(5)
        psi = rng.dirichlet(np.full(8, 0.5), size=6)
        report = sdt_report(psi, gammas=(0.0, 1.0))
        by_entropy = np.argsort(report.entropy, kind="stable")
        assert np.array_equal(np.argsort(report.scores[:, 1], kind="stable"), by_entropy)
        assert np.array_equal(np.argsort(-report.scores[:, 0], kind="stable"), by_entropy)
        assert (report.entropy >= 0).all() and (report.entropy <= report.h_max + 1e-12).all()

    def test_most_dispersed_wins_at_gamma_one(self):
        psi = np.array([[0.7, 0.1, 0.1, 0.1], [0.3, 0.3, 0.2, 0.2], [0.9, 0.1, 0.0, 0.0]])
        assert sdt_report(psi).winners(3) == [1]

    def test_unnormalised_row_rejected(self):
        with pytest.raises(MetricsError):
            sdt_report(np.array([[0.5, 0.4]]))

    def test_winners_tolerance(self):
        report = SdtReport(
            entropy=np.zeros(2), h_max=1.0, gammas=(0.0,), scores=np.array([[1.0], [1.0 - 1e-14]])
        )
        assert report.winners(0) == [0, 1]
        assert report.winners(0, tolerance=0.0) == [0]


class TestActivity:
    def test_total_variation(self):
        assert total_variation(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 1.0
        assert total_variation(np.array([0.5, 0.5]), np.array([0.5, 0.5])) == 0.0

    def test_mixture_weights_by_topic_size(self):
        psi = np.array([[1.0, 0.0], [0.0, 1.0]])
        np.testing.assert_allclose(activity_mixture(psi, np.array([3, 1])), [0.75, 0.25])

    def test_exact_fit(self):
        psi = np.array([[0.8, 0.2], [0.2, 0.8]])
        n_z = np.array([10, 30])
        histogram = np.array([0.35, 0.65]) * 40
        assert activity_fit(psi, n_z, histogram) == pytest.approx(0.0, abs=1e-12)


class TestProperties:
    @given(categorical())
    @settings(max_examples=200, deadline=None)
    def test_entropy_within_bounds(self, p):
        h = entropy(p)
        assert 0.0 <= h <= math.log2(len(p)) + 1e-9

    @given(
        st.floats(min_value=0.1, max_value=10.0),
        st.floats(min_value=0.0, max_value=1.0),
        st.floats(min_value=0.0, max_value=1.0),
    )
    @settings(max_examples=300, deadline=None)
    def test_sdt_never_exceeds_peak(self, h_max, fraction, gamma):
        value = sdt(fraction * h_max, h_max, gamma)
        _, peak = sdt_peak(gamma, h_max)
        assert 0.0 <= value <= peak * (1 + 1e-9) + 1e-12
