"""Unit tests for the baselines module."""

from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from chronotopics.baselines import (
    EPSILON,
    beta_time_weights,
    discretize_beta,
    fit_beta_moments,
    lda_fit,
    normalize_times,
    refit_beta,
    tot_fit,
    tot_init,
    tot_log_joint,
    tot_sweep,
)
from chronotopics.corpus import Corpus, Document, TimeGrid, Vocabulary
from chronotopics.metrics import coherence_report, total_variation
from chronotopics.sampler import NocConfig, build_counts, check_counts, fit, gibbs_sweep, init
from chronotopics.synth import ModeStructure, SynthSpec, generate, match_topics

ORIGIN = datetime(2018, 1, 1, tzinfo=timezone.utc)
# equal-quality fits differ in mean PMI by sampling noise of about this size
COHERENCE_TIE = 0.02


def make_corpus(docs: list[list[int]], days: list[int], V: int, K: int) -> Corpus:
    grid = TimeGrid(ORIGIN, timedelta(days=14), K)
    documents = tuple(
        Document(
            doc_id=d,
            tokens=tuple(tokens),
            sentences=(),
            timestamp=ORIGIN + timedelta(days=day),
            time_category=day // 14,
        )
        for d, (tokens, day) in enumerate(zip(docs, days))
    )
    vocab = Vocabulary(terms=tuple(f"w{v}" for v in range(V)), doc_frequency=(1,) * V)
    return Corpus(documents=documents, vocabulary=vocab, grid=grid)


def mean_psi_error(truth_psi: np.ndarray, fitted_psi: np.ndarray, perm: np.ndarray) -> float:
    return float(
        np.mean([total_variation(truth_psi[i], fitted_psi[j]) for i, j in enumerate(perm)])
    )


def small_corpus() -> Corpus:
    docs = [[0, 1, 2, 1], [2, 2, 3], [3, 0, 1], [1, 1, 0, 2], [3, 3, 2]]
    return make_corpus(docs, [0, 5, 13, 20, 27], V=4, K=2)


class TestLdaFit:
    def test_matches_noc_without_time_factor(self):
        corpus = small_corpus()
        config = NocConfig(T=2, sweeps=25, burn_in=5, seed=4)
        lda_posterior, lda_diag = lda_fit(corpus, config)
        noc_state = init(corpus, NocConfig(T=2, sweeps=25, burn_in=5, seed=4, time_factor=False))
        for _ in range(25):
            gibbs_sweep(noc_state, corpus)
        assert np.array_equal(lda_diag.final_state.z, noc_state.z)
        assert lda_posterior.psi is None
        assert lda_posterior.model == "lda"

    def test_uniform_psi_gives_same_trajectory(self):
        # equal activity in both slices, so the frozen psi rows are [0.5, 0.5]
        corpus = make_corpus([[0, 1, 2], [2, 1, 0]], [0, 20], V=3, K=2)
        config = NocConfig(
            T=2, sweeps=10, burn_in=2, seed=1, psi_init="activity", psi_schedule="frozen"
        )
        _, noc_diag = fit(corpus, config)
        _, lda_diag = lda_fit(corpus, config)
        np.testing.assert_array_equal(noc_diag.final_state.psi, np.full((2, 2), 0.5))
        assert np.array_equal(noc_diag.final_state.z, lda_diag.final_state.z)


class TestFitBetaMoments:
    def test_degenerate_variance(self):
        assert fit_beta_moments(np.full(5, 0.3)) == (1.0, 1.0)

    def test_uniform_times(self):
        times = (np.arange(10_000) + 0.5) / 10_000
        a, b = fit_beta_moments(times)
        assert a == pytest.approx(1.0, abs=1e-3)
        assert b == pytest.approx(1.0, abs=1e-3)

    def test_recovers_known_moments(self):
        rng = np.random.default_rng(0)
        times = rng.beta(2.0, 5.0, size=200_000)
        a, b = fit_beta_moments(times)
        assert a == pytest.approx(2.0, rel=0.05)
        assert b == pytest.approx(5.0, rel=0.05)

    def test_weights(self):
        times = np.array([0.2, 0.4, 0.9])
        a, b = fit_beta_moments(times, np.array([1.0, 1.0, 0.0]))
        assert (a, b) == fit_beta_moments(times[:2])

    def test_zero_weights(self):
        assert fit_beta_moments(np.array([0.1, 0.9]), np.zeros(2)) == (1.0, 1.0)


class TestNormalizeTimes:
    def test_clamped(self):
        times = normalize_times(small_corpus())
        assert times.min() == EPSILON
        assert times.max() == 1 - EPSILON

    def test_single_instant(self):
        corpus = make_corpus([[0, 1], [1, 0]], [3, 3], V=2, K=1)
        assert normalize_times(corpus).tolist() == [0.5, 0.5]


class TestDiscretizeBeta:
    def test_uniform_beta_spreads_by_width(self):
        grid = TimeGrid(ORIGIN, timedelta(days=14), 2)
        t_min = ORIGIN.timestamp()
        t_max = (ORIGIN + timedelta(days=28)).timestamp()
        psi = discretize_beta(np.array([1.0]), np.array([1.0]), grid, t_min, t_max)
        np.testing.assert_allclose(psi, [[0.5, 0.5]])

    def test_rows_normalised(self):
        grid = TimeGrid(ORIGIN, timedelta(days=14), 3)
        t_min = ORIGIN.timestamp()
        t_max = (ORIGIN + timedelta(days=30)).timestamp()
        a = np.array([0.5, 2.0, 6.0])
        b = np.array([0.5, 6.0, 2.0])
        psi = discretize_beta(a, b, grid, t_min, t_max)
        np.testing.assert_allclose(psi.sum(axis=1), 1.0, atol=1e-12)
        assert psi[1].argmax() == 0
        assert psi[2].argmax() == 1

    def test_single_instant_is_one_hot(self):
        grid = TimeGrid(ORIGIN, timedelta(days=14), 2)
        t = (ORIGIN + timedelta(days=20)).timestamp()
        psi = discretize_beta(np.array([2.0]), np.array([2.0]), grid, t, t)
        assert psi.tolist() == [[0.0, 1.0]]


class TestTotFit:
    def test_concentrated_topic_keeps_log_joint_finite(self):
        days = [0, 100] + [50 + d % 2 for d in range(200)]
        corpus = make_corpus([[0, 1]] * len(days), days, V=2, K=8)
        state = tot_init(corpus, NocConfig(T=2, seed=0))
        z = np.repeat(np.array([1, 1] + [0] * 200, dtype=np.int64), 2)
        state.chain.z = z
        state.chain.n_zv, state.chain.m_dz, state.chain.n_z, state.chain.tau_zk = build_counts(
            corpus, z, 2
        )
        refit_beta(state)
        assert state.a[0] > 1e3 and state.b[0] > 1e3
        weights = beta_time_weights(state.times, state.a, state.b)
        assert np.isfinite(weights).all()
        np.testing.assert_allclose(weights.max(axis=1), 1.0)
        assert np.isfinite(tot_log_joint(state))

    def test_counts_and_parameters_after_sweeps(self):
        corpus = small_corpus()
        state = tot_init(corpus, NocConfig(T=2, seed=3))
        for _ in range(5):
            tot_sweep(state, corpus)
            check_counts(state.chain, corpus)
            assert np.isfinite(state.a).all() and (state.a > 0).all()
            assert np.isfinite(state.b).all() and (state.b > 0).all()
        expected = beta_time_weights(state.times, state.a, state.b)
        np.testing.assert_allclose(state.chain.time_weight, expected)

    def test_outputs(self):
        posterior, diagnostics = tot_fit(small_corpus(), NocConfig(T=2, sweeps=10, burn_in=2))
        assert posterior.model == "tot"
        assert posterior.beta_params.shape == (2, 2)
        assert posterior.psi.shape == (2, 2)
        np.testing.assert_allclose(posterior.psi.sum(axis=1), 1.0, atol=1e-9)
        np.testing.assert_allclose(posterior.theta.sum(axis=1), 1.0, atol=1e-9)
        assert len(diagnostics.log_joint) == 10
        assert np.isfinite(diagnostics.log_joint).all()

    def test_deterministic(self):
        config = NocConfig(T=2, sweeps=8, burn_in=2, seed=6)
        first, _ = tot_fit(small_corpus(), config)
        second, _ = tot_fit(small_corpus(), config)
        assert np.array_equal(first.beta_params, second.beta_params)
        assert np.array_equal(first.phi, second.phi)


@pytest.mark.slow
class TestBimodalComparison:
    def test_noc_fits_bimodal_time_better_than_tot(self):
        wins = 0
        for seed in range(5):
            spec = SynthSpec(
                T=3,
                V=150,
                D=300,
                tokens_per_doc=30,
                alpha=0.05,
                beta=0.05,
                K=6,
                mode_structure=ModeStructure(modes=2, width=1),
                seed=seed,
            )
            corpus, truth = generate(spec)
            config = NocConfig(T=3, sweeps=150, burn_in=100, seed=seed)
            noc, _ = fit(corpus, config)
            tot, _ = tot_fit(corpus, config)

            noc_perm, _ = match_topics(truth.phi, noc.phi)
            tot_perm, _ = match_topics(truth.phi, tot.phi)
            noc_tv = mean_psi_error(truth.psi, noc.psi, noc_perm)
            tot_tv = mean_psi_error(truth.psi, tot.psi, tot_perm)
            wins += noc_tv < tot_tv
        assert wins >= 4

    def test_noc_coherence_not_below_lda(self):
        # short documents; the time slice carries much of the topic signal
        noc_scores, lda_scores = [], []
        for seed in range(5):
            spec = SynthSpec(
                T=3,
                V=150,
                D=400,
                tokens_per_doc=8,
                alpha=0.05,
                beta=0.1,
                K=6,
                mode_structure=ModeStructure(modes=2, width=1),
                seed=seed,
            )
            corpus, _ = generate(spec)
            config = NocConfig(T=3, sweeps=150, burn_in=100, seed=seed)
            noc, _ = fit(corpus, config)
            lda, _ = lda_fit(corpus, config)
            noc_scores.append(coherence_report(noc, corpus, k_words=20).mean)
            lda_scores.append(coherence_report(lda, corpus, k_words=20).mean)
        assert np.isfinite(noc_scores).all() and np.isfinite(lda_scores).all()
        assert np.mean(noc_scores) >= np.mean(lda_scores) - COHERENCE_TIE
