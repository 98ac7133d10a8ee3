"""Reference models on the same corpus and output contracts: LDA and Topics over Time."""

import logging
import time
from dataclasses import dataclass, replace
from datetime import datetime, timezone

import numpy as np
from scipy import stats

from chronotopics.corpus import Corpus, TimeGrid
from chronotopics.sampler import (
    FitDiagnostics,
    ModelState,
    NocConfig,
    Posterior,
    PosteriorAverager,
    collapsed_log_likelihood,
    estimate_posterior,
    fit,
    init,
    resample_tokens,
)

logger = logging.getLogger(__name__)

EPSILON = 1e-4


@dataclass(eq=False)
class TotState:
    chain: ModelState
    times: np.ndarray
    a: np.ndarray
    b: np.ndarray


def lda_fit(corpus: Corpus, config: NocConfig) -> tuple[Posterior, FitDiagnostics]:
    return fit(corpus, replace(config, time_factor=False))


def corpus_time_range(corpus: Corpus) -> tuple[float, float]:
    seconds = [d.timestamp.timestamp() for d in corpus.documents]
    return min(seconds), max(seconds)


def normalize_times(corpus: Corpus) -> np.ndarray:
    """Min-max scaled document times clamped to [EPSILON, 1 - EPSILON]."""
    t_min, t_max = corpus_time_range(corpus)
    seconds = np.array([d.timestamp.timestamp() for d in corpus.documents])
    if t_max == t_min:
        return np.full(corpus.D, 0.5)
    return np.clip((seconds - t_min) / (t_max - t_min), EPSILON, 1 - EPSILON)


def fit_beta_moments(times: np.ndarray, weights: np.ndarray | None = None) -> tuple[float, float]:
    """Method-of-moments Beta fit; (1, 1) when the variance is degenerate."""
    times = np.asarray(times, dtype=np.float64)
    w = np.ones_like(times) if weights is None else np.asarray(weights, dtype=np.float64)
    total = w.sum()
    if total <= 0:
        return 1.0, 1.0
    mean = float((w * times).sum() / total)
    var = float((w * (times - mean) ** 2).sum() / total)
    if var <= 0 or var >= mean * (1 - mean):
        return 1.0, 1.0
    common = mean * (1 - mean) / var - 1
    return mean * common, (1 - mean) * common


def refit_beta(state: TotState) -> None:
    for z in range(state.chain.T):
        state.a[z], state.b[z] = fit_beta_moments(state.times, state.chain.m_dz[:, z])


def beta_log_density(times: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """D x T log Beta densities of each document time under each topic."""
    return stats.beta.logpdf(times[:, None], a[None, :], b[None, :])


def beta_time_weights(times: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Beta densities scaled so each document's largest weight is 1.

    A per-document constant cancels in the token conditional; sharply peaked
    topics would otherwise underflow to zero at distant times.
    """
    log_density = beta_log_density(times, a, b)
    return np.ascontiguousarray(np.exp(log_density - log_density.max(axis=1, keepdims=True)))


def discretize_beta(
    a: np.ndarray, b: np.ndarray, grid: TimeGrid, t_min: float, t_max: float
) -> np.ndarray:
    """Probability mass of each topic's Beta over each time category, rows normalised."""
    T = len(a)
    if t_max == t_min:
        psi = np.zeros((T, grid.K))
        psi[:, grid.category(datetime.fromtimestamp(t_min, tz=timezone.utc))] = 1.0
        return psi
    edges = np.array(
        [grid.bounds(k)[0].timestamp() for k in range(grid.K)] + [grid.end.timestamp()]
    )
    scaled = np.clip((edges - t_min) / (t_max - t_min), 0.0, 1.0)
    cdf = stats.beta.cdf(scaled[None, :], a[:, None], b[:, None])
    mass = np.diff(cdf, axis=1)
    totals = mass.sum(axis=1, keepdims=True)
    psi = np.full((T, grid.K), 1.0 / grid.K)
    filled = totals[:, 0] > 0
    psi[filled] = mass[filled] / totals[filled]
    return psi


def tot_log_joint(state: TotState) -> float:
    log_density = beta_log_density(state.times, state.a, state.b)
    m_dz = state.chain.m_dz
    time_term = np.where(m_dz > 0, m_dz * log_density, 0.0)
    return collapsed_log_likelihood(state.chain) + float(time_term.sum())


def tot_posterior(state: TotState, corpus: Corpus, t_range: tuple[float, float]) -> Posterior:
    base = estimate_posterior(state.chain)
    return Posterior(
        theta=base.theta,
        phi=base.phi,
        psi=discretize_beta(state.a, state.b, corpus.grid, *t_range),
        beta_params=np.column_stack([state.a, state.b]),
        model="tot",
    )


def tot_init(corpus: Corpus, config: NocConfig) -> TotState:
    chain = init(corpus, replace(config, time_factor=False, psi_schedule="frozen"))
    return TotState(
        chain=chain,
        times=normalize_times(corpus),
        a=np.ones(config.T),
        b=np.ones(config.T),
    )


def tot_sweep(state: TotState, corpus: Corpus) -> TotState:
    resample_tokens(state.chain, corpus)
    refit_beta(state)
    state.chain.time_weight = beta_time_weights(state.times, state.a, state.b)
    state.chain.sweeps_done += 1
    return state


def tot_fit(corpus: Corpus, config: NocConfig) -> tuple[Posterior, FitDiagnostics]:
    config.validate()
    diagnostics = FitDiagnostics(model="tot")
    started = time.perf_counter()
    state = tot_init(corpus, config)
    t_range = corpus_time_range(corpus)
    averager = PosteriorAverager()

    for sweep in range(1, config.sweeps + 1):
        t0 = time.perf_counter()
        tot_sweep(state, corpus)
        diagnostics.record(sweep, tot_log_joint(state), (time.perf_counter() - t0) * 1000)
        if config.estimate == "average" and sweep > config.burn_in:
            averager.add(tot_posterior(state, corpus, t_range))

    if averager.count:
        posterior = averager.result("tot")
    else:
        posterior = tot_posterior(state, corpus, t_range)
    diagnostics.wall_ms = (time.perf_counter() - started) * 1000
    diagnostics.final_state = state.chain
    logger.debug("final beta parameters: %s", np.column_stack([state.a, state.b]).tolist())
    return posterior, diagnostics
