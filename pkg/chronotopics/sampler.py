"""Collapsed Gibbs sampler for topics with a categorical time factor.

Every token carries a topic assignment. A sweep visits tokens in document then
position order, removes the token from the count matrices, draws a new topic
from the full conditional and adds it back. The per-topic time distribution
psi is the smoothed histogram of the time categories of the documents whose
tokens a topic holds, re-estimated at the end of each sweep.

The same kernel serves LDA (time weights fixed at one) and TOT (time weights
from per-topic Beta densities), see `chronotopics.baselines`.
"""

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numba import njit
from scipy.special import gammaln

from chronotopics.corpus import Corpus
from chronotopics.errors import ConfigError, ModelError

logger = logging.getLogger(__name__)

PSI_INITS = ("random", "activity")
ESTIMATES = ("final", "average")
PSI_SCHEDULES = ("sweep", "frozen")


@dataclass(frozen=True)
class NocConfig:
    T: int = 5
    alpha: float = 1.0
    beta: float = 0.5
    sweeps: int = 500
    burn_in: int = 300
    seed: int = 0
    psi_init: str = "random"
    psi_smoothing: float | None = None
    estimate: str = "final"
    psi_schedule: str = "sweep"
    time_factor: bool = True

    def validate(self, min_topics: int = 2) -> None:
        if self.T < min_topics:
            raise ConfigError(f"Topic count must be at least {min_topics}, got {self.T}")
        if self.alpha <= 0 or self.beta <= 0:
            raise ConfigError(
                f"Dirichlet priors must be positive, got alpha={self.alpha} beta={self.beta}"
            )
        if self.sweeps < 1:
            raise ConfigError(f"Sweep count must be positive, got {self.sweeps}")
        if not 0 <= self.burn_in < self.sweeps:
            raise ConfigError(
                f"Burn-in must lie in [0, sweeps), got {self.burn_in} with {self.sweeps} sweeps"
            )
        if self.psi_smoothing is not None and self.psi_smoothing <= 0:
            raise ConfigError(f"psi smoothing must be positive, got {self.psi_smoothing}")
        if self.psi_init not in PSI_INITS:
            raise ConfigError(f"psi_init must be one of {PSI_INITS}, got {self.psi_init!r}")
        if self.estimate not in ESTIMATES:
            raise ConfigError(f"estimate must be one of {ESTIMATES}, got {self.estimate!r}")
        if self.psi_schedule not in PSI_SCHEDULES:
            raise ConfigError(
                f"psi_schedule must be one of {PSI_SCHEDULES}, got {self.psi_schedule!r}"
            )

    def smoothing(self, K: int) -> float:
        if self.psi_smoothing is not None:
            return self.psi_smoothing
        return 1e-3 / K


@dataclass(eq=False)
class ModelState:
    config: NocConfig
    z: np.ndarray
    n_zv: np.ndarray
    m_dz: np.ndarray
    n_z: np.ndarray
    tau_zk: np.ndarray
    psi: np.ndarray
    time_weight: np.ndarray
    rng: np.random.Generator
    sweeps_done: int = 0

    @property
    def T(self) -> int:
        return self.n_z.shape[0]

    @property
    def K(self) -> int:
        return self.tau_zk.shape[1]


@dataclass(frozen=True, eq=False)
class Posterior:
    theta: np.ndarray
    phi: np.ndarray
    psi: np.ndarray | None = None
    beta_params: np.ndarray | None = None
    model: str = "noc"

    @property
    def T(self) -> int:
        return self.phi.shape[0]

    def top_words(self, z: int, n: int) -> np.ndarray:
        """Ids of the `n` most probable words of topic `z`; ties go to the lower id."""
        return np.argsort(-self.phi[z], kind="stable")[:n]


@dataclass
class FitDiagnostics:
    model: str
    log_joint: list[float] = field(default_factory=list)
    elapsed_ms: list[float] = field(default_factory=list)
    wall_ms: float = 0.0
    final_state: ModelState | None = None

    def record(self, sweep: int, log_joint: float, elapsed_ms: float) -> None:
        self.log_joint.append(log_joint)
        self.elapsed_ms.append(elapsed_ms)
        logger.info(
            "model=%s sweep=%d log_joint=%.6f elapsed_ms=%.3f",
            self.model,
            sweep,
            log_joint,
            elapsed_ms,
        )


class PosteriorAverager:
    """Running mean of point estimates over post-burn-in sweeps."""

    def __init__(self) -> None:
        self.count = 0
        self._sums: dict[str, np.ndarray] = {}

    def add(self, posterior: Posterior) -> None:
        for name in ("theta", "phi", "psi", "beta_params"):
            value = getattr(posterior, name)
            if value is None:
                continue
            if name in self._sums:
                self._sums[name] += value
            else:
                self._sums[name] = value.astype(np.float64).copy()
        self.count += 1

    def result(self, model: str) -> Posterior:
        if not self.count:
            raise ModelError("No sweeps were averaged")
        mean = {name: s / self.count for name, s in self._sums.items()}
        return Posterior(
            theta=mean["theta"],
            phi=mean["phi"],
            psi=mean.get("psi"),
            beta_params=mean.get("beta_params"),
            model=model,
        )


def chain_streams(seed: int) -> tuple[np.random.Generator, ...]:
    """Independent generators for assignment init, sweep draws and psi init."""
    return tuple(np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3))


def init_psi(corpus: Corpus, config: NocConfig, rng: np.random.Generator) -> np.ndarray:
    K = corpus.K
    if config.psi_init == "activity":
        activity = corpus.category_histogram()
        return np.tile(activity / activity.sum(), (config.T, 1))
    return rng.dirichlet(np.ones(K), size=config.T)


def build_counts(
    corpus: Corpus, z: np.ndarray, T: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    n_zv = np.zeros((T, corpus.V), dtype=np.int64)
    m_dz = np.zeros((corpus.D, T), dtype=np.int64)
    tau_zk = np.zeros((T, corpus.K), dtype=np.int64)
    np.add.at(n_zv, (z, corpus.words), 1)
    np.add.at(m_dz, (corpus.doc_of, z), 1)
    np.add.at(tau_zk, (z, corpus.doc_categories[corpus.doc_of]), 1)
    n_z = np.bincount(z, minlength=T).astype(np.int64)
    return n_zv, m_dz, n_z, tau_zk


def time_weights(state: ModelState, corpus: Corpus) -> np.ndarray:
    """D x T factor multiplied into the full conditional of each document's tokens."""
    if not state.config.time_factor:
        return np.ones((corpus.D, state.T))
    return np.ascontiguousarray(state.psi[:, corpus.doc_categories].T)


def init(corpus: Corpus, config: NocConfig) -> ModelState:
    if not corpus.num_tokens:
        raise ModelError("Cannot initialise a model on a corpus without tokens")
    config.validate(min_topics=1)
    init_rng, sweep_rng, psi_rng = chain_streams(config.seed)
    z = init_rng.integers(0, config.T, size=corpus.num_tokens).astype(np.int64)
    n_zv, m_dz, n_z, tau_zk = build_counts(corpus, z, config.T)
    state = ModelState(
        config=config,
        z=z,
        n_zv=n_zv,
        m_dz=m_dz,
        n_z=n_z,
        tau_zk=tau_zk,
        psi=init_psi(corpus, config, psi_rng),
        time_weight=np.empty((0, 0)),
        rng=sweep_rng,
    )
    state.time_weight = time_weights(state, corpus)
    return state


def topic_weights(
    m_d: np.ndarray,
    n_w: np.ndarray,
    n_z: np.ndarray,
    time_w: np.ndarray,
    alpha: float,
    beta: float,
    V: int,
) -> np.ndarray:
    """Normalised full conditional from counts that already exclude the current token."""
    p = (m_d + alpha) * (n_w + beta) / (n_z + V * beta) * time_w
    total = p.sum()
    if total <= 0:
        raise ModelError("Full conditional has no mass on any topic")
    return p / total


def token_offset(corpus: Corpus, d: int, i: int) -> int:
    if not 0 <= i < corpus.doc_lengths[d]:
        raise ModelError(f"Document {d} has no token position {i}")
    return int(corpus.doc_lengths[:d].sum()) + i


def exclude_token(state: ModelState, corpus: Corpus, d: int, i: int) -> int:
    n = token_offset(corpus, d, i)
    topic, w, k = state.z[n], corpus.words[n], corpus.doc_categories[d]
    state.n_zv[topic, w] -= 1
    state.m_dz[d, topic] -= 1
    state.n_z[topic] -= 1
    state.tau_zk[topic, k] -= 1
    return int(topic)


def include_token(state: ModelState, corpus: Corpus, d: int, i: int, topic: int) -> None:
    n = token_offset(corpus, d, i)
    w, k = corpus.words[n], corpus.doc_categories[d]
    state.z[n] = topic
    state.n_zv[topic, w] += 1
    state.m_dz[d, topic] += 1
    state.n_z[topic] += 1
    state.tau_zk[topic, k] += 1


def full_conditional(state: ModelState, corpus: Corpus, d: int, i: int) -> np.ndarray:
    """Topic distribution of token (d, i); the token must already be excluded."""
    w = corpus.words[token_offset(corpus, d, i)]
    cfg = state.config
    return topic_weights(
        state.m_dz[d],
        state.n_zv[:, w],
        state.n_z,
        state.time_weight[d],
        cfg.alpha,
        cfg.beta,
        corpus.V,
    )


@njit(cache=True)
def _resample_tokens(
    words, doc_of, doc_cat, z, n_zv, m_dz, n_z, tau_zk, time_weight, alpha, beta, v_beta, uniforms
):
    T = n_z.shape[0]
    cumulative = np.empty(T)
    for n in range(words.shape[0]):
        w = words[n]
        d = doc_of[n]
        k = doc_cat[d]
        old = z[n]
        n_zv[old, w] -= 1
        m_dz[d, old] -= 1
        n_z[old] -= 1
        tau_zk[old, k] -= 1

        total = 0.0
        for t in range(T):
            total += (
                (m_dz[d, t] + alpha)
                * (n_zv[t, w] + beta)
                / (n_z[t] + v_beta)
                * time_weight[d, t]
            )
            cumulative[t] = total

        new = old
        if total > 0.0:
            u = uniforms[n] * total
            new = 0
            while new < T - 1 and u >= cumulative[new]:
                new += 1

        z[n] = new
        n_zv[new, w] += 1
        m_dz[d, new] += 1
        n_z[new] += 1
        tau_zk[new, k] += 1


def resample_tokens(state: ModelState, corpus: Corpus) -> None:
    cfg = state.config
    uniforms = state.rng.random(corpus.num_tokens)
    _resample_tokens(
        corpus.words,
        corpus.doc_of,
        corpus.doc_categories,
        state.z,
        state.n_zv,
        state.m_dz,
        state.n_z,
        state.tau_zk,
        state.time_weight,
        float(cfg.alpha),
        float(cfg.beta),
        float(corpus.V * cfg.beta),
        uniforms,
    )


def update_psi(state: ModelState, smoothing: float | None = None) -> np.ndarray:
    s = state.config.smoothing(state.K) if smoothing is None else smoothing
    return normalize_histogram(state.tau_zk, s)


def normalize_histogram(tau_zk: np.ndarray, smoothing: float) -> np.ndarray:
    """Rows (tau + s) / (n + K s); a row without tokens falls back to uniform."""
    K = tau_zk.shape[1]
    totals = tau_zk.sum(axis=1, keepdims=True)
    psi = np.full(tau_zk.shape, 1.0 / K)
    filled = totals[:, 0] > 0
    psi[filled] = (tau_zk[filled] + smoothing) / (totals[filled] + K * smoothing)
    return psi


def gibbs_sweep(state: ModelState, corpus: Corpus) -> ModelState:
    resample_tokens(state, corpus)
    if state.config.psi_schedule == "sweep":
        state.psi = update_psi(state)
        state.time_weight = time_weights(state, corpus)
    state.sweeps_done += 1
    return state


def collapsed_log_likelihood(state: ModelState) -> float:
    """Log of the Dirichlet-multinomial word and topic terms of the joint."""
    cfg = state.config
    T, V = state.n_zv.shape
    D = state.m_dz.shape[0]
    words = T * (gammaln(V * cfg.beta) - V * gammaln(cfg.beta))
    words += gammaln(state.n_zv + cfg.beta).sum() - gammaln(state.n_z + V * cfg.beta).sum()
    topics = D * (gammaln(T * cfg.alpha) - T * gammaln(cfg.alpha))
    topics += gammaln(state.m_dz + cfg.alpha).sum()
    topics -= gammaln(state.m_dz.sum(axis=1) + T * cfg.alpha).sum()
    return float(words + topics)


def log_joint(state: ModelState) -> float:
    total = collapsed_log_likelihood(state)
    if state.config.time_factor:
        with np.errstate(divide="ignore"):
            log_psi = np.log(state.psi)
        mask = state.tau_zk > 0
        total += float((state.tau_zk[mask] * log_psi[mask]).sum())
    return total


def estimate_posterior(state: ModelState, config: NocConfig | None = None) -> Posterior:
    cfg = config or state.config
    T = state.T
    doc_lengths = state.m_dz.sum(axis=1, keepdims=True)
    theta = (state.m_dz + cfg.alpha) / (doc_lengths + T * cfg.alpha)
    V = state.n_zv.shape[1]
    phi = (state.n_zv + cfg.beta) / (state.n_z[:, None] + V * cfg.beta)
    psi = update_psi(state) if cfg.time_factor else None
    return Posterior(theta=theta, phi=phi, psi=psi, model="noc" if cfg.time_factor else "lda")


def check_counts(state: ModelState, corpus: Corpus) -> None:
    """Raise ModelError unless every count matrix agrees with the assignments."""
    n_zv, m_dz, n_z, tau_zk = build_counts(corpus, state.z, state.T)
    for name, expected in (("n_zv", n_zv), ("m_dz", m_dz), ("n_z", n_z), ("tau_zk", tau_zk)):
        if not np.array_equal(getattr(state, name), expected):
            raise ModelError(f"{name} is inconsistent with topic assignments")
    if not (
        np.array_equal(state.n_zv.sum(axis=1), state.n_z)
        and np.array_equal(state.m_dz.sum(axis=0), state.n_z)
        and np.array_equal(state.tau_zk.sum(axis=1), state.n_z)
        and np.array_equal(state.m_dz.sum(axis=1), corpus.doc_lengths)
    ):
        raise ModelError("count marginals disagree")


def fit(corpus: Corpus, config: NocConfig) -> tuple[Posterior, FitDiagnostics]:
    config.validate()
    model = "noc" if config.time_factor else "lda"
    diagnostics = FitDiagnostics(model=model)
    started = time.perf_counter()
    state = init(corpus, config)
    averager = PosteriorAverager()

    for sweep in range(1, config.sweeps + 1):
        t0 = time.perf_counter()
        gibbs_sweep(state, corpus)
        diagnostics.record(sweep, log_joint(state), (time.perf_counter() - t0) * 1000)
        if config.estimate == "average" and sweep > config.burn_in:
            averager.add(estimate_posterior(state))

    posterior = averager.result(model) if averager.count else estimate_posterior(state)
    diagnostics.wall_ms = (time.perf_counter() - started) * 1000
    diagnostics.final_state = state
    return posterior, diagnostics


def run_chains(
    corpus: Corpus,
    configs: Sequence[NocConfig],
    fitter: Callable[[Corpus, NocConfig], tuple[Posterior, FitDiagnostics]] = fit,
    workers: int = 1,
) -> list[tuple[Posterior, FitDiagnostics]]:
    """Fit independent chains, in a process pool when `workers` > 1; input order is kept."""
    if workers <= 1 or len(configs) <= 1:
        return [fitter(corpus, c) for c in configs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fitter, corpus, c) for c in configs]
        return [f.result() for f in futures]
