import logging
from typing import Optional

import numpy as np
from scipy.special import expit

from ..config import SamplerConfig
from ..rbm import RbmParams
from .base import AbstractSampler, ChainState, ChainStreams, RandomSource, SampleSet

logger = logging.getLogger(__name__)


def bernoulli(probabilities: np.ndarray, rng: RandomSource) -> np.ndarray:
    return (rng.random(probabilities.shape) < probabilities).astype(np.float64)


def gibbs_sweep(params: RbmParams, state: ChainState, rng: RandomSource, beta: float = 1.0) -> ChainState:
    """One block heat-bath sweep at inverse temperature ``beta``: all h given v, then all v given h."""
    state.check(params)
    h = bernoulli(expit(beta * (params.c + state.v @ params.W)), rng)
    v = bernoulli(expit(beta * (params.b + h @ params.W.T)), rng)
    return ChainState(v, h)


def run_sweeps(
    params: RbmParams,
    state: ChainState,
    rng: RandomSource,
    n_sweeps: int,
    beta: float = 1.0,
) -> ChainState:
    for _ in range(n_sweeps):
        state = gibbs_sweep(params, state, rng, beta=beta)
    return state


def random_state(params: RbmParams, n_chains: int, rng: RandomSource) -> ChainState:
    return ChainState(
        rng.integers(0, 2, size=(n_chains, params.n_visible)).astype(np.float64),
        rng.integers(0, 2, size=(n_chains, params.n_hidden)).astype(np.float64),
    )


def seeded_state(params: RbmParams, seeds: np.ndarray) -> ChainState:
    seeds = np.atleast_2d(np.asarray(seeds, dtype=np.float64))
    if seeds.shape[0] == 0:
        raise ValueError("Seeded chains need at least one seed row")
    if seeds.shape[1] != params.n_visible:
        raise ValueError(f"Seed rows have length {seeds.shape[1]}, expected n_visible={params.n_visible}")
    return ChainState(seeds, np.zeros((seeds.shape[0], params.n_hidden)))


def cd_negative_phase(
    params: RbmParams, minibatch: np.ndarray, k: int, rng: np.random.Generator, seed: int = 0
) -> SampleSet:
    """CD-k: one chain per datapoint, started at that datapoint and advanced ``k`` sweeps."""
    if k < 1:
        raise ValueError(f"CD needs k >= 1 sweeps, got {k}")
    minibatch = np.atleast_2d(np.asarray(minibatch, dtype=np.float64))
    if minibatch.shape[0] == 0 or minibatch.size == 0:
        raise ValueError("CD negative phase needs a nonempty minibatch")
    streams = ChainStreams.spawn(rng, minibatch.shape[0], seed)
    state = run_sweeps(params, seeded_state(params, minibatch), streams, k)
    return SampleSet.from_states(params, state, f"cd-{k}")


class GibbsSampler(AbstractSampler):
    """Block Gibbs MCMC from random bit strings (or given seeds) after ``burn_in_sweeps``."""

    kind = "gibbs"

    def __init__(self, config: Optional[SamplerConfig] = None):
        self.config = config or SamplerConfig(kind="gibbs")

    def sample(self, params, rng, n_samples=None, seeds=None) -> SampleSet:
        n = n_samples or self.config.n_samples
        if seeds is None:
            streams = ChainStreams.spawn(rng, n, self.config.rng_seed)
            state = random_state(params, n, streams)
        else:
            state = seeded_state(params, seeds)
            streams = ChainStreams.spawn(rng, len(state), self.config.rng_seed)
            state = ChainState(state.v, streams.integers(0, 2, size=state.h.shape).astype(np.float64))
        state = run_sweeps(params, state, streams, self.config.burn_in_sweeps)
        return SampleSet.from_states(params, state, self.kind)


class ContrastiveDivergenceSampler(AbstractSampler):
    kind = "cd"

    def __init__(self, k: int = 1):
        if k < 1:
            raise ValueError(f"CD needs k >= 1 sweeps, got {k}")
        self.k = k

    def sample(self, params, rng, n_samples=None, seeds=None) -> SampleSet:
        if seeds is None:
            raise ValueError("Contrastive divergence chains must be seeded with data rows")
        return cd_negative_phase(params, seeds, self.k, rng)


def long_chain_reference(
    params: RbmParams,
    n_samples: int,
    rng: np.random.Generator,
    burn_in: int = 10_000,
    thin: int = 10,
) -> SampleSet:
    """Single Gibbs chain, ``burn_in`` sweeps then one state kept every ``thin`` sweeps."""
    state = run_sweeps(params, random_state(params, 1, rng), rng, burn_in)
    visible, hidden = [], []
    for _ in range(n_samples):
        state = run_sweeps(params, state, rng, thin)
        visible.append(state.v[0])
        hidden.append(state.h[0])
    logger.debug(f"Long-chain reference drawn: {n_samples} states, burn-in {burn_in}, thin {thin}")
    return SampleSet.from_states(params, ChainState(np.array(visible), np.array(hidden)), "gibbs-reference")
