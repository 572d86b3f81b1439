from typing import Optional

import numpy as np

from ..rbm import RbmParams, cond_hidden, cond_visible, marginal_distribution
from .base import AbstractSampler, ChainState, ChainStreams, SampleSet
from .gibbs import bernoulli


def exact_sample(params: RbmParams, n_samples: int, rng: np.random.Generator, seed: int = 0) -> SampleSet:
    """I.i.d. Boltzmann draws at β=1, draw ``i`` from chain stream ``i``.

    The smaller layer is drawn by inverse CDF over its enumerated marginal, the other
    layer from its exact conditional, which together is a draw from the joint.
    """
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    layer, states, probs = marginal_distribution(params)
    streams = ChainStreams.spawn(rng, n_samples, seed)
    cdf = np.cumsum(probs)
    picks = np.searchsorted(cdf, streams.random(n_samples) * cdf[-1], side="right")
    picks = np.minimum(picks, len(states) - 1)
    chosen = states[picks]
    if layer == "hidden":
        state = ChainState(bernoulli(cond_visible(params, chosen), streams), chosen)
    else:
        state = ChainState(chosen, bernoulli(cond_hidden(params, chosen), streams))
    return SampleSet.from_states(params, state, "exact")


class ExactSampler(AbstractSampler):
    kind = "exact"

    def __init__(self, n_samples: int = 100, rng_seed: int = 0):
        self.n_samples = n_samples
        self.rng_seed = rng_seed

    def sample(self, params, rng, n_samples=None, seeds=None) -> SampleSet:
        return exact_sample(params, n_samples or self.n_samples, rng, seed=self.rng_seed)
