from typing import Optional

import numpy as np

from ..config import SamplerConfig
from ..rbm import RbmParams
from .base import AbstractSampler, ChainStreams, SampleSet
from .gibbs import random_state, run_sweeps, seeded_state, gibbs_sweep


def linear_schedule(beta_start: float, beta_end: float, n_sweeps: int) -> np.ndarray:
    if not beta_start > 0 or beta_end < beta_start:
        raise ValueError(f"Invalid annealing schedule: beta_start={beta_start}, beta_end={beta_end}")
    if n_sweeps < 1:
        raise ValueError(f"Annealing schedule needs at least one sweep, got {n_sweeps}")
    return np.linspace(beta_start, beta_end, n_sweeps)


def simulated_anneal(
    params: RbmParams,
    config: SamplerConfig,
    rng: np.random.Generator,
    n_samples: Optional[int] = None,
    seeds: Optional[np.ndarray] = None,
) -> SampleSet:
    """Independent annealing runs of block Gibbs sweeps along a linear β schedule.

    Every run starts from a uniformly random state, follows the schedule, then takes
    ``gibbs_postprocess_sweeps`` sweeps at β=1. Run ``i`` draws only from chain stream
    ``i``, keyed by ``config.rng_seed`` and one draw from ``rng``.
    """
    schedule = linear_schedule(*config.sa_schedule)
    n = n_samples or config.n_samples
    if seeds is None:
        streams = ChainStreams.spawn(rng, n, config.rng_seed)
        state = random_state(params, n, streams)
    else:
        state = seeded_state(params, seeds)
        streams = ChainStreams.spawn(rng, len(state), config.rng_seed)
    for beta in schedule:
        state = gibbs_sweep(params, state, streams, beta=float(beta))
    state = run_sweeps(params, state, streams, config.gibbs_postprocess_sweeps)
    return SampleSet.from_states(params, state, "simulated_annealing")


class SimulatedAnnealingSampler(AbstractSampler):
    kind = "simulated_annealing"

    def __init__(self, config: Optional[SamplerConfig] = None):
        self.config = config or SamplerConfig(kind="simulated_annealing")

    def sample(self, params, rng, n_samples=None, seeds=None) -> SampleSet:
        return simulated_anneal(params, self.config, rng, n_samples=n_samples, seeds=seeds)
