import logging
from typing import Optional

from ..config import ChimeraConfig, SamplerConfig
from .annealing import SimulatedAnnealingSampler
from .base import AbstractSampler
from .exact import ExactSampler
from .gibbs import GibbsSampler

logger = logging.getLogger(__name__)


def build_sampler(config: SamplerConfig, chimera_config: Optional[ChimeraConfig] = None) -> AbstractSampler:
    if config.kind == "gibbs":
        sampler: AbstractSampler = GibbsSampler(config)
    elif config.kind == "simulated_annealing":
        sampler = SimulatedAnnealingSampler(config)
    elif config.kind == "exact":
        sampler = ExactSampler(config.n_samples, config.rng_seed)
    elif config.kind == "chimera":
        from ..chimera.sampler import ChimeraSampler

        sampler = ChimeraSampler(config, chimera_config)
    else:
        raise ValueError(f"Unknown sampler kind: {config.kind}")
    logger.info(f"Using {sampler.kind} sampler with {config.n_samples} samples per call")
    return sampler
