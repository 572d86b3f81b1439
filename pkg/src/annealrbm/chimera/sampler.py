import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from scipy import sparse
from scipy.special import expit

from ..config import ChimeraConfig, SamplerConfig
from ..rbm import RbmParams
from ..samplers.annealing import linear_schedule
from ..samplers.base import AbstractSampler, ChainState, ChainStreams, RandomSource, SampleSet
from ..samplers.gibbs import run_sweeps
from .embedding import Embedding, embed_bipartite
from .graph import SHORE_SIZE, ChimeraGraph, build_chimera
from .problem import IsingProblem, auto_scale, embed_problem

logger = logging.getLogger(__name__)


class PhysicalAnnealer:
    """Block heat-bath annealing of an Ising problem, one colour class of the graph at a time."""

    def __init__(self, problem: IsingProblem, graph: ChimeraGraph):
        problem.check_graph(graph)
        self.nodes = problem.nodes
        self.index = {node: k for k, node in enumerate(self.nodes)}
        size = len(self.nodes)

        rows, cols, values = [], [], []
        for (p, q), value in problem.J.items():
            rows.extend((self.index[p], self.index[q]))
            cols.extend((self.index[q], self.index[p]))
            values.extend((value, value))
        self.couplings = sparse.csr_matrix((values, (rows, cols)), shape=(size, size))
        self.fields = np.array([problem.hfield.get(node, 0.0) for node in self.nodes])

        colouring = nx.coloring.greedy_color(graph.subgraph(self.nodes), strategy="largest_first")
        classes: Dict[int, List[int]] = {}
        for node in self.nodes:
            classes.setdefault(colouring.get(node, 0), []).append(self.index[node])
        self.colour_classes = [np.array(classes[colour]) for colour in sorted(classes)]

    def anneal(self, schedule: Sequence[float], n_samples: int, rng: RandomSource) -> np.ndarray:
        spins = 2.0 * rng.integers(0, 2, size=(n_samples, len(self.nodes))).astype(np.float64) - 1.0
        for beta in schedule:
            for members in self.colour_classes:
                local = self.fields[members] + (self.couplings[members] @ spins.T).T
                up = rng.random(local.shape) < expit(-2.0 * beta * local)
                spins[:, members] = np.where(up, 1.0, -1.0)
        return spins


def decode_chains(
    spins: np.ndarray,
    nodes: Sequence[int],
    embedding: Embedding,
    rng: RandomSource,
) -> Tuple[np.ndarray, float]:
    """Majority vote per chain (ties → random bit); returns logical bits and broken-chain fraction."""
    index = {node: k for k, node in enumerate(nodes)}
    labels = embedding.labels
    bits = np.empty((spins.shape[0], len(labels)))
    broken = 0
    for column, label in enumerate(labels):
        members = [index[q] for q in embedding.chain(label)]
        total = spins[:, members].sum(axis=1)
        broken += int(np.count_nonzero(np.abs(total) != len(members)))
        tie_break = rng.integers(0, 2, size=total.shape).astype(np.float64)
        bits[:, column] = np.where(total > 0, 1.0, np.where(total < 0, 0.0, tie_break))
    return bits, broken / float(spins.shape[0] * len(labels))


def chimera_sample(
    params: RbmParams,
    embedding: Embedding,
    graph: ChimeraGraph,
    config: SamplerConfig,
    rng: np.random.Generator,
    chimera_config: Optional[ChimeraConfig] = None,
    n_samples: Optional[int] = None,
    chain_strength: Optional[float] = None,
) -> SampleSet:
    """Anneal the embedded physical problem, decode chains, then post-process on the logical RBM.

    Read ``i`` draws only from chain stream ``i``, keyed by ``config.rng_seed`` and one
    draw from ``rng``.
    """
    chimera_config = chimera_config or ChimeraConfig()
    physical = embed_problem(
        params,
        embedding,
        graph,
        chain_strength=chain_strength if chain_strength is not None else chimera_config.chain_strength,
        chain_strength_factor=chimera_config.chain_strength_factor,
    )
    scale = 1.0
    if chimera_config.auto_scale:
        physical, scale = auto_scale(physical, chimera_config.j_range, chimera_config.h_range)

    annealer = PhysicalAnnealer(physical, graph)
    n = n_samples or config.n_samples
    streams = ChainStreams.spawn(rng, n, config.rng_seed)
    spins = annealer.anneal(linear_schedule(*config.sa_schedule), n, streams)
    bits, broken_fraction = decode_chains(spins, annealer.nodes, embedding, streams)

    state = ChainState(bits[:, : params.n_visible], bits[:, params.n_visible:])
    state = run_sweeps(params, state, streams, config.gibbs_postprocess_sweeps)
    metadata = {"broken_chain_fraction": broken_fraction, "scale": scale}
    if broken_fraction > 0:
        logger.debug(f"Chimera sample: {broken_fraction:.3%} of chains broken")
    return SampleSet.from_states(params, state, "chimera", metadata)


def chain_strength_sweep(
    params: RbmParams,
    embedding: Embedding,
    graph: ChimeraGraph,
    strengths: Sequence[float],
    config: SamplerConfig,
    rng: np.random.Generator,
    chimera_config: Optional[ChimeraConfig] = None,
) -> List[Tuple[float, float]]:
    """(chain strength, broken-chain fraction) for each strength."""
    results = []
    for strength in strengths:
        drawn = chimera_sample(params, embedding, graph, config, rng, chimera_config, chain_strength=strength)
        results.append((float(strength), drawn.metadata["broken_chain_fraction"]))
    return results


class ChimeraSampler(AbstractSampler):
    """Simulated annealer behind a Chimera minor embedding, one embedding per RBM size."""

    kind = "chimera"

    def __init__(self, config: Optional[SamplerConfig] = None, chimera_config: Optional[ChimeraConfig] = None):
        self.config = config or SamplerConfig(kind="chimera")
        self.chimera_config = chimera_config or ChimeraConfig()
        self._layouts: Dict[Tuple[int, int], Tuple[ChimeraGraph, Embedding]] = {}

    def layout_for(self, n_visible: int, n_hidden: int) -> Tuple[ChimeraGraph, Embedding]:
        key = (n_visible, n_hidden)
        if key not in self._layouts:
            m = self.chimera_config.m or math.ceil(max(n_visible, n_hidden) / SHORE_SIZE)
            graph = build_chimera(m, self.chimera_config.dead_qubits)
            embedding = embed_bipartite(n_visible, n_hidden, graph, self.chimera_config.chain_strength)
            logger.info(
                f"Embedded K{n_visible},{n_hidden} into C{m}: "
                f"{len(embedding.qubits())} qubits, max chain length {max(embedding.chain_lengths().values())}"
            )
            self._layouts[key] = (graph, embedding)
        return self._layouts[key]

    def sample(self, params, rng, n_samples=None, seeds=None) -> SampleSet:
        graph, embedding = self.layout_for(params.n_visible, params.n_hidden)
        return chimera_sample(params, embedding, graph, self.config, rng, self.chimera_config, n_samples=n_samples)
