import logging
from typing import Dict, Iterable, Optional, Tuple

import dimod
import numpy as np

from ..errors import EmbeddingError
from ..rbm import RbmParams
from .embedding import Embedding
from .graph import ChimeraGraph

logger = logging.getLogger(__name__)

Edge = Tuple[int, int]


def _edge(p: int, q: int) -> Edge:
    return (p, q) if p < q else (q, p)


class IsingProblem:
    """E(s) = Σ J_pq s_p s_q + Σ h_p s_p + offset over spins s ∈ {-1, +1}."""

    def __init__(self, J: Dict[Edge, float], hfield: Dict[int, float], offset: float = 0.0):
        self.J: Dict[Edge, float] = {}
        for (p, q), value in J.items():
            if p == q:
                raise ValueError(f"Self-coupling on node {p}")
            key = _edge(int(p), int(q))
            self.J[key] = self.J.get(key, 0.0) + float(value)
        self.hfield: Dict[int, float] = {int(p): float(value) for p, value in hfield.items()}
        self.offset = float(offset)

    @property
    def nodes(self):
        nodes = set(self.hfield)
        for p, q in self.J:
            nodes.update((p, q))
        return sorted(nodes)

    @classmethod
    def from_bqm(cls, bqm: dimod.BinaryQuadraticModel) -> "IsingProblem":
        spin = bqm.change_vartype(dimod.SPIN, inplace=False)
        return cls(dict(spin.quadratic), dict(spin.linear), spin.offset)

    def to_bqm(self) -> dimod.BinaryQuadraticModel:
        return dimod.BinaryQuadraticModel(self.hfield, self.J, self.offset, dimod.SPIN)

    def energy(self, spins: Dict[int, int]) -> float:
        total = self.offset + sum(h * spins[p] for p, h in self.hfield.items())
        return total + sum(j * spins[p] * spins[q] for (p, q), j in self.J.items())

    def max_abs_coupling(self) -> float:
        return max((abs(value) for value in self.J.values()), default=0.0)

    def max_abs_field(self) -> float:
        return max((abs(value) for value in self.hfield.values()), default=0.0)

    def scaled(self, factor: float) -> "IsingProblem":
        return IsingProblem(
            {edge: value * factor for edge, value in self.J.items()},
            {node: value * factor for node, value in self.hfield.items()},
            self.offset * factor,
        )

    def check_graph(self, graph: ChimeraGraph) -> None:
        for p, q in self.J:
            if not graph.has_edge(p, q):
                raise EmbeddingError(f"Coupling ({p}, {q}) is not a coupler of {graph!r}")
        for p in self.hfield:
            if not graph.has_qubit(p):
                raise EmbeddingError(f"Field on qubit {p} which is not in {graph!r}")


def rbm_to_ising(params: RbmParams) -> IsingProblem:
    """Logical Ising form of the RBM energy over labels visible ``i``, hidden ``n_v + j``.

    Energies match E(v, h) exactly under ``bit = (spin + 1) / 2``.
    """
    n_visible = params.n_visible
    linear = {i: -float(params.b[i]) for i in range(n_visible)}
    linear.update({n_visible + j: -float(params.c[j]) for j in range(params.n_hidden)})
    quadratic = {
        (i, n_visible + j): -float(params.W[i, j])
        for i in range(n_visible)
        for j in range(params.n_hidden)
        if params.W[i, j] != 0.0
    }
    bqm = dimod.BinaryQuadraticModel(linear, quadratic, 0.0, dimod.BINARY)
    return IsingProblem.from_bqm(bqm)


def default_chain_strength(logical: IsingProblem, factor: float = 1.5) -> float:
    strength = factor * logical.max_abs_coupling()
    return strength if strength > 0 else 1.0


def embed_problem(
    params: RbmParams,
    embedding: Embedding,
    graph: ChimeraGraph,
    chain_strength: Optional[float] = None,
    chain_strength_factor: float = 1.5,
) -> IsingProblem:
    """Spread the logical Ising problem over the chains of ``embedding``.

    Logical fields split equally across chain qubits, logical couplings split equally
    across the couplers joining two chains, and every coupler inside a chain gets
    ``-chain_strength``. The offset absorbs the chain terms so that a state with
    unbroken chains has exactly the logical energy.
    """
    if (embedding.n_visible, embedding.n_hidden) != (params.n_visible, params.n_hidden):
        raise EmbeddingError(
            f"Embedding is for {embedding.n_visible}x{embedding.n_hidden}, "
            f"RBM is {params.n_visible}x{params.n_hidden}"
        )
    logical = rbm_to_ising(params)
    if chain_strength is None:
        chain_strength = embedding.chain_strength
    if chain_strength is None:
        chain_strength = default_chain_strength(logical, chain_strength_factor)
    if chain_strength <= 0:
        raise ValueError(f"chain_strength must be positive, got {chain_strength}")

    hfield: Dict[int, float] = {}
    for label, bias in logical.hfield.items():
        chain = embedding.chain(label)
        for q in chain:
            hfield[q] = bias / len(chain)

    J: Dict[Edge, float] = {}
    for (a, b), coupling in logical.J.items():
        couplers = [_edge(p, q) for p in embedding.chain(a) for q in embedding.chain(b) if graph.has_edge(p, q)]
        if not couplers:
            raise EmbeddingError(f"No physical coupler between the chains of {a} and {b}")
        for edge in couplers:
            J[edge] = J.get(edge, 0.0) + coupling / len(couplers)

    offset = logical.offset
    for chain in embedding.chains.values():
        for p, q in graph.subgraph(chain).edges:
            J[_edge(p, q)] = -chain_strength
            offset += chain_strength

    for q in embedding.qubits():
        hfield.setdefault(q, 0.0)
    return IsingProblem(J, hfield, offset)


def auto_scale(
    problem: IsingProblem,
    j_range: Tuple[float, float] = (-2.0, 2.0),
    h_range: Tuple[float, float] = (-1.0, 1.0),
) -> Tuple[IsingProblem, float]:
    """Shrink a problem that exceeds the coupler/field ranges, then clip to them.

    Returns the scaled problem and the divisor applied (1.0 when already in range).
    """
    ratios = [1.0]
    for value in problem.J.values():
        ratios.append(value / j_range[1] if value > 0 else value / j_range[0])
    for value in problem.hfield.values():
        ratios.append(value / h_range[1] if value > 0 else value / h_range[0])
    scale = max(ratios)
    scaled = problem.scaled(1.0 / scale)
    clipped = IsingProblem(
        {edge: float(np.clip(value, *j_range)) for edge, value in scaled.J.items()},
        {node: float(np.clip(value, *h_range)) for node, value in scaled.hfield.items()},
        scaled.offset,
    )
    if scale > 1.0:
        logger.debug(f"Physical problem rescaled by 1/{scale:.4g} to fit coupler ranges")
    return clipped, scale


def ising_energies(problem: IsingProblem, nodes: Iterable[int], spins: np.ndarray) -> np.ndarray:
    """Energies of spin rows whose columns follow ``nodes``."""
    index = {node: k for k, node in enumerate(nodes)}
    spins = np.atleast_2d(spins)
    energies = np.full(spins.shape[0], problem.offset)
    for p, h in problem.hfield.items():
        energies += h * spins[:, index[p]]
    for (p, q), j in problem.J.items():
        energies += j * spins[:, index[p]] * spins[:, index[q]]
    return energies
