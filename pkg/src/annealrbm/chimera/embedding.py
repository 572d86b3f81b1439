"""Analytic minor embedding of complete bipartite graphs into Chimera.

Logical labels: visible unit ``i`` is ``i``; hidden unit ``j`` is ``n_visible + j``.
Visible ``i`` is a horizontal chain on shore 1 of cell row ``i // 4`` spanning
``ceil(n_hidden / 4)`` cells; hidden ``j`` is a vertical chain on shore 0 of cell
column ``j // 4`` spanning ``ceil(n_visible / 4)`` cells. The two chains cross in
cell ``(i // 4, j // 4)`` where an intra-cell coupler joins them.
"""
import math
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, Union

import networkx as nx

from ..errors import EmbeddingError
from .graph import SHORE_SIZE, ChimeraGraph


class Embedding:
    def __init__(
        self,
        chains: Dict[int, Iterable[int]],
        n_visible: int,
        n_hidden: int,
        chain_strength: Optional[float] = None,
    ):
        if chain_strength is not None and chain_strength <= 0:
            raise ValueError(f"chain_strength must be positive, got {chain_strength}")
        self.chains: Dict[int, Tuple[int, ...]] = {int(k): tuple(int(q) for q in v) for k, v in chains.items()}
        self.n_visible = n_visible
        self.n_hidden = n_hidden
        self.chain_strength = chain_strength

    @property
    def labels(self) -> List[int]:
        return list(range(self.n_visible + self.n_hidden))

    def chain(self, label: int) -> Tuple[int, ...]:
        return self.chains[label]

    def qubits(self) -> List[int]:
        return sorted(q for chain in self.chains.values() for q in chain)

    def chain_lengths(self) -> Dict[int, int]:
        return {label: len(chain) for label, chain in self.chains.items()}

    def source_edges(self) -> List[Tuple[int, int]]:
        return [(i, self.n_visible + j) for i in range(self.n_visible) for j in range(self.n_hidden)]

    def to_text(self) -> str:
        lines = [f"# n_visible={self.n_visible} n_hidden={self.n_hidden}"]
        if self.chain_strength is not None:
            lines[0] += f" chain_strength={self.chain_strength!r}"
        lines.extend(f"{label}: {','.join(str(q) for q in self.chains[label])}" for label in sorted(self.chains))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Embedding":
        header = {}
        chains: Dict[int, List[int]] = {}
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for token in line[1:].split():
                    key, _, value = token.partition("=")
                    header[key] = value
                continue
            label, _, qubits = line.partition(":")
            chains[int(label)] = [int(q) for q in qubits.split(",") if q.strip()]
        try:
            n_visible = int(header["n_visible"])
            n_hidden = int(header["n_hidden"])
        except KeyError as e:
            raise ValueError(f"Embedding text is missing header field {e}") from e
        strength = float(header["chain_strength"]) if "chain_strength" in header else None
        return cls(chains, n_visible, n_hidden, strength)

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Embedding":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))


def embed_bipartite(
    n_visible: int,
    n_hidden: int,
    graph: ChimeraGraph,
    chain_strength: Optional[float] = None,
) -> Embedding:
    """Standard K_{n_v,n_h} embedding; needs ``n_v, n_h <= 4m`` and no dead qubit on a chain."""
    capacity = SHORE_SIZE * graph.m
    if n_visible < 1 or n_hidden < 1:
        raise EmbeddingError(f"Cannot embed K{n_visible},{n_hidden}")
    if n_visible > capacity or n_hidden > capacity:
        raise EmbeddingError(
            f"K{n_visible},{n_hidden} exceeds the C{graph.m} capacity of {capacity} per side"
        )

    visible_span = math.ceil(n_hidden / SHORE_SIZE)
    hidden_span = math.ceil(n_visible / SHORE_SIZE)
    chains: Dict[int, List[int]] = {}
    for i in range(n_visible):
        row, k = divmod(i, SHORE_SIZE)
        chains[i] = [graph.linear_index(row, col, 1, k) for col in range(visible_span)]
    for j in range(n_hidden):
        col, k = divmod(j, SHORE_SIZE)
        chains[n_visible + j] = [graph.linear_index(row, col, 0, k) for row in range(hidden_span)]

    for label, chain in chains.items():
        dead = [q for q in chain if not graph.has_qubit(q)]
        if dead:
            raise EmbeddingError(f"Dead qubits {dead} break the chain of logical variable {label}")

    embedding = Embedding(chains, n_visible, n_hidden, chain_strength)
    verify_embedding(embedding, graph)
    return embedding


def embedding_problems(embedding: Embedding, graph: ChimeraGraph) -> List[str]:
    """Every violated embedding invariant, as messages; empty when valid."""
    problems: List[str] = []
    owner: Dict[int, int] = {}
    for label, chain in embedding.chains.items():
        if not chain:
            problems.append(f"chain {label} is empty")
            continue
        for q in chain:
            if not graph.has_qubit(q):
                problems.append(f"chain {label} uses qubit {q} which is not in the graph")
            elif q in owner:
                problems.append(f"qubit {q} is shared by chains {owner[q]} and {label}")
            else:
                owner[q] = label
        present = [q for q in chain if graph.has_qubit(q)]
        if present and not nx.is_connected(graph.subgraph(present)):
            problems.append(f"chain {label} is not connected")

    missing = set(embedding.labels) - set(embedding.chains)
    if missing:
        problems.append(f"logical variables {sorted(missing)} have no chain")

    for a, b in embedding.source_edges():
        if a not in embedding.chains or b not in embedding.chains:
            continue
        if not any(graph.has_edge(p, q) for p in embedding.chains[a] for q in embedding.chains[b]):
            problems.append(f"logical edge ({a}, {b}) has no physical coupler")
    return problems


def verify_embedding(embedding: Embedding, graph: ChimeraGraph) -> None:
    problems = embedding_problems(embedding, graph)
    if problems:
        raise EmbeddingError("Invalid embedding: " + "; ".join(problems))


def is_valid_embedding(embedding: Embedding, graph: ChimeraGraph) -> bool:
    return not embedding_problems(embedding, graph)
