import logging
from pathlib import Path
from typing import Iterable, List, Tuple, Union

import dwave_networkx as dnx
import networkx as nx

logger = logging.getLogger(__name__)

SHORE_SIZE = 4
CELL_SIZE = 2 * SHORE_SIZE


class ChimeraGraph:
    """An m×m grid of K4,4 cells with linear qubit labels.

    Qubit ``8(row·m + col) + 4·shore + k``: shore 0 qubits couple vertically to the cell
    below, shore 1 qubits couple horizontally to the cell on the right.
    """

    def __init__(self, m: int, dead_qubits: Iterable[int] = ()):
        if m < 1:
            raise ValueError(f"Chimera grid size must be >= 1, got {m}")
        graph = dnx.chimera_graph(m, m, SHORE_SIZE)
        dead = set(int(q) for q in dead_qubits)
        unknown = dead - set(graph.nodes)
        if unknown:
            raise ValueError(f"Dead qubits {sorted(unknown)} are not in a C{m} graph")
        graph.remove_nodes_from(dead)

        self.m = m
        self.graph = graph
        self.dead_qubits = frozenset(dead)

    @property
    def nodes(self) -> List[int]:
        return sorted(self.graph.nodes)

    @property
    def edges(self) -> List[Tuple[int, int]]:
        return sorted((min(p, q), max(p, q)) for p, q in self.graph.edges)

    def linear_index(self, row: int, col: int, shore: int, k: int) -> int:
        return CELL_SIZE * (row * self.m + col) + SHORE_SIZE * shore + k

    def coordinates(self, qubit: int) -> Tuple[int, int, int, int]:
        cell, offset = divmod(qubit, CELL_SIZE)
        row, col = divmod(cell, self.m)
        shore, k = divmod(offset, SHORE_SIZE)
        return row, col, shore, k

    def has_qubit(self, qubit: int) -> bool:
        return self.graph.has_node(qubit)

    def has_edge(self, p: int, q: int) -> bool:
        return self.graph.has_edge(p, q)

    def intra_cell_edges(self) -> List[Tuple[int, int]]:
        return [(p, q) for p, q in self.edges if p // CELL_SIZE == q // CELL_SIZE]

    def inter_cell_edges(self) -> List[Tuple[int, int]]:
        return [(p, q) for p, q in self.edges if p // CELL_SIZE != q // CELL_SIZE]

    def subgraph(self, qubits: Iterable[int]) -> nx.Graph:
        return self.graph.subgraph(qubits)

    def edge_list_text(self) -> str:
        return "".join(f"{p} {q}\n" for p, q in self.edges)

    def write_edge_list(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.edge_list_text(), encoding="utf-8")

    def __repr__(self) -> str:
        return f"ChimeraGraph(m={self.m}, nodes={self.graph.number_of_nodes()}, edges={self.graph.number_of_edges()})"


def build_chimera(m: int, dead_qubits: Iterable[int] = ()) -> ChimeraGraph:
    graph = ChimeraGraph(m, dead_qubits)
    logger.debug(f"Built {graph!r}")
    return graph
