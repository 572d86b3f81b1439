import abc
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..rbm import RbmParams, energy


class ChainStreams:
    """One generator per chain, spawned from a single seed sequence.

    Chain ``i`` draws from child ``i`` of the sequence, so the first ``k`` chains of
    an ``n``-chain run replay a ``k``-chain run with the same entropy. ``random`` and
    ``integers`` mirror ``numpy.random.Generator`` with a leading chain axis.
    """

    def __init__(self, entropy: Union[int, Sequence[int]], n_chains: int):
        if n_chains < 1:
            raise ValueError(f"Chain streams need at least one chain, got {n_chains}")
        self.n_chains = n_chains
        children = np.random.SeedSequence(entropy).spawn(n_chains)
        self._generators = [np.random.default_rng(child) for child in children]

    @classmethod
    def spawn(cls, rng: np.random.Generator, n_chains: int, seed: int = 0) -> "ChainStreams":
        """Streams keyed by ``seed`` and one draw from the caller's generator."""
        return cls([seed, int(rng.integers(0, 2 ** 32))], n_chains)

    def __len__(self) -> int:
        return self.n_chains

    def _tail(self, size) -> Tuple[int, ...]:
        shape = (int(size),) if np.isscalar(size) else tuple(size)
        if not shape or shape[0] != self.n_chains:
            raise ValueError(f"Leading axis of {shape} does not match {self.n_chains} chains")
        return shape[1:]

    def random(self, size) -> np.ndarray:
        tail = self._tail(size)
        return np.stack([generator.random(tail) for generator in self._generators])

    def integers(self, low: int, high: int, size) -> np.ndarray:
        tail = self._tail(size)
        return np.stack([generator.integers(low, high, size=tail) for generator in self._generators])


RandomSource = Union[np.random.Generator, ChainStreams]


def bits_to_string(bits: np.ndarray) -> str:
    return "".join("1" if bit else "0" for bit in np.asarray(bits).astype(bool))


def string_to_bits(text: str) -> np.ndarray:
    return np.array([1.0 if char == "1" else 0.0 for char in text.strip()])


class ChainState:
    """A batch of Markov chain states; row ``i`` of ``v`` and ``h`` is chain ``i``."""

    def __init__(self, v: np.ndarray, h: np.ndarray):
        self.v = np.atleast_2d(np.asarray(v, dtype=np.float64))
        self.h = np.atleast_2d(np.asarray(h, dtype=np.float64))
        if self.v.shape[0] != self.h.shape[0]:
            raise ValueError(f"{self.v.shape[0]} visible rows but {self.h.shape[0]} hidden rows")

    def __len__(self) -> int:
        return self.v.shape[0]

    def check(self, params: RbmParams) -> None:
        if self.v.shape[1] != params.n_visible or self.h.shape[1] != params.n_hidden:
            raise ValueError(
                f"Chain state {self.v.shape[1]}x{self.h.shape[1]} does not match "
                f"RBM {params.n_visible}x{params.n_hidden}"
            )


class SampleSet:
    def __init__(
        self,
        visible: np.ndarray,
        hidden: np.ndarray,
        energies: np.ndarray,
        source: str,
        metadata: Optional[Dict[str, Any]] = None,
    ):
        self.visible = np.atleast_2d(np.asarray(visible, dtype=np.float64))
        self.hidden = np.atleast_2d(np.asarray(hidden, dtype=np.float64))
        self.energies = np.asarray(energies, dtype=np.float64).reshape(-1)
        if not (self.visible.shape[0] == self.hidden.shape[0] == self.energies.size):
            raise ValueError("SampleSet visible, hidden and energies must have one entry per state")
        self.source = source
        self.metadata = metadata or {}

    @classmethod
    def from_states(
        cls,
        params: RbmParams,
        state: ChainState,
        source: str,
        metadata: Optional[Dict[str, Any]] = None,
    ) -> "SampleSet":
        state.check(params)
        energies = np.asarray(energy(params, state.v, state.h)).reshape(-1)
        return cls(state.v, state.h, energies, source, metadata)

    def __len__(self) -> int:
        return self.energies.size

    @property
    def states(self) -> List[Tuple[np.ndarray, np.ndarray]]:
        return list(zip(self.visible, self.hidden))

    def as_chain_state(self) -> ChainState:
        return ChainState(self.visible.copy(), self.hidden.copy())

    def verify_energies(self, params: RbmParams, atol: float = 1e-9) -> bool:
        recomputed = np.asarray(energy(params, self.visible, self.hidden)).reshape(-1)
        return bool(np.allclose(recomputed, self.energies, rtol=0.0, atol=atol))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "chain_id": np.arange(len(self)),
                "energy": self.energies,
                "v_bits": [bits_to_string(row) for row in self.visible],
                "h_bits": [bits_to_string(row) for row in self.hidden],
            }
        )

    def to_csv(self, path: Union[str, Path]) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.17g")

    @classmethod
    def read_csv(cls, path: Union[str, Path], source: str = "file") -> "SampleSet":
        frame = pd.read_csv(path, dtype={"v_bits": str, "h_bits": str})
        frame = frame.sort_values("chain_id")
        visible = np.array([string_to_bits(text) for text in frame["v_bits"]])
        hidden = np.array([string_to_bits(text) for text in frame["h_bits"]])
        return cls(visible, hidden, frame["energy"].to_numpy(), source)


class AbstractSampler(abc.ABC):
    """Negative-phase sample source.

    ``sample`` is a pure function of (params, configuration, rng state). ``seeds`` are
    visible rows that data-seeded samplers start their chains from.
    """

    kind: str = "abstract"

    @abc.abstractmethod
    def sample(
        self,
        params: RbmParams,
        rng: np.random.Generator,
        n_samples: Optional[int] = None,
        seeds: Optional[np.ndarray] = None,
    ) -> SampleSet:
        pass


class TemperedSampler(AbstractSampler):
    """Runs ``base`` on couplings multiplied by ``beta``; energies stay in the caller's units."""

    def __init__(self, base: AbstractSampler, beta: float):
        if beta <= 0:
            raise ValueError(f"beta must be positive, got {beta}")
        self.base = base
        self.beta = beta
        self.kind = f"{base.kind}@beta={beta:g}"

    def sample(self, params, rng, n_samples=None, seeds=None) -> SampleSet:
        drawn = self.base.sample(params.scaled(self.beta), rng, n_samples=n_samples, seeds=seeds)
        return SampleSet.from_states(params, drawn.as_chain_state(), self.kind, drawn.metadata)


class UniformSampler(AbstractSampler):
    """Independent uniformly random bit strings."""

    kind = "uniform"

    def __init__(self, n_samples: int = 100):
        self.n_samples = n_samples

    def sample(self, params, rng, n_samples=None, seeds=None) -> SampleSet:
        n = n_samples or self.n_samples
        state = ChainState(
            rng.integers(0, 2, size=(n, params.n_visible)).astype(np.float64),
            rng.integers(0, 2, size=(n, params.n_hidden)).astype(np.float64),
        )
        return SampleSet.from_states(params, state, self.kind)


class ConstantSampler(AbstractSampler):
    """Every sample is the same state (all zeros unless given)."""

    kind = "constant"

    def __init__(self, n_samples: int = 100, visible: Optional[np.ndarray] = None, hidden: Optional[np.ndarray] = None):
        self.n_samples = n_samples
        self.visible = visible
        self.hidden = hidden

    def sample(self, params, rng, n_samples=None, seeds=None) -> SampleSet:
        n = n_samples or self.n_samples
        v = np.zeros(params.n_visible) if self.visible is None else np.asarray(self.visible, dtype=np.float64)
        h = np.zeros(params.n_hidden) if self.hidden is None else np.asarray(self.hidden, dtype=np.float64)
        return SampleSet.from_states(params, ChainState(np.tile(v, (n, 1)), np.tile(h, (n, 1))), self.kind)
