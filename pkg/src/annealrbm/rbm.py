"""Restricted Boltzmann machine parameterization and exact quantities.

Parameters are stored in canonical form::

    p(v, h) ∝ exp(vᵀWh + bᵀv + cᵀh),   E(v, h) = -vᵀWh - bᵀv - cᵀh

The class bit of a labelled visible row is the last visible unit.
"""
from pathlib import Path
from typing import Tuple, Union

import numpy as np
from pydantic import BaseModel, Field
from scipy.special import expit, logsumexp

from .errors import EnumerationBudgetError

ENUMERATION_BUDGET = 26
PARAMS_MAGIC = "annealrbm-params"
PARAMS_VERSION = 1

ArrayLike = Union[np.ndarray, list, tuple]


def enumerate_states(n: int) -> np.ndarray:
    """All ``2**n`` bit strings; row ``i`` is the MSB-first binary expansion of ``i``."""
    index = np.arange(2 ** n, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((index[:, None] >> shifts) & 1).astype(np.float64)


def check_budget(n_units: int, budget: int = ENUMERATION_BUDGET) -> None:
    if n_units > budget:
        raise EnumerationBudgetError(n_units, budget)


class RbmParams:
    def __init__(self, W: ArrayLike, b: ArrayLike, c: ArrayLike):
        W = np.array(W, dtype=np.float64, ndmin=2)
        b = np.array(b, dtype=np.float64).reshape(-1)
        c = np.array(c, dtype=np.float64).reshape(-1)

        if W.ndim != 2:
            raise ValueError(f"W must be a matrix, got shape {W.shape}")
        n_visible, n_hidden = W.shape
        if n_visible < 1 or n_hidden < 1:
            raise ValueError(f"RBM needs at least one visible and one hidden unit, got {W.shape}")
        if b.shape != (n_visible,):
            raise ValueError(f"b has length {b.size}, expected n_visible={n_visible}")
        if c.shape != (n_hidden,):
            raise ValueError(f"c has length {c.size}, expected n_hidden={n_hidden}")
        for name, value in (("W", W), ("b", b), ("c", c)):
            if not np.all(np.isfinite(value)):
                raise ValueError(f"RBM parameter {name} contains non-finite entries")
            value.setflags(write=False)

        self.W = W
        self.b = b
        self.c = c

    @property
    def n_visible(self) -> int:
        return self.W.shape[0]

    @property
    def n_hidden(self) -> int:
        return self.W.shape[1]

    @property
    def n_units(self) -> int:
        return self.n_visible + self.n_hidden

    @classmethod
    def zeros(cls, n_visible: int, n_hidden: int) -> "RbmParams":
        return cls(np.zeros((n_visible, n_hidden)), np.zeros(n_visible), np.zeros(n_hidden))

    @classmethod
    def initialize(cls, n_visible: int, n_hidden: int, rng: np.random.Generator, scale: float = 0.1) -> "RbmParams":
        """Training start point: W ~ U(-scale, scale)/sqrt(n_visible), zero biases."""
        W = rng.uniform(-scale, scale, size=(n_visible, n_hidden)) / np.sqrt(n_visible)
        return cls(W, np.zeros(n_visible), np.zeros(n_hidden))

    @classmethod
    def random(cls, n_visible: int, n_hidden: int, rng: np.random.Generator, scale: float = 1.0) -> "RbmParams":
        return cls(
            rng.normal(0.0, scale, size=(n_visible, n_hidden)),
            rng.normal(0.0, scale, size=n_visible),
            rng.normal(0.0, scale, size=n_hidden),
        )

    def scaled(self, factor: float) -> "RbmParams":
        return RbmParams(self.W * factor, self.b * factor, self.c * factor)

    def copy(self) -> "RbmParams":
        return RbmParams(self.W, self.b, self.c)

    def mean_abs_coupling(self) -> float:
        return float(np.mean(np.abs(self.W)))

    def max_abs_coupling(self) -> float:
        return float(np.max(np.abs(self.W)))

    def median_abs_coupling(self) -> float:
        return float(np.median(np.abs(self.W)))

    def to_dict(self):
        return {"W": self.W.tolist(), "b": self.b.tolist(), "c": self.c.tolist()}

    def to_text(self) -> str:
        lines = [f"{PARAMS_MAGIC} {PARAMS_VERSION}", f"{self.n_visible} {self.n_hidden}"]
        lines.extend(" ".join(repr(float(x)) for x in row) for row in self.W)
        lines.append(" ".join(repr(float(x)) for x in self.b))
        lines.append(" ".join(repr(float(x)) for x in self.c))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RbmParams":
        lines = [line for line in text.splitlines() if line.strip()]
        if len(lines) < 2:
            raise ValueError("Truncated RBM parameter file")
        magic = lines[0].split()
        if len(magic) != 2 or magic[0] != PARAMS_MAGIC or int(magic[1]) != PARAMS_VERSION:
            raise ValueError(f"Not an RBM parameter file (header {lines[0]!r})")
        n_visible, n_hidden = (int(x) for x in lines[1].split())
        if len(lines) != 2 + n_visible + 2:
            raise ValueError(f"Expected {n_visible + 4} lines for a {n_visible}x{n_hidden} RBM, got {len(lines)}")
        W = np.array([[float(x) for x in line.split()] for line in lines[2:2 + n_visible]])
        b = np.array([float(x) for x in lines[2 + n_visible].split()])
        c = np.array([float(x) for x in lines[3 + n_visible].split()])
        if W.shape != (n_visible, n_hidden):
            raise ValueError(f"W block has shape {W.shape}, header says {(n_visible, n_hidden)}")
        return cls(W, b, c)

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "RbmParams":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))

    def __repr__(self) -> str:
        return f"RbmParams(n_visible={self.n_visible}, n_hidden={self.n_hidden})"


def _layer(values: ArrayLike, size: int, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim not in (1, 2) or arr.shape[-1] != size:
        raise ValueError(f"{name} state has shape {arr.shape}, expected trailing length {size}")
    return arr


def _scalar_or_array(values: np.ndarray):
    return float(values) if np.ndim(values) == 0 else values


def energy(params: RbmParams, v: ArrayLike, h: ArrayLike):
    """E(v, h) for one state or a batch of states (rows)."""
    v = _layer(v, params.n_visible, "visible")
    h = _layer(h, params.n_hidden, "hidden")
    if v.ndim != h.ndim or (v.ndim == 2 and v.shape[0] != h.shape[0]):
        raise ValueError(f"visible batch {v.shape} and hidden batch {h.shape} do not pair up")
    values = -(np.einsum("...i,ij,...j->...", v, params.W, h) + v @ params.b + h @ params.c)
    return _scalar_or_array(values)


def free_energy(params: RbmParams, v: ArrayLike):
    """F(v) = -bᵀv - Σ_j log(1 + exp(c_j + (vᵀW)_j))."""
    v = _layer(v, params.n_visible, "visible")
    values = -(v @ params.b) - np.logaddexp(0.0, params.c + v @ params.W).sum(axis=-1)
    return _scalar_or_array(values)


def cond_hidden(params: RbmParams, v: ArrayLike) -> np.ndarray:
    v = _layer(v, params.n_visible, "visible")
    return expit(params.c + v @ params.W)


def cond_visible(params: RbmParams, h: ArrayLike) -> np.ndarray:
    h = _layer(h, params.n_hidden, "hidden")
    return expit(params.b + h @ params.W.T)


def _smaller_layer_log_weights(params: RbmParams) -> Tuple[str, np.ndarray, np.ndarray]:
    """Enumerate the smaller layer and return its unnormalized log marginal."""
    check_budget(params.n_units)
    if params.n_hidden <= params.n_visible:
        states = enumerate_states(params.n_hidden)
        log_weights = states @ params.c + np.logaddexp(0.0, params.b + states @ params.W.T).sum(axis=1)
        return "hidden", states, log_weights
    states = enumerate_states(params.n_visible)
    return "visible", states, -np.asarray(free_energy(params, states))


def partition_function(params: RbmParams) -> float:
    """log Z = log Σ_{v,h} exp(-E(v,h)); refuses above the enumeration budget."""
    _, _, log_weights = _smaller_layer_log_weights(params)
    return float(logsumexp(log_weights))


def marginal_distribution(params: RbmParams) -> Tuple[str, np.ndarray, np.ndarray]:
    """(layer name, enumerated states, normalized probabilities) of the smaller layer."""
    layer, states, log_weights = _smaller_layer_log_weights(params)
    return layer, states, np.exp(log_weights - logsumexp(log_weights))


def log_marginal_visible(params: RbmParams, v: ArrayLike):
    values = -np.asarray(free_energy(params, v)) - partition_function(params)
    return _scalar_or_array(values)


def model_expectations(params: RbmParams) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exact ⟨v⟩, ⟨h⟩ and ⟨v hᵀ⟩ under the model."""
    layer, states, probs = marginal_distribution(params)
    if layer == "hidden":
        p_visible = cond_visible(params, states)
        ev = probs @ p_visible
        eh = probs @ states
        evh = (p_visible * probs[:, None]).T @ states
    else:
        p_hidden = cond_hidden(params, states)
        ev = probs @ states
        eh = probs @ p_hidden
        evh = (states * probs[:, None]).T @ p_hidden
    return ev, eh, evh


def ground_state(params: RbmParams) -> Tuple[np.ndarray, np.ndarray, float]:
    """Lowest-energy (v, h), found by enumerating the smaller layer and optimizing the other."""
    check_budget(params.n_units)
    if params.n_hidden <= params.n_visible:
        hs = enumerate_states(params.n_hidden)
        vs = ((params.b + hs @ params.W.T) > 0).astype(np.float64)
    else:
        vs = enumerate_states(params.n_visible)
        hs = ((params.c + vs @ params.W) > 0).astype(np.float64)
    energies = np.asarray(energy(params, vs, hs))
    best = int(np.argmin(energies))
    return vs[best], hs[best], float(energies[best])


class Prediction(BaseModel):
    class_bit: int = Field(ge=0, le=1)
    free_energy_0: float
    free_energy_1: float
    posterior_1: float = Field(ge=0.0, le=1.0)


def with_class_bit(images: ArrayLike, bit: int) -> np.ndarray:
    images = np.asarray(images, dtype=np.float64)
    column = np.full(images.shape[:-1] + (1,), float(bit))
    return np.concatenate([images, column], axis=-1)


def _class_free_energies(params: RbmParams, images: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
    if params.n_visible < 2:
        raise ValueError("Classification needs at least one image bit plus the class bit")
    images = _layer(images, params.n_visible - 1, "image")
    return (
        np.asarray(free_energy(params, with_class_bit(images, 0))),
        np.asarray(free_energy(params, with_class_bit(images, 1))),
    )


def classify(params: RbmParams, image_bits: ArrayLike) -> Prediction:
    """Pick the class whose completed visible vector has the lower free energy (ties → 0)."""
    image_bits = np.asarray(image_bits, dtype=np.float64)
    if image_bits.ndim != 1:
        raise ValueError(f"classify takes a single image, got shape {image_bits.shape}")
    f0, f1 = _class_free_energies(params, image_bits)
    return Prediction(
        class_bit=0 if f0 <= f1 else 1,
        free_energy_0=float(f0),
        free_energy_1=float(f1),
        posterior_1=float(expit(f0 - f1)),
    )


def predict_classes(params: RbmParams, images: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized ``classify``: (class bits, posterior of class 1) for a batch of images."""
    f0, f1 = _class_free_energies(params, np.atleast_2d(images))
    return (f1 < f0).astype(np.int64), expit(f0 - f1)


def accuracy(params: RbmParams, rows: ArrayLike) -> float:
    """Fraction of labelled rows (class bit last) whose predicted class matches."""
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if rows.shape[0] == 0:
        raise ValueError("accuracy needs at least one row")
    predicted, _ = predict_classes(params, rows[:, :-1])
    return float(np.mean(predicted == rows[:, -1].astype(np.int64)))
