"""Gradients and the SGD loop for RBM classifiers.

Every ``GradientEstimate`` returned by a gradient function holds dL/dθ of a loss to
be minimized: the negative log-likelihood for generative training, the negative
conditional log-likelihood of the class bit for discriminative training. An
update is ``θ ← θ - learning_rate · gradient``.
"""
import logging
import time
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy.special import expit, logsumexp

from .config import ThermometryConfig, TrainConfig
from .errors import EstimationError
from .metrics import EpochMetrics
from .rbm import RbmParams, accuracy, cond_hidden, free_energy, model_expectations, partition_function, with_class_bit
from .samplers.base import AbstractSampler, TemperedSampler
from .samplers.exact import ExactSampler
from .samplers.factory import build_sampler
from .samplers.gibbs import ContrastiveDivergenceSampler
from .thermometry import TempEstimate, estimate_beta

logger = logging.getLogger(__name__)

EpochCallback = Callable[[int, RbmParams, EpochMetrics], None]


class GradientEstimate:
    def __init__(self, dW: np.ndarray, db: np.ndarray, dc: np.ndarray):
        self.dW = np.asarray(dW, dtype=np.float64)
        self.db = np.asarray(db, dtype=np.float64)
        self.dc = np.asarray(dc, dtype=np.float64)

    def check(self, params: RbmParams) -> None:
        if self.dW.shape != params.W.shape or self.db.shape != params.b.shape or self.dc.shape != params.c.shape:
            raise ValueError(f"Gradient shapes {self.dW.shape} do not match {params!r}")

    def __add__(self, other: "GradientEstimate") -> "GradientEstimate":
        return GradientEstimate(self.dW + other.dW, self.db + other.db, self.dc + other.dc)

    def __sub__(self, other: "GradientEstimate") -> "GradientEstimate":
        return GradientEstimate(self.dW - other.dW, self.db - other.db, self.dc - other.dc)

    def __mul__(self, factor: float) -> "GradientEstimate":
        return GradientEstimate(self.dW * factor, self.db * factor, self.dc * factor)

    __rmul__ = __mul__

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.dW.ravel(), self.db, self.dc])

    def norm(self) -> float:
        return float(np.linalg.norm(self.flatten()))

    def cosine(self, other: "GradientEstimate") -> float:
        denominator = self.norm() * other.norm()
        if denominator == 0.0:
            return 0.0
        return float(self.flatten() @ other.flatten() / denominator)

    def to_dict(self):
        return {"dW": self.dW.tolist(), "db": self.db.tolist(), "dc": self.dc.tolist()}


def _rows(params: RbmParams, minibatch) -> np.ndarray:
    rows = np.atleast_2d(np.asarray(minibatch, dtype=np.float64))
    if rows.shape[0] == 0 or rows.size == 0:
        raise ValueError("Gradient needs a nonempty minibatch")
    if rows.shape[1] != params.n_visible:
        raise ValueError(f"Minibatch rows have length {rows.shape[1]}, expected n_visible={params.n_visible}")
    return rows


def _expectations(params: RbmParams, visible: np.ndarray) -> GradientEstimate:
    """⟨v hᵀ⟩, ⟨v⟩, ⟨h⟩ over visible rows with hidden units replaced by their conditional means."""
    p_hidden = cond_hidden(params, visible)
    n = visible.shape[0]
    return GradientEstimate(visible.T @ p_hidden / n, visible.mean(axis=0), p_hidden.mean(axis=0))


def positive_phase(params: RbmParams, minibatch) -> GradientEstimate:
    """Data expectations ⟨v hᵀ⟩, ⟨v⟩, ⟨h⟩ of a labelled minibatch (same container as a gradient)."""
    return _expectations(params, _rows(params, minibatch))


def model_phase(
    params: RbmParams,
    sampler: AbstractSampler,
    rng: np.random.Generator,
    minibatch: Optional[np.ndarray] = None,
    n_samples: Optional[int] = None,
) -> GradientEstimate:
    if isinstance(sampler, ExactSampler):
        ev, eh, evh = model_expectations(params)
        return GradientEstimate(evh, ev, eh)
    seeds = minibatch if isinstance(sampler, ContrastiveDivergenceSampler) else None
    drawn = sampler.sample(params, rng, n_samples=n_samples, seeds=seeds)
    return _expectations(params, drawn.visible)


def generative_gradient(
    params: RbmParams,
    minibatch,
    sampler: AbstractSampler,
    rng: np.random.Generator,
) -> GradientEstimate:
    """Model expectations minus data expectations: dL/dθ of the mean negative log-likelihood."""
    rows = _rows(params, minibatch)
    return model_phase(params, sampler, rng, minibatch=rows) - _expectations(params, rows)


def discriminative_gradient(params: RbmParams, minibatch) -> GradientEstimate:
    """Exact gradient of the mean of -log p(class | image) over the minibatch.

    Per row this is Σ_c p(c | image) S(v_c) - S(v_label) with S(v) = (v σᵀ, v, σ)
    and σ = expit(c + vW).
    """
    rows = _rows(params, minibatch)
    if params.n_visible < 2:
        raise ValueError("Discriminative training needs at least one image bit plus the class bit")
    images, labels = rows[:, :-1], rows[:, -1]
    v0, v1 = with_class_bit(images, 0), with_class_bit(images, 1)
    f0 = np.asarray(free_energy(params, v0))
    f1 = np.asarray(free_energy(params, v1))
    p1 = expit(f0 - f1)
    w0 = (1.0 - p1) - (labels == 0).astype(np.float64)
    w1 = p1 - (labels == 1).astype(np.float64)

    s0 = cond_hidden(params, v0)
    s1 = cond_hidden(params, v1)
    n = rows.shape[0]
    dW = (v0.T @ (w0[:, None] * s0) + v1.T @ (w1[:, None] * s1)) / n
    db = (w0 @ v0 + w1 @ v1) / n
    dc = (w0 @ s0 + w1 @ s1) / n
    return GradientEstimate(dW, db, dc)


def hybrid_gradient(
    params: RbmParams,
    minibatch,
    sampler: AbstractSampler,
    lambda_: float,
    rng: np.random.Generator,
) -> GradientEstimate:
    """λ/(1+λ) · generative + 1/(1+λ) · discriminative; λ = 0 never touches the sampler."""
    if lambda_ < 0:
        raise ValueError(f"lambda must be >= 0, got {lambda_}")
    discriminative = discriminative_gradient(params, minibatch)
    if lambda_ == 0:
        return discriminative
    generative = generative_gradient(params, minibatch, sampler, rng)
    return generative * (lambda_ / (1.0 + lambda_)) + discriminative * (1.0 / (1.0 + lambda_))


def conditional_nll(params: RbmParams, rows) -> float:
    """Mean of -log p(class | image) over labelled rows."""
    rows = _rows(params, rows)
    images, labels = rows[:, :-1], rows[:, -1]
    f0 = np.asarray(free_energy(params, with_class_bit(images, 0)))
    f1 = np.asarray(free_energy(params, with_class_bit(images, 1)))
    f_label = np.where(labels == 1, f1, f0)
    return float(np.mean(f_label + logsumexp(np.stack([-f0, -f1]), axis=0)))


def generative_nll(params: RbmParams, rows) -> float:
    """Mean of -log p(v) over visible rows, by exact enumeration."""
    rows = _rows(params, rows)
    return float(np.mean(free_energy(params, rows)) + partition_function(params))


def apply_update(params: RbmParams, gradient: GradientEstimate, config: TrainConfig) -> RbmParams:
    gradient.check(params)
    dW = gradient.dW + config.l2 * params.W if config.l2 else gradient.dW
    W = params.W - config.learning_rate * dW
    if config.weight_clip is not None:
        W = np.clip(W, -config.weight_clip, config.weight_clip)
    return RbmParams(W, params.b - config.learning_rate * gradient.db, params.c - config.learning_rate * gradient.dc)


class Trainer:
    """Minibatch SGD over labelled rows (class bit last).

    Shuffling, sampling and temperature estimation draw from separate child streams
    of ``config.rng_seed``, so runs that never sample follow the same shuffles.
    """

    def __init__(
        self,
        config: TrainConfig,
        sampler: Optional[AbstractSampler] = None,
        thermometry: Optional[ThermometryConfig] = None,
        run_name: str = "run",
    ):
        self.config = config
        self.thermometry = thermometry or ThermometryConfig()
        self.logger = logging.getLogger(f"Trainer.{run_name}")
        self.run_name = run_name
        self._sampler = sampler
        self.beta_eff: Optional[float] = None
        self.beta_history: List[Tuple[int, Optional[TempEstimate]]] = []
        self._step = 0

    @property
    def sampler(self) -> AbstractSampler:
        if self._sampler is None:
            if self.config.algorithm == "cd":
                self._sampler = ContrastiveDivergenceSampler(self.config.cd_k)
            else:
                self._sampler = build_sampler(self.config.sampler, self.config.chimera)
        return self._sampler

    def algorithm_for_epoch(self, epoch: int) -> str:
        if self.config.algorithm == "annealed_hybrid":
            return "sampler_generative" if epoch < self.config.switch_epoch else "discriminative"
        return self.config.algorithm

    def _needs_beta(self) -> bool:
        if self.config.beta_estimation == "off" or self.sampler.kind != "chimera":
            return False
        return self.beta_eff is None or self.config.beta_estimation == "every_step"

    def _estimate_beta(self, params: RbmParams, rng: np.random.Generator) -> None:
        beta_0 = self.beta_eff or self.thermometry.beta_0
        try:
            estimate = estimate_beta(
                params, self.sampler, beta_0, self.thermometry.n_samples, rng, self.thermometry.min_bin_count
            )
        except EstimationError as e:
            self.logger.warning(f"Step {self._step}: beta estimation failed ({e}); keeping beta={self.beta_eff}")
            self.beta_history.append((self._step, None))
            return
        self.beta_eff = estimate.beta_eff
        self.beta_history.append((self._step, estimate))
        self.logger.info(f"Step {self._step}: beta_eff={estimate.beta_eff:.4f}")

    def _model_sampler(self, params: RbmParams, beta_rng: np.random.Generator) -> AbstractSampler:
        if self._needs_beta():
            self._estimate_beta(params, beta_rng)
        if self.beta_eff and self.config.beta_estimation != "off" and self.sampler.kind == "chimera":
            return TemperedSampler(self.sampler, 1.0 / self.beta_eff)
        return self.sampler

    def gradient(
        self,
        algorithm: str,
        params: RbmParams,
        batch: np.ndarray,
        sample_rng: np.random.Generator,
        beta_rng: np.random.Generator,
    ) -> GradientEstimate:
        if algorithm == "discriminative":
            return discriminative_gradient(params, batch)
        if algorithm == "cd":
            return generative_gradient(params, batch, self.sampler, sample_rng)
        if algorithm == "hybrid" and self.config.lambda_ == 0:
            return discriminative_gradient(params, batch)
        sampler = self._model_sampler(params, beta_rng)
        if algorithm == "hybrid":
            return hybrid_gradient(params, batch, sampler, self.config.lambda_, sample_rng)
        return generative_gradient(params, batch, sampler, sample_rng)

    def fit(
        self,
        initial: RbmParams,
        train_rows,
        test_rows=None,
        on_epoch_end: Optional[EpochCallback] = None,
    ) -> Tuple[RbmParams, List[EpochMetrics]]:
        train_rows = _rows(initial, train_rows)
        test_rows = None if test_rows is None or len(test_rows) == 0 else _rows(initial, test_rows)
        if initial.n_visible < 2:
            raise ValueError("Training needs at least one image bit plus the class bit")

        self._step = 0
        self.beta_eff = None
        self.beta_history = []

        shuffle_seq, sample_seq, beta_seq = np.random.SeedSequence(self.config.rng_seed).spawn(3)
        shuffle_rng = np.random.default_rng(shuffle_seq)
        sample_rng = np.random.default_rng(sample_seq)
        beta_rng = np.random.default_rng(beta_seq)

        params = initial
        history: List[EpochMetrics] = []
        previous_algorithm = None
        self.logger.info(
            f"Training {params!r} with {self.config.algorithm} on {len(train_rows)} rows "
            f"for {self.config.n_epochs} epochs (batch {self.config.batch_size}, lr {self.config.learning_rate})"
        )
        for epoch in range(self.config.n_epochs):
            started = time.perf_counter()
            algorithm = self.algorithm_for_epoch(epoch)
            if previous_algorithm is not None and algorithm != previous_algorithm:
                self.logger.info(f"Epoch {epoch}: switching from {previous_algorithm} to {algorithm}")
            previous_algorithm = algorithm

            order = shuffle_rng.permutation(len(train_rows))
            for start in range(0, len(order), self.config.batch_size):
                batch = train_rows[order[start:start + self.config.batch_size]]
                gradient = self.gradient(algorithm, params, batch, sample_rng, beta_rng)
                params = apply_update(params, gradient, self.config)
                self._step += 1

            metrics = EpochMetrics(
                epoch=epoch,
                algorithm=algorithm,
                train_accuracy=accuracy(params, train_rows),
                test_accuracy=None if test_rows is None else accuracy(params, test_rows),
                mean_abs_coupling=params.mean_abs_coupling(),
                median_quadratic_coupling=params.median_abs_coupling(),
                wall_time=time.perf_counter() - started,
                beta_eff=self.beta_eff,
            )
            history.append(metrics)
            self.logger.info(
                f"Epoch {epoch} [{algorithm}]: train={metrics.train_accuracy:.4f} "
                f"test={metrics.test_accuracy if metrics.test_accuracy is not None else float('nan'):.4f} "
                f"median|W|={metrics.median_quadratic_coupling:.4f}"
            )
            if on_epoch_end is not None:
                on_epoch_end(epoch, params, metrics)
        return params, history


def train(
    initial_params: RbmParams,
    train_rows,
    test_rows,
    config: TrainConfig,
    sampler: Optional[AbstractSampler] = None,
    on_epoch_end: Optional[EpochCallback] = None,
) -> Tuple[RbmParams, List[EpochMetrics]]:
    return Trainer(config, sampler=sampler).fit(initial_params, train_rows, test_rows, on_epoch_end)
