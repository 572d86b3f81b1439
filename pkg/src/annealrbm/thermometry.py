"""Audits of whether a sampler's output is Boltzmann at β=1.

Effective temperature is measured by drawing twice at different coupling scales and
regressing the log ratio of binned energy histograms on bin energy. Equilibration
is measured in block Gibbs sweeps needed before a two-sample KS test on energies
stops rejecting the reference distribution.
"""
import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field
from scipy import stats

from .errors import EstimationError
from .rbm import ENUMERATION_BUDGET, RbmParams, energy
from .samplers.base import AbstractSampler, SampleSet
from .samplers.exact import exact_sample
from .samplers.gibbs import gibbs_sweep, long_chain_reference

logger = logging.getLogger(__name__)

Checkpoint = Tuple[int, RbmParams]


class KsResult(BaseModel):
    statistic: float = Field(ge=0.0, le=1.0)
    p_value: float = Field(ge=0.0, le=1.0)
    n1: int
    n2: int


def ks_two_sample(xs: Sequence[float], ys: Sequence[float]) -> KsResult:
    """Sup-distance between empirical CDFs, p-value from the asymptotic Kolmogorov law."""
    xs = np.sort(np.asarray(xs, dtype=np.float64).reshape(-1))
    ys = np.sort(np.asarray(ys, dtype=np.float64).reshape(-1))
    if xs.size == 0 or ys.size == 0:
        raise ValueError("KS test needs two nonempty samples")
    support = np.concatenate([xs, ys])
    cdf_x = np.searchsorted(xs, support, side="right") / xs.size
    cdf_y = np.searchsorted(ys, support, side="right") / ys.size
    statistic = float(np.max(np.abs(cdf_x - cdf_y)))
    effective = xs.size * ys.size / (xs.size + ys.size)
    p_value = float(np.clip(stats.kstwobign.sf(math.sqrt(effective) * statistic), 0.0, 1.0))
    return KsResult(statistic=statistic, p_value=p_value, n1=xs.size, n2=ys.size)


class TempEstimate(BaseModel):
    beta_eff: float
    beta_0: float
    x: float
    sigma: float
    slope: float
    intercept: float
    n_bins_used: int = Field(ge=2)


def _energies(params: RbmParams, drawn: SampleSet) -> np.ndarray:
    return np.asarray(energy(params, drawn.visible, drawn.hidden)).reshape(-1)


def estimate_beta(
    params: RbmParams,
    sampler: AbstractSampler,
    beta_0: float,
    n: int,
    rng: np.random.Generator,
    min_count: int = 5,
) -> TempEstimate:
    """Effective inverse temperature of ``sampler`` on the couplings of ``params``.

    Draw ``n`` states at ``params / beta_0`` and ``n`` at ``x · params / beta_0`` with
    ``x = 1 + 1/(beta_0 σ)``, where σ is the energy spread of the first draw measured
    in the couplings it was drawn at. Bin both draws by energy under ``params`` on the
    edges of the first draw, and fit ``log(n2/n1)`` against bin centre over bins
    holding at least ``min_count`` states in both draws. ``beta_eff = beta_0 · slope / (1 - x)``.
    """
    if n < 50:
        raise ValueError(f"Temperature estimation needs n >= 50 samples, got {n}")
    if not beta_0 > 0:
        raise ValueError(f"beta_0 must be positive, got {beta_0}")

    first = _energies(params, sampler.sample(params.scaled(1.0 / beta_0), rng, n_samples=n))
    sigma = float(np.std(first)) / beta_0
    if not np.isfinite(sigma) or sigma == 0.0:
        raise EstimationError(f"First draw has degenerate energy spread (sigma={sigma})")
    x = 1.0 + 1.0 / (beta_0 * sigma)
    if x == 1.0:
        raise EstimationError(f"Second-draw scale collapsed to x=1 (sigma={sigma})")

    edges = np.histogram_bin_edges(first, bins=math.ceil(math.sqrt(2 * n)))
    second = _energies(params, sampler.sample(params.scaled(x / beta_0), rng, n_samples=n))
    n1, _ = np.histogram(first, bins=edges)
    n2, _ = np.histogram(second, bins=edges)

    usable = (n1 >= min_count) & (n2 >= min_count)
    n_usable = int(np.count_nonzero(usable))
    if n_usable < 2:
        raise EstimationError(f"Only {n_usable} energy bins hold >= {min_count} samples in both draws")

    centres = 0.5 * (edges[:-1] + edges[1:])
    fit = stats.linregress(centres[usable], np.log(n2[usable] / n1[usable]))
    beta_eff = beta_0 * fit.slope / (1.0 - x)
    logger.debug(f"beta_eff={beta_eff:.4f} from {n_usable} bins (beta_0={beta_0}, x={x:.4f})")
    return TempEstimate(
        beta_eff=float(beta_eff),
        beta_0=beta_0,
        x=x,
        sigma=sigma,
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        n_bins_used=n_usable,
    )


def reference_samples(
    params: RbmParams,
    n_samples: int,
    rng: np.random.Generator,
    burn_in: int = 10_000,
    thin: int = 10,
) -> SampleSet:
    """Boltzmann reference draws: exact within the enumeration budget, a long Gibbs chain beyond."""
    if params.n_units <= ENUMERATION_BUDGET:
        drawn = exact_sample(params, n_samples, rng)
        drawn.metadata["reference"] = "exact"
        return drawn
    logger.warning(
        f"{params.n_units} units exceed the enumeration budget; using a long-chain Gibbs reference"
    )
    drawn = long_chain_reference(params, n_samples, rng, burn_in=burn_in, thin=thin)
    drawn.metadata["reference"] = "long_chain"
    return drawn


def steps_to_boltzmann(
    params: RbmParams,
    seed_states: SampleSet,
    reference: SampleSet,
    max_sweeps: int,
    rng: np.random.Generator,
    threshold: float = 0.05,
) -> int:
    """Fewest sweeps after which seeded chains pass the KS test against ``reference``.

    Returns ``max_sweeps + 1`` when the p-value never exceeds ``threshold``.
    """
    if len(seed_states) == 0 or len(reference) == 0:
        raise ValueError("steps_to_boltzmann needs nonempty seed and reference samples")
    if max_sweeps < 0:
        raise ValueError(f"max_sweeps must be >= 0, got {max_sweeps}")

    target = _energies(params, reference)
    state = seed_states.as_chain_state()
    for sweeps in range(max_sweeps + 1):
        current = np.asarray(energy(params, state.v, state.h)).reshape(-1)
        if ks_two_sample(current, target).p_value > threshold:
            return sweeps
        if sweeps < max_sweeps:
            state = gibbs_sweep(params, state, rng)
    logger.warning(f"Seeded chains did not pass the KS test within {max_sweeps} sweeps")
    return max_sweeps + 1


def wilson_interval(successes: int, n: int, confidence: float = 0.95) -> Tuple[float, float]:
    if n <= 0:
        raise ValueError(f"Wilson interval needs n >= 1 trials, got {n}")
    if not 0 <= successes <= n:
        raise ValueError(f"successes must lie in [0, {n}], got {successes}")
    z = stats.norm.ppf(0.5 + confidence / 2.0)
    p = successes / n
    denominator = 1.0 + z ** 2 / n
    centre = (p + z ** 2 / (2 * n)) / denominator
    half = z * math.sqrt(p * (1 - p) / n + z ** 2 / (4 * n ** 2)) / denominator
    return max(0.0, centre - half), min(1.0, centre + half)


class SeedAdvantage(BaseModel):
    n_snapshots: int
    mean_steps_a: float
    mean_steps_b: float
    mean_ratio: float
    wins_a: int
    wins_b: int
    ties: int
    p_hat: Optional[float] = None
    ci_low: Optional[float] = None
    ci_high: Optional[float] = None


def seed_advantage(
    params_list: Sequence[RbmParams],
    sampler_a: AbstractSampler,
    sampler_b: AbstractSampler,
    rng: np.random.Generator,
    n_samples: int = 1000,
    max_sweeps: int = 100,
    threshold: float = 0.05,
    burn_in: int = 10_000,
    thin: int = 10,
) -> SeedAdvantage:
    """Compare how many sweeps chains seeded by ``sampler_a`` and ``sampler_b`` need.

    Both samplers see the same child stream per snapshot, so identical samplers tie
    on every snapshot. ``p_hat`` estimates P(steps_a < steps_b) with ties excluded and
    is left unset when every snapshot ties.
    """
    if len(params_list) < 2:
        raise ValueError(f"seed_advantage needs at least 2 parameter snapshots, got {len(params_list)}")

    steps_a: List[int] = []
    steps_b: List[int] = []
    for params in params_list:
        seed = int(rng.integers(0, 2 ** 63))
        reference = reference_samples(params, n_samples, np.random.default_rng([seed, 0]), burn_in, thin)
        for sampler, steps in ((sampler_a, steps_a), (sampler_b, steps_b)):
            seeds = sampler.sample(params, np.random.default_rng([seed, 1]), n_samples=n_samples)
            steps.append(
                steps_to_boltzmann(params, seeds, reference, max_sweeps, np.random.default_rng([seed, 2]), threshold)
            )

    a = np.array(steps_a, dtype=np.float64)
    b = np.array(steps_b, dtype=np.float64)
    mean_a, mean_b = float(a.mean()), float(b.mean())
    if mean_b == 0.0:
        ratio = 1.0 if mean_a == 0.0 else math.inf
    else:
        ratio = mean_a / mean_b

    wins_a = int(np.count_nonzero(a < b))
    wins_b = int(np.count_nonzero(a > b))
    result = SeedAdvantage(
        n_snapshots=len(params_list),
        mean_steps_a=mean_a,
        mean_steps_b=mean_b,
        mean_ratio=ratio,
        wins_a=wins_a,
        wins_b=wins_b,
        ties=len(params_list) - wins_a - wins_b,
    )
    decided = wins_a + wins_b
    if decided == 0:
        logger.warning("All snapshots tied; the Bernoulli estimate is undefined")
        return result
    low, high = wilson_interval(wins_a, decided)
    return result.model_copy(update={"p_hat": wins_a / decided, "ci_low": low, "ci_high": high})


def ks_vs_coupling_report(
    checkpoints: Sequence[Checkpoint],
    sampler: AbstractSampler,
    rng: np.random.Generator,
    n_samples: int = 1000,
    burn_in: int = 10_000,
    thin: int = 10,
) -> pd.DataFrame:
    """KS statistic between sampler draws and reference draws for every checkpoint."""
    rows = []
    for epoch, params in checkpoints:
        drawn = sampler.sample(params, rng, n_samples=n_samples)
        reference = reference_samples(params, n_samples, rng, burn_in, thin)
        result = ks_two_sample(_energies(params, drawn), _energies(params, reference))
        rows.append(
            {
                "epoch": epoch,
                "mean_abs_coupling": params.mean_abs_coupling(),
                "max_abs_coupling": params.max_abs_coupling(),
                "median_coupling": params.median_abs_coupling(),
                "ks_statistic": result.statistic,
                "p_value": result.p_value,
                "reference": reference.metadata["reference"],
            }
        )
    return pd.DataFrame(rows)


def bin_by_coupling(report: pd.DataFrame, column: str = "mean_abs_coupling", n_bins: int = 10) -> pd.DataFrame:
    """Mean KS statistic per equal-width bin of ``column``."""
    if report.empty:
        raise ValueError("Cannot bin an empty report")
    bins = pd.cut(report[column], bins=min(n_bins, len(report)))
    grouped = report.groupby(bins, observed=True)
    binned = grouped.agg(
        mean_abs_coupling=("mean_abs_coupling", "mean"),
        max_abs_coupling=("max_abs_coupling", "mean"),
        mean_ks_statistic=("ks_statistic", "mean"),
        count=("ks_statistic", "size"),
    )
    binned.index = binned.index.astype(str)
    return binned.reset_index(names=f"{column}_bin")


def steps_curve(
    checkpoints: Sequence[Checkpoint],
    seed_sampler: AbstractSampler,
    rng: np.random.Generator,
    n_trials: int = 5,
    n_samples: int = 1000,
    max_sweeps: int = 100,
    threshold: float = 0.05,
    burn_in: int = 10_000,
    thin: int = 10,
) -> pd.DataFrame:
    """(epoch, mean_steps, stderr, median_coupling) per checkpoint over ``n_trials`` seedings."""
    if n_trials < 1:
        raise ValueError(f"n_trials must be >= 1, got {n_trials}")
    rows = []
    for epoch, params in checkpoints:
        reference = reference_samples(params, n_samples, rng, burn_in, thin)
        counts = np.array(
            [
                steps_to_boltzmann(
                    params, seed_sampler.sample(params, rng, n_samples=n_samples), reference, max_sweeps, rng, threshold
                )
                for _ in range(n_trials)
            ],
            dtype=np.float64,
        )
        stderr = float(counts.std(ddof=1) / math.sqrt(n_trials)) if n_trials > 1 else 0.0
        rows.append(
            {
                "epoch": epoch,
                "mean_steps": float(counts.mean()),
                "stderr": stderr,
                "median_coupling": params.median_abs_coupling(),
            }
        )
        logger.info(f"Epoch {epoch}: {counts.mean():.2f} sweeps to Boltzmann")
    return pd.DataFrame(rows, columns=["epoch", "mean_steps", "stderr", "median_coupling"])


def trend_correlation(curve: pd.DataFrame, column: str = "epoch") -> float:
    """Spearman correlation between ``column`` and mean steps."""
    if len(curve) < 2:
        raise ValueError("Trend correlation needs at least two checkpoints")
    rho, _ = stats.spearmanr(curve[column], curve["mean_steps"])
    return float(rho)


def beta_report(estimates: Sequence[Tuple[int, Optional[TempEstimate]]], window: int = 50) -> pd.DataFrame:
    """Per-step β estimates with a trailing rolling mean; failed steps stay empty."""
    frame = pd.DataFrame(
        {
            "step": [step for step, _ in estimates],
            "beta_eff": [estimate.beta_eff if estimate else np.nan for _, estimate in estimates],
            "n_bins_used": [estimate.n_bins_used if estimate else 0 for _, estimate in estimates],
        }
    )
    frame["beta_rolling"] = frame["beta_eff"].rolling(window, min_periods=1).mean()
    return frame
