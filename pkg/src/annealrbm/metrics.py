"""Per-epoch metrics shared by RBM training and the classical baselines.

On disk a run is a long-format CSV, one row per (epoch, split)::

    run,algorithm,epoch,split,accuracy,mean_abs_coupling,median_coupling,wall_time
"""
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Union

import pandas as pd
from pydantic import BaseModel, Field

logger = logging.getLogger(__name__)

METRIC_COLUMNS = [
    "run",
    "algorithm",
    "epoch",
    "split",
    "accuracy",
    "mean_abs_coupling",
    "median_coupling",
    "wall_time",
]


class EpochMetrics(BaseModel):
    epoch: int = Field(ge=0)
    algorithm: str
    train_accuracy: float = Field(ge=0.0, le=1.0)
    test_accuracy: Optional[float] = Field(None, ge=0.0, le=1.0)
    mean_abs_coupling: Optional[float] = None
    median_quadratic_coupling: Optional[float] = None
    wall_time: float = Field(0.0, ge=0.0)
    beta_eff: Optional[float] = None


def metrics_frame(run: str, metrics: Iterable[EpochMetrics]) -> pd.DataFrame:
    rows = []
    for record in metrics:
        for split, value in (("train", record.train_accuracy), ("test", record.test_accuracy)):
            if value is None:
                continue
            rows.append(
                {
                    "run": run,
                    "algorithm": record.algorithm,
                    "epoch": record.epoch,
                    "split": split,
                    "accuracy": value,
                    "mean_abs_coupling": record.mean_abs_coupling,
                    "median_coupling": record.median_quadratic_coupling,
                    "wall_time": record.wall_time,
                }
            )
    return pd.DataFrame(rows, columns=METRIC_COLUMNS)


def write_metrics_csv(path: Union[str, Path], run: str, metrics: Iterable[EpochMetrics]) -> pd.DataFrame:
    frame = metrics_frame(run, metrics)
    frame.to_csv(path, index=False, float_format="%.10g")
    logger.info(f"Wrote {len(frame)} metric rows for run '{run}' to {path}")
    return frame


def read_metrics_csv(path: Union[str, Path]) -> pd.DataFrame:
    frame = pd.read_csv(path)
    missing = [column for column in METRIC_COLUMNS if column not in frame.columns]
    if missing:
        raise ValueError(f"{path} is not a metrics file; missing columns {missing}")
    return frame


def compare_runs(runs: Dict[str, pd.DataFrame], reference: str) -> pd.DataFrame:
    """Join runs on (epoch, split) and add ``ratio_<run>`` = accuracy / reference accuracy.

    Every run must cover exactly the reference run's epochs.
    """
    if len(runs) < 2:
        raise ValueError(f"compare needs at least two runs, got {len(runs)}")
    if reference not in runs:
        raise ValueError(f"Reference run '{reference}' is not among {sorted(runs)}")

    reference_epochs = set(runs[reference]["epoch"].unique())
    joined: Optional[pd.DataFrame] = None
    for name, frame in runs.items():
        epochs = set(frame["epoch"].unique())
        if epochs != reference_epochs:
            absent = sorted(reference_epochs - epochs)
            extra = sorted(epochs - reference_epochs)
            if absent and name != reference:
                raise ValueError(f"Run '{name}' is missing epoch {absent[0]} present in '{reference}'")
            raise ValueError(f"Reference run '{reference}' is missing epoch {extra[0]} present in '{name}'")
        column = frame[["epoch", "split", "accuracy"]].rename(columns={"accuracy": name})
        joined = column if joined is None else joined.merge(column, on=["epoch", "split"], how="outer")

    joined = joined.sort_values(["epoch", "split"]).reset_index(drop=True)
    for name in runs:
        joined[f"ratio_{name}"] = joined[name] / joined[reference]
    return joined


def unique_run_names(names: List[str]) -> List[str]:
    seen: Dict[str, int] = {}
    unique = []
    for name in names:
        seen[name] = seen.get(name, 0) + 1
        unique.append(name if seen[name] == 1 else f"{name}#{seen[name]}")
    return unique
