import configparser
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, TypeVar, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

ModelT = TypeVar("ModelT", bound=BaseModel)

SamplerKind = Literal["gibbs", "simulated_annealing", "exact", "chimera"]
Algorithm = Literal["cd", "sampler_generative", "discriminative", "hybrid", "annealed_hybrid"]
BetaCadence = Literal["off", "once", "every_step"]


def _split_csv(value: Any) -> Any:
    if isinstance(value, str):
        parts = [part.strip() for part in value.split(",")]
        return [part for part in parts if part]
    return value


class SamplerConfig(BaseModel):
    kind: SamplerKind = "gibbs"
    n_samples: int = Field(100, ge=1)
    gibbs_postprocess_sweeps: int = Field(2, ge=0)
    burn_in_sweeps: int = Field(100, ge=0)
    beta_start: float = 0.1
    beta_end: float = 1.0
    n_sweeps: int = Field(100, ge=1)
    rng_seed: int = Field(0, ge=0)

    @model_validator(mode="after")
    def _check_schedule(self) -> "SamplerConfig":
        if not self.beta_start > 0:
            raise ValueError(f"beta_start must be positive, got {self.beta_start}")
        if self.beta_end < self.beta_start:
            raise ValueError(f"beta_end ({self.beta_end}) must be >= beta_start ({self.beta_start})")
        return self

    @property
    def sa_schedule(self) -> Tuple[float, float, int]:
        return self.beta_start, self.beta_end, self.n_sweeps


class ChimeraConfig(BaseModel):
    m: Optional[int] = Field(None, ge=1)
    dead_qubits: List[int] = Field(default_factory=list)
    chain_strength: Optional[float] = Field(None, gt=0)
    chain_strength_factor: float = Field(1.5, gt=0)
    auto_scale: bool = True
    j_range: Tuple[float, float] = (-2.0, 2.0)
    h_range: Tuple[float, float] = (-1.0, 1.0)

    @field_validator("dead_qubits", "j_range", "h_range", mode="before")
    @classmethod
    def _split_lists(cls, value: Any) -> Any:
        return _split_csv(value)

    @model_validator(mode="after")
    def _check_ranges(self) -> "ChimeraConfig":
        for name in ("j_range", "h_range"):
            low, high = getattr(self, name)
            if not low < 0 < high:
                raise ValueError(f"{name} must straddle zero, got ({low}, {high})")
        return self


class TrainConfig(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    algorithm: Algorithm = "discriminative"
    lambda_: float = Field(0.01, alias="lambda", ge=0)
    switch_epoch: int = Field(0, ge=0)
    learning_rate: float = Field(0.05, ge=0)
    batch_size: int = Field(128, ge=1)
    n_epochs: int = Field(100, ge=0)
    cd_k: int = Field(1, ge=1)
    sampler: SamplerConfig = Field(default_factory=SamplerConfig)
    chimera: ChimeraConfig = Field(default_factory=ChimeraConfig)
    weight_clip: Optional[float] = Field(None, gt=0)
    l2: float = Field(0.0, ge=0)
    beta_estimation: BetaCadence = "once"
    rng_seed: int = 0
    checkpoint_every: int = Field(1, ge=1)

    @model_validator(mode="after")
    def _check_switch(self) -> "TrainConfig":
        if self.switch_epoch > self.n_epochs:
            raise ValueError(f"switch_epoch ({self.switch_epoch}) must be <= n_epochs ({self.n_epochs})")
        return self


class ThermometryConfig(BaseModel):
    beta_0: float = Field(3.0, gt=0)
    n_samples: int = Field(1000, ge=50)
    min_bin_count: int = Field(5, ge=1)
    ks_threshold: float = Field(0.05, gt=0, lt=1)
    max_sweeps: int = Field(100, ge=0)
    reference_size: int = Field(1000, ge=1)
    reference_burn_in: int = Field(10_000, ge=0)
    reference_thin: int = Field(10, ge=1)
    rolling_window: int = Field(50, ge=1)


class DatasetConfig(BaseModel):
    source: Literal["synth", "dir"] = "synth"
    n: int = Field(2000, ge=2)
    side: int = Field(32, ge=16)
    n_feature_bits: int = Field(64, ge=8)
    fit_fraction: float = Field(0.5, gt=0, lt=1)
    test_fraction: float = Field(0.5, gt=0, lt=1)
    crop: Optional[int] = Field(None, ge=1)
    path: Optional[str] = None
    manifest: Optional[str] = None
    rng_seed: int = 0

    @field_validator("n_feature_bits")
    @classmethod
    def _whole_bytes(cls, value: int) -> int:
        if value % 8 != 0:
            raise ValueError(f"n_feature_bits must be a multiple of 8 (whole PCA components), got {value}")
        return value


class LogRegConfig(BaseModel):
    learning_rate: float = Field(0.1, ge=0)
    batch_size: int = Field(128, ge=1)
    n_epochs: int = Field(100, ge=0)
    l2: float = Field(0.0, ge=0)
    rng_seed: int = 0


class GbtConfig(BaseModel):
    n_trees: int = Field(200, ge=0)
    max_depth: int = Field(3, ge=1)
    learning_rate: float = Field(0.1, ge=0)
    rng_seed: int = 0


class ExperimentConfig(BaseModel):
    dataset: DatasetConfig = Field(default_factory=DatasetConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    thermometry: ThermometryConfig = Field(default_factory=ThermometryConfig)
    logreg: LogRegConfig = Field(default_factory=LogRegConfig)
    gbt: GbtConfig = Field(default_factory=GbtConfig)


_default_config = ExperimentConfig()


def get_default_config() -> ExperimentConfig:
    return _default_config.model_copy(deep=True)


def with_overrides(model: ModelT, updates: Dict[str, Any]) -> ModelT:
    """Return a re-validated copy of ``model`` with non-None ``updates`` applied."""
    data = model.model_dump(by_alias=True)
    data.update({key: value for key, value in updates.items() if value is not None})
    return type(model).model_validate(data)


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """Read a sectioned ``key = value`` experiment file.

    ``[sampler]`` and ``[chimera]`` sections feed the nested fields of ``[train]``.
    """
    parser = configparser.ConfigParser()
    with open(path, "r", encoding="utf-8") as handle:
        parser.read_file(handle)

    sections: Dict[str, Dict[str, Any]] = {name: dict(parser.items(name)) for name in parser.sections()}
    unknown = set(sections) - {"dataset", "train", "sampler", "chimera", "thermometry", "logreg", "gbt"}
    if unknown:
        raise ValueError(f"Unknown config sections: {sorted(unknown)}")

    train = sections.setdefault("train", {})
    if "sampler" in sections:
        train["sampler"] = sections.pop("sampler")
    if "chimera" in sections:
        train["chimera"] = sections.pop("chimera")
    return ExperimentConfig.model_validate(sections)
