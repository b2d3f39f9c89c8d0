"""Request/response bodies for the HTTP service.

All paths are server-local: the service owns its data root the same way
the on-robot deployment owns its flash filesystem.
"""

from __future__ import annotations

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class ForceDatasetRequest(BaseModel):
    out_dir: str
    n: int = 4000
    seed: int = 0
    sim: dict = Field(default_factory=dict)  # SimConfig field overrides


class TerrainDatasetRequest(BaseModel):
    out_dir: str
    clips_per_class: int = 47
    seed: int = 0


class DatasetResponse(BaseModel):
    out_dir: str
    kind: str
    count: int


class ForceTrainRequest(BaseModel):
    dataset_dir: str
    out_model: str
    hidden: list[int] = [16, 128]
    epochs: int = 200
    batch_size: int = 32
    learning_rate: float = 1e-3
    dropout: float = 0.0
    l2: float = 0.0
    seed: int = 0
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1)


class ForceTrainResponse(BaseModel):
    model_path: str
    param_count: int
    best_epoch: int
    best_val_mae: float
    test_per_axis_mae: list[float] | None


class TerrainTrainRequest(BaseModel):
    dataset_dir: str
    out_model: str
    hidden: list[int] = [16, 16]
    epochs: int = 200
    batch_size: int = 32
    learning_rate: float = 1e-3
    k: int = 5
    seed: int = 0


class TerrainTrainResponse(BaseModel):
    model_path: str
    param_count: int
    cv_mean: float
    cv_std: float
    fold_accuracies: list[float]


class GridForceRequest(BaseModel):
    dataset_dir: str
    out_dir: str
    hidden_options: list[list[int]]
    learning_rates: list[float] = [1e-3]
    dropouts: list[float] = [0.0]
    epochs: int = 60
    batch_size: int = 32
    seed: int = 0
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1)


class GridTrialOut(BaseModel):
    structure: str
    param_count: int
    val_mae: float
    learning_rate: float
    dropout: float
    inference_us: float


class GridForceResponse(BaseModel):
    trials: list[GridTrialOut]  # ranked, best first
    table: str
    best_model_path: str


class EvalForceRequest(BaseModel):
    model: str
    dataset_dir: str
    out_dir: str | None = None


class EvalForceResponse(BaseModel):
    count: int
    per_axis_mae: list[float]
    magnitude_mae_N: float
    magnitude_std_N: float
    metrics_csv: str | None
    histogram_csv: str | None


class EvalTerrainRequest(BaseModel):
    model: str
    dataset_dir: str
    out_dir: str | None = None


class EvalTerrainResponse(BaseModel):
    count: int
    accuracy: float
    class_names: list[str]
    confusion: list[list[int]]  # rows = true, cols = predicted
    confusion_csv: str | None


class InferForceRequest(BaseModel):
    model: str
    image: str


class InferForceResponse(BaseModel):
    newtons: list[float]
    normalized: list[float]


class InferTerrainRequest(BaseModel):
    model: str
    wav: str


class InferTerrainResponse(BaseModel):
    label: str
    probabilities: dict[str, float]


class LatencyOut(BaseModel):
    n_passes: int
    mean_us: float
    p50_us: float
    p95_us: float
    flops: int


class AuditRequest(BaseModel):
    model: str
    ram_ceiling: int = 183_000
    bench_passes: int = 0  # 0 skips the latency measurement


class AuditResponse(BaseModel):
    param_count: int
    weight_bytes: int
    activation_bytes: int
    input_bytes: int
    peak_ram_bytes: int
    ram_ceiling: int
    fits_ram: bool
    latency: LatencyOut | None


class BenchRequest(BaseModel):
    model: str
    n_passes: int = 10_000
    out_csv: str | None = None


class BenchResponse(BaseModel):
    latency: LatencyOut
    csv_path: str | None
