"""Model files, the edge-budget auditor and the latency bench.

File format: one JSON header line (sorted keys, newline-terminated)
followed by a raw little-endian float32 blob.  Blob layout is fixed: per
dense layer weights (row-major in x out) then bias, for every layer in
order, then per batch-norm layer gamma, beta, moving mean, moving
variance.  The header carries the blob byte length and its CRC32, so a
load fails loudly on truncation or corruption.
"""

from __future__ import annotations

import json
import time
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ChecksumError, TruncatedBlobError, ValidationError, VersionError
from .nncore import BatchNormParams, DenseParams, MLPParams, MLPSpec, param_count

FORMAT_VERSION = 1
DEFAULT_RAM_CEILING = 183_000  # bytes of MCU RAM available to the model
FLOAT_BYTES = 4


@dataclass
class ModelManifest:
    task: str  # "force" or "terrain"
    spec: MLPSpec
    preprocessing: dict
    scaler_scales: tuple | None = None  # force task
    class_names: tuple | None = None  # terrain task
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        if self.task not in ("force", "terrain"):
            raise ValidationError(f"unknown task {self.task!r}")
        if self.task == "force" and self.scaler_scales is None:
            raise ValidationError("force manifest needs scaler_scales")
        if self.task == "terrain" and self.class_names is None:
            raise ValidationError("terrain manifest needs class_names")


def _spec_to_dict(spec: MLPSpec) -> dict:
    return {
        "input_dim": spec.input_dim,
        "hidden": list(spec.hidden),
        "output_dim": spec.output_dim,
        "output_activation": spec.output_activation,
        "batch_norm_hidden": spec.batch_norm_hidden,
        "dropout_rate": spec.dropout_rate,
        "l2_lambda": spec.l2_lambda,
    }


def _spec_from_dict(d: dict) -> MLPSpec:
    return MLPSpec(input_dim=d["input_dim"], hidden=tuple(d["hidden"]),
                   output_dim=d["output_dim"], output_activation=d["output_activation"],
                   batch_norm_hidden=d["batch_norm_hidden"],
                   dropout_rate=d["dropout_rate"], l2_lambda=d["l2_lambda"])


def _blob_arrays(params: MLPParams) -> list[np.ndarray]:
    arrays = []
    for layer in params.dense:
        arrays.append(layer.weights)
        arrays.append(layer.bias)
    for norm in params.norms:
        arrays.append(norm.gamma)
        arrays.append(norm.beta)
        arrays.append(norm.moving_mean)
        arrays.append(norm.moving_var)
    return arrays


def save(params: MLPParams, manifest: ModelManifest, path):
    """Write header + weight blob; byte-stable for identical inputs."""
    if params.spec != manifest.spec:
        raise ValidationError("manifest spec does not match parameter spec")
    blob = b"".join(
        np.ascontiguousarray(a, dtype="<f4").tobytes() for a in _blob_arrays(params)
    )
    expected = param_count(manifest.spec) * FLOAT_BYTES
    if len(blob) != expected:
        raise ValidationError(f"blob is {len(blob)} bytes, spec demands {expected}")
    header = {
        "format_version": manifest.format_version,
        "task": manifest.task,
        "spec": _spec_to_dict(manifest.spec),
        "preprocessing": manifest.preprocessing,
        "scaler_scales": list(manifest.scaler_scales) if manifest.scaler_scales else None,
        "class_names": list(manifest.class_names) if manifest.class_names else None,
        "blob_bytes": len(blob),
        "crc32": zlib.crc32(blob),
    }
    with open(path, "wb") as f:
        f.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        f.write(blob)


def load(path) -> tuple[MLPParams, ModelManifest]:
    """Inverse of save; checksum, version and length failures raise
    distinct errors."""
    raw = Path(path).read_bytes()
    newline = raw.find(b"\n")
    if newline < 0:
        raise TruncatedBlobError(f"{path}: no header line")
    try:
        header = json.loads(raw[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise TruncatedBlobError(f"{path}: unreadable header: {exc}") from exc
    if header.get("format_version") != FORMAT_VERSION:
        raise VersionError(
            f"{path}: format version {header.get('format_version')}, "
            f"this toolkit reads {FORMAT_VERSION}"
        )
    blob = raw[newline + 1:]
    if len(blob) != header["blob_bytes"]:
        raise TruncatedBlobError(
            f"{path}: blob is {len(blob)} bytes, header says {header['blob_bytes']}"
        )
    if zlib.crc32(blob) != header["crc32"]:
        raise ChecksumError(f"{path}: blob checksum mismatch")

    spec = _spec_from_dict(header["spec"])
    flat = np.frombuffer(blob, dtype="<f4")
    dims = spec.layer_dims()
    offset = 0

    def take(n, shape):
        nonlocal offset
        out = flat[offset:offset + n].reshape(shape).copy()
        offset += n
        return out

    dense = []
    for i in range(len(dims) - 1):
        w = take(dims[i] * dims[i + 1], (dims[i], dims[i + 1]))
        b = take(dims[i + 1], (dims[i + 1],))
        dense.append(DenseParams(weights=w, bias=b))
    norms = []
    if spec.batch_norm_hidden:
        for width in spec.hidden:
            norms.append(BatchNormParams(
                gamma=take(width, (width,)), beta=take(width, (width,)),
                moving_mean=take(width, (width,)), moving_var=take(width, (width,)),
            ))
    params = MLPParams(spec=spec, dense=dense, norms=norms)
    params.validate()
    manifest = ModelManifest(
        task=header["task"], spec=spec, preprocessing=header["preprocessing"],
        scaler_scales=tuple(header["scaler_scales"]) if header["scaler_scales"] else None,
        class_names=tuple(header["class_names"]) if header["class_names"] else None,
        format_version=header["format_version"],
    )
    return params, manifest


# ---------------------------------------------------------------------------
# the budget auditor

@dataclass
class LatencyStats:
    n_passes: int
    mean_us: float
    p50_us: float
    p95_us: float
    flops: int


@dataclass
class BudgetReport:
    param_count: int
    weight_bytes: int
    activation_bytes: int  # largest consecutive layer pair, double-buffered
    input_bytes: int
    peak_ram_bytes: int
    ram_ceiling: int
    fits_ram: bool
    latency: LatencyStats | None = None


def flop_count(spec: MLPSpec) -> int:
    """Multiply-accumulate count of one forward pass: 2 * sum(in*out)."""
    dims = spec.layer_dims()
    return int(2 * sum(dims[i] * dims[i + 1] for i in range(len(dims) - 1)))


def audit(manifest: ModelManifest, ram_ceiling: int = DEFAULT_RAM_CEILING,
          latency: LatencyStats | None = None) -> BudgetReport:
    """Deterministic RAM accounting for a layer-streaming executor:
    weights + the largest consecutive activation pair + the input buffer."""
    spec = manifest.spec
    count = param_count(spec)
    dims = spec.layer_dims()
    activation = max(dims[i] + dims[i + 1] for i in range(len(dims) - 1)) * FLOAT_BYTES
    input_bytes = dims[0] * FLOAT_BYTES
    weight_bytes = count * FLOAT_BYTES
    peak = weight_bytes + activation + input_bytes
    return BudgetReport(
        param_count=count,
        weight_bytes=weight_bytes,
        activation_bytes=activation,
        input_bytes=input_bytes,
        peak_ram_bytes=peak,
        ram_ceiling=int(ram_ceiling),
        fits_ram=peak <= ram_ceiling,
        latency=latency,
    )


# ---------------------------------------------------------------------------
# the latency bench

def bench(params: MLPParams, make_input=None, n_passes: int = 10_000,
          warmup: int = 10) -> tuple[LatencyStats, np.ndarray]:
    """Time n_passes single-input forward passes, excluding warm-up.

    Wall-clock numbers are machine-dependent and are reported, never
    asserted against any target.  Returns (stats, per-pass micros)."""
    if n_passes < 1:
        raise ValidationError("n_passes must be >= 1")
    from .nncore import forward  # local import keeps module load light

    if make_input is None:
        probe = np.zeros((1, params.spec.input_dim), dtype=np.float32)
        make_input = lambda i: probe
    for i in range(warmup):
        forward(params, make_input(i), mode="infer")
    micros = np.empty(n_passes, dtype=np.float64)
    for i in range(n_passes):
        x = make_input(i)
        t0 = time.perf_counter()
        forward(params, x, mode="infer")
        micros[i] = (time.perf_counter() - t0) * 1e6
    stats = LatencyStats(
        n_passes=n_passes,
        mean_us=float(np.mean(micros)),
        p50_us=float(np.percentile(micros, 50)),
        p95_us=float(np.percentile(micros, 95)),
        flops=flop_count(params.spec),
    )
    return stats, micros


def write_bench_csv(micros: np.ndarray, path):
    with open(path, "w", newline="") as f:
        f.write("pass,micros\n")
        for i, us in enumerate(micros):
            f.write(f"{i},{us:.3f}\n")
