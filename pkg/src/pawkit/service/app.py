"""FastAPI application wiring the toolkit together.

Every state-producing endpoint writes a run record (command, seed, config
hash, toolkit version; no timestamps) beside its output, so any artifact
can be traced back to the exact request that produced it and reruns are
byte-identical.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np
from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .. import __version__
from ..dsp import MfccConfig, mfcc, read_wav, truncate_to_impact
from ..errors import PawkitError, ValidationError
from ..imaging import MODEL_INPUT_HEIGHT, MODEL_INPUT_WIDTH, preprocess_camera_frame, read_pgm
from ..modelstore import (
    ModelManifest,
    audit,
    bench,
    load,
    param_count,
    save,
    write_bench_csv,
)
from ..nncore import MLPSpec, forward
from ..pawsim import (
    SimConfig,
    generate_force_dataset,
    generate_terrain_dataset,
    read_force_dataset,
    read_terrain_dataset,
    write_force_dataset,
    write_terrain_dataset,
)
from ..pipeline import (
    ForceScaler,
    SplitSpec,
    TrainConfig,
    evaluate_force,
    evaluate_terrain,
    force_features,
    format_trials_table,
    grid_search_force,
    make_grid,
    split_indices,
    stratified_kfold,
    terrain_features,
    train_force,
    train_terrain,
    write_confusion_csv,
    write_histogram_csv,
    write_history_csv,
    write_metrics_csv,
)
from . import schemas

FORCE_PREPROCESSING = {
    "kind": "camera_frame",
    "resize": [MODEL_INPUT_WIDTH, MODEL_INPUT_HEIGHT],
    "scale": "1/255",
}


def _config_hash(req: BaseModel) -> str:
    payload = json.dumps(req.model_dump(), sort_keys=True).encode("utf-8")
    return hashlib.sha256(payload).hexdigest()


def _write_run_record(path: Path, command: str, seed: int, req: BaseModel):
    record = {
        "command": command,
        "config_sha256": _config_hash(req),
        "seed": seed,
        "toolkit_version": __version__,
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(record, sort_keys=True, indent=2) + "\n")


def _read_dataset_manifest(dataset_dir) -> dict | None:
    path = Path(dataset_dir) / "manifest.json"
    if not path.exists():
        return None
    return json.loads(path.read_text())


def _scaler_for_dataset(dataset_dir) -> ForceScaler:
    """Per-axis maxima from the generating config when available."""
    manifest = _read_dataset_manifest(dataset_dir)
    if manifest is None or "config" not in manifest:
        return ForceScaler()
    cfg = manifest["config"]
    scales = tuple(max(abs(lo), abs(hi))
                   for lo, hi in zip(cfg["force_min"], cfg["force_max"]))
    return ForceScaler(scales=scales)


def _sim_config(seed: int, overrides: dict) -> SimConfig:
    fields = {k: tuple(v) if isinstance(v, list) else v for k, v in overrides.items()}
    fields["seed"] = seed
    try:
        return SimConfig(**fields)
    except TypeError as exc:
        raise ValidationError(f"unknown sim config field: {exc}") from exc


def _latency_out(stats) -> schemas.LatencyOut:
    return schemas.LatencyOut(n_passes=stats.n_passes, mean_us=stats.mean_us,
                              p50_us=stats.p50_us, p95_us=stats.p95_us, flops=stats.flops)


def _load_model(path: str, expected_task: str):
    params, manifest = load(path)
    if manifest.task != expected_task:
        raise ValidationError(
            f"model {path} is a {manifest.task} model, endpoint needs {expected_task}"
        )
    return params, manifest


def _mfcc_config_from(manifest: ModelManifest) -> tuple[MfccConfig, float]:
    pre = manifest.preprocessing
    cfg = MfccConfig(**pre["mfcc"]) if "mfcc" in pre else MfccConfig()
    return cfg, float(pre.get("window_ms", 62.5))


def create_app() -> FastAPI:
    app = FastAPI(title="pawkit service", version=__version__)

    @app.exception_handler(PawkitError)
    async def _domain_error(request, exc: PawkitError):
        return JSONResponse(status_code=400,
                            content={"detail": f"{type(exc).__name__}: {exc}"})

    @app.exception_handler(FileNotFoundError)
    async def _missing_file(request, exc: FileNotFoundError):
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/datasets/force", response_model=schemas.DatasetResponse)
    def gen_force(req: schemas.ForceDatasetRequest):
        config = _sim_config(req.seed, req.sim)
        samples = generate_force_dataset(req.n, config)
        out_dir = Path(req.out_dir)
        write_force_dataset(samples, out_dir, config)
        _write_run_record(out_dir / "run_manifest.json", "gen-force", req.seed, req)
        return schemas.DatasetResponse(out_dir=str(out_dir), kind="force", count=len(samples))

    @app.post("/datasets/terrain", response_model=schemas.DatasetResponse)
    def gen_terrain(req: schemas.TerrainDatasetRequest):
        config = SimConfig(seed=req.seed)
        samples = generate_terrain_dataset(req.clips_per_class, req.seed, config)
        out_dir = Path(req.out_dir)
        write_terrain_dataset(samples, out_dir, config, req.seed, req.clips_per_class)
        _write_run_record(out_dir / "run_manifest.json", "gen-audio", req.seed, req)
        return schemas.DatasetResponse(out_dir=str(out_dir), kind="terrain", count=len(samples))

    @app.post("/train/force", response_model=schemas.ForceTrainResponse)
    def do_train_force(req: schemas.ForceTrainRequest):
        samples = read_force_dataset(req.dataset_dir)
        x, y = force_features(samples)
        tr, va, te = split_indices(len(samples),
                                   SplitSpec(fractions=tuple(req.fractions), seed=req.seed))
        if va.size == 0:
            raise ValidationError("validation split is empty; raise the val fraction")
        spec = MLPSpec(input_dim=x.shape[1], hidden=tuple(req.hidden), output_dim=3,
                       dropout_rate=req.dropout, l2_lambda=req.l2)
        scaler = _scaler_for_dataset(req.dataset_dir)
        config = TrainConfig(epochs=req.epochs, batch_size=req.batch_size,
                             learning_rate=req.learning_rate, seed=req.seed)
        result = train_force(spec, x[tr], y[tr], x[va], y[va], config=config, scaler=scaler)

        test_mae = None
        if te.size:
            metrics, _ = evaluate_force(result.params, scaler, x[te], y[te])
            test_mae = [float(v) for v in metrics.per_axis_mae]

        out_model = Path(req.out_model)
        out_model.parent.mkdir(parents=True, exist_ok=True)
        manifest = ModelManifest(task="force", spec=spec,
                                 preprocessing=FORCE_PREPROCESSING,
                                 scaler_scales=scaler.scales)
        save(result.params, manifest, out_model)
        write_history_csv(result.history, Path(f"{out_model}.history.csv"),
                          value_names=("train_mae", "val_mae"))
        _write_run_record(Path(f"{out_model}.run.json"), "train-force", req.seed, req)
        return schemas.ForceTrainResponse(
            model_path=str(out_model), param_count=param_count(spec),
            best_epoch=result.best_epoch, best_val_mae=float(result.best_val_mae),
            test_per_axis_mae=test_mae,
        )

    @app.post("/train/terrain", response_model=schemas.TerrainTrainResponse)
    def do_train_terrain(req: schemas.TerrainTrainRequest):
        samples = read_terrain_dataset(req.dataset_dir)
        dataset_manifest = _read_dataset_manifest(req.dataset_dir)
        if dataset_manifest and "classes" in dataset_manifest:
            classes = list(dataset_manifest["classes"])
        else:
            classes = sorted({s.label for s in samples})
        mfcc_config = MfccConfig()
        x, y = terrain_features(samples, classes, mfcc_config)
        folds = stratified_kfold(y, k=req.k, seed=req.seed)
        spec = MLPSpec(input_dim=x.shape[1], hidden=tuple(req.hidden),
                       output_dim=len(classes), output_activation="softmax")
        config = TrainConfig(epochs=req.epochs, batch_size=req.batch_size,
                             learning_rate=req.learning_rate, seed=req.seed)
        result = train_terrain(spec, x, y, folds, config=config)

        out_model = Path(req.out_model)
        out_model.parent.mkdir(parents=True, exist_ok=True)
        manifest = ModelManifest(
            task="terrain", spec=spec,
            preprocessing={"kind": "impact_mfcc", "window_ms": 62.5,
                           "mfcc": asdict(mfcc_config)},
            class_names=tuple(classes),
        )
        save(result.final_params, manifest, out_model)
        _write_run_record(Path(f"{out_model}.run.json"), "train-terrain", req.seed, req)
        return schemas.TerrainTrainResponse(
            model_path=str(out_model), param_count=param_count(spec),
            cv_mean=result.cv_mean, cv_std=result.cv_std,
            fold_accuracies=result.fold_accuracies,
        )

    @app.post("/grid/force", response_model=schemas.GridForceResponse)
    def do_grid_force(req: schemas.GridForceRequest):
        samples = read_force_dataset(req.dataset_dir)
        x, y = force_features(samples)
        tr, va, _ = split_indices(len(samples),
                                  SplitSpec(fractions=tuple(req.fractions), seed=req.seed))
        if va.size == 0:
            raise ValidationError("validation split is empty; raise the val fraction")
        trials = make_grid([tuple(h) for h in req.hidden_options],
                           tuple(req.learning_rates), tuple(req.dropouts))
        scaler = _scaler_for_dataset(req.dataset_dir)
        config = TrainConfig(epochs=req.epochs, batch_size=req.batch_size, seed=req.seed)
        ranked = grid_search_force(trials, x[tr], y[tr], x[va], y[va],
                                   config=config, scaler=scaler, input_dim=x.shape[1])

        out_dir = Path(req.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        table = format_trials_table(ranked)
        (out_dir / "trials.txt").write_text(table)
        best = ranked[0]
        best_path = out_dir / "best_model.paw"
        manifest = ModelManifest(task="force", spec=best.spec,
                                 preprocessing=FORCE_PREPROCESSING,
                                 scaler_scales=scaler.scales)
        save(best.result.params, manifest, best_path)
        _write_run_record(out_dir / "run_manifest.json", "grid-force", req.seed, req)
        return schemas.GridForceResponse(
            trials=[schemas.GridTrialOut(
                structure="-".join(str(d) for d in t.spec.layer_dims()),
                param_count=t.param_count, val_mae=float(t.best_val_mae),
                learning_rate=t.learning_rate, dropout=t.dropout_rate,
                inference_us=t.inference_us,
            ) for t in ranked],
            table=table, best_model_path=str(best_path),
        )

    @app.post("/eval/force", response_model=schemas.EvalForceResponse)
    def do_eval_force(req: schemas.EvalForceRequest):
        params, manifest = _load_model(req.model, "force")
        samples = read_force_dataset(req.dataset_dir)
        x, y = force_features(samples)
        scaler = ForceScaler(scales=manifest.scaler_scales)
        metrics, histograms = evaluate_force(params, scaler, x, y)
        metrics_csv = histogram_csv = None
        if req.out_dir:
            out_dir = Path(req.out_dir)
            out_dir.mkdir(parents=True, exist_ok=True)
            write_metrics_csv(metrics, out_dir / "metrics.csv")
            write_histogram_csv(histograms, out_dir / "error_histograms.csv")
            _write_run_record(out_dir / "run_manifest.json", "eval-force", 0, req)
            metrics_csv = str(out_dir / "metrics.csv")
            histogram_csv = str(out_dir / "error_histograms.csv")
        return schemas.EvalForceResponse(
            count=len(samples),
            per_axis_mae=[float(v) for v in metrics.per_axis_mae],
            magnitude_mae_N=metrics.magnitude_mae_N,
            magnitude_std_N=metrics.magnitude_std_N,
            metrics_csv=metrics_csv, histogram_csv=histogram_csv,
        )

    @app.post("/eval/terrain", response_model=schemas.EvalTerrainResponse)
    def do_eval_terrain(req: schemas.EvalTerrainRequest):
        params, manifest = _load_model(req.model, "terrain")
        samples = read_terrain_dataset(req.dataset_dir)
        mfcc_config, window_ms = _mfcc_config_from(manifest)
        x, y = terrain_features(samples, manifest.class_names, mfcc_config)
        accuracy, cm = evaluate_terrain(params, x, y)
        confusion_csv = None
        if req.out_dir:
            out_dir = Path(req.out_dir)
            out_dir.mkdir(parents=True, exist_ok=True)
            write_confusion_csv(cm, manifest.class_names, out_dir / "confusion.csv")
            _write_run_record(out_dir / "run_manifest.json", "eval-terrain", 0, req)
            confusion_csv = str(out_dir / "confusion.csv")
        return schemas.EvalTerrainResponse(
            count=len(samples), accuracy=accuracy,
            class_names=list(manifest.class_names),
            confusion=cm.counts.tolist(), confusion_csv=confusion_csv,
        )

    @app.post("/infer/force", response_model=schemas.InferForceResponse)
    def do_infer_force(req: schemas.InferForceRequest):
        params, manifest = _load_model(req.model, "force")
        row = preprocess_camera_frame(read_pgm(req.image))
        normalized = forward(params, row, mode="infer")[0]
        newtons = ForceScaler(scales=manifest.scaler_scales).denormalize(normalized)
        return schemas.InferForceResponse(
            newtons=[float(v) for v in newtons],
            normalized=[float(v) for v in normalized],
        )

    @app.post("/infer/terrain", response_model=schemas.InferTerrainResponse)
    def do_infer_terrain(req: schemas.InferTerrainRequest):
        params, manifest = _load_model(req.model, "terrain")
        mfcc_config, window_ms = _mfcc_config_from(manifest)
        clip = truncate_to_impact(read_wav(req.wav), window_ms)
        features = mfcc(clip, mfcc_config)[None, :].astype(np.float32)
        probs = forward(params, features, mode="infer")[0]
        label = manifest.class_names[int(np.argmax(probs))]
        return schemas.InferTerrainResponse(
            label=label,
            probabilities={name: float(p)
                           for name, p in zip(manifest.class_names, probs)},
        )

    @app.post("/audit", response_model=schemas.AuditResponse)
    def do_audit(req: schemas.AuditRequest):
        params, manifest = load(req.model)
        latency = None
        if req.bench_passes > 0:
            stats, _ = bench(params, n_passes=req.bench_passes)
            latency = _latency_out(stats)
        report = audit(manifest, ram_ceiling=req.ram_ceiling)
        return schemas.AuditResponse(
            param_count=report.param_count, weight_bytes=report.weight_bytes,
            activation_bytes=report.activation_bytes, input_bytes=report.input_bytes,
            peak_ram_bytes=report.peak_ram_bytes, ram_ceiling=report.ram_ceiling,
            fits_ram=report.fits_ram, latency=latency,
        )

    @app.post("/bench", response_model=schemas.BenchResponse)
    def do_bench(req: schemas.BenchRequest):
        params, _ = load(req.model)
        stats, micros = bench(params, n_passes=req.n_passes)
        csv_path = None
        if req.out_csv:
            path = Path(req.out_csv)
            path.parent.mkdir(parents=True, exist_ok=True)
            write_bench_csv(micros, path)
            csv_path = str(path)
        return schemas.BenchResponse(latency=_latency_out(stats), csv_path=csv_path)

    return app


app = create_app()
