"""Training and evaluation methodology: splits, stratified K-fold, the
mini-batch training loops for both tasks, grid search, label scaling,
metrics, and a Gaussian Naive Bayes baseline.

Everything here is deterministic per seed: shuffles, fold assignment,
weight init and dropout streams are all derived from the caller's seed,
so repeated runs produce identical histories and identical weights.
"""

from __future__ import annotations

import csv
import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from .dsp import MfccConfig, mfcc, truncate_to_impact
from .errors import (
    ConfigError,
    NumericError,
    StratificationError,
    TrainingError,
    ValidationError,
)
from .imaging import preprocess_camera_frame
from .nncore import (
    AdamState,
    MLPParams,
    MLPSpec,
    adam_step,
    backward,
    forward,
    init_params,
    param_count,
)

FORCE_AXES = ("fx", "fy", "fz")
TABLE_FORCE_SCALES = (75.0, 92.0, 133.0)  # max |force| per axis, newtons
HISTOGRAM_BINS = 50


def _derived_seed(seed: int, *branch: int) -> int:
    return int(np.random.SeedSequence([int(seed), *branch]).generate_state(1)[0])


# ---------------------------------------------------------------------------
# label scaling

@dataclass(frozen=True)
class ForceScaler:
    """Per-axis normalization of force labels to roughly [-1, 1]."""

    scales: tuple[float, float, float] = TABLE_FORCE_SCALES

    def __post_init__(self):
        if len(self.scales) != 3 or any(s <= 0 for s in self.scales):
            raise ConfigError("scales must be 3 positive floats")

    def normalize(self, forces_N) -> np.ndarray:
        return np.asarray(forces_N, dtype=np.float64) / np.asarray(self.scales)

    def denormalize(self, normalized) -> np.ndarray:
        return np.asarray(normalized, dtype=np.float64) * np.asarray(self.scales)


# ---------------------------------------------------------------------------
# partitioning

@dataclass(frozen=True)
class SplitSpec:
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1)
    seed: int = 0

    def __post_init__(self):
        if len(self.fractions) != 3 or any(f < 0 for f in self.fractions):
            raise ConfigError("need 3 non-negative fractions")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ConfigError(f"fractions must sum to 1, got {sum(self.fractions)}")


def split_indices(n: int, spec: SplitSpec = SplitSpec()) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Seeded shuffle, then floor(n*fraction) for val/test with the
    remainder going to train.  Disjoint and exhaustive by construction."""
    if n < 1:
        raise ValidationError("cannot split an empty dataset")
    perm = np.random.default_rng(spec.seed).permutation(n)
    n_val = int(np.floor(n * spec.fractions[1]))
    n_test = int(np.floor(n * spec.fractions[2]))
    n_train = n - n_val - n_test
    return (perm[:n_train],
            perm[n_train:n_train + n_val],
            perm[n_train + n_val:])


@dataclass(frozen=True)
class FoldAssignment:
    k: int
    fold_of: np.ndarray  # per-sample fold index, shape (n,)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of != fold)

    def val_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of == fold)


def stratified_kfold(labels, k: int = 5, seed: int = 0) -> FoldAssignment:
    """Round-robin fold assignment per class after a seeded shuffle, so
    per-class fold sizes differ by at most one."""
    labels = np.asarray(labels)
    if k < 1:
        raise ValidationError("k must be >= 1")
    rng = np.random.default_rng(seed)
    fold_of = np.full(labels.shape[0], -1, dtype=np.int64)
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        if members.size < k:
            raise StratificationError(
                f"class {cls!r} has {members.size} samples, fewer than k={k}"
            )
        shuffled = rng.permutation(members)
        fold_of[shuffled] = np.arange(shuffled.size) % k
    return FoldAssignment(k=k, fold_of=fold_of)


# ---------------------------------------------------------------------------
# featurization

def force_features(samples) -> tuple[np.ndarray, np.ndarray]:
    """Camera frames -> (n, 1350) float32 rows; labels -> (n, 3) newtons."""
    x = np.vstack([preprocess_camera_frame(s.image) for s in samples])
    y = np.stack([np.asarray(s.force_N, dtype=np.float64) for s in samples])
    return x, y


def terrain_features(samples, class_names, config: MfccConfig = MfccConfig()
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Impact-windowed MFCC vectors -> (n, 13) float32; labels -> int codes."""
    index = {name: i for i, name in enumerate(class_names)}
    unknown = {s.label for s in samples} - set(index)
    if unknown:
        raise ValidationError(f"labels {sorted(unknown)} not in {list(class_names)}")
    x = np.stack([
        mfcc(truncate_to_impact(s.clip), config) for s in samples
    ]).astype(np.float32)
    y = np.asarray([index[s.label] for s in samples], dtype=np.int64)
    return x, y


# ---------------------------------------------------------------------------
# training loops

@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 32
    learning_rate: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")


@dataclass
class EpochStats:
    epoch: int
    train_value: float
    val_value: float


@dataclass
class TrainResult:
    params: MLPParams
    history: list[EpochStats]
    best_epoch: int  # -1 when no epochs ran
    best_val: float


def _train_loop(spec: MLPSpec, x, targets, x_val, val_score, loss: str,
                config: TrainConfig, minimize: bool) -> TrainResult:
    """Shared mini-batch Adam loop with a best-on-validation checkpoint.

    val_score(params) returns the tracked validation metric; minimize
    says which direction wins the checkpoint.  val_score=None disables
    checkpointing and keeps the last-epoch parameters.  Single-sample
    tail batches are skipped (batch statistics are undefined on one row).
    """
    if spec.batch_norm_hidden and config.batch_size < 2:
        raise ConfigError("batch_size must be >= 2 when batch norm is enabled")
    x = np.asarray(x, dtype=np.float32)
    targets = np.asarray(targets, dtype=np.float32)
    n = x.shape[0]
    if n == 0:
        raise ValidationError("empty training set")

    init_seed = _derived_seed(config.seed, 0)
    shuffle_rng = np.random.default_rng(_derived_seed(config.seed, 1))
    dropout_rng = np.random.default_rng(_derived_seed(config.seed, 2))

    params = init_params(spec, seed=init_seed)
    state = AdamState.for_params(params, learning_rate=config.learning_rate)

    best = params.copy()
    best_epoch = -1
    best_val = np.inf if minimize else -np.inf
    sign = 1.0 if minimize else -1.0
    history: list[EpochStats] = []

    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            if idx.size < 2:
                continue
            try:
                loss_value, grads = backward(
                    params, x[idx], targets[idx], loss=loss,
                    rng=dropout_rng, update_moving_stats=True,
                )
            except NumericError as exc:
                raise TrainingError(f"training diverged at epoch {epoch}: {exc}") from exc
            if not np.isfinite(loss_value):
                raise TrainingError(f"non-finite loss at epoch {epoch}")
            adam_step(params, grads, state)

        try:
            train_pred = forward(params, x, mode="infer")
            train_mae = float(np.mean(np.abs(train_pred - targets)))
            val_value = float(val_score(params)) if val_score is not None else float("nan")
        except NumericError as exc:
            raise TrainingError(f"training diverged at epoch {epoch}: {exc}") from exc
        history.append(EpochStats(epoch=epoch, train_value=train_mae, val_value=val_value))
        if val_score is not None and sign * val_value < sign * best_val:
            best_val = val_value
            best_epoch = epoch
            best = params.copy()

    if best_epoch == -1:  # no checkpoint taken: hand back the live parameters
        best = params
        best_val = float("nan")
    return TrainResult(params=best, history=history, best_epoch=best_epoch, best_val=best_val)


@dataclass
class ForceTrainResult:
    params: MLPParams
    scaler: ForceScaler
    history: list[EpochStats]
    best_epoch: int
    best_val_mae: float


def train_force(spec: MLPSpec, train_x, train_y_N, val_x, val_y_N,
                config: TrainConfig = TrainConfig(),
                scaler: ForceScaler = ForceScaler()) -> ForceTrainResult:
    """MAE + L2 regression on normalized force labels; returns the
    best-on-validation parameters and the per-epoch MAE history."""
    if np.asarray(val_x).shape[0] == 0:
        raise ValidationError("empty validation set")
    yn_train = scaler.normalize(train_y_N)
    yn_val = scaler.normalize(val_y_N).astype(np.float32)
    val_x = np.asarray(val_x, dtype=np.float32)

    def val_mae(params):
        pred = forward(params, val_x, mode="infer")
        return np.mean(np.abs(pred - yn_val))

    result = _train_loop(spec, train_x, yn_train, val_x, val_mae,
                         loss="mae", config=config, minimize=True)
    return ForceTrainResult(params=result.params, scaler=scaler, history=result.history,
                            best_epoch=result.best_epoch, best_val_mae=result.best_val)


def _one_hot(labels, n_classes: int) -> np.ndarray:
    out = np.zeros((len(labels), n_classes), dtype=np.float32)
    out[np.arange(len(labels)), np.asarray(labels, dtype=np.int64)] = 1.0
    return out


def _accuracy(params, x, labels) -> float:
    probs = forward(params, np.asarray(x, dtype=np.float32), mode="infer")
    return float(np.mean(np.argmax(probs, axis=1) == np.asarray(labels)))


@dataclass
class TerrainCvResult:
    fold_params: list[MLPParams]
    fold_accuracies: list[float]
    cv_mean: float
    cv_std: float  # population stddev over fold accuracies
    final_params: MLPParams
    histories: list[list[EpochStats]]


def train_terrain(spec: MLPSpec, x, labels, folds: FoldAssignment,
                  config: TrainConfig = TrainConfig()) -> TerrainCvResult:
    """Cross-entropy training per fold (best-on-validation-accuracy
    checkpoints), then a final model fitted on every sample for the full
    epoch budget."""
    x = np.asarray(x, dtype=np.float32)
    labels = np.asarray(labels, dtype=np.int64)
    if spec.output_activation != "softmax":
        raise ConfigError("terrain training requires a softmax output head")
    targets = _one_hot(labels, spec.output_dim)

    fold_params: list[MLPParams] = []
    accuracies: list[float] = []
    histories: list[list[EpochStats]] = []
    for fold in range(folds.k):
        tr = folds.train_indices(fold)
        va = folds.val_indices(fold)
        if tr.size == 0 or va.size == 0:
            raise ValidationError(f"fold {fold} leaves an empty partition")
        fold_config = TrainConfig(epochs=config.epochs, batch_size=config.batch_size,
                                  learning_rate=config.learning_rate,
                                  seed=_derived_seed(config.seed, 10, fold))
        result = _train_loop(
            spec, x[tr], targets[tr], x[va],
            lambda p, va=va: _accuracy(p, x[va], labels[va]),
            loss="cross_entropy", config=fold_config, minimize=False,
        )
        fold_params.append(result.params)
        accuracies.append(result.best_val if result.best_epoch >= 0
                          else _accuracy(result.params, x[va], labels[va]))
        histories.append(result.history)

    final_config = TrainConfig(epochs=config.epochs, batch_size=config.batch_size,
                               learning_rate=config.learning_rate,
                               seed=_derived_seed(config.seed, 11))
    # no held-out data remains, so keep the last-epoch parameters
    final = _train_loop(spec, x, targets, x, None,
                        loss="cross_entropy", config=final_config, minimize=False)
    return TerrainCvResult(
        fold_params=fold_params,
        fold_accuracies=accuracies,
        cv_mean=float(np.mean(accuracies)),
        cv_std=float(np.std(accuracies)),
        final_params=final.params,
        histories=histories,
    )


# ---------------------------------------------------------------------------
# grid search

@dataclass(frozen=True)
class TrialSpec:
    hidden: tuple[int, ...]
    learning_rate: float = 1e-3
    dropout_rate: float = 0.0


def make_grid(hidden_options, learning_rates=(1e-3,), dropouts=(0.0,)) -> list[TrialSpec]:
    return [TrialSpec(hidden=tuple(h), learning_rate=lr, dropout_rate=d)
            for h, lr, d in itertools.product(hidden_options, learning_rates, dropouts)]


@dataclass
class GridTrial:
    index: int
    spec: MLPSpec
    learning_rate: float
    dropout_rate: float
    param_count: int
    best_val_mae: float
    inference_us: float
    result: ForceTrainResult


def _time_single_pass(params, input_dim: int, reps: int = 30) -> float:
    probe = np.zeros((1, input_dim), dtype=np.float32)
    for _ in range(3):  # warm-up
        forward(params, probe, mode="infer")
    t0 = time.perf_counter()
    for _ in range(reps):
        forward(params, probe, mode="infer")
    return (time.perf_counter() - t0) / reps * 1e6


def grid_search_force(trials: list[TrialSpec], train_x, train_y_N, val_x, val_y_N,
                      config: TrainConfig = TrainConfig(),
                      scaler: ForceScaler = ForceScaler(),
                      input_dim: int = 1350, output_dim: int = 3) -> list[GridTrial]:
    """Train every configuration identically and rank by validation MAE
    (ties keep grid order).  Each trial reports its parameter count and a
    measured single-pass inference time."""
    if not trials:
        raise ValidationError("empty grid")
    results: list[GridTrial] = []
    for i, trial in enumerate(trials):
        spec = MLPSpec(input_dim=input_dim, hidden=trial.hidden, output_dim=output_dim,
                       dropout_rate=trial.dropout_rate)
        trial_config = TrainConfig(epochs=config.epochs, batch_size=config.batch_size,
                                   learning_rate=trial.learning_rate,
                                   seed=_derived_seed(config.seed, 20, i))
        result = train_force(spec, train_x, train_y_N, val_x, val_y_N,
                             config=trial_config, scaler=scaler)
        results.append(GridTrial(
            index=i, spec=spec, learning_rate=trial.learning_rate,
            dropout_rate=trial.dropout_rate, param_count=param_count(spec),
            best_val_mae=result.best_val_mae,
            inference_us=_time_single_pass(result.params, input_dim),
            result=result,
        ))
    return sorted(results, key=lambda t: (t.best_val_mae, t.index))


def format_trials_table(trials: list[GridTrial]) -> str:
    """Plain-text report: structure, parameter count, val MAE, latency."""
    lines = [f"{'rank':>4}  {'structure':<24} {'params':>8} {'val MAE':>9} "
             f"{'lr':>8} {'dropout':>7} {'infer [us]':>10}"]
    for rank, t in enumerate(trials, start=1):
        structure = "-".join(str(d) for d in t.spec.layer_dims())
        lines.append(f"{rank:>4}  {structure:<24} {t.param_count:>8,} "
                     f"{t.best_val_mae:>9.4f} {t.learning_rate:>8.4g} "
                     f"{t.dropout_rate:>7.2f} {t.inference_us:>10.1f}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Gaussian Naive Bayes baseline

@dataclass
class GaussianNB:
    """Per-class, per-feature Gaussians with a variance floor; prediction
    is the log-posterior argmax, ties going to the lowest class index.
    Variances are population (ddof=0) estimates."""

    class_log_prior: np.ndarray  # (c,)
    means: np.ndarray  # (c, d)
    variances: np.ndarray  # (c, d)

    VAR_FLOOR = 1e-9

    @classmethod
    def fit(cls, features, labels, n_classes: int | None = None) -> "GaussianNB":
        x = np.asarray(features, dtype=np.float64)
        y = np.asarray(labels, dtype=np.int64)
        if x.ndim != 2 or x.shape[0] != y.shape[0]:
            raise ValidationError("features must be (n, d) aligned with labels")
        c = int(n_classes if n_classes is not None else y.max() + 1)
        counts = np.bincount(y, minlength=c)
        if np.any(counts < 2):
            lacking = int(np.argmin(counts))
            raise ValidationError(
                f"class {lacking} has {counts[lacking]} samples, need >= 2"
            )
        means = np.stack([x[y == i].mean(axis=0) for i in range(c)])
        variances = np.stack([
            np.maximum(x[y == i].var(axis=0), cls.VAR_FLOOR) for i in range(c)
        ])
        return cls(class_log_prior=np.log(counts / counts.sum()),
                   means=means, variances=variances)

    def log_posterior(self, features) -> np.ndarray:
        x = np.asarray(features, dtype=np.float64)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        diff = x[:, None, :] - self.means[None, :, :]
        log_like = -0.5 * np.sum(
            np.log(2.0 * np.pi * self.variances)[None, :, :]
            + diff ** 2 / self.variances[None, :, :],
            axis=2,
        )
        post = log_like + self.class_log_prior[None, :]
        return post[0] if single else post

    def predict(self, features) -> np.ndarray:
        post = np.atleast_2d(self.log_posterior(features))
        return np.argmax(post, axis=1)


# ---------------------------------------------------------------------------
# metrics

@dataclass
class ForceMetrics:
    per_axis_mae: np.ndarray  # normalized units, (3,)
    magnitude_mae_N: float
    magnitude_std_N: float


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # (c, c), rows = true, cols = predicted

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.counts) / self.counts.sum())

    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)


def evaluate_force(params: MLPParams, scaler: ForceScaler, x, y_N
                   ) -> tuple[ForceMetrics, dict[str, tuple[np.ndarray, np.ndarray]]]:
    """Per-axis normalized MAE plus newton-scale magnitude-error stats and
    50-bin histograms (per-axis newton errors and the magnitude error)."""
    x = np.asarray(x, dtype=np.float32)
    if x.shape[0] == 0:
        raise ValidationError("empty evaluation set")
    y_N = np.asarray(y_N, dtype=np.float64)
    pred_n = forward(params, x, mode="infer").astype(np.float64)
    truth_n = scaler.normalize(y_N)
    per_axis = np.mean(np.abs(pred_n - truth_n), axis=0)

    pred_N = scaler.denormalize(pred_n)
    mag_err = np.abs(np.linalg.norm(pred_N, axis=1) - np.linalg.norm(y_N, axis=1))
    axis_err_N = np.abs(pred_N - y_N)

    histograms = {}
    for i, name in enumerate(FORCE_AXES):
        histograms[name] = np.histogram(axis_err_N[:, i], bins=HISTOGRAM_BINS)
    histograms["magnitude"] = np.histogram(mag_err, bins=HISTOGRAM_BINS)
    metrics = ForceMetrics(
        per_axis_mae=per_axis,
        magnitude_mae_N=float(np.mean(mag_err)),
        magnitude_std_N=float(np.std(mag_err)),
    )
    return metrics, histograms


def evaluate_terrain(params: MLPParams, x, labels) -> tuple[float, ConfusionMatrix]:
    x = np.asarray(x, dtype=np.float32)
    labels = np.asarray(labels, dtype=np.int64)
    if x.shape[0] == 0:
        raise ValidationError("empty evaluation set")
    probs = forward(params, x, mode="infer")
    pred = np.argmax(probs, axis=1)
    c = params.spec.output_dim
    counts = np.zeros((c, c), dtype=np.int64)
    np.add.at(counts, (labels, pred), 1)
    cm = ConfusionMatrix(counts=counts)
    return cm.accuracy, cm


# ---------------------------------------------------------------------------
# CSV emitters (figure data is exported for external plotting)

def write_metrics_csv(metrics: ForceMetrics, path):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["metric", "value"])
        for name, value in zip(FORCE_AXES, metrics.per_axis_mae):
            writer.writerow([f"normalized_mae_{name}", f"{value:.6f}"])
        writer.writerow(["magnitude_mae_N", f"{metrics.magnitude_mae_N:.6f}"])
        writer.writerow(["magnitude_std_N", f"{metrics.magnitude_std_N:.6f}"])


def write_histogram_csv(histograms: dict, path):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["series", "bin_lo", "bin_hi", "count"])
        for name, (counts, edges) in histograms.items():
            for j, count in enumerate(counts):
                writer.writerow([name, f"{edges[j]:.6f}", f"{edges[j + 1]:.6f}", int(count)])


def write_confusion_csv(cm: ConfusionMatrix, class_names, path):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["true\\pred", *class_names])
        for i, name in enumerate(class_names):
            writer.writerow([name, *cm.counts[i].tolist()])


def write_history_csv(history: list[EpochStats], path, value_names=("train", "val")):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", *value_names])
        for h in history:
            writer.writerow([h.epoch, f"{h.train_value:.6f}", f"{h.val_value:.6f}"])
