"""Minimal fully-connected network engine for sub-50k-parameter models.

Forward inference, hand-derived reverse-mode gradients, Adam updates and
per-hidden-layer batch normalization, all on plain numpy arrays.  The
universal numeric carrier is a dense 2-D float array (row-major, one sample
per row); learned parameters live in float32, while a float64 build of the
same network is supported for gradient checking.

Layer stack per hidden layer: dense -> batch norm (optional) -> ReLU ->
dropout (train mode only, inverted scaling).  The output layer is dense
with a linear or softmax head.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionError, NumericError, ValidationError

BN_EPSILON = 1e-5
BN_MOMENTUM = 0.99

ACTIVATIONS = ("relu",)
OUTPUT_ACTIVATIONS = ("linear", "softmax")
LOSSES = ("mae", "cross_entropy")


@dataclass(frozen=True)
class MLPSpec:
    """Architecture description of a fully-connected network.

    ``hidden`` lists the hidden-layer widths; every hidden layer uses ReLU.
    ``batch_norm_hidden`` adds batch normalization after each hidden dense
    layer (never on the output layer, which keeps the parameter count at
    4 extra values per hidden feature).
    """

    input_dim: int
    hidden: tuple[int, ...]
    output_dim: int
    output_activation: str = "linear"
    batch_norm_hidden: bool = True
    dropout_rate: float = 0.0
    l2_lambda: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(w) for w in self.hidden))
        if self.input_dim < 1 or self.output_dim < 1:
            raise ValidationError("input_dim and output_dim must be >= 1")
        if any(w < 1 for w in self.hidden):
            raise ValidationError("hidden widths must all be >= 1")
        if self.output_activation not in OUTPUT_ACTIVATIONS:
            raise ValidationError(f"unknown output activation {self.output_activation!r}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValidationError("dropout_rate must be in [0, 1)")
        if self.l2_lambda < 0.0:
            raise ValidationError("l2_lambda must be non-negative")

    def layer_dims(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden, self.output_dim)


def param_count(spec: MLPSpec) -> int:
    """Closed-form parameter count: dense weights+biases, plus gamma, beta
    and the two moving statistics (4 values per feature) for each
    batch-normalized hidden layer."""
    dims = spec.layer_dims()
    n = sum(dims[i] * dims[i + 1] + dims[i + 1] for i in range(len(dims) - 1))
    if spec.batch_norm_hidden:
        n += 4 * sum(spec.hidden)
    return n


@dataclass
class DenseParams:
    weights: np.ndarray  # (fan_in, fan_out)
    bias: np.ndarray  # (fan_out,)


@dataclass
class BatchNormParams:
    gamma: np.ndarray
    beta: np.ndarray
    moving_mean: np.ndarray
    moving_var: np.ndarray


@dataclass
class MLPParams:
    """Trained weights of an MLP; ``norms`` is empty unless the spec enables
    hidden-layer batch normalization."""

    spec: MLPSpec
    dense: list[DenseParams]
    norms: list[BatchNormParams] = field(default_factory=list)

    @property
    def dtype(self) -> np.dtype:
        return self.dense[0].weights.dtype

    def copy(self) -> "MLPParams":
        return MLPParams(
            spec=self.spec,
            dense=[DenseParams(d.weights.copy(), d.bias.copy()) for d in self.dense],
            norms=[
                BatchNormParams(n.gamma.copy(), n.beta.copy(), n.moving_mean.copy(), n.moving_var.copy())
                for n in self.norms
            ],
        )

    def astype(self, dtype) -> "MLPParams":
        return MLPParams(
            spec=self.spec,
            dense=[DenseParams(d.weights.astype(dtype), d.bias.astype(dtype)) for d in self.dense],
            norms=[
                BatchNormParams(
                    n.gamma.astype(dtype),
                    n.beta.astype(dtype),
                    n.moving_mean.astype(dtype),
                    n.moving_var.astype(dtype),
                )
                for n in self.norms
            ],
        )

    def validate(self):
        dims = self.spec.layer_dims()
        if len(self.dense) != len(dims) - 1:
            raise DimensionError(f"expected {len(dims) - 1} dense layers, got {len(self.dense)}")
        for i, d in enumerate(self.dense):
            if d.weights.shape != (dims[i], dims[i + 1]) or d.bias.shape != (dims[i + 1],):
                raise DimensionError(f"dense layer {i} shapes inconsistent with spec")
        expect_norms = len(self.spec.hidden) if self.spec.batch_norm_hidden else 0
        if len(self.norms) != expect_norms:
            raise DimensionError(f"expected {expect_norms} batch-norm layers, got {len(self.norms)}")
        for i, bn in enumerate(self.norms):
            width = self.spec.hidden[i]
            for arr in (bn.gamma, bn.beta, bn.moving_mean, bn.moving_var):
                if arr.shape != (width,):
                    raise DimensionError(f"batch-norm layer {i} shapes inconsistent with spec")
            if np.any(bn.moving_var < 0):
                raise ValidationError(f"batch-norm layer {i} has negative moving variance")


@dataclass
class DenseGrads:
    weights: np.ndarray
    bias: np.ndarray


@dataclass
class NormGrads:
    gamma: np.ndarray
    beta: np.ndarray


@dataclass
class MLPGrads:
    """Gradients for every trainable array (moving statistics excluded)."""

    dense: list[DenseGrads]
    norms: list[NormGrads] = field(default_factory=list)


def trainable_arrays(params: MLPParams) -> list[np.ndarray]:
    """Trainable arrays in the fixed order shared with MLPGrads."""
    out: list[np.ndarray] = []
    for d in params.dense:
        out.extend((d.weights, d.bias))
    for bn in params.norms:
        out.extend((bn.gamma, bn.beta))
    return out


def grad_arrays(grads: MLPGrads) -> list[np.ndarray]:
    out: list[np.ndarray] = []
    for d in grads.dense:
        out.extend((d.weights, d.bias))
    for bn in grads.norms:
        out.extend((bn.gamma, bn.beta))
    return out


@dataclass
class AdamState:
    """Bias-corrected Adam moments mirroring a network's trainable arrays."""

    m: MLPGrads
    v: MLPGrads
    step: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if not 0.0 < self.beta1 < 1.0 or not 0.0 < self.beta2 < 1.0:
            raise ValidationError("Adam decay rates must lie in (0, 1)")
        if self.epsilon <= 0.0 or self.learning_rate <= 0.0:
            raise ValidationError("Adam epsilon and learning rate must be positive")
        if self.step < 0:
            raise ValidationError("Adam step must be >= 0")

    @classmethod
    def for_params(cls, params: MLPParams, learning_rate: float = 1e-3, beta1: float = 0.9,
                   beta2: float = 0.999, epsilon: float = 1e-8) -> "AdamState":
        def zeros_like_grads() -> MLPGrads:
            return MLPGrads(
                dense=[DenseGrads(np.zeros_like(d.weights), np.zeros_like(d.bias)) for d in params.dense],
                norms=[NormGrads(np.zeros_like(n.gamma), np.zeros_like(n.beta)) for n in params.norms],
            )

        return cls(m=zeros_like_grads(), v=zeros_like_grads(), step=0,
                   learning_rate=learning_rate, beta1=beta1, beta2=beta2, epsilon=epsilon)


def init_params(spec: MLPSpec, seed: int, dtype=np.float32) -> MLPParams:
    """Seeded initialization: He-uniform for the ReLU hidden layers,
    Glorot-uniform for the output layer, zero biases, identity batch norm."""
    rng = np.random.default_rng(seed)
    dims = spec.layer_dims()
    dense = []
    for i in range(len(dims) - 1):
        fan_in, fan_out = dims[i], dims[i + 1]
        if i < len(dims) - 2:
            bound = np.sqrt(6.0 / fan_in)
        else:
            bound = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(dtype)
        dense.append(DenseParams(w, np.zeros(fan_out, dtype=dtype)))
    norms = []
    if spec.batch_norm_hidden:
        for width in spec.hidden:
            norms.append(
                BatchNormParams(
                    gamma=np.ones(width, dtype=dtype),
                    beta=np.zeros(width, dtype=dtype),
                    moving_mean=np.zeros(width, dtype=dtype),
                    moving_var=np.ones(width, dtype=dtype),
                )
            )
    return MLPParams(spec=spec, dense=dense, norms=norms)


def _check_batch(params: MLPParams, batch: np.ndarray, mode: str) -> np.ndarray:
    if mode not in ("train", "infer"):
        raise ValidationError(f"mode must be 'train' or 'infer', got {mode!r}")
    batch = np.asarray(batch)
    if batch.ndim != 2:
        raise DimensionError(f"batch must be 2-D, got shape {batch.shape}")
    if batch.shape[1] != params.spec.input_dim:
        raise DimensionError(
            f"batch has {batch.shape[1]} columns, spec expects {params.spec.input_dim}"
        )
    if not np.all(np.isfinite(batch)):
        raise NumericError("batch contains non-finite values")
    if (mode == "train" and params.spec.batch_norm_hidden and params.spec.hidden
            and batch.shape[0] < 2):
        raise ValidationError("train-mode batch norm needs at least 2 samples")
    return batch


def softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _relu(y: np.ndarray) -> np.ndarray:
    return np.maximum(y, 0)


def _forward_stack(params: MLPParams, batch: np.ndarray, mode: str,
                   rng: np.random.Generator | None):
    """Run the full stack, returning the output plus the per-layer cache
    needed for backprop.  No side effects on ``params``."""
    spec = params.spec
    n_hidden = len(spec.hidden)
    dropout = spec.dropout_rate if mode == "train" else 0.0
    if dropout > 0.0 and rng is None:
        raise ValidationError("train-mode dropout needs an explicit rng")

    x = batch
    cache = []
    for i in range(n_hidden):
        d = params.dense[i]
        z = x @ d.weights + d.bias
        layer = {"x": x, "z": z}
        if spec.batch_norm_hidden:
            bn = params.norms[i]
            if mode == "train":
                mu = z.mean(axis=0)
                var = z.var(axis=0)
            else:
                mu = bn.moving_mean
                var = bn.moving_var
            inv = 1.0 / np.sqrt(var + BN_EPSILON)
            zhat = (z - mu) * inv
            y = bn.gamma * zhat + bn.beta
            layer.update({"zhat": zhat, "inv": inv, "batch_mean": mu, "batch_var": var})
        else:
            y = z
        r = _relu(y)
        layer["y"] = y
        if dropout > 0.0:
            mask = (rng.random(r.shape) >= dropout) / (1.0 - dropout)
            mask = mask.astype(r.dtype)
            x = r * mask
            layer["mask"] = mask
        else:
            x = r
        cache.append(layer)

    d = params.dense[-1]
    logits = x @ d.weights + d.bias
    out = softmax(logits) if spec.output_activation == "softmax" else logits
    return out, logits, x, cache


def forward(params: MLPParams, batch: np.ndarray, mode: str = "infer",
            rng: np.random.Generator | None = None) -> np.ndarray:
    """Forward pass; pure (moving statistics are never touched here).

    Infer mode uses the stored moving statistics and skips dropout, so
    repeated calls on the same inputs are bitwise identical.
    """
    batch = _check_batch(params, batch, mode)
    out, _, _, _ = _forward_stack(params, batch, mode, rng)
    if not np.all(np.isfinite(out)):
        raise NumericError("forward pass produced non-finite values")
    return out


def _check_targets(params: MLPParams, batch: np.ndarray, targets: np.ndarray,
                   loss: str) -> np.ndarray:
    targets = np.asarray(targets)
    expect = (batch.shape[0], params.spec.output_dim)
    if targets.shape != expect:
        raise DimensionError(f"targets shape {targets.shape}, expected {expect}")
    if not np.all(np.isfinite(targets)):
        raise NumericError("targets contain non-finite values")
    if loss == "cross_entropy":
        if np.any(targets < 0):
            raise ValidationError("cross_entropy targets must be non-negative")
        sums = targets.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > 1e-5):
            raise ValidationError("cross_entropy target rows must sum to 1")
    return targets


def backward(params: MLPParams, batch: np.ndarray, targets: np.ndarray, loss: str,
             rng: np.random.Generator | None = None,
             update_moving_stats: bool = False) -> tuple[float, MLPGrads]:
    """Loss and gradients for one train-mode pass.

    The returned loss includes the L2 penalty 0.5*l2_lambda*sum(w^2) so that
    it is exactly the function whose gradient is returned; the penalty acts
    on dense weights only (never biases or batch-norm scales).  With
    ``update_moving_stats`` the batch-norm moving averages are refreshed
    from this batch's statistics (momentum 0.99) -- the training loop's one
    sanctioned mutation of ``params``.
    """
    if loss not in LOSSES:
        raise ValidationError(f"unknown loss {loss!r}")
    spec = params.spec
    if loss == "cross_entropy" and spec.output_activation != "softmax":
        raise ValidationError("cross_entropy requires a softmax output head")
    batch = _check_batch(params, batch, "train")
    targets = _check_targets(params, batch, targets, loss)

    out, logits, last_hidden, cache = _forward_stack(params, batch, "train", rng)
    n, d_out = out.shape

    if loss == "mae":
        resid = out - targets
        loss_value = float(np.mean(np.abs(resid)))
        dout = np.sign(resid) / (n * d_out)
        if spec.output_activation == "softmax":
            # pull the gradient through the softmax jacobian row by row
            dlogits = out * (dout - np.sum(dout * out, axis=1, keepdims=True))
        else:
            dlogits = dout
    else:
        p = np.clip(out, 1e-12, None)
        loss_value = float(-np.mean(np.sum(targets * np.log(p), axis=1)))
        dlogits = (out - targets) / n

    l2 = spec.l2_lambda
    if l2 > 0.0:
        loss_value += 0.5 * l2 * sum(float(np.sum(d.weights ** 2)) for d in params.dense)

    dense_grads: list[DenseGrads | None] = [None] * len(params.dense)
    norm_grads: list[NormGrads | None] = [None] * len(params.norms)

    g = dlogits
    w_out = params.dense[-1].weights
    gw = last_hidden.T @ g
    if l2 > 0.0:
        gw = gw + l2 * w_out
    dense_grads[-1] = DenseGrads(gw, g.sum(axis=0))
    dx = g @ w_out.T

    for i in range(len(spec.hidden) - 1, -1, -1):
        layer = cache[i]
        if "mask" in layer:
            dx = dx * layer["mask"]
        dy = dx * (layer["y"] > 0)
        if spec.batch_norm_hidden:
            bn = params.norms[i]
            zhat, inv = layer["zhat"], layer["inv"]
            norm_grads[i] = NormGrads((dy * zhat).sum(axis=0), dy.sum(axis=0))
            dzhat = dy * bn.gamma
            m = dy.shape[0]
            dz = (inv / m) * (
                m * dzhat - dzhat.sum(axis=0) - zhat * (dzhat * zhat).sum(axis=0)
            )
            if update_moving_stats:
                bn.moving_mean[...] = (
                    BN_MOMENTUM * bn.moving_mean + (1.0 - BN_MOMENTUM) * layer["batch_mean"]
                )
                bn.moving_var[...] = (
                    BN_MOMENTUM * bn.moving_var + (1.0 - BN_MOMENTUM) * layer["batch_var"]
                )
        else:
            dz = dy
        w = params.dense[i].weights
        gw = layer["x"].T @ dz
        if l2 > 0.0:
            gw = gw + l2 * w
        dense_grads[i] = DenseGrads(gw, dz.sum(axis=0))
        dx = dz @ w.T

    if not np.isfinite(loss_value):
        raise NumericError("loss is non-finite")
    return loss_value, MLPGrads(dense=dense_grads, norms=norm_grads)


def adam_step(params: MLPParams, grads: MLPGrads, state: AdamState) -> tuple[MLPParams, AdamState]:
    """Standard bias-corrected Adam update, applied in place."""
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1 ** state.step
    corr2 = 1.0 - b2 ** state.step
    for theta, g, m, v in zip(trainable_arrays(params), grad_arrays(grads),
                              grad_arrays(state.m), grad_arrays(state.v)):
        if theta.shape != g.shape:
            raise DimensionError("gradient shape does not match parameter shape")
        m[...] = b1 * m + (1.0 - b1) * g
        v[...] = b2 * v + (1.0 - b2) * g * g
        m_hat = m / corr1
        v_hat = v / corr2
        theta[...] = theta - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return params, state


def spec_with(spec: MLPSpec, **overrides) -> MLPSpec:
    """Convenience for grid search: a copy of ``spec`` with fields replaced."""
    return replace(spec, **overrides)
