"""Analytic gradients versus a central finite-difference oracle.

Everything runs in float64 with a step of 1e-3.  The losses are only
piecewise smooth (ReLU and absolute-value kinks), so each case resamples
its evaluation point until every preactivation and residual sits farther
from its kink than the finite-difference step can reach; at such points
the comparison is exact and a disagreement means a wrong derivative, not
an unlucky draw.
"""

import numpy as np
import pytest

from oracles import finite_difference_gradients
from pawkit.nncore import (
    BN_EPSILON,
    MLPSpec,
    backward,
    grad_arrays,
    init_params,
    param_count,
    softmax,
    trainable_arrays,
)

RELATIVE_TOLERANCE = 1e-4
STEP = 1e-3
KINK_MARGIN = 5e-3  # min distance of any preactivation/residual from 0


def _random_configs(n=20, seed=2024):
    """n seeded architectures, <= 200 parameters, both losses, BN on/off."""
    rng = np.random.default_rng(seed)
    configs = []
    while len(configs) < n:
        depth = int(rng.integers(1, 3))
        hidden = tuple(int(rng.integers(2, 9)) for _ in range(depth))
        input_dim = int(rng.integers(2, 7))
        output_dim = int(rng.integers(2, 5))
        use_bn = bool(rng.integers(0, 2))
        loss = "mae" if rng.integers(0, 2) else "cross_entropy"
        l2 = float(rng.choice([0.0, 0.01]))
        head = "softmax" if loss == "cross_entropy" else "linear"
        spec = MLPSpec(input_dim=input_dim, hidden=hidden, output_dim=output_dim,
                       output_activation=head, batch_norm_hidden=use_bn,
                       l2_lambda=l2)
        if param_count(spec) <= 200:
            configs.append((spec, loss, int(rng.integers(0, 10_000))))
    return configs


def _kink_margin(params, x, targets, loss):
    """Smallest |preactivation| across hidden layers (and |residual| for
    MAE): how far the evaluation point is from the nearest non-smoothness."""
    spec = params.spec
    h = x
    margin = np.inf
    for i in range(len(spec.hidden)):
        d = params.dense[i]
        z = h @ d.weights + d.bias
        if spec.batch_norm_hidden:
            bn = params.norms[i]
            zhat = (z - z.mean(axis=0)) / np.sqrt(z.var(axis=0) + BN_EPSILON)
            y = bn.gamma * zhat + bn.beta
        else:
            y = z
        margin = min(margin, float(np.min(np.abs(y))))
        h = np.maximum(y, 0)
    if loss == "mae":
        d = params.dense[-1]
        logits = h @ d.weights + d.bias
        out = softmax(logits) if spec.output_activation == "softmax" else logits
        margin = min(margin, float(np.min(np.abs(out - targets))))
    return margin


def _safe_point(spec, loss, seed, tries=100):
    """Params and data resampled until no kink is within reach of STEP."""
    for attempt in range(tries):
        params = init_params(spec, seed=seed + 1000 * attempt).astype(np.float64)
        rng = np.random.default_rng([seed, attempt])
        n = 8
        x = rng.normal(0.0, 1.0, (n, spec.input_dim))
        if loss == "mae":
            targets = rng.normal(0.0, 1.0, (n, spec.output_dim))
        else:
            targets = np.zeros((n, spec.output_dim))
            targets[np.arange(n), rng.integers(0, spec.output_dim, n)] = 1.0
        if _kink_margin(params, x, targets, loss) > KINK_MARGIN:
            return params, x, targets
    raise AssertionError(f"no kink-free evaluation point found for {spec}")


def _check_one(spec, loss, seed):
    params, x, targets = _safe_point(spec, loss, seed)
    _, analytic = backward(params, x, targets, loss=loss)
    numeric = finite_difference_gradients(
        lambda: backward(params, x, targets, loss=loss)[0],
        trainable_arrays(params), h=STEP,
    )
    worst = 0.0
    for a, g in zip(numeric, grad_arrays(analytic)):
        denom = np.maximum(np.abs(a) + np.abs(g), 1e-8)
        worst = max(worst, float(np.max(np.abs(a - g) / denom)))
    return worst


@pytest.mark.parametrize("case", range(20))
def test_analytic_matches_finite_differences(case):
    spec, loss, seed = _random_configs()[case]
    worst = _check_one(spec, loss, seed)
    assert worst < RELATIVE_TOLERANCE, (
        f"config {case} ({loss}, bn={spec.batch_norm_hidden}): "
        f"worst relative error {worst:.2e}"
    )


def test_mae_through_softmax_head():
    # MAE applied to softmax outputs exercises the full jacobian path
    spec = MLPSpec(3, (4,), 3, output_activation="softmax")
    params = init_params(spec, seed=7).astype(np.float64)
    rng = np.random.default_rng(7)
    x = rng.normal(0, 1, (6, 3))
    t = rng.uniform(0, 1, (6, 3))
    _, analytic = backward(params, x, t, loss="mae")
    numeric = finite_difference_gradients(
        lambda: backward(params, x, t, loss="mae")[0],
        trainable_arrays(params), h=STEP,
    )
    for a, g in zip(numeric, grad_arrays(analytic)):
        denom = np.maximum(np.abs(a) + np.abs(g), 1e-8)
        assert float(np.max(np.abs(a - g) / denom)) < RELATIVE_TOLERANCE
