"""Classifier head training: multinomial logistic regression over features.

Full-batch gradient descent on a convex objective with a fixed schedule and
fixed summation order keyed by sample id, so two trains on identical state
produce bit-identical weights. A successful train updates the project's
current model, appends a ModelTrained event, and re-classifies every live
test sample before returning.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .core import events as ev
from .core.models import ClassificationResult, ModelVersion, ProjectState
from .core.store import ProjectStore, utc_now_iso
from .errors import (
    TrainingInProgressError,
    TrainingPrerequisiteError,
    ValidationFailure,
)

logger = logging.getLogger(__name__)

STD_FLOOR = 1e-8
LOSS_SLACK = 1e-12


@dataclass(frozen=True)
class TrainingConfig:
    learning_rate: float = 0.1
    epochs: int = 300
    l2_penalty: float = 1e-3


@dataclass
class FitResult:
    weights: np.ndarray  # (K, D)
    bias: np.ndarray  # (K,)
    losses: list[float] = field(default_factory=list)
    lr_reductions: int = 0


def softmax_rows(z: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max-subtraction for stability."""
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def standardize_stats(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-feature mean and std (population), std floored at 1e-8."""
    mean = x.mean(axis=0)
    std = np.maximum(x.std(axis=0), STD_FLOOR)
    return mean, std


def loss_and_gradients(
    weights: np.ndarray,
    bias: np.ndarray,
    x: np.ndarray,
    y: np.ndarray,
    l2_penalty: float,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy + (l2/2)*||W||^2 and its exact gradients.

    The bias carries no penalty. Cross-entropy goes through log-sum-exp so
    the loss stays finite even for saturated predictions.
    """
    n = x.shape[0]
    z = x @ weights.T + bias
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    sums = e.sum(axis=1)
    ce = np.log(sums) - shifted[np.arange(n), y]
    loss = ce.mean() + 0.5 * l2_penalty * float(np.sum(weights * weights))

    g = e / sums[:, None]
    g[np.arange(n), y] -= 1.0
    g /= n
    grad_w = g.T @ x + l2_penalty * weights
    grad_b = g.sum(axis=0)
    return float(loss), grad_w, grad_b


def fit_softmax(
    x: np.ndarray,
    y: np.ndarray,
    num_classes: int,
    config: TrainingConfig = TrainingConfig(),
) -> FitResult:
    """Zero-initialized full-batch GD; deterministic for fixed inputs.

    The loss is non-increasing on standardized features at the default rate;
    if an epoch ever increases it beyond 1e-12 the rate is halved for the
    remaining epochs and the reduction is recorded.
    """
    dim = x.shape[1]
    weights = np.zeros((num_classes, dim), dtype=np.float64)
    bias = np.zeros(num_classes, dtype=np.float64)
    lr = config.learning_rate
    result = FitResult(weights, bias)
    previous = np.inf
    for epoch in range(config.epochs):
        loss, grad_w, grad_b = loss_and_gradients(weights, bias, x, y, config.l2_penalty)
        if loss > previous + LOSS_SLACK:
            lr *= 0.5
            result.lr_reductions += 1
            logger.warning(
                "loss increased at epoch %d (%.6e -> %.6e); learning rate halved to %g",
                epoch,
                previous,
                loss,
                lr,
            )
        previous = loss
        result.losses.append(loss)
        weights = weights - lr * grad_w
        bias = bias - lr * grad_b
    result.weights = weights
    result.bias = bias
    return result


def predict(model: ModelVersion, feature_vector: np.ndarray) -> ClassificationResult:
    """Confidence distribution over the model's labels for one feature vector.

    Ties on the maximum break toward the lowest label ordinal (label_ids are
    in creation order and argmax returns the first maximum).
    """
    x = np.asarray(feature_vector, dtype=np.float64)
    if x.shape != (model.mean.shape[0],):
        raise ValidationFailure(
            f"feature vector has shape {x.shape}, expected ({model.mean.shape[0]},)"
        )
    z = model.weights @ ((x - model.mean) / model.std) + model.bias
    z = z - z.max()
    e = np.exp(z)
    p = e / e.sum()
    top = int(np.argmax(p))
    return ClassificationResult(
        distribution={label_id: float(p[i]) for i, label_id in enumerate(model.label_ids)},
        top_label_id=model.label_ids[top],
        top_confidence=float(p[top]),
    )


def _training_snapshot(
    state: ProjectState,
) -> tuple[list[str], list[tuple[str, str]], list[str]]:
    """Eligible label ids (creation order) plus (sample_id, sha) rows sorted by id.

    Sorting by sample id fixes the reduction order regardless of insertion
    order, which is what makes training permutation-invariant.
    """
    live_counts: dict[str, int] = {l.id: 0 for l in state.live_labels()}
    rows = []
    for sample in state.samples.values():
        if not sample.deleted and sample.label_id in live_counts:
            live_counts[sample.label_id] += 1
            rows.append((sample.id, sample.image_ref, sample.label_id))
    eligible = [l.id for l in state.live_labels() if live_counts[l.id] >= 1]
    keep = set(eligible)
    rows = sorted(row for row in rows if row[2] in keep)
    return eligible, [(sid, sha) for sid, sha, _ in rows], [lid for _, _, lid in rows]


def train_project(
    store: ProjectStore,
    project_id: str,
    author: str,
    config: TrainingConfig = TrainingConfig(),
) -> ModelVersion:
    """Train on all live samples and re-classify the test set atomically.

    Rejects (does not queue) if a train is already running for the project.
    """
    live = store.get_live(project_id)
    with live.lock:
        if live.training:
            raise TrainingInProgressError(f"a train is already running for {project_id}")
        live.training = True
    try:
        started = time.monotonic()
        with live.lock:
            eligible, rows, row_labels = _training_snapshot(live.state)
        if len(eligible) < 2:
            raise TrainingPrerequisiteError(
                "training needs at least 2 live labels with at least 1 live sample each"
            )
        label_index = {label_id: i for i, label_id in enumerate(eligible)}
        x = np.stack([store.features_for(sha) for _, sha in rows])
        y = np.array([label_index[lid] for lid in row_labels], dtype=np.int64)
        mean, std = standardize_stats(x)
        fit = fit_softmax((x - mean) / std, y, len(eligible), config)

        with live.lock:
            state = live.state
            version = (state.current_model.version + 1) if state.current_model else 1
            model = ModelVersion(
                version=version,
                label_ids=eligible,
                mean=mean,
                std=std,
                weights=fit.weights,
                bias=fit.bias,
                trained_at=utc_now_iso(),
                train_sample_count=len(rows),
                learning_rate=config.learning_rate,
                epochs=config.epochs,
                l2_penalty=config.l2_penalty,
                lr_reductions=fit.lr_reductions,
            )
            reclassified = []
            for sample in state.live_test_samples():
                result = predict(model, store.features_for(sample.image_ref))
                reclassified.append(
                    {"sample_id": sample.id, "result": result.to_payload()}
                )
            store.apply(
                project_id,
                ev.MODEL_TRAINED,
                {"model": model.to_payload(), "reclassified": reclassified},
                author,
            )
            stored = live.state.current_model
        logger.info(
            "trained %s v%d on %d samples in %.2fs (%d test samples re-classified)",
            project_id,
            version,
            len(rows),
            time.monotonic() - started,
            len(reclassified),
        )
        assert stored is not None
        return stored
    finally:
        with live.lock:
            live.training = False


def gradient_check(
    weights: np.ndarray,
    bias: np.ndarray,
    x: np.ndarray,
    y: np.ndarray,
    l2_penalty: float = 1e-3,
    num_params: int = 50,
    step: float = 1e-5,
    seed: int = 0,
) -> float:
    """Max guarded relative error of analytic vs central-difference gradients.

    Samples ``num_params`` parameters (weights and bias together); per-entry
    error is |analytic - numeric| / max(|analytic|, |numeric|, 1e-4), the
    floor keeping finite-difference noise on near-zero gradients from
    registering as error.
    """
    if x.shape[0] > 20:
        raise ValidationFailure("gradient_check expects a small dataset (<= 20 samples)")
    _, grad_w, grad_b = loss_and_gradients(weights, bias, x, y, l2_penalty)
    analytic = np.concatenate([grad_w.reshape(-1), grad_b])
    total = analytic.shape[0]
    rng = np.random.default_rng(seed)
    picks = rng.choice(total, size=min(num_params, total), replace=False)

    w_size = weights.size
    worst = 0.0
    for flat in picks:
        w_plus, b_plus = weights.copy(), bias.copy()
        w_minus, b_minus = weights.copy(), bias.copy()
        if flat < w_size:
            idx = np.unravel_index(flat, weights.shape)
            w_plus[idx] += step
            w_minus[idx] -= step
        else:
            idx = flat - w_size
            b_plus[idx] += step
            b_minus[idx] -= step
        lo, _, _ = loss_and_gradients(w_minus, b_minus, x, y, l2_penalty)
        hi, _, _ = loss_and_gradients(w_plus, b_plus, x, y, l2_penalty)
        numeric = (hi - lo) / (2.0 * step)
        denom = max(abs(analytic[flat]), abs(numeric), 1e-4)
        worst = max(worst, abs(analytic[flat] - numeric) / denom)
    return worst
