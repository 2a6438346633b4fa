"""Training losses with exact gradients with respect to the logits.

Predicted probabilities are ``softmax(logits)`` row-wise for multiclass tasks
and ``sigmoid(logits)`` cell-wise for multilabel tasks.  Cross-entropy style
losses are in nats; the JSD and soft-metric losses are in bits / unitless,
matching the evaluation metrics they mirror.

Log-probabilities are computed in log space and floored at ``log(EPS)``;
a floored term contributes no gradient.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .metrics import _jsd_rows, _soft_accuracy, _soft_macro_f1, _soft_micro_f1, _xlog2y

EPS = 1e-12
LOG_EPS = math.log(EPS)
_LN2 = math.log(2.0)


@dataclass(frozen=True, eq=False)
class LossValueGrad:
    value: float
    grad: np.ndarray


def softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(z: np.ndarray) -> np.ndarray:
    s = z - z.max(axis=-1, keepdims=True)
    return s - np.log(np.exp(s).sum(axis=-1, keepdims=True))


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    e = np.exp(z[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def log_sigmoid(z: np.ndarray) -> np.ndarray:
    return -np.logaddexp(0.0, -z)


def probabilities(logits: np.ndarray, kind: str) -> np.ndarray:
    return softmax(logits) if kind == "multiclass" else sigmoid(logits)


def _check_logits(logits: np.ndarray, kind: str) -> np.ndarray:
    if kind not in ("multiclass", "multilabel"):
        raise ValidationError(f"unknown task kind {kind!r}")
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim != 2 or z.shape[0] < 1:
        raise ValidationError(f"logits must be a B x K matrix with B >= 1, got {z.shape}")
    return z


def _check_targets(z: np.ndarray, targets, what: str) -> np.ndarray:
    t = np.asarray(targets, dtype=np.float64)
    if t.shape != z.shape:
        raise ValidationError(f"{what} shape {t.shape} does not match logits {z.shape}")
    return t


def _reduce(per_row: np.ndarray, grad: np.ndarray, reduction: str) -> LossValueGrad:
    if reduction == "mean":
        B = per_row.shape[0]
        return LossValueGrad(float(per_row.sum() / B), grad / B)
    if reduction == "sum":
        return LossValueGrad(float(per_row.sum()), grad)
    raise ValidationError(f"reduction must be 'mean' or 'sum', got {reduction!r}")


def _chain(g: np.ndarray, z: np.ndarray, q: np.ndarray, kind: str) -> np.ndarray:
    """Map dL/dq to dL/dlogits through softmax or sigmoid."""
    if kind == "multiclass":
        return q * (g - (q * g).sum(axis=-1, keepdims=True))
    return g * q * sigmoid(-z)


# --- cross-entropy family ---------------------------------------------------


def _categorical_ce(z: np.ndarray, target: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-row ``-sum_k t_k log q_k`` and its per-row logit gradient."""
    logq = log_softmax(z)
    live = logq > LOG_EPS
    logq_c = np.where(live, logq, LOG_EPS)
    value = -(target * logq_c).sum(axis=1)
    tm = target * live
    grad = -tm + np.exp(logq) * tm.sum(axis=1, keepdims=True)
    return value, grad


def _binary_ce(z: np.ndarray, target: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-row summed cell-wise binary CE and its logit gradient."""
    lp = log_sigmoid(z)
    ln = log_sigmoid(-z)
    live_p = lp > LOG_EPS
    live_n = ln > LOG_EPS
    value = -(target * np.where(live_p, lp, LOG_EPS) + (1.0 - target) * np.where(live_n, ln, LOG_EPS))
    grad = -target * live_p * np.exp(ln) + (1.0 - target) * live_n * np.exp(lp)
    return value.sum(axis=1), grad


def _ce(z: np.ndarray, target: np.ndarray, kind: str) -> tuple[np.ndarray, np.ndarray]:
    return _categorical_ce(z, target) if kind == "multiclass" else _binary_ce(z, target)


def _hard_target(z: np.ndarray, labels, kind: str) -> np.ndarray:
    if kind == "multiclass":
        y = np.asarray(labels)
        if y.shape != (z.shape[0],) or not np.issubdtype(y.dtype, np.integer):
            raise ValidationError("multiclass labels must be an integer vector of length B")
        if y.min() < 0 or y.max() >= z.shape[1]:
            raise ValidationError("label index out of range")
        t = np.zeros_like(z)
        t[np.arange(z.shape[0]), y] = 1.0
        return t
    return _check_targets(z, labels, "labels")


def ce_loss(logits, labels, weights=None, kind: str = "multiclass", reduction: str = "mean") -> LossValueGrad:
    """Weighted cross-entropy on hard labels.

    ``labels`` is an int vector (multiclass) or a 0/1 B x K matrix
    (multilabel).  A zero weight removes the instance from value and gradient.
    """
    z = _check_logits(logits, kind)
    t = _hard_target(z, labels, kind)
    w = np.ones(z.shape[0]) if weights is None else np.asarray(weights, dtype=np.float64)
    if w.shape != (z.shape[0],) or np.any(w < 0):
        raise ValidationError("weights must be a non-negative vector of length B")
    value, grad = _ce(z, t, kind)
    return _reduce(w * value, w[:, None] * grad, reduction)


def soft_ce_loss(logits, targets, kind: str = "multiclass", reduction: str = "mean") -> LossValueGrad:
    z = _check_logits(logits, kind)
    value, grad = _ce(z, _check_targets(z, targets, "targets"), kind)
    return _reduce(value, grad, reduction)


def _label_set_vector(labels, K: int, kind: str) -> np.ndarray:
    v = np.zeros(K)
    idx = list(labels)
    if kind == "multiclass" and len(idx) != 1:
        raise ValidationError("multiclass annotations carry exactly one label")
    v[idx] = 1.0
    return v


def _aggregated_ce(z: np.ndarray, annotations: Sequence[Sequence], kind: str, mode: str, reduction: str) -> LossValueGrad:
    if len(annotations) != z.shape[0]:
        raise ValidationError("need one annotation list per logit row")
    B, K = z.shape
    values = np.empty(B)
    grad = np.zeros_like(z)
    for i, anns in enumerate(annotations):
        if len(anns) == 0:
            raise ValidationError(f"instance {i} has no annotations")
        t = np.vstack([_label_set_vector(a, K, kind) for a in anns])
        zi = np.repeat(z[i : i + 1], len(anns), axis=0)
        v, g = _ce(zi, t, kind)
        if mode == "mean":
            values[i] = v.mean()
            grad[i] = g.mean(axis=0)
            continue
        # argmin/argmax return the lowest index on ties
        j = int(np.argmin(v) if mode == "min" else np.argmax(v))
        values[i] = v[j]
        grad[i] = g[j]
    return _reduce(values, grad, reduction)


def la_loss(logits, annotations: Sequence[Sequence], mode: str, kind: str = "multiclass", reduction: str = "mean") -> LossValueGrad:
    """Per-instance min or max of the per-annotation cross-entropies.

    ``annotations[i]`` lists the label sets given to instance ``i``.  The
    gradient flows only through the selected annotation.
    """
    if mode not in ("min", "max"):
        raise ValidationError(f"mode must be 'min' or 'max', got {mode!r}")
    return _aggregated_ce(_check_logits(logits, kind), annotations, kind, mode, reduction)


def slmv_loss(soft_logits, hard_logits, targets, labels, kind: str = "multiclass") -> LossValueGrad:
    """Soft-label CE on the first head plus majority-label CE on the second.

    ``grad`` has shape ``(2, B, K)``: one slice per head.
    """
    soft = soft_ce_loss(soft_logits, targets, kind)
    hard = ce_loss(hard_logits, labels, kind=kind)
    return LossValueGrad(soft.value + hard.value, np.stack([soft.grad, hard.grad]))


# --- metric-derived losses --------------------------------------------------


def jsd_loss(logits, targets, kind: str = "multiclass") -> LossValueGrad:
    """Mean base-2 JSD between targets and predictions.

    Multilabel: mean over cells of the JSD between ``[P, 1-P]`` and ``[q, 1-q]``.
    """
    z = _check_logits(logits, kind)
    p = _check_targets(z, targets, "targets")
    q = probabilities(z, kind)
    if kind == "multiclass":
        value = _jsd_rows(p, q).mean()
        qc = np.maximum(q, EPS)
        g = 0.5 * np.log2(qc / (0.5 * (p + qc)))
        return LossValueGrad(float(value), _chain(g, z, q, kind) / z.shape[0])
    qn = sigmoid(-z)
    value = _jsd_rows(np.stack([p, 1.0 - p], -1), np.stack([q, qn], -1)).mean()
    qc = np.maximum(q, EPS)
    qnc = np.maximum(qn, EPS)
    g = 0.5 * (np.log2(qc / (0.5 * (p + qc))) - np.log2(qnc / (0.5 * (1.0 - p + qnc))))
    return LossValueGrad(float(value), _chain(g, z, q, kind) / z.size)


def _min_selects_q(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    # ties route the subgradient to the prediction
    return (q <= p).astype(np.float64)


def smf1_loss(logits, targets, kind: str = "multiclass") -> LossValueGrad:
    """``1 - soft accuracy`` (multiclass) or ``1 - soft micro F1`` (multilabel), over the batch."""
    z = _check_logits(logits, kind)
    p = _check_targets(z, targets, "targets")
    q = probabilities(z, kind)
    sel = _min_selects_q(p, q)
    if kind == "multiclass":
        value = 1.0 - _soft_accuracy(p, q)
        g = -sel / z.shape[0]
        return LossValueGrad(float(value), _chain(g, z, q, kind))
    S = np.minimum(p, q).sum()
    T = (p + q).sum()
    if T <= 0:
        return LossValueGrad(0.0, np.zeros_like(z))
    g = -2.0 * (sel * T - S) / T**2
    return LossValueGrad(float(1.0 - _soft_micro_f1(p, q)), _chain(g, z, q, kind))


def smacro_f1_loss(logits, targets, kind: str = "multiclass") -> LossValueGrad:
    """``1 - soft macro F1`` over the batch; an all-zero class costs nothing."""
    z = _check_logits(logits, kind)
    p = _check_targets(z, targets, "targets")
    q = probabilities(z, kind)
    S = np.minimum(p, q).sum(axis=0)
    T = (p + q).sum(axis=0)
    live = T > 0
    Tl = np.where(live, T, 1.0)
    K = z.shape[1]
    g = np.where(live, -2.0 * (_min_selects_q(p, q) * Tl - S) / Tl**2, 0.0) / K
    return LossValueGrad(float(1.0 - _soft_macro_f1(p, q)), _chain(g, z, q, kind))


def entropy(targets, kind: str = "multiclass") -> float:
    """Mean target entropy in nats; the minimum of :func:`soft_ce_loss`."""
    p = np.asarray(targets, dtype=np.float64)
    if kind == "multiclass":
        return float(-(_xlog2y(p, p).sum(axis=1)).mean() * _LN2)
    h = _xlog2y(p, p) + _xlog2y(1.0 - p, 1.0 - p)
    return float(-h.sum(axis=1).mean() * _LN2)
