"""A small deterministic classifier and the training loop for every method."""

from __future__ import annotations

import json
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .aggregation import (
    METHODS,
    Disaggregated,
    MethodTarget,
    MultiTask,
    PerAnnotator,
    SoftRows,
    WeightedHard,
    labels_to_vector,
)
from .errors import TrainingError, ValidationError
from .judgements import JudgementMatrix, harden_values
from .metrics import MetricReport, compute_report
from .objectives import (
    LossValueGrad,
    ce_loss,
    jsd_loss,
    la_loss,
    probabilities,
    smacro_f1_loss,
    smf1_loss,
    soft_ce_loss,
)

MODEL_FORMAT = "hlvkit-model"
MODEL_VERSION = 1

_TARGET_TYPES = {
    "ReL": Disaggregated, "AL": Disaggregated, "LA-min": Disaggregated, "LA-max": Disaggregated,
    "MV": WeightedHard, "AR": WeightedHard, "ARh": WeightedHard,
    "SL": SoftRows, "JSD": SoftRows, "SmF1": SoftRows, "SMF1": SoftRows,
    "SLMV": MultiTask, "AE": PerAnnotator, "AEh": PerAnnotator,
}


# --- features ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FeatureSet:
    """N x D feature matrix, dense ndarray or scipy CSR."""

    matrix: np.ndarray | sp.csr_matrix

    def __post_init__(self) -> None:
        m = self.matrix
        if sp.issparse(m):
            m = sp.csr_matrix(m, dtype=np.float64)
            data = m.data
        else:
            m = np.asarray(m, dtype=np.float64)
            if m.ndim != 2:
                raise ValidationError(f"features must be 2-D, got shape {m.shape}")
            data = m
        if m.shape[1] < 1:
            raise ValidationError("features need at least one column")
        if not np.all(np.isfinite(data)):
            raise ValidationError("features must be finite")
        object.__setattr__(self, "matrix", m)

    @property
    def N(self) -> int:
        return self.matrix.shape[0]

    @property
    def D(self) -> int:
        return self.matrix.shape[1]

    def rows(self, idx) -> np.ndarray | sp.csr_matrix:
        return self.matrix[idx]


def _as_features(features) -> FeatureSet:
    return features if isinstance(features, FeatureSet) else FeatureSet(features)


def featurize_text(texts: Sequence[str], dims: int = 2**18) -> FeatureSet:
    """Signed feature hashing of lower-cased word tokens, L2-normalised rows."""
    from sklearn.feature_extraction.text import HashingVectorizer

    if dims < 1 or dims & (dims - 1):
        raise ValidationError(f"dims must be a power of two, got {dims}")
    texts = list(texts)
    if not texts:
        raise ValidationError("cannot featurize an empty corpus")
    vec = HashingVectorizer(
        n_features=dims,
        alternate_sign=True,
        norm="l2",
        lowercase=True,
        token_pattern=r"(?u)\b\w+\b",
    )
    return FeatureSet(vec.transform(texts).tocsr())


# --- model ------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    method: str
    lr: float | None = None
    batch_size: int = 32
    epochs: int = 10
    seed: int = 0
    hidden: int = 0
    share_encoder: bool = False

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValidationError(f"unknown method {self.method!r}")
        if self.lr is not None and not self.lr > 0:
            raise ValidationError("learning rate must be positive")
        if self.batch_size < 1 or self.epochs < 0 or self.hidden < 0:
            raise ValidationError("batch size must be >= 1, epochs and hidden size >= 0")
        if self.share_encoder and self.hidden == 0:
            raise ValidationError("a shared encoder needs a hidden layer (hidden > 0)")

    @property
    def learning_rate(self) -> float:
        if self.lr is not None:
            return self.lr
        return 5e-2 if self.hidden == 0 else 5e-3


@dataclass(eq=False)
class Model:
    """Optional ReLU encoder followed by one or more affine heads.

    ``head_roles`` is ``"single"``, ``"soft+mv"`` (head 0 soft, head 1
    majority) or ``"per-annotator"`` (one head per entry of ``annotators``).
    ``encoders`` is empty for a linear model, holds one encoder shared by all
    heads, or one encoder per head.
    """

    method: str
    kind: str
    K: int
    D: int
    head_roles: str
    heads: list[tuple[np.ndarray, np.ndarray]]
    encoders: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)
    annotators: tuple[str, ...] = field(default=())

    def encoder_index(self, j: int) -> int | None:
        if not self.encoders:
            return None
        return j if len(self.encoders) > 1 else 0

    def encode(self, X, j: int = 0) -> tuple[np.ndarray, np.ndarray | None]:
        """Hidden activations feeding head ``j`` and their pre-activations (None if linear)."""
        e = self.encoder_index(j)
        if e is None:
            return X, None
        W, b = self.encoders[e]
        pre = np.asarray(X @ W) + b
        return np.maximum(pre, 0.0), pre

    def head_logits(self, h, j: int) -> np.ndarray:
        W, b = self.heads[j]
        return np.asarray(h @ W) + b

    def parameters(self) -> list[np.ndarray]:
        return [a for pair in (*self.heads, *self.encoders) for a in pair]

    def to_dict(self) -> dict:
        def arr(a: np.ndarray) -> dict:
            return {"shape": list(a.shape), "values": a.ravel().tolist()}

        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "method": self.method,
            "kind": self.kind,
            "K": self.K,
            "D": self.D,
            "head_roles": self.head_roles,
            "annotators": list(self.annotators),
            "encoders": [[arr(W), arr(b)] for W, b in self.encoders],
            "heads": [[arr(W), arr(b)] for W, b in self.heads],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> Model:
        if obj.get("format") != MODEL_FORMAT or obj.get("version") != MODEL_VERSION:
            raise ValidationError("not a supported hlvkit model file")

        def arr(d: dict) -> np.ndarray:
            return np.array(d["values"], dtype=np.float64).reshape(d["shape"])

        return cls(
            method=obj["method"],
            kind=obj["kind"],
            K=int(obj["K"]),
            D=int(obj["D"]),
            head_roles=obj["head_roles"],
            heads=[(arr(W), arr(b)) for W, b in obj["heads"]],
            encoders=[(arr(W), arr(b)) for W, b in obj["encoders"]],
            annotators=tuple(obj["annotators"]),
        )


def save_model(model: Model, path: str | Path, extra: dict | None = None) -> None:
    obj = model.to_dict()
    if extra:
        obj["extra"] = extra
    Path(path).write_text(json.dumps(obj), encoding="utf-8")


def load_model(path: str | Path) -> tuple[Model, dict]:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    return Model.from_dict(obj), obj.get("extra", {})


def init_model(config: TrainConfig, kind: str, K: int, D: int, n_heads: int, head_roles: str,
               annotators: tuple[str, ...], rng: np.random.Generator) -> Model:
    encoders = []
    width = D
    if config.hidden > 0:
        # per-annotator heads keep separate encoders unless sharing is requested
        n_enc = n_heads if head_roles == "per-annotator" and not config.share_encoder else 1
        bound = 1.0 / np.sqrt(D)
        encoders = [
            (rng.uniform(-bound, bound, size=(D, config.hidden)), np.zeros(config.hidden))
            for _ in range(n_enc)
        ]
        width = config.hidden
    heads = [(np.zeros((width, K)), np.zeros(K)) for _ in range(n_heads)]
    return Model(config.method, kind, K, D, head_roles, heads, encoders, annotators)


# --- batch objectives -------------------------------------------------------

# A block is (head index, instance rows, dL/dlogits for those rows).
Block = tuple[int, np.ndarray, np.ndarray]


class _Objective:
    n_units: int

    def __call__(self, model: Model, X: FeatureSet, units: np.ndarray) -> tuple[float, list[Block]]:
        raise NotImplementedError


class _PairCE(_Objective):
    def __init__(self, target: Disaggregated):
        self.kind = target.kind
        self.rows = np.array([i for i, _ in target.pairs], dtype=np.intp)
        if target.kind == "multiclass":
            self.labels = np.array([next(iter(l)) for _, l in target.pairs], dtype=np.intp)
        else:
            self.labels = np.vstack([labels_to_vector(l, target.K) for _, l in target.pairs])
        self.n_units = len(self.rows)

    def __call__(self, model, X, units):
        rows = self.rows[units]
        h, _ = model.encode(X.rows(rows))
        res = ce_loss(model.head_logits(h, 0), self.labels[units], kind=self.kind)
        return res.value, [(0, rows, res.grad)]


class _LossAggregation(_Objective):
    def __init__(self, target: Disaggregated, mode: str):
        self.kind = target.kind
        self.mode = mode
        self.groups = target.grouped()
        self.n_units = target.n_instances

    def __call__(self, model, X, units):
        h, _ = model.encode(X.rows(units))
        res = la_loss(model.head_logits(h, 0), [self.groups[u] for u in units], self.mode, self.kind)
        return res.value, [(0, units, res.grad)]


class _WeightedCE(_Objective):
    def __init__(self, target: WeightedHard):
        self.target = target
        self.n_units = target.n_instances

    def __call__(self, model, X, units):
        h, _ = model.encode(X.rows(units))
        t = self.target
        res = ce_loss(model.head_logits(h, 0), t.labels[units], t.weights[units], kind=t.kind)
        return res.value, [(0, units, res.grad)]


_SOFT_LOSSES = {"SL": soft_ce_loss, "JSD": jsd_loss, "SmF1": smf1_loss, "SMF1": smacro_f1_loss}


class _Soft(_Objective):
    def __init__(self, target: SoftRows, method: str):
        self.P = target.judgements.values
        self.kind = target.kind
        self.loss = _SOFT_LOSSES[method]
        self.n_units = target.n_instances

    def __call__(self, model, X, units):
        h, _ = model.encode(X.rows(units))
        res: LossValueGrad = self.loss(model.head_logits(h, 0), self.P[units], kind=self.kind)
        return res.value, [(0, units, res.grad)]


class _SoftPlusMajority(_Objective):
    def __init__(self, target: MultiTask):
        self.P = target.soft.judgements.values
        self.labels = target.hard.labels
        self.kind = target.kind
        self.n_units = target.n_instances

    def __call__(self, model, X, units):
        h, _ = model.encode(X.rows(units))
        soft = soft_ce_loss(model.head_logits(h, 0), self.P[units], kind=self.kind)
        hard = ce_loss(model.head_logits(h, 1), self.labels[units], kind=self.kind)
        return soft.value + hard.value, [(0, units, soft.grad), (1, units, hard.grad)]


class _PerAnnotatorCE(_Objective):
    def __init__(self, target: PerAnnotator):
        self.kind = target.kind
        heads, rows, labels = [], [], []
        for j, a in enumerate(target.annotators):
            for i, l in target.pairs[a]:
                heads.append(j)
                rows.append(i)
                labels.append(next(iter(l)) if target.kind == "multiclass" else labels_to_vector(l, target.K))
        self.heads = np.array(heads, dtype=np.intp)
        self.rows = np.array(rows, dtype=np.intp)
        self.labels = np.array(labels, dtype=np.intp) if target.kind == "multiclass" else np.vstack(labels)
        self.n_units = len(self.rows)

    def __call__(self, model, X, units):
        B = len(units)
        value = 0.0
        blocks: list[Block] = []
        for j in np.unique(self.heads[units]):
            sel = units[self.heads[units] == j]
            rows = self.rows[sel]
            h, _ = model.encode(X.rows(rows), j)
            res = ce_loss(model.head_logits(h, j), self.labels[sel], kind=self.kind, reduction="sum")
            value += res.value
            blocks.append((int(j), rows, res.grad / B))
        return value / B, blocks


def _objective(target: MethodTarget, method: str) -> _Objective:
    expected = _TARGET_TYPES[method]
    if not isinstance(target, expected):
        raise ValidationError(f"{method} trains on a {expected.__name__} target, got {type(target).__name__}")
    if method in ("ReL", "AL"):
        return _PairCE(target)
    if method in ("LA-min", "LA-max"):
        return _LossAggregation(target, method[3:])
    if method in ("MV", "AR", "ARh"):
        return _WeightedCE(target)
    if method == "SLMV":
        return _SoftPlusMajority(target)
    if method in ("AE", "AEh"):
        return _PerAnnotatorCE(target)
    return _Soft(target, method)


def _sgd_step(model: Model, X: FeatureSet, blocks: list[Block], lr: float) -> None:
    head_grads = [(np.zeros_like(W), np.zeros_like(b)) for W, b in model.heads]
    enc_grads = [(np.zeros_like(W), np.zeros_like(b)) for W, b in model.encoders]
    for j, rows, g in blocks:
        x = X.rows(rows)
        h, pre = model.encode(x, j)
        gW, gb = head_grads[j]
        gW += np.asarray(h.T @ g)
        gb += g.sum(axis=0)
        e = model.encoder_index(j)
        if e is not None:
            # gradients are taken before any parameter moves
            dpre = (g @ model.heads[j][0].T) * (pre > 0)
            enc_grads[e][0][...] += np.asarray(x.T @ dpre)
            enc_grads[e][1][...] += dpre.sum(axis=0)
    for (W, b), (gW, gb) in zip((*model.heads, *model.encoders), (*head_grads, *enc_grads)):
        W -= lr * gW
        b -= lr * gb


def train(target: MethodTarget, features, config: TrainConfig) -> Model:
    """Mini-batch SGD on the method's loss; deterministic given ``config.seed``."""
    X = _as_features(features)
    if X.N != target.n_instances:
        raise ValidationError(f"features have {X.N} rows but the target has {target.n_instances} instances")
    objective = _objective(target, config.method)
    rng = np.random.default_rng(config.seed)
    if isinstance(target, PerAnnotator):
        n_heads, roles, annotators = len(target.annotators), "per-annotator", target.annotators
    elif isinstance(target, MultiTask):
        n_heads, roles, annotators = 2, "soft+mv", ()
    else:
        n_heads, roles, annotators = 1, "single", ()
    model = init_model(config, target.kind, target.K, X.D, n_heads, roles, annotators, rng)

    lr = config.learning_rate
    # overflow is detected explicitly below and reported as a TrainingError
    with np.errstate(over="ignore", invalid="ignore"):
        _run_epochs(model, objective, X, config, rng)
    if not all(np.all(np.isfinite(p)) for p in model.parameters()):
        raise TrainingError(f"{config.method}: parameters diverged (lr={lr})")
    return model


def _run_epochs(model: Model, objective: _Objective, X: FeatureSet, config: TrainConfig,
                rng: np.random.Generator) -> None:
    lr = config.learning_rate
    for epoch in range(config.epochs):
        order = rng.permutation(objective.n_units)
        for start in range(0, objective.n_units, config.batch_size):
            units = order[start : start + config.batch_size]
            value, blocks = objective(model, X, units)
            if not np.isfinite(value) or not all(np.all(np.isfinite(g)) for _, _, g in blocks):
                raise TrainingError(
                    f"{config.method}: non-finite loss {value!r} at epoch {epoch}, "
                    f"batch starting at {start} (lr={lr}, batch_size={config.batch_size})"
                )
            _sgd_step(model, X, blocks, lr)


# --- inference --------------------------------------------------------------


def ensemble(predictions: Sequence[JudgementMatrix], mode: str = "mean") -> JudgementMatrix:
    """Combine per-annotator predictions.

    ``mean`` averages cell-wise; ``hard`` takes the fraction of annotators
    whose hardened prediction selects each class.
    """
    if not predictions:
        raise ValidationError("ensemble needs at least one prediction")
    kind = predictions[0].kind
    if any(p.kind != kind or p.shape != predictions[0].shape for p in predictions):
        raise ValidationError("ensembled predictions must share kind and shape")
    stack = np.stack([p.values for p in predictions])
    if mode == "mean":
        return JudgementMatrix(stack.mean(axis=0), kind)
    if mode == "hard":
        hard = np.stack([harden_values(v, kind) for v in stack]).astype(np.float64)
        return JudgementMatrix(hard.mean(axis=0), kind)
    raise ValidationError(f"ensemble mode must be 'mean' or 'hard', got {mode!r}")


def predict(model: Model, features) -> JudgementMatrix:
    X = _as_features(features)
    if X.D != model.D:
        raise ValidationError(f"model expects {model.D} features, got {X.D}")
    if model.head_roles == "per-annotator":
        per = [
            JudgementMatrix(probabilities(model.head_logits(model.encode(X.matrix, j)[0], j), model.kind), model.kind)
            for j in range(len(model.heads))
        ]
        return ensemble(per, "hard" if model.method == "AEh" else "mean")
    h, _ = model.encode(X.matrix)
    q = probabilities(model.head_logits(h, 0), model.kind)
    return JudgementMatrix(q, model.kind)


def evaluate_model(model: Model, features, reference: JudgementMatrix) -> MetricReport:
    return compute_report(reference, predict(model, features))
