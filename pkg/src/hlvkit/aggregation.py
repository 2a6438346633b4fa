"""Training targets built from disaggregated annotations, one per method."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MethodCompatibilityError, ValidationError
from .judgements import AnnotationSet, JudgementMatrix, build_judgements, harden_values

METHODS = (
    "ReL", "MV", "AR", "ARh", "AL", "SL", "SLMV", "AE", "AEh",
    "JSD", "SmF1", "SMF1", "LA-min", "LA-max",
)
NEEDS_ANNOTATOR_IDS = frozenset({"AR", "ARh", "AE", "AEh"})
MULTICLASS_ONLY = frozenset({"AL"})

Pair = tuple[int, frozenset[int]]


@dataclass(frozen=True)
class Disaggregated:
    """One (instance index, label set) pair per training example."""

    pairs: tuple[Pair, ...]
    n_instances: int
    K: int
    kind: str

    def grouped(self) -> list[list[frozenset[int]]]:
        out: list[list[frozenset[int]]] = [[] for _ in range(self.n_instances)]
        for i, labels in self.pairs:
            out[i].append(labels)
        return out


@dataclass(frozen=True)
class SoftRows:
    judgements: JudgementMatrix

    @property
    def kind(self) -> str:
        return self.judgements.kind

    @property
    def n_instances(self) -> int:
        return self.judgements.N

    @property
    def K(self) -> int:
        return self.judgements.K


@dataclass(frozen=True, eq=False)
class WeightedHard:
    """Hard labels with per-instance loss weights.

    ``labels`` is an int vector (multiclass) or a 0/1 N x K matrix (multilabel).
    """

    labels: np.ndarray
    weights: np.ndarray
    K: int
    kind: str

    def __post_init__(self) -> None:
        if np.any(self.weights < 0) or not np.all(np.isfinite(self.weights)):
            raise ValidationError("instance weights must be finite and non-negative")

    @property
    def n_instances(self) -> int:
        return len(self.weights)


@dataclass(frozen=True)
class PerAnnotator:
    annotators: tuple[str, ...]
    pairs: dict[str, tuple[Pair, ...]]
    n_instances: int
    K: int
    kind: str


@dataclass(frozen=True)
class MultiTask:
    soft: SoftRows
    hard: WeightedHard

    @property
    def kind(self) -> str:
        return self.soft.kind

    @property
    def n_instances(self) -> int:
        return self.soft.n_instances

    @property
    def K(self) -> int:
        return self.soft.K


MethodTarget = Disaggregated | SoftRows | WeightedHard | PerAnnotator | MultiTask


def labels_to_vector(labels: frozenset[int], K: int) -> np.ndarray:
    v = np.zeros(K)
    v[list(labels)] = 1.0
    return v


def _require_ids(annotations: AnnotationSet, method: str) -> None:
    if not annotations.has_annotator_ids:
        raise MethodCompatibilityError(f"{method} requires an annotator id on every record")


def _mv_labels(annotations: AnnotationSet) -> np.ndarray:
    P = build_judgements(annotations)
    hard = harden_values(P.values, P.kind)
    if P.kind == "multiclass":
        return hard.argmax(axis=1)
    return hard.astype(np.float64)


def target_rel(annotations: AnnotationSet) -> Disaggregated:
    pairs = tuple(
        (i, rec.labels) for i, inst in enumerate(annotations.instances) for rec in inst.records
    )
    space = annotations.space
    return Disaggregated(pairs, len(annotations.instances), space.K, space.task_kind)


def target_mv(annotations: AnnotationSet) -> WeightedHard:
    space = annotations.space
    labels = _mv_labels(annotations)
    return WeightedHard(labels, np.ones(len(annotations.instances)), space.K, space.task_kind)


def annotator_scores(annotations: AnnotationSet, hard: bool = False) -> dict[str, float]:
    """Reliability score per annotator, from agreement with the majority vote.

    With ``hard=False`` (AR) the score is the mean, over the instances where
    the annotator agrees with the majority, of the judgement value of the
    majority label.  With ``hard=True`` (ARh) it is the fraction of the
    annotator's instances on which they agree.  Annotators that never agree
    score 0.

    For multilabel data an annotator agrees when their label set contains
    every majority class; when the majority set is empty only an empty
    answer agrees, and its judgement value is the mean of ``1 - P_ik``.
    """
    _require_ids(annotations, "ARh" if hard else "AR")
    P = build_judgements(annotations).values
    multiclass = annotations.space.task_kind == "multiclass"
    mv = _mv_labels(annotations)

    agree_values: dict[str, list[float]] = {}
    n_seen: dict[str, int] = {}
    for i, inst in enumerate(annotations.instances):
        if multiclass:
            majority = frozenset({int(mv[i])})
            value = P[i, int(mv[i])]
        else:
            majority = frozenset(np.flatnonzero(mv[i]).tolist())
            value = P[i, sorted(majority)].mean() if majority else (1.0 - P[i]).mean()
        for rec in inst.records:
            a = rec.annotator_id
            n_seen[a] = n_seen.get(a, 0) + 1
            agree_values.setdefault(a, [])
            if majority:
                agrees = majority <= rec.labels
            else:
                agrees = not rec.labels
            if agrees:
                agree_values[a].append(float(value))

    scores: dict[str, float] = {}
    for a in annotations.annotators():
        vals = agree_values[a]
        if not vals:
            scores[a] = 0.0
        elif hard:
            scores[a] = len(vals) / n_seen[a]
        else:
            scores[a] = float(np.mean(vals))
    return scores


def target_ar(annotations: AnnotationSet, hard: bool = False) -> WeightedHard:
    """Majority labels weighted by the summed scores of each instance's annotators."""
    scores = annotator_scores(annotations, hard)
    weights = np.array(
        [sum(scores[r.annotator_id] for r in inst.records) for inst in annotations.instances]
    )
    space = annotations.space
    return WeightedHard(_mv_labels(annotations), weights, space.K, space.task_kind)


def target_al(annotations: AnnotationSet) -> Disaggregated:
    """Each distinct chosen class once per instance."""
    space = annotations.space
    if space.task_kind != "multiclass":
        raise MethodCompatibilityError("AL is defined for single-label (multiclass) tasks only")
    pairs: list[Pair] = []
    for i, inst in enumerate(annotations.instances):
        chosen = sorted({k for rec in inst.records for k in rec.labels})
        pairs.extend((i, frozenset({k})) for k in chosen)
    return Disaggregated(tuple(pairs), len(annotations.instances), space.K, space.task_kind)


def target_sl(annotations: AnnotationSet) -> SoftRows:
    return SoftRows(build_judgements(annotations))


def target_slmv(annotations: AnnotationSet) -> MultiTask:
    return MultiTask(target_sl(annotations), target_mv(annotations))


def target_per_annotator(annotations: AnnotationSet) -> PerAnnotator:
    _require_ids(annotations, "AE")
    pairs: dict[str, list[Pair]] = {a: [] for a in annotations.annotators()}
    for i, inst in enumerate(annotations.instances):
        for rec in inst.records:
            pairs[rec.annotator_id].append((i, rec.labels))
    space = annotations.space
    return PerAnnotator(
        tuple(pairs),
        {a: tuple(p) for a, p in pairs.items()},
        len(annotations.instances),
        space.K,
        space.task_kind,
    )


def check_compatible(method: str, annotations: AnnotationSet) -> None:
    if method not in METHODS:
        raise ValidationError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")
    if method in MULTICLASS_ONLY and annotations.space.task_kind != "multiclass":
        raise MethodCompatibilityError(
            f"{method} is defined for single-label (multiclass) tasks only"
        )
    if method in NEEDS_ANNOTATOR_IDS:
        _require_ids(annotations, method)


def build_target(method: str, annotations: AnnotationSet) -> MethodTarget:
    """The training target each method consumes."""
    check_compatible(method, annotations)
    if method in ("ReL", "LA-min", "LA-max"):
        return target_rel(annotations)
    if method == "MV":
        return target_mv(annotations)
    if method in ("AR", "ARh"):
        return target_ar(annotations, hard=method == "ARh")
    if method == "AL":
        return target_al(annotations)
    if method in ("SL", "JSD", "SmF1", "SMF1"):
        return target_sl(annotations)
    if method == "SLMV":
        return target_slmv(annotations)
    return target_per_annotator(annotations)
