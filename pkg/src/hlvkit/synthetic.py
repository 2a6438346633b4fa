"""Seeded synthetic annotation corpora with feature-determined judgements."""

from __future__ import annotations

import numpy as np

from .judgements import AnnotationSet, Instance, LabelSpace, Record


def synthetic_corpus(
    n: int = 500,
    annotators: int = 5,
    d: int = 10,
    K: int = 2,
    kind: str = "multiclass",
    mode: str = "threshold",
    spread: float = 0.5,
    seed: int = 0,
    annotators_per_instance: int | None = None,
) -> tuple[AnnotationSet, np.ndarray]:
    """Annotations plus the N x d Gaussian features that generated them.

    Class scores are a fixed linear function of the features.  In
    ``threshold`` mode annotator ``j`` adds its own offset to the scores and
    answers deterministically (argmax, or score > 0 for multilabel); offsets
    span ``[-spread, spread]`` so disagreement concentrates near decision
    boundaries.  In ``sampled`` mode every annotator draws from
    softmax/sigmoid of the scores, so the expected judgements are a logistic
    function of the features.
    """
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    W = rng.standard_normal((d, K)) / np.sqrt(d) * 2.0
    scores = X @ W
    if kind == "multiclass" and K == 2:
        scores[:, 0] = 0.0  # single decision boundary, class 1 iff score > 0
    offsets = np.linspace(-spread, spread, annotators)
    space = LabelSpace(tuple(f"c{k}" for k in range(K)), kind)
    ids = [f"a{j}" for j in range(annotators)]

    instances = []
    for i in range(n):
        who = range(annotators)
        if annotators_per_instance is not None:
            who = sorted(rng.choice(annotators, size=annotators_per_instance, replace=False))
        records = []
        for j in who:
            s = scores[i].copy()
            if mode == "threshold":
                if kind == "multiclass":
                    s[-1] += offsets[j]
                    labels = {int(np.argmax(s))}
                else:
                    labels = set(np.flatnonzero(s + offsets[j] > 0).tolist())
            elif kind == "multiclass":
                p = np.exp(s - s.max())
                labels = {int(rng.choice(K, p=p / p.sum()))}
            else:
                labels = set(np.flatnonzero(rng.random(K) < 1.0 / (1.0 + np.exp(-s))).tolist())
            records.append(Record(ids[j], frozenset(labels)))
        instances.append(Instance(f"x{i}", tuple(records)))
    return AnnotationSet(space, tuple(instances)), X
