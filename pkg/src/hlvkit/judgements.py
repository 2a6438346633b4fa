"""Disaggregated annotations, judgement matrices and their file formats."""

from __future__ import annotations

import json
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np

from .errors import ValidationError

TaskKind = Literal["multiclass", "multilabel"]
TASK_KINDS = ("multiclass", "multilabel")

ROW_SUM_TOL = 1e-9


def _check_kind(kind: str) -> None:
    if kind not in TASK_KINDS:
        raise ValidationError(f"task kind must be one of {TASK_KINDS}, got {kind!r}")


@dataclass(frozen=True)
class LabelSpace:
    classes: tuple[str, ...]
    task_kind: TaskKind

    def __post_init__(self) -> None:
        object.__setattr__(self, "classes", tuple(self.classes))
        _check_kind(self.task_kind)
        if len(self.classes) < 2:
            raise ValidationError("a label space needs at least 2 classes")
        if any(not isinstance(c, str) or not c for c in self.classes):
            raise ValidationError("class names must be non-empty strings")
        if len(set(self.classes)) != len(self.classes):
            raise ValidationError("class names must be unique")

    @property
    def K(self) -> int:
        return len(self.classes)

    def index(self, name: str) -> int:
        try:
            return self.classes.index(name)
        except ValueError:
            raise ValidationError(f"unknown class {name!r}") from None


@dataclass(frozen=True)
class Record:
    annotator_id: str | None
    labels: frozenset[int]


@dataclass(frozen=True)
class Instance:
    instance_id: str
    records: tuple[Record, ...]


@dataclass(frozen=True)
class AnnotationSet:
    """Per-instance annotator records, validated against a label space.

    Instance order is significant: row ``i`` of every matrix derived from the
    set corresponds to ``instances[i]``.
    """

    space: LabelSpace
    instances: tuple[Instance, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "instances", tuple(self.instances))
        if not self.instances:
            raise ValidationError("annotation set has no instances")
        seen_ids: set[str] = set()
        for inst in self.instances:
            if inst.instance_id in seen_ids:
                raise ValidationError(f"instance {inst.instance_id!r} appears twice")
            seen_ids.add(inst.instance_id)
            if not inst.records:
                raise ValidationError(f"instance {inst.instance_id!r} has no records")
            annotators: set[str] = set()
            for rec in inst.records:
                _check_record(rec, self.space, inst.instance_id)
                if rec.annotator_id is not None:
                    if rec.annotator_id in annotators:
                        raise ValidationError(
                            f"duplicate annotation by {rec.annotator_id!r} "
                            f"on instance {inst.instance_id!r}"
                        )
                    annotators.add(rec.annotator_id)

    @classmethod
    def from_records(
        cls,
        space: LabelSpace,
        rows: Iterable[tuple[str, str | None, Iterable[str]]],
    ) -> AnnotationSet:
        """Group ``(instance_id, annotator_id, class_names)`` rows by instance.

        Instances keep the order of their first appearance.
        """
        grouped: dict[str, list[Record]] = {}
        for instance_id, annotator_id, names in rows:
            labels = frozenset(space.index(n) for n in names)
            grouped.setdefault(instance_id, []).append(Record(annotator_id, labels))
        return cls(space, tuple(Instance(i, tuple(r)) for i, r in grouped.items()))

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(inst.instance_id for inst in self.instances)

    @property
    def n_records(self) -> int:
        return sum(len(inst.records) for inst in self.instances)

    @property
    def has_annotator_ids(self) -> bool:
        return all(r.annotator_id is not None for inst in self.instances for r in inst.records)

    def annotators(self) -> tuple[str, ...]:
        """Distinct annotator ids in order of first appearance."""
        out: dict[str, None] = {}
        for inst in self.instances:
            for rec in inst.records:
                if rec.annotator_id is not None:
                    out.setdefault(rec.annotator_id, None)
        return tuple(out)


def _check_record(rec: Record, space: LabelSpace, instance_id: str) -> None:
    if space.task_kind == "multiclass" and len(rec.labels) != 1:
        raise ValidationError(
            f"multiclass record on instance {instance_id!r} must carry exactly one "
            f"label, got {len(rec.labels)}"
        )
    for k in rec.labels:
        if not 0 <= k < space.K:
            raise ValidationError(f"label index {k} out of range for K={space.K}")


def _frozen(values: np.ndarray) -> np.ndarray:
    values = np.array(values, dtype=np.float64)
    values.setflags(write=False)
    return values


@dataclass(frozen=True, eq=False)
class JudgementMatrix:
    """N x K matrix of human judgements or model predictions in [0, 1]."""

    values: np.ndarray
    kind: TaskKind

    def __post_init__(self) -> None:
        _check_kind(self.kind)
        values = _frozen(self.values)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ValidationError(f"judgements must be a non-empty 2-D matrix, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValidationError("judgements must be finite")
        if values.min() < 0.0 or values.max() > 1.0:
            raise ValidationError("judgements must lie in [0, 1]")
        if self.kind == "multiclass":
            dev = np.abs(values.sum(axis=1) - 1.0)
            if dev.max() > ROW_SUM_TOL:
                row = int(dev.argmax())
                raise ValidationError(f"multiclass row {row} sums to {values[row].sum()!r}, not 1")
        object.__setattr__(self, "values", values)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, JudgementMatrix):
            return NotImplemented
        return self.kind == other.kind and np.array_equal(self.values, other.values)

    __hash__ = None  # type: ignore[assignment]

    @classmethod
    def multiclass(cls, values) -> JudgementMatrix:
        return cls(np.asarray(values, dtype=np.float64), "multiclass")

    @classmethod
    def multilabel(cls, values) -> JudgementMatrix:
        return cls(np.asarray(values, dtype=np.float64), "multilabel")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape  # type: ignore[return-value]

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @property
    def K(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class HardAssignment:
    values: np.ndarray
    kind: TaskKind

    def __post_init__(self) -> None:
        _check_kind(self.kind)
        values = np.array(self.values, dtype=np.int8)
        if self.kind == "multiclass" and not np.all(values.sum(axis=1) == 1):
            raise ValidationError("multiclass hard assignment needs exactly one 1 per row")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def as_judgements(self) -> JudgementMatrix:
        return JudgementMatrix(self.values.astype(np.float64), self.kind)


def harden_values(values: np.ndarray, kind: str) -> np.ndarray:
    """0/1 indicator matrix; argmax (lowest index on ties) or strict > 0.5."""
    if kind == "multiclass":
        out = np.zeros(values.shape, dtype=np.int8)
        # np.argmax returns the first maximal index
        out[np.arange(values.shape[0]), np.argmax(values, axis=1)] = 1
        return out
    return (values > 0.5).astype(np.int8)


def harden(M: JudgementMatrix) -> HardAssignment:
    return HardAssignment(harden_values(M.values, M.kind), M.kind)


def build_judgements(annotations: AnnotationSet, space: LabelSpace | None = None) -> JudgementMatrix:
    """Proportion of records per instance that select each class."""
    if space is not None and space != annotations.space:
        raise ValidationError("annotation set was built for a different label space")
    space = annotations.space
    counts = np.zeros((len(annotations.instances), space.K))
    totals = np.zeros(len(annotations.instances))
    for i, inst in enumerate(annotations.instances):
        for rec in inst.records:
            for k in rec.labels:
                counts[i, k] += 1.0
        totals[i] = len(inst.records)
    return JudgementMatrix(counts / totals[:, None], space.task_kind)


# --- file formats -----------------------------------------------------------


def read_manifest(path: str | Path) -> LabelSpace:
    """Load ``{"task": ..., "classes": [...]}``."""
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: malformed manifest: {exc}") from None
    if not isinstance(obj, dict) or "task" not in obj or "classes" not in obj:
        raise ValidationError(f"{path}: manifest needs 'task' and 'classes'")
    return LabelSpace(tuple(obj["classes"]), obj["task"])


def _iter_jsonl(path: str | Path) -> Iterable[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}:{lineno}: malformed line: {exc.msg}") from None
            if not isinstance(obj, dict):
                raise ValidationError(f"{path}:{lineno}: expected an object")
            yield lineno, obj


def read_annotations(path: str | Path, space: LabelSpace) -> AnnotationSet:
    """Parse a line-delimited annotation file into an :class:`AnnotationSet`."""
    grouped: dict[str, list[Record]] = {}
    seen: set[tuple[str, str]] = set()
    for lineno, obj in _iter_jsonl(path):
        where = f"{path}:{lineno}"
        instance_id = obj.get("instance_id")
        annotator_id = obj.get("annotator_id")
        labels = obj.get("labels")
        if not isinstance(instance_id, str):
            raise ValidationError(f"{where}: 'instance_id' must be a string")
        if annotator_id is not None and not isinstance(annotator_id, str):
            raise ValidationError(f"{where}: 'annotator_id' must be a string or null")
        if not isinstance(labels, list) or not all(isinstance(x, str) for x in labels):
            raise ValidationError(f"{where}: 'labels' must be an array of class names")
        try:
            idx = frozenset(space.index(x) for x in labels)
            rec = Record(annotator_id, idx)
            if len(idx) != len(labels):
                raise ValidationError("repeated class name in 'labels'")
            _check_record(rec, space, instance_id)
        except ValidationError as exc:
            raise ValidationError(f"{where}: {exc}") from None
        if annotator_id is not None:
            if (instance_id, annotator_id) in seen:
                raise ValidationError(
                    f"{where}: duplicate annotation by {annotator_id!r} on {instance_id!r}"
                )
            seen.add((instance_id, annotator_id))
        grouped.setdefault(instance_id, []).append(rec)
    if not grouped:
        raise ValidationError(f"{path}: no annotation records")
    return AnnotationSet(space, tuple(Instance(i, tuple(r)) for i, r in grouped.items()))


def read_instance_field(path: str | Path, field_name: str) -> dict[str, str]:
    """First value of ``field_name`` per instance, e.g. the text to classify."""
    out: dict[str, str] = {}
    for lineno, obj in _iter_jsonl(path):
        iid = obj.get("instance_id")
        if iid in out:
            continue
        value = obj.get(field_name)
        if not isinstance(value, str):
            raise ValidationError(f"{path}:{lineno}: field {field_name!r} must be a string")
        out[iid] = value
    return out


@dataclass(frozen=True, eq=False)
class IdentifiedJudgements:
    """A judgement matrix whose rows are labelled with instance ids."""

    ids: tuple[str, ...]
    matrix: JudgementMatrix = field(repr=False)

    def align(self, ids: Sequence[str]) -> JudgementMatrix:
        """Reorder rows to ``ids``; any missing or extra id is an error."""
        have = set(self.ids)
        want = set(ids)
        missing = [i for i in ids if i not in have]
        extra = [i for i in self.ids if i not in want]
        if missing or extra:
            raise ValidationError(f"instance ids do not align: missing={missing} extra={extra}")
        pos = {iid: n for n, iid in enumerate(self.ids)}
        return JudgementMatrix(self.matrix.values[[pos[i] for i in ids]], self.matrix.kind)


def read_judgements(path: str | Path, space: LabelSpace) -> IdentifiedJudgements:
    """Parse ``{"instance_id": ..., "judgements": {class: value}}`` lines.

    Classes missing from a line's map are read as 0.
    """
    ids: list[str] = []
    rows: list[np.ndarray] = []
    for lineno, obj in _iter_jsonl(path):
        where = f"{path}:{lineno}"
        iid = obj.get("instance_id")
        judg = obj.get("judgements")
        if not isinstance(iid, str):
            raise ValidationError(f"{where}: 'instance_id' must be a string")
        if iid in ids:
            raise ValidationError(f"{where}: instance {iid!r} appears twice")
        if not isinstance(judg, Mapping):
            raise ValidationError(f"{where}: 'judgements' must be an object")
        row = np.zeros(space.K)
        for name, value in judg.items():
            try:
                k = space.index(name)
            except ValidationError as exc:
                raise ValidationError(f"{where}: {exc}") from None
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ValidationError(f"{where}: judgement for {name!r} must be a number")
            row[k] = float(value)
        ids.append(iid)
        rows.append(row)
    if not rows:
        raise ValidationError(f"{path}: no judgement lines")
    try:
        matrix = JudgementMatrix(np.vstack(rows), space.task_kind)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from None
    return IdentifiedJudgements(tuple(ids), matrix)


def write_judgements(path: str | Path, ids: Sequence[str], M: JudgementMatrix, space: LabelSpace) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for iid, row in zip(ids, M.values):
            judg = {c: float(v) for c, v in zip(space.classes, row)}
            fh.write(json.dumps({"instance_id": iid, "judgements": judg}) + "\n")
