"""Hard and soft evaluation metrics for human label variation.

Public functions take two :class:`~hlvkit.judgements.JudgementMatrix` values,
the reference ``P`` and the prediction ``Q``.  The underscore-prefixed kernels
work on raw arrays and are shared with the losses and the analysis code.

All logarithms are base 2 and ``0 log 0 = 0``.  Any F1-style ratio whose
denominator is zero because both operands carry zero mass scores 1.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import UndefinedMetricError, ValidationError
from .judgements import JudgementMatrix, harden_values

# entropies closer than this are treated as identical (zero variance)
ENTROPY_FLAT_TOL = 1e-12


def _pair(P: JudgementMatrix, Q: JudgementMatrix, need: str | None = None) -> tuple[np.ndarray, np.ndarray]:
    if not isinstance(P, JudgementMatrix) or not isinstance(Q, JudgementMatrix):
        raise ValidationError("metrics take JudgementMatrix arguments")
    if P.kind != Q.kind:
        raise ValidationError(f"kind mismatch: {P.kind} vs {Q.kind}")
    if P.shape != Q.shape:
        raise ValidationError(f"shape mismatch: {P.shape} vs {Q.shape}")
    if need is not None and P.kind != need:
        raise ValidationError(f"metric is defined for {need} judgements, got {P.kind}")
    return P.values, Q.values


def _ratio(num, den):
    """``num / den`` with 0/0 -> 1, elementwise or scalar."""
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    out = np.ones(np.broadcast(num, den).shape)
    np.divide(num, den, out=out, where=den > 0)
    return out if out.ndim else float(out)


def _xlog2y(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    out = np.zeros(np.broadcast(x, y).shape)
    mask = x > 0
    np.multiply(x, np.log2(y, out=np.ones_like(out), where=mask), out=out, where=mask)
    return out


# --- kernels ----------------------------------------------------------------


def _jsd_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Base-2 Jensen-Shannon divergence between matching rows of ``a`` and ``b``."""
    m = 0.5 * (a + b)
    # m > 0 wherever a > 0 or b > 0, so the ratios below are finite
    kl_a = _xlog2y(a, np.divide(a, m, out=np.ones_like(m), where=m > 0)).sum(axis=-1)
    kl_b = _xlog2y(b, np.divide(b, m, out=np.ones_like(m), where=m > 0)).sum(axis=-1)
    return np.clip(0.5 * (kl_a + kl_b), 0.0, 1.0)


def jsd(a, b) -> float:
    """Base-2 JSD between two discrete distributions; lies in [0, 1]."""
    return float(_jsd_rows(np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)))


def _binary_expand(x: np.ndarray) -> np.ndarray:
    return np.stack([x, 1.0 - x], axis=-1)


def _norm_entropy(rows: np.ndarray) -> np.ndarray:
    """Entropy of each row divided by log2(K)."""
    return -_xlog2y(rows, rows).sum(axis=-1) / math.log2(rows.shape[-1])


def _corr_or_raise(x: np.ndarray, y: np.ndarray, what: str) -> float:
    zx = x - x.mean()
    zy = y - y.mean()
    if np.ptp(x) <= ENTROPY_FLAT_TOL or np.ptp(y) <= ENTROPY_FLAT_TOL:
        raise UndefinedMetricError(f"{what} is undefined: normalised entropies have zero variance")
    r = float(np.dot(zx, zy) / (np.sqrt(np.dot(zx, zx)) * np.sqrt(np.dot(zy, zy))))
    return min(1.0, max(-1.0, r))


def _hard_accuracy(p: np.ndarray, q: np.ndarray) -> float:
    return float((np.argmax(p, axis=1) == np.argmax(q, axis=1)).mean())


def _soft_accuracy(p: np.ndarray, q: np.ndarray) -> float:
    # row sums of exact simplex rows can round past 1
    return min(1.0, float(np.minimum(p, q).sum() / p.shape[0]))


def _po_jsd(p: np.ndarray, q: np.ndarray) -> float:
    return float(1.0 - _jsd_rows(p, q).mean())


def _entropy_correlation(p: np.ndarray, q: np.ndarray) -> float:
    return _corr_or_raise(_norm_entropy(p), _norm_entropy(q), "entropy correlation")


def _soft_micro_f1(p: np.ndarray, q: np.ndarray) -> float:
    return min(1.0, _ratio(2.0 * np.minimum(p, q).sum(), (p + q).sum()))


def _soft_macro_f1(p: np.ndarray, q: np.ndarray) -> float:
    per_class = _ratio(2.0 * np.minimum(p, q).sum(axis=0), (p + q).sum(axis=0))
    return min(1.0, float(np.mean(np.minimum(per_class, 1.0))))


# --- multiclass -------------------------------------------------------------


def hard_accuracy(P: JudgementMatrix, Q: JudgementMatrix) -> float:
    p, q = _pair(P, Q, "multiclass")
    return _hard_accuracy(p, q)


def hard_macro_f1(P: JudgementMatrix, Q: JudgementMatrix) -> float:
    """Class-averaged F1 of the hardened matrices.

    Multiclass hardens by argmax; multilabel by the > 0.5 threshold.
    """
    p, q = _pair(P, Q)
    ip = harden_values(p, P.kind).astype(np.float64)
    iq = harden_values(q, Q.kind).astype(np.float64)
    return float(np.mean(_ratio(2.0 * (ip * iq).sum(axis=0), (ip + iq).sum(axis=0))))


def soft_accuracy(P: JudgementMatrix, Q: JudgementMatrix) -> float:
    p, q = _pair(P, Q, "multiclass")
    return _soft_accuracy(p, q)


def soft_macro_f1(P: JudgementMatrix, Q: JudgementMatrix) -> float:
    p, q = _pair(P, Q)
    return _soft_macro_f1(p, q)


def po_jsd(P: JudgementMatrix, Q: JudgementMatrix) -> float:
    p, q = _pair(P, Q, "multiclass")
    return _po_jsd(p, q)


def entropy_correlation(P: JudgementMatrix, Q: JudgementMatrix) -> float:
    """Pearson correlation of per-row normalised entropies.

    Raises :class:`UndefinedMetricError` when either side has constant entropy.
    """
    p, q = _pair(P, Q, "multiclass")
    return _entropy_correlation(p, q)


# --- multilabel -------------------------------------------------------------


def hard_micro_f1(P: JudgementMatrix, Q: JudgementMatrix) -> float:
    p, q = _pair(P, Q, "multilabel")
    jp = (p > 0.5).astype(np.float64)
    jq = (q > 0.5).astype(np.float64)
    return _ratio(2.0 * (jp * jq).sum(), (jp + jq).sum())


def soft_micro_f1(P: JudgementMatrix, Q: JudgementMatrix) -> float:
    p, q = _pair(P, Q)
    return _soft_micro_f1(p, q)


def multilabel_po_jsd(P: JudgementMatrix, Q: JudgementMatrix) -> float:
    p, q = _pair(P, Q, "multilabel")
    return float(1.0 - _jsd_rows(_binary_expand(p), _binary_expand(q)).mean())


def multilabel_entropy_correlation(P: JudgementMatrix, Q: JudgementMatrix) -> float:
    p, q = _pair(P, Q, "multilabel")
    eta_p = _norm_entropy(_binary_expand(p))
    eta_q = _norm_entropy(_binary_expand(q))
    per_class = [
        _corr_or_raise(eta_p[:, k], eta_q[:, k], f"entropy correlation of class {k}")
        for k in range(p.shape[1])
    ]
    return float(np.mean(per_class))


def soft_class_prf(P: JudgementMatrix, Q: JudgementMatrix, k: int) -> tuple[float, float, float]:
    """Fuzzy-set precision, recall and F1 for class ``k``.

    Precision is 1 when the predicted column has no mass (nothing was
    predicted, so nothing was predicted wrongly); recall likewise for the
    reference column.
    """
    p, q = _pair(P, Q)
    if not 0 <= k < p.shape[1]:
        raise ValidationError(f"class index {k} out of range")
    overlap = np.minimum(p[:, k], q[:, k]).sum()
    precision = _ratio(overlap, q[:, k].sum())
    recall = _ratio(overlap, p[:, k].sum())
    f1 = _ratio(2.0 * overlap, (p[:, k] + q[:, k]).sum())
    return precision, recall, f1


# --- reports ----------------------------------------------------------------

MULTICLASS_METRICS = ("accuracy", "macro_f1", "soft_accuracy", "soft_macro_f1", "po_jsd", "entropy_correlation")
MULTILABEL_METRICS = ("micro_f1", "macro_f1", "soft_micro_f1", "soft_macro_f1", "po_jsd", "entropy_correlation")

# macro scores are left out of model selection
SELECTION_METRICS = {
    "multiclass": ("accuracy", "po_jsd", "entropy_correlation", "soft_accuracy"),
    "multilabel": ("micro_f1", "po_jsd", "entropy_correlation", "soft_micro_f1"),
}


@dataclass(frozen=True)
class MetricReport:
    values: dict[str, float | None]
    task_kind: str
    N: int
    K: int
    selection: float | None = field(default=None)

    @property
    def entropy_correlation_defined(self) -> bool:
        return self.values.get("entropy_correlation") is not None

    def __getitem__(self, name: str) -> float | None:
        return self.values[name]

    def to_dict(self) -> dict:
        out: dict = dict(self.values)
        out["entropy_correlation_defined"] = self.entropy_correlation_defined
        if self.selection is not None:
            out["selection_score"] = self.selection
        out.update(task=self.task_kind, N=self.N, K=self.K)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, obj: dict) -> MetricReport:
        names = MULTICLASS_METRICS if obj["task"] == "multiclass" else MULTILABEL_METRICS
        return cls(
            {n: obj[n] for n in names},
            obj["task"],
            int(obj["N"]),
            int(obj["K"]),
            obj.get("selection_score"),
        )


def compute_report(P: JudgementMatrix, Q: JudgementMatrix) -> MetricReport:
    """Every metric for the task kind, plus the selection score."""
    _pair(P, Q)
    if P.kind == "multiclass":
        funcs = {
            "accuracy": hard_accuracy,
            "macro_f1": hard_macro_f1,
            "soft_accuracy": soft_accuracy,
            "soft_macro_f1": soft_macro_f1,
            "po_jsd": po_jsd,
            "entropy_correlation": entropy_correlation,
        }
    else:
        funcs = {
            "micro_f1": hard_micro_f1,
            "macro_f1": hard_macro_f1,
            "soft_micro_f1": soft_micro_f1,
            "soft_macro_f1": soft_macro_f1,
            "po_jsd": multilabel_po_jsd,
            "entropy_correlation": multilabel_entropy_correlation,
        }
    values: dict[str, float | None] = {}
    for name, fn in funcs.items():
        try:
            values[name] = float(fn(P, Q))
        except UndefinedMetricError:
            values[name] = None
    report = MetricReport(values, P.kind, P.N, P.K)
    return MetricReport(values, P.kind, P.N, P.K, selection_score(report))


def selection_score(report: MetricReport) -> float:
    """Geometric mean of the non-macro metrics.

    Entropy correlation is mapped to [0, 1] via ``(e + 1) / 2``; when it is
    undefined it is left out (``report.entropy_correlation_defined`` is False).
    """
    vals = []
    for name in SELECTION_METRICS[report.task_kind]:
        v = report.values.get(name)
        if name == "entropy_correlation":
            if v is None:
                continue
            v = (v + 1.0) / 2.0
        if v is None:
            raise ValidationError(f"report lacks {name!r}")
        vals.append(v)
    vals_arr = np.asarray(vals)
    if np.any(vals_arr <= 0.0):
        return 0.0
    return float(np.exp(np.log(vals_arr).mean()))
