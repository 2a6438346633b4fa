"""Metric correlation study, the soft accuracy / PO-JSD bound, and
rank-centrality meta-evaluation against human preferences."""

from __future__ import annotations

import itertools
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import ConvergenceError, UndefinedMetricError, ValidationError
from .metrics import _entropy_correlation, _hard_accuracy, _po_jsd, _soft_accuracy

METRIC_CODES = ("A", "J", "E", "S")  # accuracy, PO-JSD, entropy correlation, soft accuracy
METRIC_PAIRS = tuple(f"{a}-{b}" for a, b in itertools.combinations(METRIC_CODES, 2))

TABLE2_SETTINGS = tuple(
    (K, a, b) for (a, b) in ((10.0, 10.0), (0.1, 0.1), (10.0, 0.1), (0.1, 10.0)) for K in (10, 100)
)


# --- correlation coefficients ----------------------------------------------


def _check_xy(xs, ys) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.ndim != 1 or x.shape != y.shape:
        raise ValidationError("xs and ys must be 1-D sequences of equal length")
    if len(x) < 3:
        raise ValidationError("need at least 3 points")
    return x, y


def pearson(xs, ys) -> float:
    x, y = _check_xy(xs, ys)
    zx = x - x.mean()
    zy = y - y.mean()
    sx = np.sqrt(np.dot(zx, zx))
    sy = np.sqrt(np.dot(zy, zy))
    if sx == 0 or sy == 0:
        raise UndefinedMetricError("Pearson correlation is undefined for a constant sequence")
    return float(np.clip(np.dot(zx, zy) / (sx * sy), -1.0, 1.0))


def permutation_pvalue(xs, ys, permutations: int = 10_000, seed: int = 0) -> float:
    """Two-sided permutation p-value of the Pearson correlation.

    Counts shuffles with ``|r| >= |r_obs|``, with the observed pairing added
    to both numerator and denominator.
    """
    x, y = _check_xy(xs, ys)
    r_obs = pearson(x, y)
    if permutations < 1:
        raise ValidationError("permutations must be >= 1")
    rng = np.random.default_rng(seed)
    shuffled = rng.permuted(np.tile(y, (permutations, 1)), axis=1)
    zx = x - x.mean()
    zy = shuffled - shuffled.mean(axis=1, keepdims=True)
    r = (zy @ zx) / (np.sqrt((zy**2).sum(axis=1)) * np.sqrt(zx @ zx))
    hits = int(np.count_nonzero(np.abs(r) >= abs(r_obs) - 1e-12))
    return (hits + 1) / (permutations + 1)


# --- Dirichlet metric study -------------------------------------------------


@dataclass(frozen=True)
class StudyConfig:
    K: int
    alpha: float
    beta: float
    N: int = 1000
    B: int = 500
    seed: int = 0

    def __post_init__(self) -> None:
        if self.K < 2 or self.N < 1 or self.B < 3:
            raise ValidationError("need K >= 2, N >= 1 and B >= 3")
        if not (self.alpha > 0 and self.beta > 0):
            raise ValidationError("Dirichlet parameters must be positive")


@dataclass(frozen=True, eq=False)
class StudyResult:
    config: StudyConfig
    correlations: dict[str, float]
    samples: dict[str, np.ndarray] = field(repr=False)
    dropped: int = 0


def sample_dirichlet(rng: np.random.Generator, concentration: float, N: int, K: int) -> np.ndarray:
    """Rows from a symmetric Dirichlet via normalised Gamma draws."""
    g = rng.standard_gamma(concentration, size=(N, K))
    s = g.sum(axis=1)
    while np.any(s == 0):  # every component underflowed; redraw those rows
        bad = s == 0
        g[bad] = rng.standard_gamma(concentration, size=(int(bad.sum()), K))
        s = g.sum(axis=1)
    return g / s[:, None]


def metric_sample(p: np.ndarray, q: np.ndarray) -> dict[str, float]:
    """Accuracy, PO-JSD, entropy correlation and soft accuracy of one pair.

    Entropy correlation is NaN when undefined.
    """
    try:
        e = _entropy_correlation(p, q)
    except UndefinedMetricError:
        e = float("nan")
    return {"A": _hard_accuracy(p, q), "J": _po_jsd(p, q), "E": e, "S": _soft_accuracy(p, q)}


def dirichlet_metric_correlations(config: StudyConfig) -> StudyResult:
    """Pearson correlation between every pair of metrics over ``B`` random (P, Q).

    Sample ``b`` uses the RNG stream ``(seed, b)``, so results do not depend
    on evaluation order.  Samples with undefined entropy correlation are
    dropped and counted.
    """
    values = {c: np.empty(config.B) for c in METRIC_CODES}
    for b in range(config.B):
        rng = np.random.default_rng([config.seed, b])
        p = sample_dirichlet(rng, config.alpha, config.N, config.K)
        q = sample_dirichlet(rng, config.beta, config.N, config.K)
        for c, v in metric_sample(p, q).items():
            values[c][b] = v
    keep = np.isfinite(values["E"])
    kept = {c: v[keep] for c, v in values.items()}
    corr = {}
    for pair in METRIC_PAIRS:
        a, b = pair.split("-")
        try:
            corr[pair] = pearson(kept[a], kept[b])
        except (UndefinedMetricError, ValidationError):
            # constant metric, or fewer than three usable samples
            corr[pair] = float("nan")
    return StudyResult(config, corr, values, int((~keep).sum()))


# --- soft accuracy <= PO-JSD ------------------------------------------------


def _as_tuple(v: int | Sequence[int]) -> tuple[int, ...]:
    return (int(v),) if np.isscalar(v) else tuple(int(x) for x in v)


def verify_bound(trials: int, N: int | Sequence[int] = (1, 10, 100),
                 K: int | Sequence[int] = (2, 3, 10), seed: int = 0) -> float:
    """Largest ``soft_accuracy - po_jsd`` over random multiclass pairs.

    Trials cycle through every (N, K) combination.  Row concentrations are
    drawn log-uniformly so both near one-hot and near uniform rows occur.
    Non-positive whenever the bound holds.
    """
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    shapes = list(itertools.product(_as_tuple(N), _as_tuple(K)))
    worst = -np.inf
    for t in range(trials):
        n, k = shapes[t % len(shapes)]
        rng = np.random.default_rng([seed, t])
        a, b = 10.0 ** rng.uniform(-2.0, 1.5, size=2)
        p = sample_dirichlet(rng, a, n, k)
        q = p.copy() if t % 97 == 0 else sample_dirichlet(rng, b, n, k)
        worst = max(worst, _soft_accuracy(p, q) - _po_jsd(p, q))
    return float(worst)


def sa_pojsd_curve(steps: int = 101) -> list[tuple[float, float, float]]:
    """(q, soft accuracy, PO-JSD) for P = (0.5, 0.5) against Q = (q, 1 - q)."""
    if steps < 2:
        raise ValidationError("steps must be >= 2")
    p = np.array([[0.5, 0.5]])
    out = []
    for q in np.linspace(0.0, 1.0, steps):
        qq = np.array([[q, 1.0 - q]])
        out.append((float(q), _soft_accuracy(p, qq), _po_jsd(p, qq)))
    return out


# --- rank centrality --------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ComparisonGraph:
    """Pairwise outcomes among methods.

    ``counts[i, j]`` is the number of judgements in which method ``j`` won
    over method ``i``; ``totals[i, j]`` the number of judgements of the pair.
    """

    methods: tuple[str, ...]
    counts: np.ndarray
    totals: np.ndarray

    def __post_init__(self) -> None:
        M = len(self.methods)
        counts = np.array(self.counts, dtype=np.float64)
        totals = np.array(self.totals, dtype=np.float64)
        if len(set(self.methods)) != M:
            raise ValidationError("method names must be unique")
        if counts.shape != (M, M) or totals.shape != (M, M):
            raise ValidationError("counts and totals must be M x M")
        if np.any(counts < 0) or np.any(totals < 0):
            raise ValidationError("counts and totals must be non-negative")
        if np.any(counts > totals):
            raise ValidationError("counts cannot exceed totals")
        if np.any(np.diag(counts) != 0) or np.any(np.diag(totals) != 0):
            raise ValidationError("a method cannot be compared with itself")
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "totals", totals)

    def win_probabilities(self) -> np.ndarray:
        p = np.zeros_like(self.counts)
        np.divide(self.counts, self.totals, out=p, where=self.totals > 0)
        return p

    def transition_matrix(self) -> np.ndarray:
        compared = self.totals > 0
        d_max = int(compared.sum(axis=1).max()) if len(self.methods) > 1 else 0
        T = np.zeros_like(self.counts)
        if d_max:
            T = self.win_probabilities() / d_max
        np.fill_diagonal(T, 0.0)
        np.fill_diagonal(T, 1.0 - T.sum(axis=1))
        return T


def wins_from_preferences(records: Iterable, methods: Sequence[str] | None = None,
                          exclusive_ties: bool = False) -> ComparisonGraph:
    """Build a comparison graph from pairwise selections.

    Each record is a mapping with ``first``, ``second`` and ``choice`` (one of
    ``first``, ``second``, ``both``, ``neither``) or an equivalent 3-tuple.
    A method wins only when it alone is selected.  ``both`` and ``neither``
    count as exposures of the pair unless ``exclusive_ties`` is set.
    """
    rows = []
    for rec in records:
        if isinstance(rec, Mapping):
            rows.append((rec.get("first"), rec.get("second"), rec.get("choice")))
        else:
            rows.append(tuple(rec))
    if methods is None:
        seen: dict[str, None] = {}
        for a, b, _ in rows:
            seen.setdefault(a, None)
            seen.setdefault(b, None)
        methods = tuple(seen)
    index = {m: n for n, m in enumerate(methods)}
    M = len(methods)
    counts = np.zeros((M, M))
    totals = np.zeros((M, M))
    for a, b, choice in rows:
        for name in (a, b):
            if name not in index:
                raise ValidationError(f"unknown method {name!r}")
        if a == b:
            raise ValidationError(f"method {a!r} compared with itself")
        if choice not in ("first", "second", "both", "neither"):
            raise ValidationError(f"invalid choice {choice!r}")
        i, j = index[a], index[b]
        if choice == "first":
            counts[j, i] += 1
        elif choice == "second":
            counts[i, j] += 1
        elif exclusive_ties:
            continue
        totals[i, j] += 1
        totals[j, i] += 1
    return ComparisonGraph(tuple(methods), counts, totals)


def rank_centrality(graph: ComparisonGraph, tol: float = 1e-10, max_iter: int = 1_000_000) -> dict[str, float]:
    """Stationary distribution of the win-probability random walk.

    From method ``i`` the walk moves to ``j`` with probability
    ``p_ij / d_max`` (``p_ij`` the rate at which ``j`` beats ``i``, ``d_max``
    the largest number of distinct opponents of any method) and otherwise
    stays put.  Solved by power iteration from the uniform distribution.
    """
    M = len(graph.methods)
    if M == 0:
        raise ValidationError("empty comparison graph")
    if M > 1:
        n_comp, _ = connected_components(graph.totals > 0, directed=False)
        if n_comp > 1:
            raise ValidationError("comparison graph is disconnected")
    T = graph.transition_matrix()
    x = np.full(M, 1.0 / M)
    for _ in range(max_iter):
        nxt = x @ T
        nxt /= nxt.sum()
        if np.abs(nxt - x).sum() < tol:
            x = nxt
            break
        x = nxt
    else:
        raise ConvergenceError(f"rank centrality did not converge in {max_iter} iterations")
    return dict(zip(graph.methods, x.tolist()))


def stationarity_residual(graph: ComparisonGraph, scores: Mapping[str, float]) -> float:
    x = np.array([scores[m] for m in graph.methods])
    return float(np.abs(x @ graph.transition_matrix() - x).sum())
