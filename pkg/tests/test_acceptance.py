"""Acceptance checks, one test per criterion; each prints a PASS/FAIL line."""

import math
import time

import numpy as np
import pytest
from scipy.spatial.distance import jensenshannon

from hlvkit import aggregation as agg
from hlvkit import analysis as an
from hlvkit import metrics as m
from hlvkit import objectives as obj
from hlvkit import trainer as tr
from hlvkit.judgements import AnnotationSet, JudgementMatrix, LabelSpace, build_judgements
from hlvkit.synthetic import synthetic_corpus

MC = JudgementMatrix.multiclass
ML = JudgementMatrix.multilabel


@pytest.fixture
def verdict(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}")
        assert ok, detail

    return emit


# 1 ---------------------------------------------------------------------------


def test_criterion_1_curve_fixture(verdict):
    P, Q = MC([[0.5, 0.5]]), MC([[0.2, 0.8]])
    sa = m.soft_accuracy(P, Q)
    pj = m.po_jsd(P, Q)
    oracle = 1.0 - jensenshannon([0.5, 0.5], [0.2, 0.8], base=2) ** 2
    ok = abs(sa - 0.7) <= 1e-12 and abs(pj - oracle) <= 1e-3 and abs(pj - 0.926954) <= 1e-3 and pj > 0.9
    verdict(1, ok, f"soft accuracy {sa:.12f} (want 0.7), PO-JSD {pj:.9f} vs scipy {oracle:.9f} (tol 1e-3)")


# 2 ---------------------------------------------------------------------------


def test_criterion_2_dirichlet_study(verdict):
    start = time.perf_counter()
    js = {}
    for K, a, b in an.TABLE2_SETTINGS:
        res = an.dirichlet_metric_correlations(an.StudyConfig(K, a, b, N=1000, B=500, seed=0))
        js[(K, a, b)] = res.correlations["J-S"]
    elapsed = time.perf_counter() - start
    low = js[(10, 0.1, 0.1)]
    high = js[(10, 10.0, 10.0)]
    ok = (
        all(r > 0.9 for r in js.values())
        and abs(low - 0.963) <= 0.05
        and abs(high - 0.942) <= 0.05
        and elapsed < 120
    )
    table = ", ".join(f"K={K} a={a} b={b}: {r:.4f}" for (K, a, b), r in js.items())
    verdict(2, ok, f"J-S min {min(js.values()):.4f} > 0.9; K=10 a=b=0.1 {low:.4f} (0.963 +/- 0.05); "
                   f"K=10 a=b=10 {high:.4f} (0.942 +/- 0.05); {elapsed:.1f}s [{table}]")


# 3 ---------------------------------------------------------------------------


def test_criterion_3_bound(verdict):
    worst = an.verify_bound(10_000, N=(1, 10, 100), K=(2, 3, 10), seed=0)
    verdict(3, worst <= 1e-12, f"max(soft_accuracy - po_jsd) over 10^4 pairs = {worst:.3e} (must be <= 1e-12)")


# 4 ---------------------------------------------------------------------------


def test_criterion_4_reductions(verdict):
    rng = np.random.default_rng(4)
    onehot_ok = binary_ok = True
    gap = 0.0
    for _ in range(1000):
        n, k = int(rng.integers(1, 20)), int(rng.integers(2, 6))
        P = np.eye(k)[rng.integers(0, k, n)]
        Q = np.eye(k)[rng.integers(0, k, n)]
        onehot_ok &= m.soft_accuracy(MC(P), MC(Q)) == m.hard_accuracy(MC(P), MC(Q))
        Pb = (rng.random((n, k)) < 0.5).astype(float)
        Qb = (rng.random((n, k)) < 0.5).astype(float)
        binary_ok &= m.soft_micro_f1(ML(Pb), ML(Qb)) == m.hard_micro_f1(ML(Pb), ML(Qb))
        Ps = rng.dirichlet(np.ones(k), n)
        Qs = rng.dirichlet(np.ones(k), n)
        gap = max(gap, abs(m.soft_micro_f1(MC(Ps), MC(Qs)) - m.soft_accuracy(MC(Ps), MC(Qs))))
    ok = bool(onehot_ok and binary_ok and gap <= 1e-12)
    verdict(4, ok, f"one-hot soft=hard accuracy exact: {onehot_ok}; binary soft=hard micro F1 exact: {binary_ok}; "
                   f"max |soft micro F1 - soft accuracy| = {gap:.2e} (tol 1e-12)")


# 5 ---------------------------------------------------------------------------


def test_criterion_5_worked_examples(verdict):
    space = LabelSpace(("A", "B"), "multiclass")
    rows = [
        ("x1", "1", ["A"]), ("x1", "2", ["A"]), ("x1", "3", ["B"]), ("x1", "4", ["A"]),
        ("x2", "1", ["A"]), ("x2", "2", ["B"]), ("x2", "3", ["B"]),
    ]
    ann = AnnotationSet.from_records(space, rows)
    ar = agg.annotator_scores(ann)
    arh = agg.annotator_scores(ann, hard=True)
    ar_ok = all(abs(ar[a] - v) <= 1e-12 for a, v in zip("1234", (3 / 4, 17 / 24, 2 / 3, 3 / 4)))
    arh_ok = all(abs(arh[a] - v) <= 1e-12 for a, v in zip("1234", (1 / 2, 1, 1 / 2, 1)))

    al_rows = [("x1", "1", ["A"]), ("x1", "2", ["A"]), ("x1", "3", ["B"])]
    al_rows += [("x2", "1", ["B"]), ("x2", "2", ["B"]), ("x2", "3", ["B"])]
    al = agg.target_al(AnnotationSet.from_records(space, al_rows))
    al_ok = sorted(al.pairs, key=lambda p: (p[0], sorted(p[1]))) == [(0, frozenset({0})), (0, frozenset({1})), (1, frozenset({1}))]

    preds = [ML([[v]]) for v in (0.6, 0.3, 0.9)]
    ae = tr.ensemble(preds, "mean").values[0, 0]
    aeh = tr.ensemble(preds, "hard").values[0, 0]
    ae_ok = abs(ae - 0.6) <= 1e-12 and abs(aeh - 2 / 3) <= 1e-12

    z1 = np.array([[0.3, -0.4]])
    z2 = np.array([[-0.1, 0.9]])
    p1 = [math.exp(v) / sum(math.exp(u) for u in z1[0]) for v in z1[0]]
    p2 = [math.exp(v) / sum(math.exp(u) for u in z2[0]) for v in z2[0]]
    target = np.array([[0.2, 0.8]])
    sl = obj.soft_ce_loss(z1, target).value
    sl_closed = -(0.8 * math.log(p1[1]) + 0.2 * math.log(p1[0]))
    slmv = obj.slmv_loss(z1, z2, target, np.array([1])).value
    slmv_closed = sl_closed - math.log(p2[1])
    obj_ok = abs(sl - sl_closed) <= 1e-12 and abs(slmv - slmv_closed) <= 1e-12

    ok = ar_ok and arh_ok and al_ok and ae_ok and obj_ok
    verdict(5, ok, f"AR {[round(ar[a], 6) for a in '1234']} ok={ar_ok}; ARh {[arh[a] for a in '1234']} ok={arh_ok}; "
                   f"AL ok={al_ok}; AE {ae:.12f} AEh {aeh:.12f}; SL |d|={abs(sl - sl_closed):.1e} "
                   f"SLMV |d|={abs(slmv - slmv_closed):.1e} (tol 1e-12)")


# 6 ---------------------------------------------------------------------------


def _fd(f, z, h=1e-5):
    g = np.zeros_like(z)
    for idx in np.ndindex(z.shape):
        zp, zm = z.copy(), z.copy()
        zp[idx] += h
        zm[idx] -= h
        g[idx] = (f(zp) - f(zm)) / (2 * h)
    return g


def _rel(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-6))


def _random_case(rng, kind, B=3, K=3):
    z = rng.normal(scale=1.5, size=(B, K))
    if kind == "multiclass":
        P = rng.dirichlet(np.ones(K), B)
        hard = rng.integers(0, K, B)
        anns = [[{int(c)} for c in rng.integers(0, K, 4)] for _ in range(B)]
    else:
        P = rng.random((B, K))
        hard = (rng.random((B, K)) < 0.5).astype(float)
        anns = [[set(np.flatnonzero(rng.random(K) < 0.5).tolist()) for _ in range(4)] for _ in range(B)]
    return z, P, hard, anns


def _la_has_tie(z, anns, kind, mode):
    for i, a in enumerate(anns):
        vals = {}
        for labels in a:
            key = frozenset(labels)
            if kind == "multiclass":
                vals[key] = obj.ce_loss(z[i : i + 1], np.array([next(iter(labels))])).value
            else:
                v = np.zeros(z.shape[1])
                v[list(labels)] = 1.0
                vals[key] = obj.ce_loss(z[i : i + 1], v[None], kind=kind).value
        best = min(vals.values()) if mode == "min" else max(vals.values())
        if sum(abs(v - best) < 1e-6 for v in vals.values()) > 1:
            return True
    return False


def test_criterion_6_gradients(verdict):
    rng = np.random.default_rng(6)
    worst = {}
    for kind in ("multiclass", "multilabel"):
        losses = {
            "ce": lambda z, P, y, a, w: obj.ce_loss(z, y, w, kind=kind),
            "soft_ce": lambda z, P, y, a, w: obj.soft_ce_loss(z, P, kind=kind),
            "jsd": lambda z, P, y, a, w: obj.jsd_loss(z, P, kind=kind),
            "smf1": lambda z, P, y, a, w: obj.smf1_loss(z, P, kind=kind),
            "smacro_f1": lambda z, P, y, a, w: obj.smacro_f1_loss(z, P, kind=kind),
            "la_min": lambda z, P, y, a, w: obj.la_loss(z, a, "min", kind=kind),
            "la_max": lambda z, P, y, a, w: obj.la_loss(z, a, "max", kind=kind),
        }
        for name, loss in losses.items():
            done, err = 0, 0.0
            while done < 100:
                z, P, y, anns = _random_case(rng, kind)
                w = rng.random(z.shape[0]) * 2
                if name in ("smf1", "smacro_f1") and np.any(np.abs(P - obj.probabilities(z, kind)) <= 1e-3):
                    continue
                if name.startswith("la_") and _la_has_tie(z, anns, kind, name[3:]):
                    continue
                f = lambda x: loss(x, P, y, anns, w)
                err = max(err, _rel(f(z).grad, _fd(lambda x: f(x).value, z)))
                done += 1
            worst[(kind, name)] = err
        done, err = 0, 0.0
        while done < 100:
            zs, P, y, _ = _random_case(rng, kind)
            zh = rng.normal(scale=1.5, size=zs.shape)
            r = obj.slmv_loss(zs, zh, P, y, kind=kind)
            err = max(err, _rel(r.grad[0], _fd(lambda x: obj.slmv_loss(x, zh, P, y, kind=kind).value, zs)),
                      _rel(r.grad[1], _fd(lambda x: obj.slmv_loss(zs, x, P, y, kind=kind).value, zh)))
            done += 1
        worst[(kind, "slmv")] = err
    top = max(worst.values())
    short = {"multiclass": "mc", "multilabel": "ml"}
    detail = ", ".join(f"{short[k[0]]}/{k[1]}={v:.1e}" for k, v in worst.items())
    verdict(6, top < 1e-4, f"max relative error {top:.2e} (tol 1e-4) over 100 points per loss and kind [{detail}]")


# 7 ---------------------------------------------------------------------------


def test_criterion_7_equivalences(verdict):
    rng = np.random.default_rng(7)
    mean_gap = rel_gap = 0.0
    for kind in ("multiclass", "multilabel"):
        for _ in range(50):
            N, K, J = int(rng.integers(1, 30)), int(rng.integers(2, 5)), 5
            space = LabelSpace(tuple(f"c{k}" for k in range(K)), kind)
            rows = []
            for i in range(N):
                for j in range(J):
                    if kind == "multiclass":
                        labels = [f"c{rng.integers(0, K)}"]
                    else:
                        labels = [f"c{k}" for k in np.flatnonzero(rng.random(K) < 0.4)]
                    rows.append((f"x{i}", f"a{j}", labels))
            ann = AnnotationSet.from_records(space, rows)
            z = rng.normal(size=(N, K))
            P = build_judgements(ann).values
            groups = agg.target_rel(ann).grouped()
            la_mean = obj._aggregated_ce(z, groups, kind, "mean", "mean").value
            sl_mean = obj.soft_ce_loss(z, P, kind=kind).value
            mean_gap = max(mean_gap, abs(la_mean - sl_mean))

            rel = agg.target_rel(ann)
            idx = np.array([i for i, _ in rel.pairs])
            if kind == "multiclass":
                y = np.array([next(iter(l)) for _, l in rel.pairs])
            else:
                y = np.vstack([agg.labels_to_vector(l, K) for _, l in rel.pairs])
            rel_obj = obj.ce_loss(z[idx], y, kind=kind, reduction="sum").value
            sl_obj = obj.soft_ce_loss(z, P, kind=kind, reduction="sum").value
            rel_gap = max(rel_gap, abs(rel_obj - J * sl_obj))
    ok = mean_gap <= 1e-12 and rel_gap <= 1e-9
    verdict(7, ok, f"max |LA-mean - SL| = {mean_gap:.2e} (tol 1e-12); max |ReL - 5 x SL| = {rel_gap:.2e} (tol 1e-9)")


# 8 ---------------------------------------------------------------------------


def test_criterion_8_rank_centrality(verdict):
    # counts[i, j] counts wins of j over i: A beats B in all 100 judgements
    dom = an.ComparisonGraph(("A", "B"), [[0, 0], [100, 0]], [[0, 100], [100, 0]])
    s_dom = an.rank_centrality(dom)
    M = 4
    sym = an.ComparisonGraph(tuple("abcd"), np.full((M, M), 3.0) - 3 * np.eye(M), np.full((M, M), 10.0) - 10 * np.eye(M))
    s_sym = an.rank_centrality(sym)
    sym_gap = max(abs(v - 0.25) for v in s_sym.values())

    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(100):
        M = int(rng.integers(2, 9))
        totals = np.triu(rng.integers(0, 20, (M, M)), 1).astype(float)
        totals[np.arange(M - 1), np.arange(1, M)] += 1  # path keeps the graph connected
        totals = totals + totals.T
        counts = np.zeros((M, M))
        for i in range(M):
            for j in range(i + 1, M):
                n = int(totals[i, j])
                a = int(rng.integers(0, n + 1))
                b = int(rng.integers(0, n - a + 1))
                counts[i, j], counts[j, i] = a, b
        g = an.ComparisonGraph(tuple(f"m{i}" for i in range(M)), counts, totals)
        worst = max(worst, an.stationarity_residual(g, an.rank_centrality(g)))
    ok = s_dom["A"] > 0.99 and sym_gap <= 1e-9 and worst < 1e-9
    verdict(8, ok, f"dominant score {s_dom['A']:.6f} (> 0.99); symmetric max |s - 0.25| = {sym_gap:.1e} (tol 1e-9); "
                   f"max stationarity residual over 100 graphs = {worst:.1e} (tol 1e-9)")


# 9 ---------------------------------------------------------------------------


def test_criterion_9_end_to_end(verdict):
    ann, X = synthetic_corpus(n=500, annotators=5, K=2, seed=0)
    reference = build_judgements(ann)
    times, failures, mv_acc = {}, [], None
    for method in agg.METHODS:
        start = time.perf_counter()
        try:
            model = tr.train(agg.build_target(method, ann), X, tr.TrainConfig(method))
            report = tr.evaluate_model(model, X, reference)
        except Exception as exc:  # noqa: BLE001 - any failure fails the criterion
            failures.append(f"{method}: {exc}")
            continue
        times[method] = time.perf_counter() - start
        if method == "MV":
            mv_acc = report["accuracy"]
    slowest = max(times, key=times.get) if times else None
    ok = not failures and len(times) == 14 and max(times.values()) < 30 and mv_acc is not None and mv_acc >= 0.95
    verdict(9, ok, f"{len(times)}/14 methods trained; slowest {slowest} {times.get(slowest, float('nan')):.2f}s (< 30s); "
                   f"MV train accuracy {mv_acc} (>= 0.95){'; failures: ' + '; '.join(failures) if failures else ''}")
