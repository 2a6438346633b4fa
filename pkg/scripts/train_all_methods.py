"""Train every method on a synthetic annotated corpus and report held-out metrics.

    python3 scripts/train_all_methods.py --kind multiclass --mode sampled
"""

import argparse
import time

from hlvkit.aggregation import METHODS, MULTICLASS_ONLY, build_target
from hlvkit.judgements import AnnotationSet, build_judgements
from hlvkit.metrics import MULTICLASS_METRICS, MULTILABEL_METRICS, selection_score
from hlvkit.synthetic import synthetic_corpus
from hlvkit.trainer import TrainConfig, evaluate_model, train


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--kind", choices=("multiclass", "multilabel"), default="multiclass")
    ap.add_argument("--mode", choices=("threshold", "sampled"), default="sampled")
    ap.add_argument("--K", type=int, default=3)
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--annotators", type=int, default=5)
    ap.add_argument("--hidden", type=int, default=0)
    ap.add_argument("--epochs", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    ann, X = synthetic_corpus(n=args.n, annotators=args.annotators, K=args.K, kind=args.kind,
                              mode=args.mode, seed=args.seed)
    cut = int(0.8 * args.n)
    train_ann = AnnotationSet(ann.space, ann.instances[:cut])
    reference = build_judgements(AnnotationSet(ann.space, ann.instances[cut:]))
    names = MULTICLASS_METRICS if args.kind == "multiclass" else MULTILABEL_METRICS

    print(f"{'method':<8}" + "".join(f"{n:>22}" for n in names) + f"{'selection':>11}{'secs':>7}")
    for method in METHODS:
        if method in MULTICLASS_ONLY and args.kind != "multiclass":
            continue
        t0 = time.perf_counter()
        model = train(build_target(method, train_ann), X[:cut],
                      TrainConfig(method, hidden=args.hidden, epochs=args.epochs, seed=args.seed))
        rep = evaluate_model(model, X[cut:], reference)
        cells = "".join(f"{'n/a' if rep[n] is None else format(rep[n], '.4f'):>22}" for n in names)
        print(f"{method:<8}{cells}{selection_score(rep):>11.4f}{time.perf_counter() - t0:>7.2f}")


if __name__ == "__main__":
    main()
