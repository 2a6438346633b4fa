"""Soft accuracy against PO-JSD for P=(0.5, 0.5) and Q=(q, 1-q), plus a random
search for violations of soft accuracy <= PO-JSD.

    python3 scripts/run_bound_curve.py --steps 101 --trials 10000 --out curve.csv
"""

import argparse

from hlvkit.analysis import sa_pojsd_curve, verify_bound
from hlvkit.output import write_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=101)
    ap.add_argument("--trials", type=int, default=10_000)
    ap.add_argument("--out", default="curve.csv")
    args = ap.parse_args()

    curve = sa_pojsd_curve(args.steps)
    write_csv(args.out, ("q", "soft_accuracy", "po_jsd"), curve)
    for q, s, j in curve[:: max(1, len(curve) // 10)]:
        print(f"q={q:.2f}  soft_accuracy={s:.4f}  po_jsd={j:.4f}  gap={j - s:.4f}")
    worst = verify_bound(args.trials)
    print(f"max(soft_accuracy - po_jsd) over {args.trials} random pairs: {worst:.3e}")


if __name__ == "__main__":
    main()
