"""Command-line entry point: ``hlvkit <command> [options]``.

Exit codes: 0 success, 1 invalid input, 2 runtime or numerical failure.
Every command that writes an output also writes ``<out>.manifest.json``,
which ``hlvkit replay`` re-executes.
"""

from __future__ import annotations

import argparse
import hashlib
import itertools
import json
import shlex
import sys
from collections.abc import Sequence
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .aggregation import METHODS, build_target
from .analysis import (
    METRIC_PAIRS,
    StudyConfig,
    dirichlet_metric_correlations,
    rank_centrality,
    sa_pojsd_curve,
    verify_bound,
    wins_from_preferences,
)
from .errors import HLVError, ValidationError
from .judgements import (
    AnnotationSet,
    build_judgements,
    read_annotations,
    read_instance_field,
    read_judgements,
    read_manifest,
)
from .metrics import compute_report
from .output import write_csv, write_json
from .trainer import FeatureSet, TrainConfig, featurize_text, load_model, predict, save_model, train

BOUND_TOL = 1e-12


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage errors are input errors
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


@dataclass
class RunManifest:
    command: str
    argv: list[str]
    config: dict
    seed: int | None
    inputs: dict[str, str]
    outputs: list[str]
    version: str = __version__

    def write(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(asdict(self), sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _manifest(args: argparse.Namespace, argv: Sequence[str], inputs: Sequence[str | None], outputs: Sequence[str]) -> None:
    config = {k: v for k, v in vars(args).items() if k not in ("func", "config")}
    RunManifest(
        command=args.command,
        argv=list(argv),
        config=config,
        seed=getattr(args, "seed", None),
        inputs={str(p): _digest(p) for p in inputs if p},
        outputs=list(outputs),
    ).write(f"{outputs[0]}.manifest.json")


# --- feature loading --------------------------------------------------------


def _load_features(path: str, annotations: AnnotationSet) -> FeatureSet:
    if path.endswith(".npy"):
        X = np.load(path)
        if X.ndim != 2 or X.shape[0] != len(annotations.instances):
            raise ValidationError(f"{path}: expected {len(annotations.instances)} feature rows, got {X.shape}")
        return FeatureSet(X)
    rows: dict[str, list[float]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                rows[obj["instance_id"]] = obj["features"]
            except (json.JSONDecodeError, KeyError, TypeError):
                raise ValidationError(f"{path}:{lineno}: expected {{instance_id, features}}") from None
    missing = [i for i in annotations.ids if i not in rows]
    if missing:
        raise ValidationError(f"{path}: no features for instances {missing}")
    return FeatureSet(np.array([rows[i] for i in annotations.ids], dtype=np.float64))


def _text_features(annotations_path: str, annotations: AnnotationSet, field: str, dims: int) -> FeatureSet:
    texts = read_instance_field(annotations_path, field)
    return featurize_text([texts[i] for i in annotations.ids], dims)


# --- commands ---------------------------------------------------------------


def cmd_train(args, argv) -> int:
    space = read_manifest(args.manifest)
    annotations = read_annotations(args.annotations, space)
    config = TrainConfig(
        method=args.method,
        lr=args.lr,
        batch_size=args.batch_size,
        epochs=args.epochs,
        seed=args.seed,
        hidden=args.hidden,
        share_encoder=args.share_encoder,
    )
    target = build_target(args.method, annotations)
    if args.features:
        X = _load_features(args.features, annotations)
        featurizer = {"features": "file"}
    else:
        X = _text_features(args.annotations, annotations, args.text_field, args.dims)
        featurizer = {"text_field": args.text_field, "dims": args.dims}
    model = train(target, X, config)
    save_model(model, args.out, extra={"featurizer": featurizer, "classes": list(space.classes)})
    _manifest(args, argv, [args.annotations, args.manifest, args.features, args.config], [args.out])
    return 0


def cmd_evaluate(args, argv) -> int:
    space = read_manifest(args.manifest)
    annotations = read_annotations(args.annotations, space)
    reference = build_judgements(annotations)
    if args.predictions:
        Q = read_judgements(args.predictions, space).align(annotations.ids)
    else:
        model, extra = load_model(args.model)
        featurizer = extra.get("featurizer", {})
        if args.features:
            X = _load_features(args.features, annotations)
        elif "text_field" in featurizer:
            X = _text_features(args.annotations, annotations, featurizer["text_field"], featurizer["dims"])
        else:
            raise ValidationError("--features is required for a model trained on a feature file")
        Q = predict(model, X)
    report = compute_report(reference, Q)
    write_json(args.out, report.to_dict())
    _manifest(args, argv, [args.annotations, args.manifest, args.predictions, args.model, args.features, args.config], [args.out])
    return 0


def cmd_study(args, argv) -> int:
    rows = []
    for alpha, beta, K in itertools.product(args.alpha, args.beta, args.K):
        result = dirichlet_metric_correlations(StudyConfig(K, alpha, beta, args.N, args.B, args.seed))
        if result.dropped:
            print(f"K={K} alpha={alpha} beta={beta}: dropped {result.dropped} samples "
                  "with undefined entropy correlation", file=sys.stderr)
        rows.extend((float(alpha), float(beta), K, pair, result.correlations[pair]) for pair in METRIC_PAIRS)
    write_csv(args.out, ("alpha", "beta", "K", "pair", "r"), rows)
    _manifest(args, argv, [args.config], [args.out])
    return 0


def cmd_curve(args, argv) -> int:
    write_csv(args.out, ("q", "soft_accuracy", "po_jsd"), sa_pojsd_curve(args.steps))
    _manifest(args, argv, [args.config], [args.out])
    return 0


def cmd_verify_bound(args, argv) -> int:
    worst = verify_bound(args.trials, args.N, args.K, args.seed)
    ok = worst <= BOUND_TOL
    print(f"max(soft_accuracy - po_jsd) over {args.trials} trials: {worst:.9g} ({'ok' if ok else 'VIOLATED'})")
    if args.out:
        write_json(args.out, {"trials": args.trials, "max_violation": worst, "holds": ok})
        _manifest(args, argv, [args.config], [args.out])
    return 0 if ok else 2


def cmd_rank(args, argv) -> int:
    records = []
    with open(args.preferences, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip():
                try:
                    records.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise ValidationError(f"{args.preferences}:{lineno}: malformed line: {exc.msg}") from None
    graph = wins_from_preferences(records, args.methods, exclusive_ties=args.exclusive_ties)
    write_json(args.out, rank_centrality(graph))
    _manifest(args, argv, [args.preferences, args.config], [args.out])
    return 0


def cmd_replay(args, argv) -> int:
    manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
    for path, digest in manifest["inputs"].items():
        if not Path(path).exists() or _digest(path) != digest:
            raise ValidationError(f"input {path} changed since the recorded run")
    return main(manifest["argv"])


# --- parser -----------------------------------------------------------------


def _read_config(path: str) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _config_defaults(parser: argparse.ArgumentParser, cfg: dict[str, str]) -> dict:
    """Convert config strings with the matching action's type and nargs."""
    actions = {a.dest: a for a in parser._actions}
    out = {}
    for key, raw in cfg.items():
        action = actions.get(key)
        if action is None or key in ("help", "config"):
            raise ValidationError(f"unknown config key {key!r}")
        if isinstance(action, argparse._StoreTrueAction):
            out[key] = raw.lower() in ("1", "true", "yes", "on")
            continue
        conv = action.type or str
        if action.nargs in ("+", "*"):
            out[key] = [conv(v) for v in shlex.split(raw.replace(",", " "))]
        else:
            out[key] = conv(raw)
        if action.choices is not None:
            vals = out[key] if isinstance(out[key], list) else [out[key]]
            bad = [v for v in vals if v not in action.choices]
            if bad:
                raise ValidationError(f"config {key}: invalid choice {bad[0]!r}")
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hlvkit", description="Train and evaluate classifiers under human label variation.")
    parser.add_argument("--version", action="version", version=f"hlvkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name: str, func, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help, description=help)
        p.set_defaults(func=func)
        p.add_argument("--config", help="flat key=value file supplying defaults; flags take precedence")
        return p

    p = add("train", cmd_train, "Train a model with one of the HLV methods.")
    p.add_argument("--method", required=True, choices=METHODS, help="training method")
    p.add_argument("--annotations", required=True, help="line-delimited annotation records")
    p.add_argument("--manifest", required=True, help="label-space manifest (task and classes)")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--features", help=".npy matrix in instance order, or .jsonl {instance_id, features}")
    src.add_argument("--text-field", help="annotation-record field holding the instance text to hash")
    p.add_argument("--dims", type=int, default=2**18, help="hashing dimensions for --text-field (power of two)")
    p.add_argument("--lr", type=float, default=None, help="learning rate (default 5e-2 linear, 5e-3 hidden)")
    p.add_argument("--batch-size", type=int, default=32, help="mini-batch size")
    p.add_argument("--epochs", type=int, default=10, help="training epochs")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("--hidden", type=int, default=0, help="hidden layer width, 0 for a linear model")
    p.add_argument("--share-encoder", action="store_true", help="require a shared hidden encoder (AE/AEh)")
    p.add_argument("--out", required=True, help="model file to write")

    p = add("evaluate", cmd_evaluate, "Score predictions against annotation-derived judgements.")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--model", help="model file written by 'train'")
    src.add_argument("--predictions", help="line-delimited {instance_id, judgements} file")
    p.add_argument("--features", help="feature file for --model (when not trained on text)")
    p.add_argument("--annotations", required=True, help="reference annotation records")
    p.add_argument("--manifest", required=True, help="label-space manifest")
    p.add_argument("--out", required=True, help="metric report JSON to write")

    p = add("study", cmd_study, "Pearson correlations between metrics on random Dirichlet judgements.")
    p.add_argument("--K", type=int, nargs="+", default=[10, 100], help="numbers of classes")
    p.add_argument("--alpha", type=float, nargs="+", default=[10.0, 0.1], help="Dirichlet parameters for P")
    p.add_argument("--beta", type=float, nargs="+", default=[10.0, 0.1], help="Dirichlet parameters for Q")
    p.add_argument("--B", type=int, default=500, help="number of (P, Q) samples per setting")
    p.add_argument("--N", type=int, default=1000, help="rows per matrix")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("--out", required=True, help="CSV to write (alpha,beta,K,pair,r)")

    p = add("curve", cmd_curve, "Soft accuracy and PO-JSD for P=(0.5,0.5) against Q=(q,1-q).")
    p.add_argument("--steps", type=int, default=101, help="grid points on [0, 1]")
    p.add_argument("--out", required=True, help="CSV to write (q,soft_accuracy,po_jsd)")

    p = add("verify-bound", cmd_verify_bound, "Check soft accuracy <= PO-JSD on random pairs.")
    p.add_argument("--trials", type=int, default=10_000, help="number of random (P, Q) pairs")
    p.add_argument("--N", type=int, nargs="+", default=[1, 10, 100], help="row counts to cycle through")
    p.add_argument("--K", type=int, nargs="+", default=[2, 3, 10], help="class counts to cycle through")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("--out", help="optional JSON summary")

    p = add("rank", cmd_rank, "Rank-centrality scores from pairwise preference records.")
    p.add_argument("--preferences", required=True, help='lines of {"first","second","choice"}')
    p.add_argument("--methods", nargs="+", help="method order (default: order of appearance)")
    p.add_argument("--exclusive-ties", action="store_true", help="leave both/neither out of pair totals")
    p.add_argument("--out", required=True, help="JSON map method -> score")

    p = sub.add_parser("replay", help="Re-run a command from its manifest.")
    p.set_defaults(func=cmd_replay)
    p.add_argument("manifest", help="<out>.manifest.json written by a previous run")
    return parser


def _find_config(argv: Sequence[str]) -> str | None:
    for n, tok in enumerate(argv):
        if tok == "--config" and n + 1 < len(argv):
            return argv[n + 1]
        if tok.startswith("--config="):
            return tok.split("=", 1)[1]
    return None


def _apply_config(parser: argparse.ArgumentParser, command: str, path: str) -> None:
    subparsers = parser._subparsers._group_actions[0].choices  # type: ignore[union-attr]
    sub = subparsers.get(command)
    if sub is None:
        return
    cfg = _read_config(path)
    sub.set_defaults(**_config_defaults(sub, cfg))
    for action in sub._actions:
        if action.dest in cfg:
            action.required = False
    for group in sub._mutually_exclusive_groups:
        if any(a.dest in cfg for a in group._group_actions):
            group.required = False


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        cfg_path = _find_config(argv)
        if cfg_path and argv:
            _apply_config(parser, argv[0], cfg_path)
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:  # --help, --version and usage errors
            return int(exc.code or 0)
        return args.func(args, argv)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except HLVError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
