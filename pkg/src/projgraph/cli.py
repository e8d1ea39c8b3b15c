"""Command-line entry point: ``projgraph train | geomcheck | generate``.

Exit codes: 0 on success, 1 when training fails or a geometric check is
violated, 2 for usage and configuration errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import checks
from .data import Dataset, generate_sbm, load_dataset, save_dataset, sbm_preset
from .errors import ConfigError, DataError, ProjGraphError, TrainingError
from .trainer import TrainConfig, repeat_runs

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def resolve_data(spec: str) -> Dataset:
    """``sbm:<preset>[:<seed>]`` or a path to a dataset JSON file."""
    if spec.startswith("sbm:"):
        parts = spec.split(":")
        if len(parts) > 3:
            raise ConfigError(f"malformed data spec {spec!r}; expected sbm:<preset>[:<seed>]")
        seed = 0
        if len(parts) == 3:
            try:
                seed = int(parts[2])
            except ValueError:
                raise ConfigError(f"SBM seed must be an integer, got {parts[2]!r}") from None
        return sbm_preset(parts[1], seed)
    path = Path(spec)
    if not path.is_file():
        raise ConfigError(f"dataset file {spec!r} not found")
    return load_dataset(path)


def _metrics_document(name: str, config: TrainConfig, result) -> dict:
    spec = config.model_spec()
    curvature_final, temperature_final = {}, None
    if spec.uses_dgm:
        sig = spec.parsed_signature()
        finals = np.array([r.curvatures[-1] for r in result.runs])
        for i, comp in enumerate(sig):
            if comp.kind.sign:
                curvature_final[f"{comp.kind.value}{i}"] = float(np.mean(finals[:, i]))
        temperature_final = float(np.mean([r.temperature[-1] for r in result.runs]))
    return {
        "name": name,
        "model": spec.name,
        "mean_acc": result.mean_acc,
        "std_acc": result.std_acc,
        "per_run": [r.to_json() for r in result.runs],
        "curvature_final": curvature_final,
        "temperature_final": temperature_final,
    }


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_json_safe(v) for v in obj]
    return obj


def cmd_train(args) -> int:
    config = TrainConfig(model=args.model, k=args.k, epochs=args.epochs, learning_rate=args.lr,
                         seed=args.seed, n_runs=args.runs)
    config.model_spec()
    data = resolve_data(args.data)
    result = repeat_runs(config, data)
    name = f"{data.name}/{config.model_spec().name}"
    doc = _json_safe(_metrics_document(name, config, result))
    text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    print(f"{name} {result.mean_acc:.4f}±{result.std_acc:.4f}")
    return EXIT_OK


def cmd_geomcheck(args) -> int:
    results = checks.run_all(args.space, args.curvature, args.samples, args.seed)
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    if failed:
        for r in failed:
            print(f"failed: {r.name} ({r.detail}); reproduce with --seed {r.seed}", file=sys.stderr)
        return EXIT_FAIL
    print(f"all {len(results)} suites passed")
    return EXIT_OK


def cmd_generate(args) -> int:
    ds = generate_sbm(args.n, args.classes, args.p_in, args.p_out, args.dim, args.noise,
                      args.seed, name=args.name)
    save_dataset(ds, args.out)
    print(f"wrote {args.out}: {ds.n} nodes, {len(ds.edges)} edges, {ds.n_classes} classes")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="projgraph", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model over repeated seeded runs")
    p.add_argument("--data", required=True, help="dataset JSON path or sbm:<preset>[:<seed>]")
    p.add_argument("--model", default="GCN-dDGM*-E", help="e.g. GCN-dDGM*-EHP, GAT-dDGM-P, MLP")
    p.add_argument("--k", type=int, default=3, help="latent edges per node")
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--out", help="metrics JSON destination")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("geomcheck", help="run the geometric property suites")
    p.add_argument("--space", choices=list("EHSPD"))
    p.add_argument("--curvature", type=float)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_geomcheck)

    p = sub.add_parser("generate", help="write a stochastic block model dataset")
    p.add_argument("--n", type=int, default=300)
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--p-in", type=float, default=0.1)
    p.add_argument("--p-out", type=float, default=0.01)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--noise", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--name", default="sbm")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "samples", 1) < 1:
        parser.error("--samples must be positive")
    try:
        return args.func(args)
    except (ConfigError, DataError) as exc:
        parser.error(str(exc))
    except TrainingError as exc:
        print(f"training failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ProjGraphError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
