#!/usr/bin/env python3
"""Ligne de commande du banc d'essai: train, sweep, bench-memory, compare-targets, oracle, scores.

    python -m app.cli.main train --config configs/matrix_sem_vdn.yaml --out runs/matrix
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import yaml
from dotenv import load_dotenv

from app.core.errors import ConfigError, OracleInfeasible
from app.envs import make_env, oracle_optimal_return

from .bench import bench_memory
from .config import DEFAULT_OUTPUT_ROOT, parse_config
from .experiment import SWEEP_PARAMS, compare_targets, run_experiment, sweep, write_scores


def _values(text: str) -> List[object]:
    # "0,0.1,0.5" -> [0, 0.1, 0.5]; each item parsed as a YAML scalar
    return [yaml.safe_load(item) for item in text.split(",") if item.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sem", description="Mémoire épisodique pour la décomposition de valeur multi-agents")
    p.add_argument("--log-level", default="INFO", help="Niveau de log (DEBUG, INFO, WARNING...)")
    sub = p.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="Entraîne toutes les graines d'une config")
    train.add_argument("--config", required=True, help="Fichier YAML d'expérience")
    train.add_argument("--out", default=None, help="Dossier de sortie")
    train.add_argument("--workers", type=int, default=None, help="Graines en parallèle")

    sw = sub.add_parser("sweep", help="Balayage d'un hyper-paramètre")
    sw.add_argument("--config", required=True)
    sw.add_argument("--param", required=True, choices=sorted(SWEEP_PARAMS))
    sw.add_argument("--values", required=True, help="Valeurs séparées par des virgules")
    sw.add_argument("--out", default=None)
    sw.add_argument("--workers", type=int, default=None)

    bench = sub.add_parser("bench-memory", help="Compare SEM et SAEM (tables, flushs, octets, temps)")
    bench.add_argument("--agents", type=int, default=2)
    bench.add_argument("--actions", type=int, default=5)
    bench.add_argument("--flushes", type=int, default=10)
    bench.add_argument("--mset", type=int, default=500)
    bench.add_argument("--keys", type=int, default=1000)
    bench.add_argument("--key-dim", type=int, default=4)
    bench.add_argument("--capacity", type=int, default=1_000_000)
    bench.add_argument("--random-actions", action="store_true", help="Actions jointes tirées au hasard")
    bench.add_argument("--seed", type=int, default=0)

    compare = sub.add_parser("compare-targets", help="Moyennes de y, E_s et E_s^u par point d'évaluation")
    compare.add_argument("--config", required=True)
    compare.add_argument("--out", default=None)

    oracle = sub.add_parser("oracle", help="Retour optimal exact de l'environnement de la config")
    oracle.add_argument("--config", required=True)

    scores = sub.add_parser("scores", help="Scores moyen et médian sur plusieurs runs")
    scores.add_argument("--runs", nargs="+", required=True, help="Dossiers de runs (avec summary.csv)")
    scores.add_argument("--out", default=None, help="Fichier scores.csv")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.INFO))

    try:
        if args.command == "train":
            artifact = run_experiment(parse_config(args.config), args.out, args.workers)
            print(f"[train] {artifact.out_dir}: {', '.join(artifact.files())}")
            return 1 if artifact.partial else 0

        if args.command == "sweep":
            result = sweep(parse_config(args.config), args.param, _values(args.values), args.out, args.workers)
            for value, artifact in result.cells:
                print(f"[sweep] {args.param}={value}: {artifact.out_dir}")
            return 1 if result.partial else 0

        if args.command == "bench-memory":
            report = bench_memory(
                n_agents=args.agents,
                n_actions=args.actions,
                flushes=args.flushes,
                mset=args.mset,
                key_count=args.keys,
                key_dim=args.key_dim,
                capacity=args.capacity,
                adversarial=not args.random_actions,
                seed=args.seed,
            )
            print(json.dumps(report.as_dict(), indent=2))
            return 0

        if args.command == "compare-targets":
            comparison = compare_targets(parse_config(args.config), args.out)
            print(f"[compare-targets] {comparison.csv_path}")
            return 1 if comparison.artifact.partial else 0

        if args.command == "oracle":
            config = parse_config(args.config)
            env = make_env(config.env.name, config.env.params)
            result = oracle_optimal_return(env, config.training.gamma)
            payload = {
                "env": config.env.name,
                "gamma": config.training.gamma,
                "optimal_discounted_return": result.optimal_discounted_return,
                "best_case_return": result.best_case_return,
            }
            if result.optimal_joint_policy is not None:
                # state tuple -> "v1,v2,..." ; the one-shot game has the empty key
                payload["optimal_joint_policy"] = {
                    ",".join(f"{v:g}" for v in state): list(action)
                    for state, action in result.optimal_joint_policy.items()
                }
            print(json.dumps(payload, indent=2))
            return 0

        if args.command == "scores":
            out = Path(args.out) if args.out else Path(os.getenv("SEM_OUTPUT_ROOT", DEFAULT_OUTPUT_ROOT)) / "scores.csv"
            print(f"[scores] {write_scores(args.runs, out)}")
            return 0
    except ConfigError as exc:
        print(f"config invalide: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"fichier introuvable: {exc}", file=sys.stderr)
        return 2
    except OracleInfeasible as exc:
        print(f"oracle impossible: {exc}", file=sys.stderr)
        return 1
    return 2


if __name__ == "__main__":
    raise SystemExit(main())
