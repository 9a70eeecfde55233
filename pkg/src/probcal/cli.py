"""Command-line entry point: ``probcal <subcommand> [flags]``.

Exit codes: 0 success, 1 internal error, 2 bad input or contract violation.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from probcal.config import ExperimentConfig
from probcal.errors import ContractError, ConvergenceError
from probcal.experiments import RUNNERS, run_train_eval
from probcal.expected import QuadratureSpec, expected_score_mc, expected_score_quadrature, true_ece_analytic
from probcal.io import bins_csv, csv_text, dumps, read_predictions, report_csv
from probcal.metrics import full_report
from probcal.synthetic import ProbDistribution, SyntheticModel
from probcal.trainer import TrainConfig

EXIT_OK, EXIT_INTERNAL, EXIT_CONTRACT = 0, 1, 2

EXPECTED_COLUMNS = ("rule", "distribution", "model", "method", "value", "std_error")


def _shared(seeded: bool = True) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--bins", type=int, help="number of equal-width ECE bins (default 10)")
    p.add_argument("--out", help="directory to write report files into")
    p.add_argument("--format", choices=("json", "csv"), default="json", help="stdout format")
    if seeded:
        p.add_argument("--seed", type=int, help="base RNG seed (default 0)")
        p.add_argument("--n", type=int, help="sample count")
        p.add_argument("--config", help="YAML config file; explicit flags override it")
        p.add_argument("--dump-config", action="store_true", help="print the effective config and exit")
        p.add_argument("--timestamp", action="store_true", help="stamp provenance with wall-clock time")
        p.add_argument("--workers", type=int, help="threads for replicates (output does not depend on it)")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="probcal", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", parents=[_shared(seeded=False)], help="score a predictions file")
    p.add_argument("predictions_file", help="CSV (p_hat,outcome) or JSON array")

    p = sub.add_parser("case1", parents=[_shared()], help="optimal-model scores under beta operating conditions")
    p.add_argument("--dist", action="append", help="operating condition, e.g. 'Beta(2,2)'; repeatable")
    p.add_argument("--tendency", action="append", type=float, help="model tendency; repeatable (default 0)")
    p.add_argument("--hist-bins", type=int)

    p = sub.add_parser("sweep-bins", parents=[_shared()], help="ECE over bin counts vs |Balance|")
    p.add_argument("--tendency", action="append", type=float, help="repeatable (default 0.1 and 0.11)")
    p.add_argument("--dist", action="append")
    p.add_argument("--m-min", type=int)
    p.add_argument("--m-max", type=int)
    p.add_argument("--replicates", type=int)

    p = sub.add_parser("sweep-datasize", parents=[_shared()], help="estimator error vs data size")
    p.add_argument("--tendency", type=float)
    p.add_argument("--dist", action="append")
    p.add_argument("--sizes", help="comma-separated sizes (default 50,100,...,1000)")
    p.add_argument("--replicates", type=int)
    p.add_argument("--true-ece", type=float, help="reference value (default: analytic)")

    p = sub.add_parser("train-eval", parents=[_shared()], help="train logistic regression and score it")
    p.add_argument("--profile", action="append", choices=("early", "mid", "late"), help="repeatable")
    p.add_argument("--train-file")
    p.add_argument("--test-file")
    p.add_argument("--train-fraction", type=float)
    p.add_argument("--hist-bins", type=int)
    p.add_argument("--lr", type=float, default=TrainConfig.learning_rate)
    p.add_argument("--max-iters", type=int, default=TrainConfig.max_iters)
    p.add_argument("--tolerance", type=float, default=TrainConfig.tolerance)
    p.add_argument("--l2", type=float, default=TrainConfig.l2)

    p = sub.add_parser("expected-score", parents=[_shared()], help="expected score of a rule by quadrature or MC")
    p.add_argument("--rule", action="append", choices=("accuracy", "brier", "balance"), help="repeatable (default all)")
    p.add_argument("--dist", default="Beta(1,1)")
    p.add_argument("--model", default="optimal", help="'optimal' or a tendency such as 't=0.1'")
    p.add_argument("--method", choices=("mc", "quadrature", "both"), default="mc")
    p.add_argument("--quadrature", action="store_true", help="same as --method quadrature")
    p.add_argument("--true-ece", action="store_true", help="also emit the analytic true ECE")
    return parser


def _config_for(args) -> ExperimentConfig:
    cmd = args.command
    if getattr(args, "config", None):
        cfg = ExperimentConfig.load(args.config)
        if cfg.experiment != cmd:
            raise ContractError(f"config is for {cfg.experiment!r}, not {cmd!r}")
    else:
        cfg = ExperimentConfig.defaults(cmd)
    over = {"seed": args.seed, "n": args.n, "bins": args.bins, "out": args.out, "workers": args.workers}
    if getattr(args, "dist", None) and cmd != "expected-score":
        over["distributions"] = tuple(args.dist)
    tend = getattr(args, "tendency", None)
    if tend is not None:
        over["tendencies"] = tuple(tend) if isinstance(tend, list) else (tend,)
    for attr in ("replicates", "hist_bins", "train_fraction", "true_ece"):
        if attr in vars(args) and not isinstance(getattr(args, attr), bool):
            over[attr] = getattr(args, attr)
    if cmd == "sweep-bins" and (args.m_min is not None or args.m_max is not None):
        over["bin_range"] = (
            args.m_min if args.m_min is not None else cfg.bin_range[0],
            args.m_max if args.m_max is not None else cfg.bin_range[1],
        )
    if cmd == "sweep-datasize" and args.sizes:
        try:
            over["sizes"] = tuple(int(s) for s in args.sizes.split(",") if s.strip())
        except ValueError:
            raise ContractError(f"--sizes must be comma-separated integers, got {args.sizes!r}") from None
    if cmd == "train-eval" and args.profile:
        over["profiles"] = tuple(args.profile)
    return cfg.with_overrides(**over)


def _write_files(out: str | None, files: dict[str, str]) -> None:
    if not out:
        return
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (d / name).write_text(text)


def cmd_eval(args) -> int:
    preds = read_predictions(args.predictions_file)
    m = args.bins if args.bins is not None else 10
    rep = full_report(preds, m)
    doc = rep.to_dict(include_bins=True)
    _write_files(
        args.out,
        {"report.json": dumps(doc), "report.csv": report_csv(rep), "bins.csv": bins_csv(rep.bins)},
    )
    sys.stdout.write(dumps(doc) if args.format == "json" else report_csv(rep))
    return EXIT_OK


def cmd_expected(args, cfg: ExperimentConfig) -> int:
    dist = ProbDistribution.parse(args.dist)
    model = SyntheticModel.parse(args.model)
    method = "quadrature" if args.quadrature else args.method
    rules = args.rule or ["accuracy", "brier", "balance"]
    records = []
    for rule in rules:
        base = {"rule": rule, "distribution": dist.label, "model": model.label}
        if method in ("quadrature", "both"):
            records.append({**base, "method": "quadrature", "value": expected_score_quadrature(rule, dist, model, QuadratureSpec())})
        if method in ("mc", "both"):
            mean, se = expected_score_mc(rule, dist, model, cfg.n, (cfg.seed,))
            records.append({**base, "method": "mc", "value": mean, "std_error": se, "n": cfg.n, "seed": cfg.seed})
    if args.true_ece:
        records.append(
            {"rule": "true_ece", "distribution": dist.label, "model": model.label, "method": "quadrature",
             "value": true_ece_analytic(dist, model)}
        )
    table = csv_text(EXPECTED_COLUMNS, ([r.get(c) for c in EXPECTED_COLUMNS] for r in records))
    _write_files(cfg.out, {"expected_score.json": dumps(records), "expected_score.csv": table})
    sys.stdout.write(dumps(records) if args.format == "json" else table)
    return EXIT_OK


def cmd_experiment(args, cfg: ExperimentConfig) -> int:
    if args.command == "train-eval":
        tcfg = TrainConfig(learning_rate=args.lr, max_iters=args.max_iters, tolerance=args.tolerance, l2=args.l2)
        if args.test_file and not args.train_file:
            raise ContractError("--test-file requires --train-file")
        doc = run_train_eval(cfg, tcfg, args.train_file, args.test_file)
    else:
        doc = RUNNERS[args.command](cfg)
    doc.timestamp = args.timestamp
    body = dumps(doc.to_dict())
    stem = args.command.replace("-", "_")
    _write_files(cfg.out, {f"{stem}.json": body, "config.yaml": cfg.dumps(), **doc.tables, **doc.extra_files})
    if args.format == "json":
        sys.stdout.write(body)
    else:
        sys.stdout.write(next(iter(doc.tables.values())))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "eval":
            return cmd_eval(args)
        cfg = _config_for(args)
        if args.dump_config:
            sys.stdout.write(cfg.dumps())
            return EXIT_OK
        print(f"seed: {cfg.seed}", file=sys.stderr)
        if args.command == "expected-score":
            return cmd_expected(args, cfg)
        return cmd_experiment(args, cfg)
    except ContractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
