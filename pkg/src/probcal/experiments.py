"""Experiment drivers behind the CLI subcommands.

Each driver takes an ``ExperimentConfig`` and returns a ``ReportDocument``: a
JSON-ready dict plus the CSV tables that go next to it. Seeds are derived as
tuples from the base seed so any single cell can be regenerated on its own:

* case1:          (seed, distribution_index, model_index)
* sweep-bins:     (seed, replicate), shared by every tendency in that replicate
* sweep-datasize: (seed, size, replicate)
* train-eval:     (seed, profile_index) for both generation and the split

Replicates may run on ``cfg.workers`` threads; results are merged in
replicate order, so the worker count never changes the output.
"""
from __future__ import annotations

import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from probcal import __version__
from probcal.config import ExperimentConfig
from probcal.errors import ContractError
from probcal.expected import (
    expected_score_mc,
    expected_score_quadrature,
    optimal_accuracy_closed_form,
    true_ece_analytic,
    true_ece_uniform_closed_form,
)
from probcal.io import REPORT_COLUMNS, csv_text, dumps, report_row
from probcal.metrics import PredictionSet, full_report, score_balance, score_ece
from probcal.synthetic import ProbDistribution, SyntheticModel, generate_batch
from probcal.trainer import (
    PROFILES,
    SnapshotDataset,
    TrainConfig,
    generate_snapshots,
    load_dataset,
    predict_proba,
    split,
    train,
)

RULES = ("accuracy", "brier", "balance")
SE_FACTOR = 4.0

SWEEP_BINS_COLUMNS = ("m", "tendency", "replicate", "ece", "abs_balance")
SWEEP_SIZE_COLUMNS = ("size", "metric", "mean_abs_error", "std")
HIST_COLUMNS = ("condition", "variable", "bin", "lower", "upper", "count")
CASE1_COLUMNS = (
    "distribution",
    "model",
    *REPORT_COLUMNS,
    *(f"quad_{r}" for r in RULES),
    *(f"se_{r}" for r in RULES),
    "true_ece",
)
TRAIN_EVAL_COLUMNS = ("condition", *REPORT_COLUMNS, "true_ece_oracle", "optimal_accuracy")


@dataclass
class ReportDocument:
    experiment: str
    config: dict
    rows: list = field(default_factory=list)
    series: dict = field(default_factory=dict)
    histograms: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    operations: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)  # file name -> CSV text
    extra_files: dict = field(default_factory=dict)  # file name -> text
    timestamp: bool = False

    def record(self, op_id: str, call: str) -> str:
        self.operations.append({"id": op_id, "call": call})
        return op_id

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "config": self.config,
            "rows": self.rows,
            "series": self.series,
            "histograms": self.histograms,
            "summary": self.summary,
            "provenance": {
                "seed": self.config.get("seed"),
                "package_version": __version__,
                "numpy_version": np.__version__,
                "python_version": platform.python_version(),
                "timestamp": datetime.now(timezone.utc).isoformat() if self.timestamp else None,
                "operations": self.operations,
            },
        }


def _histogram(values: np.ndarray, bins: int) -> tuple[list[float], list[int]]:
    counts, edges = np.histogram(values, bins=bins, range=(0.0, 1.0))
    return edges.tolist(), counts.tolist()


def _add_histogram(doc: ReportDocument, condition: str, variable: str, values: np.ndarray, bins: int, source: str):
    edges, counts = _histogram(values, bins)
    doc.histograms.append(
        {"condition": condition, "variable": variable, "edges": edges, "counts": counts, "source": source}
    )


def _histogram_table(doc: ReportDocument) -> str:
    rows = []
    for h in doc.histograms:
        e = h["edges"]
        for k, c in enumerate(h["counts"]):
            rows.append((h["condition"], h["variable"], k + 1, e[k], e[k + 1], c))
    return csv_text(HIST_COLUMNS, rows)


def _seed_list(seed) -> list[int]:
    return list(seed)


def _ordered_map(fn, items, workers: int) -> list:
    """map() that may run on threads; results always come back in input order."""
    items = list(items)
    if workers <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def run_case1(cfg: ExperimentConfig) -> ReportDocument:
    """Scores of (by default) the optimal model under each operating condition.

    Monte Carlo values come from one batch per condition; quadrature values
    and the analytic true ECE are reported next to them with a 4-SE agreement
    flag per rule.
    """
    doc = ReportDocument("case1", cfg.to_dict())
    table = []
    for i, dlabel in enumerate(cfg.distributions):
        dist = ProbDistribution.parse(dlabel)
        for j, t in enumerate(cfg.tendencies):
            model = SyntheticModel(t)
            seed = (cfg.seed, i, j)
            cond = f"{dist.label}/{model.label}"
            batch = generate_batch(dist, model, cfg.n, seed)
            rep = full_report(batch.predictions, cfg.bins)
            call = f"generate_batch({dist.label}, {model.label}, n={cfg.n}, seed={_seed_list(seed)})"
            src = doc.record(f"{cond}/report", f"full_report({call}, m_bins={cfg.bins})")

            mc, quad, agree = {}, {}, {}
            for rule in RULES:
                mean, se = expected_score_mc(rule, dist, model, cfg.n, seed)
                mc[rule] = {
                    "value": mean,
                    "std_error": se,
                    "source": doc.record(
                        f"{cond}/mc/{rule}",
                        f"expected_score_mc({rule}, {dist.label}, {model.label}, n={cfg.n}, seed={_seed_list(seed)})",
                    ),
                }
                quad[rule] = expected_score_quadrature(rule, dist, model)
                doc.record(f"{cond}/quadrature/{rule}", f"expected_score_quadrature({rule}, {dist.label}, {model.label})")
                agree[rule] = abs(mean - quad[rule]) <= SE_FACTOR * se
            tece = true_ece_analytic(dist, model)
            doc.record(f"{cond}/true_ece", f"true_ece_analytic({dist.label}, {model.label})")

            doc.rows.append(
                {
                    "condition": cond,
                    "distribution": dist.label,
                    "model": model.label,
                    "seed": _seed_list(seed),
                    "report": rep.to_dict(include_bins=True),
                    "source": src,
                    "mc": mc,
                    "quadrature": quad,
                    "true_ece": tece,
                    "analytic_optimal_accuracy": optimal_accuracy_closed_form(dist),
                    "agreement_4se": agree,
                }
            )
            table.append(
                (dist.label, model.label, *report_row(rep), *(quad[r] for r in RULES), *(mc[r]["std_error"] for r in RULES), tece)
            )
            _add_histogram(doc, cond, "p", batch.true_p, cfg.hist_bins, src)
            _add_histogram(doc, cond, "p_hat", batch.predictions.p_hat, cfg.hist_bins, src)

    doc.summary = {"all_agree_4se": all(all(r["agreement_4se"].values()) for r in doc.rows)}
    doc.tables["case1.csv"] = csv_text(CASE1_COLUMNS, table)
    doc.tables["case1_histograms.csv"] = _histogram_table(doc)
    return doc


def _reference_ece(dist: ProbDistribution, model: SyntheticModel) -> float:
    if dist == ProbDistribution.uniform():
        return true_ece_uniform_closed_form(model.tendency)
    return true_ece_analytic(dist, model)


def run_sweep_bins(cfg: ExperimentConfig) -> ReportDocument:
    """ECE over a range of bin counts against the bin-free Balance score.

    Within a replicate every tendency sees the same true p and outcomes, so
    differences between models come from the models alone.
    """
    doc = ReportDocument("sweep-bins", cfg.to_dict())
    dist = ProbDistribution.parse(cfg.distributions[0])
    ms = list(range(cfg.bin_range[0], cfg.bin_range[1] + 1))
    models = [SyntheticModel(t) for t in cfg.tendencies]
    ece = {m.label: [] for m in models}
    bal = {m.label: [] for m in models}
    table = []

    def replicate(r):
        seed = (cfg.seed, r)
        out = []
        for model in models:
            batch = generate_batch(dist, model, cfg.n, seed)
            out.append((abs(score_balance(batch.predictions)), [score_ece(batch.predictions, m) for m in ms]))
        return out

    for r, results in enumerate(_ordered_map(replicate, range(cfg.replicates), cfg.workers)):
        seed = (cfg.seed, r)
        for model, (b, e) in zip(models, results):
            call = f"generate_batch({dist.label}, {model.label}, n={cfg.n}, seed={_seed_list(seed)})"
            doc.record(f"r{r}/{model.label}/balance", f"score_balance({call})")
            doc.record(f"r{r}/{model.label}/ece", f"score_ece({call}, m_bins=m) for m in {ms[0]}..{ms[-1]}")
            ece[model.label].append(e)
            bal[model.label].append(b)
            table.extend((m, model.tendency, r, ev, b) for m, ev in zip(ms, e))

    doc.series = {"m": ms, "ece": ece, "abs_balance": bal}

    truths = {m.label: _reference_ece(dist, m) for m in models}
    within = {
        m.label: sum(abs(b - truths[m.label]) <= 0.005 for b in bal[m.label]) for m in models
    }
    summary = {"true_ece": truths, "abs_balance_within_0.005": within, "replicates": cfg.replicates}
    # rank flips: the model with larger true ECE scoring a smaller binned ECE
    ordered = sorted(models, key=lambda m: truths[m.label])
    if len(ordered) >= 2:
        better, worse = ordered[0].label, ordered[-1].label
        flips = [
            [r, m]
            for r in range(cfg.replicates)
            for k, m in enumerate(ms)
            if ece[worse][r][k] < ece[better][r][k]
        ]
        summary["rank_flips"] = {"better": better, "worse": worse, "pairs": flips}
    doc.summary = summary
    doc.tables["sweep_bins.csv"] = csv_text(SWEEP_BINS_COLUMNS, table)
    return doc


def run_sweep_datasize(cfg: ExperimentConfig) -> ReportDocument:
    """Mean absolute error of ECE and |Balance| against the analytic true ECE per data size."""
    doc = ReportDocument("sweep-datasize", cfg.to_dict())
    dist = ProbDistribution.parse(cfg.distributions[0])
    model = SyntheticModel(cfg.tendencies[0])
    truth = cfg.true_ece if cfg.true_ece is not None else _reference_ece(dist, model)
    doc.record("true_ece", f"true_ece_analytic({dist.label}, {model.label})")

    series = {"size": list(cfg.sizes), "ece": {"mean_abs_error": [], "std": []}, "abs_balance": {"mean_abs_error": [], "std": []}}
    table = []
    for size in cfg.sizes:
        def replicate(r, size=size):
            batch = generate_batch(dist, model, size, (cfg.seed, size, r))
            return (
                abs(score_ece(batch.predictions, cfg.bins) - truth),
                abs(abs(score_balance(batch.predictions)) - truth),
            )

        pairs = _ordered_map(replicate, range(cfg.replicates), cfg.workers)
        errs = {"ece": [e for e, _ in pairs], "abs_balance": [b for _, b in pairs]}
        doc.record(
            f"size{size}",
            f"score_ece(., m_bins={cfg.bins}) and score_balance(.) on generate_batch({dist.label}, {model.label}, "
            f"n={size}, seed=[{cfg.seed}, {size}, r]) for r < {cfg.replicates}",
        )
        for metric, v in errs.items():
            arr = np.asarray(v)
            mae = float(np.mean(arr))
            std = float(np.std(arr, ddof=1)) if arr.size > 1 else None
            series[metric]["mean_abs_error"].append(mae)
            series[metric]["std"].append(std)
            table.append((size, metric, mae, std))
    doc.series = series
    doc.summary = {
        "true_ece": truth,
        "balance_better_sizes": [
            s
            for s, e, b in zip(cfg.sizes, series["ece"]["mean_abs_error"], series["abs_balance"]["mean_abs_error"])
            if b < e
        ],
    }
    doc.tables["sweep_datasize.csv"] = csv_text(SWEEP_SIZE_COLUMNS, table)
    return doc


def _evaluate_trained(doc, cond, model, test: SnapshotDataset, cfg: ExperimentConfig, dist, table, src_train):
    p = predict_proba(model, test.features)
    preds = PredictionSet(p, test.outcomes)
    rep = full_report(preds, cfg.bins)
    src = doc.record(f"{cond}/report", f"full_report(predict_proba({src_train}, test), m_bins={cfg.bins})")
    row = {
        "condition": cond,
        "n_test": test.n,
        "report": rep.to_dict(include_bins=True),
        "source": src,
        "train": {"iterations": model.iterations, "final_loss": model.final_loss, "converged": model.converged},
        "true_ece_oracle": None,
        "oracle_report": None,
        "optimal_accuracy": None,
    }
    if test.true_p is not None:
        # ground truth known: the outcome frequency at each estimate is the generator's p
        row["true_ece_oracle"] = float(np.mean(np.abs(p - test.true_p)))
        row["oracle_report"] = full_report(PredictionSet(test.true_p, test.outcomes), cfg.bins).to_dict()
        doc.record(f"{cond}/oracle", "mean |p_hat - true_p| and full_report(true_p, test outcomes)")
    if dist is not None:
        row["distribution"] = dist.label
        row["optimal_accuracy"] = optimal_accuracy_closed_form(dist)
    _add_histogram(doc, cond, "p_hat", p, cfg.hist_bins, src)
    if test.true_p is not None:
        _add_histogram(doc, cond, "p", test.true_p, cfg.hist_bins, src)
    doc.rows.append(row)
    table.append((cond, *report_row(rep), row["true_ece_oracle"], row["optimal_accuracy"]))


def run_train_eval(
    cfg: ExperimentConfig,
    train_cfg: TrainConfig | None = None,
    train_file=None,
    test_file=None,
) -> ReportDocument:
    """Train logistic regression and score it on held-out data.

    File mode reads ``train_file`` (split by ``train_fraction`` unless a
    ``test_file`` is given); otherwise one synthetic dataset of ``n`` snapshots
    is generated per profile.
    """
    train_cfg = train_cfg or TrainConfig()
    doc = ReportDocument("train-eval", cfg.to_dict())
    doc.config["train"] = {
        "learning_rate": train_cfg.learning_rate,
        "max_iters": train_cfg.max_iters,
        "tolerance": train_cfg.tolerance,
        "l2": train_cfg.l2,
    }
    table = []
    if train_file is not None:
        ds = load_dataset(train_file)
        if test_file is not None:
            tr, te = ds, load_dataset(test_file)
        else:
            tr, te = split(ds, cfg.train_fraction, (cfg.seed, 0))
        model = train(tr, train_cfg)
        src = doc.record("file/train", f"train(load_dataset({str(train_file)!r}))")
        _evaluate_trained(doc, "file", model, te, cfg, None, table, src)
        doc.extra_files["model_file.json"] = dumps(model.to_dict())
    else:
        if test_file is not None:
            raise ContractError("a test file needs a train file")
        for k, profile in enumerate(cfg.profiles):
            if profile not in PROFILES:
                raise ContractError(f"unknown profile {profile!r}; expected one of {sorted(PROFILES)}")
            seed = (cfg.seed, k)
            ds = generate_snapshots(cfg.n, profile, seed)
            tr, te = split(ds, cfg.train_fraction, seed)
            model = train(tr, train_cfg)
            src = doc.record(
                f"{profile}/train",
                f"train(split(generate_snapshots({cfg.n}, {profile}, seed={_seed_list(seed)}), {cfg.train_fraction}))",
            )
            _evaluate_trained(doc, profile, model, te, cfg, PROFILES[profile], table, src)
            doc.extra_files[f"model_{profile}.json"] = dumps(model.to_dict())
        accs = {r["condition"]: r["report"]["accuracy"] for r in doc.rows}
        doc.summary = {"accuracy": accs}
    doc.tables["train_eval.csv"] = csv_text(TRAIN_EVAL_COLUMNS, table)
    doc.tables["train_eval_histograms.csv"] = _histogram_table(doc)
    return doc


RUNNERS = {
    "case1": run_case1,
    "sweep-bins": run_sweep_bins,
    "sweep-datasize": run_sweep_datasize,
    "train-eval": run_train_eval,
}
