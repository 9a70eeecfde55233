"""Reading prediction files and writing reports.

Prediction files are CSV with a ``p_hat,outcome`` header or a JSON array of
``{"p_hat": ..., "outcome": ...}`` objects. Row numbers in errors count data
rows from 1.
"""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from probcal.errors import ContractError
from probcal.metrics import BinStats, MetricReport, PredictionSet
from probcal.synthetic import ScoredBatch

BIN_COLUMNS = ("bin_index", "lower", "upper", "count", "mean_outcome", "mean_p_hat", "gap", "empty")
REPORT_COLUMNS = (
    "n",
    "accuracy",
    "brier",
    "brier_calibration",
    "brier_sharpness",
    "ece",
    "ece_bins",
    "mce",
    "balance",
)
BATCH_COLUMNS = ("true_p", "p_hat", "outcome")


def _check_row(r: int, p_raw, y_raw, where: str) -> tuple[float, int]:
    try:
        p = float(p_raw)
    except (TypeError, ValueError):
        raise ContractError(f"{where}row {r}: p_hat is not a number: {p_raw!r}") from None
    if not math.isfinite(p) or not 0.0 <= p <= 1.0:
        raise ContractError(f"{where}row {r}: p_hat must lie in [0, 1], got {p_raw!r}")
    if isinstance(y_raw, str):
        y_raw = y_raw.strip()
        ok = y_raw in ("0", "1")
    else:
        ok = not isinstance(y_raw, bool) and y_raw in (0, 1)
    if not ok:
        raise ContractError(f"{where}row {r}: outcome must be 0 or 1, got {y_raw!r}")
    return p, int(y_raw)


def parse_predictions_csv(text: str, where: str = "") -> PredictionSet:
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ContractError(f"{where}empty input") from None
    if "p_hat" not in header or "outcome" not in header:
        raise ContractError(f"{where}header must contain 'p_hat' and 'outcome', got {header}")
    ip, iy = header.index("p_hat"), header.index("outcome")
    ps, ys = [], []
    for r, row in enumerate(reader, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ContractError(f"{where}row {r}: expected {len(header)} fields, got {len(row)}")
        p, y = _check_row(r, row[ip], row[iy], where)
        ps.append(p)
        ys.append(y)
    return PredictionSet(np.array(ps, dtype=np.float64), np.array(ys, dtype=np.int8))


def parse_predictions_json(text: str, where: str = "") -> PredictionSet:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ContractError(f"{where}invalid JSON: {exc}") from None
    if not isinstance(data, list):
        raise ContractError(f"{where}expected a JSON array of prediction objects")
    ps, ys = [], []
    for r, rec in enumerate(data, start=1):
        if not isinstance(rec, dict) or "p_hat" not in rec or "outcome" not in rec:
            raise ContractError(f"{where}row {r}: expected an object with 'p_hat' and 'outcome'")
        p, y = _check_row(r, rec["p_hat"], rec["outcome"], where)
        ps.append(p)
        ys.append(y)
    return PredictionSet(np.array(ps, dtype=np.float64), np.array(ys, dtype=np.int8))


def read_predictions(path) -> PredictionSet:
    """Load a prediction file, choosing the parser from the suffix or the first character."""
    path = Path(path)
    if not path.is_file():
        raise ContractError(f"predictions file not found: {path}")
    text = path.read_text()
    where = f"{path}: "
    if path.suffix.lower() == ".json" or text.lstrip().startswith("["):
        return parse_predictions_json(text, where)
    return parse_predictions_csv(text, where)


def write_predictions_csv(preds: PredictionSet, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["p_hat", "outcome"])
        for p, y in zip(preds.p_hat.tolist(), preds.outcome.tolist()):
            w.writerow([repr(p), y])


def write_predictions_json(preds: PredictionSet, path) -> None:
    recs = [{"p_hat": p, "outcome": y} for p, y in zip(preds.p_hat.tolist(), preds.outcome.tolist())]
    Path(path).write_text(json.dumps(recs) + "\n")


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def bins_csv(bins: Sequence[BinStats]) -> str:
    return csv_text(BIN_COLUMNS, ([getattr(b, c) for c in BIN_COLUMNS] for b in bins))


def report_row(rep: MetricReport) -> list:
    d = rep.brier_decomposition
    return [rep.n, rep.accuracy, rep.brier, d.calibration_term, d.sharpness_term, rep.ece, rep.ece_bins, rep.mce, rep.balance]


def report_csv(rep: MetricReport) -> str:
    return csv_text(REPORT_COLUMNS, [report_row(rep)])


def batch_csv(batch: ScoredBatch) -> str:
    """CSV of a synthetic batch; ``true_p`` is the hidden ground truth, not a model output."""
    return csv_text(BATCH_COLUMNS, batch.rows())


def batch_json(batch: ScoredBatch) -> str:
    seed = list(batch.seed) if not isinstance(batch.seed, int) else batch.seed
    doc = {
        "seed": seed,
        "hidden_truth_column": "true_p",
        "items": [{"true_p": t, "p_hat": p, "outcome": y} for t, p, y in batch.rows()],
    }
    return json.dumps(doc) + "\n"


def dumps(doc) -> str:
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"
