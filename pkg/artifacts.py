"""Files the pipeline reads and writes besides sequences and flows."""
import csv
import logging
from pathlib import Path

import numpy as np
from PIL import Image
from pydantic import BaseModel

from errors import FormatError
from models import Problem
from schemas import SequenceReportSchema, SuiteReportSchema

logger = logging.getLogger(__name__)

FRAME_CSV_HEADER = "frame,mask_iou,box_iou,center_dist"


def write_mask_png(path: Path, mask: np.ndarray) -> None:
    """Binary mask as a 1-bit PNG."""
    Image.fromarray(mask.astype(np.uint8) * 255).convert("1").save(path)


def write_label_png(path: Path, labels: np.ndarray) -> None:
    """Superpixel label map as a 16-bit greyscale PNG."""
    Image.fromarray(labels.astype(np.uint16)).save(path)


def write_matrix_txt(path: Path, matrix: np.ndarray) -> None:
    np.savetxt(path, np.atleast_2d(matrix), fmt="%.12g", delimiter=" ")


def write_json(path: Path, model: BaseModel) -> None:
    Path(path).write_text(model.model_dump_json(indent=2))


def write_problem(path: Path, problem: Problem) -> None:
    """Plain-text problem: "n_prev n_curr d", then S, L and f rows (%.17g)."""
    lines = [f"{problem.n_prev} {problem.n_curr} {problem.d}", "# S"]
    lines += [" ".join(f"{v:.17g}" for v in row) for row in problem.S]
    lines.append("# L")
    lines += [" ".join(f"{v:.17g}" for v in row) for row in problem.L]
    lines.append("# f")
    lines += [f"{v:.17g}" for v in problem.f]
    Path(path).write_text("\n".join(lines) + "\n")


def read_problem(path: Path) -> Problem:
    """Parse the plain-text problem format; '#' lines and blank lines are skipped.

    Raises:
        FormatError: unreadable numbers, wrong row counts or row widths
    """
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FormatError(f"{path}: cannot read problem file ({exc})") from exc

    rows = [line.split() for line in text.splitlines() if line.strip() and not line.lstrip().startswith("#")]
    if not rows:
        raise FormatError(f"{path}: empty problem file")
    try:
        n_prev, n_curr, d = (int(v) for v in rows[0])
    except ValueError as exc:
        raise FormatError(f"{path}: header must be 'n_prev n_curr d', got {' '.join(rows[0])!r}") from exc
    if min(n_prev, n_curr) < 0 or d < 1 or n_prev + n_curr == 0:
        raise FormatError(f"{path}: invalid dimensions {n_prev} {n_curr} {d}")

    n = n_prev + n_curr
    body = rows[1:]
    if len(body) != 2 * n + n_prev:
        raise FormatError(f"{path}: expected {2 * n + n_prev} data rows, found {len(body)}")

    def block(start: int, count: int, width: int, name: str) -> np.ndarray:
        chunk = body[start:start + count]
        if any(len(row) != width for row in chunk):
            raise FormatError(f"{path}: every {name} row must hold {width} value(s)")
        try:
            return np.array(chunk, dtype=float).reshape(count, width)
        except ValueError as exc:
            raise FormatError(f"{path}: non-numeric value in {name}") from exc

    S = block(0, n, d, "S")
    L = block(n, n, n, "L")
    f = block(2 * n, n_prev, 1, "f").ravel()
    return Problem(S=S, L=L, f=f, n_prev=n_prev, n_curr=n_curr)


def write_frame_csv(path: Path, report: SequenceReportSchema) -> None:
    """Per-frame rows: frame, mask_iou, box_iou, center_dist."""
    rows = np.array([[f.frame, f.mask_iou, f.box_iou, f.center_dist] for f in report.frames], dtype=float)
    np.savetxt(path, rows.reshape(-1, 4), fmt=["%d", "%.6f", "%.6f", "%.6f"], delimiter=",",
               header=FRAME_CSV_HEADER, comments="")


def write_curves_csv(path: Path, suite: SuiteReportSchema) -> None:
    """Curve data for external plotting: one block per curve kind."""
    precision = np.column_stack([suite.precision_thresholds, suite.precision_curve])
    success = np.column_stack([suite.overlap_thresholds, suite.success_curve_mask, suite.success_curve_box])
    with open(path, "w") as fh:
        np.savetxt(fh, precision, fmt="%.6g", delimiter=",", header="threshold_px,precision", comments="")
        np.savetxt(fh, success, fmt="%.6g", delimiter=",", header="overlap,success_mask,success_box", comments="")


SUMMARY_FIELDS = ["name", "mean_mask_iou", "mean_box_iou", "precision_at_20", "auc_mask", "auc_box"]


def write_summary_csv(path: Path, suite: SuiteReportSchema) -> None:
    """One row per sequence plus an overall row."""
    rows = [r.model_dump(include=set(SUMMARY_FIELDS)) for r in suite.sequences]
    rows.append({"name": "overall", **suite.model_dump(include=set(SUMMARY_FIELDS[1:]))})
    write_rows_csv(path, SUMMARY_FIELDS, rows)


def write_rows_csv(path: Path, fieldnames: list[str], rows: list[dict]) -> None:
    """Rows as CSV; floats with six decimals, text fields quoted when needed."""
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: f"{v:.6f}" if isinstance(v, float) else v for k, v in row.items()})
