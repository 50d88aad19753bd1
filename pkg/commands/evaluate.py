import logging
from pathlib import Path

import click
from pydantic import ValidationError

from artifacts import write_curves_csv, write_frame_csv, write_json, write_summary_csv
from commands.common import guarded
from dataset import load_masks
from errors import FormatError, InputError
from metrics import aggregate, align_predictions, evaluate_sequence
from schemas import SequenceReportSchema, SuiteReportSchema, TrackResultSchema

logger = logging.getLogger(__name__)


def _predicted_boxes(result_path: Path) -> dict:
    """Boxes recorded by the tracker, keyed by frame index; empty if none were saved."""
    if not result_path.is_file():
        return {}
    try:
        result = TrackResultSchema.model_validate_json(result_path.read_text())
    except ValidationError as exc:
        raise FormatError(f"{result_path}: invalid tracking result ({exc})") from exc
    return dict(enumerate(result.boxes))


def evaluate_directory(predictions: Path, ground_truth: Path, names: list[str]) -> SuiteReportSchema:
    """Compare <predictions>/<name>/masks with <ground_truth>/<name>/masks.

    Raises:
        InputError: missing folders, or an annotated frame without prediction
    """
    if not predictions.is_dir():
        raise InputError(f"Prediction directory {predictions} does not exist")
    if not ground_truth.is_dir():
        raise InputError(f"Ground-truth directory {ground_truth} does not exist")
    names = names or sorted(p.name for p in predictions.iterdir() if (p / "masks").is_dir())
    if not names:
        raise InputError(f"No predicted sequences found in {predictions}")

    reports: list[SequenceReportSchema] = []
    for name in names:
        gt_masks = load_masks(ground_truth / name / "masks")
        if not gt_masks:
            raise InputError(f"Sequence {name}: no ground-truth masks")
        pred_masks = load_masks(predictions / name / "masks")
        result = align_predictions(
            name, gt_masks, pred_masks, _predicted_boxes(predictions / name / "result.json") or None,
        )
        reports.append(evaluate_sequence(result))
    return aggregate(reports)


def write_report(output_dir: Path, suite: SuiteReportSchema) -> None:
    output_dir.mkdir(parents=True, exist_ok=True)
    write_json(output_dir / "report.json", suite)
    write_summary_csv(output_dir / "summary.csv", suite)
    write_curves_csv(output_dir / "curves.csv", suite)
    for report in suite.sequences:
        write_frame_csv(output_dir / f"{report.name}_frames.csv", report)


@click.command("eval")
@click.option("--predictions", type=click.Path(path_type=Path), required=True,
              help="Output directory of `track`")
@click.option("--ground-truth", type=click.Path(path_type=Path), required=True,
              help="Sequence root holding <name>/masks")
@click.option("--sequence", "sequences", multiple=True, help="Sequence to evaluate (repeatable, default: all)")
@click.option("--output-dir", type=click.Path(path_type=Path), required=True, help="Where reports are written")
@guarded
def eval_command(predictions: Path, ground_truth: Path, sequences: tuple, output_dir: Path):
    """Mask IoU, box IoU, precision@20 and success AUCs of tracked sequences."""
    suite = evaluate_directory(predictions, ground_truth, list(sequences))
    write_report(output_dir, suite)
    click.echo(
        f"mask IoU {suite.mean_mask_iou:.4f}  box IoU {suite.mean_box_iou:.4f}  "
        f"precision@20 {suite.precision_at_20:.4f}  AUC mask {suite.auc_mask:.4f}  AUC box {suite.auc_box:.4f}"
    )
