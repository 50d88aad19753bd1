import csv
import json

import numpy as np
import pytest
from PIL import Image

from artifacts import write_problem
from dataset import save_sequence, synth_sequence
from main import cli
from models import Problem
from schemas import RunConfig, SolverConfig, SynthSpec
from solver import solve


def write_small_problem(path, S, f):
    S = np.asarray(S, dtype=float)
    n_prev = len(f)
    n = S.shape[0]
    L = np.zeros((n, n))
    L[0, 0] = L[1, 1] = 1.0
    L[0, 1] = L[1, 0] = -1.0
    write_problem(path, Problem(S=S, L=L, f=np.asarray(f, dtype=float), n_prev=n_prev, n_curr=n - n_prev))


def test_help_lists_commands(runner):
    result = runner.invoke(cli, ["--help"])
    assert result.exit_code == 0
    for name in ("track", "eval", "solve", "synth", "ablate"):
        assert name in result.output


def test_unknown_option_is_input_error(runner):
    result = runner.invoke(cli, ["track", "--bogus"])
    assert result.exit_code == 1


def test_track_writes_masks_and_result(runner, sequence_root, tmp_path):
    out = tmp_path / "out"
    result = runner.invoke(cli, ["track", "--sequence-root", str(sequence_root), "--output-dir", str(out)])
    assert result.exit_code == 0, result.output
    masks = sorted((out / "square" / "masks").glob("*.png"))
    assert [p.name for p in masks] == [f"{i:05d}.png" for i in range(5)]
    track_result = json.loads((out / "square" / "result.json").read_text())
    assert track_result["mode"] == "mixed"
    assert len(track_result["boxes"]) == 5
    assert len(track_result["diagnostics"]) == 5
    assert (out / "config.json").is_file()


def test_track_records_mode(runner, sequence_root, tmp_path):
    out = tmp_path / "out"
    result = runner.invoke(cli, [
        "track", "--sequence-root", str(sequence_root), "--output-dir", str(out),
        "--mode", "only-smoothing", "--fidelity", "paper-literal",
    ])
    assert result.exit_code == 0, result.output
    track_result = json.loads((out / "square" / "result.json").read_text())
    assert track_result["mode"] == "only-smoothing"
    assert track_result["fidelity"] == "clamp-then-smooth"


def test_track_missing_input_writes_nothing(runner, tmp_path):
    out = tmp_path / "out"
    result = runner.invoke(cli, ["track", "--sequence-root", str(tmp_path / "missing"), "--output-dir", str(out)])
    assert result.exit_code == 1
    assert not out.exists()


def test_track_missing_flow_dir(runner, sequence_root, tmp_path):
    result = runner.invoke(cli, [
        "track", "--sequence-root", str(sequence_root), "--output-dir", str(tmp_path / "out"),
        "--flow-dir", str(tmp_path / "no_flow"),
    ])
    assert result.exit_code == 1


def test_track_invalid_parameter(runner, sequence_root, tmp_path):
    result = runner.invoke(cli, [
        "track", "--sequence-root", str(sequence_root), "--output-dir", str(tmp_path / "out"),
        "--sigma", "0",
    ])
    assert result.exit_code == 1


def test_track_in_parallel(runner, sequence_root, tmp_path):
    save_sequence(synth_sequence(SynthSpec(name="second", length=3, seed=8)), sequence_root)
    out = tmp_path / "out"
    result = runner.invoke(cli, [
        "track", "--sequence-root", str(sequence_root), "--output-dir", str(out), "--jobs", "2",
    ])
    assert result.exit_code == 0, result.output
    assert (out / "square" / "result.json").is_file()
    assert (out / "second" / "result.json").is_file()


def test_config_file_with_flag_override(runner, sequence_root, tmp_path):
    out = tmp_path / "out"
    config_path = tmp_path / "run.json"
    config_path.write_text(RunConfig(
        sequence_root=sequence_root, output_dir=out, target_superpixels=80,
    ).model_dump_json())
    result = runner.invoke(cli, ["track", "--config", str(config_path), "--superpixels", "50"])
    assert result.exit_code == 0, result.output
    saved = RunConfig.model_validate_json((out / "config.json").read_text())
    assert saved.target_superpixels == 50
    assert saved.sequence_root == sequence_root


def test_bad_config_file(runner, tmp_path):
    config_path = tmp_path / "run.json"
    config_path.write_text("{not json")
    result = runner.invoke(cli, ["track", "--config", str(config_path)])
    assert result.exit_code == 1


def test_run_config_json_round_trip(tmp_path):
    config = RunConfig(sequence_root=tmp_path, sequences=["a", "b"], jobs=3, propagation_mode="none")
    assert RunConfig.model_validate_json(config.model_dump_json()) == config


def test_eval_perfect_predictions(runner, sequence_root, tmp_path):
    out = tmp_path / "report"
    result = runner.invoke(cli, [
        "eval", "--predictions", str(sequence_root), "--ground-truth", str(sequence_root), "--output-dir", str(out),
    ])
    assert result.exit_code == 0, result.output
    report = json.loads((out / "report.json").read_text())
    assert report["mean_mask_iou"] == 1.0
    assert report["mean_box_iou"] == 1.0
    assert report["precision_at_20"] == 1.0
    assert (out / "summary.csv").is_file()
    assert (out / "curves.csv").is_file()
    assert (out / "square_frames.csv").read_text().startswith("frame,mask_iou,box_iou,center_dist")


def test_eval_empty_predictions(runner, sequence_root, tmp_path):
    masks_dir = tmp_path / "pred" / "square" / "masks"
    masks_dir.mkdir(parents=True)
    for i in range(5):
        Image.fromarray(np.zeros((64, 64), dtype=np.uint8)).save(masks_dir / f"{i:05d}.png")
    out = tmp_path / "report"
    result = runner.invoke(cli, [
        "eval", "--predictions", str(tmp_path / "pred"), "--ground-truth", str(sequence_root),
        "--output-dir", str(out),
    ])
    assert result.exit_code == 0, result.output
    report = json.loads((out / "report.json").read_text())
    assert report["mean_mask_iou"] == 0.0
    assert report["mean_box_iou"] == 0.0
    assert report["precision_at_20"] == 0.0


def test_eval_missing_prediction_frames(runner, sequence_root, tmp_path):
    masks_dir = tmp_path / "pred" / "square" / "masks"
    masks_dir.mkdir(parents=True)
    Image.fromarray(np.zeros((64, 64), dtype=np.uint8)).save(masks_dir / "00000.png")
    result = runner.invoke(cli, [
        "eval", "--predictions", str(tmp_path / "pred"), "--ground-truth", str(sequence_root),
        "--output-dir", str(tmp_path / "report"),
    ])
    assert result.exit_code == 1


def test_track_then_eval(runner, sequence_root, tmp_path):
    out = tmp_path / "out"
    assert runner.invoke(cli, ["track", "--sequence-root", str(sequence_root), "--output-dir", str(out)]).exit_code == 0
    result = runner.invoke(cli, [
        "eval", "--predictions", str(out), "--ground-truth", str(sequence_root),
        "--output-dir", str(tmp_path / "report"),
    ])
    assert result.exit_code == 0, result.output
    report = json.loads((tmp_path / "report" / "report.json").read_text())
    assert report["sequences"][0]["frames"][0]["mask_iou"] == 1.0


def test_solve_empty_seed(runner, tmp_path):
    problem = tmp_path / "problem.txt"
    write_small_problem(problem, [[1.0], [2.0]], [0.0])
    output = tmp_path / "y.json"
    result = runner.invoke(cli, ["solve", str(problem), "--output", str(output)])
    assert result.exit_code == 0, result.output
    solution = json.loads(output.read_text())
    assert solution["y"] == [0.0, 0.0]
    assert solution["fidelity"] == "exact-minimizer"
    assert solution["converged"]


def test_solve_paper_literal_alias(runner, tmp_path):
    problem = tmp_path / "problem.txt"
    write_small_problem(problem, [[1.0], [2.0]], [1.0])
    output = tmp_path / "y.json"
    result = runner.invoke(cli, ["solve", str(problem), "--fidelity", "paper-literal", "--output", str(output)])
    assert result.exit_code == 0, result.output
    solution = json.loads(output.read_text())
    assert solution["fidelity"] == "clamp-then-smooth"
    assert all(v >= 0 for v in solution["y"])


def test_solve_bad_problem_file(runner, tmp_path):
    problem = tmp_path / "problem.txt"
    problem.write_text("2 1\nnot a problem\n")
    assert runner.invoke(cli, ["solve", str(problem)]).exit_code == 1
    assert runner.invoke(cli, ["solve", str(tmp_path / "absent.txt")]).exit_code == 1


def test_solve_singular_features(runner, tmp_path):
    problem = tmp_path / "problem.txt"
    write_small_problem(problem, [[0.0], [0.0]], [1.0])
    result = runner.invoke(cli, ["solve", str(problem)])
    assert result.exit_code == 2


def test_solve_negative_alpha(runner, tmp_path):
    problem = tmp_path / "problem.txt"
    write_small_problem(problem, [[1.0], [2.0]], [1.0])
    assert runner.invoke(cli, ["solve", str(problem), "--alpha", "-1"]).exit_code == 1


def test_synth_writes_sequences(runner, tmp_path):
    spec_file = tmp_path / "specs.json"
    spec_file.write_text(json.dumps([{"name": "one", "length": 3}, {"name": "two", "length": 2}]))
    root = tmp_path / "root"
    result = runner.invoke(cli, ["synth", "--spec", str(spec_file), "--output-root", str(root), "--seed", "4"])
    assert result.exit_code == 0, result.output
    assert len(list((root / "one" / "frames").glob("*.png"))) == 3
    assert len(list((root / "two" / "masks").glob("*.png"))) == 2


def test_synth_invalid_spec(runner, tmp_path):
    spec_file = tmp_path / "specs.json"
    spec_file.write_text(json.dumps({"length": 0}))
    result = runner.invoke(cli, ["synth", "--spec", str(spec_file), "--output-root", str(tmp_path / "root")])
    assert result.exit_code == 1


@pytest.mark.parametrize("extra", [[], ["--mode", "none"]])
def test_ablate_table(runner, sequence_root, tmp_path, extra):
    out = tmp_path / "ablation"
    result = runner.invoke(cli, ["ablate", "--sequence-root", str(sequence_root), "--output-dir", str(out), *extra])
    assert result.exit_code == 0, result.output
    table = json.loads((out / "ablation.json").read_text())
    assert table["modes"] == ["mixed", "only-smoothing", "none"]
    assert set(table["rows"]) == {"Success-Seg", "Success-Box", "Precision"}
    for row in table["rows"].values():
        assert set(row) == {"mixed", "only-smoothing", "none"}
        assert all(0.0 <= v <= 1.0 for v in row.values())
    assert (out / "ablation.csv").read_text().startswith("metric,mixed,only-smoothing,none")


def test_eval_known_offsets(runner, tmp_path):
    gt_dir = tmp_path / "gt" / "offset" / "masks"
    pred_dir = tmp_path / "pred" / "offset" / "masks"
    gt_dir.mkdir(parents=True)
    pred_dir.mkdir(parents=True)
    for i, shift in enumerate((0, 5)):
        gt = np.zeros((40, 40), dtype=np.uint8)
        gt[10:20, 10:20] = 255
        pred = np.zeros((40, 40), dtype=np.uint8)
        pred[10:20, 10 + shift:20 + shift] = 255
        Image.fromarray(gt).save(gt_dir / f"{i:05d}.png")
        Image.fromarray(pred).save(pred_dir / f"{i:05d}.png")
    out = tmp_path / "report"
    result = runner.invoke(cli, [
        "eval", "--predictions", str(tmp_path / "pred"), "--ground-truth", str(tmp_path / "gt"),
        "--output-dir", str(out),
    ])
    assert result.exit_code == 0, result.output
    report = json.loads((out / "report.json").read_text())
    frames = report["sequences"][0]["frames"]
    assert frames[1]["mask_iou"] == pytest.approx(1 / 3)
    assert frames[1]["box_iou"] == pytest.approx(1 / 3)
    assert frames[1]["center_dist"] == pytest.approx(5.0)
    assert report["mean_mask_iou"] == pytest.approx(2 / 3)
    assert report["precision_at_20"] == 1.0


def test_solve_matches_in_process_solver(runner, tmp_path, problem_factory):
    problem = problem_factory(5, 6)
    path = tmp_path / "problem.txt"
    write_problem(path, problem)
    output = tmp_path / "y.json"
    result = runner.invoke(cli, ["solve", str(path), "--output", str(output)])
    assert result.exit_code == 0, result.output
    expected = solve(problem, SolverConfig())
    solution = json.loads(output.read_text())
    np.testing.assert_allclose(solution["y"], expected.y, atol=1e-6)
    assert solution["iterations"] == expected.iterations


def test_unknown_group_option_is_input_error(runner):
    result = runner.invoke(cli, ["--bogus"])
    assert result.exit_code == 1


def test_eval_rejects_malformed_boxes(runner, sequence_root, tmp_path):
    out = tmp_path / "out"
    assert runner.invoke(cli, ["track", "--sequence-root", str(sequence_root), "--output-dir", str(out)]).exit_code == 0
    result_path = out / "square" / "result.json"
    track_result = json.loads(result_path.read_text())
    track_result["boxes"] = [[1, 2, 3]] * 5
    result_path.write_text(json.dumps(track_result))
    result = runner.invoke(cli, [
        "eval", "--predictions", str(out), "--ground-truth", str(sequence_root),
        "--output-dir", str(tmp_path / "report"),
    ])
    assert result.exit_code == 1
    assert isinstance(result.exception, SystemExit)


def test_eval_summary_quotes_sequence_names(runner, tmp_path):
    name = "left,right"
    for root in ("gt", "pred"):
        masks_dir = tmp_path / root / name / "masks"
        masks_dir.mkdir(parents=True)
        mask = np.zeros((20, 20), dtype=np.uint8)
        mask[5:10, 5:10] = 255
        Image.fromarray(mask).save(masks_dir / "00000.png")
    out = tmp_path / "report"
    result = runner.invoke(cli, [
        "eval", "--predictions", str(tmp_path / "pred"), "--ground-truth", str(tmp_path / "gt"),
        "--output-dir", str(out),
    ])
    assert result.exit_code == 0, result.output
    with open(out / "summary.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["name", "mean_mask_iou", "mean_box_iou", "precision_at_20", "auc_mask", "auc_box"]
    assert rows[1][0] == name
    assert len(rows[1]) == 6
    assert rows[2][0] == "overall"
