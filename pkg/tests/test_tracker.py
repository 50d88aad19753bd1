import logging

import numpy as np
import pytest

import tracker as tracker_module
from dataset import synth_sequence
from errors import InputError
from flow import write_flo
from metrics import evaluate_tracking, mask_iou
from models import FlowField, SuperpixelMap
from schemas import SynthSpec, ThresholdPolicy, TrackerConfig
from tracker import (
    SegmentationTracker,
    candidate_region,
    indicator_from_mask,
    mask_to_box,
    threshold_mask,
)

STATIC = SynthSpec(name="static", length=2, velocity=(0.0, 0.0), noise=0.0, seed=1)


@pytest.fixture
def tracker():
    return SegmentationTracker(TrackerConfig())


def test_candidate_region_scales_about_centre():
    assert candidate_region((10, 10, 20, 20), (100, 100), 1.5) == (5, 5, 30, 30)
    assert candidate_region((10, 10, 20, 20), (100, 100), 1.0) == (10, 10, 20, 20)


def test_candidate_region_is_clamped_to_frame():
    assert candidate_region((0, 0, 10, 10), (100, 100), 2.0) == (0, 0, 15, 15)
    assert candidate_region((90, 40, 10, 20), (64, 100), 2.0) == (85, 30, 15, 34)


def test_threshold_mask_minmax():
    spmap = SuperpixelMap(np.array([[0, 1], [2, 3]]))
    mask = threshold_mask(np.array([0.0, 0.4, 0.6, 1.0]), spmap)
    np.testing.assert_array_equal(mask, [[False, False], [True, True]])


def test_threshold_mask_keeps_two_strongest_of_three():
    spmap = SuperpixelMap(np.array([[0, 1, 2]]))
    mask = threshold_mask(np.array([0.9, 0.6, 0.1]), spmap)
    np.testing.assert_array_equal(mask, [[True, True, False]])


def test_threshold_mask_constant_scores():
    spmap = SuperpixelMap(np.array([[0, 1]]))
    assert not threshold_mask(np.zeros(2), spmap).any()
    assert threshold_mask(np.full(2, 0.3), spmap).all()


def test_threshold_mask_positive_policy():
    spmap = SuperpixelMap(np.array([[0, 1, 2]]))
    mask = threshold_mask(np.array([0.0, 1e-3, 2.0]), spmap, ThresholdPolicy.POSITIVE)
    np.testing.assert_array_equal(mask, [[False, True, True]])


def test_threshold_mask_score_count_mismatch():
    with pytest.raises(InputError):
        threshold_mask(np.zeros(3), SuperpixelMap(np.array([[0, 1]])))


def test_mask_to_box():
    mask = np.zeros((6, 8), dtype=bool)
    assert mask_to_box(mask) is None
    mask[2, 3] = True
    assert mask_to_box(mask) == (3, 2, 1, 1)
    mask[4, 6] = True
    assert mask_to_box(mask) == (3, 2, 4, 3)


def test_indicator_uses_half_coverage():
    spmap = SuperpixelMap(np.array([[0, 0, 1, 1], [0, 0, 1, 1]]))
    region_mask = np.array([[1, 1, 1, 0], [0, 0, 0, 0]], dtype=bool)
    np.testing.assert_array_equal(indicator_from_mask(region_mask, spmap), [1.0, 0.0])


def test_indicator_of_thresholded_mask_is_stable(rng):
    labels = np.repeat(np.arange(6), 4).reshape(4, 6)
    spmap = SuperpixelMap(labels)
    mask = threshold_mask(rng.random(6), spmap)
    f = indicator_from_mask(mask, spmap)
    np.testing.assert_array_equal(threshold_mask(f, spmap, ThresholdPolicy.POSITIVE), mask)


def test_init_rejects_bad_masks(tracker):
    frame = np.zeros((32, 32, 3), dtype=np.uint8)
    with pytest.raises(InputError):
        tracker.init(frame, np.zeros((32, 32), dtype=bool))
    with pytest.raises(InputError):
        tracker.init(frame, np.ones((16, 32), dtype=bool))


def test_init_marks_target_superpixels(tracker):
    sequence = synth_sequence(STATIC)
    state = tracker.init(sequence.frames[0], sequence.masks[0])
    assert state.frame_index == 0
    assert state.box == mask_to_box(sequence.masks[0])
    assert state.f.shape == (state.superpixel_map.k,)
    assert 0 < state.f.sum() < state.superpixel_map.k
    assert state.features.shape == (state.superpixel_map.k, 3)


def test_identical_frames_keep_the_mask(tracker):
    sequence = synth_sequence(STATIC)
    state = tracker.init(sequence.frames[0], sequence.masks[0])
    next_state, diagnostics = tracker.step(state, sequence.frames[1])
    assert mask_iou(next_state.mask, sequence.masks[1]) >= 0.9
    assert diagnostics.frame_index == 1
    assert not diagnostics.lost
    assert diagnostics.n_prev == state.superpixel_map.k


def test_empty_seed_falls_back_to_previous_box(tracker, caplog):
    sequence = synth_sequence(STATIC)
    dot = np.zeros_like(sequence.masks[0])
    dot[30, 30] = True
    state = tracker.init(sequence.frames[0], dot)
    assert not state.f.any()

    with caplog.at_level(logging.WARNING):
        lost, diagnostics = tracker.step(state, sequence.frames[1])
    assert diagnostics.lost
    assert lost.lost
    assert lost.box == state.box
    assert not lost.mask.any()
    assert lost.superpixel_map is state.superpixel_map
    assert "empty mask" in caplog.text


def test_step_rejects_size_mismatch(tracker):
    sequence = synth_sequence(STATIC)
    state = tracker.init(sequence.frames[0], sequence.masks[0])
    with pytest.raises(InputError):
        tracker.step(state, np.zeros((32, 32, 3), dtype=np.uint8))
    bad_flow = FlowField(np.zeros((10, 10)), np.zeros((10, 10)))
    with pytest.raises(InputError):
        tracker.step(state, sequence.frames[1], bad_flow)


def test_precomputed_flow_is_used(tmp_path, tracker):
    sequence = synth_sequence(STATIC)
    write_flo(tmp_path / "0.flo", FlowField(np.zeros((64, 64)), np.zeros((64, 64))))
    tracked = tracker.track_sequence(sequence, flow_dir=tmp_path)
    assert mask_iou(tracked.masks[1], sequence.masks[1]) >= 0.9


def test_missing_flow_file_is_estimated(tmp_path, tracker, caplog):
    sequence = synth_sequence(STATIC)
    with caplog.at_level(logging.WARNING):
        tracked = tracker.track_sequence(sequence, flow_dir=tmp_path)
    assert "No precomputed flow" in caplog.text
    assert len(tracked.masks) == 2


def test_debug_dump_writes_step_files(tmp_path):
    sequence = synth_sequence(STATIC)
    tracker = SegmentationTracker(TrackerConfig(), debug_dir=tmp_path)
    state = tracker.init(sequence.frames[0], sequence.masks[0])
    tracker.step(state, sequence.frames[1])
    step_dir = tmp_path / "00001"
    for name in ("labels_prev.png", "labels_curr.png", "A.txt", "A_m.txt", "A_h.txt", "problem.txt"):
        assert (step_dir / name).is_file(), name


def test_track_sequence_requires_first_mask(tracker):
    sequence = synth_sequence(STATIC)
    sequence.masks[0] = None
    with pytest.raises(InputError):
        tracker.track_sequence(sequence)


def test_moving_square_is_tracked(tracker):
    sequence = synth_sequence(SynthSpec(name="moving_square"))
    tracked = tracker.track_sequence(sequence)
    assert len(tracked.masks) == len(sequence) == 30
    assert np.array_equal(tracked.masks[0], sequence.masks[0])
    report = evaluate_tracking(sequence, tracked)
    assert report.mean_mask_iou >= 0.7
    assert report.mean_box_iou >= 0.8


def test_tracking_is_deterministic(tracker):
    sequence = synth_sequence(SynthSpec(name="short", length=6))
    first = tracker.track_sequence(sequence)
    second = tracker.track_sequence(sequence)
    for a, b in zip(first.masks, second.masks):
        assert np.array_equal(a, b)
    assert first.boxes == second.boxes


def test_step_output_stays_inside_candidate_region(tracker):
    sequence = synth_sequence(SynthSpec(name="inside", length=3))
    state = tracker.init(sequence.frames[0], sequence.masks[0])
    for frame in sequence.frames[1:]:
        region = candidate_region(state.box, state.mask.shape, tracker.config.region_expand)
        state, _ = tracker.step(state, frame)
        x, y, w, h = region
        outside = state.mask.copy()
        outside[y:y + h, x:x + w] = False
        assert not outside.any()
        np.testing.assert_array_equal(state.f, indicator_from_mask(state.mask[y:y + h, x:x + w], state.superpixel_map))


def drop_first_mask(monkeypatch):
    """Make the first threshold_mask call inside the tracker come out empty."""
    calls = []

    def first_empty(y, spmap, *args):
        mask = threshold_mask(y, spmap, *args)
        calls.append(y)
        return np.zeros_like(mask) if len(calls) == 1 else mask

    monkeypatch.setattr(tracker_module, "threshold_mask", first_empty)


def test_lost_step_widens_next_region(tracker, monkeypatch):
    sequence = synth_sequence(STATIC.model_copy(update={"length": 3}))
    regions = []
    segment = tracker._segment

    def recording(lab, region):
        regions.append(region)
        return segment(lab, region)

    monkeypatch.setattr(tracker, "_segment", recording)
    drop_first_mask(monkeypatch)

    state = tracker.init(sequence.frames[0], sequence.masks[0])
    lost, diagnostics = tracker.step(state, sequence.frames[1])
    assert diagnostics.lost
    tracker.step(lost, sequence.frames[2])

    dims = sequence.masks[0].shape
    config = tracker.config
    assert regions[1] == candidate_region(state.box, dims, config.region_expand)
    assert regions[2] == candidate_region(state.box, dims, config.region_expand * config.lost_expand)
    assert regions[2] != regions[1]


def test_target_is_reacquired_after_lost_frame(tracker, monkeypatch):
    sequence = synth_sequence(STATIC.model_copy(update={"length": 3}))
    drop_first_mask(monkeypatch)
    tracked = tracker.track_sequence(sequence)
    assert tracked.boxes[1] is None
    assert tracked.diagnostics[1].lost
    assert not tracked.masks[1].any()
    assert tracked.boxes[2] is not None
    assert not tracked.diagnostics[2].lost
    assert mask_iou(tracked.masks[2], sequence.masks[2]) >= 0.8
