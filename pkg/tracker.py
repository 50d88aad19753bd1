"""Tracking by superpixel labeling on two-frame graphs."""
import logging
from pathlib import Path
from typing import Optional

import numpy as np

from artifacts import write_label_png, write_matrix_txt, write_problem
from errors import InputError
from features import image_to_gray, image_to_lab, mean_features
from flow import estimate_flow, find_flow_file, read_flo, temporal_links
from graph import (
    assemble,
    build_spatial_adjacency,
    fully_connected_pairs,
    normalized_adjacency,
    propagation_operator,
    repair_isolated_nodes,
    sharpening_operator,
    smoothing_operator,
)
from models import (
    Box,
    FeatureMatrix,
    FlowField,
    Problem,
    Sequence,
    SpatioTemporalGraph,
    SuperpixelMap,
    TrackedSequence,
    TrackState,
)
from schemas import StepDiagnosticsSchema, ThresholdPolicy, TrackerConfig
from solver import build_problem, solve
from superpixel import adjacency_pairs, slic_segment

logger = logging.getLogger(__name__)

MAJORITY = 0.5


def candidate_region(box: Box, frame_dims: tuple[int, int], expand: float) -> Box:
    """Box scaled by expand about its centre and clamped to the frame.

    Args:
        box: (x, y, w, h)
        frame_dims: (height, width) of the frame
        expand: Scale factor, >= 1
    """
    x, y, w, h = box
    height, width = frame_dims
    cx, cy = x + w / 2, y + h / 2
    half_w, half_h = w * expand / 2, h * expand / 2
    x0 = max(0, int(np.floor(cx - half_w)))
    y0 = max(0, int(np.floor(cy - half_h)))
    x1 = min(width, int(np.ceil(cx + half_w)))
    y1 = min(height, int(np.ceil(cy + half_h)))
    return x0, y0, max(x1 - x0, 1), max(y1 - y0, 1)


def threshold_mask(
        y_curr: np.ndarray,
        spmap: SuperpixelMap,
        policy: ThresholdPolicy = ThresholdPolicy.MINMAX,
        cut: float = 0.5,
) -> np.ndarray:
    """Region mask made of the superpixels whose score passes the policy.

    minmax keeps superpixels with (y - min) / (max - min) >= cut; a constant
    score vector keeps those with y > 0. positive keeps y > 0.

    Raises:
        InputError: score count differs from the superpixel count
    """
    y_curr = np.asarray(y_curr, dtype=float)
    if y_curr.shape != (spmap.k,):
        raise InputError(f"Got {y_curr.shape[0]} scores for {spmap.k} superpixels")

    low, high = y_curr.min(), y_curr.max()
    if ThresholdPolicy(policy) == ThresholdPolicy.POSITIVE or high - low <= 0:
        selected = y_curr > 0
    else:
        selected = (y_curr - low) / (high - low) >= cut
    return selected[spmap.labels]


def mask_to_box(mask: np.ndarray) -> Optional[Box]:
    """Tight (x, y, w, h) box of the set pixels, None for an empty mask."""
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    if rows.size == 0:
        return None
    return int(cols[0]), int(rows[0]), int(cols[-1] - cols[0] + 1), int(rows[-1] - rows[0] + 1)


def indicator_from_mask(region_mask: np.ndarray, spmap: SuperpixelMap) -> np.ndarray:
    """f_i = 1 iff at least half of superpixel i lies inside the mask."""
    inside = np.bincount(spmap.labels.ravel(), weights=region_mask.ravel().astype(float), minlength=spmap.k)
    return (inside / spmap.counts() >= MAJORITY).astype(float)


def crop(image: np.ndarray, region: Box) -> np.ndarray:
    x, y, w, h = region
    return image[y:y + h, x:x + w]


class SegmentationTracker:
    def __init__(self, config: TrackerConfig, debug_dir: Optional[Path] = None):
        self.config = config
        self.debug_dir = Path(debug_dir) if debug_dir else None

    def _segment(self, lab: np.ndarray, region: Box) -> tuple[SuperpixelMap, FeatureMatrix]:
        sub = crop(lab, region)
        n_pixels = sub.shape[0] * sub.shape[1]
        target_k = max(1, min(self.config.target_superpixels, n_pixels // self.config.min_superpixel_size))
        spmap = slic_segment(
            sub,
            target_k,
            compactness=self.config.compactness,
            iters=self.config.slic_iters,
            region_origin=region[:2],
        )
        return spmap, mean_features(sub, spmap)

    def init(self, frame0: np.ndarray, ground_truth_mask: np.ndarray) -> TrackState:
        """State for frame 0 from its ground-truth mask.

        Raises:
            InputError: empty mask or mask and frame of different size
        """
        if ground_truth_mask.shape != frame0.shape[:2]:
            raise InputError(
                f"Mask of size {ground_truth_mask.shape} does not match frame {frame0.shape[:2]}"
            )
        mask = ground_truth_mask.astype(bool)
        box = mask_to_box(mask)
        if box is None:
            raise InputError("Initialization mask is empty")

        region = candidate_region(box, mask.shape, self.config.region_expand)
        spmap, features = self._segment(image_to_lab(frame0), region)
        f = indicator_from_mask(crop(mask, region), spmap)
        if not f.any():
            logger.warning("No superpixel is at least half inside the initialization mask")
        logger.info("Initialized on box %s with %d superpixels, %d marked", box, spmap.k, int(f.sum()))
        return TrackState(
            frame_index=0,
            mask=mask,
            box=box,
            f=f,
            superpixel_map=spmap,
            features=features,
            gray=image_to_gray(frame0),
        )

    def _flow(
            self,
            state: TrackState,
            gray: np.ndarray,
            region: Box,
            flow: Optional[FlowField],
    ) -> FlowField:
        """Flow over the previous region, from precomputed data or estimated on the union window."""
        prev_x, prev_y = state.superpixel_map.region_origin
        prev_h, prev_w = state.superpixel_map.shape
        if flow is not None:
            if flow.shape != gray.shape:
                raise InputError(f"Flow of size {flow.shape} does not match frame {gray.shape}")
            return flow.crop(prev_x, prev_y, prev_w, prev_h)

        x, y, w, h = region
        x0, y0 = min(prev_x, x), min(prev_y, y)
        x1, y1 = max(prev_x + prev_w, x + w), max(prev_y + prev_h, y + h)
        window = (x0, y0, x1 - x0, y1 - y0)
        estimated = estimate_flow(
            crop(state.gray, window),
            crop(gray, window),
            smoothness=self.config.flow_smoothness,
            iters=self.config.flow_iters,
            levels=self.config.flow_levels,
        )
        return estimated.crop(prev_x - x0, prev_y - y0, prev_w, prev_h)

    def _spatial(self, spmap: SuperpixelMap, features: FeatureMatrix) -> np.ndarray:
        pairs = fully_connected_pairs(spmap.k) if self.config.fully_connected else adjacency_pairs(spmap)
        return build_spatial_adjacency(features, pairs, self.config.sigma)

    def step(
            self,
            state: TrackState,
            frame: np.ndarray,
            flow: Optional[FlowField] = None,
    ) -> tuple[TrackState, StepDiagnosticsSchema]:
        """Track the target from state's frame into the next one.

        Raises:
            InputError: frame or flow size does not match the sequence
            NumericalError: from the solver
        """
        if frame.shape[:2] != state.mask.shape:
            raise InputError(f"Frame of size {frame.shape[:2]} does not match sequence size {state.mask.shape}")
        frame_index = state.frame_index + 1
        config = self.config

        expand = config.region_expand * (config.lost_expand if state.lost else 1.0)
        region = candidate_region(state.box, state.mask.shape, expand)
        gray = image_to_gray(frame)
        map_curr, features_curr = self._segment(image_to_lab(frame), region)
        map_prev = state.superpixel_map

        links = temporal_links(map_prev, map_curr, self._flow(state, gray, region, flow))
        graph = repair_isolated_nodes(assemble(
            self._spatial(map_prev, state.features),
            self._spatial(map_curr, features_curr),
            links,
        ))
        operator = propagation_operator(graph, config.propagation_mode, config.lambda1, config.lambda2)
        problem = build_problem(graph, operator, np.vstack([state.features, features_curr]), state.f)
        solution = solve(problem, config.solver_config())

        region_mask = threshold_mask(
            solution.y[graph.n_prev:], map_curr, config.mask_threshold_policy, config.mask_threshold,
        )
        if self.debug_dir:
            self._dump(frame_index, map_prev, map_curr, graph, problem)

        diagnostics = StepDiagnosticsSchema(
            frame_index=frame_index,
            iterations=solution.iterations,
            final_loss=solution.loss_trace[-1] if solution.loss_trace else 0.0,
            converged=solution.converged,
            n_prev=graph.n_prev,
            n_curr=graph.n_curr,
        )

        if not region_mask.any():
            logger.warning("Frame %d: empty mask, keeping box %s and widening the next search", frame_index,
                           state.box)
            diagnostics.lost = True
            lost_state = TrackState(
                frame_index=frame_index,
                mask=np.zeros_like(state.mask),
                box=state.box,
                f=state.f,
                superpixel_map=state.superpixel_map,
                features=state.features,
                gray=state.gray,
                lost=True,
            )
            return lost_state, diagnostics

        mask = np.zeros_like(state.mask)
        x, y, w, h = region
        mask[y:y + h, x:x + w] = region_mask
        diagnostics.mask_area = int(mask.sum())
        logger.info(
            "Frame %d: %d iteration(s), loss %.4g, mask area %d",
            frame_index, diagnostics.iterations, diagnostics.final_loss, diagnostics.mask_area,
        )
        new_state = TrackState(
            frame_index=frame_index,
            mask=mask,
            box=mask_to_box(mask),
            f=indicator_from_mask(region_mask, map_curr),
            superpixel_map=map_curr,
            features=features_curr,
            gray=gray,
        )
        return new_state, diagnostics

    def _dump(
            self,
            frame_index: int,
            map_prev: SuperpixelMap,
            map_curr: SuperpixelMap,
            graph: SpatioTemporalGraph,
            problem: Problem,
    ) -> None:
        step_dir = self.debug_dir / f"{frame_index:05d}"
        step_dir.mkdir(parents=True, exist_ok=True)
        write_label_png(step_dir / "labels_prev.png", map_prev.labels)
        write_label_png(step_dir / "labels_curr.png", map_curr.labels)
        normalized = normalized_adjacency(graph)
        write_matrix_txt(step_dir / "A.txt", graph.adjacency)
        write_matrix_txt(step_dir / "A_m.txt", smoothing_operator(normalized, self.config.lambda1))
        write_matrix_txt(step_dir / "A_h.txt", sharpening_operator(normalized, self.config.lambda2))
        write_problem(step_dir / "problem.txt", problem)

    def track_sequence(self, sequence: Sequence, flow_dir: Optional[Path] = None) -> TrackedSequence:
        """Run init on frame 0 and step over every following frame."""
        if not sequence.frames or sequence.masks[0] is None:
            raise InputError(f"Sequence {sequence.name} has no annotated first frame")
        state = self.init(sequence.frames[0], sequence.masks[0])
        result = TrackedSequence(
            name=sequence.name,
            masks=[state.mask],
            boxes=[state.box],
            diagnostics=[StepDiagnosticsSchema(
                frame_index=0,
                n_curr=state.superpixel_map.k,
                mask_area=int(state.mask.sum()),
            )],
        )
        for t in range(1, len(sequence)):
            flow = None
            if flow_dir is not None and not state.lost:
                path = find_flow_file(flow_dir, t - 1)
                if path is None:
                    logger.warning("No precomputed flow for frame %d in %s, estimating it", t - 1, flow_dir)
                else:
                    flow = read_flo(path)
            state, diagnostics = self.step(state, sequence.frames[t], flow)
            result.masks.append(state.mask)
            result.boxes.append(None if state.lost else state.box)
            result.diagnostics.append(diagnostics)
        return result

