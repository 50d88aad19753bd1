from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from schemas import PropagationMode

# (x, y, w, h) in pixels
Box = tuple[int, int, int, int]

# n×d matrix of superpixel descriptors, one row per superpixel (LAB means, d = 3)
FeatureMatrix = np.ndarray


@dataclass(frozen=True)
class SuperpixelMap:
    """Partition of a frame region into superpixels.

    Attributes:
        labels: Integer label per pixel of the region, values 0..k-1
        region_origin: (x, y) offset of the region inside the full frame

    Invariants:
        every label 0..k-1 occurs at least once and is 4-connected
    """
    labels: np.ndarray
    region_origin: tuple[int, int] = (0, 0)

    @property
    def k(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape

    def counts(self) -> np.ndarray:
        """Pixel count of every superpixel."""
        return np.bincount(self.labels.ravel(), minlength=self.k)


@dataclass(frozen=True)
class FlowField:
    """Per-pixel displacement from frame t-1 to frame t.

    Attributes:
        u: Horizontal displacement (pixels)
        v: Vertical displacement (pixels)
    """
    u: np.ndarray
    v: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.u.shape

    def crop(self, x: int, y: int, w: int, h: int) -> "FlowField":
        return FlowField(self.u[y:y + h, x:x + w], self.v[y:y + h, x:x + w])


@dataclass(frozen=True)
class SpatioTemporalGraph:
    """Weighted graph over the superpixels of two consecutive frames.

    Attributes:
        n_prev: Node count of frame t-1 (rows/cols 0..n_prev-1)
        n_curr: Node count of frame t
        adjacency: Symmetric non-negative matrix [[A_prev, B], [Bᵀ, A_curr]]
    """
    n_prev: int
    n_curr: int
    adjacency: np.ndarray

    @property
    def n(self) -> int:
        return self.n_prev + self.n_curr


@dataclass(frozen=True)
class PropagationOperator:
    """Graph convolution applied to the feature matrix.

    Attributes:
        matrix: n×n operator (Â_m·Â_h, Â_m or I depending on mode)
        mode: Which of the three operators this is
        lambda1: Smoothing strength
        lambda2: Sharpening strength
    """
    matrix: np.ndarray
    mode: PropagationMode
    lambda1: float
    lambda2: float


@dataclass(frozen=True)
class Problem:
    """One instance of the labeling problem.

    Attributes:
        S: n×d propagated feature matrix
        L: n×n combinatorial Laplacian D - A
        f: Indicator vector over frame t-1 nodes (entries 0 or 1)
        n_prev, n_curr: Node counts of both frames
    """
    S: np.ndarray
    L: np.ndarray
    f: np.ndarray
    n_prev: int
    n_curr: int

    @property
    def n(self) -> int:
        return self.n_prev + self.n_curr

    @property
    def d(self) -> int:
        return self.S.shape[1]


@dataclass
class SolverState:
    """Trainable parameters and label variable of the alternating solver.

    Attributes:
        W: d-dimensional weight vector
        b: Scalar bias
        y: n-dimensional non-negative label vector
        loss_trace: Loss after every iteration
        iterations: Iterations run
        converged: Relative loss change fell below min_error
    """
    W: np.ndarray
    b: float
    y: np.ndarray
    loss_trace: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False


@dataclass
class TrackState:
    """What a tracking step hands to the next one.

    Attributes:
        frame_index: Index of the frame this state describes
        mask: Full-frame binary target mask
        box: Tight bounding box of mask (carried over when the target is lost)
        f: Indicator vector over superpixel_map's superpixels
        superpixel_map: Superpixels of the frame the indicator refers to
        features: LAB mean colours of those superpixels
        gray: Grey image of that frame, source of the next flow estimate
        lost: Set when the last step produced an empty mask
    """
    frame_index: int
    mask: np.ndarray
    box: Box
    f: np.ndarray
    superpixel_map: SuperpixelMap
    features: FeatureMatrix
    gray: np.ndarray
    lost: bool = False


@dataclass
class Sequence:
    """Ordered sRGB frames with (optionally sparse) ground-truth masks.

    Attributes:
        name: Sequence name
        frames: H×W×3 uint8 images
        masks: Boolean masks; None where no annotation exists (never for frame 0)
    """
    name: str
    frames: list[np.ndarray]
    masks: list[Optional[np.ndarray]]

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def frame_shape(self) -> tuple[int, int]:
        return self.frames[0].shape[:2]


@dataclass
class SequenceResult:
    """Predictions and ground truth of one sequence, frame aligned.

    Attributes:
        name: Sequence name
        frame_indices: Frame number of every row
        pred_masks, pred_boxes: Tracker output (None box = no prediction)
        gt_masks, gt_boxes: Ground truth
    """
    name: str
    frame_indices: list[int]
    pred_masks: list[np.ndarray]
    pred_boxes: list[Optional[Box]]
    gt_masks: list[np.ndarray]
    gt_boxes: list[Optional[Box]]

    def __len__(self) -> int:
        return len(self.frame_indices)


@dataclass
class TrackedSequence:
    """Tracker output for a whole sequence, one entry per frame.

    Attributes:
        name: Sequence name
        masks: Full-frame masks (frame 0 is the initialization mask)
        boxes: Tight box of every mask, None where the target was lost
        diagnostics: Per-frame solver and tracker diagnostics
    """
    name: str
    masks: list[np.ndarray]
    boxes: list[Optional[Box]]
    diagnostics: list = field(default_factory=list)
