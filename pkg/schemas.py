from enum import Enum
from pathlib import Path
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from config import core_config


class PropagationMode(str, Enum):
    """Graph convolution applied to superpixel features before regression.

    Values:
        MIXED: Laplacian smoothing followed by sharpening (Â_m·Â_h)
        SMOOTHING_ONLY: Laplacian smoothing only (Â_m)
        IDENTITY: Raw features, no graph convolution
    """
    MIXED = "mixed"
    SMOOTHING_ONLY = "only-smoothing"
    IDENTITY = "none"

    @classmethod
    def _missing_(cls, value):
        aliases = {"smoothing-only": cls.SMOOTHING_ONLY, "identity": cls.IDENTITY}
        return aliases.get(value)


class Fidelity(str, Enum):
    """Which y-update the solver runs.

    Values:
        EXACT: Exact minimizer of the non-negative y-subproblem
        CLAMP_THEN_SMOOTH: Clamp the frame t-1 seeds, then apply (I + αL)^-1
    """
    EXACT = "exact-minimizer"
    CLAMP_THEN_SMOOTH = "clamp-then-smooth"

    @classmethod
    def _missing_(cls, value):
        aliases = {"exact": cls.EXACT, "paper-literal": cls.CLAMP_THEN_SMOOTH}
        return aliases.get(value)


class ThresholdPolicy(str, Enum):
    """How superpixel scores of frame t become a binary mask.

    Values:
        MINMAX: Min-max normalize the scores and keep those >= mask_threshold
        POSITIVE: Keep every superpixel with a strictly positive score
    """
    MINMAX = "minmax"
    POSITIVE = "positive"


class ShapeKind(str, Enum):
    SQUARE = "square"
    RECTANGLE = "rectangle"
    DISC = "disc"


class TrajectoryKind(str, Enum):
    LINEAR = "linear"
    BOUNCE = "bounce"


class SolverConfig(BaseModel):
    """Parameters of the alternating W / b / y optimization.

    Fields:
        alpha: Weight of the graph smoothness term yᵀL_S y
        beta: Weight of the fitting term on frame t-1 labels
        min_error: Convergence threshold on the relative loss change
        max_iter: Iteration cap
        mode: Propagation mode used to build the design matrix
        fidelity: Which y-update path is used
        ridge: Tikhonov term added to SᵀS in the W-update (0 = plain least squares)
    """
    model_config = ConfigDict(extra="forbid")

    alpha: float = Field(default=core_config.ALPHA, ge=0, description="Smoothness weight")
    beta: float = Field(default=core_config.BETA, ge=0, description="Fitting weight")
    min_error: float = Field(default=core_config.MIN_ERROR, ge=0, description="Relative loss change threshold")
    max_iter: int = Field(default=core_config.MAX_ITER, ge=1, description="Iteration cap")
    mode: PropagationMode = Field(default=PropagationMode.MIXED, description="Propagation mode")
    fidelity: Fidelity = Field(default=Fidelity.EXACT, description="y-update path")
    ridge: float = Field(default=0.0, ge=0, description="Ridge added to the normal matrix")


class TrackerConfig(BaseModel):
    """Everything a per-frame tracking step needs.

    Fields:
        sigma: Scale of the spatial edge kernel exp(-||x_i - x_j|| / sigma)
        lambda1, lambda2: Smoothing and sharpening strengths
        alpha, beta, min_error, max_iter, ridge: Solver parameters
        target_superpixels: Requested superpixel count per candidate region
        min_superpixel_size: Lower bound on average superpixel area (pixels)
        compactness, slic_iters: SLIC parameters
        region_expand: Scale of the candidate region around the previous box
        lost_expand: Extra scale applied after a frame where the target was lost
        mask_threshold_policy, mask_threshold: Score to mask conversion
        propagation_mode, fidelity: Ablation switches
        fully_connected: Connect every superpixel pair inside a frame
        flow_smoothness, flow_iters, flow_levels: Horn-Schunck parameters
    """
    model_config = ConfigDict(extra="forbid")

    sigma: float = Field(default=core_config.SIGMA, gt=0)
    lambda1: float = Field(default=core_config.LAMBDA1, ge=0)
    lambda2: float = Field(default=core_config.LAMBDA2, ge=0)
    alpha: float = Field(default=core_config.ALPHA, ge=0)
    beta: float = Field(default=core_config.BETA, ge=0)
    min_error: float = Field(default=core_config.MIN_ERROR, ge=0)
    max_iter: int = Field(default=core_config.MAX_ITER, ge=1)
    ridge: float = Field(default=core_config.RIDGE, ge=0)
    target_superpixels: int = Field(default=core_config.SUPERPIXELS, ge=1)
    min_superpixel_size: int = Field(default=core_config.MIN_SUPERPIXEL_SIZE, ge=1)
    compactness: float = Field(default=core_config.COMPACTNESS, gt=0)
    slic_iters: int = Field(default=core_config.SLIC_ITERS, ge=1)
    region_expand: float = Field(default=core_config.REGION_EXPAND, ge=1)
    lost_expand: float = Field(default=core_config.LOST_EXPAND, ge=1)
    mask_threshold_policy: ThresholdPolicy = ThresholdPolicy.MINMAX
    mask_threshold: float = Field(default=core_config.MASK_THRESHOLD, ge=0, le=1)
    propagation_mode: PropagationMode = PropagationMode.MIXED
    fidelity: Fidelity = Fidelity.EXACT
    fully_connected: bool = False
    flow_smoothness: float = Field(default=core_config.FLOW_SMOOTHNESS, gt=0)
    flow_iters: int = Field(default=core_config.FLOW_ITERS, ge=1)
    flow_levels: int = Field(default=core_config.FLOW_LEVELS, ge=1)

    def solver_config(self) -> SolverConfig:
        return SolverConfig(
            alpha=self.alpha,
            beta=self.beta,
            min_error=self.min_error,
            max_iter=self.max_iter,
            mode=self.propagation_mode,
            fidelity=self.fidelity,
            ridge=self.ridge,
        )


class RunConfig(TrackerConfig):
    """Tracker settings plus the paths of one CLI run.

    Fields:
        sequence_root: Directory holding one sub-directory per sequence
        sequences: Names to track (empty = every sequence under the root)
        flow_dir: Optional directory of precomputed <frame>.flo files
        output_dir: Everything the run writes goes below this directory
        jobs: Sequences tracked in parallel
        dump_debug: Write label maps, matrices and problems per step
    """
    sequence_root: Optional[Path] = None
    sequences: List[str] = Field(default_factory=list)
    flow_dir: Optional[Path] = None
    output_dir: Path = Path(core_config.OUTPUT_DIR)
    jobs: int = Field(default=1, ge=1)
    dump_debug: bool = False

    def tracker_config(self) -> TrackerConfig:
        return TrackerConfig.model_validate(self.model_dump(include=set(TrackerConfig.model_fields)))


class SynthSpec(BaseModel):
    """Declarative description of a synthetic sequence.

    Fields:
        name: Sequence name (directory name when written)
        width, height: Frame size in pixels
        length: Number of frames
        shape: Target shape
        size: Side (square, rectangle width) or radius (disc)
        rect_height: Rectangle height, defaults to size
        start: Top-left corner of the target bounding box in frame 0
        velocity: Displacement per frame (pixels)
        trajectory: linear (must stay inside) or bounce (reflects at borders)
        noise: Standard deviation of per-frame RGB noise (intensity levels)
        target_color: sRGB colour of the target
        background_low, background_high: Grey range of the background texture
        texture_scale: Gaussian blur of the background texture (pixels)
        seed: Random seed; equal seeds give bit-identical sequences
    """
    model_config = ConfigDict(extra="forbid")

    name: str = "synthetic"
    width: int = Field(default=64, ge=4)
    height: int = Field(default=64, ge=4)
    length: int = Field(default=30, ge=1)
    shape: ShapeKind = ShapeKind.SQUARE
    size: int = Field(default=16, ge=1)
    rect_height: Optional[int] = Field(default=None, ge=1)
    start: Tuple[float, float] = (8.0, 24.0)
    velocity: Tuple[float, float] = (2.0, 0.0)
    trajectory: TrajectoryKind = TrajectoryKind.BOUNCE
    noise: float = Field(default=5.0, ge=0)
    target_color: Tuple[int, int, int] = (210, 40, 40)
    background_low: int = Field(default=60, ge=0, le=255)
    background_high: int = Field(default=180, ge=0, le=255)
    texture_scale: float = Field(default=3.0, ge=0)
    seed: int = 0

    @model_validator(mode="after")
    def check_background(self):
        if self.background_low > self.background_high:
            raise ValueError("background_low must not exceed background_high")
        return self

    @property
    def extent(self) -> Tuple[int, int]:
        """Bounding box size (w, h) of the rendered target."""
        if self.shape == ShapeKind.DISC:
            return 2 * self.size + 1, 2 * self.size + 1
        if self.shape == ShapeKind.RECTANGLE:
            return self.size, self.rect_height or self.size
        return self.size, self.size


class StepDiagnosticsSchema(BaseModel):
    """Solver and tracker diagnostics of one frame.

    Fields:
        frame_index: Index of the tracked frame
        iterations: Alternating iterations the solver ran
        final_loss: Loss after the last iteration
        converged: Whether the relative loss change fell below min_error
        n_prev, n_curr: Superpixels of frame t-1 and frame t
        lost: True when the mask came out empty and the fallback was used
        mask_area: Number of pixels in the output mask
    """
    frame_index: int
    iterations: int = 0
    final_loss: float = 0.0
    converged: bool = True
    n_prev: int = 0
    n_curr: int = 0
    lost: bool = False
    mask_area: int = 0


class TrackResultSchema(BaseModel):
    """Per-sequence output written next to the mask PNGs."""
    name: str
    mode: PropagationMode
    fidelity: Fidelity
    boxes: List[Optional[Tuple[int, int, int, int]]]
    diagnostics: List[StepDiagnosticsSchema]
    config: TrackerConfig


class SolveResultSchema(BaseModel):
    """Output of the `solve` command."""
    y: List[float]
    loss_trace: List[float]
    iterations: int
    converged: bool
    fidelity: Fidelity


class FrameMetricsSchema(BaseModel):
    frame: int
    mask_iou: float
    box_iou: float
    center_dist: float


class SequenceReportSchema(BaseModel):
    """Metrics of one evaluated sequence.

    Fields:
        name: Sequence name
        frames: Per-frame rows (mask IoU, box IoU, center distance)
        mean_mask_iou, mean_box_iou: Average overlaps
        precision_at_20: Fraction of frames with center distance <= 20 px
        auc_mask, auc_box: Area under the success curves
        precision_curve, success_curve_mask, success_curve_box: Curve points
    """
    name: str
    frames: List[FrameMetricsSchema]
    mean_mask_iou: float
    mean_box_iou: float
    precision_at_20: float
    auc_mask: float
    auc_box: float
    precision_curve: List[float]
    success_curve_mask: List[float]
    success_curve_box: List[float]


class SuiteReportSchema(BaseModel):
    """Aggregate of several sequences.

    Scalars are means over sequences; the curves pool the frames of all
    sequences.
    """
    sequences: List[SequenceReportSchema]
    mean_mask_iou: float
    mean_box_iou: float
    precision_at_20: float
    auc_mask: float
    auc_box: float
    precision_thresholds: List[float]
    overlap_thresholds: List[float]
    precision_curve: List[float]
    success_curve_mask: List[float]
    success_curve_box: List[float]


class AblationTableSchema(BaseModel):
    """Rows Success-Seg / Success-Box / Precision, one column per mode."""
    modes: List[PropagationMode]
    rows: dict[str, dict[str, float]]
    suites: dict[str, SuiteReportSchema]
