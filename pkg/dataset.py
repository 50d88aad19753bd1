"""DAVIS-style sequence folders and synthetic sequences with exact masks.

Layout of one sequence:

    <root>/<name>/frames/00000.jpg|png, 00001.jpg|png, ...
    <root>/<name>/masks/00000.png, ...      (any nonzero pixel is target)
"""
import logging
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image
from scipy.ndimage import gaussian_filter

from errors import InputError
from models import Sequence
from schemas import ShapeKind, SynthSpec, TrajectoryKind

logger = logging.getLogger(__name__)

FRAME_SUFFIXES = (".jpg", ".jpeg", ".png")


def _frame_files(frames_dir: Path) -> list[Path]:
    files = {}
    for path in frames_dir.iterdir():
        if path.suffix.lower() not in FRAME_SUFFIXES:
            continue
        try:
            index = int(path.stem)
        except ValueError:
            continue
        if index in files:
            raise InputError(f"{frames_dir}: frame {index} is stored twice")
        files[index] = path
    if not files:
        raise InputError(f"{frames_dir}: no frames found")
    indices = sorted(files)
    if indices != list(range(len(indices))):
        raise InputError(f"{frames_dir}: frame numbers must run 0..{len(indices) - 1} without gaps")
    return [files[i] for i in indices]


def read_mask(path: Path) -> np.ndarray:
    data = np.array(Image.open(path))
    if data.ndim == 3:
        return np.any(data != 0, axis=2)
    return data != 0


def list_sequences(root: Path) -> list[str]:
    """Names of every sub-directory of root that holds a frames/ folder."""
    root = Path(root)
    if not root.is_dir():
        raise InputError(f"Sequence root {root} does not exist")
    return sorted(p.name for p in root.iterdir() if (p / "frames").is_dir())


def load_sequence(root: Path, name: str) -> Sequence:
    """Read frames and masks of one sequence.

    Raises:
        InputError: missing directories, no mask for frame 0,
            frames or masks of inconsistent size
    """
    seq_dir = Path(root) / name
    frames_dir, masks_dir = seq_dir / "frames", seq_dir / "masks"
    if not frames_dir.is_dir():
        raise InputError(f"{seq_dir}: missing frames directory")
    if not masks_dir.is_dir():
        raise InputError(f"{seq_dir}: missing masks directory")

    frames = [np.array(Image.open(path).convert("RGB")) for path in _frame_files(frames_dir)]
    shape = frames[0].shape
    if any(frame.shape != shape for frame in frames):
        raise InputError(f"{seq_dir}: frames differ in size")

    masks: list[Optional[np.ndarray]] = []
    for i in range(len(frames)):
        path = masks_dir / f"{i:05d}.png"
        if not path.is_file():
            masks.append(None)
            continue
        mask = read_mask(path)
        if mask.shape != shape[:2]:
            raise InputError(f"{path}: mask of size {mask.shape} does not match frames {shape[:2]}")
        masks.append(mask)
    if masks[0] is None:
        raise InputError(f"{seq_dir}: frame 0 has no ground-truth mask")

    logger.info("Loaded sequence %s: %d frames, %d annotated", name, len(frames),
                sum(m is not None for m in masks))
    return Sequence(name=name, frames=frames, masks=masks)


def save_sequence(sequence: Sequence, root: Path) -> Path:
    """Write a sequence in the layout load_sequence reads; returns its folder."""
    seq_dir = Path(root) / sequence.name
    (seq_dir / "frames").mkdir(parents=True, exist_ok=True)
    (seq_dir / "masks").mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(sequence.frames):
        Image.fromarray(frame).save(seq_dir / "frames" / f"{i:05d}.png")
        mask = sequence.masks[i]
        if mask is not None:
            Image.fromarray(mask.astype(np.uint8) * 255).save(seq_dir / "masks" / f"{i:05d}.png")
    return seq_dir


def _reflect(position: float, span: float) -> float:
    if span <= 0:
        return 0.0
    period = 2 * span
    folded = position % period
    return folded if folded <= span else period - folded


def trajectory(spec: SynthSpec) -> list[tuple[int, int]]:
    """Top-left corner (x, y) of the target in every frame.

    Raises:
        InputError: the target does not fit in the frame, or a linear
            trajectory takes it outside
    """
    w, h = spec.extent
    span_x, span_y = spec.width - w, spec.height - h
    if span_x < 0 or span_y < 0:
        raise InputError(f"Target of size {w}x{h} does not fit a {spec.width}x{spec.height} frame")

    corners = []
    for t in range(spec.length):
        x = spec.start[0] + t * spec.velocity[0]
        y = spec.start[1] + t * spec.velocity[1]
        if spec.trajectory == TrajectoryKind.BOUNCE:
            x, y = _reflect(x, span_x), _reflect(y, span_y)
        x, y = int(round(x)), int(round(y))
        if not (0 <= x <= span_x and 0 <= y <= span_y):
            raise InputError(f"Target leaves the frame at frame {t} (corner {x}, {y})")
        corners.append((x, y))
    return corners


def render_target(spec: SynthSpec, corner: tuple[int, int]) -> np.ndarray:
    mask = np.zeros((spec.height, spec.width), dtype=bool)
    x, y = corner
    w, h = spec.extent
    if spec.shape == ShapeKind.DISC:
        r = spec.size
        yy, xx = np.mgrid[0:spec.height, 0:spec.width]
        mask = (xx - (x + r)) ** 2 + (yy - (y + r)) ** 2 <= r ** 2
    else:
        mask[y:y + h, x:x + w] = True
    return mask


def synth_sequence(spec: SynthSpec) -> Sequence:
    """Target of a fixed colour moving over a static smooth grey texture.

    Every frame gets fresh Gaussian RGB noise; the same seed always gives the
    same frames and masks.
    """
    corners = trajectory(spec)
    rng = np.random.default_rng(spec.seed)

    texture = rng.random((spec.height, spec.width))
    if spec.texture_scale > 0:
        texture = gaussian_filter(texture, spec.texture_scale)
    span = texture.max() - texture.min()
    texture = (texture - texture.min()) / span if span > 0 else np.zeros_like(texture)
    background = spec.background_low + texture * (spec.background_high - spec.background_low)
    background = np.repeat(background[..., None], 3, axis=2)

    frames, masks = [], []
    for corner in corners:
        mask = render_target(spec, corner)
        frame = background.copy()
        frame[mask] = spec.target_color
        if spec.noise > 0:
            frame = frame + rng.normal(0.0, spec.noise, frame.shape)
        frames.append(np.clip(np.rint(frame), 0, 255).astype(np.uint8))
        masks.append(mask)

    logger.debug("Synthesized %s: %d frames of %dx%d", spec.name, spec.length, spec.width, spec.height)
    return Sequence(name=spec.name, frames=frames, masks=masks)


def load_masks(masks_dir: Path) -> dict[int, np.ndarray]:
    """Masks named <index>.png in a folder, keyed by frame index.

    Raises:
        InputError: the folder does not exist
    """
    masks_dir = Path(masks_dir)
    if not masks_dir.is_dir():
        raise InputError(f"Mask directory {masks_dir} does not exist")
    masks = {}
    for path in sorted(masks_dir.glob("*.png")):
        try:
            index = int(path.stem)
        except ValueError:
            continue
        masks[index] = read_mask(path)
    return masks
