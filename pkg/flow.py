"""Optical flow between consecutive frames and the temporal block B."""
import logging
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.ndimage import convolve, map_coordinates
from skimage.transform import pyramid_gaussian, resize

from errors import FormatError, InputError
from models import FlowField, SuperpixelMap

logger = logging.getLogger(__name__)

FLO_MAGIC = 202021.25
MIN_LEVEL_SIDE = 8

# Horn-Schunck neighbourhood average
_AVERAGE_KERNEL = np.array([
    [1 / 12, 1 / 6, 1 / 12],
    [1 / 6, 0.0, 1 / 6],
    [1 / 12, 1 / 6, 1 / 12],
])


def _horn_schunck(
        prev: np.ndarray,
        curr: np.ndarray,
        smoothness: float,
        iters: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Fixed-point Horn-Schunck iterations for the flow taking prev onto curr."""
    mean = 0.5 * (prev + curr)
    iy, ix = np.gradient(mean)
    it = curr - prev
    denominator = smoothness ** 2 + ix ** 2 + iy ** 2

    u = np.zeros_like(prev)
    v = np.zeros_like(prev)
    for _ in range(iters):
        u_avg = convolve(u, _AVERAGE_KERNEL, mode="nearest")
        v_avg = convolve(v, _AVERAGE_KERNEL, mode="nearest")
        correction = (ix * u_avg + iy * v_avg + it) / denominator
        u = u_avg - ix * correction
        v = v_avg - iy * correction
    return u, v


def _warp(image: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    yy, xx = np.mgrid[0:image.shape[0], 0:image.shape[1]].astype(float)
    return map_coordinates(image, [yy + v, xx + u], order=1, mode="nearest")


def estimate_flow(
        prev: np.ndarray,
        curr: np.ndarray,
        smoothness: float = 15.0,
        iters: int = 200,
        levels: int = 3,
) -> FlowField:
    """Coarse-to-fine Horn-Schunck flow from prev to curr (grey, 0..255).

    Every level warps curr by the flow so far and adds the Horn-Schunck
    increment computed on the residual.

    Raises:
        InputError: images of different shape
    """
    if prev.shape != curr.shape:
        raise InputError(f"Frame shapes differ: {prev.shape} vs {curr.shape}")
    prev = prev.astype(float)
    curr = curr.astype(float)

    max_levels = 1
    while max_levels < levels and min(prev.shape) / 2 ** max_levels >= MIN_LEVEL_SIDE:
        max_levels += 1
    prev_pyramid = list(pyramid_gaussian(prev, max_layer=max_levels - 1, downscale=2, preserve_range=True))
    curr_pyramid = list(pyramid_gaussian(curr, max_layer=max_levels - 1, downscale=2, preserve_range=True))

    u = np.zeros(prev_pyramid[-1].shape)
    v = np.zeros(prev_pyramid[-1].shape)
    for level in reversed(range(max_levels)):
        p, c = prev_pyramid[level], curr_pyramid[level]
        if u.shape != p.shape:
            scale_y, scale_x = p.shape[0] / u.shape[0], p.shape[1] / u.shape[1]
            u = resize(u, p.shape, order=1, preserve_range=True) * scale_x
            v = resize(v, p.shape, order=1, preserve_range=True) * scale_y
        warped = _warp(c, u, v) if np.any(u) or np.any(v) else c
        du, dv = _horn_schunck(p, warped, smoothness, iters)
        u, v = u + du, v + dv

    logger.debug("flow: mean |u| %.3f, mean |v| %.3f", np.abs(u).mean(), np.abs(v).mean())
    return FlowField(u=u, v=v)


def read_flo(path: Path) -> FlowField:
    """Read a Middlebury .flo file.

    Layout: float32 magic 202021.25, int32 width, int32 height, then
    width*height interleaved float32 (u, v) pairs row-major, little-endian.

    Raises:
        FormatError: wrong magic number or truncated payload
    """
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise FormatError(f"{path}: truncated header")
    magic = np.frombuffer(data, dtype="<f4", count=1)[0]
    if magic != np.float32(FLO_MAGIC):
        raise FormatError(f"{path}: bad magic number {magic}")
    width, height = (int(x) for x in np.frombuffer(data, dtype="<i4", count=2, offset=4))
    if width < 0 or height < 0:
        raise FormatError(f"{path}: negative dimensions {width}x{height}")
    expected = 12 + 8 * width * height
    if len(data) < expected:
        raise FormatError(f"{path}: truncated payload ({len(data)} of {expected} bytes)")
    payload = np.frombuffer(data, dtype="<f4", count=2 * width * height, offset=12).reshape(height, width, 2)
    return FlowField(u=payload[..., 0].astype(np.float32), v=payload[..., 1].astype(np.float32))


def write_flo(path: Path, flow: FlowField) -> None:
    height, width = flow.shape
    payload = np.stack([flow.u, flow.v], axis=-1).astype("<f4")
    with open(path, "wb") as fh:
        fh.write(np.array([FLO_MAGIC], dtype="<f4").tobytes())
        fh.write(np.array([width, height], dtype="<i4").tobytes())
        fh.write(payload.tobytes())


def find_flow_file(flow_dir: Path, frame_index: int) -> Optional[Path]:
    """Precomputed flow from frame_index to frame_index + 1, if present."""
    for name in (f"{frame_index}.flo", f"{frame_index:05d}.flo"):
        candidate = Path(flow_dir) / name
        if candidate.is_file():
            return candidate
    return None


def temporal_links(map_prev: SuperpixelMap, map_curr: SuperpixelMap, flow: FlowField) -> np.ndarray:
    """Fraction of every previous superpixel landing in every current superpixel.

    B[i, j] = #pixels of i whose rounded flow target falls in j / #pixels of i.
    Targets outside the current region count for no j, so rows sum to <= 1.

    Raises:
        InputError: flow shape differs from the previous label map
    """
    if flow.shape != map_prev.shape:
        raise InputError(f"Flow of shape {flow.shape} does not match previous region {map_prev.shape}")

    height, width = map_prev.shape
    yy, xx = np.mgrid[0:height, 0:width]
    prev_x0, prev_y0 = map_prev.region_origin
    curr_x0, curr_y0 = map_curr.region_origin
    target_x = np.rint(xx + prev_x0 + flow.u).astype(np.int64) - curr_x0
    target_y = np.rint(yy + prev_y0 + flow.v).astype(np.int64) - curr_y0

    curr_h, curr_w = map_curr.shape
    inside = (target_x >= 0) & (target_x < curr_w) & (target_y >= 0) & (target_y < curr_h)
    source = map_prev.labels[inside]
    destination = map_curr.labels[target_y[inside], target_x[inside]]

    n_prev, n_curr = map_prev.k, map_curr.k
    counts = np.bincount(source * n_curr + destination, minlength=n_prev * n_curr).reshape(n_prev, n_curr)
    return counts / map_prev.counts()[:, None]
