"""SLIC superpixels on a LAB candidate region."""
import logging

import numpy as np
from skimage.measure import label as connected_components

from errors import InputError, ParameterError
from models import SuperpixelMap

logger = logging.getLogger(__name__)

# 3×3 neighbourhood of grid cells searched for every pixel (covers the 2s×2s window)
_CELL_OFFSETS = [(dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1)]


def _grid_shape(height: int, width: int, target_k: int) -> tuple[int, int]:
    rows = int(np.clip(round(np.sqrt(target_k * height / width)), 1, min(target_k, height)))
    cols = int(np.clip(round(target_k / rows), 1, width))
    return rows, cols


def _gradient_magnitude(lab: np.ndarray) -> np.ndarray:
    padded = np.pad(lab, ((1, 1), (1, 1), (0, 0)), mode="edge")
    gx = padded[1:-1, 2:] - padded[1:-1, :-2]
    gy = padded[2:, 1:-1] - padded[:-2, 1:-1]
    return np.sum(gx ** 2 + gy ** 2, axis=2)


def _perturb_seeds(seeds: np.ndarray, gradient: np.ndarray) -> np.ndarray:
    """Move every seed to the lowest-gradient pixel of its 3×3 neighbourhood."""
    height, width = gradient.shape
    candidates = []
    for dy, dx in _CELL_OFFSETS:
        ys = np.clip(seeds[:, 0] + dy, 0, height - 1)
        xs = np.clip(seeds[:, 1] + dx, 0, width - 1)
        candidates.append(np.stack([ys, xs], axis=1))
    candidates = np.stack(candidates, axis=1)
    values = gradient[candidates[..., 0], candidates[..., 1]]
    best = np.argmin(values, axis=1)
    return candidates[np.arange(len(seeds)), best]


def slic_segment(
        region: np.ndarray,
        target_k: int,
        compactness: float = 10.0,
        iters: int = 10,
        region_origin: tuple[int, int] = (0, 0),
) -> SuperpixelMap:
    """Localized k-means over (l, a, b, x, y) followed by connectivity enforcement.

    Args:
        region: H×W×3 LAB image
        target_k: Requested number of superpixels
        compactness: Weight m of the spatial term, d = d_lab + (m / s)·d_xy
        iters: k-means iterations
        region_origin: Offset of the region inside the frame, stored on the map

    Raises:
        ParameterError: target_k < 1, compactness <= 0 or iters < 1
        InputError: empty region or fewer pixels than target_k
    """
    if target_k < 1:
        raise ParameterError(f"target_k must be >= 1, got {target_k}")
    if compactness <= 0 or iters < 1:
        raise ParameterError("compactness must be positive and iters >= 1")
    if region.ndim != 3 or region.shape[0] == 0 or region.shape[1] == 0:
        raise InputError(f"Region must be a non-empty H×W×3 image, got shape {region.shape}")

    height, width = region.shape[:2]
    n_pixels = height * width
    if n_pixels < target_k:
        raise InputError(f"Region has {n_pixels} pixels, fewer than the {target_k} superpixels requested")

    lab = region.astype(float)
    rows, cols = _grid_shape(height, width, target_k)
    step = np.sqrt(n_pixels / target_k)
    spatial_weight = compactness / step

    grid_y, grid_x = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    seeds = np.stack([
        ((grid_y.ravel() + 0.5) * height / rows).astype(int),
        ((grid_x.ravel() + 0.5) * width / cols).astype(int),
    ], axis=1)
    if min(height / rows, width / cols) >= 3:
        seeds = _perturb_seeds(seeds, _gradient_magnitude(lab))

    centers = np.concatenate([seeds.astype(float), lab[seeds[:, 0], seeds[:, 1]]], axis=1)

    pixel_y, pixel_x = np.divmod(np.arange(n_pixels), width)
    pixel_lab = lab.reshape(-1, 3)
    cell_y = pixel_y * rows // height
    cell_x = pixel_x * cols // width

    labels = np.zeros(n_pixels, dtype=np.int64)
    for _ in range(iters):
        best = np.full(n_pixels, np.inf)
        for dy, dx in _CELL_OFFSETS:
            ny, nx = cell_y + dy, cell_x + dx
            valid = (ny >= 0) & (ny < rows) & (nx >= 0) & (nx < cols)
            cluster = np.where(valid, ny * cols + nx, 0)
            center = centers[cluster]
            d_lab = np.linalg.norm(pixel_lab - center[:, 2:], axis=1)
            d_xy = np.hypot(pixel_y - center[:, 0], pixel_x - center[:, 1])
            distance = np.where(valid, d_lab + spatial_weight * d_xy, np.inf)
            closer = distance < best
            best[closer] = distance[closer]
            labels[closer] = cluster[closer]

        counts = np.bincount(labels, minlength=len(centers))
        occupied = counts > 0
        features = np.column_stack([pixel_y, pixel_x, pixel_lab])
        for c in range(5):
            sums = np.bincount(labels, weights=features[:, c], minlength=len(centers))
            centers[occupied, c] = sums[occupied] / counts[occupied]

    spmap = enforce_connectivity(SuperpixelMap(labels.reshape(height, width), region_origin))
    logger.debug("SLIC: %d superpixels on %dx%d region (target %d)", spmap.k, width, height, target_k)
    return spmap


def enforce_connectivity(spmap: SuperpixelMap) -> SuperpixelMap:
    """Keep the largest 4-connected piece of every label, merge the rest.

    Every orphan piece joins the largest adjacent main piece; labels are then
    renumbered densely in order of their old values.
    """
    labels = spmap.labels
    components = connected_components(labels + 1, background=0, connectivity=1) - 1
    n_components = int(components.max()) + 1
    flat = components.ravel()
    sizes = np.bincount(flat, minlength=n_components)
    owner = np.zeros(n_components, dtype=np.int64)
    owner[flat] = labels.ravel()

    # основной компонент метки: самый большой, при равенстве с меньшим номером
    order = np.lexsort((np.arange(n_components), -sizes, owner))
    first = np.ones(n_components, dtype=bool)
    first[1:] = owner[order][1:] != owner[order][:-1]
    is_main = np.zeros(n_components, dtype=bool)
    is_main[order[first]] = True

    root = np.arange(n_components)
    pending = np.flatnonzero(~is_main).tolist()
    if pending:
        neighbors = _component_neighbors(components, n_components)
        area = sizes.copy()
        while pending:
            remaining = []
            for orphan in pending:
                candidates = {int(root[nb]) for nb in neighbors[orphan] if is_main[root[nb]]}
                if not candidates:
                    remaining.append(orphan)
                    continue
                target = max(candidates, key=lambda c: (area[c], -c))
                root[orphan] = target
                area[target] += area[orphan]
            if len(remaining) == len(pending):
                break
            pending = remaining

    merged = owner[root][components]
    _, dense = np.unique(merged, return_inverse=True)
    return SuperpixelMap(dense.reshape(labels.shape).astype(np.int64), spmap.region_origin)


def _component_neighbors(components: np.ndarray, n_components: int) -> list[set[int]]:
    neighbors: list[set[int]] = [set() for _ in range(n_components)]
    for a, b in ((components[:, :-1], components[:, 1:]), (components[:-1, :], components[1:, :])):
        differ = a != b
        for i, j in zip(a[differ].tolist(), b[differ].tolist()):
            neighbors[i].add(j)
            neighbors[j].add(i)
    return neighbors


def adjacency_pairs(spmap: SuperpixelMap) -> set[tuple[int, int]]:
    """Pairs (i, j), i < j, of superpixels with 8-adjacent pixels."""
    labels = spmap.labels
    k = max(spmap.k, 1)
    codes = []
    for a, b in (
            (labels[:, :-1], labels[:, 1:]),
            (labels[:-1, :], labels[1:, :]),
            (labels[:-1, :-1], labels[1:, 1:]),
            (labels[:-1, 1:], labels[1:, :-1]),
    ):
        differ = a != b
        low = np.minimum(a[differ], b[differ])
        high = np.maximum(a[differ], b[differ])
        codes.append(low * k + high)
    unique = np.unique(np.concatenate(codes)) if codes else np.array([], dtype=np.int64)
    return {(int(c // k), int(c % k)) for c in unique}
