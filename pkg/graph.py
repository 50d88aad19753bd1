"""Spatio-temporal superpixel graph and its propagation operators."""
import logging
from typing import Iterable

import numpy as np

from errors import InputError, NumericalError, ParameterError
from models import FeatureMatrix, PropagationOperator, SpatioTemporalGraph
from schemas import PropagationMode

logger = logging.getLogger(__name__)

ISOLATED_NODE_WEIGHT = 1e-6
SYMMETRY_TOL = 1e-12


def spatial_edge_weight(x_i: np.ndarray, x_j: np.ndarray, sigma: float) -> float:
    """Weight exp(-||x_i - x_j||_2 / sigma) of an edge inside one frame.

    Raises:
        InputError: vectors of different dimension
        ParameterError: sigma <= 0
    """
    x_i = np.asarray(x_i, dtype=float)
    x_j = np.asarray(x_j, dtype=float)
    if x_i.shape != x_j.shape:
        raise InputError(f"Feature dimension mismatch: {x_i.shape} vs {x_j.shape}")
    if sigma <= 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    return float(np.exp(-np.linalg.norm(x_i - x_j) / sigma))


def _pairs_array(neighbors: Iterable[tuple[int, int]], n: int) -> np.ndarray:
    pairs = np.array(list(neighbors), dtype=np.int64).reshape(-1, 2)
    if pairs.size == 0:
        return pairs
    if np.any(pairs[:, 0] == pairs[:, 1]):
        raise InputError("Self-pair in neighbor set")
    if pairs.min() < 0 or pairs.max() >= n:
        raise InputError(f"Neighbor pair indexes a node outside 0..{n - 1}")
    return pairs


def build_spatial_adjacency(
        features: FeatureMatrix,
        neighbors: Iterable[tuple[int, int]],
        sigma: float,
) -> np.ndarray:
    """Symmetric within-frame adjacency with kernel weights on listed pairs.

    Args:
        features: n×d feature matrix
        neighbors: Node pairs (i, j), i != j; order inside a pair is irrelevant
        sigma: Kernel scale, > 0

    Returns:
        n×n matrix, zero outside the listed pairs and on the diagonal
    """
    if sigma <= 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    features = np.asarray(features, dtype=float)
    n = features.shape[0]
    adjacency = np.zeros((n, n))
    pairs = _pairs_array(neighbors, n)
    if pairs.size == 0:
        return adjacency

    dist = np.linalg.norm(features[pairs[:, 0]] - features[pairs[:, 1]], axis=1)
    weights = np.exp(-dist / sigma)
    adjacency[pairs[:, 0], pairs[:, 1]] = weights
    adjacency[pairs[:, 1], pairs[:, 0]] = weights
    return adjacency


def fully_connected_pairs(n: int) -> set[tuple[int, int]]:
    rows, cols = np.triu_indices(n, k=1)
    return set(zip(rows.tolist(), cols.tolist()))


def assemble(
        spatial_prev: np.ndarray,
        spatial_curr: np.ndarray,
        temporal: np.ndarray,
) -> SpatioTemporalGraph:
    """Block matrix [[A_prev, B], [Bᵀ, A_curr]] over both frames.

    Raises:
        InputError: negative temporal weight, asymmetric spatial block,
            or block shapes that do not fit together
    """
    spatial_prev = np.asarray(spatial_prev, dtype=float)
    spatial_curr = np.asarray(spatial_curr, dtype=float)
    temporal = np.asarray(temporal, dtype=float)
    n_prev, n_curr = spatial_prev.shape[0], spatial_curr.shape[0]

    if temporal.shape != (n_prev, n_curr):
        raise InputError(f"Temporal block has shape {temporal.shape}, expected {(n_prev, n_curr)}")
    if np.any(temporal < 0):
        raise InputError("Temporal weights must be non-negative")
    for name, block in (("previous", spatial_prev), ("current", spatial_curr)):
        if block.shape[0] != block.shape[1] or not np.allclose(block, block.T, rtol=0, atol=SYMMETRY_TOL):
            raise InputError(f"Spatial block of the {name} frame is not symmetric")

    adjacency = np.block([[spatial_prev, temporal], [temporal.T, spatial_curr]])
    return SpatioTemporalGraph(n_prev=n_prev, n_curr=n_curr, adjacency=adjacency)


def degree_matrix(g: SpatioTemporalGraph) -> np.ndarray:
    """Diagonal matrix of row sums of the adjacency."""
    return np.diag(g.adjacency.sum(axis=1))


def repair_isolated_nodes(g: SpatioTemporalGraph, weight: float = ISOLATED_NODE_WEIGHT) -> SpatioTemporalGraph:
    """Give every zero-degree node a self-loop so D stays invertible."""
    degrees = g.adjacency.sum(axis=1)
    isolated = np.flatnonzero(degrees <= 0)
    if isolated.size == 0:
        return g
    logger.debug("Repairing %d isolated node(s) with self-loops", isolated.size)
    adjacency = g.adjacency.copy()
    adjacency[isolated, isolated] = weight
    return SpatioTemporalGraph(n_prev=g.n_prev, n_curr=g.n_curr, adjacency=adjacency)


def normalized_adjacency(g: SpatioTemporalGraph) -> np.ndarray:
    """D^-1/2 A D^-1/2.

    Raises:
        NumericalError: a node has zero degree (call repair_isolated_nodes first)
    """
    degrees = g.adjacency.sum(axis=1)
    if np.any(degrees <= 0):
        raise NumericalError(
            f"{int(np.sum(degrees <= 0))} node(s) with zero degree; normalization undefined"
        )
    d_inv_sqrt = 1.0 / np.sqrt(degrees)
    return d_inv_sqrt[:, None] * g.adjacency * d_inv_sqrt[None, :]


def smoothing_operator(normalized: np.ndarray, lambda1: float) -> np.ndarray:
    """Â_m = I - λ1 (I - D^-1/2 A D^-1/2)."""
    identity = np.eye(normalized.shape[0])
    return identity - lambda1 * (identity - normalized)


def sharpening_operator(normalized: np.ndarray, lambda2: float) -> np.ndarray:
    """Â_h = I + λ2 (I - D^-1/2 A D^-1/2)."""
    identity = np.eye(normalized.shape[0])
    return identity + lambda2 * (identity - normalized)


def propagation_operator(
        g: SpatioTemporalGraph,
        mode: PropagationMode,
        lambda1: float,
        lambda2: float,
) -> PropagationOperator:
    """Operator for one of the three propagation modes.

    mixed gives Â_m·Â_h, only-smoothing gives Â_m, none gives I.

    Raises:
        ParameterError: negative lambda
        NumericalError: zero-degree node in a mode that normalizes A
    """
    if lambda1 < 0 or lambda2 < 0:
        raise ParameterError(f"lambda1 and lambda2 must be >= 0, got {lambda1}, {lambda2}")
    mode = PropagationMode(mode)

    if mode == PropagationMode.IDENTITY:
        matrix = np.eye(g.n)
    else:
        normalized = normalized_adjacency(g)
        matrix = smoothing_operator(normalized, lambda1)
        if mode == PropagationMode.MIXED:
            matrix = matrix @ sharpening_operator(normalized, lambda2)
    return PropagationOperator(matrix=matrix, mode=mode, lambda1=lambda1, lambda2=lambda2)


def combinatorial_laplacian(g: SpatioTemporalGraph) -> np.ndarray:
    """L_S = D - A; symmetric positive semi-definite with zero row sums."""
    return degree_matrix(g) - g.adjacency
