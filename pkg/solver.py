"""Alternating closed-form optimization of the linear propagation model.

The model predicts p = S W + 1 b with S = Â X and the loss is

    ||S W + 1 b - y||² + α yᵀ L_S y + β ||y_prev - f||²

minimized over W, b and y >= 0 one block at a time.
"""
import logging

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, lstsq

from errors import InputError, NumericalError
from models import FeatureMatrix, Problem, PropagationOperator, SolverState, SpatioTemporalGraph
from graph import combinatorial_laplacian
from schemas import Fidelity, SolverConfig

logger = logging.getLogger(__name__)


def propagate(operator: PropagationOperator, features: FeatureMatrix) -> np.ndarray:
    """Apply the propagation operator to the n×d feature matrix."""
    features = np.asarray(features, dtype=float)
    if operator.matrix.shape[1] != features.shape[0]:
        raise InputError(
            f"Operator of order {operator.matrix.shape[1]} cannot act on {features.shape[0]} feature rows"
        )
    return operator.matrix @ features


def build_problem(
        graph: SpatioTemporalGraph,
        operator: PropagationOperator,
        features: FeatureMatrix,
        f: np.ndarray,
) -> Problem:
    """Problem instance (S = Â X, L_S, f) for one frame pair."""
    problem = Problem(
        S=propagate(operator, features),
        L=combinatorial_laplacian(graph),
        f=np.asarray(f, dtype=float),
        n_prev=graph.n_prev,
        n_curr=graph.n_curr,
    )
    validate_problem(problem)
    return problem


def validate_problem(problem: Problem) -> None:
    n = problem.n
    if problem.S.ndim != 2 or problem.S.shape[0] != n:
        raise InputError(f"S must have {n} rows, got shape {problem.S.shape}")
    if problem.L.shape != (n, n):
        raise InputError(f"L must be {n}×{n}, got shape {problem.L.shape}")
    if problem.f.shape != (problem.n_prev,):
        raise InputError(f"f must have {problem.n_prev} entries, got shape {problem.f.shape}")
    if not np.all((problem.f == 0) | (problem.f == 1)):
        raise InputError("f entries must be 0 or 1")


def _spd_solve(matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        factor = cho_factor(matrix, lower=True)
    except (LinAlgError, ValueError) as exc:
        raise NumericalError(f"Cholesky factorization failed: {exc}") from exc
    return cho_solve(factor, rhs)


def _padded_seed(problem: Problem) -> np.ndarray:
    seed = np.zeros(problem.n)
    seed[:problem.n_prev] = problem.f
    return seed


def loss(problem: Problem, state: SolverState, config: SolverConfig) -> float:
    residual = problem.S @ state.W + state.b - state.y
    fitting = state.y[:problem.n_prev] - problem.f
    return float(
        residual @ residual
        + config.alpha * state.y @ problem.L @ state.y
        + config.beta * fitting @ fitting
    )


def _least_squares(design: np.ndarray, target: np.ndarray, ridge: float) -> np.ndarray:
    normal = design.T @ design
    if ridge > 0:
        normal = normal + ridge * np.eye(design.shape[1])
    try:
        factor = cho_factor(normal, lower=True)
    except LinAlgError as exc:
        if ridge == 0:
            raise NumericalError("Normal matrix SᵀS is singular; set a positive ridge") from exc
        logger.warning("Normal matrix not positive definite even with ridge %g, using lstsq", ridge)
        return lstsq(design, target)[0]
    return cho_solve(factor, design.T @ target)


def update_w(problem: Problem, state: SolverState, ridge: float = 0.0) -> np.ndarray:
    """Least-squares W for fixed b and y: (SᵀS + ridge·I)^-1 Sᵀ(y - 1b).

    Raises:
        NumericalError: SᵀS is singular and ridge is 0
    """
    return _least_squares(problem.S, state.y - state.b, ridge)


def update_b(problem: Problem, state: SolverState) -> float:
    return float(np.mean(state.y - problem.S @ state.W))


def update_affine(problem: Problem, state: SolverState, ridge: float = 0.0) -> tuple[np.ndarray, float]:
    """W and b minimized together for fixed y.

    The result is the fixed point of alternating update_w and update_b: W is
    fitted on the column-centred design against the centred labels and b is
    then update_b's mean residual.

    Raises:
        NumericalError: the centred normal matrix is singular and ridge is 0
    """
    S = problem.S
    W = _least_squares(S - S.mean(axis=0), state.y - state.y.mean(), ridge)
    return W, update_b(problem, SolverState(W=W, b=state.b, y=state.y))


def _nonnegative_solve(matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """argmin_{y >= 0} ½ yᵀMy - rhsᵀy for a symmetric positive definite Z-matrix M.

    Grows the free set from empty: every fixed index with a negative gradient
    My - rhs joins it and the system is re-solved on the free set. For an
    M-matrix the iterates only increase, so free entries stay non-negative and
    the loop ends after at most n rounds with zero gradient on the free set and
    a non-negative gradient on the fixed one.
    """
    n = rhs.shape[0]
    tolerance = 1e-12 * (1.0 + np.abs(rhs).max(initial=0.0))
    free = np.zeros(n, dtype=bool)
    y = np.zeros(n)
    for _ in range(n + 1):
        entering = ~free & (matrix @ y - rhs < -tolerance)
        if not entering.any():
            break
        free |= entering
        idx = np.flatnonzero(free)
        y = np.zeros(n)
        y[idx] = np.maximum(_spd_solve(matrix[np.ix_(idx, idx)], rhs[idx]), 0.0)
    return y


def _fitting_weights(problem: Problem, config: SolverConfig) -> np.ndarray:
    weights = np.ones(problem.n)
    weights[:problem.n_prev] += config.beta
    return weights


def update_y(problem: Problem, state: SolverState, config: SolverConfig) -> np.ndarray:
    """Non-negative label vector for fixed W and b.

    exact-minimizer solves (Λ + αL_S) y = p + β·f̃ with Λ = diag(1 + β on frame t-1,
    1 on frame t) under y >= 0. clamp-then-smooth keeps only the frame t-1 part
    q = p + βf, clamps it at zero and returns (I + αL_S)^-1 q̂.
    """
    n, n_prev = problem.n, problem.n_prev
    prediction = problem.S @ state.W + state.b

    if Fidelity(config.fidelity) == Fidelity.CLAMP_THEN_SMOOTH:
        q = np.zeros(n)
        q[:n_prev] = prediction[:n_prev] + config.beta * problem.f
        q_hat = np.maximum(q, 0.0)
        y = _spd_solve(np.eye(n) + config.alpha * problem.L, q_hat)
        # (I + αL)^-1 is entrywise non-negative, only rounding can go below zero
        return np.maximum(y, 0.0)

    system = np.diag(_fitting_weights(problem, config)) + config.alpha * problem.L
    rhs = prediction + config.beta * _padded_seed(problem)
    return _nonnegative_solve(system, rhs)


def _refine_on_support(problem: Problem, state: SolverState, config: SolverConfig) -> SolverState | None:
    """Joint minimizer of the loss over (W, b, y) with y held at zero off its current support.

    Returns None when the minimizer leaves the non-negative orthant or does not
    lower the loss; the alternating updates then carry on from the given state.
    """
    n, d = problem.n, problem.d
    support = np.flatnonzero(state.y > 0)
    design = np.hstack([problem.S, np.ones((n, 1))])
    selection = np.eye(n)[:, support]
    label_block = selection.T @ (np.diag(_fitting_weights(problem, config)) + config.alpha * problem.L) @ selection

    system = np.block([
        [design.T @ design, -design.T @ selection],
        [-selection.T @ design, label_block],
    ])
    rhs = np.concatenate([np.zeros(d + 1), config.beta * _padded_seed(problem)[support]])
    solution = lstsq(system, rhs)[0]

    y_support = solution[d + 1:]
    if y_support.size and y_support.min() < -1e-12:
        return None
    y = np.zeros(n)
    y[support] = np.maximum(y_support, 0.0)
    candidate = SolverState(W=solution[:d], b=float(solution[d]), y=y)
    if loss(problem, candidate, config) > loss(problem, state, config):
        return None
    return candidate


def _relative_change(previous: float, current: float) -> float:
    if previous == 0:
        return 0.0 if current == 0 else np.inf
    return abs(previous - current) / abs(previous)


def solve(problem: Problem, config: SolverConfig) -> SolverState:
    """Alternate the joint (W, b) update and the y update until the loss settles.

    Starts from W = 0, b = 0 and y = (f, 0). Stops when the relative loss change
    drops below config.min_error or after config.max_iter iterations.
    """
    validate_problem(problem)
    state = SolverState(W=np.zeros(problem.d), b=0.0, y=_padded_seed(problem))
    previous = loss(problem, state, config)
    exact = Fidelity(config.fidelity) == Fidelity.EXACT

    for iteration in range(1, config.max_iter + 1):
        state.W, state.b = update_affine(problem, state, config.ridge)
        state.y = update_y(problem, state, config)
        if exact:
            refined = _refine_on_support(problem, state, config)
            if refined is not None:
                state.W, state.b, state.y = refined.W, refined.b, refined.y

        current = loss(problem, state, config)
        state.loss_trace.append(current)
        state.iterations = iteration
        logger.debug("iteration %d: loss %.10g", iteration, current)

        if _relative_change(previous, current) < config.min_error:
            state.converged = True
            break
        previous = current

    logger.debug(
        "solver finished after %d iteration(s), loss %.6g, converged=%s",
        state.iterations, state.loss_trace[-1], state.converged,
    )
    return state
