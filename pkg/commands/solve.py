from pathlib import Path
from typing import Optional

import click
from pydantic import ValidationError

from artifacts import read_problem, write_json
from commands.common import guarded
from errors import ParameterError
from schemas import Fidelity, SolveResultSchema, SolverConfig
from solver import solve


@click.command("solve")
@click.argument("problem_file", type=click.Path(path_type=Path))
@click.option("--fidelity", type=click.Choice(["exact-minimizer", "clamp-then-smooth", "paper-literal"]),
              default="exact-minimizer", show_default=True, help="y-update of the solver")
@click.option("--alpha", type=float, default=None, help="Graph smoothness weight")
@click.option("--beta", type=float, default=None, help="Fitting weight")
@click.option("--min-error", type=float, default=None, help="Convergence threshold on the relative loss change")
@click.option("--max-iter", type=int, default=None, help="Iteration cap")
@click.option("--ridge", type=float, default=None, help="Ridge added to SᵀS in the W-update")
@click.option("--output", type=click.Path(path_type=Path), default=None,
              help="JSON file for y and the loss trace (default: stdout)")
@guarded
def solve_command(
        problem_file: Path,
        fidelity: str,
        alpha: Optional[float],
        beta: Optional[float],
        min_error: Optional[float],
        max_iter: Optional[int],
        ridge: Optional[float],
        output: Optional[Path],
):
    """Run the alternating solver on a plain-text problem file."""
    overrides = {"alpha": alpha, "beta": beta, "min_error": min_error, "max_iter": max_iter, "ridge": ridge}
    try:
        config = SolverConfig(
            fidelity=Fidelity(fidelity),
            **{key: value for key, value in overrides.items() if value is not None},
        )
    except ValidationError as exc:
        raise ParameterError(f"Invalid parameter: {exc}") from exc

    state = solve(read_problem(problem_file), config)
    result = SolveResultSchema(
        y=state.y.tolist(),
        loss_trace=state.loss_trace,
        iterations=state.iterations,
        converged=state.converged,
        fidelity=config.fidelity,
    )
    if output is None:
        click.echo(result.model_dump_json(indent=2))
    else:
        output.parent.mkdir(parents=True, exist_ok=True)
        write_json(output, result)
