"""Config loading, shared options and error handling of the CLI commands."""
import functools
import logging
from pathlib import Path
from typing import Any, Callable, Optional

import click
from pydantic import ValidationError

from errors import FormatError, ParameterError, TrackerError
from schemas import Fidelity, PropagationMode, RunConfig, ThresholdPolicy

logger = logging.getLogger(__name__)

# CLI option name -> RunConfig field
OVERRIDE_FIELDS = {
    "sequence_root": "sequence_root",
    "sequences": "sequences",
    "flow_dir": "flow_dir",
    "output_dir": "output_dir",
    "jobs": "jobs",
    "dump_debug": "dump_debug",
    "mode": "propagation_mode",
    "fidelity": "fidelity",
    "threshold_policy": "mask_threshold_policy",
    "mask_threshold": "mask_threshold",
    "superpixels": "target_superpixels",
    "sigma": "sigma",
    "lambda1": "lambda1",
    "lambda2": "lambda2",
    "alpha": "alpha",
    "beta": "beta",
    "min_error": "min_error",
    "max_iter": "max_iter",
    "region_expand": "region_expand",
    "fully_connected": "fully_connected",
}


def guarded(command: Callable) -> Callable:
    """Turn pipeline errors into a logged message and the error's exit code."""
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except TrackerError as exc:
            logger.error("%s: %s", type(exc).__name__, exc.detail)
            click.echo(f"Error: {exc.detail}", err=True)
            click.get_current_context().exit(exc.exit_code)
    return wrapper


def load_run_config(config_path: Optional[Path], overrides: dict[str, Any]) -> RunConfig:
    """RunConfig from an optional JSON file with CLI overrides applied on top.

    Options left unset (None, or an empty tuple for repeatable options) do
    not override anything.

    Raises:
        FormatError: the config file is missing or not valid JSON for RunConfig
        ParameterError: an override breaks a field constraint
    """
    base: dict[str, Any] = {}
    if config_path is not None:
        try:
            base = RunConfig.model_validate_json(Path(config_path).read_text()).model_dump()
        except OSError as exc:
            raise FormatError(f"Cannot read config {config_path}: {exc}") from exc
        except ValidationError as exc:
            raise FormatError(f"Invalid config {config_path}: {exc}") from exc

    for option, value in overrides.items():
        if value is None or value == ():
            continue
        if option == "fidelity":
            value = Fidelity(value)
        base[OVERRIDE_FIELDS[option]] = list(value) if isinstance(value, tuple) else value
    try:
        return RunConfig.model_validate(base)
    except ValidationError as exc:
        raise ParameterError(f"Invalid parameter: {exc}") from exc


def _choice(enum) -> click.Choice:
    return click.Choice([member.value for member in enum])


def tracker_options(command: Callable) -> Callable:
    """Options shared by the commands that run the tracker."""
    options = [
        click.option("--config", "config_path", type=click.Path(path_type=Path),
                      help="RunConfig JSON file; flags below override its values"),
        click.option("--sequence-root", type=click.Path(path_type=Path),
                     help="Directory with one sub-directory per sequence"),
        click.option("--sequence", "sequences", multiple=True,
                     help="Sequence to process (repeatable, default: all)"),
        click.option("--flow-dir", type=click.Path(path_type=Path),
                     help="Precomputed <frame>.flo files"),
        click.option("--output-dir", type=click.Path(path_type=Path), help="Where results are written"),
        click.option("--jobs", type=int, help="Sequences processed in parallel"),
        click.option("--mode", type=_choice(PropagationMode), help="Propagation mode"),
        click.option("--fidelity", type=click.Choice(["exact-minimizer", "clamp-then-smooth", "paper-literal"]),
                     help="y-update of the solver"),
        click.option("--threshold-policy", type=_choice(ThresholdPolicy), help="Score to mask rule"),
        click.option("--mask-threshold", type=float, help="Cut of the minmax policy"),
        click.option("--superpixels", type=int, help="Target superpixels per region"),
        click.option("--sigma", type=float, help="Spatial edge kernel scale"),
        click.option("--lambda1", type=float, help="Smoothing strength"),
        click.option("--lambda2", type=float, help="Sharpening strength"),
        click.option("--alpha", type=float, help="Graph smoothness weight"),
        click.option("--beta", type=float, help="Fitting weight"),
        click.option("--min-error", type=float, help="Convergence threshold"),
        click.option("--max-iter", type=int, help="Solver iteration cap"),
        click.option("--region-expand", type=float, help="Candidate region scale"),
        click.option("--fully-connected/--touching", default=None,
                     help="Spatial edges between all superpixel pairs or touching ones only"),
        click.option("--dump-debug", is_flag=True, default=None,
                     help="Write label maps, matrices and solver problems per frame"),
    ]
    for option in reversed(options):
        command = option(command)
    return command

