import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional

import click

from artifacts import write_json, write_mask_png
from commands.common import guarded, load_run_config, tracker_options
from dataset import list_sequences, load_sequence
from errors import InputError
from models import Sequence, TrackedSequence
from schemas import RunConfig, TrackResultSchema
from tracker import SegmentationTracker

logger = logging.getLogger(__name__)


def load_inputs(config: RunConfig) -> list[Sequence]:
    """Every requested sequence, read before anything is written."""
    if config.sequence_root is None:
        raise InputError("No sequence root given (--sequence-root or sequence_root in the config)")
    root = Path(config.sequence_root)
    if not root.is_dir():
        raise InputError(f"Sequence root {root} does not exist")
    if config.flow_dir is not None and not Path(config.flow_dir).is_dir():
        raise InputError(f"Flow directory {config.flow_dir} does not exist")
    names = config.sequences or list_sequences(root)
    if not names:
        raise InputError(f"No sequences found under {root}")
    return [load_sequence(root, name) for name in names]


def track_sequences(
        config: RunConfig,
        sequences: list[Sequence],
        debug_root: Optional[Path] = None,
) -> list[TrackedSequence]:
    """Track sequences, up to config.jobs of them at once."""
    tracker_config = config.tracker_config()

    def run(sequence: Sequence) -> TrackedSequence:
        debug_dir = debug_root / sequence.name / "debug" if debug_root else None
        flow_dir = Path(config.flow_dir) / sequence.name if config.flow_dir else None
        if flow_dir is not None and not flow_dir.is_dir():
            flow_dir = Path(config.flow_dir)
        logger.info("Tracking %s (%d frames, mode %s)", sequence.name, len(sequence),
                    tracker_config.propagation_mode.value)
        return SegmentationTracker(tracker_config, debug_dir).track_sequence(sequence, flow_dir)

    if config.jobs == 1 or len(sequences) == 1:
        return [run(sequence) for sequence in sequences]
    with ThreadPoolExecutor(max_workers=config.jobs) as pool:
        return list(pool.map(run, sequences))


def write_tracking(output_dir: Path, tracked: TrackedSequence, config: RunConfig) -> None:
    """masks/%05d.png plus result.json with boxes and diagnostics."""
    masks_dir = output_dir / tracked.name / "masks"
    masks_dir.mkdir(parents=True, exist_ok=True)
    for i, mask in enumerate(tracked.masks):
        write_mask_png(masks_dir / f"{i:05d}.png", mask)
    tracker_config = config.tracker_config()
    write_json(output_dir / tracked.name / "result.json", TrackResultSchema(
        name=tracked.name,
        mode=tracker_config.propagation_mode,
        fidelity=tracker_config.fidelity,
        boxes=tracked.boxes,
        diagnostics=tracked.diagnostics,
        config=tracker_config,
    ))


@click.command("track")
@tracker_options
@guarded
def track_command(config_path, **overrides):
    """Track every sequence under the sequence root and write masks and boxes."""
    config = load_run_config(config_path, overrides)
    sequences = load_inputs(config)

    output_dir = Path(config.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    debug_root = output_dir if config.dump_debug else None
    for tracked in track_sequences(config, sequences, debug_root):
        write_tracking(output_dir, tracked, config)
    write_json(output_dir / "config.json", config)
    click.echo(f"Tracked {len(sequences)} sequence(s) into {output_dir}")
