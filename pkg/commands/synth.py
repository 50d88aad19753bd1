from pathlib import Path
from typing import Optional

import click
from pydantic import TypeAdapter, ValidationError

from commands.common import guarded
from dataset import save_sequence, synth_sequence
from errors import FormatError
from schemas import SynthSpec

SPEC_LIST = TypeAdapter(list[SynthSpec] | SynthSpec)


def read_specs(spec_file: Path) -> list[SynthSpec]:
    """One SynthSpec object or a list of them from a JSON file.

    Raises:
        FormatError: unreadable file or invalid spec
    """
    try:
        text = Path(spec_file).read_text()
    except OSError as exc:
        raise FormatError(f"Cannot read synth spec {spec_file}: {exc}") from exc
    try:
        specs = SPEC_LIST.validate_json(text)
    except ValidationError as exc:
        raise FormatError(f"Invalid synth spec {spec_file}: {exc}") from exc
    return specs if isinstance(specs, list) else [specs]


@click.command("synth")
@click.option("--spec", "spec_file", type=click.Path(path_type=Path), default=None,
              help="JSON SynthSpec (object or list); default: one sequence with default settings")
@click.option("--output-root", type=click.Path(path_type=Path), required=True,
              help="Sequence root the sequences are written to")
@click.option("--seed", type=int, default=None, help="Override the seed of every spec")
@guarded
def synth_command(spec_file: Optional[Path], output_root: Path, seed: Optional[int]):
    """Generate synthetic sequences with exact ground-truth masks."""
    specs = read_specs(spec_file) if spec_file else [SynthSpec()]
    if seed is not None:
        specs = [spec.model_copy(update={"seed": seed}) for spec in specs]
    sequences = [synth_sequence(spec) for spec in specs]
    for sequence in sequences:
        path = save_sequence(sequence, output_root)
        click.echo(f"Wrote {sequence.name} ({len(sequence)} frames) to {path}")
