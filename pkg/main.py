import logging

import click

from commands.ablate import ablate_command
from commands.evaluate import eval_command
from commands.solve import solve_command
from commands.synth import synth_command
from commands.track import track_command
from config import core_config

# Настройка логгера
logging.basicConfig(
    level=core_config.LOG_LEVEL,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
)
logger = logging.getLogger(__name__)


class TrackerGroup(click.Group):
    """Command group whose usage errors exit with 1 (2 is kept for numerical errors)."""

    def make_context(self, info_name, args, parent=None, **extra):
        try:
            return super().make_context(info_name, args, parent=parent, **extra)
        except click.UsageError as exc:
            exc.exit_code = 1
            raise

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except click.UsageError as exc:
            exc.exit_code = 1
            raise


@click.group(cls=TrackerGroup)
def cli():
    """Superpixel graph tracker: track, eval, solve, synth, ablate."""


# Подключение команд
cli.add_command(track_command)
cli.add_command(eval_command)
cli.add_command(solve_command)
cli.add_command(synth_command)
cli.add_command(ablate_command)


if __name__ == "__main__":
    cli()
