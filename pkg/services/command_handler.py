# services/command_handler.py
import logging
from pathlib import Path
from typing import TYPE_CHECKING, Dict, List

from core.errors import ConfigError
from event_bus import EventBus

if TYPE_CHECKING:
    from core.application import Application

logger = logging.getLogger(__name__)

COMMANDS: Dict[str, str] = {
    "ingest": "Loads survey profile and trip tables into a validated dataset.",
    "synth": "Builds a synthetic dataset from a generator spec.",
    "cohort": "Refines the cohort tree with the rating gate.",
    "patterns": "Extracts and self-evaluates one pattern per cohort.",
    "generate": "Generates diaries for the target population.",
    "evaluate": "Compares generated diaries with the source dataset.",
    "report": "Writes a text summary of the run's artifacts.",
    "pipeline": "Runs every stage in order, starting from synth or ingest.",
}


def help_text() -> str:
    lines = ["subcommands:"]
    lines += [f"  {cmd.ljust(10)} {desc}" for cmd, desc in COMMANDS.items()]
    return "\n".join(lines)


class CommandHandler:
    """
    Maps CLI subcommands onto the application's stages.
    """

    def __init__(self, application: "Application", event_bus: EventBus):
        self.application = application
        self.event_bus = event_bus
        self.commands = dict(COMMANDS)
        logger.info("CommandHandler initialized and ready.")

    async def handle(self, command: str) -> List[Path]:
        command = command.lower()
        if command not in self.commands:
            raise ConfigError(f"Unknown subcommand '{command}'", known=sorted(self.commands))
        logger.info(f"Handling subcommand '{command}'")
        self.event_bus.emit("log_message_received", "CommandHandler", "info", f"Running '{command}'")
        runner = getattr(self.application, command)
        if command == "pipeline":
            return await runner()
        return await self.application.stage(command, runner)
