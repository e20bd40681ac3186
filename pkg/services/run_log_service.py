# services/run_log_service.py
import json
import logging
import time
from collections import Counter
from pathlib import Path
from typing import Any, Dict, List, Optional

from event_bus import EventBus
from events import StageFinished, StageStarted

logger = logging.getLogger(__name__)
RUN_LOG_FILENAME = "run_log.json"
MAX_WARNINGS = 200


class RunLogService:
    """
    Keeps a running record of one CLI invocation: how often each event fired,
    the warnings services reported, and how long each stage took.
    """

    def __init__(self, event_bus: EventBus, output_dir: Optional[Path] = None):
        self.event_bus = event_bus
        self.output_dir = Path(output_dir) if output_dir else None
        self.event_counts: Counter = Counter()
        self.warnings: List[Dict[str, Any]] = []
        self.stages: List[Dict[str, Any]] = []
        self._stage_started: Dict[str, float] = {}

        self.event_bus.subscribe("stage_started", self.handle_stage_started)
        self.event_bus.subscribe("stage_finished", self.handle_stage_finished)
        self.event_bus.subscribe("log_message_received", self.handle_log_message)
        for name in ("cohort_split_decided", "pattern_revised", "decision_rethought", "step_fell_back",
                     "step_dropped", "diary_generated"):
            self.event_bus.subscribe(name, self._counter(name))
        logger.info("RunLogService initialized.")

    def _counter(self, name: str):
        def count(*_args, **_kwargs):
            self.event_counts[name] += 1
        return count

    def handle_stage_started(self, event: StageStarted):
        self._stage_started[event.stage] = time.monotonic()
        self.event_counts["stage_started"] += 1

    def handle_stage_finished(self, event: StageFinished):
        started = self._stage_started.pop(event.stage, None)
        elapsed = round(time.monotonic() - started, 3) if started is not None else None
        self.stages.append({"stage": event.stage, "seconds": elapsed, "artifacts": list(event.artifacts)})
        self.event_counts["stage_finished"] += 1
        self.save()

    def handle_log_message(self, source: str, level: str, message: str):
        self.event_counts["log_message_received"] += 1
        if level in ("warning", "error", "critical") and len(self.warnings) < MAX_WARNINGS:
            self.warnings.append({"source": source, "level": level, "message": message})

    def snapshot(self) -> Dict[str, Any]:
        return {
            "event_counts": dict(sorted(self.event_counts.items())),
            "stages": list(self.stages),
            "warnings": list(self.warnings),
        }

    def save(self) -> Optional[Path]:
        if not self.output_dir:
            logger.warning("No output directory - run log not saved to disk.")
            return None
        path = self.output_dir / RUN_LOG_FILENAME
        path.parent.mkdir(parents=True, exist_ok=True)
        try:
            with open(path, "w", encoding="utf-8") as f:
                json.dump(self.snapshot(), f, indent=2)
            logger.debug(f"Run log saved to {path}.")
        except IOError as e:
            logger.error(f"Failed to save run log to {path}: {e}")
            return None
        return path
